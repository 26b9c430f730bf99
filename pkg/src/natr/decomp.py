"""Tucker and CP decompositions of dense tensors.

Tucker factors come from truncated higher-order SVD (one SVD per mode, core
projected through the transposed factors), with an optional orthogonal-
iteration refinement.  CP factors come from alternating least squares.  A
deterministic sign convention (largest-magnitude entry of each factor column
made positive, first index winning ties) keeps results reproducible across
runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .rng import substream
from .tensor_ops import matricize, mode_product, multi_mode_product, outer_rank1

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class TuckerFactors:
    """Core tensor plus one orthonormal-column factor matrix per mode."""

    core: np.ndarray
    factors: list

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    def to_json(self) -> dict:
        from .data import tensor_to_json

        return {
            "core": tensor_to_json(self.core),
            "factors": [matrix_to_json(u) for u in self.factors],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TuckerFactors":
        from .data import tensor_from_json

        return cls(
            core=tensor_from_json(obj["core"]),
            factors=[matrix_from_json(m) for m in obj["factors"]],
        )


@dataclass(frozen=True)
class CpFactors:
    """Weight per component plus unit-norm factor columns per mode."""

    weights: np.ndarray
    factors: list

    @property
    def rank(self) -> int:
        return len(self.weights)

    def to_json(self) -> dict:
        return {
            "weights": np.asarray(self.weights, dtype=float).tolist(),
            "factors": [matrix_to_json(u) for u in self.factors],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CpFactors":
        return cls(
            weights=np.asarray(obj["weights"], dtype=float),
            factors=[matrix_from_json(m) for m in obj["factors"]],
        )


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=float)
    return {"rows": m.shape[0], "cols": m.shape[1], "data": m.reshape(-1).tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=float)
    rows, cols = int(obj["rows"]), int(obj["cols"])
    if data.size != rows * cols:
        raise ValidationError(f"matrix data length {data.size} != {rows}x{cols}")
    return data.reshape(rows, cols)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _check_ranks(shape: Sequence[int], ranks: Sequence[int]) -> tuple:
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise ValidationError(f"{len(ranks)} ranks for an order-{len(shape)} tensor")
    for d, (r, s) in enumerate(zip(ranks, shape)):
        if not 1 <= r <= s:
            raise ValidationError(f"rank {r} out of range 1..{s} in mode {d}")
    return ranks


def hosvd(t: np.ndarray, ranks: Sequence[int]) -> TuckerFactors:
    """Truncated higher-order SVD at the given multilinear ranks.

    Factor ``d`` holds the leading left singular vectors of the mode-``d``
    matricization; the core is the tensor projected through the transposed
    factors.  Exact when every rank equals the mode size.
    """
    t = np.asarray(t, dtype=float)
    ranks = _check_ranks(t.shape, ranks)
    factors = []
    for d, r in enumerate(ranks):
        u, _, _ = np.linalg.svd(matricize(t, d), full_matrices=False)
        factors.append(_fix_signs(u[:, :r]))
    core = multi_mode_product(t, [u.T for u in factors])
    return TuckerFactors(core=core, factors=factors)


def hooi(
    t: np.ndarray,
    ranks: Sequence[int],
    max_sweeps: int = 50,
    tol: float = 1e-12,
) -> TuckerFactors:
    """Orthogonal-iteration refinement of the truncated HOSVD.

    Reconstruction error is non-increasing across sweeps and never exceeds
    the plain truncated HOSVD's error for the same ranks.
    """
    t = np.asarray(t, dtype=float)
    ranks = _check_ranks(t.shape, ranks)
    best = hosvd(t, ranks)
    norm_t = np.linalg.norm(t)
    best_err = _tucker_error(t, best)
    factors = [u.copy() for u in best.factors]
    for _ in range(max_sweeps):
        for d in range(t.ndim):
            partial = np.asarray(t)
            for k in range(t.ndim):
                if k != d:
                    partial = mode_product(partial, factors[k].T, k)
            u, _, _ = np.linalg.svd(matricize(partial, d), full_matrices=False)
            factors[d] = _fix_signs(u[:, : ranks[d]])
        core = multi_mode_product(t, [u.T for u in factors])
        cand = TuckerFactors(core=core, factors=[u.copy() for u in factors])
        err = _tucker_error(t, cand)
        if err < best_err - tol * max(norm_t, 1.0):
            best, best_err = cand, err
        else:
            break
    return best


def _tucker_error(t: np.ndarray, f: TuckerFactors) -> float:
    return float(np.linalg.norm(t - tucker_reconstruct(f)))


def tucker_reconstruct(f: TuckerFactors) -> np.ndarray:
    """Rebuild the tensor: core contracted with every factor matrix."""
    return multi_mode_product(f.core, list(f.factors))


def cp_reconstruct(f: CpFactors) -> np.ndarray:
    """Sum of weighted rank-one tensors from the factor columns."""
    shape = tuple(u.shape[0] for u in f.factors)
    out = np.zeros(shape)
    for r, w in enumerate(np.asarray(f.weights, dtype=float)):
        out += w * outer_rank1([u[:, r] for u in f.factors])
    return out


def _khatri_rao(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product; first operand's rows vary slowest."""

    def kr(a, b):
        r = a.shape[1]
        return (a[:, None, :] * b[None, :, :]).reshape(-1, r)

    return reduce(kr, mats)


def cp_als(
    t: np.ndarray,
    rank: int,
    max_sweeps: int = 200,
    tol: float = 1e-10,
    seed: int = 0,
) -> CpFactors:
    """CP decomposition by alternating least squares.

    Initialized from the per-mode HOSVD singular vectors (random extra
    columns when the requested rank exceeds a mode's size).  Each normal-
    equation solve is ridge-damped by 1e-10 when the factor Gram matrix is
    near-singular.  Returns unit-norm columns with magnitudes absorbed into
    the weights, components sorted by decreasing weight magnitude.
    """
    t = np.asarray(t, dtype=float)
    rank = int(rank)
    if rank < 1:
        raise ValidationError("cp rank must be >= 1")
    rng = substream(seed, 97)
    factors = []
    for d in range(t.ndim):
        u, _, _ = np.linalg.svd(matricize(t, d), full_matrices=False)
        u = _fix_signs(u)
        if rank <= u.shape[1]:
            factors.append(u[:, :rank].copy())
        else:
            extra = rng.standard_normal((u.shape[0], rank - u.shape[1]))
            extra /= np.linalg.norm(extra, axis=0)
            factors.append(np.hstack([u, extra]))

    norm_t = np.linalg.norm(t)
    prev_err = np.inf
    for _ in range(max_sweeps):
        for d in range(t.ndim):
            others = [factors[k] for k in range(t.ndim - 1, -1, -1) if k != d]
            kr = _khatri_rao(others)
            gram = np.ones((rank, rank))
            for k in range(t.ndim):
                if k != d:
                    gram *= factors[k].T @ factors[k]
            rhs = matricize(t, d) @ kr
            if np.linalg.cond(gram) > 1e12:
                gram = gram + 1e-10 * np.eye(rank)
            factors[d] = np.linalg.solve(gram.T, rhs.T).T
        err = np.linalg.norm(t - cp_reconstruct(CpFactors(np.ones(rank), factors)))
        if abs(prev_err - err) <= tol * max(norm_t, 1.0):
            prev_err = err
            break
        prev_err = err

    # normalize columns, absorb magnitudes and sign flips into the weights
    weights = np.ones(rank)
    for d in range(t.ndim):
        norms = np.linalg.norm(factors[d], axis=0)
        norms = np.where(norms > 0, norms, 1.0)
        factors[d] = factors[d] / norms
        weights *= norms
        idx = np.argmax(np.abs(factors[d]), axis=0)
        signs = np.sign(factors[d][idx, np.arange(rank)])
        signs[signs == 0] = 1.0
        factors[d] = factors[d] * signs
        weights *= signs
    order = np.argsort(-np.abs(weights), kind="stable")
    return CpFactors(weights=weights[order], factors=[u[:, order] for u in factors])


def count_params(shape: Sequence[int], ranks, kind: str) -> int:
    """Free-parameter count of a decomposed coefficient tensor.

    ``kind`` is ``"tucker"`` (per-mode ranks), ``"cp"`` (single rank), or
    ``"full"`` (no decomposition).
    """
    shape = tuple(int(s) for s in shape)
    d = len(shape)
    if kind == "full":
        return int(np.prod(shape))
    if kind == "cp":
        r = int(ranks if np.isscalar(ranks) else ranks[0])
        if r < 1:
            raise ValidationError("cp rank must be >= 1")
        if d == 2:
            return r * (shape[0] + shape[1]) - r * r
        if d > 2:
            return r * (sum(shape) - d + 1)
        raise ValidationError("cp parameter count needs order >= 2")
    if kind == "tucker":
        rk = _check_ranks(shape, ranks)
        if d == 2:
            i1, i2 = shape
            r1, r2 = rk
            return i1 * r1 + i2 * r2 + r1 * r2 - r1 * r1 - r2 * r2
        if d > 2:
            return int(
                sum(i * r for i, r in zip(shape, rk))
                + np.prod(rk)
                - sum(r * r for r in rk)
            )
        raise ValidationError("tucker parameter count needs order >= 2")
    raise ValidationError(f"unknown decomposition kind {kind!r}")
