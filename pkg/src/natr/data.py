"""Datasets of tensor predictors, standardization, and their JSON formats.

File formats (all data in vectorization order, first index fastest):

* tensor file:  ``{"shape": [I1, ..., ID], "data": [...]}``
* dataset file: ``{"shape": [...], "family": "gaussian"|"binomial"|"poisson",
  "predictors": [[...], ...], "responses": [...]}``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .families import Family, get_family
from .fileio import atomic_write_json, read_json
from .tensor_ops import from_vector, vectorize


@dataclass(frozen=True)
class TensorDataset:
    """Paired tensor predictors and scalar responses under one family.

    ``predictors`` is stacked as ``(n, I_1, ..., I_D)``; values are
    immutable by convention and safe to share across threads.
    """

    predictors: np.ndarray
    responses: np.ndarray
    family: Family

    def __post_init__(self):
        preds = np.asarray(self.predictors, dtype=float)
        resp = np.asarray(self.responses, dtype=float)
        if preds.ndim < 2:
            raise ValidationError("predictors must be stacked as (n, I_1, ..., I_D)")
        if resp.ndim != 1 or len(resp) != len(preds):
            raise ValidationError(
                f"{len(preds)} predictors with {resp.size} responses"
            )
        fam = get_family(self.family)
        fam.validate_responses(resp)
        object.__setattr__(self, "predictors", preds)
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "family", fam)

    @property
    def n(self) -> int:
        return len(self.responses)

    @property
    def shape(self) -> tuple:
        return self.predictors.shape[1:]

    def design_matrix(self) -> np.ndarray:
        """Vectorized predictors, one row per observation."""
        return stack_vectorized(self.predictors)


def stack_vectorized(predictors: np.ndarray) -> np.ndarray:
    """Vectorize each tensor in a stack ``(n, I_1, ..., I_D)`` into a row."""
    predictors = np.asarray(predictors, dtype=float)
    n = predictors.shape[0]
    moved = np.moveaxis(predictors, 0, -1)  # (*shape, n)
    return moved.reshape(-1, n, order="F").T


@dataclass(frozen=True)
class StandardizationTransform:
    """Per-position centering and scaling fitted on a training set."""

    means: np.ndarray
    sds: np.ndarray

    def apply(self, predictors: np.ndarray) -> np.ndarray:
        predictors = np.asarray(predictors, dtype=float)
        return (predictors - self.means) / self.sds

    def to_json(self) -> dict:
        return {
            "shape": list(self.means.shape),
            "means": vectorize(self.means).tolist(),
            "sds": vectorize(self.sds).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StandardizationTransform":
        shape = obj["shape"]
        return cls(
            means=from_vector(np.asarray(obj["means"], dtype=float), shape),
            sds=from_vector(np.asarray(obj["sds"], dtype=float), shape),
        )


def standardize(ds: TensorDataset) -> tuple[TensorDataset, StandardizationTransform]:
    """Center and scale every predictor position to sample mean 0, sd 1.

    The sample standard deviation uses the ``n - 1`` denominator.  Positions
    with zero variance are centered only; their transform sd is set to 1 so
    no division by zero occurs.  Requires at least two observations.
    """
    if ds.n < 2:
        raise ValidationError("standardization needs at least two observations")
    means = ds.predictors.mean(axis=0)
    sds = ds.predictors.std(axis=0, ddof=1)
    sds = np.where(sds > 0, sds, 1.0)
    transform = StandardizationTransform(means=means, sds=sds)
    out = TensorDataset(
        predictors=transform.apply(ds.predictors),
        responses=ds.responses,
        family=ds.family,
    )
    return out, transform


# ---------------------------------------------------------------------------
# JSON formats


def tensor_to_json(t: np.ndarray) -> dict:
    t = np.asarray(t, dtype=float)
    return {"shape": list(t.shape), "data": vectorize(t).tolist()}


def tensor_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise ValidationError("tensor JSON must have 'shape' and 'data' keys")
    shape = obj["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) < 1
        or any(not isinstance(s, int) or s < 1 for s in shape)
    ):
        raise ValidationError(f"bad tensor shape {shape!r}")
    data = np.asarray(obj["data"], dtype=float)
    if data.ndim != 1 or data.size != int(np.prod(shape)):
        raise ValidationError(
            f"tensor data length {data.size} does not match shape {shape}"
        )
    return from_vector(data, shape)


def save_tensor(path, t: np.ndarray) -> None:
    atomic_write_json(path, tensor_to_json(t))


def load_tensor(path) -> np.ndarray:
    return tensor_from_json(read_json(path))


def dataset_to_json(ds: TensorDataset) -> dict:
    return {
        "shape": list(ds.shape),
        "family": ds.family.name,
        "predictors": [vectorize(ds.predictors[i]).tolist() for i in range(ds.n)],
        "responses": ds.responses.tolist(),
    }


def dataset_from_json(obj) -> TensorDataset:
    for key in ("shape", "family", "predictors", "responses"):
        if not isinstance(obj, dict) or key not in obj:
            raise ValidationError(f"dataset JSON missing key {key!r}")
    shape = obj["shape"]
    if not isinstance(shape, list) or any(not isinstance(s, int) or s < 1 for s in shape):
        raise ValidationError(f"bad dataset shape {shape!r}")
    size = int(np.prod(shape))
    rows = obj["predictors"]
    if not isinstance(rows, list) or any(len(r) != size for r in rows):
        raise ValidationError("every predictor must have prod(shape) entries")
    preds = np.stack([from_vector(np.asarray(r, dtype=float), shape) for r in rows]) if rows else np.empty((0, *shape))
    return TensorDataset(
        predictors=preds,
        responses=np.asarray(obj["responses"], dtype=float),
        family=get_family(obj["family"]),
    )


def save_dataset(path, ds: TensorDataset) -> None:
    atomic_write_json(path, dataset_to_json(ds))


def load_dataset(path) -> TensorDataset:
    return dataset_from_json(read_json(path))
