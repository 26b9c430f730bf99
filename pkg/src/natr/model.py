"""Fitted-model container shared by every regression method.

Coefficients live on the standardized predictor scale; prediction applies
the stored standardization before the inner product and the inverse link.
``destandardized_coefficients`` maps back to the raw predictor scale for
comparison against a generating coefficient tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import StandardizationTransform, stack_vectorized, tensor_from_json, tensor_to_json
from .decomp import matrix_from_json, matrix_to_json
from .errors import ValidationError
from .families import get_family
from .fileio import atomic_write_json, read_json
from .tensor_ops import vectorize


@dataclass
class FitResult:
    """Everything a fitted tensor regression needs to predict and report."""

    method: str
    family: str
    shape: tuple
    coefficients: np.ndarray  # tensor, standardized predictor scale
    intercept: float
    standardization: StandardizationTransform
    loss_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    config: dict = field(default_factory=dict)
    core: np.ndarray | None = None
    factors: list | None = None
    weights: np.ndarray | None = None
    raw_average: np.ndarray | None = None

    def linear_predictor(self, predictors: np.ndarray) -> np.ndarray:
        predictors = np.asarray(predictors, dtype=float)
        if predictors.shape[1:] != tuple(self.shape):
            raise ValidationError(
                f"predictors of shape {predictors.shape[1:]} for a model on {tuple(self.shape)}"
            )
        rows = stack_vectorized(self.standardization.apply(predictors))
        return rows @ vectorize(self.coefficients) + self.intercept

    def predict(self, predictors: np.ndarray) -> np.ndarray:
        """Mean responses for a stack of raw-scale predictor tensors."""
        return get_family(self.family).mean(self.linear_predictor(predictors))

    def destandardized_coefficients(self) -> np.ndarray:
        """Coefficient tensor on the raw predictor scale."""
        return self.coefficients / self.standardization.sds

    def to_json(self) -> dict:
        obj = {
            "family": self.family,
            "method": self.method,
            "shape": list(self.shape),
            "coefficients": vectorize(self.coefficients).tolist(),
            "intercept": float(self.intercept),
            "core": None if self.core is None else tensor_to_json(self.core),
            "factors": None
            if self.factors is None
            else [matrix_to_json(u) for u in self.factors],
            "standardization": self.standardization.to_json(),
            "trace": [float(v) for v in self.loss_trace],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "config": self.config,
        }
        if self.weights is not None:
            obj["weights"] = np.asarray(self.weights, dtype=float).tolist()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FitResult":
        for key in ("family", "method", "shape", "coefficients", "standardization"):
            if key not in obj:
                raise ValidationError(f"model JSON missing key {key!r}")
        shape = tuple(obj["shape"])
        from .tensor_ops import from_vector

        coef = from_vector(np.asarray(obj["coefficients"], dtype=float), shape)
        return cls(
            method=obj["method"],
            family=get_family(obj["family"]).name,
            shape=shape,
            coefficients=coef,
            intercept=float(obj.get("intercept", 0.0)),
            standardization=StandardizationTransform.from_json(obj["standardization"]),
            loss_trace=list(obj.get("trace", [])),
            iterations=int(obj.get("iterations", 0)),
            converged=bool(obj.get("converged", True)),
            config=obj.get("config", {}),
            core=None if obj.get("core") is None else tensor_from_json(obj["core"]),
            factors=None
            if obj.get("factors") is None
            else [matrix_from_json(m) for m in obj["factors"]],
            weights=None
            if obj.get("weights") is None
            else np.asarray(obj["weights"], dtype=float),
        )


def save_model(path, result: FitResult) -> None:
    atomic_write_json(path, result.to_json())


def load_model(path) -> FitResult:
    return FitResult.from_json(read_json(path))
