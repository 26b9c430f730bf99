"""Exponential-family response models with canonical links.

Each family exposes the cumulant ``b``, its first derivative (the mean /
inverse link) and second derivative (the variance function), plus the
negative log-likelihood used as the fitting loss.  Dispersion is fixed at 1
for binomial and poisson; the gaussian loss is the plain least-squares
objective ``sum (y - eta)^2 / 2`` whose minimizer does not depend on the
dispersion.  Response-only constants (``log y!`` terms and the like) are
dropped consistently, except the gaussian ``y^2/2`` term which is kept so
the loss is exactly half the squared error.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, xlogy

from .errors import ValidationError


class Family:
    """One exponential-family response distribution under its canonical link."""

    name: str = ""

    def cumulant(self, theta):
        raise NotImplementedError

    def mean(self, theta):
        """Inverse canonical link, b'(theta)."""
        raise NotImplementedError

    def variance(self, theta):
        """Variance function b''(theta); strictly positive."""
        raise NotImplementedError

    def response_constant(self, y):
        """Per-observation loss term that depends on the response only."""
        return np.zeros_like(np.asarray(y, dtype=float))

    def unit_deviance(self, y, mu):
        raise NotImplementedError

    def validate_responses(self, y) -> None:
        pass

    def __repr__(self):  # pragma: no cover
        return f"<family {self.name}>"


class Gaussian(Family):
    name = "gaussian"

    def cumulant(self, theta):
        return 0.5 * np.square(theta)

    def mean(self, theta):
        return np.asarray(theta, dtype=float)

    def variance(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def response_constant(self, y):
        return 0.5 * np.square(np.asarray(y, dtype=float))

    def unit_deviance(self, y, mu):
        return np.square(y - mu)


class Binomial(Family):
    name = "binomial"

    def cumulant(self, theta):
        # log(1 + e^theta), overflow-safe
        return np.logaddexp(0.0, theta)

    def mean(self, theta):
        return expit(theta)

    def variance(self, theta):
        p = expit(theta)
        return p * (1.0 - p)

    def unit_deviance(self, y, mu):
        eps = np.finfo(float).tiny
        mu = np.clip(mu, eps, 1.0 - 1e-15)
        return 2.0 * (xlogy(y, y / mu) + xlogy(1.0 - y, (1.0 - y) / (1.0 - mu)))

    def validate_responses(self, y) -> None:
        y = np.asarray(y)
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValidationError("binomial responses must be 0 or 1")


class Poisson(Family):
    name = "poisson"

    def cumulant(self, theta):
        with np.errstate(over="ignore"):
            return np.exp(theta)

    def mean(self, theta):
        with np.errstate(over="ignore"):
            return np.exp(theta)

    def variance(self, theta):
        with np.errstate(over="ignore"):
            return np.exp(theta)

    def unit_deviance(self, y, mu):
        mu = np.maximum(mu, np.finfo(float).tiny)
        return 2.0 * (xlogy(y, y / mu) - (y - mu))

    def validate_responses(self, y) -> None:
        y = np.asarray(y, dtype=float)
        if y.size and (np.any(y < 0) or np.any(y != np.floor(y))):
            raise ValidationError("poisson responses must be nonnegative integers")


GAUSSIAN = Gaussian()
BINOMIAL = Binomial()
POISSON = Poisson()

_FAMILIES = {f.name: f for f in (GAUSSIAN, BINOMIAL, POISSON)}


def get_family(tag) -> Family:
    """Look up a family by its tag ('gaussian', 'binomial', 'poisson')."""
    if isinstance(tag, Family):
        return tag
    try:
        return _FAMILIES[tag]
    except KeyError:
        raise ValidationError(f"unknown family {tag!r}; expected one of {sorted(_FAMILIES)}")


def neg_loglik(family: Family, eta, y, weights=None) -> float:
    """Negative log-likelihood at linear predictors ``eta``.

    Constants in the response alone are dropped except the gaussian
    ``y^2/2`` term; the gaussian value is exactly ``sum (y - eta)^2 / 2``.
    May return ``inf`` when the cumulant overflows; raises if ``eta``
    itself is not finite.
    """
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta.shape != y.shape:
        raise ValidationError(f"{len(eta)} linear predictors for {len(y)} responses")
    if not np.all(np.isfinite(eta)):
        raise ValidationError("non-finite linear predictor")
    terms = family.cumulant(eta) - y * eta + family.response_constant(y)
    if weights is not None:
        terms = np.asarray(weights, dtype=float) * terms
    return float(np.sum(terms))


def neg_loglik_grad(family: Family, X, y, beta, weights=None) -> np.ndarray:
    """Gradient of :func:`neg_loglik` in ``beta`` for ``eta = X @ beta``."""
    X = np.asarray(X, dtype=float)
    resid = family.mean(X @ beta) - np.asarray(y, dtype=float)
    if weights is not None:
        resid = np.asarray(weights, dtype=float) * resid
    return X.T @ resid


def predict_mean(family: Family, coefficients, rows) -> np.ndarray:
    """Mean responses ``b'(x^T beta)`` for each design row."""
    rows = np.asarray(rows, dtype=float)
    return family.mean(rows @ np.asarray(coefficients, dtype=float))
