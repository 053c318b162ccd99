"""Poisson and Negative Binomial regression with log link.

Coefficients are fitted by iteratively reweighted least squares. For the
Negative Binomial family the dispersion ``theta`` (``Var = mu + mu**2/theta``)
is estimated by alternating an IRLS step at fixed ``theta`` with a bounded
one-dimensional likelihood maximisation over ``log(theta)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, xlogy

from .design import DesignMatrix, FeatureConfig

FAMILIES = ("poisson", "negbin")

# exp() overflows in double precision above this
MAX_ETA = math.log(np.finfo(float).max)
# numpy's Poisson sampler rejects larger rates
MAX_POISSON_RATE = 1.0e17

THETA_BOUNDS = (1e-3, 1e8)
RANK_TOL = 1e-7


class MeanOverflowError(FloatingPointError):
    """The conditional mean is not representable as a finite double."""


class ModelFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FamilySpec:
    family: str = "poisson"
    theta: float | None = None
    link: str = "log"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.link != "log":
            raise ValueError("only the log link is supported")
        if self.theta is not None and not self.theta > 0:
            raise ValueError("theta must be positive")

    @property
    def is_negbin(self) -> bool:
        return self.family == "negbin"


@dataclass(frozen=True)
class FitControls:
    tol: float = 1e-8
    max_iter: int = 100
    theta_tol: float = 1e-8
    max_outer: int = 50


@dataclass(frozen=True)
class FittedModel:
    family: FamilySpec
    column_names: tuple[str, ...]
    beta: np.ndarray = field(repr=False)
    log_likelihood: float
    n_obs: int
    n_params: int
    converged: bool
    iterations: int
    bse: np.ndarray | None = field(default=None, repr=False)
    deviance: float = float("nan")
    dropped_columns: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    features: FeatureConfig | None = None

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.column_names, map(float, self.beta)))

    @property
    def theta(self) -> float | None:
        return self.family.theta

    def with_features(self, features: FeatureConfig) -> "FittedModel":
        return replace(self, features=features)

    def to_dict(self) -> dict:
        return {
            "family": self.family.family,
            "link": self.family.link,
            "theta": self.family.theta,
            "coefficients": self.coefficients,
            "std_errors": None if self.bse is None else dict(zip(self.column_names, map(float, self.bse))),
            "log_likelihood": self.log_likelihood,
            "deviance": self.deviance,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
            "converged": self.converged,
            "iterations": self.iterations,
            "dropped_columns": list(self.dropped_columns),
            "warnings": list(self.warnings),
            "features": None if self.features is None else self.features.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        names = tuple(d["coefficients"])
        bse = d.get("std_errors")
        return cls(
            family=FamilySpec(d["family"], d.get("theta"), d.get("link", "log")),
            column_names=names,
            beta=np.array([d["coefficients"][n] for n in names], dtype=float),
            bse=None if bse is None else np.array([bse[n] for n in names], dtype=float),
            log_likelihood=float(d["log_likelihood"]),
            deviance=float(d.get("deviance", float("nan"))),
            n_obs=int(d["n_obs"]),
            n_params=int(d["n_params"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            dropped_columns=tuple(d.get("dropped_columns", ())),
            warnings=tuple(d.get("warnings", ())),
            features=None if d.get("features") is None else FeatureConfig.from_dict(d["features"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        return cls.from_dict(json.loads(text))


# -- densities ---------------------------------------------------------------


def poisson_logpmf(y, mu):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return xlogy(y, mu) - mu - gammaln(y + 1)


def negbin_logpmf(y, mu, theta):
    """Log of ``Gamma(theta+y) / (y! Gamma(theta)) (mu/(theta+mu))**y (theta/(theta+mu))**theta``."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return (
        gammaln(theta + y)
        - gammaln(y + 1)
        - gammaln(theta)
        + xlogy(y, mu)
        - xlogy(y, theta + mu)
        - theta * np.log1p(mu / theta)
    )


def _loglik(y, mu, theta):
    if theta is None:
        return float(np.sum(poisson_logpmf(y, mu)))
    return float(np.sum(negbin_logpmf(y, mu, theta)))


def _deviance(y, mu, theta):
    if theta is None:
        return float(2.0 * np.sum(xlogy(y, y / mu) - (y - mu)))
    return float(2.0 * np.sum(xlogy(y, y / mu) - (y + theta) * np.log((y + theta) / (mu + theta))))


# -- fitting -----------------------------------------------------------------


def _independent_columns(X: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Mask of columns kept after dropping those (numerically) spanned by earlier ones."""
    norms = np.linalg.norm(X, axis=0)
    keep = norms > 0
    if not keep.any():
        return keep
    Xs = X[:, keep] / norms[keep]
    r = np.abs(np.diag(np.linalg.qr(Xs, mode="r")))
    keep_idx = np.flatnonzero(keep)
    keep[keep_idx[r <= tol]] = False
    return keep


def _weights(mu, theta):
    return mu if theta is None else mu / (1.0 + mu / theta)


def _wls_solve(X, w, z):
    XtW = X.T * w
    A = XtW @ X
    b = XtW @ z
    try:
        c = scipy.linalg.cho_factor(A, check_finite=False)
        sol = scipy.linalg.cho_solve(c, b, check_finite=False)
        if np.all(np.isfinite(sol)):
            return sol
    except (np.linalg.LinAlgError, ValueError):
        pass
    sw = np.sqrt(w)
    return np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)[0]


def _mean(X, beta):
    eta = X @ beta
    if not np.all(np.isfinite(eta)) or eta.max(initial=-np.inf) > MAX_ETA:
        return eta, None
    return eta, np.exp(eta)


def _irls(X, y, theta, beta, controls: FitControls):
    eta, mu = _mean(X, beta)
    if mu is None:
        raise ModelFitError("starting values give a non-finite mean")
    dev = _deviance(y, mu, theta)
    converged = False
    it = 0
    for it in range(1, controls.max_iter + 1):
        w = _weights(mu, theta)
        z = eta + (y - mu) / mu
        beta_new = _wls_solve(X, w, z)
        for _ in range(40):
            eta_new, mu_new = _mean(X, beta_new)
            if mu_new is not None and np.all(mu_new > 0):
                dev_new = _deviance(y, mu_new, theta)
                if np.isfinite(dev_new) and dev_new <= dev * (1 + 1e-12) + 1e-12:
                    break
            beta_new = 0.5 * (beta + beta_new)
        else:
            break
        rel = abs(dev - dev_new) / (abs(dev_new) + 0.1)
        beta, eta, mu, dev = beta_new, eta_new, mu_new, dev_new
        if rel < controls.tol:
            converged = True
            break
    return beta, mu, dev, it, converged


def _theta_step(y, mu, controls: FitControls) -> float:
    lo, hi = np.log(THETA_BOUNDS[0]), np.log(THETA_BOUNDS[1])
    res = minimize_scalar(
        lambda lt: -_loglik(y, mu, math.exp(lt)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": controls.theta_tol},
    )
    return float(math.exp(res.x))


def _initial_beta(X, y):
    beta = np.zeros(X.shape[1])
    first = X[:, 0]
    if np.ptp(first) == 0 and first[0] != 0:
        beta[0] = math.log(y.mean() + 0.1) / first[0]
    return beta


def fit_glm(
    design: DesignMatrix | np.ndarray,
    response: Sequence[float],
    family: FamilySpec | str = "poisson",
    controls: FitControls | None = None,
    column_names: Sequence[str] | None = None,
    features: FeatureConfig | None = None,
) -> FittedModel:
    """Maximum likelihood fit of ``E[y | z] = exp(beta . z)``.

    ``design`` is a :class:`DesignMatrix` or a plain 2-d array (with
    ``column_names``). Columns numerically spanned by earlier ones are dropped
    and reported in ``dropped_columns``. Non-convergence is reported through
    ``converged=False`` rather than raised.
    """
    if isinstance(family, str):
        family = FamilySpec(family)
    controls = controls or FitControls()
    if isinstance(design, DesignMatrix):
        X = design.rows
        names = list(design.column_names)
    else:
        X = np.asarray(design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        names = list(column_names) if column_names is not None else [f"x{i}" for i in range(X.shape[1])]
    y = np.asarray(response, dtype=float)
    if len(y) != X.shape[0]:
        raise ValueError(f"response length {len(y)} != design rows {X.shape[0]}")
    if len(names) != X.shape[1]:
        raise ValueError("column_names does not match design width")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite and non-negative")

    notes = []
    keep = _independent_columns(X)
    dropped = tuple(n for n, k in zip(names, keep) if not k)
    if dropped:
        notes.append(f"dropped collinear columns: {', '.join(dropped)}")
    X = X[:, keep]
    names = [n for n, k in zip(names, keep) if k]

    beta = _initial_beta(X, y)
    beta, mu, dev, iterations, converged = _irls(X, y, None, beta, controls)
    theta = None
    if family.is_negbin:
        ll = _loglik(y, mu, None)
        converged_outer = False
        for _ in range(controls.max_outer):
            new_theta = _theta_step(y, mu, controls)
            beta, mu, dev, it, converged = _irls(X, y, new_theta, beta, controls)
            iterations += it
            new_ll = _loglik(y, mu, new_theta)
            theta_change = 0.0 if theta is None else abs(math.log(new_theta / theta))
            small = abs(new_ll - ll) < controls.tol * (abs(new_ll) + 1.0) and theta_change < 1e-6
            theta, ll = new_theta, new_ll
            if small and converged:
                converged_outer = True
                break
        converged = converged and converged_outer
        for bound in THETA_BOUNDS:
            if math.isclose(theta, bound, rel_tol=1e-4):
                notes.append(f"theta at search bound {bound:g}")
    if not converged:
        notes.append("IRLS did not converge")

    ll = _loglik(y, mu, theta)
    try:
        w = _weights(mu, theta)
        cov = np.linalg.inv((X.T * w) @ X)
        bse = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        bse = None
    return FittedModel(
        family=FamilySpec(family.family, theta, family.link),
        column_names=tuple(names),
        beta=beta,
        bse=bse,
        log_likelihood=ll,
        deviance=dev,
        n_obs=len(y),
        n_params=len(names) + (1 if family.is_negbin else 0),
        converged=bool(converged and np.isfinite(ll)),
        iterations=iterations,
        dropped_columns=dropped,
        warnings=tuple(notes),
        features=features,
    )


# -- evaluation --------------------------------------------------------------


def _model_rows(model: FittedModel, design: DesignMatrix | np.ndarray) -> np.ndarray:
    if isinstance(design, DesignMatrix):
        pos = {n: i for i, n in enumerate(design.column_names)}
        missing = [n for n in model.column_names if n not in pos]
        if missing:
            raise ValueError(f"design lacks model columns {missing}")
        return design.rows[:, [pos[n] for n in model.column_names]]
    X = np.asarray(design, dtype=float)
    if X.shape[1] != len(model.beta):
        raise ValueError("design width does not match the model")
    return X


def fitted_mean(model: FittedModel, design: DesignMatrix | np.ndarray) -> np.ndarray:
    eta = _model_rows(model, design) @ model.beta
    if eta.max(initial=-np.inf) > MAX_ETA:
        raise MeanOverflowError("linear predictor overflows exp")
    return np.exp(eta)


def log_likelihood(model: FittedModel, design: DesignMatrix | np.ndarray, response) -> float:
    return _loglik(np.asarray(response, dtype=float), fitted_mean(model, design), model.family.theta)


def score(model: FittedModel, design: DesignMatrix | np.ndarray, response) -> np.ndarray:
    """Gradient of the log-likelihood with respect to ``beta``."""
    X = _model_rows(model, design)
    y = np.asarray(response, dtype=float)
    mu = np.exp(X @ model.beta)
    theta = model.family.theta
    r = y - mu if theta is None else (y - mu) / (1.0 + mu / theta)
    return X.T @ r


def information_criteria(model: FittedModel, standardized: bool = False) -> dict[str, float]:
    ll = model.log_likelihood
    aic = 2.0 * model.n_params - 2.0 * ll
    bic = model.n_params * math.log(model.n_obs) - 2.0 * ll
    if standardized:
        aic /= model.n_obs
        bic /= model.n_obs
    return {"aic": aic, "bic": bic}


def criterion_value(model: FittedModel, criterion: str) -> float:
    return information_criteria(model)[criterion]


def predict_mean(model: FittedModel, covariate_row) -> float:
    z = np.asarray(covariate_row, dtype=float)
    if z.shape != model.beta.shape:
        raise ValueError(f"row has {z.size} entries, model has {model.beta.size} coefficients")
    eta = float(z @ model.beta)
    if not eta <= MAX_ETA:
        raise MeanOverflowError(f"linear predictor {eta:g} overflows exp")
    return math.exp(eta)


def sample_response(family: FamilySpec, mu, rng: np.random.Generator):
    """Draw counts with mean ``mu``; Negative Binomial via a Gamma-Poisson mixture.

    Works on scalars and arrays alike. A rate too large for the Poisson
    sampler raises :class:`MeanOverflowError`.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValueError("mean must be finite and non-negative")
    if family.is_negbin:
        theta = family.theta
        if theta is None:
            raise ValueError("negbin sampling needs theta")
        lam = rng.gamma(theta, mu / theta)
    else:
        lam = mu
    if np.any(lam > MAX_POISSON_RATE):
        raise MeanOverflowError("Poisson rate too large to sample")
    draw = rng.poisson(lam)
    return int(draw) if mu.ndim == 0 else draw.astype(np.int64)
