"""Maximum-likelihood logistic regression with Wald inference.

Fitting is Newton-Raphson (equivalently IRLS) on the Bernoulli log-likelihood
with step halving, an intercept always in column 0.  Stepwise selection is
backward elimination on Wald p-values over term groups, so the indicator
columns of one nominal variable enter and leave together.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .data import DesignMatrix, kfold_indices
from .errors import (DataError, DimensionMismatch, NotConverged, Separation, Singular,
                     SingleClass, UnknownTerm)
from .evaluation import ScoredSet, auc

INTERCEPT = "Intercept"
SEPARATION_BOUND = 30.0
Z_95 = 1.96


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def log_likelihood(beta: np.ndarray, Z: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood, ``sum(y*eta - log(1 + e^eta))``, stable for large |eta|."""
    eta = Z @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta: np.ndarray, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of :func:`log_likelihood`."""
    return Z.T @ (y - _sigmoid(Z @ beta))


def information(beta: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Observed (= expected, for the canonical link) information ``Z' W Z``."""
    mu = _sigmoid(Z @ beta)
    return (Z * (mu * (1.0 - mu))[:, None]).T @ Z


@dataclass
class LogisticModel:
    terms: tuple[str, ...]
    groups: tuple[str, ...]
    beta: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int = 0
    separated: bool = False
    history: tuple[float, ...] = ()
    n_obs: int = 0
    removed: tuple[str, ...] = ()
    standardization: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def predictors(self) -> tuple[str, ...]:
        return self.terms[1:]

    def index(self, term: str) -> int:
        try:
            return self.terms.index(term)
        except ValueError:
            raise UnknownTerm(f"model has no term {term!r}") from None

    def linear_predictor(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.terms) - 1:
            raise DimensionMismatch(f"{X.shape[1]} columns for {len(self.terms) - 1} predictors")
        return self.beta[0] + X @ self.beta[1:]

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.linear_predictor(X))

    def to_json(self) -> str:
        return json.dumps({
            "format": "netclassify-logit/1",
            "terms": list(self.terms),
            "groups": list(self.groups),
            "beta": [float(b) for b in self.beta],
            "se": [float(s) for s in self.se],
            "covariance": [[float(c) for c in row] for row in self.covariance],
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "separated": self.separated,
            "iterations": self.iterations,
            "n_obs": self.n_obs,
            "removed": list(self.removed),
            "standardization": {k: list(v) for k, v in self.standardization.items()},
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        d = json.loads(text)
        if d.get("format") != "netclassify-logit/1":
            raise DataError("not a logistic model file")
        return cls(tuple(d["terms"]), tuple(d["groups"]), np.array(d["beta"], dtype=float),
                   np.array(d["covariance"], dtype=float).reshape(len(d["terms"]), -1),
                   d["log_likelihood"], d["converged"], d["iterations"], d["separated"],
                   (), d["n_obs"], tuple(d["removed"]),
                   {k: tuple(v) for k, v in d["standardization"].items()})


def _unpack(X, y, names, groups):
    if isinstance(X, DesignMatrix):
        y = X.labels if y is None else y
        names = X.names if names is None else names
        groups = X.groups if groups is None else groups
        X = X.values
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if y is None:
        raise DataError("labels are required")
    y = np.asarray(y).ravel()
    if len(y) != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows for {len(y)} labels")
    names = [f"x{j + 1}" for j in range(X.shape[1])] if names is None else list(names)
    groups = list(names) if groups is None else list(groups)
    if len(names) != X.shape[1] or len(groups) != X.shape[1]:
        raise DimensionMismatch("names/groups do not match the number of columns")
    return X, y, names, groups


def fit(X, y=None, names: Sequence[str] | None = None, groups: Sequence[str] | None = None, *,
        grad_tol: float = 1e-8, step_tol: float = 1e-10, max_iter: int = 100,
        max_halvings: int = 20, separation: float = SEPARATION_BOUND) -> LogisticModel:
    """Maximum-likelihood fit of ``logit P(y=1) = b0 + X b``.

    Stops when the score max-norm drops below ``grad_tol`` or the Newton step
    below ``step_tol``, or once the gain the Newton step predicts is too small
    for the log-likelihood to register in floating point.  That last full step
    is kept if it raises the likelihood or shrinks the score, so the recorded
    likelihood may dip by rounding there.  A step that lowers
    the likelihood is halved up to ``max_halvings`` times.  If any |b| exceeds ``separation`` the fit stops
    and the partial result comes back flagged ``separated``.
    """
    X, y, names, groups = _unpack(X, y, names, groups)
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    y = y.astype(float)
    n, p = X.shape
    if y.min() == y.max():
        raise SingleClass("both outcome classes are needed")
    if n <= p + 1:
        raise DataError(f"{n} rows cannot support {p + 1} coefficients")
    Z = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(Z) < p + 1:
        raise Singular("design columns are collinear")

    beta = np.zeros(p + 1)
    ll = log_likelihood(beta, Z, y)
    history = [ll]
    converged = separated = False
    it = 0
    for it in range(1, max_iter + 1):
        g = score(beta, Z, y)
        if np.max(np.abs(g)) < grad_tol:
            converged = True
            break
        try:
            step = linalg.cho_solve(linalg.cho_factor(information(beta, Z)), g)
        except linalg.LinAlgError:
            raise Singular("information matrix is not positive definite") from None
        if np.max(np.abs(step)) < step_tol:
            converged = True
            break
        # Newton decrement: once the predicted gain g.step / 2 is below what the
        # likelihood can resolve, a line search is blind; try the full step and stop
        if g @ step <= 64 * np.finfo(float).eps * max(1.0, abs(ll)):
            cand = beta + step
            ll_c = log_likelihood(cand, Z, y)
            gmax = np.max(np.abs(g))
            if ll_c >= ll or np.max(np.abs(score(cand, Z, y))) < gmax:
                beta, ll = cand, ll_c
                history.append(ll)
            converged = True
            break
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = beta + t * step
            ll_c = log_likelihood(cand, Z, y)
            if ll_c >= ll:
                break
            t *= 0.5
        else:
            break  # no ascent along the Newton direction: at the numerical floor
        beta, ll = cand, ll_c
        history.append(ll)
        if np.max(np.abs(beta)) > separation:
            separated = True
            break
        if np.max(np.abs(t * step)) < step_tol:
            converged = True
            break

    if separated:
        warnings.warn("coefficients diverge: the outcome looks separable", Separation,
                      stacklevel=2)
    try:
        cov = linalg.inv(information(beta, Z))
        cov = (cov + cov.T) / 2.0
    except (linalg.LinAlgError, ValueError):
        cov = np.full((p + 1, p + 1), np.inf)
    return LogisticModel((INTERCEPT, *names), (INTERCEPT, *groups), beta, cov, ll, converged,
                         it, separated, tuple(history), n)


def wald(m: LogisticModel, term: str) -> tuple[float, float]:
    """(z, two-sided p) for one coefficient; ``p = erfc(|z| / sqrt 2)``."""
    j = m.index(term)
    b, se = float(m.beta[j]), float(m.se[j])
    if b == 0.0:
        return 0.0, 1.0
    z = b / se if se > 0 else math.copysign(math.inf, b)
    return z, math.erfc(abs(z) / math.sqrt(2.0))


def stepwise(X, y=None, names: Sequence[str] | None = None, groups: Sequence[str] | None = None,
             alpha: float = 0.05, **fit_kw) -> LogisticModel:
    """Backward elimination: refit, drop the group with the largest p > ``alpha``, repeat.

    A group's p-value is the largest over its member columns.  The intercept
    always stays; ties go to the group listed first.
    """
    X, y, names, groups = _unpack(X, y, names, groups)
    keep = list(range(X.shape[1]))
    removed = []
    while True:
        m = fit(X[:, keep], y, [names[j] for j in keep], [groups[j] for j in keep], **fit_kw)
        worst, worst_p = None, alpha
        group_p: dict[str, float] = {}
        for term, grp in zip(m.terms[1:], m.groups[1:]):
            group_p[grp] = max(group_p.get(grp, 0.0), wald(m, term)[1])
        for grp, pv in group_p.items():
            if pv > worst_p:
                worst, worst_p = grp, pv
        if worst is None:
            m.removed = tuple(removed)
            return m
        removed.append(worst)
        keep = [j for j in keep if groups[j] != worst]


@dataclass(frozen=True)
class OddsRatioRow:
    term: str
    estimate: float
    ci_low: float
    ci_high: float


def odds_ratio_table(m: LogisticModel, z: float = Z_95) -> list[OddsRatioRow]:
    if not m.converged:
        raise NotConverged("odds ratios need a converged fit")
    se = m.se
    return [OddsRatioRow(t, math.exp(m.beta[j]), math.exp(m.beta[j] - z * se[j]),
                         math.exp(m.beta[j] + z * se[j]))
            for j, t in enumerate(m.terms) if j > 0]


def odds_ratio_csv(rows: Sequence[OddsRatioRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("Effect", "Estimate", "95% CI"))
    for r in rows:
        w.writerow((r.term, f"{r.estimate:.2f}", f"({r.ci_low:.2f},{r.ci_high:.2f})"))
    return buf.getvalue()


def predict_prob(m: LogisticModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != len(m.terms) - 1:
        raise DimensionMismatch(f"{len(x)} values for {len(m.terms) - 1} predictors")
    return float(_sigmoid(m.beta[0] + x @ m.beta[1:]))


@dataclass(frozen=True)
class CVResult:
    mean_auc: float
    mean_error: float
    pooled_auc: float
    fold_auc: tuple[float, ...]
    fold_error: tuple[float, ...]


def cross_validate(X, y=None, folds: int = 10, seed: int = 0, alpha: float | None = None,
                   names=None, groups=None) -> CVResult:
    """k-fold validation AUC and 0.5-cut error rate.

    With ``alpha`` set each fold runs :func:`stepwise` instead of a plain fit.
    Folds holding a single class (always the case for leave-one-out) have no
    AUC of their own; the mean is then taken over the other folds, or falls
    back to the AUC of the pooled held-out predictions when none qualify.
    """
    X, y, names, groups = _unpack(X, y, names, groups)
    n = len(y)
    prob = np.empty(n)
    fold_auc, fold_err = [], []
    for idx in kfold_indices(n, folds, seed):
        train = np.setdiff1d(np.arange(n), idx)
        if alpha is None:
            m = fit(X[train], y[train], names, groups)
        else:
            m = stepwise(X[train], y[train], names, groups, alpha)
        cols = [names.index(t) for t in m.predictors]
        p = m.predict_proba(X[np.ix_(idx, cols)])
        prob[idx] = p
        fold_err.append(float(np.mean((p > 0.5) != (y[idx] == 1))))
        yi = y[idx]
        fold_auc.append(auc(ScoredSet(p, yi)) if 0 < yi.sum() < len(yi) else math.nan)
    pooled = auc(ScoredSet(prob, y))
    defined = [a for a in fold_auc if not math.isnan(a)]
    mean_auc = math.fsum(defined) / len(defined) if defined else pooled
    return CVResult(mean_auc, math.fsum(fold_err) / len(fold_err), pooled, tuple(fold_auc),
                    tuple(fold_err))
