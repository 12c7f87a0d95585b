"""Soft-margin kernel SVM trained by SMO, plus cross-validated C/gamma search.

The dual solved is::

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

Each SMO step updates the maximal-violating pair.  ``second_order=True``
instead picks ``j`` by second-order gain (Fan, Chen & Lin, 2005), which is
about twice as fast on the survey data but breaks exact label-flip symmetry
(the two runs visit pairs in a different order).  The solver stops once the
violation ``m(a) - M(a)`` drops below ``tol``.  The decision function is
``f(x) = sum_i a_i y_i K(x_i, x) + b``.

All kernel values come from one compiled routine that sums features in
index order, so a kernel entry is bit-identical whether it came from a full
Gram matrix, a bounded column cache or the decision function.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .data import kfold_indices
from .errors import BudgetExhausted, ConfigError, DimensionMismatch, SingleClass

LINEAR = "linear"
POLY = "poly"
RBF = "rbf"
KERNEL_KINDS = (LINEAR, POLY, RBF)
_KIND_CODE = {LINEAR: 0, POLY: 1, RBF: 2}

DEFAULT_C_GRID = (0.2, 0.5, 1.0, 1.5, 2.0)
DEFAULT_GAMMA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0)


@numba.njit(cache=True)
def _kernel(u, v, kind, degree, offset, gamma):
    s = 0.0
    if kind == 2:
        for k in range(u.shape[0]):
            d = u[k] - v[k]
            s += d * d
        return math.exp(-gamma * s)
    for k in range(u.shape[0]):
        s += u[k] * v[k]
    if kind == 0:
        return s
    base = s + offset
    out = 1.0
    for _ in range(degree):
        out *= base
    return out


@numba.njit(cache=True)
def _kernel_matrix(A, B, kind, degree, offset, gamma):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = _kernel(A[i], B[j], kind, degree, offset, gamma)
    return out


@numba.njit(cache=True)
def _decision(X, sv, coef, bias, kind, degree, offset, gamma):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        f = 0.0
        for i in range(sv.shape[0]):
            f += coef[i] * _kernel(X[r], sv[i], kind, degree, offset, gamma)
        out[r] = f + bias
    return out


@numba.njit(cache=True)
def _fetch(col, X, gram, use_gram, slots, slot_of, owner, stamp, clock, kind, degree, offset,
           gamma):
    """Kernel row ``col`` from the Gram matrix or the LRU slot cache."""
    if use_gram:
        return gram[col]
    sl = slot_of[col]
    if sl < 0:
        sl = 0
        for q in range(owner.shape[0]):
            if owner[q] < 0:
                sl = q
                break
            if stamp[q] < stamp[sl]:
                sl = q
        if owner[sl] >= 0:
            slot_of[owner[sl]] = -1
        for t in range(X.shape[0]):
            slots[sl, t] = _kernel(X[t], X[col], kind, degree, offset, gamma)
        owner[sl] = col
        slot_of[col] = sl
    stamp[sl] = clock
    return slots[sl]


@numba.njit(cache=True)
def _reconstruct(grad, alpha, y, is_active, X, gram, use_gram, kind, degree, offset, gamma):
    """Recompute the gradient of inactive variables from scratch."""
    n = y.shape[0]
    for t in range(n):
        if is_active[t]:
            continue
        s = 0.0
        for j in range(n):
            if alpha[j] > 0:
                k = gram[t, j] if use_gram else _kernel(X[t], X[j], kind, degree, offset, gamma)
                s += alpha[j] * y[j] * k
        grad[t] = y[t] * s - 1.0


@numba.njit(cache=True)
def _violations(active, n_active, y, alpha, grad, c):
    """(m, -M): max score over I_up and max of -score over I_low, on the active set."""
    g1 = -np.inf
    g2 = -np.inf
    for q in range(n_active):
        t = active[q]
        s = -y[t] * grad[t]
        if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
            if s > g1:
                g1 = s
        if (y[t] < 0 and alpha[t] < c) or (y[t] > 0 and alpha[t] > 0):
            if -s > g2:
                g2 = -s
    return g1, g2


@numba.njit(cache=True)
def _select(active, n_active, y, alpha, grad, c):
    """Maximal violating pair on the active set: (i, j, m, m - M)."""
    gmax = -np.inf
    gmin = np.inf
    i = -1
    j = -1
    for q in range(n_active):
        t = active[q]
        s = -y[t] * grad[t]
        if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
            if s > gmax:
                gmax = s
                i = t
        if (y[t] < 0 and alpha[t] < c) or (y[t] > 0 and alpha[t] > 0):
            if s < gmin:
                gmin = s
                j = t
    gap = gmax - gmin if (i >= 0 and j >= 0) else 0.0
    return i, j, gmax, gap


@numba.njit(cache=True)
def _smo(X, y, kind, degree, offset, gamma, c, tol, max_iter, gram, cache_cols, second_order,
         shrinking):
    """Returns (alpha, grad, iterations, gap, converged).

    ``gram`` of shape (n, n) is used when given, otherwise kernel rows are
    computed into an LRU cache of ``cache_cols`` slots.  With ``shrinking``,
    bounded variables that cannot re-enter a violating pair are set aside
    every min(n, 1000) iterations; the full gradient is rebuilt before the
    final optimality check.
    """
    n = y.shape[0]
    use_gram = gram.shape[0] == n
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.empty(n)
    for t in range(n):
        diag[t] = gram[t, t] if use_gram else _kernel(X[t], X[t], kind, degree, offset, gamma)

    cap = max(2, min(n, cache_cols))
    slots = np.empty((1, 1)) if use_gram else np.empty((cap, n))
    slot_of = -np.ones(n, dtype=np.int64)
    owner = -np.ones(cap, dtype=np.int64)
    stamp = np.zeros(cap, dtype=np.int64)
    clock = 0

    active = np.arange(n)
    is_active = np.ones(n, dtype=np.bool_)
    n_active = n
    counter = min(n, 1000) + 1
    unshrunk = False

    it = 0
    gap = 0.0
    converged = False
    while True:
        if shrinking:
            counter -= 1
            if counter == 0:
                counter = min(n, 1000)
                g1, g2 = _violations(active, n_active, y, alpha, grad, c)
                if not unshrunk and g1 + g2 <= tol * 10:
                    unshrunk = True
                    _reconstruct(grad, alpha, y, is_active, X, gram, use_gram, kind, degree,
                                 offset, gamma)
                    is_active[:] = True
                    active = np.arange(n)
                    n_active = n
                    g1, g2 = _violations(active, n_active, y, alpha, grad, c)
                k = 0
                for q in range(n_active):
                    t = active[q]
                    shrink = False
                    if alpha[t] >= c:
                        shrink = (-grad[t] > g1) if y[t] > 0 else (-grad[t] > g2)
                    elif alpha[t] <= 0:
                        shrink = (grad[t] > g2) if y[t] > 0 else (grad[t] > g1)
                    if shrink:
                        is_active[t] = False
                    else:
                        active[k] = t
                        k += 1
                n_active = k

        i, jm, gmax, gap = _select(active, n_active, y, alpha, grad, c)
        if gap < tol and n_active < n:
            _reconstruct(grad, alpha, y, is_active, X, gram, use_gram, kind, degree, offset,
                         gamma)
            is_active[:] = True
            active = np.arange(n)
            n_active = n
            counter = 1
            i, jm, gmax, gap = _select(active, n_active, y, alpha, grad, c)
        if gap < tol:
            converged = True
            break
        if it >= max_iter:
            if n_active < n:
                _reconstruct(grad, alpha, y, is_active, X, gram, use_gram, kind, degree, offset,
                             gamma)
            break
        it += 1

        clock += 1
        ki = _fetch(i, X, gram, use_gram, slots, slot_of, owner, stamp, clock, kind, degree,
                    offset, gamma)
        j = jm
        if second_order:
            best = -np.inf
            for q in range(n_active):
                t = active[q]
                if (y[t] < 0 and alpha[t] < c) or (y[t] > 0 and alpha[t] > 0):
                    b = gmax + y[t] * grad[t]
                    if b > 0:
                        a = diag[i] + diag[t] - 2.0 * ki[t]
                        if a <= 0:
                            a = 1e-12
                        g = b * b / a
                        if g > best:
                            best = g
                            j = t
        clock += 1
        kj = _fetch(j, X, gram, use_gram, slots, slot_of, owner, stamp, clock, kind, degree,
                    offset, gamma)

        eta = diag[i] + diag[j] - 2.0 * ki[j]
        if eta <= 0:
            eta = 1e-12
        yi = y[i]
        yj = y[j]
        ub_i = c - alpha[i] if yi > 0 else alpha[i]
        ub_j = alpha[j] if yj > 0 else c - alpha[j]
        step = (-yi * grad[i] + yj * grad[j]) / eta
        if step >= ub_i:
            step = ub_i
        if step >= ub_j:
            step = ub_j
        old_i = alpha[i]
        old_j = alpha[j]
        if step == ub_i:
            alpha[i] = c if yi > 0 else 0.0
        else:
            alpha[i] = old_i + yi * step
        if step == ub_j:
            alpha[j] = 0.0 if yj > 0 else c
        else:
            alpha[j] = old_j - yj * step
        di = yi * (alpha[i] - old_i)
        dj = yj * (alpha[j] - old_j)
        for q in range(n_active):
            t = active[q]
            grad[t] += y[t] * (di * ki[t] + dj * kj[t])
    return alpha, grad, it, gap, converged


@dataclass(frozen=True)
class KernelSpec:
    kind: str = LINEAR
    degree: int = 2
    offset: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel {self.kind!r}")
        if self.kind == POLY and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigError(f"polynomial degree must be a positive integer, got {self.degree}")
        if self.kind == RBF and not self.gamma > 0:
            raise ConfigError(f"rbf gamma must be positive, got {self.gamma}")

    @property
    def args(self) -> tuple:
        return _KIND_CODE[self.kind], int(self.degree), float(self.offset), float(self.gamma)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == POLY:
            d.update(degree=self.degree, offset=self.offset)
        elif self.kind == RBF:
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)

    def label(self) -> str:
        return {LINEAR: "LINEAR", POLY: "POLY", RBF: "RBF"}[self.kind]


def linear() -> KernelSpec:
    return KernelSpec(LINEAR)


def polynomial(degree: int = 2, offset: float = 1.0) -> KernelSpec:
    return KernelSpec(POLY, degree=degree, offset=offset)


def rbf(gamma: float) -> KernelSpec:
    return KernelSpec(RBF, gamma=gamma)


def _as_rows(X) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))


def kernel_eval(k: KernelSpec, u, v) -> float:
    u = np.ascontiguousarray(u, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionMismatch(f"kernel arguments of shape {u.shape} and {v.shape}")
    return float(_kernel(u, v, *k.args))


def kernel_matrix(k: KernelSpec, A, B=None) -> np.ndarray:
    """``K[i, j] = K(A[i], B[j])``."""
    A = _as_rows(A)
    B = A if B is None else _as_rows(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"{A.shape[1]} vs {B.shape[1]} features")
    return _kernel_matrix(A, B, *k.args)


@dataclass(frozen=True)
class SvmTrainConfig:
    c: float = 1.0
    tol: float = 1e-3
    max_iter: int = 10_000_000
    cache_bytes: int = 256 * 2**20
    second_order: bool = False
    shrinking: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError(f"penalty C must be positive, got {self.c}")
        if not self.tol > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")


@dataclass
class SvmModel:
    kernel: KernelSpec
    support_vectors: np.ndarray
    support_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    c: float
    converged: bool = True
    iterations: int = 0
    kkt_gap: float = 0.0
    feature_names: list[str] = field(default_factory=list)
    standardization: dict = field(default_factory=dict)

    @property
    def dual_coef(self) -> np.ndarray:
        return self.alphas * self.support_labels

    def decision_function(self, X) -> np.ndarray:
        X = _as_rows(X)
        d = self.support_vectors.shape[1]
        if X.shape[1] != d:
            raise DimensionMismatch(f"model has {d} features, got {X.shape[1]}")
        sv = np.ascontiguousarray(self.support_vectors, dtype=float)
        return _decision(X, sv, self.dual_coef, float(self.bias), *self.kernel.args)

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def to_json(self) -> str:
        doc = {
            "format": "netclassify-svm/1",
            "kernel": self.kernel.to_dict(),
            "c": self.c,
            "bias": self.bias,
            "converged": self.converged,
            "iterations": self.iterations,
            "kkt_gap": self.kkt_gap,
            "feature_names": list(self.feature_names),
            "standardization": {k: list(v) for k, v in self.standardization.items()},
            "support": [
                {"alpha": float(a), "label": int(y), "x": [float(v) for v in x]}
                for a, y, x in zip(self.alphas, self.support_labels, self.support_vectors)
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        doc = json.loads(text)
        sup = doc["support"]
        d = len(sup[0]["x"]) if sup else len(doc["feature_names"])
        return cls(
            kernel=KernelSpec.from_dict(doc["kernel"]),
            support_vectors=np.array([s["x"] for s in sup], dtype=float).reshape(len(sup), d),
            support_labels=np.array([s["label"] for s in sup], dtype=float),
            alphas=np.array([s["alpha"] for s in sup], dtype=float),
            bias=float(doc["bias"]),
            c=float(doc["c"]),
            converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            kkt_gap=float(doc["kkt_gap"]),
            feature_names=list(doc["feature_names"]),
            standardization={k: tuple(v) for k, v in doc["standardization"].items()},
        )


def decision(m: SvmModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("decision expects a single vector")
    return float(m.decision_function(x[None, :])[0])


def predict_label(m: SvmModel, x) -> int:
    """Sign of the decision value; ties go to +1."""
    return 1 if decision(m, x) >= 0.0 else -1


@dataclass
class DualSolution:
    alpha: np.ndarray
    grad: np.ndarray
    bias: float
    converged: bool
    iterations: int
    gap: float


def _bias(alpha, grad, y, c) -> float:
    """Mean of ``y_i - f0(x_i)`` over free vectors, else the midpoint of the feasible range."""
    score = -y * grad  # equals y_i - f0(x_i)
    pos = y > 0
    neg = ~pos
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(math.fsum(score[free]) / free.sum())
    lower = (pos & (alpha == 0)) | (neg & (alpha == c))
    upper = (neg & (alpha == 0)) | (pos & (alpha == c))
    lo = score[lower].max() if lower.any() else None
    hi = score[upper].min() if upper.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float((lo + hi) / 2.0)


def solve_dual(X, y, k: KernelSpec, cfg: SvmTrainConfig, gram=None) -> DualSolution:
    X = _as_rows(X)
    y = np.ascontiguousarray(y, dtype=float)
    n = len(y)
    if gram is None and n * n * 8 <= cfg.cache_bytes:
        gram = _kernel_matrix(X, X, *k.args)
    if gram is None:
        gram = np.empty((0, 0))
    else:
        gram = np.ascontiguousarray(gram, dtype=float)
    cache_cols = max(2, cfg.cache_bytes // max(1, 8 * n))
    alpha, grad, it, gap, conv = _smo(X, y, *k.args, float(cfg.c), float(cfg.tol),
                                      int(cfg.max_iter), gram, int(cache_cols),
                                      bool(cfg.second_order), bool(cfg.shrinking))
    return DualSolution(alpha, grad, _bias(alpha, grad, y, cfg.c), bool(conv), int(it), float(gap))


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("SVM labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClass("SVM training needs both classes")
    return y


def train(X, y, k: KernelSpec, cfg: SvmTrainConfig = SvmTrainConfig(), *,
          feature_names: Sequence[str] = (), standardization: dict | None = None,
          gram: np.ndarray | None = None) -> SvmModel:
    """Train on rows ``X`` with labels ``y`` in {-1, +1}.

    ``gram`` may supply a precomputed kernel matrix for ``X``.  When the
    iteration budget runs out the last iterate is returned with
    ``converged=False`` and a warning.
    """
    X = _as_rows(X)
    y = _check_labels(y)
    if X.shape[0] != len(y):
        raise DimensionMismatch(f"X has {X.shape[0]} rows for {len(y)} labels")
    sol = solve_dual(X, y, k, cfg, gram)
    if not sol.converged:
        warnings.warn(f"SMO budget of {cfg.max_iter} iterations exhausted "
                      f"(KKT gap {sol.gap:.3g})", BudgetExhausted, stacklevel=2)
    sv = sol.alpha > 0
    return SvmModel(
        kernel=k,
        support_vectors=X[sv].copy(),
        support_labels=y[sv].copy(),
        alphas=sol.alpha[sv].copy(),
        bias=sol.bias,
        c=float(cfg.c),
        converged=sol.converged,
        iterations=sol.iterations,
        kkt_gap=sol.gap,
        feature_names=list(feature_names),
        standardization=dict(standardization or {}),
    )


def dual_objective(alpha, y, K) -> float:
    v = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * v @ K @ v)


def kkt_violation(alpha, y, K, c: float) -> float:
    """``m(a) - M(a)`` for a dual point, clipped at 0."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    grad = y * (K @ (alpha * y)) - 1.0
    score = -y * grad
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    if not up.any() or not low.any():
        return 0.0
    return max(0.0, float(score[up].max() - score[low].min()))


@dataclass(frozen=True)
class GridRow:
    kernel: KernelSpec
    c: float
    fold_errors: tuple[float, ...]

    @property
    def mean_error(self) -> float:
        return math.fsum(self.fold_errors) / len(self.fold_errors)


@dataclass
class GridResult:
    best: dict  # kernel kind -> GridRow
    table: list[GridRow]

    def to_csv(self) -> str:
        nf = len(self.table[0].fold_errors) if self.table else 0
        lines = ["kernel,gamma,c,mean_error" + "".join(f",fold{i + 1}" for i in range(nf))]
        for r in self.table:
            gamma = repr(r.kernel.gamma) if r.kernel.kind == RBF else ""
            lines.append(",".join([r.kernel.kind, gamma, repr(r.c), repr(r.mean_error)]
                                  + [repr(e) for e in r.fold_errors]))
        return "\n".join(lines) + "\n"


def kernel_candidates(kind: str, gamma_grid: Sequence[float], degree: int = 2,
                      offset: float = 1.0) -> list[KernelSpec]:
    if kind == RBF:
        return [rbf(g) for g in sorted(gamma_grid)]
    if kind == POLY:
        return [polynomial(degree, offset)]
    if kind == LINEAR:
        return [linear()]
    raise ConfigError(f"unknown kernel {kind!r}")


def grid_search(X, y, kinds: Sequence[str] = KERNEL_KINDS,
                c_grid: Sequence[float] = DEFAULT_C_GRID,
                gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
                folds: int = 5, seed: int = 34567, *, degree: int = 2, offset: float = 1.0,
                tol: float = 1e-3, max_iter: int = 10_000_000) -> GridResult:
    """k-fold CV misclassification for every (kernel, gamma, C).

    All grid points share one fold assignment.  The best row per kernel kind
    minimizes the mean fold error; ties go to the smaller C, then smaller gamma.
    """
    X = _as_rows(X)
    y = _check_labels(y)
    if not c_grid:
        raise ConfigError("empty C grid")
    if RBF in kinds and not gamma_grid:
        raise ConfigError("empty gamma grid")
    splits = []
    for f in kfold_indices(len(y), folds, seed):
        mask = np.ones(len(y), dtype=bool)
        mask[f] = False
        splits.append((np.flatnonzero(mask), f))

    table: list[GridRow] = []
    best: dict[str, GridRow] = {}
    for kind in kinds:
        for spec in kernel_candidates(kind, gamma_grid, degree, offset):
            full = kernel_matrix(spec, X)
            for c in sorted(c_grid):
                cfg = SvmTrainConfig(c=float(c), tol=tol, max_iter=max_iter)
                errors = []
                for tr, te in splits:
                    model = train(X[tr], y[tr], spec, cfg, gram=full[np.ix_(tr, tr)])
                    errors.append(float(np.mean(model.predict(X[te]) != y[te])))
                row = GridRow(spec, float(c), tuple(errors))
                table.append(row)
                cur = best.get(kind)
                if cur is None or _better(row, cur):
                    best[kind] = row
    return GridResult(best, table)


def _better(a: GridRow, b: GridRow) -> bool:
    return (a.mean_error, a.c, a.kernel.gamma) < (b.mean_error, b.c, b.kernel.gamma)
