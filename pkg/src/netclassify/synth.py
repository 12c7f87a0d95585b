"""Synthetic survey data with a logistic outcome, optionally driven by a node metric.

The outcome follows ``logit P(y=1) = intercept + sum(effects) + network_coef * z(metric)``
where ``z(metric)`` is the z-scored node metric of the respondent in a
small-world network built over all rows.  When ``prevalence`` is set the
intercept is solved for so that the mean outcome probability of the drawn
sample equals it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .data import (INTERVAL, NOMINAL, PREDICTOR, TARGET, WEIGHT_SOURCE, Dataset, FeatureSchema,
                   Variable)
from .errors import ConfigError
from .metrics import closeness, degree_metrics, eigenvector, local_clustering, betweenness
from .smallworld import Graph, SmallWorldConfig, generate, weight_edges


@dataclass(frozen=True)
class PredictorSpec:
    """One generated column.

    kind ``normal`` (params: mean, sd), ``integer`` (params: low, high, inclusive,
    uniform) or ``categorical`` (``categories`` with ``probs``).  Interval
    effects are per raw unit; categorical effects are per category.
    """

    name: str
    kind: str
    params: tuple[float, ...] = ()
    categories: tuple[str, ...] = ()
    probs: tuple[float, ...] = ()
    effect: float = 0.0
    category_effects: dict = field(default_factory=dict)
    role: str = PREDICTOR

    def variable(self) -> Variable:
        if self.kind == "categorical":
            return Variable(self.name, NOMINAL, self.role, tuple(self.categories))
        return Variable(self.name, INTERVAL, self.role)

    def draw(self, rng: np.random.Generator, n: int):
        if self.kind == "normal":
            mean, sd = self.params
            return rng.normal(mean, sd, n)
        if self.kind == "integer":
            lo, hi = self.params
            return rng.integers(int(lo), int(hi) + 1, n).astype(float)
        if self.kind == "categorical":
            p = np.asarray(self.probs, dtype=float)
            idx = rng.choice(len(self.categories), size=n, p=p / p.sum())
            return np.asarray(self.categories, dtype=object)[idx]
        raise ConfigError(f"{self.name}: unknown distribution {self.kind!r}")

    def contribution(self, values) -> np.ndarray:
        if self.kind == "categorical":
            return np.array([float(self.category_effects.get(v, 0.0)) for v in values])
        return self.effect * np.asarray(values, dtype=float)


@dataclass(frozen=True)
class NetworkEffect:
    k_l: int = 4
    p_w: float = 0.5
    seed: int = 0
    weight_source: str = "ADULTS"
    metric: str = "closeness"
    coef: float = 0.0
    epsilon: float = 0.1


@dataclass(frozen=True)
class SynthSpec:
    n: int
    predictors: tuple[PredictorSpec, ...]
    intercept: float = 0.0
    prevalence: float | None = None
    target: str = "DIABETES"
    target_categories: tuple[str, str] = ("NO", "YES")
    network: NetworkEffect | None = None

    def schema(self) -> FeatureSchema:
        return FeatureSchema(tuple(p.variable() for p in self.predictors)
                             + (Variable(self.target, NOMINAL, TARGET, tuple(self.target_categories)),))


@dataclass
class Simulation:
    dataset: Dataset
    prob: np.ndarray
    linear_predictor: np.ndarray
    intercept: float
    graph: Graph | None = None
    metric: np.ndarray | None = None


_METRICS = {
    "closeness": closeness,
    "betweenness": betweenness,
    "eigenvector": eigenvector,
    "clustering_coef": local_clustering,
    "degree": lambda g: degree_metrics(g)[0].astype(float),
    "weighted_degree": lambda g: degree_metrics(g)[1],
}


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def calibrate_intercept(eta: np.ndarray, prevalence: float) -> float:
    """Intercept ``b`` with ``mean(sigmoid(b + eta)) == prevalence``."""
    if not 0.0 < prevalence < 1.0:
        raise ConfigError(f"prevalence must be in (0, 1), got {prevalence}")
    f = lambda b: float(np.mean(_sigmoid(b + eta))) - prevalence
    lo, hi = -50.0 - eta.max(), 50.0 - eta.min()
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def simulate(spec: SynthSpec, seed: int) -> Simulation:
    if spec.n < 1:
        raise ConfigError("synthetic n must be positive")
    rng = np.random.default_rng(seed)
    columns = [p.draw(rng, spec.n) for p in spec.predictors]
    eta = np.zeros(spec.n)
    for p, col in zip(spec.predictors, columns):
        if p.role == PREDICTOR:
            eta += p.contribution(col)

    graph = metric = None
    net = spec.network
    if net is not None:
        names = [p.name for p in spec.predictors]
        if net.weight_source not in names:
            raise ConfigError(f"network weight source {net.weight_source!r} is not generated")
        if net.metric not in _METRICS:
            raise ConfigError(f"unknown node metric {net.metric!r}")
        g = generate(SmallWorldConfig(spec.n, net.k_l, net.p_w, net.seed))
        graph = weight_edges(g, columns[names.index(net.weight_source)], net.epsilon)
        metric = np.asarray(_METRICS[net.metric](graph), dtype=float)
        if net.coef:
            sd = metric.std(ddof=1)
            if sd > 0:
                eta += net.coef * (metric - metric.mean()) / sd

    intercept = spec.intercept if spec.prevalence is None else calibrate_intercept(eta, spec.prevalence)
    lp = intercept + eta
    prob = _sigmoid(lp)
    y = rng.random(spec.n) < prob

    neg, pos = spec.target_categories
    rows = []
    for i in range(spec.n):
        row = []
        for p, col in zip(spec.predictors, columns):
            row.append(str(col[i]) if p.kind == "categorical" else float(col[i]))
        row.append(pos if y[i] else neg)
        rows.append(tuple(row))
    ds = Dataset(spec.schema(), tuple(rows), tuple(range(spec.n)))
    return Simulation(ds, prob, lp, intercept, graph, metric)


def synthesize(spec: SynthSpec, seed: int) -> Dataset:
    return simulate(spec, seed).dataset


def survey_spec(n: int = 1284, prevalence: float = 0.194, network_seed: int = 2017,
               k_l: int = 4, p_w: float = 0.5, closeness_coef: float = math.log(1.6)) -> SynthSpec:
    """A survey-shaped surrogate: age, education, BMI, hypertension and
    cholesterol drive the outcome alongside network closeness; sex, income,
    marital status, smoking and produce consumption are noise."""
    yes_no = ("1", "2")  # 1 = yes, 2 = no
    preds = (
        PredictorSpec("SEX", "categorical", categories=("1", "2"), probs=(0.45, 0.55)),
        PredictorSpec("AGE_G", "integer", (1, 6), effect=math.log(1.62)),
        PredictorSpec("EDUCAG", "integer", (1, 4), effect=math.log(0.58)),
        PredictorSpec("INCOMG", "integer", (1, 5)),
        PredictorSpec("MARITAL", "categorical", categories=("1", "2", "3"), probs=(0.5, 0.3, 0.2)),
        PredictorSpec("RFBMI", "categorical", categories=yes_no, probs=(0.3, 0.7),
                      category_effects={"1": math.log(3.77)}),
        PredictorSpec("RFHYPE", "categorical", categories=yes_no, probs=(0.35, 0.65),
                      category_effects={"1": math.log(3.32)}),
        PredictorSpec("RFCHOL", "categorical", categories=yes_no, probs=(0.35, 0.65),
                      category_effects={"1": math.log(3.48)}),
        PredictorSpec("RFSMOK", "categorical", categories=yes_no, probs=(0.17, 0.83)),
        PredictorSpec("FRUTSUM", "normal", (1.4, 0.8)),
        PredictorSpec("VEGESUM", "normal", (1.9, 0.9)),
        PredictorSpec("ADULTS", "integer", (1, 5), role=WEIGHT_SOURCE),
    )
    net = NetworkEffect(k_l=k_l, p_w=p_w, seed=network_seed, weight_source="ADULTS",
                        metric="closeness", coef=closeness_coef)
    return SynthSpec(n=n, predictors=preds, prevalence=prevalence, network=net)
