"""Config-driven experiment: data, network, metrics, models, evaluation.

Every stage reads its inputs from and writes its outputs to the run directory,
so running the stages one by one gives the same files as :func:`run_all`.
All floats are written with ``repr`` and all randomness is seeded from the
config, so a rerun reproduces every numeric file byte for byte.

Run directory layout::

    config.ini              effective configuration, defaults included
    data.csv, split.csv     cleaned rows and the train/validate assignment
    network.csv             weighted edge list over all rows
    metrics.csv             node metrics, row id = node id
    svm_grid_{base,graph}.csv
    models/*.json           svm_<kernel>_<tag>.json, logistic_<tag>.json
    odds_ratios_<tag>.csv, logistic_cv_<tag>.csv
    summary.csv, roc/<model>.csv, roc_{base,graph}.svg
"""
from __future__ import annotations

import configparser
import contextlib
import csv
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import evaluation, logistic, svm
from .data import (Dataset, DesignMatrix, FeatureSchema, PartitionPlan, clean, encode,
                   parse_dataset, partition_positions)
from .errors import ConfigError, DataError, NetClassifyError
from .metrics import METRIC_NAMES, NodeMetrics, node_metrics
from .smallworld import SmallWorldConfig, export_edges, generate, import_edges, weight_edges
from .synth import survey_spec, synthesize

TAGS = ("base", "graph")


@dataclass(frozen=True)
class DataSection:
    input: str = ""  # CSV path; empty means synthesize
    schema: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SynthSection:
    preset: str = "survey"
    n: int = 1284
    prevalence: float = 0.194
    seed: int = 1
    closeness_coef: float = math.log(1.6)


@dataclass(frozen=True)
class NetworkSection:
    k_l: int = 4
    p_w: float = 0.5
    seed: int = 2017
    weight_source: str = "ADULTS"
    epsilon: float = 0.1


@dataclass(frozen=True)
class ModelSection:
    kernels: tuple[str, ...] = svm.KERNEL_KINDS
    c_grid: tuple[float, ...] = svm.DEFAULT_C_GRID
    gamma_grid: tuple[float, ...] = svm.DEFAULT_GAMMA_GRID
    folds: int = 5
    grid_seed: int = 34567
    poly_degree: int = 2
    poly_offset: float = 1.0
    svm_tol: float = 1e-3
    svm_max_iter: int = 10_000_000
    stepwise_alpha: float = 0.05
    logit_folds: int = 10
    logit_seed: int = 23456


@dataclass(frozen=True)
class EvaluationSection:
    validate_fraction: float = 0.2
    partition_seed: int = 12345


@dataclass(frozen=True)
class RunConfig:
    data: DataSection = DataSection()
    synth: SynthSection = SynthSection()
    network: NetworkSection = NetworkSection()
    models: ModelSection = ModelSection()
    evaluation: EvaluationSection = EvaluationSection()
    out: str = "out"

    @property
    def synthetic(self) -> bool:
        return not self.data.input

    def schema(self) -> FeatureSchema:
        if self.synthetic:
            return self.synth_spec().schema()
        if not self.data.schema:
            raise ConfigError("[schema] section is required with an input file")
        return FeatureSchema.from_config(self.data.schema)

    def synth_spec(self):
        if self.synth.preset != "survey":
            raise ConfigError(f"unknown synth preset {self.synth.preset!r}")
        net = self.network
        return survey_spec(n=self.synth.n, prevalence=self.synth.prevalence,
                          network_seed=net.seed, k_l=net.k_l, p_w=net.p_w,
                          closeness_coef=self.synth.closeness_coef)

    def validate(self) -> "RunConfig":
        schema = self.schema()
        if self.network.weight_source not in schema.names:
            raise ConfigError(f"weight source {self.network.weight_source!r} is not in the schema")
        if schema.variable(self.network.weight_source).is_nominal:
            raise ConfigError("the weight source must be an interval variable")
        clash = set(METRIC_NAMES) & set(schema.names)
        if clash:
            raise ConfigError(f"schema variables {sorted(clash)} clash with node metric names")
        for k in self.models.kernels:
            if k not in svm.KERNEL_KINDS:
                raise ConfigError(f"unknown kernel {k!r}")
        SmallWorldConfig(2 + self.network.k_l, self.network.k_l, self.network.p_w)
        PartitionPlan(self.evaluation.validate_fraction, self.evaluation.partition_seed)
        if not 0.0 < self.models.stepwise_alpha < 1.0:
            raise ConfigError("stepwise_alpha must be in (0, 1)")
        return self

    def with_seed(self, seed: int) -> "RunConfig":
        """Data seed ``seed`` and network seed ``seed + 1``; partition and CV seeds stay fixed.

        Distinct seeds keep the data draws and the rewiring draws from sharing a stream.
        """
        return replace(self, synth=replace(self.synth, seed=seed),
                       network=replace(self.network, seed=seed + 1))

    def to_ini(self) -> str:
        cp = _parser()
        cp["data"] = {"input": self.data.input}
        if self.data.schema or not self.synthetic:
            cp["schema"] = dict(self.data.schema)
        elif self.synthetic:
            cp["schema"] = self.schema().to_config()
        for name in ("synth", "network", "models", "evaluation"):
            cp[name] = {k: _fmt(v) for k, v in asdict(getattr(self, name)).items()}
        cp["output"] = {"dir": self.out}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # variable names are case sensitive
    return cp


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(cls, section: str, items: dict):
    kinds = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in items.items():
        if key not in kinds:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        default = getattr(cls(), key)
        try:
            if isinstance(default, tuple):
                elem = type(default[0]) if default else str
                out[key] = tuple(elem(x.strip()) for x in raw.split(",") if x.strip())
            elif isinstance(default, bool):
                out[key] = raw.strip().lower() in ("1", "true", "yes")
            else:
                out[key] = type(default)(raw.strip())
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid value") from None
    return cls(**out)


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config: {e}") from None
    known = {"data", "schema", "synth", "network", "models", "evaluation", "output"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"unknown config section [{s}]")
    data = dict(cp["data"]) if cp.has_section("data") else {}
    for key in data:
        if key != "input":
            raise ConfigError(f"[data] unknown key {key!r}")
    inp = data.get("input", "").strip()
    if inp and not os.path.isabs(inp):
        inp = str(Path(base_dir) / inp)
    schema = dict(cp["schema"]) if cp.has_section("schema") else {}
    section = lambda cls, name: _coerce(cls, name, dict(cp[name])) if cp.has_section(name) else cls()
    out = dict(cp["output"]) if cp.has_section("output") else {}
    return RunConfig(DataSection(inp, schema), section(SynthSection, "synth"),
                     section(NetworkSection, "network"), section(ModelSection, "models"),
                     section(EvaluationSection, "evaluation"), out.get("dir", "out")).validate()


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, Path(path).parent)


# -- stage plumbing ------------------------------------------------------------

@contextlib.contextmanager
def stage(name: str):
    """Tag library errors raised inside with the stage they came from."""
    try:
        yield
    except NetClassifyError as e:
        if not getattr(e, "stage", None):
            e.stage = name
        raise


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError:
        raise DataError(f"missing input file {path}; run the earlier stages first") from None


def load_data(cfg: RunConfig, out: Path) -> Dataset:
    return parse_dataset(_read(out / "data.csv"), cfg.schema())


def load_split(out: Path) -> tuple[list[int], list[int]]:
    train, val = [], []
    for row in list(csv.reader(io.StringIO(_read(out / "split.csv"))))[1:]:
        if row:
            (train if row[1] == "train" else val).append(int(row[0]))
    return train, val


def load_metrics(out: Path) -> NodeMetrics:
    return NodeMetrics.from_csv(_read(out / "metrics.csv"))


def stage_data(cfg: RunConfig, out: Path) -> Dataset:
    """Load or synthesize, clean, partition; writes config.ini, data.csv, split.csv."""
    _write(out / "config.ini", cfg.to_ini())
    if cfg.synthetic:
        ds = synthesize(cfg.synth_spec(), cfg.synth.seed)
    else:
        ds = parse_dataset(_read(Path(cfg.data.input)), cfg.schema())
    ds = clean(ds)
    _write(out / "data.csv", ds.to_csv())
    plan = PartitionPlan(cfg.evaluation.validate_fraction, cfg.evaluation.partition_seed)
    train, val = partition_positions(len(ds), plan)
    role = np.array(["train"] * len(ds), dtype=object)
    role[val] = "validate"
    _write(out / "split.csv", "row_id,set\n" + "".join(f"{ds.row_ids[i]},{role[i]}\n"
                                                     for i in range(len(ds))))
    return ds


def stage_network(cfg: RunConfig, out: Path, data: Dataset | None = None) -> Path:
    """Small-world graph over every cleaned row, weighted by the weight-source column."""
    ds = load_data(cfg, out) if data is None else data
    net = cfg.network
    if net.weight_source not in ds.schema.names:
        raise ConfigError(f"weight source {net.weight_source!r} is not in the data")
    g = generate(SmallWorldConfig(len(ds), net.k_l, net.p_w, net.seed))
    g = weight_edges(g, np.asarray(ds.column(net.weight_source), dtype=float), net.epsilon)
    return _write(out / "network.csv", export_edges(g))


def compute_metrics(edges_csv: str, n: int | None = None) -> str:
    return node_metrics(import_edges(edges_csv, n)).to_csv()


def stage_metrics(cfg: RunConfig, out: Path) -> Path:
    n = len(load_data(cfg, out))
    return _write(out / "metrics.csv", compute_metrics(_read(out / "network.csv"), n))


def design(cfg: RunConfig, out: Path, tag: str,
           standardization: dict | None = None) -> tuple[DesignMatrix, DesignMatrix, list[int]]:
    """(train, validation, validation row ids) design matrices for ``tag``.

    The ``graph`` design appends every node metric that varies over the
    training rows.  Validation rows reuse the training standardization unless
    ``standardization`` is given.
    """
    ds = load_data(cfg, out)
    train_ids, val_ids = load_split(out)
    if tag == "graph":
        cols = load_metrics(out).columns()
        if any(len(c) != len(ds) for c in cols.values()):
            raise DataError("metrics and data row counts differ")
        pos = {rid: i for i, rid in enumerate(ds.row_ids)}
        tr = [pos[i] for i in train_ids]
        keep = {k: v for k, v in cols.items() if np.std(v[tr]) > 0}
        ds = ds.with_interval_predictors(keep)
    elif tag != "base":
        raise ValueError(tag)
    train = encode(ds.by_ids(train_ids))
    val = encode(ds.by_ids(val_ids), standardization or train.standardization)
    return train, val, val_ids


def stage_train_svm(cfg: RunConfig, out: Path) -> list[Path]:
    m = cfg.models
    written = []
    for tag in TAGS:
        train, _, _ = design(cfg, out, tag)
        y = train.signed_labels()
        grid = svm.grid_search(train.values, y, m.kernels, m.c_grid, m.gamma_grid, m.folds,
                               m.grid_seed, degree=m.poly_degree, offset=m.poly_offset,
                               tol=m.svm_tol, max_iter=m.svm_max_iter)
        written.append(_write(out / f"svm_grid_{tag}.csv", grid.to_csv()))
        for kind in m.kernels:
            best = grid.best[kind]
            cfg_t = svm.SvmTrainConfig(c=best.c, tol=m.svm_tol, max_iter=m.svm_max_iter)
            model = svm.train(train.values, y, best.kernel, cfg_t, feature_names=train.names,
                              standardization=train.standardization)
            written.append(_write(out / "models" / f"svm_{kind}_{tag}.json", model.to_json()))
    return written


def stage_train_logit(cfg: RunConfig, out: Path) -> list[Path]:
    m = cfg.models
    written = []
    for tag in TAGS:
        train, _, _ = design(cfg, out, tag)
        model = logistic.stepwise(train, alpha=m.stepwise_alpha)
        model.standardization = dict(train.standardization)
        written.append(_write(out / "models" / f"logistic_{tag}.json", model.to_json()))
        if model.converged:
            rows = logistic.odds_ratio_table(model)
            written.append(_write(out / f"odds_ratios_{tag}.csv", logistic.odds_ratio_csv(rows)))
        cv = logistic.cross_validate(train, folds=m.logit_folds, seed=m.logit_seed,
                                     alpha=m.stepwise_alpha)
        lines = ["fold,auc,error"]
        lines += [f"{i + 1},{a!r},{e!r}" for i, (a, e) in enumerate(zip(cv.fold_auc, cv.fold_error))]
        lines += [f"mean,{cv.mean_auc!r},{cv.mean_error!r}", f"pooled,{cv.pooled_auc!r},"]
        written.append(_write(out / f"logistic_cv_{tag}.csv", "\n".join(lines) + "\n"))
    return written


def _model_files(out: Path) -> list[tuple[str, str | None, str, Path]]:
    """(family, kernel kind, tag, path) for every saved model, in a fixed order."""
    found = []
    for tag in TAGS:
        p = out / "models" / f"logistic_{tag}.json"
        if p.exists():
            found.append(("LOGISTIC", None, tag, p))
        for kind in svm.KERNEL_KINDS:
            p = out / "models" / f"svm_{kind}_{tag}.json"
            if p.exists():
                found.append(("SVM", kind, tag, p))
    if not found:
        raise DataError(f"no trained models under {out / 'models'}")
    return found


def stage_evaluate(cfg: RunConfig, out: Path) -> list[evaluation.EvalSummary]:
    scored, labels, ids = [], None, None
    for family, kind, tag, path in _model_files(out):
        text = path.read_text()
        if family == "LOGISTIC":
            model = logistic.LogisticModel.from_json(text)
            _, val, val_ids = design(cfg, out, tag, model.standardization)
            scores = model.predict_proba(val.select(list(model.predictors)))
            kernel = best_c = None
        else:
            model = svm.SvmModel.from_json(text)
            _, val, val_ids = design(cfg, out, tag, model.standardization)
            scores = model.decision_function(val.select(model.feature_names))
            kernel, best_c = model.kernel.label(), model.c
        if labels is None:
            labels, ids = val.labels, val_ids
        scored.append(evaluation.Scored(family, tag == "graph", scores, tuple(val_ids), kernel,
                                        best_c))
    rows, curves = evaluation.compare(scored, labels, ids)
    _write(out / "summary.csv", evaluation.summary_csv(rows))
    for key, pts in curves.items():
        _write(out / "roc" / f"{key}.csv", evaluation.roc_csv(pts))
    for tag, title in (("graph", "Models including graph metrics"),
                       ("base", "Models without graph metrics")):
        sub = {k: v for k, v in curves.items() if k.endswith("_" + tag)}
        if sub:
            _write(out / f"roc_{tag}.svg", evaluation.roc_svg(sub, title))
    return rows


def report(summary_texts: list[str]) -> str:
    """Concatenate summary tables, keeping the header once."""
    rows = []
    for text in summary_texts:
        rows.extend(evaluation.parse_summary(text))
    return evaluation.summary_csv(rows)


STAGES = (
    ("data", stage_data),
    ("network", stage_network),
    ("metrics", stage_metrics),
    ("train-svm", stage_train_svm),
    ("train-logit", stage_train_logit),
    ("evaluate", stage_evaluate),
)


def run_all(cfg: RunConfig, out: str | os.PathLike | None = None) -> list[evaluation.EvalSummary]:
    """Run every stage into ``out`` (default: the config's output dir); returns the summary rows."""
    out = Path(out if out is not None else cfg.out)
    rows = []
    for name, fn in STAGES:
        with stage(name):
            rows = fn(cfg, out)
    return rows
