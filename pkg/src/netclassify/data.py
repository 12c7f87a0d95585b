"""Schema-driven tabular data: parsing, cleaning, encoding and partitioning.

Datasets are immutable.  Values are stored per row as ``str`` (nominal),
``float`` (interval) or ``None`` (missing, only before :func:`clean`).

Random splits use numpy's PCG64 generator (``numpy.random.default_rng``);
determinism is guaranteed for the same build and the same seed.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadFoldCount,
    ConstantColumn,
    DataError,
    DegenerateSplit,
    EmptyAfterClean,
    MissingColumn,
    NonNumericInterval,
    SchemaError,
    UnknownCategory,
    UnknownColumn,
)

NOMINAL = "nominal"
INTERVAL = "interval"

PREDICTOR = "predictor"
TARGET = "target"
WEIGHT_SOURCE = "weight"

_ROLE_ALIASES = {
    "predictor": PREDICTOR,
    "target": TARGET,
    "weight": WEIGHT_SOURCE,
    "weightsource": WEIGHT_SOURCE,
    "weight_source": WEIGHT_SOURCE,
}


def ascending(categories: Iterable[str]) -> list[str]:
    """Sort category labels ascending: numerically if every label is a number."""
    cats = list(categories)
    try:
        return sorted(cats, key=float)
    except ValueError:
        return sorted(cats)


@dataclass(frozen=True)
class Variable:
    name: str
    level: str
    role: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name.isidentifier():
            raise SchemaError(f"variable name {self.name!r} is not an identifier")
        if self.level not in (NOMINAL, INTERVAL):
            raise SchemaError(f"{self.name}: unknown level {self.level!r}")
        if self.role not in (PREDICTOR, TARGET, WEIGHT_SOURCE):
            raise SchemaError(f"{self.name}: unknown role {self.role!r}")
        if self.level == NOMINAL:
            if not self.categories:
                raise SchemaError(f"{self.name}: nominal variable needs categories")
            if len(set(self.categories)) != len(self.categories) or "" in self.categories:
                raise SchemaError(f"{self.name}: categories must be distinct and non-empty")
        elif self.categories:
            raise SchemaError(f"{self.name}: interval variable cannot declare categories")

    @property
    def is_nominal(self) -> bool:
        return self.level == NOMINAL

    def spec_string(self) -> str:
        s = f"{self.level}:{self.role}"
        if self.categories:
            s += ":" + ",".join(self.categories)
        return s


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered variable declarations.

    The target must be nominal with exactly two categories; the *last declared*
    category is the positive class (label 1).
    """

    variables: tuple[Variable, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")
        targets = [v for v in self.variables if v.role == TARGET]
        if len(targets) != 1:
            raise SchemaError(f"schema needs exactly one target, found {len(targets)}")
        t = targets[0]
        if t.level != NOMINAL or len(t.categories) != 2:
            raise SchemaError(f"target {t.name!r} must be nominal with two categories")

    @classmethod
    def from_config(cls, items: Mapping[str, str] | Iterable[tuple[str, str]]) -> "FeatureSchema":
        """Build a schema from ``name = level:role[:cat1,cat2,...]`` entries."""
        pairs = items.items() if isinstance(items, Mapping) else items
        variables = []
        for name, spec in pairs:
            parts = [p.strip() for p in spec.split(":", 2)]
            if len(parts) < 2:
                raise SchemaError(f"{name}: expected level:role[:categories], got {spec!r}")
            level, role = parts[0].lower(), parts[1].lower()
            if role not in _ROLE_ALIASES:
                raise SchemaError(f"{name}: unknown role {parts[1]!r}")
            cats: tuple[str, ...] = ()
            if len(parts) == 3:
                cats = tuple(c.strip() for c in parts[2].split(","))
            variables.append(Variable(name.strip(), level, _ROLE_ALIASES[role], cats))
        return cls(tuple(variables))

    def to_config(self) -> dict[str, str]:
        return {v.name: v.spec_string() for v in self.variables}

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def target(self) -> Variable:
        return next(v for v in self.variables if v.role == TARGET)

    @property
    def predictors(self) -> list[Variable]:
        return [v for v in self.variables if v.role == PREDICTOR]

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownColumn(name)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownColumn(name) from None


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    rows: tuple[tuple, ...]
    row_ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.row_ids):
            raise DataError("rows and row_ids differ in length")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        j = self.schema.index(name)
        return [r[j] for r in self.rows]

    def labels(self) -> np.ndarray:
        """Target as {0, 1}; the last declared category is 1."""
        t = self.schema.target
        col = self.column(t.name)
        if any(v is None for v in col):
            raise DataError("labels requested on a dataset with missing targets")
        return np.array([1 if v == t.categories[1] else 0 for v in col], dtype=np.int64)

    def take(self, positions: Sequence[int]) -> "Dataset":
        """Subset by position, keeping the original row ids."""
        return Dataset(self.schema,
                       tuple(self.rows[i] for i in positions),
                       tuple(self.row_ids[i] for i in positions))

    def by_ids(self, ids: Iterable[int]) -> "Dataset":
        pos = {rid: i for i, rid in enumerate(self.row_ids)}
        return self.take([pos[i] for i in ids])

    def with_interval_predictors(self, columns: Mapping[str, Sequence[float]]) -> "Dataset":
        """Append interval predictor columns (e.g. node metrics), one value per row."""
        new_vars = tuple(Variable(name, INTERVAL, PREDICTOR) for name in columns)
        schema = FeatureSchema(self.schema.variables + new_vars)
        cols = [list(map(float, values)) for values in columns.values()]
        for name, c in zip(columns, cols):
            if len(c) != len(self.rows):
                raise DataError(f"column {name!r} has {len(c)} values for {len(self.rows)} rows")
        rows = tuple(r + tuple(c[i] for c in cols) for i, r in enumerate(self.rows))
        return Dataset(schema, rows, self.row_ids)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.schema.names)
        for r in self.rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
        return buf.getvalue()


def parse_dataset(csv_text: str, schema: FeatureSchema) -> Dataset:
    """Parse UTF-8 CSV text (header first, empty field = missing).

    Error row numbers are 0-based data-row positions (the header is not counted).
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("CSV input has no header row") from None
    known = set(schema.names)
    for h in header:
        if h not in known:
            raise UnknownColumn(h)
    missing = known.difference(header)
    if missing:
        raise MissingColumn(", ".join(sorted(missing)))
    if len(set(header)) != len(header):
        raise DataError("duplicate column in header")
    pos = [header.index(name) for name in schema.names]
    variables = schema.variables

    rows = []
    for r, raw in enumerate(reader):
        if not raw:
            continue
        if len(raw) != len(header):
            raise DataError(f"row {r}: expected {len(header)} fields, got {len(raw)}")
        out = []
        for var, p in zip(variables, pos):
            cell = raw[p].strip()
            if cell == "":
                out.append(None)
            elif var.is_nominal:
                if cell not in var.categories:
                    raise UnknownCategory(r, var.name, cell)
                out.append(cell)
            else:
                try:
                    x = float(cell)
                except ValueError:
                    raise NonNumericInterval(r, var.name, cell) from None
                if not math.isfinite(x):
                    raise NonNumericInterval(r, var.name, cell)
                out.append(x)
        rows.append(tuple(out))
    return Dataset(schema, tuple(rows), tuple(range(len(rows))))


def clean(ds: Dataset) -> Dataset:
    """Complete-case filter; renumbers row ids to 0..n-1."""
    kept = tuple(r for r in ds.rows if all(v is not None for v in r))
    if not kept:
        raise EmptyAfterClean(f"all {len(ds)} rows have missing values")
    return Dataset(ds.schema, kept, tuple(range(len(kept))))


@dataclass(frozen=True)
class Column:
    name: str
    source: str
    encoding: str  # "indicator" or "standardized"


@dataclass(frozen=True)
class DesignMatrix:
    """Dense encoded predictors plus {0,1} labels.

    ``standardization`` maps interval source variables to the ``(mean, sd)``
    used, with sd the sample (n - 1) standard deviation.
    """

    columns: tuple[Column, ...]
    values: np.ndarray
    labels: np.ndarray
    standardization: dict = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def groups(self) -> list[str]:
        return [c.source for c in self.columns]

    def select(self, names: Sequence[str]) -> np.ndarray:
        idx = {n: j for j, n in enumerate(self.names)}
        try:
            return self.values[:, [idx[n] for n in names]]
        except KeyError as e:
            raise DataError(f"design matrix has no column {e.args[0]!r}") from None

    def signed_labels(self) -> np.ndarray:
        return np.where(self.labels == 1, 1.0, -1.0)


def standardization_params(ds: Dataset, names: Iterable[str]) -> dict[str, tuple[float, float]]:
    params = {}
    for name in names:
        x = np.asarray(ds.column(name), dtype=float)
        if len(x) < 2:
            raise ConstantColumn(f"{name}: need at least two rows to standardize")
        sd = float(np.std(x, ddof=1))
        if not sd > 0:
            raise ConstantColumn(name)
        params[name] = (float(np.mean(x)), sd)
    return params


def encode(ds: Dataset, standardization: Mapping[str, tuple[float, float]] | None = None,
           predictors: Sequence[str] | None = None) -> DesignMatrix:
    """Encode predictors into a design matrix (no intercept column).

    Nominal variables get k-1 indicator columns; the reference level is the
    last category in ascending order.  Interval variables are standardized with
    ``standardization`` when given (the training-side parameters), otherwise
    with the mean and sample sd of ``ds`` itself.
    """
    schema = ds.schema
    wanted = [v for v in schema.predictors if predictors is None or v.name in predictors]
    if predictors is not None:
        unknown = set(predictors) - {v.name for v in wanted}
        if unknown:
            raise UnknownColumn(", ".join(sorted(unknown)))
    intervals = [v.name for v in wanted if not v.is_nominal]
    if standardization is None:
        params = standardization_params(ds, intervals)
    else:
        missing = [n for n in intervals if n not in standardization]
        if missing:
            raise DataError(f"no standardization parameters for {missing}")
        params = {n: tuple(map(float, standardization[n])) for n in intervals}

    columns: list[Column] = []
    blocks = []
    for v in wanted:
        col = ds.column(v.name)
        if any(x is None for x in col):
            raise DataError(f"{v.name}: missing values; clean the dataset first")
        if v.is_nominal:
            for cat in ascending(v.categories)[:-1]:
                columns.append(Column(f"{v.name}={cat}", v.name, "indicator"))
                blocks.append(np.array([1.0 if x == cat else 0.0 for x in col]))
        else:
            mean, sd = params[v.name]
            columns.append(Column(v.name, v.name, "standardized"))
            blocks.append((np.asarray(col, dtype=float) - mean) / sd)
    values = np.column_stack(blocks) if blocks else np.empty((len(ds), 0))
    return DesignMatrix(tuple(columns), values, ds.labels(), dict(params))


@dataclass(frozen=True)
class PartitionPlan:
    validate_fraction: float = 0.2
    seed: int = 12345

    def __post_init__(self):
        if not 0.0 < self.validate_fraction < 1.0:
            raise DegenerateSplit(f"validate_fraction must be in (0, 1), got {self.validate_fraction}")

    def validation_size(self, n: int) -> int:
        return int(math.floor(self.validate_fraction * n + 0.5))


def partition_positions(n: int, plan: PartitionPlan) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, validation) positions for ``n`` rows."""
    n_val = plan.validation_size(n)
    if n < 2 or n_val == 0 or n_val == n:
        raise DegenerateSplit(f"n={n}, fraction={plan.validate_fraction} leaves a side empty")
    perm = np.random.default_rng(plan.seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def partition(ds: Dataset, plan: PartitionPlan) -> tuple[Dataset, Dataset]:
    train, val = partition_positions(len(ds), plan)
    return ds.take(train.tolist()), ds.take(val.tolist())


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Random k-fold split of 0..n-1; fold sizes differ by at most one."""
    if not 2 <= k <= n:
        raise BadFoldCount(f"need 2 <= folds <= n, got folds={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]
