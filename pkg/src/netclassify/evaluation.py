"""Operating-point metrics, ROC curves and the model comparison table."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, MismatchedRows, NoNegatives, NoPositives, SingleClass

PROBABILITY_THRESHOLD = 0.5
DECISION_THRESHOLD = 0.0

SUMMARY_HEADER = ("MODEL", "GRAPH METRICS", "KERNEL", "BEST C", "SENSITIVITY", "SPECIFICITY",
                  "ROC INDEX (TEST)")

_KERNEL_ORDER = {"NA": 0, "LINEAR": 1, "POLY": 2, "RBF": 3}


@dataclass(frozen=True)
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        y = np.asarray(self.labels).ravel()
        if s.shape != y.shape:
            raise MismatchedRows(f"{len(s)} scores for {len(y)} labels")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not np.isfinite(s).all():
            raise DataError("scores must be finite")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return len(self.labels) - self.positives


def confusion(s: ScoredSet, threshold: float = PROBABILITY_THRESHOLD) -> tuple[float, float]:
    """(sensitivity, specificity) in percent; a row is called positive iff score > threshold."""
    if len(s.labels) == 0:
        raise DataError("empty scored set")
    if s.positives == 0:
        raise NoPositives("sensitivity is undefined without positive rows")
    if s.negatives == 0:
        raise NoNegatives("specificity is undefined without negative rows")
    called = s.scores > threshold
    pos = s.labels == 1
    tp = int(np.sum(called & pos))
    tn = int(np.sum(~called & ~pos))
    return 100.0 * tp / s.positives, 100.0 * tn / s.negatives


def _roc_counts(s: ScoredSet) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (false, true) positive counts at each distinct threshold, from the top."""
    if s.positives == 0 or s.negatives == 0:
        raise SingleClass("ROC analysis needs both classes")
    order = np.argsort(-s.scores, kind="stable")
    scores = s.scores[order]
    labels = s.labels[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(scores) != 0), len(scores) - 1]
    tp = np.cumsum(labels)[ends]
    fp = (ends + 1) - tp
    return np.r_[0, fp], np.r_[0, tp]


def roc_curve(s: ScoredSet) -> list[tuple[float, float]]:
    """(fpr, tpr) from (0, 0) to (1, 1), one point per distinct score."""
    fp, tp = _roc_counts(s)
    return [(f / s.negatives, t / s.positives) for f, t in zip(fp.tolist(), tp.tolist())]


def auc(s: ScoredSet) -> float:
    """Trapezoidal area under the ROC curve.

    The sum is kept in integers and divided once, which makes it identical to
    the rank statistic (concordant pairs + ties / 2) / (P * N).
    """
    fp, tp = _roc_counts(s)
    twice_area = sum(int(df) * int(a + b) for df, a, b in zip(np.diff(fp), tp[:-1], tp[1:]))
    return twice_area / (2 * s.positives * s.negatives)


def roc_csv(points: Iterable[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("fpr", "tpr"))
    for f, t in points:
        w.writerow((repr(float(f)), repr(float(t))))
    return buf.getvalue()


@dataclass(frozen=True)
class EvalSummary:
    model: str  # LOGISTIC or SVM
    graph_metrics: bool
    kernel: str | None
    best_c: float | None
    sensitivity: float
    specificity: float
    roc_index: float

    def __post_init__(self):
        for name in ("sensitivity", "specificity", "roc_index"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} {v} outside [0, 100]")

    @property
    def key(self) -> str:
        """File-name friendly identifier, e.g. ``svm_poly_graph``."""
        parts = [self.model.lower()]
        if self.kernel:
            parts.append(self.kernel.lower())
        parts.append("graph" if self.graph_metrics else "base")
        return "_".join(parts)

    def row(self) -> tuple[str, ...]:
        return (self.model, "YES" if self.graph_metrics else "NO", self.kernel or "NA",
                "NA" if self.best_c is None else f"{self.best_c:g}",
                f"{self.sensitivity:.2f}", f"{self.specificity:.2f}", f"{self.roc_index:.2f}")

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "EvalSummary":
        model, graph, kernel, best_c, sens, spec, roc = (c.strip() for c in row)
        return cls(model, graph == "YES", None if kernel == "NA" else kernel,
                   None if best_c == "NA" else float(best_c), float(sens), float(spec), float(roc))

    def order(self) -> tuple:
        return (self.model != "LOGISTIC", _KERNEL_ORDER.get(self.kernel or "NA", 9),
                self.graph_metrics)


def summarize(model: str, graph_metrics: bool, s: ScoredSet, threshold: float,
              kernel: str | None = None, best_c: float | None = None) -> EvalSummary:
    sens, spec = confusion(s, threshold)
    return EvalSummary(model, graph_metrics, kernel, best_c, sens, spec, 100.0 * auc(s))


@dataclass(frozen=True)
class Scored:
    """One trained model's validation scores, ready for comparison."""

    model: str
    graph_metrics: bool
    scores: np.ndarray
    row_ids: tuple[int, ...]
    kernel: str | None = None
    best_c: float | None = None

    @property
    def threshold(self) -> float:
        return PROBABILITY_THRESHOLD if self.model == "LOGISTIC" else DECISION_THRESHOLD


def compare(models: Sequence[Scored], labels: Sequence[int], row_ids: Sequence[int]
            ) -> tuple[list[EvalSummary], dict[str, list[tuple[float, float]]]]:
    """Summary rows in table order plus each model's ROC curve keyed by :attr:`EvalSummary.key`."""
    ids = tuple(int(i) for i in row_ids)
    rows, curves = [], {}
    for m in models:
        if tuple(m.row_ids) != ids:
            raise MismatchedRows(f"{m.model} {m.kernel or ''} was scored on different rows")
        s = ScoredSet(m.scores, labels)
        summary = summarize(m.model, m.graph_metrics, s, m.threshold, m.kernel, m.best_c)
        rows.append(summary)
        curves[summary.key] = roc_curve(s)
    rows.sort(key=EvalSummary.order)
    return rows, curves


def summary_csv(rows: Iterable[EvalSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def parse_summary(text: str) -> list[EvalSummary]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or tuple(c.strip() for c in rows[0]) != SUMMARY_HEADER:
        raise DataError("summary CSV has an unexpected header")
    return [EvalSummary.from_row(r) for r in rows[1:]]


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def roc_svg(curves: dict[str, list[tuple[float, float]]], title: str = "ROC", size: int = 400) -> str:
    """Overlaid ROC curves as a standalone SVG document."""
    pad = 40
    span = size - 2 * pad
    xy = lambda f, t: (pad + f * span, size - pad - t * span)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20 * len(curves)}">',
           f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>',
           f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{pad}" stroke="#999" '
           'stroke-dasharray="4"/>',
           f'<text x="{size / 2}" y="{pad / 2}" text-anchor="middle">{title}</text>',
           f'<text x="{size / 2}" y="{size - 8}" text-anchor="middle">1 - specificity</text>',
           f'<text x="12" y="{size / 2}" transform="rotate(-90 12 {size / 2})" '
           'text-anchor="middle">sensitivity</text>']
    for k, (name, pts) in enumerate(curves.items()):
        color = _COLORS[k % len(_COLORS)]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(f, t) for f, t in pts))
        out.append(f'<polyline fill="none" stroke="{color}" points="{path}"/>')
        out.append(f'<text x="{pad}" y="{size + 14 + 20 * k}" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
