"""Disease classification from survey data augmented with small-world network features."""
from .data import (DesignMatrix, Dataset, FeatureSchema, PartitionPlan, Variable, clean, encode,
                   kfold_indices, parse_dataset, partition)
from .errors import ConfigError, DataError, NetClassifyError, NumericError
from .evaluation import EvalSummary, ScoredSet, auc, confusion, roc_curve
from .logistic import LogisticModel, fit, odds_ratio_table, stepwise, wald
from .metrics import NodeMetrics, global_diagnostics, node_metrics
from .smallworld import Graph, SmallWorldConfig, generate, ring_lattice, rewire, weight_edges
from .svm import KernelSpec, SvmModel, SvmTrainConfig, grid_search, train

__version__ = "0.1.0"
