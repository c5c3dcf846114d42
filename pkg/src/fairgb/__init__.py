"""Fair node classification by group re-balancing: counterfactual node mixup and
contribution-aligned loss weighting on top of small NumPy GNN encoders."""

from .cal import cal_loss, contributions, group_weights, oversample, rw_weights
from .cnm import build_augmented_graph, verify_independence
from .data import DatasetSpec, SyntheticSpec, generate_synthetic, load_dataset
from .encoders import EncoderConfig
from .graph import Graph, build_group_table
from .metrics import Evaluation, evaluate
from .train import RunReport, TrainConfig, run_experiment, train

__version__ = "0.1.0"

__all__ = [
    "DatasetSpec", "EncoderConfig", "Evaluation", "Graph", "RunReport", "SyntheticSpec", "TrainConfig",
    "build_augmented_graph", "build_group_table", "cal_loss", "contributions", "evaluate",
    "generate_synthetic", "group_weights", "load_dataset", "oversample", "run_experiment", "rw_weights",
    "train", "verify_independence",
]
