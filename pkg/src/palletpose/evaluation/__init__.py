from .metrics import align_rigid, compute_robustness, lowpass_filter, synchronize
from .plot import plot_horizontal
from .report import EvalConfig, EvalReport, evaluate, fold_symmetry
from .trajectory import TrajectorySample, invert_stream, load_trajectory, save_trajectory

__all__ = [
    "EvalConfig",
    "EvalReport",
    "TrajectorySample",
    "align_rigid",
    "compute_robustness",
    "evaluate",
    "fold_symmetry",
    "invert_stream",
    "load_trajectory",
    "lowpass_filter",
    "plot_horizontal",
    "save_trajectory",
    "synchronize",
]
