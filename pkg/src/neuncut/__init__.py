"""Neural normalized cut: mini-batch trainable spectral clustering with out-of-sample inference."""

__version__ = "0.1.0"

from .data import DataMatrix, gen_double_c, gen_double_rings, load_csv, save_csv
from .errors import (InvalidConfig, InvalidData, InvalidInput, NumericalError, ParseError,
                     SearchFailed)
from .graph import AffinityGraph, heat_kernel_affinity, laplacian, sparsify_knn
from .metrics import accuracy, ari, evaluate, nmi
from .model import MlpModel
from .trainer import TrainConfig, TrainLog, infer, train

__all__ = [
    "AffinityGraph", "DataMatrix", "InvalidConfig", "InvalidData", "InvalidInput", "MlpModel",
    "NumericalError", "ParseError", "SearchFailed", "TrainConfig", "TrainLog", "accuracy", "ari",
    "evaluate", "gen_double_c", "gen_double_rings", "heat_kernel_affinity", "infer", "laplacian",
    "load_csv", "nmi", "save_csv", "sparsify_knn", "train",
]
