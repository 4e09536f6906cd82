"""Bridges real CNNs to the activation scanner's file formats."""

__version__ = "0.1.0"

from .attacks import apply_attack, bim, fgsm
from .extract import ExtractionJob, TrainingDivergedError, run_extraction
from .model import LAYER_SIZES, TOTAL_NODES, ActivationCnn, capture_activations
