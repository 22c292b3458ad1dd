"""dlpredictor: CNN-LSTM tipping-point regressor over tipcast instance files."""

from .data import CorpusFormatError, load_instances, split_indices
from .model import NetworkSpec, TippingNet, TrainConfig
from .predict import (export_prediction_file, load_ensemble,
                      predict_file, predict_instances)
from .train import train

__version__ = "0.1.0"
