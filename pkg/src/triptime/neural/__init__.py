"""From-scratch neural regressors for trip travel time."""

from .checkpoint import load_checkpoint, save_checkpoint
from .estimators import (ESTIMATOR_KINDS, AnnRegressor, LstmRegressor,
                         MlpRegressor, make_estimator)
from .metrics import mae, rmse
from .nets import (DenseLayer, LstmCell, LstmNetwork, LstmState, MlpNetwork,
                   dense_forward, lstm_step)
from .train import Adam, Sgd, TrainConfig, train_network

__all__ = [
    "Adam", "AnnRegressor", "DenseLayer", "ESTIMATOR_KINDS", "LstmCell",
    "LstmNetwork", "LstmRegressor", "LstmState", "MlpNetwork", "MlpRegressor",
    "Sgd", "TrainConfig", "dense_forward", "load_checkpoint", "lstm_step",
    "mae", "make_estimator", "rmse", "save_checkpoint", "train_network",
]
