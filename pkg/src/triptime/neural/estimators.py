"""Travel-time regressors with the scikit-learn estimator API.

Three architectures cover the study's model lineup: a shallow one-hidden-
layer network (256 ReLU units), a deeper perceptron (64 then 32 ReLU
units), and two stacked 64-unit LSTM cells reading the feature vector as
a single timestep, all ending in a linear output. During fit the target
is min-max scaled to [0, 1] (a range the gated architecture's bounded
activations reach quickly); predictions come back in raw seconds.
Features are expected pre-scaled (see routes.FeatureScaler).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ValidationError
from .nets import LstmNetwork, MlpNetwork
from .train import TrainConfig, train_network


class _NeuralRegressor(BaseEstimator, RegressorMixin):
    """Shared fit/predict plumbing for the from-scratch networks."""

    model_kind = ""

    def __init__(self, epochs, batch_size, learning_rate, optimizer, seed):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.seed = seed

    def _build_network(self, input_dim: int, rng: np.random.Generator):
        raise NotImplementedError

    def _train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, epochs=self.epochs,
                           learning_rate=self.learning_rate,
                           optimizer=self.optimizer, seed=self.seed)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        config = self._train_config()
        rng = np.random.default_rng(self.seed)
        self.n_features_in_ = X.shape[1]
        self.target_offset_ = float(np.min(y))
        span = float(np.max(y) - np.min(y))
        self.target_scale_ = span if span > 0 else 1.0
        y_scaled = (y - self.target_offset_) / self.target_scale_
        self.network_ = self._build_network(X.shape[1], rng)
        self.loss_history_ = train_network(self.network_, X, y_scaled, config, rng)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.network_.forward(X) * self.target_scale_ + self.target_offset_


class AnnRegressor(_NeuralRegressor):
    """Shallow network: one hidden layer, linear output."""

    model_kind = "ann"

    def __init__(self, hidden_units=256, activation="relu", epochs=200,
                 batch_size=128, learning_rate=1e-3, optimizer="adam", seed=0):
        super().__init__(epochs, batch_size, learning_rate, optimizer, seed)
        self.hidden_units = hidden_units
        self.activation = activation

    def _build_network(self, input_dim, rng):
        return MlpNetwork.build(rng, input_dim, (self.hidden_units,), self.activation)


class MlpRegressor(_NeuralRegressor):
    """Multi-layer perceptron: stacked hidden layers, linear output."""

    model_kind = "mlp"

    def __init__(self, hidden_units=(64, 32), activation="relu", epochs=200,
                 batch_size=128, learning_rate=1e-3, optimizer="adam", seed=0):
        super().__init__(epochs, batch_size, learning_rate, optimizer, seed)
        self.hidden_units = hidden_units
        self.activation = activation

    def _build_network(self, input_dim, rng):
        return MlpNetwork.build(rng, input_dim, tuple(self.hidden_units),
                                self.activation)


class LstmRegressor(_NeuralRegressor):
    """Stacked LSTM reading the feature vector as one timestep."""

    model_kind = "lstm"

    def __init__(self, hidden_units=64, stacked_layers=2, epochs=50,
                 batch_size=128, learning_rate=1e-3, optimizer="adam", seed=0):
        super().__init__(epochs, batch_size, learning_rate, optimizer, seed)
        self.hidden_units = hidden_units
        self.stacked_layers = stacked_layers

    def _build_network(self, input_dim, rng):
        return LstmNetwork.build(rng, input_dim, self.hidden_units,
                                 self.stacked_layers)


ESTIMATOR_KINDS = {
    AnnRegressor.model_kind: AnnRegressor,
    MlpRegressor.model_kind: MlpRegressor,
    LstmRegressor.model_kind: LstmRegressor,
}


def make_estimator(kind: str, **params) -> _NeuralRegressor:
    if kind not in ESTIMATOR_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    return ESTIMATOR_KINDS[kind](**params)
