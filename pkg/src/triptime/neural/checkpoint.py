"""Model checkpoints: one JSON file carrying everything needed to predict.

Layout: model kind and hyperparameters, every parameter array (row-major
nested lists, named per layer), the target z-score statistics, the
feature scaler fitted on the training split, the training config, and
the per-epoch loss history.
"""

from __future__ import annotations

import json
from typing import IO

import numpy as np

from ..errors import ValidationError
from ..routes import FeatureScaler
from .estimators import ESTIMATOR_KINDS, _NeuralRegressor
from .nets import DenseLayer, LstmCell, LstmNetwork, MlpNetwork

FORMAT_VERSION = 1


def _network_to_dict(net) -> dict:
    if isinstance(net, MlpNetwork):
        arch = {
            "type": "mlp",
            "input_dim": net.input_dim,
            "layers": [{"in": l.in_dim, "out": l.out_dim, "activation": l.activation}
                       for l in net.layers],
        }
    elif isinstance(net, LstmNetwork):
        arch = {
            "type": "lstm",
            "input_dim": net.input_dim,
            "hidden": net.cells[0].hidden,
            "stacked_layers": len(net.cells),
        }
    else:
        raise ValidationError(f"unknown network type {type(net).__name__}")
    params = {name: p.tolist()
              for name, p in zip(net.param_names(), net.parameters())}
    return {"architecture": arch, "parameters": params}


def _network_from_dict(data: dict):
    arch = data["architecture"]
    params = data["parameters"]

    def arr(name: str) -> np.ndarray:
        return np.asarray(params[name], dtype=np.float64)

    if arch["type"] == "mlp":
        layers = [DenseLayer(arr(f"layer{i}.weights"), arr(f"layer{i}.bias"),
                             spec["activation"])
                  for i, spec in enumerate(arch["layers"])]
        return MlpNetwork(layers)
    if arch["type"] == "lstm":
        cells = [LstmCell(arr(f"cell{i}.input_weights"),
                          arr(f"cell{i}.recurrent_weights"),
                          arr(f"cell{i}.bias"))
                 for i in range(arch["stacked_layers"])]
        head = DenseLayer(arr("head.weights"), arr("head.bias"), "identity")
        return LstmNetwork(cells, head)
    raise ValidationError(f"unknown architecture type {arch['type']!r}")


def checkpoint_dict(estimator: _NeuralRegressor, feature_scaler: FeatureScaler,
                    feature_columns: list[str] | None = None,
                    road_id: str = "all") -> dict:
    if not hasattr(estimator, "network_"):
        raise ValidationError("estimator is not fitted")
    return {
        "format_version": FORMAT_VERSION,
        "model": estimator.model_kind,
        "road_id": road_id,
        "hyperparams": estimator.get_params(),
        "target_offset": estimator.target_offset_,
        "target_scale": estimator.target_scale_,
        "n_features": estimator.n_features_in_,
        "loss_history": estimator.loss_history_,
        "train_config": estimator._train_config().to_dict(),
        "feature_scaler": feature_scaler.to_json(),
        "feature_columns": feature_columns or [],
        "network": _network_to_dict(estimator.network_),
    }


def save_checkpoint(handle: IO[str] | str, estimator: _NeuralRegressor,
                    feature_scaler: FeatureScaler,
                    feature_columns: list[str] | None = None,
                    road_id: str = "all") -> None:
    data = checkpoint_dict(estimator, feature_scaler, feature_columns, road_id)
    if isinstance(handle, str):
        with open(handle, "w", encoding="utf-8") as f:
            json.dump(data, f)
            f.write("\n")
    else:
        json.dump(data, handle)
        handle.write("\n")


def load_checkpoint(handle: IO[str] | str,
                    ) -> tuple[_NeuralRegressor, FeatureScaler, dict]:
    """Rebuild (estimator, feature_scaler, metadata) from a checkpoint."""
    if isinstance(handle, str):
        with open(handle, "r", encoding="utf-8") as f:
            data = json.load(f)
    else:
        data = json.load(handle)
    kind = data["model"]
    if kind not in ESTIMATOR_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    hyper = dict(data["hyperparams"])
    if isinstance(hyper.get("hidden_units"), list):
        hyper["hidden_units"] = tuple(hyper["hidden_units"])
    estimator = ESTIMATOR_KINDS[kind](**hyper)
    estimator.network_ = _network_from_dict(data["network"])
    estimator.n_features_in_ = int(data["n_features"])
    estimator.target_offset_ = float(data["target_offset"])
    estimator.target_scale_ = float(data["target_scale"])
    estimator.loss_history_ = list(data["loss_history"])
    scaler = FeatureScaler.from_json(data["feature_scaler"])
    meta = {k: data[k] for k in ("model", "road_id", "train_config",
                                 "feature_columns", "loss_history")}
    return estimator, scaler, meta
