"""Scikit-learn style estimator API.

`CsiPositionRegressor` wraps network construction and training behind the
usual fit/predict/get_params surface so the positioning model composes with
pipelines and model-selection tooling; `CsiMaxAbsScaler` is the matching
global-amplitude transformer. Feature arrays are (n, M, K, 2) throughout.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import metrics
from .data import CsiDataset
from .network import ModelConfig, build, predict_positions
from .training import TrainConfig, train
from .validation import as_feature_array, as_position_array


class CsiMaxAbsScaler(TransformerMixin, BaseEstimator):
    """Divide all feature entries by the global max-abs of the fitting set.

    A single global divisor preserves the relative amplitude and phase
    structure across antennas and subcarriers, which per-feature
    standardisation would destroy.
    """

    def fit(self, X, y=None):
        X = as_feature_array(X)
        scale = float(np.max(np.abs(X)))
        if scale == 0.0:
            raise ValueError("cannot fit a scaler on all-zero features")
        self.scale_ = scale
        return self

    def transform(self, X):
        if not hasattr(self, "scale_"):
            raise NotFittedError("CsiMaxAbsScaler is not fitted")
        X = np.asarray(X)
        return X / np.asarray(self.scale_, dtype=X.dtype)

    def inverse_transform(self, X):
        if not hasattr(self, "scale_"):
            raise NotFittedError("CsiMaxAbsScaler is not fitted")
        X = np.asarray(X)
        return X * np.asarray(self.scale_, dtype=X.dtype)


class CsiPositionRegressor(RegressorMixin, BaseEstimator):
    """Dense-block CNN position regressor with validation-based early stopping.

    fit(X, y) expects CSI feature tensors X of shape (n, M, K, 2) and planar
    positions y in mm of shape (n, 2). A validation split is carved off with
    `val_fraction` unless one is passed explicitly.
    """

    def __init__(
        self,
        num_dense_blocks=4,
        layers_per_block=4,
        growth_rate=12,
        stem_channels=16,
        include_stem=False,
        kernel_size=(3, 3),
        fc_widths=(256, 128),
        batchnorm_per_block=True,
        loss="squared-euclidean",
        learning_rate=1e-3,
        batch_size=64,
        max_epochs=100,
        patience=10,
        val_fraction=0.05,
        seed=0,
    ):
        self.num_dense_blocks = num_dense_blocks
        self.layers_per_block = layers_per_block
        self.growth_rate = growth_rate
        self.stem_channels = stem_channels
        self.include_stem = include_stem
        self.kernel_size = kernel_size
        self.fc_widths = fc_widths
        self.batchnorm_per_block = batchnorm_per_block
        self.loss = loss
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.seed = seed

    def _model_config(self, input_shape) -> ModelConfig:
        return ModelConfig(
            num_dense_blocks=self.num_dense_blocks,
            layers_per_block=self.layers_per_block,
            growth_rate=self.growth_rate,
            stem_channels=self.stem_channels,
            include_stem=self.include_stem,
            kernel_size=self.kernel_size,
            fc_widths=self.fc_widths,
            batchnorm_per_block=self.batchnorm_per_block,
            input_shape=input_shape,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            loss=self.loss,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X = as_feature_array(X)
        y = as_position_array(y, n=X.shape[0])
        if (X_val is None) != (y_val is None):
            raise ValueError("pass X_val and y_val together or not at all")
        if X_val is None:
            n = X.shape[0]
            n_val = max(1, int(np.floor(self.val_fraction * n)))
            if n - n_val < 1:
                raise ValueError("not enough samples to carve off a validation split")
            perm = np.random.default_rng(self.seed).permutation(n)
            val_idx, train_idx = perm[:n_val], perm[n_val:]
            X_val, y_val = X[val_idx], y[val_idx]
            X, y = X[train_idx], y[train_idx]
        else:
            X_val = as_feature_array(X_val, name="X_val")
            y_val = as_position_array(y_val, n=X_val.shape[0], name="y_val")

        input_shape = (X.shape[1], X.shape[2])
        model = build(self._model_config(input_shape), seed=self.seed)
        train_data = CsiDataset(X.astype(np.float32), y)
        val_data = CsiDataset(X_val.astype(np.float32), y_val)
        self.model_, self.history_ = train(model, train_data, val_data, self._train_config())
        self.input_shape_ = input_shape
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("CsiPositionRegressor is not fitted")
        X = as_feature_array(X)
        return predict_positions(self.model_, X)

    def mean_error(self, X, y) -> float:
        """Mean Euclidean error in mm on the given data."""
        return metrics.mean_error(self.predict(X), as_position_array(y))
