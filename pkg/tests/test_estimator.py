import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from csipos.estimator import CsiMaxAbsScaler, CsiPositionRegressor
from helpers import tiny_synthetic_dataset


@pytest.fixture(scope="module")
def small_data():
    ds = tiny_synthetic_dataset(n_users=24, seed=3)
    return ds.features, ds.labels


class TestScaler:
    def test_fit_transform(self, small_data):
        X, _ = small_data
        scaler = CsiMaxAbsScaler().fit(X)
        out = scaler.transform(X)
        assert np.max(np.abs(out)) == pytest.approx(1.0)
        assert np.allclose(scaler.inverse_transform(out), X, rtol=1e-6)

    def test_not_fitted(self, small_data):
        with pytest.raises(NotFittedError):
            CsiMaxAbsScaler().transform(small_data[0])

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            CsiMaxAbsScaler().fit(np.zeros((2, 4, 4, 2)))

    def test_clone_and_params(self):
        scaler = CsiMaxAbsScaler()
        assert clone(scaler).get_params() == scaler.get_params()


class TestRegressor:
    def make(self, **overrides):
        params = dict(
            num_dense_blocks=2, layers_per_block=2, growth_rate=8,
            fc_widths=(32, 16), max_epochs=120, patience=120,
            learning_rate=2e-3, batch_size=8, val_fraction=0.2, seed=0,
        )
        params.update(overrides)
        return CsiPositionRegressor(**params)

    def test_get_params_round_trip(self):
        reg = self.make()
        again = CsiPositionRegressor(**reg.get_params())
        assert again.get_params() == reg.get_params()

    def test_clone(self):
        reg = self.make()
        assert clone(reg).get_params() == reg.get_params()

    def test_fit_predict_learns(self, small_data):
        X, y = small_data
        scaler = CsiMaxAbsScaler().fit(X)
        Xs = scaler.transform(X)
        reg = self.make().fit(Xs, y)
        predictions = reg.predict(Xs)
        assert predictions.shape == y.shape
        trained_err = reg.mean_error(Xs, y)
        untrained_err = self.make(max_epochs=0).fit(Xs, y).mean_error(Xs, y)
        assert trained_err < untrained_err / 3

    def test_explicit_validation_split(self, small_data):
        X, y = small_data
        reg = self.make(max_epochs=2).fit(X[:16], y[:16], X_val=X[16:], y_val=y[16:])
        assert len(reg.history_) <= 2
        assert reg.input_shape_ == (X.shape[1], X.shape[2])

    def test_predict_before_fit(self, small_data):
        with pytest.raises(NotFittedError):
            self.make().predict(small_data[0])

    def test_mismatched_val_arguments(self, small_data):
        X, y = small_data
        with pytest.raises(ValueError):
            self.make().fit(X, y, X_val=X)

    def test_pipeline_composition(self, small_data):
        X, y = small_data
        pipe = Pipeline([
            ("scale", CsiMaxAbsScaler()),
            ("net", self.make(max_epochs=3)),
        ])
        pipe.fit(X, y)
        assert pipe.predict(X).shape == y.shape

    def test_rejects_bad_shapes(self, small_data):
        X, y = small_data
        from csipos.errors import ShapeMismatchError

        with pytest.raises(ShapeMismatchError):
            self.make().fit(X[..., :1], y)
        with pytest.raises(ValueError):
            self.make().fit(X, y[:3])
