"""Analytic gradients of the training loss against central finite differences.

Run in float64 on a miniature network with batch-norm statistics frozen, so
repeated loss evaluations are side-effect free and the comparison is exact up
to truncation error of the differences.
"""

import numpy as np
import torch

from csipos.network import ModelConfig, build
from csipos.training import batch_loss
from helpers import finite_difference_gradients, freeze_batchnorm_stats


def _miniature(seed=0):
    cfg = ModelConfig(
        num_dense_blocks=1,
        layers_per_block=2,
        growth_rate=3,
        fc_widths=(8, 4),
        input_shape=(4, 6),
    )
    model = build(cfg, seed=seed).double()
    freeze_batchnorm_stats(model)
    model.train()
    rng = np.random.default_rng(seed)
    X = torch.tensor(rng.standard_normal((3, 4, 6, 2)))
    y = torch.tensor(rng.standard_normal((3, 2)) * 100.0)
    return model, X, y


def _relative_errors(model, X, y, loss_name):
    def loss_fn():
        return batch_loss(model(X), y, loss_name)

    for p in model.parameters():
        p.grad = None
    loss_fn().backward()
    analytic = {n: p.grad.detach().numpy().copy() for n, p in model.named_parameters()}
    numeric = finite_difference_gradients(model, loss_fn)
    worst = {}
    for name in analytic:
        a, f = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-8)
        worst[name] = float(np.max(np.abs(a - f) / denom))
    return worst


def test_all_parameter_gradients_match_finite_differences():
    model, X, y = _miniature(seed=0)
    worst = _relative_errors(model, X, y, "squared-euclidean")
    assert max(worst.values()) < 1e-4, worst


def test_gradients_match_for_euclidean_loss_too():
    model, X, y = _miniature(seed=1)
    worst = _relative_errors(model, X, y, "euclidean")
    assert max(worst.values()) < 1e-4, worst


def test_every_parameter_receives_gradient():
    model, X, y = _miniature(seed=2)
    batch_loss(model(X), y, "squared-euclidean").backward()
    for name, p in model.named_parameters():
        assert p.grad is not None, name
        assert float(p.grad.abs().sum()) > 0.0, name
