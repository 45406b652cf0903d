"""Shared fixtures-in-spirit for the test suite: small scenes and oracles."""

import cmath
import math

import numpy as np
import torch

import csipos as cp
from csipos.simulate import SPEED_OF_LIGHT, substream


def small_geometry(rows=2, cols=2, origin=(0.0, -2.0, 1.0)):
    return cp.ArrayGeometry(num_rows=rows, num_cols=cols, origin=np.array(origin))


def small_radio(k=6):
    return cp.RadioConfig(num_subcarriers=k)


def scattered_environment(seed=0, count=3, noise_std=0.0, los_gain=1.0):
    rng = substream(seed)
    positions = rng.uniform([-2.0, -1.0, 0.3], [3.0, 3.0, 2.0], size=(count, 3))
    gains = (0.3 + 0.6 * rng.random(count)) * np.exp(1j * rng.uniform(0, 2 * np.pi, count))
    scatterers = [cp.Scatterer(p, g) for p, g in zip(positions, gains)]
    return cp.Environment(scatterers=scatterers, noise_std=noise_std, los_gain=los_gain)


def enumerate_paths_oracle(user, env, geom, radio):
    """Scalar, loop-based path sum, independent of the vectorised simulator.

    Only valid for environments without blockers or agents: every path is
    taken as visible.
    """
    ants = geom.antenna_positions()
    freqs = cp.subcarrier_frequencies(radio)
    H = np.zeros((len(ants), len(freqs)), dtype=complex)
    for m in range(len(ants)):
        d0 = math.dist(user, ants[m])
        for k in range(len(freqs)):
            f = freqs[k]
            H[m, k] += env.los_gain / d0 * cmath.exp(-2j * math.pi * f * d0 / SPEED_OF_LIGHT)
            for sc in env.scatterers:
                d1 = math.dist(user, sc.position)
                d2 = math.dist(sc.position, ants[m])
                H[m, k] += sc.gain / (d1 * d2) * cmath.exp(
                    -2j * math.pi * f * (d1 + d2) / SPEED_OF_LIGHT
                )
    return H


def random_dataset(n=12, m=4, k=6, seed=0, label_span=400.0):
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, m, k, 2)).astype(np.float32)
    labels = rng.uniform(-label_span, label_span, size=(n, 2))
    return cp.CsiDataset(features, labels, np.arange(n) % 4, np.arange(n, dtype=float))


def tiny_synthetic_dataset(n_users=8, seed=7, k=8, rows=4, cols=4, area_m=0.4):
    """Small LoS+multipath dataset with genuinely informative features."""
    geom = cp.ArrayGeometry(num_rows=rows, num_cols=cols, origin=[0.0, -1.5, 1.0])
    radio = cp.RadioConfig(num_subcarriers=k)
    env = cp.Environment(
        scatterers=[
            cp.Scatterer([1.5, 1.0, 1.2], 0.6),
            cp.Scatterer([-1.2, 0.7, 0.5], 0.5),
        ]
    )
    rng = np.random.default_rng(seed)
    users = rng.uniform([0.0, 0.0, 1.0], [area_m, area_m, 1.0], size=(n_users, 3))
    samples = [
        cp.generate_sample(u, env, geom, radio, rng=substream(seed, i)) for i, u in enumerate(users)
    ]
    return cp.to_dataset(samples)


def finite_difference_gradients(model, loss_fn, rel_step=1e-5):
    """Central finite differences of loss_fn() w.r.t. every model parameter.

    The model must be side-effect free under repeated evaluation (freeze
    batch-norm running stats first). Returns {name: grad array}.
    """
    grads = {}
    for name, p in model.named_parameters():
        flat = p.data.reshape(-1)
        g = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            step = rel_step * max(1.0, abs(orig))
            flat[i] = orig + step
            upper = loss_fn().item()
            flat[i] = orig - step
            lower = loss_fn().item()
            flat[i] = orig
            g[i] = (upper - lower) / (2.0 * step)
        grads[name] = g.reshape(p.shape).numpy()
    return grads


def freeze_batchnorm_stats(model):
    for mod in model.modules():
        if isinstance(mod, torch.nn.BatchNorm2d):
            mod.momentum = 0.0
