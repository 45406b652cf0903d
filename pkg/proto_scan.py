"""Reduced-scale scan for criterion-5 behaviour (throwaway)."""
import sys
import time

import numpy as np
import torch

import csipos as cp
from csipos.data import SplitSpec, apply_normaliser, fit_normaliser, split_indices
from csipos.network import ModelConfig, build, predict_positions
from csipos.training import TrainConfig, train
from csipos.simulate import substream
from csipos import metrics


def make_env(seed, num_scatterers, gain_lo, gain_hi, noise_std=0.0):
    rng = substream(seed)
    positions = rng.uniform([-1.5, -1.5, 0.2], [2.5, 3.0, 2.2], size=(num_scatterers, 3))
    for p in positions:
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.3:
            p[2] += 0.6
    gains = gain_lo + (gain_hi - gain_lo) * rng.random(num_scatterers)
    phases = rng.uniform(0, 2 * np.pi, num_scatterers)
    scatterers = [cp.Scatterer(p, g * np.exp(1j * ph)) for p, g, ph in zip(positions, gains, phases)]
    return cp.Environment(scatterers=scatterers, noise_std=noise_std)


def run(tag, n_scat=8, gain_lo=0.5, gain_hi=0.9, weight_decay=0.0, snr_db=20.0,
        spacing=28.4, epochs=25, growth=6, fc=(64, 32), seed_a=101, seed_b=202):
    geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
    radio = cp.RadioConfig(num_subcarriers=20)
    area = (0.0, 0.0, 1000.0, 1000.0)
    probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0]]
    env_a0 = make_env(seed_a, n_scat, gain_lo, gain_hi)
    noise = cp.noise_std_for_snr(snr_db, probes, env_a0, geom, radio)
    env_a = make_env(seed_a, n_scat, gain_lo, gain_hi, noise_std=noise)
    env_b = make_env(seed_b, n_scat, gain_lo, gain_hi, noise_std=noise)

    ds_a = cp.to_dataset(cp.generate_grid_dataset(area, spacing, 1.0, env_a, geom, radio, seed=1, workers=2))
    ds_b = cp.to_dataset(cp.generate_grid_dataset(area, spacing, 1.0, env_b, geom, radio, seed=2, workers=2))

    split = SplitSpec(seed=0)
    tr, va, te = split_indices(len(ds_a), split)
    stats = fit_normaliser(ds_a.subset(tr))
    na, nb = apply_normaliser(ds_a, stats), apply_normaliser(ds_b, stats)

    cfg = ModelConfig(growth_rate=growth, fc_widths=fc, input_shape=(64, 20))
    tc = TrainConfig(learning_rate=1e-3, batch_size=64, max_epochs=epochs, patience=8, seed=0)
    model = build(cfg, seed=0)
    if weight_decay:
        # monkey-patch optimiser creation via manual loop? quick hack: wrap train
        import csipos.training as T
        orig = torch.optim.Adam
        torch.optim.Adam = lambda params, lr: orig(params, lr=lr, weight_decay=weight_decay)
        model, hist = train(model, na.subset(tr), na.subset(va), tc)
        torch.optim.Adam = orig
    else:
        model, hist = train(model, na.subset(tr), na.subset(va), tc)

    est_a = predict_positions(model, na.subset(te).features)
    est_b = predict_positions(model, nb.subset(te).features)
    err_a = metrics.mean_error(est_a, ds_a.labels[te])
    err_b = metrics.mean_error(est_b, ds_b.labels[te])
    vec_b = metrics.mean_error_vector(est_b, ds_b.labels[te])
    inside = np.mean(
        (est_b[:, 0] >= 0) & (est_b[:, 0] <= 1000) & (est_b[:, 1] >= 0) & (est_b[:, 1] <= 1000)
    )
    print(
        f"{tag:28s} A={err_a:7.2f}  B={err_b:7.2f}  B/A={err_b/max(err_a,1e-9):6.2f} "
        f"|vec|={np.linalg.norm(vec_b):7.2f}  vec/B={np.linalg.norm(vec_b)/err_b:5.2f} "
        f"inside={inside:4.2f}  est_b_mean=({np.mean(est_b[:,0]):6.1f},{np.mean(est_b[:,1]):6.1f})",
        flush=True,
    )


t0 = time.time()
run("baseline")
run("weight_decay=1e-3", weight_decay=1e-3)
run("low gains 0.15-0.3", gain_lo=0.15, gain_hi=0.3)
run("many weak 16x0.2-0.4", n_scat=16, gain_lo=0.2, gain_hi=0.4)
run("high noise 10dB", snr_db=10.0)
run("seeds 303/404", seed_a=303, seed_b=404)
print("total", time.time() - t0)
