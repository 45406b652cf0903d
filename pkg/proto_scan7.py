"""Seventh scan: LoS-dominant A (sparse, weak scatterers), scattering-rich B."""
import time
import numpy as np
import csipos as cp
from csipos.data import SplitSpec, apply_normaliser, fit_normaliser, split_indices
from csipos.network import ModelConfig, build, predict_positions
from csipos.training import TrainConfig, train
from csipos.simulate import substream
from csipos import metrics


def box_env(seed, n, glo, ghi, noise_std=0.0):
    rng = substream(seed)
    out = []
    while len(out) < n:
        p = rng.uniform([-1.5, -1.5, 0.2], [2.5, 3.0, 2.2])
        g = rng.uniform(glo, ghi) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.25:
            continue
        out.append(cp.Scatterer(p, g))
    return cp.Environment(scatterers=out, noise_std=noise_std)


geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
radio = cp.RadioConfig(num_subcarriers=20)
area = (0.0, 0.0, 1000.0, 1000.0)
probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0]]

for a_glo, a_ghi in ((0.15, 0.35), (0.25, 0.5)):
    noise = cp.noise_std_for_snr(20.0, probes, box_env(11, 8, a_glo, a_ghi), geom, radio)
    env_a = box_env(11, 8, a_glo, a_ghi, noise)
    ds_a = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_a, geom, radio, seed=1, workers=2))
    split = SplitSpec(seed=0)
    tr, va, te = split_indices(len(ds_a), split)
    stats = fit_normaliser(ds_a.subset(tr))
    na = apply_normaliser(ds_a, stats)
    cfg = ModelConfig(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20))
    tc = TrainConfig(learning_rate=1e-3, batch_size=64, max_epochs=45, patience=10, seed=0)
    t0 = time.time()
    model, hist = train(build(cfg, seed=0), na.subset(tr), na.subset(va), tc)
    err_a = metrics.mean_error(predict_positions(model, na.subset(te).features), ds_a.labels[te])
    print(f"A gains {a_glo}-{a_ghi}: trained {time.time()-t0:.0f}s epochs={len(hist)} A_err={err_a:.2f}",
          flush=True)
    for (n_b, b_glo, b_ghi, seed_b) in ((16, 0.5, 0.9, 22), (32, 0.5, 0.9, 22), (32, 0.5, 0.9, 44),
                                        (24, 0.6, 0.95, 22)):
        env_b = box_env(seed_b, n_b, b_glo, b_ghi, noise)
        ds_b = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_b, geom, radio, seed=2, workers=2))
        nb = apply_normaliser(ds_b, stats)
        est_b = predict_positions(model, nb.subset(te).features)
        err_b = metrics.mean_error(est_b, ds_b.labels[te])
        vec = np.linalg.norm(metrics.mean_error_vector(est_b, ds_b.labels[te]))
        inside = np.mean((est_b[:, 0] >= 0) & (est_b[:, 0] <= 1000) & (est_b[:, 1] >= 0) & (est_b[:, 1] <= 1000))
        print(f"  B {n_b}x{b_glo}-{b_ghi} seed{seed_b}: B={err_b:7.2f} B/A={err_b/err_a:6.2f} "
              f"|vec|={vec:7.2f} vec/B={vec/err_b:5.2f} inside={inside:4.2f}", flush=True)
