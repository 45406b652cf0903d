"""Fifth scan: nearer-ring recipe x {BN on/off} x {A-scale vs B-self-scale}."""
import time
import numpy as np
import csipos as cp
from csipos.data import NormStats, SplitSpec, apply_normaliser, fit_normaliser, split_indices
from csipos.network import ModelConfig, build, predict_positions
from csipos.training import TrainConfig, train
from csipos.simulate import substream
from csipos import metrics


def near_env(seed, noise_std=0.0, n=8, glo=0.5, ghi=0.9, r_lo=0.25, r_hi=0.7):
    rng = substream(seed)
    out = []
    while len(out) < n:
        r = rng.uniform(r_lo, r_hi)
        ang = rng.uniform(0, 2 * np.pi)
        z = rng.uniform(0.4, 1.8)
        p = np.array([0.5 + r * np.cos(ang), 0.5 + r * np.sin(ang), z])
        g = rng.uniform(glo, ghi) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.25:
            continue
        out.append(cp.Scatterer(p, g))
    return cp.Environment(scatterers=out, noise_std=noise_std)


geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
radio = cp.RadioConfig(num_subcarriers=20)
area = (0.0, 0.0, 1000.0, 1000.0)
probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0]]

for seed_a, seed_b in [(11, 22), (55, 66)]:
    noise = cp.noise_std_for_snr(20.0, probes, near_env(seed_a), geom, radio)
    env_a, env_b = near_env(seed_a, noise), near_env(seed_b, noise)
    ds_a = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_a, geom, radio, seed=1, workers=2))
    ds_b = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_b, geom, radio, seed=2, workers=2))
    split = SplitSpec(seed=0)
    tr, va, te = split_indices(len(ds_a), split)
    stats_a = fit_normaliser(ds_a.subset(tr))
    stats_b = fit_normaliser(ds_b.subset(tr))
    na = apply_normaliser(ds_a, stats_a)
    for bn in (True, False):
        cfg = ModelConfig(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20), batchnorm_per_block=bn)
        tc = TrainConfig(learning_rate=1e-3, batch_size=64, max_epochs=35, patience=10, seed=0)
        t0 = time.time()
        model, _ = train(build(cfg, seed=0), na.subset(tr), na.subset(va), tc)
        err_a = metrics.mean_error(predict_positions(model, na.subset(te).features), ds_a.labels[te])
        for scheme, stats in (("A-scale", stats_a), ("B-scale", stats_b)):
            nb = apply_normaliser(ds_b, stats)
            est_b = predict_positions(model, nb.subset(te).features)
            err_b = metrics.mean_error(est_b, ds_b.labels[te])
            vec = np.linalg.norm(metrics.mean_error_vector(est_b, ds_b.labels[te]))
            inside = np.mean((est_b[:, 0] >= 0) & (est_b[:, 0] <= 1000) & (est_b[:, 1] >= 0) & (est_b[:, 1] <= 1000))
            print(f"seeds {seed_a}/{seed_b} bn={int(bn)} {scheme:7s} A={err_a:7.2f} B={err_b:7.2f} "
                  f"B/A={err_b/err_a:5.2f} |vec|={vec:7.2f} vec/B={vec/err_b:5.2f} inside={inside:4.2f}",
                  flush=True)
        print(f"  (train {time.time()-t0:.0f}s)", flush=True)
