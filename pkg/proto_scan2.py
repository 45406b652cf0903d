"""Second scan: many-weak-scatterer regime at closer-to-final training."""
import time
import numpy as np
import csipos as cp
from csipos.data import SplitSpec, apply_normaliser, fit_normaliser, split_indices
from csipos.network import ModelConfig, build, predict_positions
from csipos.training import TrainConfig, train
from csipos.simulate import substream
from csipos import metrics


def make_env(seed, n, glo, ghi, noise_std=0.0):
    rng = substream(seed)
    pos = rng.uniform([-1.5, -1.5, 0.2], [2.5, 3.0, 2.2], size=(n, 3))
    for p in pos:
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.3:
            p[2] += 0.6
    g = glo + (ghi - glo) * rng.random(n)
    ph = rng.uniform(0, 2 * np.pi, n)
    return cp.Environment(scatterers=[cp.Scatterer(p, gg * np.exp(1j * pp)) for p, gg, pp in zip(pos, g, ph)],
                          noise_std=noise_std)


def run(tag, n_scat, glo, ghi, seed_a=101, seed_b=202, epochs=40):
    geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
    radio = cp.RadioConfig(num_subcarriers=20)
    area = (0.0, 0.0, 1000.0, 1000.0)
    probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0]]
    noise = cp.noise_std_for_snr(20.0, probes, make_env(seed_a, n_scat, glo, ghi), geom, radio)
    env_a = make_env(seed_a, n_scat, glo, ghi, noise)
    env_b = make_env(seed_b, n_scat, glo, ghi, noise)
    ds_a = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_a, geom, radio, seed=1, workers=2))
    ds_b = cp.to_dataset(cp.generate_grid_dataset(area, 20.0, 1.0, env_b, geom, radio, seed=2, workers=2))
    split = SplitSpec(seed=0)
    tr, va, te = split_indices(len(ds_a), split)
    stats = fit_normaliser(ds_a.subset(tr))
    na, nb = apply_normaliser(ds_a, stats), apply_normaliser(ds_b, stats)
    cfg = ModelConfig(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20))
    tc = TrainConfig(learning_rate=1e-3, batch_size=64, max_epochs=epochs, patience=10, seed=0)
    model, _ = train(build(cfg, seed=0), na.subset(tr), na.subset(va), tc)
    est_a = predict_positions(model, na.subset(te).features)
    est_b = predict_positions(model, nb.subset(te).features)
    err_a = metrics.mean_error(est_a, ds_a.labels[te])
    err_b = metrics.mean_error(est_b, ds_b.labels[te])
    vec = np.linalg.norm(metrics.mean_error_vector(est_b, ds_b.labels[te]))
    inside = np.mean((est_b[:, 0] >= 0) & (est_b[:, 0] <= 1000) & (est_b[:, 1] >= 0) & (est_b[:, 1] <= 1000))
    print(f"{tag:24s} A={err_a:7.2f} B={err_b:7.2f} B/A={err_b/err_a:6.2f} |vec|={vec:7.2f} "
          f"vec/B={vec/err_b:5.2f} inside={inside:4.2f} mean=({np.mean(est_b[:,0]):6.1f},{np.mean(est_b[:,1]):6.1f})",
          flush=True)


t0 = time.time()
run("24 x 0.3-0.6", 24, 0.3, 0.6)
run("32 x 0.25-0.5", 32, 0.25, 0.5)
run("16 x 0.4-0.7", 16, 0.4, 0.7)
run("8 x 0.5-0.9 (control)", 8, 0.5, 0.9)
print("total", time.time() - t0, flush=True)
