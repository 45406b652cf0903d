"""Prototype of the desk-scale generalisation + cross-environment runs.

Throwaway tuning script, not part of the package.
"""
import time

import numpy as np

import csipos as cp
from csipos.data import SplitSpec
from csipos.network import ModelConfig
from csipos.training import TrainConfig
from csipos.experiments import run_benchmark, run_cross_environment
from csipos.simulate import substream


def make_env(seed, num_scatterers=8, noise_std=0.0):
    rng = substream(seed)
    positions = rng.uniform([-1.5, -1.5, 0.2], [2.5, 3.0, 2.2], size=(num_scatterers, 3))
    # keep scatterers out of the user plane area to avoid singularities
    keep = []
    for p in positions:
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.3:
            p[2] += 0.6
        keep.append(p)
    gains = 0.5 + 0.4 * rng.random(num_scatterers)
    phases = rng.uniform(0, 2 * np.pi, num_scatterers)
    scatterers = [cp.Scatterer(p, g * np.exp(1j * ph)) for p, g, ph in zip(keep, gains, phases)]
    return cp.Environment(scatterers=scatterers, noise_std=noise_std)


t0 = time.time()
geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
radio = cp.RadioConfig(num_subcarriers=20)
area = (0.0, 0.0, 1000.0, 1000.0)

env_a = make_env(101)
probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0], [0.1, 0.9, 1.0]]
noise = cp.noise_std_for_snr(20.0, probes, env_a, geom, radio)
print("noise_std for 20 dB:", noise)
env_a = make_env(101, noise_std=noise)
env_b = make_env(202, noise_std=noise)

samples = cp.generate_grid_dataset(area, 14.2, 1.0, env_a, geom, radio, seed=1, workers=2)
print(f"generated A: {len(samples)} in {time.time()-t0:.1f}s")
ds_a = cp.to_dataset(samples)

t1 = time.time()
samples_b = cp.generate_grid_dataset(area, 14.2, 1.0, env_b, geom, radio, seed=2, workers=2)
ds_b = cp.to_dataset(samples_b)
print(f"generated B: {len(samples_b)} in {time.time()-t1:.1f}s")

model_cfg = ModelConfig(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20))
train_cfg = TrainConfig(learning_rate=1e-3, batch_size=64, max_epochs=40, patience=8, seed=0)
split = SplitSpec(seed=0)

t2 = time.time()
out = run_cross_environment(ds_a, ds_b, model_cfg, train_cfg, area, split, n_mc=200_000)
print(f"trained+evaluated in {time.time()-t2:.1f}s")
print("A test error:", out.summary_in_env.mean_mm)
print("B test error:", out.summary_cross_env.mean_mm)
print("B mean vector:", out.summary_cross_env.mean_vector_mm, np.linalg.norm(out.summary_cross_env.mean_vector_mm))
print("centroid baseline:", out.centroid_baseline_mm)
print("pair baseline:", out.random_pair_baseline_mm)
print("criterion4:", out.summary_in_env.mean_mm < 100 and out.summary_in_env.mean_mm < out.centroid_baseline_mm / 3)
print("criterion5 ratio:", out.summary_cross_env.mean_mm / out.summary_in_env.mean_mm,
      "vs centroid:", out.summary_cross_env.mean_mm / out.centroid_baseline_mm,
      "vec ratio:", np.linalg.norm(out.summary_cross_env.mean_vector_mm) / out.summary_cross_env.mean_mm)
print("total", time.time() - t0)
