"""Full-scale validation of the acceptance constants (criteria 4, 5, 6)."""
import time
import numpy as np
import csipos as cp
from csipos.data import SplitSpec, apply_normaliser, fit_normaliser, split_indices
from csipos.network import ModelConfig, build, predict_positions
from csipos.training import TrainConfig, train
from csipos.experiments import run_cross_environment, run_nomadic, standard_scenarios
from csipos.simulate import substream
from csipos import metrics

# ---- constants under validation (mirror tests/test_acceptance.py) ----
AREA_MM = (0.0, 0.0, 1000.0, 1000.0)
SPACING = 14.2
A_COUNT, A_GAINS = 8, (0.15, 0.35)
B_COUNT, B_GAINS = 32, (0.5, 0.9)
SEED_A, SEED_B = 11, 22
MODEL = dict(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20))
TRAIN = dict(learning_rate=1e-3, batch_size=64, max_epochs=45, patience=8, seed=0)


def box_env(seed, n, gains, noise_std=0.0):
    rng = substream(seed)
    out = []
    while len(out) < n:
        p = rng.uniform([-1.5, -1.5, 0.2], [2.5, 3.0, 2.2])
        g = rng.uniform(*gains) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        if 0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0 and abs(p[2] - 1.0) < 0.25:
            continue
        out.append(cp.Scatterer(p, g))
    return cp.Environment(scatterers=out, noise_std=noise_std)


t0 = time.time()
geom = cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])
radio = cp.RadioConfig(num_subcarriers=20)
probes = [[0.1, 0.1, 1.0], [0.9, 0.9, 1.0], [0.5, 0.5, 1.0]]
noise = cp.noise_std_for_snr(20.0, probes, box_env(SEED_A, A_COUNT, A_GAINS), geom, radio)
env_a = box_env(SEED_A, A_COUNT, A_GAINS, noise)
env_b = box_env(SEED_B, B_COUNT, B_GAINS, noise)
ds_a = cp.to_dataset(cp.generate_grid_dataset(AREA_MM, SPACING, 1.0, env_a, geom, radio, seed=1, workers=2))
ds_b = cp.to_dataset(cp.generate_grid_dataset(AREA_MM, SPACING, 1.0, env_b, geom, radio, seed=2, workers=2))
print(f"generated {len(ds_a)}+{len(ds_b)} in {time.time()-t0:.0f}s", flush=True)

t1 = time.time()
out = run_cross_environment(ds_a, ds_b, ModelConfig(**MODEL), TrainConfig(**TRAIN), AREA_MM, SplitSpec(seed=0))
t_train = time.time() - t1
err_a, err_b = out.summary_in_env.mean_mm, out.summary_cross_env.mean_mm
vec = float(np.linalg.norm(out.summary_cross_env.mean_vector_mm))
cen = out.centroid_baseline_mm
print(f"train+eval {t_train:.0f}s", flush=True)
print(f"C4: A={err_a:.2f} (<100? {err_a<100}; <cen/3={cen/3:.1f}? {err_a<cen/3})", flush=True)
print(f"C5: B={err_b:.2f} B/A={err_b/err_a:.2f} (>=5? {err_b>=5*err_a}) "
      f"B>=0.5cen={0.5*cen:.0f}? {err_b>=0.5*cen} |vec|={vec:.2f} vec/B={vec/err_b:.3f} (<0.25? {vec<0.25*err_b})",
      flush=True)

# criterion 6
t2 = time.time()
env_quiet = cp.Environment(scatterers=env_a.scatterers, noise_std=0.0)
scenarios = [s for s in standard_scenarios(AREA_MM, user_height=1.0, walker_height=1.0, margin=0.35,
                                           duration=120.0, dt=0.5, agent_speed=1.0, agent_body_radius=0.35)
             if s.name in ("none", "front")]
nom = run_nomadic(out.model, scenarios, env_quiet, geom, radio, seed=5,
                  norm_stats=cp.NormStats(scale=out.result.provenance["norm_scale"]))
rep = nom.report
ok_a = all(np.all(rep.entry(u, "none").deviations_mm == 0.0) for u in rep.users())
ratios = []
for u in rep.users():
    e = rep.entry(u, "front")
    b, ub = e.deviations_mm[e.blocked], e.deviations_mm[~e.blocked]
    ratios.append((u, len(b), len(ub), b.mean() if len(b) else -1, ub.mean() if len(ub) else -1))
print(f"C6 in {time.time()-t2:.0f}s: ref-zero={ok_a}", flush=True)
for u, nb, nub, mb, mub in ratios:
    print(f"  user {u}: blocked n={nb} mean={mb:.1f} | unblocked n={nub} mean={mub:.1f} | ratio={mb/max(mub,1e-9):.2f}",
          flush=True)
print(f"total {time.time()-t0:.0f}s", flush=True)
