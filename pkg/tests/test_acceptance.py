"""Acceptance suite: one test per criterion, one PASS line per criterion.

Criteria 4-6 share one desk-scale training run (module-scoped fixture). Run
with `-v -s` to see the PASS lines and the measured runtimes.
"""

import math
import time

import numpy as np
import pytest
import torch

import csipos as cp
from csipos.data import SplitSpec, apply_normaliser
from csipos.experiments import run_cross_environment, run_nomadic, standard_scenarios
from csipos.network import ModelConfig, build, count_layers, predict_positions
from csipos.training import TrainConfig, batch_loss, load_checkpoint, save_checkpoint, train
from helpers import finite_difference_gradients, freeze_batchnorm_stats, tiny_synthetic_dataset

# ---------------------------------------------------------------------------
# Desk-scale scenario shared by criteria 4, 5, 6: an 8x8 array two metres in
# front of a 1 m x 1 m user area, 8 scatterers in the immediate surroundings
# of the area, 20 dB per-entry SNR.

AREA_MM = (0.0, 0.0, 1000.0, 1000.0)
GRID_SPACING_MM = 14.2  # 71 x 71 = 5041 grid samples
USER_HEIGHT = 1.0
NUM_SCATTERERS = 8
SCATTER_RADIUS = (0.3, 1.0)   # distance from the area centre, metres
SCATTER_GAIN = (0.5, 0.9)
SNR_DB = 20.0
ENV_SEED_A, ENV_SEED_B = 11, 22
GEN_SEED_A, GEN_SEED_B = 1, 2

DESK_MODEL = dict(growth_rate=8, fc_widths=(128, 64), input_shape=(64, 20))
DESK_TRAIN = dict(learning_rate=1e-3, batch_size=64, max_epochs=45, patience=8, seed=0)

_elapsed = {}


def _timed(key):
    class Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            _elapsed[key] = time.perf_counter() - self.t0

    return Timer()


def _report(criterion, passed, detail):
    print(f"\nACCEPTANCE criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def desk_geometry():
    return cp.ArrayGeometry(num_rows=8, num_cols=8, origin=[0.5, -2.0, 1.0])


def desk_radio():
    return cp.RadioConfig(num_subcarriers=20)


def desk_environment(seed, noise_std=0.0):
    """Scatterers on a ring around the user area, clear of the user plane."""
    rng = cp.simulate.substream(seed)
    scatterers = []
    while len(scatterers) < NUM_SCATTERERS:
        radius = rng.uniform(*SCATTER_RADIUS)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        height = rng.uniform(0.4, 1.8)
        pos = np.array([0.5 + radius * math.cos(angle), 0.5 + radius * math.sin(angle), height])
        gain = rng.uniform(*SCATTER_GAIN) * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
        if 0.0 <= pos[0] <= 1.0 and 0.0 <= pos[1] <= 1.0 and abs(pos[2] - USER_HEIGHT) < 0.25:
            continue  # too close to where users can be
        scatterers.append(cp.Scatterer(pos, gain))
    return cp.Environment(scatterers=scatterers, noise_std=noise_std)


@pytest.fixture(scope="module")
def desk():
    """Datasets for environments A and B plus the model trained in A."""
    geom, radio = desk_geometry(), desk_radio()
    probes = [[0.1, 0.1, USER_HEIGHT], [0.9, 0.9, USER_HEIGHT], [0.5, 0.5, USER_HEIGHT]]
    noise = cp.noise_std_for_snr(SNR_DB, probes, desk_environment(ENV_SEED_A), geom, radio)
    env_a = desk_environment(ENV_SEED_A, noise_std=noise)
    env_b = desk_environment(ENV_SEED_B, noise_std=noise)

    with _timed("desk_generate"):
        ds_a = cp.to_dataset(
            cp.generate_grid_dataset(AREA_MM, GRID_SPACING_MM, USER_HEIGHT, env_a, geom, radio,
                                     seed=GEN_SEED_A, workers=2)
        )
        ds_b = cp.to_dataset(
            cp.generate_grid_dataset(AREA_MM, GRID_SPACING_MM, USER_HEIGHT, env_b, geom, radio,
                                     seed=GEN_SEED_B, workers=2)
        )
    assert len(ds_a) == 5041  # 71 x 71

    with _timed("desk_train"):
        outcome = run_cross_environment(
            ds_a, ds_b,
            ModelConfig(**DESK_MODEL),
            TrainConfig(**DESK_TRAIN),
            AREA_MM,
            SplitSpec(seed=0),
        )
    return {
        "outcome": outcome,
        "env_a": env_a,
        "geom": geom,
        "radio": radio,
        "noise_std": noise,
        "dataset_a": ds_a,
    }


def test_criterion_1_architecture_contract():
    with _timed("c1"):
        model = build(ModelConfig(), seed=0)
        conv, fc = count_layers(model)
        assert (conv, fc) == (16, 3)
        batch = np.random.default_rng(0).standard_normal((3, 64, 100, 2)).astype(np.float32)
        out = predict_positions(model, batch)
        assert out.shape == (3, 2)
        assert np.all(np.isfinite(out))
    assert _elapsed["c1"] < 60
    _report(1, True, f"count_layers=(16, 3), forward (3,64,100,2)->(3,2) in {_elapsed['c1']:.1f}s")


def test_criterion_2_gradient_check():
    with _timed("c2"):
        config = ModelConfig(num_dense_blocks=1, layers_per_block=2, growth_rate=3,
                             fc_widths=(8, 4), input_shape=(4, 6))
        model = build(config, seed=0).double()
        freeze_batchnorm_stats(model)
        model.train()
        rng = np.random.default_rng(0)
        X = torch.tensor(rng.standard_normal((3, 4, 6, 2)))
        y = torch.tensor(rng.standard_normal((3, 2)) * 100.0)

        def loss_fn():
            return batch_loss(model(X), y, "squared-euclidean")

        loss_fn().backward()
        numeric = finite_difference_gradients(model, loss_fn)
        worst = 0.0
        checked = 0
        for name, p in model.named_parameters():
            analytic = p.grad.detach().numpy()
            fd = numeric[name]
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-8)
            worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
            checked += analytic.size
        assert worst < 1e-4
    assert _elapsed["c2"] < 120
    _report(2, True, f"{checked} parameter gradients, worst relative error {worst:.2e} in {_elapsed['c2']:.1f}s")


def test_criterion_3_overfit_sanity():
    with _timed("c3"):
        ds = tiny_synthetic_dataset(n_users=8, seed=7)
        ds = apply_normaliser(ds, cp.fit_normaliser(ds))
        config = TrainConfig(learning_rate=2e-3, batch_size=8, max_epochs=2000,
                             patience=2000, target_val_error_mm=1.0, seed=0)
        model = build(ModelConfig(num_dense_blocks=2, layers_per_block=2, growth_rate=8,
                                  fc_widths=(32, 16), input_shape=(16, 8)), seed=0)
        model, history = train(model, ds, ds, config)
        steps = len(history)  # full-batch: one update per epoch
        err = cp.evaluate(model, ds)
        assert err < 1.0
        assert steps <= 2000
    assert _elapsed["c3"] < 300
    _report(3, True, f"memorised 8 records to {err:.3f} mm in {steps} update steps, {_elapsed['c3']:.1f}s")


def test_criterion_4_desk_scale_generalisation(desk):
    outcome = desk["outcome"]
    err = outcome.summary_in_env.mean_mm
    baseline = outcome.centroid_baseline_mm
    runtime = _elapsed["desk_generate"] + _elapsed["desk_train"]
    assert err < 100.0
    assert err < baseline / 3.0
    assert runtime < 1200
    _report(4, True,
            f"test error {err:.2f} mm vs centroid baseline {baseline:.2f} mm "
            f"(generation+training {runtime:.0f}s)")


def test_criterion_5_cross_environment_property(desk):
    outcome = desk["outcome"]
    err_a = outcome.summary_in_env.mean_mm
    err_b = outcome.summary_cross_env.mean_mm
    vec_b = float(np.linalg.norm(outcome.summary_cross_env.mean_vector_mm))
    baseline = outcome.centroid_baseline_mm
    runtime = _elapsed["desk_generate"] + _elapsed["desk_train"]
    assert err_b >= 5.0 * err_a
    assert err_b >= 0.5 * baseline
    assert vec_b < 0.25 * err_b
    assert runtime < 1500
    _report(5, True,
            f"cross-env {err_b:.2f} mm = {err_b / err_a:.1f}x in-env, "
            f"{err_b / baseline:.2f}x centroid baseline, |mean vector| {vec_b:.2f} mm "
            f"({vec_b / err_b:.2f}x error)")


def test_criterion_6_nomadic_property(desk):
    with _timed("c6"):
        outcome = desk["outcome"]
        env_quiet = cp.Environment(scatterers=desk["env_a"].scatterers, noise_std=0.0)
        scenarios = [
            s for s in standard_scenarios(
                AREA_MM, user_height=USER_HEIGHT, walker_height=1.0, margin=0.35,
                duration=120.0, dt=0.5, agent_speed=1.0, agent_body_radius=0.35,
            )
            if s.name in ("none", "front")
        ]
        nomadic = run_nomadic(
            outcome.model, scenarios, env_quiet, desk["geom"], desk["radio"],
            seed=5, norm_stats=cp.NormStats(scale=outcome.result.provenance["norm_scale"]),
        )
        report = nomadic.report
        users = report.users()

        for user in users:  # (a) static reference: deviation exactly 0
            assert np.all(report.entry(user, "none").deviations_mm == 0.0)

        margins = []
        for user in users:  # (b) blocked timesteps hurt more than unblocked
            entry = report.entry(user, "front")
            blocked = entry.deviations_mm[entry.blocked]
            unblocked = entry.deviations_mm[~entry.blocked]
            assert blocked.size > 0 and unblocked.size > 0
            assert blocked.mean() > unblocked.mean()
            margins.append(blocked.mean() / unblocked.mean())

        for user in users:  # (c) series length at the standard cadence
            assert len(report.entry(user, "front").deviations_mm) == 240
            assert len(report.entry(user, "none").deviations_mm) == 240
    assert _elapsed["c6"] < 600
    _report(6, True,
            f"reference deviations all 0, blocked/unblocked deviation ratios "
            f"{', '.join(f'{m:.1f}' for m in margins)}, 240 steps/user in {_elapsed['c6']:.0f}s")


def test_criterion_7_metric_oracles():
    with _timed("c7"):
        centroid = cp.centroid_baseline((0, 0, 1, 1), n_mc=1_000_000, seed=0)
        pair = cp.random_pair_baseline((0, 0, 1, 1), n_mc=1_000_000, seed=0)
        assert centroid == pytest.approx(0.3826, abs=1e-3)
        assert pair == pytest.approx(0.5214, abs=1e-3)
        # independent oracle: a second 1e6-draw Monte Carlo on a different generator
        rng = np.random.Generator(np.random.PCG64DXSM(987654321))
        u = rng.uniform(size=(1_000_000, 2))
        v = rng.uniform(size=(1_000_000, 2))
        assert centroid == pytest.approx(float(np.mean(np.linalg.norm(u - 0.5, axis=1))), abs=1e-3)
        assert pair == pytest.approx(float(np.mean(np.linalg.norm(u - v, axis=1))), abs=1e-3)
        assert cp.to_lambda(17.16) == 0.150
    assert _elapsed["c7"] < 60
    _report(7, True,
            f"centroid {centroid:.4f}, random pair {pair:.4f} on the unit square; "
            f"to_lambda(17.16)=0.150")


def test_criterion_8_determinism_and_persistence(tmp_path):
    with _timed("c8"):
        # dataset store/load bit-exact
        env = desk_environment(33, noise_std=0.02)
        geom, radio = cp.ArrayGeometry(num_rows=2, num_cols=2, origin=[0.5, -2.0, 1.0]), cp.RadioConfig(num_subcarriers=6)
        ds = cp.to_dataset(cp.generate_grid_dataset((0, 0, 600, 600), 200.0, 1.0, env, geom, radio, seed=4))
        cp.store_dataset(ds, tmp_path / "ds")
        back = cp.load_dataset(tmp_path / "ds")
        assert back.fingerprint() == ds.fingerprint()
        for name in ("features", "labels", "user_ids", "timestamps"):
            assert np.array_equal(getattr(back, name), getattr(ds, name))

        # identical seeds -> identical grid data
        again = cp.to_dataset(cp.generate_grid_dataset((0, 0, 600, 600), 200.0, 1.0, env, geom, radio, seed=4))
        assert again.fingerprint() == ds.fingerprint()

        # checkpoint save/load bit-exact, inference unchanged
        small = tiny_synthetic_dataset(n_users=8, seed=7)
        small = apply_normaliser(small, cp.fit_normaliser(small))
        config = TrainConfig(max_epochs=3, batch_size=4, seed=0)
        model_config = ModelConfig(num_dense_blocks=2, layers_per_block=2, growth_rate=8,
                                   fc_widths=(32, 16), input_shape=(16, 8))
        histories = []
        for _ in range(2):
            model, history = train(build(model_config, seed=0), small, small, config)
            histories.append(history)
        assert histories[0].train_loss == histories[1].train_loss
        assert histories[0].val_loss == histories[1].val_loss
        assert histories[0].val_error_mm == histories[1].val_error_mm

        before = predict_positions(model, small.features)
        save_checkpoint(model, histories[1], tmp_path / "ckpt")
        restored, history_back = load_checkpoint(tmp_path / "ckpt")
        assert np.array_equal(predict_positions(restored, small.features), before)
        assert history_back.to_dict() == histories[1].to_dict()

        # identical seeds -> identical experiment numerics
        from csipos.experiments import run_benchmark

        runs = [
            run_benchmark(small, model_config, TrainConfig(max_epochs=2, batch_size=4, seed=1))
            for _ in range(2)
        ]
        assert runs[0].summary.mean_mm == runs[1].summary.mean_mm
        assert np.array_equal(runs[0].summary.cdf, runs[1].summary.cdf)
        assert runs[0].result.provenance == runs[1].result.provenance
    assert _elapsed["c8"] < 300
    _report(8, True, f"bit-exact persistence and seed-reproducible runs in {_elapsed['c8']:.1f}s")


def test_criterion_9_full_scale_informational():
    message = (
        "full-scale reproduction needs the published 252004-sample corpora: "
        "ingest them via `csipos ingest --adapter <name>` (register an adapter "
        "for the downloaded layout), then `csipos train` with the default "
        "85/5/10 split; mean test error approaching ~17 mm is the reference "
        "outcome. Not gated: the datasets are not bundled and training is far "
        "beyond desk scale."
    )
    _report(9, True, f"informational - {message}")
    pytest.skip(message)
