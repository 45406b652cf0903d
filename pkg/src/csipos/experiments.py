"""Experiment drivers: in-environment benchmark, cross-environment transfer,
and nomadic-environment deviation runs.

Every driver records provenance (configs, seeds, dataset fingerprints)
sufficient to regenerate its numbers, and leaves its inputs untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .configs import environment_to_dict, geometry_to_dict, radio_to_dict, train_config_to_dict
from .data import CsiDataset, NormStats, SplitSpec, apply_normaliser, fit_normaliser, split_indices, to_dataset
from .errors import ConfigError, GridMismatchError
from .metrics import DeviationReport, ErrorSummary, deviation_report
from .network import ModelConfig, build, predict_positions
from .simulate import ArrayGeometry, Environment, MovingAgent, RadioConfig, generate_timeseries, los_visible
from .training import TrainConfig, TrainHistory, train
from .validation import as_rect

SCENARIO_NAMES = ("back", "left", "right", "front", "middle-lr", "middle-fb", "none")


@dataclass
class ScenarioSpec:
    """One nomadic scenario: a walker trajectory past fixed users."""

    name: str
    users: list
    waypoints: np.ndarray | None = None  # None: no walker (the reference run)
    duration: float = 120.0
    dt: float = 0.5
    agent_speed: float = 1.0
    agent_body_radius: float = 0.3
    agent_scatter_gain: complex = 0.5 + 0.0j

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"scenario name must be one of {SCENARIO_NAMES}, got {self.name!r}")
        if self.dt <= 0 or self.duration <= 0:
            raise ConfigError("scenario duration and dt must be > 0")
        if not self.users:
            raise ConfigError("scenario needs at least one user position")
        if (self.name == "none") != (self.waypoints is None):
            raise ConfigError("exactly the 'none' scenario must have no trajectory")
        if self.waypoints is not None:
            self.waypoints = np.asarray(self.waypoints, dtype=np.float64)

    def agent(self) -> MovingAgent | None:
        if self.waypoints is None:
            return None
        return MovingAgent(
            waypoints=self.waypoints,
            speed=self.agent_speed,
            body_radius=self.agent_body_radius,
            scatter_gain=self.agent_scatter_gain,
        )

    def num_steps(self) -> int:
        return int(np.floor(self.duration / self.dt))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "users": [[float(v) for v in u] for u in self.users],
            "waypoints": None if self.waypoints is None else [[float(v) for v in w] for w in self.waypoints],
            "duration": self.duration,
            "dt": self.dt,
            "agent_speed": self.agent_speed,
            "agent_body_radius": self.agent_body_radius,
            "agent_scatter_gain": [self.agent_scatter_gain.real, self.agent_scatter_gain.imag],
        }


def standard_scenarios(
    area_mm,
    user_height: float = 1.0,
    walker_height: float = 1.0,
    margin: float = 0.5,
    duration: float = 120.0,
    dt: float = 0.5,
    agent_speed: float = 1.0,
    agent_body_radius: float = 0.3,
    agent_scatter_gain: complex = 0.5 + 0.0j,
) -> list:
    """The six walker trajectories plus the static reference.

    Users sit at the four quadrant centres of the area. The convention is
    that the array faces the area from the -y side, so "front" crosses
    between array and users and "back" passes behind them. `margin` is how
    far outside the area (metres) the side trajectories run.
    """
    x0, y0, w, h = (v / 1000.0 for v in as_rect(area_mm))
    x1, y1 = x0 + w, y0 + h
    xc, yc = x0 + w / 2.0, y0 + h / 2.0
    users = [
        np.array([x0 + w / 4.0, y0 + h / 4.0, user_height]),
        np.array([x0 + 3.0 * w / 4.0, y0 + h / 4.0, user_height]),
        np.array([x0 + w / 4.0, y0 + 3.0 * h / 4.0, user_height]),
        np.array([x0 + 3.0 * w / 4.0, y0 + 3.0 * h / 4.0, user_height]),
    ]
    z = walker_height
    lines = {
        "back": [[x0, y1 + margin, z], [x1, y1 + margin, z]],
        "left": [[x0 - margin, y0, z], [x0 - margin, y1, z]],
        "right": [[x1 + margin, y0, z], [x1 + margin, y1, z]],
        "front": [[x0, y0 - margin, z], [x1, y0 - margin, z]],
        "middle-lr": [[x0, yc, z], [x1, yc, z]],
        "middle-fb": [[xc, y0, z], [xc, y1, z]],
        "none": None,
    }
    common = dict(
        users=users,
        duration=duration,
        dt=dt,
        agent_speed=agent_speed,
        agent_body_radius=agent_body_radius,
        agent_scatter_gain=agent_scatter_gain,
    )
    return [ScenarioSpec(name=name, waypoints=wps, **common) for name, wps in lines.items()]


@dataclass
class ExperimentResult:
    """Named result tables plus the provenance needed to regenerate them."""

    kind: str
    tables: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


@dataclass
class BenchmarkOutcome:
    summary: ErrorSummary
    model: object
    history: TrainHistory
    norm_stats: NormStats
    split: tuple
    result: ExperimentResult


def run_benchmark(
    dataset: CsiDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    split_spec: SplitSpec | None = None,
    report_wavelength: float = metrics.DEFAULT_REPORT_WAVELENGTH_MM,
    trainer=train,
) -> BenchmarkOutcome:
    """Train on the train split, report mean error on the test split."""
    split_spec = split_spec or SplitSpec(seed=train_config.seed)
    tr, va, te = split_indices(len(dataset), split_spec)
    stats = fit_normaliser(dataset.subset(tr))
    normed = apply_normaliser(dataset, stats)
    model = build(model_config, seed=train_config.seed)
    model, history = trainer(model, normed.subset(tr), normed.subset(va), train_config)
    estimates = predict_positions(model, normed.subset(te).features)
    summary = ErrorSummary.from_estimates(estimates, dataset.labels[te], report_wavelength)
    provenance = {
        "dataset_fingerprint": dataset.fingerprint(),
        "split": {
            "train_frac": split_spec.train_frac,
            "val_frac": split_spec.val_frac,
            "test_frac": split_spec.test_frac,
            "seed": split_spec.seed,
        },
        "model_config": model_config.to_dict(),
        "train_config": train_config_to_dict(train_config),
        "norm_scale": stats.scale,
        "report_wavelength": report_wavelength,
    }
    result = ExperimentResult(kind="benchmark", tables={"test": summary}, provenance=provenance)
    return BenchmarkOutcome(summary, model, history, stats, (tr, va, te), result)


def _check_same_grid(dataset_a: CsiDataset, dataset_b: CsiDataset) -> None:
    if len(dataset_a) != len(dataset_b):
        raise GridMismatchError(f"label grids differ in size: {len(dataset_a)} vs {len(dataset_b)}")
    order_a = np.lexsort((dataset_a.labels[:, 1], dataset_a.labels[:, 0]))
    order_b = np.lexsort((dataset_b.labels[:, 1], dataset_b.labels[:, 0]))
    if not np.array_equal(dataset_a.labels[order_a], dataset_b.labels[order_b]):
        raise GridMismatchError("the two datasets do not share a label grid")


@dataclass
class CrossEnvironmentOutcome:
    summary_in_env: ErrorSummary
    summary_cross_env: ErrorSummary
    centroid_baseline_mm: float
    random_pair_baseline_mm: float
    model: object
    result: ExperimentResult


def run_cross_environment(
    dataset_a: CsiDataset,
    dataset_b: CsiDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    area_mm,
    split_spec: SplitSpec | None = None,
    report_wavelength: float = metrics.DEFAULT_REPORT_WAVELENGTH_MM,
    n_mc: int = 1_000_000,
    baseline_seed: int = 0,
    trainer=train,
) -> CrossEnvironmentOutcome:
    """Train in environment A, evaluate both in A and, unseen, in B.

    The two datasets must share the user-position grid; they should differ
    only in their propagation environments. Guess-level baselines for the
    area put the cross-environment error in context.
    """
    _check_same_grid(dataset_a, dataset_b)
    bench = run_benchmark(dataset_a, model_config, train_config, split_spec, report_wavelength, trainer)
    _, _, te = bench.split
    normed_b = apply_normaliser(dataset_b, bench.norm_stats)
    estimates_b = predict_positions(bench.model, normed_b.subset(te).features)
    summary_b = ErrorSummary.from_estimates(estimates_b, dataset_b.labels[te], report_wavelength)
    centroid = metrics.centroid_baseline(area_mm, n_mc=n_mc, seed=baseline_seed)
    pair = metrics.random_pair_baseline(area_mm, n_mc=n_mc, seed=baseline_seed)
    provenance = dict(bench.result.provenance)
    provenance.update(
        {
            "dataset_fingerprint_cross": dataset_b.fingerprint(),
            "area_mm": list(as_rect(area_mm)),
            "baseline_draws": n_mc,
            "baseline_seed": baseline_seed,
        }
    )
    result = ExperimentResult(
        kind="cross-environment",
        tables={
            "in_env": bench.summary,
            "cross_env": summary_b,
            "baselines": {"centroid_mm": centroid, "random_pair_mm": pair},
        },
        provenance=provenance,
    )
    return CrossEnvironmentOutcome(bench.summary, summary_b, centroid, pair, bench.model, result)


@dataclass
class NomadicOutcome:
    report: DeviationReport
    result: ExperimentResult


def _scenario_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def run_nomadic(
    model,
    scenarios: list,
    env: Environment,
    geom: ArrayGeometry,
    radio: RadioConfig,
    seed: int = 0,
    norm_stats: NormStats | None = None,
) -> NomadicOutcome:
    """Per-scenario time series, position estimates, and deviation report.

    The 'none' scenario provides the static reference estimates. Each entry
    carries a per-timestep flag telling whether the user's direct path to the
    array centre was occluded, and thus whether it was ever blocked at all.
    """
    by_name = {s.name: s for s in scenarios}
    if "none" not in by_name:
        raise ConfigError("scenario list must include the static 'none' reference")

    estimates: dict = {}
    blocked: dict = {}
    times: dict = {}
    for index, spec in enumerate(scenarios):
        agent = spec.agent()
        scenario_env = env if agent is None else replace(env, agents=[*env.agents, agent])
        series = generate_timeseries(
            spec.users, scenario_env, spec.duration, spec.dt, geom, radio,
            seed=_scenario_seed(seed, index),
        )
        times[spec.name] = np.arange(spec.num_steps()) * spec.dt
        estimates[spec.name] = {}
        blocked[spec.name] = {}
        for u, samples in enumerate(series):
            ds = to_dataset(samples)
            if norm_stats is not None:
                ds = apply_normaliser(ds, norm_stats)
            estimates[spec.name][u] = predict_positions(model, ds.features)
            blocked[spec.name][u] = np.array(
                [not los_visible(spec.users[u], geom.origin, scenario_env, t) for t in times[spec.name]]
            )

    report = deviation_report(estimates["none"], estimates, times)
    for entry in report.entries:
        entry.blocked = blocked[entry.scenario][entry.user_id]

    provenance = {
        "environment": environment_to_dict(env),
        "array": geometry_to_dict(geom),
        "radio": radio_to_dict(radio),
        "scenarios": [s.to_dict() for s in scenarios],
        "seed": seed,
        "norm_scale": None if norm_stats is None else norm_stats.scale,
    }
    result = ExperimentResult(kind="nomadic", tables={"deviation": report}, provenance=provenance)
    return NomadicOutcome(report, result)
