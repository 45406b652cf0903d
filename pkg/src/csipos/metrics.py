"""Evaluation quantities: mean error, wavelength-normalised error, error
direction, deviation-from-reference analysis, and random-guess baselines.

Deviation here is distance to the mean estimated position from the static
reference scenario, not distance to ground truth, so nomadic runs need no
truth labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import as_position_array, as_rect

DEFAULT_REPORT_WAVELENGTH_MM = 114.56


def _paired(estimates, truths):
    est = as_position_array(estimates, name="estimates")
    tru = as_position_array(truths, name="truths")
    if est.shape[0] != tru.shape[0]:
        raise ValueError(f"length mismatch: {est.shape[0]} estimates vs {tru.shape[0]} truths")
    if est.shape[0] == 0:
        raise ValueError("need at least one estimate/truth pair")
    return est, tru


def mean_error(estimates, truths) -> float:
    """Mean Euclidean distance between estimates and truths, in mm."""
    est, tru = _paired(estimates, truths)
    return float(np.mean(np.linalg.norm(est - tru, axis=1)))


def mean_error_vector(estimates, truths) -> np.ndarray:
    """Component-wise mean of (estimate - truth): the error direction in mm."""
    est, tru = _paired(estimates, truths)
    return np.mean(est - tru, axis=0)


def error_cdf(estimates, truths) -> np.ndarray:
    """Sorted per-pair Euclidean errors, for CDF plotting."""
    est, tru = _paired(estimates, truths)
    return np.sort(np.linalg.norm(est - tru, axis=1))


def to_lambda(mm: float, report_wavelength: float = DEFAULT_REPORT_WAVELENGTH_MM) -> float:
    """Error in carrier wavelengths, rounded to 3 decimals."""
    if report_wavelength <= 0:
        raise ValueError("report_wavelength must be > 0")
    return round(mm / report_wavelength, 3)


@dataclass
class ErrorSummary:
    """Mean error in mm and wavelengths, error direction, and the error CDF."""

    mean_mm: float
    mean_lambda: float
    mean_vector_mm: np.ndarray
    cdf: np.ndarray

    @classmethod
    def from_estimates(cls, estimates, truths, report_wavelength=DEFAULT_REPORT_WAVELENGTH_MM):
        mm = mean_error(estimates, truths)
        return cls(
            mean_mm=mm,
            mean_lambda=to_lambda(mm, report_wavelength),
            mean_vector_mm=mean_error_vector(estimates, truths),
            cdf=error_cdf(estimates, truths),
        )

    def to_dict(self) -> dict:
        return {
            "mean_mm": self.mean_mm,
            "mean_lambda": self.mean_lambda,
            "mean_vector_mm": [float(v) for v in self.mean_vector_mm],
            "cdf": [float(v) for v in self.cdf],
        }


def _centred_mean(points: np.ndarray) -> np.ndarray:
    # Anchoring on the first point keeps the mean of identical estimates exact,
    # so a time-invariant channel reports deviation 0 rather than rounding fuzz.
    return points[0] + np.mean(points - points[0], axis=0)


@dataclass
class DeviationEntry:
    """Deviation series of one user in one scenario, against the static reference."""

    user_id: int
    scenario: str
    reference_mm: np.ndarray
    times_s: np.ndarray
    deviations_mm: np.ndarray
    blocked: np.ndarray | None = None  # per-timestep direct-path occlusion, if known

    @property
    def mean_deviation_mm(self) -> float:
        return float(np.mean(self.deviations_mm))

    @property
    def ever_blocked(self) -> bool:
        return bool(self.blocked is not None and np.any(self.blocked))


@dataclass
class DeviationReport:
    """Per (user, scenario) deviation analysis."""

    entries: list = field(default_factory=list)

    def entry(self, user_id: int, scenario: str) -> DeviationEntry:
        for e in self.entries:
            if e.user_id == user_id and e.scenario == scenario:
                return e
        raise KeyError(f"no entry for user {user_id}, scenario {scenario!r}")

    def users(self) -> list:
        return sorted({e.user_id for e in self.entries})

    def scenarios(self) -> list:
        seen = []
        for e in self.entries:
            if e.scenario not in seen:
                seen.append(e.scenario)
        return seen

    def mean_table(self) -> dict:
        """{scenario: {user: mean deviation mm}} for table emission."""
        return {
            s: {u: self.entry(u, s).mean_deviation_mm for u in self.users() if self._has(u, s)}
            for s in self.scenarios()
        }

    def _has(self, user_id, scenario) -> bool:
        return any(e.user_id == user_id and e.scenario == scenario for e in self.entries)


def deviation_report(static_estimates: dict, scenario_estimates: dict, times: dict | None = None) -> DeviationReport:
    """Deviation of each scenario estimate from the per-user static reference.

    `static_estimates` maps user id -> (n, 2) estimates from the no-movement
    run; `scenario_estimates` maps scenario name -> {user id -> (n, 2)}.
    The per-user reference is the mean static estimate, and the static run is
    reported against its own mean like any other scenario.
    """
    references = {}
    for user_id, est in static_estimates.items():
        est = as_position_array(est, name=f"static estimates of user {user_id}")
        if est.shape[0] == 0:
            raise ValueError(f"user {user_id} has no static estimates")
        references[user_id] = _centred_mean(est)

    report = DeviationReport()
    for scenario, per_user in scenario_estimates.items():
        for user_id, est in per_user.items():
            if user_id not in references:
                raise ValueError(f"user {user_id} has no static estimates")
            est = as_position_array(est, name=f"estimates of user {user_id} in {scenario!r}")
            dev = np.linalg.norm(est - references[user_id], axis=1)
            t = None if times is None else np.asarray(times.get(scenario), dtype=np.float64)
            if t is None:
                t = np.arange(est.shape[0], dtype=np.float64)
            report.entries.append(
                DeviationEntry(
                    user_id=user_id,
                    scenario=scenario,
                    reference_mm=references[user_id],
                    times_s=t,
                    deviations_mm=dev,
                )
            )
    return report


def centroid_baseline(area_mm, n_mc: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo E|U - centre| for U uniform over the area, in mm."""
    x0, y0, w, h = as_rect(area_mm)
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.random((n_mc, 2)) * (w, h)
    centre = np.array([w / 2.0, h / 2.0])
    return float(np.mean(np.linalg.norm(pts - centre, axis=1)))


def random_pair_baseline(area_mm, n_mc: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo E|U - V| for independent uniform U, V over the area, in mm."""
    x0, y0, w, h = as_rect(area_mm)
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((n_mc, 2)) * (w, h)
    v = rng.random((n_mc, 2)) * (w, h)
    return float(np.mean(np.linalg.norm(u - v, axis=1)))
