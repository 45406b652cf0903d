"""Geometric multipath channel simulator.

Produces position-labelled CSI for a rectangular antenna array: a free-space
direct path plus single-bounce scatterer paths, with 1/d amplitude decay per
segment. Rectangular blockers and moving cylindrical agents occlude paths,
which is what turns a static room into a nomadic one.

All geometry is in metres; position labels are (x, y) in millimetres in the
user plane. Every stochastic quantity is drawn from an explicit numpy
Generator, and batch generators derive one independent substream per sample
index, so datasets are reproducible and trivially parallelisable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError
from .validation import as_point3, as_rect

SPEED_OF_LIGHT = 299792458.0

# Paths shorter than this are treated as coincident geometry: the 1/d decay
# would blow up and nothing physical is that close to an antenna.
MIN_PATH_LENGTH = 1e-6

_COPLANAR_TOL = 1e-9
_UNIT_TOL = 1e-9


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...) — stable across runs."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


@dataclass
class ArrayGeometry:
    """Uniform rectangular antenna array, centred on `origin`.

    Element rows run along the local vertical, columns along the horizontal
    axis perpendicular to `boresight`. Antenna index is row-major.
    """

    num_rows: int = 8
    num_cols: int = 8
    element_spacing: float = 0.05743
    origin: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    boresight: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        self.origin = as_point3(self.origin, "origin")
        self.boresight = as_point3(self.boresight, "boresight")
        if self.num_rows < 1 or self.num_cols < 1:
            raise GeometryError("array needs at least one row and one column")
        if self.element_spacing <= 0:
            raise GeometryError("element_spacing must be > 0")
        if abs(np.linalg.norm(self.boresight) - 1.0) > _UNIT_TOL:
            raise GeometryError("boresight must be a unit vector")

    @property
    def num_antennas(self) -> int:
        return self.num_rows * self.num_cols

    def antenna_positions(self) -> np.ndarray:
        """(M, 3) element positions, row-major over (row, col)."""
        b = self.boresight
        up = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(up, b)) > 1.0 - 1e-9:
            up = np.array([1.0, 0.0, 0.0])
        u = np.cross(up, b)
        u /= np.linalg.norm(u)
        w = np.cross(b, u)
        rows = (np.arange(self.num_rows) - (self.num_rows - 1) / 2.0) * self.element_spacing
        cols = (np.arange(self.num_cols) - (self.num_cols - 1) / 2.0) * self.element_spacing
        grid = rows[:, None, None] * w + cols[None, :, None] * u
        return (self.origin + grid).reshape(-1, 3)


@dataclass
class RadioConfig:
    """Carrier, bandwidth, and subcarrier grid of the reporting system."""

    carrier_freq: float = 2.61e9
    bandwidth: float = 40e6
    num_subcarriers: int = 100
    report_wavelength: float = 114.56  # mm, used only for wavelength-normalised reporting

    def __post_init__(self):
        if not (self.carrier_freq > self.bandwidth / 2 > 0):
            raise GeometryError("need carrier_freq > bandwidth/2 > 0")
        if self.num_subcarriers < 1:
            raise GeometryError("num_subcarriers must be >= 1")
        if self.report_wavelength <= 0:
            raise GeometryError("report_wavelength must be > 0")


@dataclass
class Scatterer:
    """Point scatterer with a complex reflection coefficient, |gain| <= 1."""

    position: np.ndarray
    gain: complex = 0.5 + 0.0j

    def __post_init__(self):
        self.position = as_point3(self.position, "scatterer position")
        self.gain = complex(self.gain)
        if abs(self.gain) > 1.0:
            raise GeometryError("scatterer |gain| must be <= 1")


@dataclass
class Blocker:
    """Opaque rectangle given by 4 coplanar corners in perimeter order."""

    rectangle: np.ndarray

    def __post_init__(self):
        rect = np.asarray(self.rectangle, dtype=np.float64)
        if rect.shape != (4, 3):
            raise GeometryError(f"blocker needs 4 corner points, got shape {rect.shape}")
        n = np.cross(rect[1] - rect[0], rect[2] - rect[0])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GeometryError("blocker corners are collinear")
        n = n / norm
        if abs(np.dot(rect[3] - rect[0], n)) > _COPLANAR_TOL:
            raise GeometryError("blocker corners are not coplanar")
        self.rectangle = rect
        self._normal = n


@dataclass
class MovingAgent:
    """Walker shuttling along a waypoint polyline at constant speed.

    Modelled as a vertical cylinder (radius `body_radius`) that occludes
    paths, carrying one scatterer so it also perturbs the multipath even
    when it blocks nothing.
    """

    waypoints: np.ndarray
    speed: float = 1.0
    body_radius: float = 0.3
    scatter_gain: complex = 0.5 + 0.0j

    def __post_init__(self):
        pts = np.asarray(self.waypoints, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 3:
            raise GeometryError("agent needs at least 2 waypoints of 3 coordinates")
        if self.speed <= 0:
            raise GeometryError("agent speed must be > 0")
        if self.body_radius <= 0:
            raise GeometryError("agent body_radius must be > 0")
        self.scatter_gain = complex(self.scatter_gain)
        if abs(self.scatter_gain) > 1.0:
            raise GeometryError("agent |scatter_gain| must be <= 1")
        self.waypoints = pts
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self._seg_lengths = seg
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    def position_at(self, t: float) -> np.ndarray:
        """Agent centre at time t: back-and-forth (triangular) motion."""
        total = self._cum[-1]
        if total == 0.0:
            return self.waypoints[0].copy()
        phase = (self.speed * t) % (2.0 * total)
        s = phase if phase <= total else 2.0 * total - phase
        idx = int(np.searchsorted(self._cum, s, side="right") - 1)
        idx = min(max(idx, 0), len(self._seg_lengths) - 1)
        seg_len = self._seg_lengths[idx]
        frac = 0.0 if seg_len == 0.0 else (s - self._cum[idx]) / seg_len
        return self.waypoints[idx] + frac * (self.waypoints[idx + 1] - self.waypoints[idx])


@dataclass
class Environment:
    """Everything in the room besides the array: scatterers, blockers, walkers."""

    scatterers: list[Scatterer] = field(default_factory=list)
    blockers: list[Blocker] = field(default_factory=list)
    agents: list[MovingAgent] = field(default_factory=list)
    noise_std: float = 0.0
    los_gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.noise_std < 0:
            raise GeometryError("noise_std must be >= 0")
        self.los_gain = complex(self.los_gain)


@dataclass
class ChannelSample:
    """One CSI measurement: complex M x K channel plus its position label."""

    H: np.ndarray
    position: np.ndarray  # (x, y) in mm
    timestamp: float = 0.0
    user_id: int = 0

    def __post_init__(self):
        H = np.asarray(self.H)
        if H.ndim != 2:
            raise GeometryError(f"H must be a matrix, got shape {H.shape}")
        if not np.all(np.isfinite(H.real)) or not np.all(np.isfinite(H.imag)):
            raise GeometryError("H contains non-finite entries")
        self.H = H.astype(np.complex128, copy=False)
        self.position = np.asarray(self.position, dtype=np.float64).reshape(2)


def subcarrier_frequencies(config: RadioConfig) -> np.ndarray:
    """K subcarrier frequencies spanning [f_c - B/2, f_c + B/2] uniformly."""
    k = config.num_subcarriers
    if k == 1:
        return np.array([config.carrier_freq])
    step = config.bandwidth / (k - 1)
    return config.carrier_freq - config.bandwidth / 2.0 + step * np.arange(k)


def path_delay(a, b) -> float:
    """Propagation delay |a - b| / c in seconds."""
    a = as_point3(a, "a")
    b = as_point3(b, "b")
    return float(np.linalg.norm(a - b)) / SPEED_OF_LIGHT


def _segments_hit_rectangle(starts: np.ndarray, ends: np.ndarray, blocker: Blocker) -> np.ndarray:
    """True per segment if the open segment crosses the blocker rectangle."""
    d = ends - starts
    n = blocker._normal
    corners = blocker.rectangle
    denom = d @ n
    num = (corners[0] - starts) @ n
    crossing = denom != 0.0
    s = np.divide(num, denom, out=np.zeros_like(num), where=crossing)
    crossing &= (s > 0.0) & (s < 1.0)
    if not np.any(crossing):
        return crossing
    x = starts + s[:, None] * d
    # Point-in-quadrilateral: consistent sign of (edge x to-point) . normal.
    signs = np.empty((starts.shape[0], 4))
    for j in range(4):
        e = corners[(j + 1) % 4] - corners[j]
        signs[:, j] = np.cross(e, x - corners[j]) @ n
    inside = np.all(signs >= 0.0, axis=1) | np.all(signs <= 0.0, axis=1)
    return crossing & inside


def _segments_hit_cylinder(starts: np.ndarray, ends: np.ndarray, centre_xy: np.ndarray, radius: float) -> np.ndarray:
    """True per segment if its xy-projection passes within radius of centre."""
    a = starts[:, :2]
    u = ends[:, :2] - a
    uu = np.einsum("ij,ij->i", u, u)
    t = np.divide(np.einsum("ij,ij->i", centre_xy - a, u), uu, out=np.zeros_like(uu), where=uu > 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * u
    return np.linalg.norm(centre_xy - closest, axis=1) < radius


def _segments_blocked(starts, ends, env: Environment, t: float, exclude_agent=None) -> np.ndarray:
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    ends = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    starts, ends = np.broadcast_arrays(starts, ends)
    blocked = np.zeros(starts.shape[0], dtype=bool)
    for blocker in env.blockers:
        blocked |= _segments_hit_rectangle(starts, ends, blocker)
    for agent in env.agents:
        if agent is exclude_agent:
            continue
        centre = agent.position_at(t)[:2]
        blocked |= _segments_hit_cylinder(starts, ends, centre, agent.body_radius)
    return blocked


def los_visible(user, antenna, env: Environment, t: float = 0.0) -> bool:
    """True iff nothing occludes the open segment user -> antenna at time t."""
    user = as_point3(user, "user")
    antenna = as_point3(antenna, "antenna")
    return not bool(_segments_blocked(user, antenna, env, t)[0])


def _scatter_points(env: Environment, t: float):
    """Static and agent-attached scatter points active at time t."""
    points = [(s.position, s.gain, None) for s in env.scatterers]
    points += [(a.position_at(t), a.scatter_gain, a) for a in env.agents]
    return points


def generate_sample(
    user,
    env: Environment,
    geom: ArrayGeometry,
    config: RadioConfig,
    t: float = 0.0,
    rng: np.random.Generator | None = None,
    user_id: int = 0,
) -> ChannelSample:
    """Channel matrix for one user position at time t.

    H[m, k] sums the direct path (if visible) and each single-bounce
    scatterer path whose two sub-segments are clear, then adds
    circularly-symmetric complex Gaussian noise of std `env.noise_std`.
    """
    user = as_point3(user, "user")
    ants = geom.antenna_positions()
    freqs = subcarrier_frequencies(config)
    m, k = ants.shape[0], freqs.shape[0]
    wavenum = -2j * math.pi / SPEED_OF_LIGHT

    d0 = np.linalg.norm(ants - user, axis=1)
    if np.any(d0 < MIN_PATH_LENGTH):
        raise GeometryError("user is coincident with an antenna")
    visible = ~_segments_blocked(user, ants, env, t)
    los_amp = np.where(visible, env.los_gain / d0, 0.0)
    H = los_amp[:, None] * np.exp(wavenum * np.outer(d0, freqs))

    for point, gain, owner in _scatter_points(env, t):
        d1 = np.linalg.norm(user - point)
        d2 = np.linalg.norm(ants - point, axis=1)
        if d1 < MIN_PATH_LENGTH or np.any(d2 < MIN_PATH_LENGTH):
            raise GeometryError("scatterer is coincident with the user or an antenna")
        if _segments_blocked(user, point, env, t, exclude_agent=owner)[0]:
            continue
        clear = ~_segments_blocked(point, ants, env, t, exclude_agent=owner)
        amp = np.where(clear, gain / (d1 * d2), 0.0)
        H = H + amp[:, None] * np.exp(wavenum * np.outer(d1 + d2, freqs))

    if env.noise_std > 0.0:
        if rng is None:
            raise ValueError("noise_std > 0 requires an explicit rng")
        scale = env.noise_std / math.sqrt(2.0)
        H = H + scale * (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k)))

    return ChannelSample(H=H, position=user[:2] * 1000.0, timestamp=t, user_id=user_id)


def grid_points(area_mm, spacing_mm: float):
    """Row-major grid point coordinates (mm) covering the area."""
    x0, y0, w, h = as_rect(area_mm)
    if spacing_mm <= 0:
        raise GeometryError("grid spacing must be > 0")
    nx = int(math.floor(w / spacing_mm + 1.0))
    ny = int(math.floor(h / spacing_mm + 1.0))
    if nx < 1 or ny < 1:
        raise GeometryError("area is empty for the requested spacing")
    xs = x0 + spacing_mm * np.arange(nx)
    ys = y0 + spacing_mm * np.arange(ny)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)  # (nx, ny, 2)
    return pts.transpose(1, 0, 2).reshape(-1, 2)  # rows of constant y, x fastest


def generate_grid_dataset(
    area_mm,
    spacing_mm: float,
    user_height: float,
    env: Environment,
    geom: ArrayGeometry,
    config: RadioConfig,
    seed: int = 0,
    workers: int = 1,
) -> list[ChannelSample]:
    """One sample per grid point, deterministic per (inputs, seed).

    Each grid index gets its own derived random substream, so the result is
    independent of `workers`.
    """
    pts = grid_points(area_mm, spacing_mm)

    def one(i):
        user = np.array([pts[i, 0] / 1000.0, pts[i, 1] / 1000.0, user_height])
        return generate_sample(user, env, geom, config, t=0.0, rng=substream(seed, i), user_id=0)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(pts))))
    return [one(i) for i in range(len(pts))]


def generate_timeseries(
    users,
    env: Environment,
    duration: float,
    dt: float,
    geom: ArrayGeometry,
    config: RadioConfig,
    seed: int = 0,
) -> list[list[ChannelSample]]:
    """Per-user time series: floor(duration/dt) samples at t = 0, dt, 2dt, ...

    Moving agents advance along their waypoint loops; user u gets user_id u.
    """
    if duration <= 0 or dt <= 0:
        raise GeometryError("duration and dt must be > 0")
    users = [as_point3(u, "user") for u in users]
    steps = int(math.floor(duration / dt))
    series = []
    for u, user in enumerate(users):
        samples = []
        for i in range(steps):
            t = i * dt
            rng = substream(seed, u, i)
            samples.append(generate_sample(user, env, geom, config, t=t, rng=rng, user_id=u))
        series.append(samples)
    return series


def noise_std_for_snr(
    snr_db: float,
    probe_users,
    env: Environment,
    geom: ArrayGeometry,
    config: RadioConfig,
) -> float:
    """Noise std giving the requested per-entry SNR against the noise-free channel.

    SNR is mean |H|^2 over the probe positions divided by noise variance.
    """
    quiet = replace(env, noise_std=0.0)
    power = 0.0
    count = 0
    for user in probe_users:
        H = generate_sample(user, quiet, geom, config).H
        power += float(np.mean(np.abs(H) ** 2))
        count += 1
    rms = math.sqrt(power / max(count, 1))
    return rms * 10.0 ** (-snr_db / 20.0)
