"""Canonical dataset representation, persistence, splits, and normalisation.

A dataset is columnar: features (n, M, K, 2) float32 with the channel's real
part in slice 0 and imaginary part in slice 1, labels (n, 2) float64 in mm,
plus per-record user ids and timestamps. On disk it is a directory holding a
JSON manifest and raw little-endian arrays in record order, so loads are
bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ManifestError,
    ShapeMismatchError,
    TruncationError,
    UnknownAdapterError,
    VersionError,
)
from .validation import as_rect

FORMAT_NAME = "csipos-dataset"
FORMAT_VERSION = 1

_COLUMNS = {
    # name -> (file name, on-disk dtype)
    "features": ("features.bin", "<f4"),
    "labels": ("labels.bin", "<f8"),
    "user_ids": ("user_ids.bin", "<i8"),
    "timestamps": ("timestamps.bin", "<f8"),
}


def to_feature_tensor(H: np.ndarray) -> np.ndarray:
    """Split a complex M x K channel into a real (M, K, 2) tensor."""
    H = np.asarray(H)
    if H.ndim != 2:
        raise ShapeMismatchError(f"H must be a matrix, got shape {H.shape}")
    out = np.stack([H.real, H.imag], axis=-1)
    if not np.all(np.isfinite(out)):
        raise ValueError("H contains non-finite entries")
    return out


def from_feature_tensor(values: np.ndarray) -> np.ndarray:
    """Reassemble the complex channel from its (M, K, 2) tensor."""
    values = np.asarray(values)
    if values.ndim != 3 or values.shape[-1] != 2:
        raise ShapeMismatchError(f"expected shape (M, K, 2), got {values.shape}")
    return values[..., 0] + 1j * values[..., 1]


@dataclass
class LabeledRecord:
    """One feature tensor with its position label."""

    features: np.ndarray
    label: np.ndarray
    user_id: int = 0
    timestamp: float = 0.0


@dataclass
class CsiDataset:
    """Immutable-by-convention columnar dataset of labelled CSI tensors."""

    features: np.ndarray
    labels: np.ndarray
    user_ids: np.ndarray = None
    timestamps: np.ndarray = None

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float32)
        if f.ndim != 4 or f.shape[-1] != 2:
            raise ShapeMismatchError(f"features must be (n, M, K, 2), got {f.shape}")
        n = f.shape[0]
        y = np.ascontiguousarray(self.labels, dtype=np.float64)
        if y.shape != (n, 2):
            raise ShapeMismatchError(f"labels must be ({n}, 2), got {y.shape}")
        if self.user_ids is None:
            self.user_ids = np.zeros(n, dtype=np.int64)
        if self.timestamps is None:
            self.timestamps = np.zeros(n, dtype=np.float64)
        u = np.ascontiguousarray(self.user_ids, dtype=np.int64)
        t = np.ascontiguousarray(self.timestamps, dtype=np.float64)
        if u.shape != (n,) or t.shape != (n,):
            raise ShapeMismatchError("user_ids and timestamps must have one entry per record")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(y)) or not np.all(np.isfinite(t)):
            raise ValueError("dataset contains non-finite entries")
        self.features, self.labels, self.user_ids, self.timestamps = f, y, u, t

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.features.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.features.shape[2]

    def record(self, i: int) -> LabeledRecord:
        return LabeledRecord(
            features=self.features[i],
            label=self.labels[i],
            user_id=int(self.user_ids[i]),
            timestamp=float(self.timestamps[i]),
        )

    def subset(self, indices) -> "CsiDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return CsiDataset(
            features=self.features[idx],
            labels=self.labels[idx],
            user_ids=self.user_ids[idx],
            timestamps=self.timestamps[idx],
        )

    def fingerprint(self) -> str:
        """Content hash over shapes and raw bytes, for provenance records."""
        h = hashlib.sha256()
        h.update(repr(self.features.shape).encode())
        for arr in (self.features, self.labels, self.user_ids, self.timestamps):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def to_dataset(samples) -> CsiDataset:
    """Assemble channel samples (H, position, user_id, timestamp) into a dataset."""
    if not samples:
        raise ValueError("no samples to assemble")
    flat = []
    for s in samples:
        if isinstance(s, (list, tuple)):
            flat.extend(s)
        else:
            flat.append(s)
    features = np.stack([to_feature_tensor(s.H) for s in flat]).astype(np.float32)
    labels = np.stack([np.asarray(s.position, dtype=np.float64) for s in flat])
    user_ids = np.array([s.user_id for s in flat], dtype=np.int64)
    timestamps = np.array([s.timestamp for s in flat], dtype=np.float64)
    return CsiDataset(features, labels, user_ids, timestamps)


@dataclass
class SplitSpec:
    """Fractional train/val/test split with a shuffle seed."""

    train_frac: float = 0.85
    val_frac: float = 0.05
    test_frac: float = 0.10
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fracs):
            raise ValueError("split fractions must be >= 0")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


def split_indices(n: int, spec: SplitSpec = SplitSpec()):
    """Disjoint (train, val, test) index arrays covering range(n).

    Sizes are floor(train_frac*n) and floor(val_frac*n), with the remainder
    going to test; a seeded uniform shuffle precedes partitioning.
    """
    if n < 3:
        raise ValueError(f"need at least 3 records to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(math.floor(spec.train_frac * n))
    n_val = int(math.floor(spec.val_frac * n))
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train : n_train + n_val])
    test = np.sort(perm[n_train + n_val :])
    return train, val, test


@dataclass
class NormStats:
    """Global amplitude divisor fitted on the training split."""

    scale: float

    def __post_init__(self):
        if not (self.scale > 0):
            raise ValueError("scale must be > 0")


def fit_normaliser(dataset: CsiDataset) -> NormStats:
    """Max absolute feature entry over the fitting set."""
    if len(dataset) == 0:
        raise ValueError("cannot fit a normaliser on an empty dataset")
    scale = float(np.max(np.abs(dataset.features)))
    if scale == 0.0:
        raise ValueError("cannot fit a normaliser on all-zero features")
    return NormStats(scale=scale)


def apply_normaliser(dataset: CsiDataset, stats: NormStats) -> CsiDataset:
    """Divide every feature entry by the fitted scale; labels are untouched."""
    return CsiDataset(
        features=dataset.features / np.float32(stats.scale),
        labels=dataset.labels,
        user_ids=dataset.user_ids,
        timestamps=dataset.timestamps,
    )


def store_dataset(dataset: CsiDataset, path) -> None:
    """Write the dataset directory: manifest.json plus raw column files."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = len(dataset)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "count": n,
        "feature_shape": list(dataset.features.shape[1:]),
        "columns": {},
    }
    arrays = {
        "features": dataset.features,
        "labels": dataset.labels,
        "user_ids": dataset.user_ids,
        "timestamps": dataset.timestamps,
    }
    for name, (file_name, dtype) in _COLUMNS.items():
        arr = np.ascontiguousarray(arrays[name]).astype(dtype, copy=False)
        arr.tofile(path / file_name)
        manifest["columns"][name] = {
            "file": file_name,
            "dtype": dtype,
            "bytes": int(arr.nbytes),
        }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_dataset(path) -> CsiDataset:
    """Read a dataset directory back, bit-exactly."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise ManifestError(f"no manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"unreadable manifest under {path}: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT_NAME:
        raise ManifestError(f"{manifest_path} is not a {FORMAT_NAME} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise VersionError(
            f"dataset version {manifest.get('version')!r}, this reader handles {FORMAT_VERSION}"
        )
    try:
        count = int(manifest["count"])
        feature_shape = tuple(int(v) for v in manifest["feature_shape"])
        columns = manifest["columns"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"manifest under {path} lacks required keys: {exc}") from exc

    arrays = {}
    for name, (_, default_dtype) in _COLUMNS.items():
        try:
            entry = columns[name]
            file_name, dtype, nbytes = entry["file"], entry["dtype"], int(entry["bytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"manifest column {name!r} is malformed: {exc}") from exc
        file_path = path / file_name
        if not file_path.is_file():
            raise TruncationError(f"missing column file {file_path}")
        actual = file_path.stat().st_size
        if actual != nbytes:
            raise TruncationError(
                f"{file_path} holds {actual} bytes, manifest promises {nbytes}"
            )
        arrays[name] = np.fromfile(file_path, dtype=np.dtype(dtype))
    features = arrays["features"].reshape((count,) + feature_shape)
    labels = arrays["labels"].reshape(count, 2)
    return CsiDataset(features, labels, arrays["user_ids"], arrays["timestamps"])


def check_label_bounds(dataset: CsiDataset, area_mm) -> int:
    """Warn (not fail) when labels fall outside the configured area."""
    x0, y0, w, h = as_rect(area_mm)
    out = (
        (dataset.labels[:, 0] < x0)
        | (dataset.labels[:, 0] > x0 + w)
        | (dataset.labels[:, 1] < y0)
        | (dataset.labels[:, 1] > y0 + h)
    )
    count = int(np.count_nonzero(out))
    if count:
        warnings.warn(f"{count} of {len(dataset)} labels lie outside the configured area", stacklevel=2)
    return count


_ADAPTERS: dict = {}


def register_adapter(name: str, reader, overwrite: bool = False) -> None:
    """Register a dataset reader callable(path) -> CsiDataset."""
    if name in _ADAPTERS and not overwrite:
        raise ValueError(f"adapter {name!r} already registered")
    _ADAPTERS[name] = reader


def registered_adapters():
    return sorted(_ADAPTERS)


def ingest_external(path, adapter_name: str, expected_shape=None) -> CsiDataset:
    """Read an externally produced dataset through a named adapter.

    `expected_shape` is (M, K); a mismatch raises instead of silently
    training on the wrong tensor layout.
    """
    try:
        reader = _ADAPTERS[adapter_name]
    except KeyError:
        raise UnknownAdapterError(
            f"no adapter {adapter_name!r}; registered: {registered_adapters()}"
        ) from None
    dataset = reader(path)
    if expected_shape is not None:
        got = (dataset.num_antennas, dataset.num_subcarriers)
        if tuple(expected_shape) != got:
            raise ShapeMismatchError(
                f"adapter {adapter_name!r} produced {got}, expected {tuple(expected_shape)}"
            )
    return dataset


register_adapter("synthetic-native", load_dataset)
