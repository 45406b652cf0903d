"""Reading and writing the JSON configuration documents used by the CLI.

Geometry is specified in metres, areas and labels in millimetres. Complex
values are written as [real, imag] pairs (a bare number is accepted and read
as purely real).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import SplitSpec
from .errors import ConfigError
from .network import ModelConfig
from .simulate import ArrayGeometry, Blocker, Environment, MovingAgent, RadioConfig, Scatterer
from .training import TrainConfig


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def complex_from(value) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"expected a number or [real, imag] pair, got {value!r}")


def complex_to(z: complex):
    return [z.real, z.imag]


def _build(factory, section: str, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from exc


def radio_from_dict(d: dict) -> RadioConfig:
    return _build(RadioConfig, "radio", **d)


def radio_to_dict(cfg: RadioConfig) -> dict:
    return {
        "carrier_freq": cfg.carrier_freq,
        "bandwidth": cfg.bandwidth,
        "num_subcarriers": cfg.num_subcarriers,
        "report_wavelength": cfg.report_wavelength,
    }


def geometry_from_dict(d: dict) -> ArrayGeometry:
    d = dict(d)
    if "boresight" in d:
        b = np.asarray(d["boresight"], dtype=np.float64)
        norm = np.linalg.norm(b)
        if norm == 0:
            raise ConfigError("boresight must be a non-zero vector")
        d["boresight"] = b / norm
    return _build(ArrayGeometry, "array", **d)


def geometry_to_dict(geom: ArrayGeometry) -> dict:
    return {
        "num_rows": geom.num_rows,
        "num_cols": geom.num_cols,
        "element_spacing": geom.element_spacing,
        "origin": [float(v) for v in geom.origin],
        "boresight": [float(v) for v in geom.boresight],
    }


def environment_from_dict(d: dict) -> Environment:
    scatterers = [
        _build(Scatterer, "scatterers", position=s["position"], gain=complex_from(s.get("gain", 0.5)))
        for s in d.get("scatterers", [])
    ]
    blockers = [_build(Blocker, "blockers", rectangle=b["rectangle"]) for b in d.get("blockers", [])]
    agents = [
        _build(
            MovingAgent,
            "agents",
            waypoints=a["waypoints"],
            speed=a.get("speed", 1.0),
            body_radius=a.get("body_radius", 0.3),
            scatter_gain=complex_from(a.get("scatter_gain", 0.5)),
        )
        for a in d.get("agents", [])
    ]
    return _build(
        Environment,
        "environment",
        scatterers=scatterers,
        blockers=blockers,
        agents=agents,
        noise_std=d.get("noise_std", 0.0),
        los_gain=complex_from(d.get("los_gain", 1.0)),
    )


def environment_to_dict(env: Environment) -> dict:
    return {
        "scatterers": [
            {"position": [float(v) for v in s.position], "gain": complex_to(s.gain)}
            for s in env.scatterers
        ],
        "blockers": [
            {"rectangle": [[float(v) for v in corner] for corner in b.rectangle]}
            for b in env.blockers
        ],
        "agents": [
            {
                "waypoints": [[float(v) for v in w] for w in a.waypoints],
                "speed": a.speed,
                "body_radius": a.body_radius,
                "scatter_gain": complex_to(a.scatter_gain),
            }
            for a in env.agents
        ],
        "noise_std": env.noise_std,
        "los_gain": complex_to(env.los_gain),
    }


def model_config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    if "kernel_size" in d:
        d["kernel_size"] = tuple(d["kernel_size"])
    if "fc_widths" in d:
        d["fc_widths"] = tuple(d["fc_widths"])
    if "input_shape" in d:
        d["input_shape"] = tuple(d["input_shape"])
    return _build(ModelConfig, "model", **d)


def train_config_from_dict(d: dict) -> TrainConfig:
    return _build(TrainConfig, "train", **d)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return {
        "loss": cfg.loss,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "max_epochs": cfg.max_epochs,
        "patience": cfg.patience,
        "seed": cfg.seed,
        "target_val_error_mm": cfg.target_val_error_mm,
        "num_threads": cfg.num_threads,
    }


def split_from_dict(d: dict) -> SplitSpec:
    return _build(SplitSpec, "split", **d)


def require(doc: dict, key: str, section: str = "config"):
    if key not in doc:
        raise ConfigError(f"{section} is missing required key {key!r}")
    return doc[key]
