"""Experiment configuration: dataclasses plus YAML loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .control import ControlParams
from .errors import ConfigError
from .metrics import SpectralParams
from .perception import CameraModel, NoiseConfig
from .plant import ContinuumParams


@dataclass(frozen=True)
class PerceptionConfig:
    camera: CameraModel = CameraModel()
    d_lumen: float = 25.0
    control_stride: int = 8     # ray subsampling for the control loop


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "geometric"     # "geometric" | "remote"
    host: str = "127.0.0.1"
    port: int = 7070

    def __post_init__(self):
        if self.kind not in ("geometric", "remote"):
            raise ConfigError(f"unknown backend {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "centering"       # centering | navigation | dataset
    path_id: str = "A"
    n_trials: int = 10
    rng_seed: int = 2024
    output_dir: str = "out"
    inner_radius: float = 7.5
    centering_timeout: float = 120.0    # s sim-time
    navigation_timeout: float = 600.0
    dataset_count: int = 100
    dataset_image_size: int = 64
    plant: ContinuumParams = ContinuumParams()
    control: ControlParams = ControlParams()
    perception: PerceptionConfig = PerceptionConfig()
    noise: NoiseConfig = NoiseConfig()
    spectral: SpectralParams = SpectralParams()
    backend: BackendConfig = BackendConfig()

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.experiment not in ("centering", "navigation", "dataset"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.path_id.upper() not in ("A", "B", "C", "D"):
            raise ConfigError(f"unknown path {self.path_id!r}")


def _build(cls, data: dict, what: str):
    known = {f.name for f in dataclasses.fields(cls)}
    bad = set(data) - known
    if bad:
        raise ConfigError(f"unknown key(s) in section {what!r}: {sorted(bad)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {what!r}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    sections = {}
    if "plant" in data:
        sections["plant"] = _build(ContinuumParams, data.pop("plant"), "plant")
    if "control" in data:
        sections["control"] = _build(ControlParams, data.pop("control"), "control")
    if "noise" in data:
        noise = data.pop("noise")
        if noise.get("occluder") is not None:
            occ = noise["occluder"]
            noise["occluder"] = ((float(occ["cx"]), float(occ["cy"])),
                                 float(occ["radius"]))
        sections["noise"] = _build(NoiseConfig, noise, "noise")
    if "spectral" in data:
        sections["spectral"] = _build(SpectralParams, data.pop("spectral"), "spectral")
    if "perception" in data:
        pdata = dict(data.pop("perception"))
        cam_keys = {"width", "height", "horizontal_fov"}
        cam_data = {k: pdata.pop(k) for k in list(pdata) if k in cam_keys}
        if cam_data:
            pdata["camera"] = _build(CameraModel, cam_data, "perception.camera")
        sections["perception"] = _build(PerceptionConfig, pdata, "perception")
    if "backend" in data:
        bdata = data.pop("backend")
        if isinstance(bdata, str):
            bdata = {"kind": bdata}
        sections["backend"] = _build(BackendConfig, bdata, "backend")
    return _build(ExperimentConfig, {**data, **sections}, "experiment")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)
