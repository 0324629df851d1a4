"""Run configuration: profiles, parsing, validation, serialization.

Configs are JSON with nested sections mirroring the domain objects; every
numeric key carries its unit in the name.  Unknown keys are rejected with
the full path to the offender.  Two named profiles ship with the package:

* ``paper`` - the published experiment: 0.5 mm PMMA sphere, 10.58 Hz
  mode, gamma/2pi = 71 uHz, 298 K.
* ``desk``  - same sphere and mode but gamma/2pi = 0.1 Hz, so the
  oscillator thermalizes in seconds instead of days and the whole
  analysis chain can be exercised in a test run.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .dynamics import (
    JitterModel,
    LinearChannel,
    NonlinearChannel,
    SimulationPlan,
)
from .model_core import NoiseBudget, OscillatorParams, SphereParams
from .optics import OpticalTrain


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


_PAPER = {
    "profile": "paper",
    "sphere": {
        "radius_m": 0.25e-3,
        "refractive_index": 1.4,
        "density_kg_m3": 1190.0,
    },
    "oscillator": {
        "f0_hz": 10.58,
        "gamma_hz": 7.1e-5,
        "temp_env_k": 298.0,
        "mode_angle_rad": 0.0,
    },
    "optics": {
        "wavelength_m": 1.55e-6,
        "fiber_mode_field_radius_m": 5.2e-6,
        "d_in_m": 1.0e-3,
        "d_out_m": 1.0e-3,
        "x_fib_m": 1.0e-5,
        "p_in_w": 1.0e-6,
        "detector_qe": 1.0,
    },
    "noise": {
        "s_xx_imp_m2_hz": (4.70e-9) ** 2,
        "s_ff_ba_n2_hz": 0.0,
        "eta": 1.0,
    },
    "simulation": {
        "sample_rate_hz": 240.0,
        "duration_s": 500.0,
        "seed": 1234,
        "channel": {"type": "linear", "xi_v_m": 1.14e10, "gain_v_w": 1.0e6},
        "jitter": None,
    },
    "analysis": {
        "segment_length": 16384,
        "window": "hann",
        "overlap": 0.5,
        "band_hz": None,
        "t_grid_s": [1.0e2, 1.0e3, 1.0e4],
    },
    "sweep": {
        "x_fib_halfspan_m": 4.0e-5,
        "n_x_fib": 81,
        "dx_values_m": [0.0],
        "p_min_w": 1.0e-12,
        "p_max_w": 1.0e-1,
    },
}

_DESK = copy.deepcopy(_PAPER)
_DESK["profile"] = "desk"
_DESK["oscillator"]["gamma_hz"] = 0.1
_DESK["noise"]["s_xx_imp_m2_hz"] = 1.0e-18
_DESK["simulation"]["sample_rate_hz"] = 200.0
_DESK["simulation"]["duration_s"] = 600.0
_DESK["simulation"]["channel"] = {"type": "linear", "xi_v_m": 1.0e10, "gain_v_w": 1.0e6}

PROFILES = {"paper": _PAPER, "desk": _DESK}


def _check_keys(data: dict, template: dict, path: str = "") -> None:
    for key, val in data.items():
        here = f"{path}.{key}" if path else key
        if key not in template:
            raise ConfigError(f"unknown key {here!r}")
        tval = template[key]
        if isinstance(tval, dict) and isinstance(val, dict):
            _check_keys(val, tval, here)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require_positive(data: dict, section: str, keys: list[str]) -> None:
    for key in keys:
        val = data[section][key]
        if not isinstance(val, (int, float)) or val <= 0:
            raise ConfigError(f"{section}.{key} must be a positive number, got {val!r}")


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully populated run configuration."""

    data: dict

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    # - domain object accessors -------------------------------------------
    def sphere(self) -> SphereParams:
        s = self.data["sphere"]
        return SphereParams(
            radius_m=s["radius_m"],
            refractive_index=s["refractive_index"],
            density_kg_m3=s["density_kg_m3"],
        )

    def oscillator(self) -> OscillatorParams:
        o = self.data["oscillator"]
        return OscillatorParams(
            sphere=self.sphere(),
            omega0=2 * math.pi * o["f0_hz"],
            gamma=2 * math.pi * o["gamma_hz"],
            temp_env=o["temp_env_k"],
            mode_angle=o["mode_angle_rad"],
        )

    def train(self) -> OpticalTrain:
        t = self.data["optics"]
        return OpticalTrain(
            sphere=self.sphere(),
            wavelength_m=t["wavelength_m"],
            fiber_mode_field_radius_m=t["fiber_mode_field_radius_m"],
            d_in_m=t["d_in_m"],
            d_out_m=t["d_out_m"],
            x_fib_m=t["x_fib_m"],
            p_in_w=t["p_in_w"],
            detector_qe=t["detector_qe"],
        )

    def budget(self) -> NoiseBudget:
        n = self.data["noise"]
        return NoiseBudget(
            s_xx_imp=n["s_xx_imp_m2_hz"],
            s_ff_ba=n["s_ff_ba_n2_hz"],
            eta=n["eta"],
        )

    def plan(self) -> SimulationPlan:
        sim = self.data["simulation"]
        ch = sim.get("channel") or {}
        channel = None
        if ch.get("type") == "linear":
            channel = LinearChannel(xi_v_per_m=ch["xi_v_m"])
        elif ch.get("type") == "nonlinear":
            channel = NonlinearChannel(train=self.train(), gain_v_per_w=ch["gain_v_w"])
        jitter = None
        jd = sim.get("jitter")
        if jd:
            jitter = JitterModel(
                rms_domega0=jd["rms_domega0_rad_s"],
                correlation_time_s=jd["correlation_time_s"],
            )
        return SimulationPlan(
            osc=self.oscillator(),
            budget=self.budget(),
            sample_rate_hz=sim["sample_rate_hz"],
            duration_s=sim["duration_s"],
            seed=sim["seed"],
            channel=channel,
            jitter=jitter,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        data = copy.deepcopy(self.data)
        data["simulation"]["seed"] = int(seed)
        return RunConfig(data)


def _validate(data: dict) -> None:
    _require_positive(data, "sphere", ["radius_m", "density_kg_m3"])
    if data["sphere"]["refractive_index"] <= 1:
        raise ConfigError("sphere.refractive_index must exceed 1")
    _require_positive(data, "oscillator", ["f0_hz", "gamma_hz", "temp_env_k"])
    _require_positive(
        data, "optics", ["wavelength_m", "fiber_mode_field_radius_m", "d_in_m", "d_out_m", "p_in_w"]
    )
    if not 0 < data["optics"]["detector_qe"] <= 1:
        raise ConfigError("optics.detector_qe must lie in (0, 1]")
    for key in ("s_xx_imp_m2_hz", "s_ff_ba_n2_hz"):
        if data["noise"][key] < 0:
            raise ConfigError(f"noise.{key} must be nonnegative")
    if not 0 < data["noise"]["eta"] <= 1:
        raise ConfigError("noise.eta must lie in (0, 1]")
    _require_positive(data, "simulation", ["sample_rate_hz", "duration_s"])
    if data["optics"]["d_in_m"] < data["sphere"]["radius_m"]:
        raise ConfigError("optics.d_in_m must be at least sphere.radius_m")
    if data["optics"]["d_out_m"] < data["sphere"]["radius_m"]:
        raise ConfigError("optics.d_out_m must be at least sphere.radius_m")
    jd = data["simulation"].get("jitter")
    if jd is not None:
        for key in ("rms_domega0_rad_s", "correlation_time_s"):
            if key not in jd:
                raise ConfigError(f"simulation.jitter.{key} is required")
        if jd["rms_domega0_rad_s"] < 0:
            raise ConfigError("simulation.jitter.rms_domega0_rad_s must be nonnegative")
        if jd["correlation_time_s"] <= 0:
            raise ConfigError("simulation.jitter.correlation_time_s must be positive")
    window = data["analysis"]["window"]
    if window not in ("hann", "rectangular"):
        raise ConfigError(f"analysis.window must be 'hann' or 'rectangular', got {window!r}")


def from_dict(overrides: dict, profile: str | None = None) -> RunConfig:
    """Build a config from overrides on top of a named profile."""
    name = overrides.get("profile", profile or "desk")
    if name not in PROFILES:
        raise ConfigError(f"profile must be one of {sorted(PROFILES)}, got {name!r}")
    base = PROFILES[name]
    template = copy.deepcopy(base)
    template["simulation"]["jitter"] = {
        "rms_domega0_rad_s": 0.0,
        "correlation_time_s": 1000.0,
    }  # so jitter subkeys are known
    _check_keys(overrides, template)
    data = _merge(base, overrides)
    data["profile"] = name
    _validate(data)
    return RunConfig(data)


def load_profile(name: str) -> RunConfig:
    return from_dict({}, profile=name)


def parse_config(path, profile: str | None = None) -> RunConfig:
    """Parse a JSON config file, filling gaps from its (or the given) profile."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        overrides = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(overrides, profile=profile)


def serialize(config: RunConfig) -> str:
    """Canonical JSON text; parse(serialize(c)) == c."""
    return json.dumps(config.data, indent=2, sort_keys=True) + "\n"
