"""Scene configuration: one strict JSON manifest drives every CLI command.

Unknown keys are rejected anywhere in the document so that experiment
manifests stay reproducible; CLI flags may override scalar entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array_core import make_angle_grid
from .beam_models import metric_weights
from .calibrators import CiOptions
from .isac_channel import SceneGeometry, SignalConfig
from .truth_forge import ArrayConfig, ImpairmentConfig

__all__ = ["SceneConfig", "default_scene_dict", "load_scene_config", "scene_from_dict"]

CONFIG_ENV_VAR = "RISBEAMCAL_CONFIG"


def default_scene_dict() -> dict:
    """Built-in defaults: 16-element array, 30 GHz / 200 MHz OFDM link,
    11-beam sweep repeated 32 times, and the stock impairment mix."""
    return {
        "seed": 20240,
        "signal": {
            "carrier_hz": 30e9,
            "bandwidth_hz": 200e6,
            "subcarrier_count": 128,
            "repeats": 32,
            "noise_figure_db": 10.0,
        },
        "array": {
            "elements": 16,
            "scan_angles_deg": [-50.0, -40.0, -30.0, -20.0, -10.0, 0.0,
                                10.0, 20.0, 30.0, 40.0, 50.0],
            "phase_bits": 2,
            "pattern_grid": {"start_deg": -90.0, "stop_deg": 90.0, "step_deg": 1.0},
        },
        "geometry": {
            "bs_xy_m": [0.0, 0.0],
            "ris_xy_m": [0.0, 6.0],
            "ris_boresight": [0.0, -1.0],
        },
        "ue_region": {
            "x_min_m": -5.0,
            "x_max_m": 5.0,
            "y_min_m": -4.0,
            "y_max_m": 6.0,
            "step_m": 0.5,
        },
        "impairments": {
            "coupling_c1": [0.07071067811865475, 0.07071067811865475],
            "coupling_c2": [0.02, 0.0],
            "amp_jitter_std": 0.05,
            "phase_jitter_std_deg": 10.0,
            "element_pattern_q": 1.2,
            "ripple_std_db": 0.5,
            "ripple_corr_deg": 10.0,
            "noise_rel_std": 0.01,
            "gain_norm_window_deg": [-40.0, 40.0],
        },
        "metric": {
            "angle_min_deg": -40.0,
            "angle_max_deg": 40.0,
            "boresight_power": 0.0,
        },
        "ci": {
            "max_iterations": 100,
            "tolerance": 1e-8,
            "initial_gamma": "spectral",
        },
    }


def _reject_unknown(section: dict, allowed: set[str], path: str) -> None:
    extra = set(section) - allowed
    if extra:
        raise ValueError(f"unknown config key(s) at {path}: {sorted(extra)}")


def _merged(defaults: dict, data: dict, path: str) -> dict:
    _reject_unknown(data, set(defaults), path)
    out = {}
    for key, default in defaults.items():
        if isinstance(default, dict):
            out[key] = _merged(default, data.get(key, {}), f"{path}.{key}")
        else:
            out[key] = data.get(key, default)
    return out


@dataclass(eq=False)
class SceneConfig:
    """Validated scene manifest with builders for every module's inputs."""

    raw: dict

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def array_config(self) -> ArrayConfig:
        arr = self.raw["array"]
        grid_spec = arr["pattern_grid"]
        grid = make_angle_grid(grid_spec["start_deg"], grid_spec["stop_deg"],
                               grid_spec["step_deg"])
        bits = arr["phase_bits"]
        return ArrayConfig(
            element_count=int(arr["elements"]),
            grid=grid,
            scan_angles_deg=np.asarray(arr["scan_angles_deg"], dtype=float),
            phase_bits=None if bits is None else int(bits),
            carrier_hz=float(self.raw["signal"]["carrier_hz"]),
        )

    def impairment_config(self, seed: int | None = None) -> ImpairmentConfig:
        imp = self.raw["impairments"]

        def as_complex(entry):
            return None if entry is None else complex(entry[0], entry[1])

        c1 = as_complex(imp["coupling_c1"])
        c2 = as_complex(imp["coupling_c2"])
        if c1 is None and c2 is None:
            coupling = None
        else:
            coupling = (c1 or 0j, c2 or 0j)
        window = imp["gain_norm_window_deg"]
        return ImpairmentConfig(
            coupling=coupling,
            amp_jitter_std=float(imp["amp_jitter_std"]),
            phase_jitter_std_deg=float(imp["phase_jitter_std_deg"]),
            element_pattern_q=float(imp["element_pattern_q"]),
            ripple_std_db=float(imp["ripple_std_db"]),
            ripple_corr_deg=float(imp["ripple_corr_deg"]),
            noise_rel_std=float(imp["noise_rel_std"]),
            gain_norm_window_deg=None if window is None else (float(window[0]),
                                                              float(window[1])),
            seed=self.seed if seed is None else int(seed),
        )

    def geometry(self) -> SceneGeometry:
        geo = self.raw["geometry"]
        return SceneGeometry(
            bs_xy_m=np.asarray(geo["bs_xy_m"], dtype=float),
            ris_xy_m=np.asarray(geo["ris_xy_m"], dtype=float),
            ris_boresight=np.asarray(geo["ris_boresight"], dtype=float),
        )

    def signal_config(self) -> SignalConfig:
        sig = self.raw["signal"]
        return SignalConfig(
            carrier_hz=float(sig["carrier_hz"]),
            bandwidth_hz=float(sig["bandwidth_hz"]),
            subcarrier_count=int(sig["subcarrier_count"]),
            scan_count=len(self.raw["array"]["scan_angles_deg"]),
            repeats=int(sig["repeats"]),
            noise_figure_db=float(sig["noise_figure_db"]),
        )

    def metric_weights(self, grid) -> np.ndarray:
        met = self.raw["metric"]
        return metric_weights(
            grid,
            angle_min_deg=float(met["angle_min_deg"]),
            angle_max_deg=float(met["angle_max_deg"]),
            boresight_power=float(met["boresight_power"]),
        )

    def ci_options(self) -> CiOptions:
        ci = self.raw["ci"]
        return CiOptions(
            max_iterations=int(ci["max_iterations"]),
            tolerance=float(ci["tolerance"]),
            initial_gamma=ci["initial_gamma"],
        )

    def ue_region(self) -> tuple[float, float, float, float]:
        reg = self.raw["ue_region"]
        return (float(reg["x_min_m"]), float(reg["x_max_m"]),
                float(reg["y_min_m"]), float(reg["y_max_m"]))

    def ue_step(self) -> float:
        return float(self.raw["ue_region"]["step_m"])


def scene_from_dict(data: dict) -> SceneConfig:
    merged = _merged(default_scene_dict(), data, "scene")
    return SceneConfig(merged)


def load_scene_config(path=None) -> SceneConfig:
    """Load and validate a scene manifest; None means built-in defaults."""
    if path is None:
        return SceneConfig(default_scene_dict())
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scene config must be a JSON object")
    return scene_from_dict(data)
