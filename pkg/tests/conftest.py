import numpy as np
import pytest

from risbeamcal.array_core import make_angle_grid
from risbeamcal.scene import load_scene_config
from risbeamcal.truth_forge import ArrayConfig, ImpairmentConfig, synth_ground_truth

DEFAULT_COUPLING = (0.1 * np.exp(1j * np.pi / 4), 0.02 + 0j)


@pytest.fixture(scope="session")
def scene():
    return load_scene_config(None)


@pytest.fixture(scope="session")
def array_cfg(scene):
    return scene.array_config()


def make_array_cfg(grid=(-90.0, 90.0, 1.0), elements=16, phase_bits=2):
    return ArrayConfig(
        element_count=elements,
        grid=make_angle_grid(*grid),
        scan_angles_deg=np.arange(-50.0, 51.0, 10.0),
        phase_bits=phase_bits,
        carrier_hz=30e9,
    )


def forge(array_cfg=None, **impairments):
    cfg = array_cfg if array_cfg is not None else make_array_cfg()
    return synth_ground_truth(cfg, ImpairmentConfig(**impairments))


def coupling_only_impairments(seed=5):
    return dict(coupling=DEFAULT_COUPLING, seed=seed)


def ci_family_impairments(seed=11):
    """Taper, element jitter, and chamber ripple; no coupling, no noise."""
    return dict(
        amp_jitter_std=0.05,
        phase_jitter_std_deg=10.0,
        element_pattern_q=1.2,
        ripple_std_db=0.5,
        ripple_corr_deg=10.0,
        seed=seed,
    )


def full_impairments(seed=7):
    """Everything on, including measurement noise at -40 dB of the peak."""
    out = ci_family_impairments(seed=seed)
    out.update(coupling=DEFAULT_COUPLING, noise_rel_std=0.01)
    return out
