"""2-D SISO geometry and OFDM signal model for the reflect-array-aided link.

Maps a user position to channel parameters (gains, delays, array-side
azimuth), schedules beam responses over the codeword sequence, and builds
noise-free or noisy received-signal vectors.  Everything is pure and
seed-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_core import AngleGrid, Codebook, steering_vector
from .beam_models import (
    BeamPatternSet,
    CorrectionCurve,
    CouplingSet,
    PerturbedCodebook,
    apply_coupling,
)

__all__ = [
    "SPEED_OF_LIGHT",
    "BOLTZMANN_J_PER_K",
    "REFERENCE_TEMP_K",
    "SceneGeometry",
    "SignalConfig",
    "ChannelParams",
    "UeState",
    "geo_params",
    "path_gains",
    "channel_params",
    "delay_response",
    "noise_power",
    "beam_schedule",
    "noise_free_signal",
    "simulate_received",
    "IdealBeamSource",
    "McmBeamSource",
    "NcBeamSource",
    "CiBeamSource",
    "PatternBeamSource",
    "beam_source_from_report",
]

SPEED_OF_LIGHT = 299792458.0
BOLTZMANN_J_PER_K = 1.380649e-23
REFERENCE_TEMP_K = 290.0


@dataclass(frozen=True, eq=False)
class SceneGeometry:
    """Positions (meters) of the base station and the reflecting array."""

    bs_xy_m: np.ndarray
    ris_xy_m: np.ndarray
    ris_boresight: np.ndarray

    def __post_init__(self):
        bs = np.asarray(self.bs_xy_m, dtype=float).reshape(2)
        ris = np.asarray(self.ris_xy_m, dtype=float).reshape(2)
        bore = np.asarray(self.ris_boresight, dtype=float).reshape(2)
        norm = np.linalg.norm(bore)
        if norm == 0:
            raise ValueError("array boresight must be a non-zero vector")
        bore = bore / norm
        if np.allclose(bs, ris):
            raise ValueError("base station and array must not coincide")
        object.__setattr__(self, "bs_xy_m", bs)
        object.__setattr__(self, "ris_xy_m", ris)
        object.__setattr__(self, "ris_boresight", bore)

    @property
    def bs_ris_distance_m(self) -> float:
        return float(np.linalg.norm(self.ris_xy_m - self.bs_xy_m))


@dataclass(eq=False)
class SignalConfig:
    """OFDM and schedule parameters; noise variance derives from the noise figure."""

    carrier_hz: float = 30e9
    bandwidth_hz: float = 200e6
    subcarrier_count: int = 128
    scan_count: int = 11
    repeats: int = 32
    noise_figure_db: float = 10.0
    pilots: np.ndarray | None = None
    noise_variance_w: float | None = None

    def __post_init__(self):
        if self.subcarrier_count < 1:
            raise ValueError("subcarrier_count must be >= 1")
        if self.scan_count < 1 or self.repeats < 1:
            raise ValueError("scan_count and repeats must be >= 1")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.pilots is not None:
            p = np.asarray(self.pilots, dtype=complex)
            if p.shape != (self.codeword_count, self.subcarrier_count):
                raise ValueError("pilots must have shape (codewords, subcarriers)")
            self.pilots = p

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.subcarrier_count

    @property
    def codeword_count(self) -> int:
        return self.scan_count * self.repeats

    @property
    def noise_variance(self) -> float:
        if self.noise_variance_w is not None:
            return self.noise_variance_w
        return noise_power(self.noise_figure_db, self.bandwidth_hz)


@dataclass(frozen=True)
class ChannelParams:
    """Channel parameter vector: gains, delays, and array-side azimuth."""

    alpha_l: complex
    tau_l: float
    alpha_r: complex
    tau_r: float
    phi_a_deg: float

    def __post_init__(self):
        if self.tau_l < 0 or self.tau_r < 0:
            raise ValueError("delays must be non-negative")
        if not -90.0 - 1e-9 <= self.phi_a_deg <= 90.0 + 1e-9:
            raise ValueError("array-side azimuth must lie in [-90, 90] degrees")


@dataclass(frozen=True)
class UeState:
    """User position in the scene plane, meters."""

    x_m: float
    y_m: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m], dtype=float)


def _signed_azimuth_deg(geometry: SceneGeometry, offset: np.ndarray) -> float:
    """Angle of `offset` from the array boresight, positive toward +x of the
    boresight's left-handed normal (rotate boresight +90 deg CCW)."""
    u = geometry.ris_boresight
    v = np.array([-u[1], u[0]])
    return float(np.rad2deg(np.arctan2(offset @ v, offset @ u)))


def geo_params(ue: UeState, geometry: SceneGeometry) -> tuple[float, float, float]:
    """Map a user position to (tau_l, tau_r, phi_a_deg)."""
    s = ue.as_array()
    d_los = np.linalg.norm(s - geometry.bs_xy_m)
    d_ris = np.linalg.norm(s - geometry.ris_xy_m)
    if d_los == 0:
        raise ValueError("user coincides with the base station")
    if d_ris == 0:
        raise ValueError("user coincides with the array")
    tau_l = d_los / SPEED_OF_LIGHT
    tau_r = (geometry.bs_ris_distance_m + d_ris) / SPEED_OF_LIGHT
    phi = _signed_azimuth_deg(geometry, s - geometry.ris_xy_m)
    return float(tau_l), float(tau_r), phi


def path_gains(ue: UeState, geometry: SceneGeometry,
               signal_cfg: SignalConfig) -> tuple[complex, complex]:
    """Free-space gain magnitudes with deterministic carrier phases."""
    s = ue.as_array()
    d_los = float(np.linalg.norm(s - geometry.bs_xy_m))
    d_ris = float(np.linalg.norm(s - geometry.ris_xy_m))
    d_feed = geometry.bs_ris_distance_m
    if d_los == 0 or d_ris == 0:
        raise ValueError("zero path distance")
    lam = SPEED_OF_LIGHT / signal_cfg.carrier_hz
    tau_l, tau_r, _ = geo_params(ue, geometry)
    mag_l = lam / (4.0 * np.pi * d_los)
    mag_r = lam ** 2 / ((4.0 * np.pi) ** 2 * d_feed * d_ris)
    alpha_l = mag_l * np.exp(-2j * np.pi * signal_cfg.carrier_hz * tau_l)
    alpha_r = mag_r * np.exp(-2j * np.pi * signal_cfg.carrier_hz * tau_r)
    return complex(alpha_l), complex(alpha_r)


def channel_params(ue: UeState, geometry: SceneGeometry,
                   signal_cfg: SignalConfig) -> ChannelParams:
    tau_l, tau_r, phi = geo_params(ue, geometry)
    alpha_l, alpha_r = path_gains(ue, geometry, signal_cfg)
    return ChannelParams(alpha_l, tau_l, alpha_r, tau_r, phi)


def delay_response(tau_s: float, subcarrier_count: int,
                   spacing_hz: float) -> np.ndarray:
    """Per-subcarrier phase ramp exp(j*2*pi*k*spacing*tau), k = 0..K-1."""
    if subcarrier_count < 1:
        raise ValueError("subcarrier_count must be >= 1")
    k = np.arange(subcarrier_count)
    return np.exp(2j * np.pi * k * spacing_hz * tau_s)


def noise_power(noise_figure_db: float, bandwidth_hz: float) -> float:
    """Thermal noise power in watts over the bandwidth at the given noise figure."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return BOLTZMANN_J_PER_K * REFERENCE_TEMP_K * bandwidth_hz * 10.0 ** (
        noise_figure_db / 10.0
    )


# ---------------------------------------------------------------------------
# Beam sources: anything exposing scan_count and response_row(phi_deg), the
# complex response of every scan codeword at one azimuth.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IdealBeamSource:
    """Closed-form response of the nominal codebook."""

    codebook: Codebook

    @property
    def scan_count(self) -> int:
        return self.codebook.codeword_count

    def response_row(self, phi_deg: float) -> np.ndarray:
        a = steering_vector(phi_deg, self.codebook.element_count)
        return self.codebook.columns.T @ a


@dataclass(frozen=True, eq=False)
class McmBeamSource:
    """Closed-form response of the coupling-corrected codebook."""

    codebook: Codebook
    coupling: CouplingSet
    _effective: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_effective", apply_coupling(self.codebook.columns, self.coupling)
        )

    @property
    def scan_count(self) -> int:
        return self.codebook.codeword_count

    def response_row(self, phi_deg: float) -> np.ndarray:
        a = steering_vector(phi_deg, self.codebook.element_count)
        return self._effective.T @ a


@dataclass(frozen=True, eq=False)
class NcBeamSource:
    """Closed-form response of a calibrated realized codebook."""

    perturbed: PerturbedCodebook

    @property
    def scan_count(self) -> int:
        return self.perturbed.codeword_count

    def response_row(self, phi_deg: float) -> np.ndarray:
        a = steering_vector(phi_deg, self.perturbed.element_count)
        return self.perturbed.columns.T @ a


def _interp_pos(grid: AngleGrid, phi_deg: float) -> tuple[int, float]:
    """Bracketing index and fraction for linear interpolation on the grid."""
    angles = grid.angles_deg
    if phi_deg < angles[0] - 1e-9 or phi_deg > angles[-1] + 1e-9:
        raise ValueError(
            f"azimuth {phi_deg} deg outside the pattern grid "
            f"[{angles[0]}, {angles[-1]}]"
        )
    phi = min(max(phi_deg, angles[0]), angles[-1])
    idx = int(np.searchsorted(angles, phi, side="right") - 1)
    idx = min(max(idx, 0), angles.size - 2) if angles.size > 1 else 0
    if angles.size == 1:
        return 0, 0.0
    frac = (phi - angles[idx]) / (angles[idx + 1] - angles[idx])
    return idx, float(frac)


@dataclass(frozen=True, eq=False)
class CiBeamSource:
    """Calibrated realized codebook with the per-angle gain correction.

    The codebook response is evaluated in closed form at any azimuth; the
    gain curve is known only on the calibration grid and is interpolated
    linearly (real and imaginary parts separately) in between.
    """

    perturbed: PerturbedCodebook
    correction: CorrectionCurve
    grid: AngleGrid

    def __post_init__(self):
        if self.correction.count != self.grid.count:
            raise ValueError("correction curve length must match its grid")

    @property
    def scan_count(self) -> int:
        return self.perturbed.codeword_count

    def response_row(self, phi_deg: float) -> np.ndarray:
        a = steering_vector(phi_deg, self.perturbed.element_count)
        if self.grid.count == 1:
            gain = self.correction.gains[0]
        else:
            idx, frac = _interp_pos(self.grid, phi_deg)
            gain = (1.0 - frac) * self.correction.gains[idx] \
                + frac * self.correction.gains[idx + 1]
        return gain * (self.perturbed.columns.T @ a)


@dataclass(frozen=True, eq=False)
class PatternBeamSource:
    """Measured (or forged) pattern set, interpolated linearly in angle."""

    patterns: BeamPatternSet

    @property
    def scan_count(self) -> int:
        return self.patterns.codeword_count

    def response_row(self, phi_deg: float) -> np.ndarray:
        if self.patterns.grid.count == 1:
            return self.patterns.values[0].copy()
        idx, frac = _interp_pos(self.patterns.grid, phi_deg)
        return (1.0 - frac) * self.patterns.values[idx] \
            + frac * self.patterns.values[idx + 1]


def beam_source_from_report(report, codebook: Codebook, grid: AngleGrid):
    """Build the beam source matching a calibration report's model tag."""
    if report.model == "ideal":
        return IdealBeamSource(codebook)
    if report.model in ("mcm", "mcm-twostep"):
        return McmBeamSource(codebook, report.coupling)
    if report.model == "nc":
        return NcBeamSource(report.codebook)
    if report.model == "ci":
        return CiBeamSource(report.codebook, report.correction, grid)
    raise ValueError(f"unknown model tag: {report.model!r}")


def beam_schedule(source, phi_a_deg: float, scan_count: int,
                  repeats: int) -> np.ndarray:
    """Per-codeword beam response at one azimuth, tiled over schedule repeats."""
    if source.scan_count != scan_count:
        raise ValueError("beam source scan count does not match the schedule")
    row = np.asarray(source.response_row(phi_a_deg), dtype=complex)
    if row.shape != (scan_count,):
        raise ValueError("beam source returned a row of unexpected length")
    return np.tile(row, repeats)


def noise_free_signal(params: ChannelParams, beam: np.ndarray,
                      signal_cfg: SignalConfig) -> np.ndarray:
    """Noise-free received vector, vectorized subcarrier-fastest.

    The (codeword, subcarrier) matrix is
        alpha_l * d(tau_l)  +  alpha_r * beam_g * d(tau_r),
    elementwise-multiplied by the pilots, then flattened with the
    subcarrier index running fastest.
    """
    beam = np.asarray(beam, dtype=complex)
    g_count = signal_cfg.codeword_count
    if beam.shape != (g_count,):
        raise ValueError(f"beam vector must have length {g_count}")
    spacing = signal_cfg.subcarrier_spacing_hz
    k_count = signal_cfg.subcarrier_count
    d_los = delay_response(params.tau_l, k_count, spacing)
    d_ris = delay_response(params.tau_r, k_count, spacing)
    matrix = params.alpha_l * np.broadcast_to(d_los, (g_count, k_count)).copy()
    matrix += params.alpha_r * np.outer(beam, d_ris)
    if signal_cfg.pilots is not None:
        matrix = matrix * signal_cfg.pilots
    return matrix.ravel()


def simulate_received(params: ChannelParams, beam: np.ndarray,
                      signal_cfg: SignalConfig, seed: int) -> np.ndarray:
    """Noise-free signal plus circular complex Gaussian noise, seeded."""
    clean = noise_free_signal(params, beam, signal_cfg)
    rng = np.random.default_rng(seed)
    std = np.sqrt(signal_cfg.noise_variance / 2.0)
    noise = std * (rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size))
    return clean + noise
