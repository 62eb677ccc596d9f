"""Angle grids, steering vectors, and scan codebooks for a uniform linear array.

Conventions used throughout the package:

* Azimuth angles are in degrees, measured from array boresight, so the
  visible region is [-90, 90].
* Element spacing is half a wavelength; element n (n = 0..N-1) of the
  steering vector at azimuth phi is exp(j*pi*n*sin(phi)).  The phase
  reference is the first element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AngleGrid",
    "SteeringMatrix",
    "Codebook",
    "make_angle_grid",
    "steering_vector",
    "steering_matrix",
    "ideal_codeword",
    "quantize_codeword",
    "build_codebook",
]

_ANGLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AngleGrid:
    """Strictly increasing azimuth sample angles, degrees, in [-90, 90]."""

    angles_deg: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.angles_deg, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise ValueError("angle grid needs at least one angle")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise ValueError("angle grid must be strictly increasing")
        if a[0] < -90.0 - _ANGLE_TOL or a[-1] > 90.0 + _ANGLE_TOL:
            raise ValueError("angle grid must lie within [-90, 90] degrees")
        object.__setattr__(self, "angles_deg", a)

    @property
    def count(self) -> int:
        return int(self.angles_deg.size)

    @property
    def step_deg(self) -> float:
        """Median angular step (grids from make_angle_grid are uniform)."""
        if self.count < 2:
            return 0.0
        return float(np.median(np.diff(self.angles_deg)))


@dataclass(frozen=True, eq=False)
class SteeringMatrix:
    """Element-by-angle steering matrix (N rows, one column per grid angle)."""

    entries: np.ndarray
    element_count: int
    grid: AngleGrid

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (self.element_count, self.grid.count):
            raise ValueError("steering matrix shape must be (elements, angles)")
        if np.any(np.abs(np.abs(e) - 1.0) > 1e-12):
            raise ValueError("steering entries must have unit magnitude")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Unit-norm beamforming codewords, one column per scan angle.

    phase_bits is the phase-shifter resolution; None means unquantized.
    """

    columns: np.ndarray
    scan_angles_deg: np.ndarray
    phase_bits: int | None

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=complex)
        scans = np.atleast_1d(np.asarray(self.scan_angles_deg, dtype=float))
        if cols.ndim != 2 or cols.shape[1] != scans.size:
            raise ValueError("codebook needs one column per scan angle")
        norms = np.linalg.norm(cols, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("codeword columns must be unit norm")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "scan_angles_deg", scans)

    @property
    def element_count(self) -> int:
        return int(self.columns.shape[0])

    @property
    def codeword_count(self) -> int:
        return int(self.columns.shape[1])


def make_angle_grid(start_deg: float, stop_deg: float, step_deg: float) -> AngleGrid:
    """Inclusive arithmetic angle sequence from start to stop.

    The sample count is floor((stop - start) / step) + 1, so the last
    sample may fall short of stop when the span is not a multiple of step.
    """
    if step_deg <= 0:
        raise ValueError("step_deg must be positive")
    if start_deg > stop_deg:
        raise ValueError("start_deg must not exceed stop_deg")
    if start_deg < -90.0 - _ANGLE_TOL or stop_deg > 90.0 + _ANGLE_TOL:
        raise ValueError("angle range must lie within [-90, 90] degrees")
    count = int(np.floor((stop_deg - start_deg) / step_deg + _ANGLE_TOL)) + 1
    angles = start_deg + step_deg * np.arange(count)
    return AngleGrid(np.minimum(angles, 90.0))


def steering_vector(phi_deg: float, element_count: int) -> np.ndarray:
    """Unit-modulus element phases for a plane wave at azimuth phi_deg."""
    if element_count < 1:
        raise ValueError("element_count must be >= 1")
    if not -90.0 - _ANGLE_TOL <= phi_deg <= 90.0 + _ANGLE_TOL:
        raise ValueError(f"azimuth {phi_deg} deg outside [-90, 90]")
    n = np.arange(element_count)
    return np.exp(1j * np.pi * n * np.sin(np.deg2rad(phi_deg)))


def steering_matrix(grid: AngleGrid, element_count: int) -> SteeringMatrix:
    """Stack steering vectors for every grid angle (N x T)."""
    n = np.arange(element_count)
    phases = np.outer(n, np.sin(np.deg2rad(grid.angles_deg)))
    return SteeringMatrix(np.exp(1j * np.pi * phases), element_count, grid)


def ideal_codeword(scan_deg: float, element_count: int) -> np.ndarray:
    """Unit-norm conjugate-steered codeword; coherent gain sqrt(N) at scan_deg."""
    a = steering_vector(scan_deg, element_count)
    return a.conj() / np.sqrt(element_count)


def quantize_codeword(codeword: np.ndarray, phase_bits: int) -> np.ndarray:
    """Snap each entry to the nearest of 2**bits uniform phases at 1/sqrt(N) amplitude.

    Ties between two candidate phases round toward the smaller one.
    """
    if not 1 <= int(phase_bits) <= 8:
        raise ValueError("phase_bits must be in 1..8")
    w = np.asarray(codeword, dtype=complex)
    if np.any(w == 0):
        raise ValueError("cannot quantize a zero entry (phase undefined)")
    levels = 2 ** int(phase_bits)
    delta = 2.0 * np.pi / levels
    k = np.mod(np.angle(w), 2.0 * np.pi) / delta
    idx = np.mod(np.ceil(k - 0.5), levels)  # half-way cases go to the lower phase
    return np.exp(1j * idx * delta) / np.sqrt(w.size)


def build_codebook(
    scan_angles_deg, element_count: int, phase_bits: int | None
) -> Codebook:
    """Conjugate-steered codebook over the scan angles, optionally quantized."""
    scans = np.atleast_1d(np.asarray(scan_angles_deg, dtype=float))
    cols = []
    for scan in scans:
        w = ideal_codeword(float(scan), element_count)
        if phase_bits is not None:
            w = quantize_codeword(w, phase_bits)
        cols.append(w)
    return Codebook(np.stack(cols, axis=1), scans, phase_bits)
