"""Forward beam-pattern models and the weighted pattern-similarity loss.

Four models of increasing fidelity are supported:

* ideal      — pattern of the nominal codebook,
* mcm        — per-codeword banded Toeplitz mutual-coupling matrices,
* nc         — realized (perturbed) codebook with unit-norm columns,
* ci         — realized codebook plus a per-angle complex gain correction.

Patterns are stored complex; all model algebra is complex-linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_core import AngleGrid, Codebook, SteeringMatrix

__all__ = [
    "BeamPatternSet",
    "CouplingSet",
    "PerturbedCodebook",
    "CorrectionCurve",
    "toeplitz_mcm",
    "eval_ideal",
    "eval_mcm",
    "eval_nc",
    "eval_ci",
    "loss_l1",
    "metric_weights",
]

COUPLING_ORDER = 2  # neighbor couplings up to two element spacings


@dataclass(eq=False)
class BeamPatternSet:
    """Complex pattern samples, one row per grid angle, one column per codeword."""

    values: np.ndarray
    grid: AngleGrid
    element_count: int
    scan_angles_deg: np.ndarray
    carrier_hz: float | None = None
    phase_bits: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        scans = np.atleast_1d(np.asarray(self.scan_angles_deg, dtype=float))
        if v.ndim != 2 or v.shape[0] != self.grid.count:
            raise ValueError("pattern rows must match the angle grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("pattern values must be finite")
        self.values = v
        self.scan_angles_deg = scans

    @property
    def codeword_count(self) -> int:
        return int(self.values.shape[1])


@dataclass(eq=False)
class CouplingSet:
    """Per-codeword neighbor-coupling coefficient pairs (c1, c2)."""

    pairs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=complex)
        if p.ndim != 2 or p.shape[1] != COUPLING_ORDER:
            raise ValueError("coupling pairs must have shape (codewords, 2)")
        if np.any(np.abs(p) >= 1.0):
            raise ValueError("coupling magnitudes must be below 1")
        self.pairs = p

    @property
    def codeword_count(self) -> int:
        return int(self.pairs.shape[0])


@dataclass(eq=False)
class PerturbedCodebook:
    """Realized element coefficients; columns unit-norm like the nominal codebook."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=complex)
        if cols.ndim != 2:
            raise ValueError("perturbed codebook must be a 2-D matrix")
        norms = np.linalg.norm(cols, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("perturbed codeword columns must be unit norm")
        self.columns = cols

    @property
    def element_count(self) -> int:
        return int(self.columns.shape[0])

    @property
    def codeword_count(self) -> int:
        return int(self.columns.shape[1])


@dataclass(eq=False)
class CorrectionCurve:
    """Per-grid-angle complex gain (diagonal correction of the pattern rows)."""

    gains: np.ndarray
    degenerate_angles: tuple[int, ...] = field(default=())

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        if g.ndim != 1:
            raise ValueError("correction gains must be a vector over grid angles")
        if not np.all(np.isfinite(g)) or np.any(g == 0):
            raise ValueError("correction gains must be finite and non-zero")
        self.gains = g

    @property
    def count(self) -> int:
        return int(self.gains.size)


def toeplitz_mcm(coupling_pair, element_count: int) -> np.ndarray:
    """Symmetric banded Toeplitz coupling matrix: unit diagonal, bands c1, c2."""
    if element_count < 3:
        raise ValueError("coupling matrix needs at least 3 elements")
    c1, c2 = complex(coupling_pair[0]), complex(coupling_pair[1])
    n = element_count
    out = np.eye(n, dtype=complex)
    out += c1 * (np.eye(n, k=1) + np.eye(n, k=-1))
    out += c2 * (np.eye(n, k=2) + np.eye(n, k=-2))
    return out


def _banded_shift(w: np.ndarray, offset: int) -> np.ndarray:
    """Symmetric shift S_i w with zero boundary: (S_i w)[n] = w[n-i] + w[n+i]."""
    out = np.zeros_like(w)
    out[offset:] += w[:-offset]
    out[:-offset] += w[offset:]
    return out


def apply_coupling(columns: np.ndarray, coupling: CouplingSet) -> np.ndarray:
    """Columnwise C_g w_g using the banded structure (no full matrices)."""
    if coupling.codeword_count != columns.shape[1]:
        raise ValueError("coupling set and codebook disagree on codeword count")
    out = columns.astype(complex).copy()
    for g in range(columns.shape[1]):
        c1, c2 = coupling.pairs[g]
        w = columns[:, g]
        out[:, g] = w + c1 * _banded_shift(w, 1) + c2 * _banded_shift(w, 2)
    return out


def _pattern_from(columns: np.ndarray, steering: SteeringMatrix, scan_angles_deg,
                  phase_bits, carrier_hz) -> BeamPatternSet:
    if columns.shape[0] != steering.element_count:
        raise ValueError("codebook and steering matrix disagree on element count")
    values = steering.entries.T @ columns
    return BeamPatternSet(
        values=values,
        grid=steering.grid,
        element_count=steering.element_count,
        scan_angles_deg=scan_angles_deg,
        carrier_hz=carrier_hz,
        phase_bits=phase_bits,
    )


def eval_ideal(codebook: Codebook, steering: SteeringMatrix,
               carrier_hz: float | None = None) -> BeamPatternSet:
    """Pattern of the nominal codebook: row t is a(phi_t)^T W."""
    return _pattern_from(codebook.columns, steering, codebook.scan_angles_deg,
                         codebook.phase_bits, carrier_hz)


def eval_mcm(codebook: Codebook, steering: SteeringMatrix, coupling: CouplingSet,
             carrier_hz: float | None = None) -> BeamPatternSet:
    """Pattern with per-codeword mutual coupling: column g is A^T (C_g w_g)."""
    coupled = apply_coupling(codebook.columns, coupling)
    return _pattern_from(coupled, steering, codebook.scan_angles_deg,
                         codebook.phase_bits, carrier_hz)


def eval_nc(perturbed: PerturbedCodebook, steering: SteeringMatrix,
            scan_angles_deg=None, carrier_hz: float | None = None) -> BeamPatternSet:
    """Pattern of the realized codebook: row t is a(phi_t)^T W~."""
    scans = (np.arange(perturbed.codeword_count, dtype=float)
             if scan_angles_deg is None else scan_angles_deg)
    return _pattern_from(perturbed.columns, steering, scans, None, carrier_hz)


def eval_ci(perturbed: PerturbedCodebook, steering: SteeringMatrix,
            correction: CorrectionCurve, scan_angles_deg=None,
            carrier_hz: float | None = None) -> BeamPatternSet:
    """Realized-codebook pattern with row t scaled by the correction gain."""
    if correction.count != steering.grid.count:
        raise ValueError("correction curve length must match the angle grid")
    base = eval_nc(perturbed, steering, scan_angles_deg, carrier_hz)
    base.values = correction.gains[:, None] * base.values
    return base


def loss_l1(truth: BeamPatternSet, model: BeamPatternSet,
            weights=None) -> float:
    """Weighted mean squared pattern difference over the grid angles.

    L1 = sum_s sigma_s * ||truth_row_s - model_row_s||^2 / sum_s sigma_s.
    With weights omitted all angles count equally.
    """
    if truth.values.shape != model.values.shape:
        raise ValueError("pattern sets must share shape to compare")
    if not np.allclose(truth.grid.angles_deg, model.grid.angles_deg, atol=1e-9):
        raise ValueError("pattern sets must share the same angle grid")
    if weights is None:
        sigma = np.ones(truth.grid.count)
    else:
        sigma = np.atleast_1d(np.asarray(weights, dtype=float))
    if sigma.shape != (truth.grid.count,):
        raise ValueError("weights length must match the angle grid")
    if np.any(sigma < 0):
        raise ValueError("weights must be non-negative")
    total = sigma.sum()
    if total <= 0:
        raise ValueError("weights must not be all zero")
    row_sq = np.linalg.norm(truth.values - model.values, axis=1) ** 2
    return float((sigma * row_sq).sum() / total)


def metric_weights(grid: AngleGrid, angle_min_deg: float = -40.0,
                   angle_max_deg: float = 40.0,
                   boresight_power: float = 0.0) -> np.ndarray:
    """Evaluation weights: 1 inside the angular window, 0 outside.

    boresight_power > 0 raises the boresight emphasis inside the window by
    tapering with cos(phi)**power.
    """
    a = grid.angles_deg
    sigma = ((a >= angle_min_deg - 1e-9) & (a <= angle_max_deg + 1e-9)).astype(float)
    if boresight_power > 0:
        sigma = sigma * np.cos(np.deg2rad(a)) ** boresight_power
    return sigma
