"""Synthesize chamber-style ground-truth patterns with known injected impairments.

The forge stands in for measured prototype data: it draws seeded element
jitter, neighbor coupling, an element-pattern taper, and a smooth chamber
gain ripple, then records every injected quantity so calibration results
can be checked against a known answer.  The CSV/JSON pattern format written
here is also the ingestion format for real chamber measurements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array_core import AngleGrid, Codebook, build_codebook, steering_matrix
from .beam_models import (
    BeamPatternSet,
    CorrectionCurve,
    CouplingSet,
    PerturbedCodebook,
    apply_coupling,
)

__all__ = [
    "ArrayConfig",
    "ImpairmentConfig",
    "TruthRecord",
    "PatternFormatError",
    "synth_ground_truth",
    "save_patterns",
    "load_patterns",
]


class PatternFormatError(ValueError):
    """Raised when a pattern file does not match the documented format."""


@dataclass(frozen=True, eq=False)
class ArrayConfig:
    """Array geometry and codebook setup for forging or ingesting patterns."""

    element_count: int
    grid: AngleGrid
    scan_angles_deg: np.ndarray
    phase_bits: int | None = 2
    carrier_hz: float = 30e9

    def __post_init__(self):
        scans = np.atleast_1d(np.asarray(self.scan_angles_deg, dtype=float))
        if self.element_count < 1:
            raise ValueError("element_count must be >= 1")
        object.__setattr__(self, "scan_angles_deg", scans)

    def codebook(self) -> Codebook:
        return build_codebook(self.scan_angles_deg, self.element_count, self.phase_bits)

    def steering(self):
        return steering_matrix(self.grid, self.element_count)


@dataclass(frozen=True, eq=False)
class ImpairmentConfig:
    """Impairments injected by the forge; all default to the identity.

    coupling is either None, one shared (c1, c2) pair, or a per-codeword
    sequence of pairs.  Amplitude jitter is linear (0.05 = 5 %), phase
    jitter in degrees.  The element pattern is cos(phi)**q.  The chamber
    ripple is a smooth complex log-Gaussian gain with the given amplitude
    std (dB) and angular correlation length.  Measurement noise std is
    linear, relative to the peak pattern magnitude.

    gain_norm_window_deg rescales the combined per-angle gain to unit mean
    magnitude over that window, mimicking the scale calibration applied to
    chamber data before model fitting; None disables it.
    """

    coupling: object = None
    amp_jitter_std: float = 0.0
    phase_jitter_std_deg: float = 0.0
    element_pattern_q: float = 0.0
    ripple_std_db: float = 0.0
    ripple_corr_deg: float = 10.0
    noise_rel_std: float = 0.0
    gain_norm_window_deg: tuple[float, float] | None = (-40.0, 40.0)
    seed: int = 0

    def __post_init__(self):
        if min(self.amp_jitter_std, self.phase_jitter_std_deg,
               self.ripple_std_db, self.noise_rel_std) < 0:
            raise ValueError("impairment standard deviations must be >= 0")
        if self.element_pattern_q < 0:
            raise ValueError("element pattern exponent must be >= 0")
        if self.ripple_corr_deg <= 0:
            raise ValueError("ripple correlation length must be positive")

    def coupling_pairs(self, codeword_count: int) -> np.ndarray:
        if self.coupling is None:
            return np.zeros((codeword_count, 2), dtype=complex)
        arr = np.asarray(self.coupling, dtype=complex)
        if arr.shape == (2,):
            return np.tile(arr, (codeword_count, 1))
        if arr.shape == (codeword_count, 2):
            return arr.copy()
        raise ValueError("coupling must be one (c1, c2) pair or one pair per codeword")


@dataclass(eq=False)
class TruthRecord:
    """Exact injected quantities behind a forged pattern set.

    Reproducible from (ImpairmentConfig, seed); the realized codebook is
    stored after unit-norm column normalization, i.e. exactly the matrix
    entering the forged product.
    """

    coupling: CouplingSet
    codebook: PerturbedCodebook
    correction: CorrectionCurve
    noise_std_abs: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "noise_std_abs": self.noise_std_abs,
            "coupling_re_im": _c2pairs(self.coupling.pairs),
            "codebook_re_im": _c2pairs(self.codebook.columns),
            "correction_re_im": _c2pairs(self.correction.gains),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TruthRecord":
        return cls(
            coupling=CouplingSet(_pairs2c(data["coupling_re_im"])),
            codebook=PerturbedCodebook(_pairs2c(data["codebook_re_im"])),
            correction=CorrectionCurve(_pairs2c(data["correction_re_im"])),
            noise_std_abs=float(data["noise_std_abs"]),
            seed=int(data["seed"]),
        )


def _c2pairs(arr: np.ndarray):
    a = np.asarray(arr, dtype=complex)
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def _pairs2c(nested) -> np.ndarray:
    a = np.asarray(nested, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def smooth_unit_noise(rng: np.random.Generator, count: int, step_deg: float,
                      corr_deg: float) -> np.ndarray:
    """Unit-variance Gaussian sequence smoothed to the given correlation length.

    White noise convolved with a Gaussian kernel of width corr_deg; the
    kernel is scaled so the output variance is exactly one.
    """
    pad = max(1, int(np.ceil(4.0 * corr_deg / step_deg)))
    x = np.arange(-pad, pad + 1) * step_deg
    kernel = np.exp(-(x ** 2) / (2.0 * corr_deg ** 2))
    kernel /= np.sqrt(np.sum(kernel ** 2))
    raw = rng.standard_normal(count + 2 * pad)
    return np.convolve(raw, kernel, mode="valid")


def synth_ground_truth(array_cfg: ArrayConfig,
                       impairment_cfg: ImpairmentConfig) -> tuple[BeamPatternSet, TruthRecord]:
    """Forge a pattern set with known impairments; deterministic given the seed.

    The forged value at angle t, codeword g is

        gamma[t] * a(phi_t)^T C_g w~_g + noise[t, g]

    where w~ is the jittered codebook renormalized to unit column norm and
    gamma combines the element-pattern taper, the chamber ripple, and the
    scale calibration.  The draw order of the RNG streams (amplitude
    jitter, phase jitter, ripple, noise) is part of the contract.
    """
    rng = np.random.default_rng(impairment_cfg.seed)
    codebook = array_cfg.codebook()
    steering = array_cfg.steering()
    n, g_count = codebook.element_count, codebook.codeword_count
    angles = array_cfg.grid.angles_deg

    amp = 1.0 + impairment_cfg.amp_jitter_std * rng.standard_normal((n, g_count))
    phase = np.deg2rad(impairment_cfg.phase_jitter_std_deg) * rng.standard_normal((n, g_count))
    perturbed = codebook.columns * amp * np.exp(1j * phase)
    perturbed /= np.linalg.norm(perturbed, axis=0, keepdims=True)

    pairs = impairment_cfg.coupling_pairs(g_count)
    coupling = CouplingSet(pairs)
    effective = apply_coupling(perturbed, coupling)

    step = array_cfg.grid.step_deg or 1.0
    ripple_re = smooth_unit_noise(rng, angles.size, step, impairment_cfg.ripple_corr_deg)
    ripple_im = smooth_unit_noise(rng, angles.size, step, impairment_cfg.ripple_corr_deg)
    sigma_nepers = impairment_cfg.ripple_std_db * np.log(10.0) / 20.0
    gamma = np.cos(np.deg2rad(angles)) ** impairment_cfg.element_pattern_q \
        * np.exp(sigma_nepers * (ripple_re + 1j * ripple_im))

    window = impairment_cfg.gain_norm_window_deg
    if window is not None:
        inside = (angles >= window[0]) & (angles <= window[1])
        if not np.any(inside):
            raise ValueError("gain normalization window contains no grid angles")
        gamma = gamma / np.abs(gamma[inside]).mean()

    values = gamma[:, None] * (steering.entries.T @ effective)

    peak = np.abs(values).max()
    noise_std = impairment_cfg.noise_rel_std * peak
    noise = (noise_std / np.sqrt(2.0)) * (
        rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    )
    values = values + noise

    patterns = BeamPatternSet(
        values=values,
        grid=array_cfg.grid,
        element_count=n,
        scan_angles_deg=codebook.scan_angles_deg,
        carrier_hz=array_cfg.carrier_hz,
        phase_bits=array_cfg.phase_bits,
    )
    record = TruthRecord(
        coupling=coupling,
        codebook=PerturbedCodebook(perturbed),
        correction=CorrectionCurve(gamma),
        noise_std_abs=float(noise_std),
        seed=impairment_cfg.seed,
    )
    return patterns, record


# ---------------------------------------------------------------------------
# Pattern file I/O: UTF-8 CSV `angle_deg,codeword,re,im` sorted by
# (angle, codeword), plus a sidecar JSON with array metadata.
# ---------------------------------------------------------------------------

_HEADER = "angle_deg,codeword,re,im"


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_patterns(patterns: BeamPatternSet, path) -> None:
    """Write the pattern CSV and its metadata sidecar next to it."""
    path = Path(path)
    lines = [_HEADER]
    for t, angle in enumerate(patterns.grid.angles_deg):
        for g in range(patterns.codeword_count):
            v = patterns.values[t, g]
            lines.append(
                f"{float(angle)!r},{g},{float(v.real)!r},{float(v.imag)!r}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {
        "elements": patterns.element_count,
        "scan_angles_deg": [float(s) for s in patterns.scan_angles_deg],
        "carrier_hz": patterns.carrier_hz,
        "phase_bits": patterns.phase_bits,
    }
    _sidecar_path(path).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_patterns(path) -> BeamPatternSet:
    """Read a pattern CSV and sidecar; full stored precision round-trips."""
    path = Path(path)
    if not path.exists():
        raise PatternFormatError(f"pattern file not found: {path}")
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise PatternFormatError(f"missing metadata sidecar: {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))

    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise PatternFormatError(f"{path}: first line must be '{_HEADER}'")
    body = [ln for ln in lines[1:] if ln.strip()]
    if not body:
        raise PatternFormatError(f"{path}: no pattern rows (header only)")

    angles: list[float] = []
    rows: list[list[complex]] = []
    current_angle = None
    current_row: list[complex] = []
    expected_g = None

    def close_block(lineno):
        nonlocal expected_g
        if expected_g is None:
            expected_g = len(current_row)
        elif len(current_row) != expected_g:
            raise PatternFormatError(
                f"{path}:{lineno}: inconsistent codeword count at angle {current_angle}"
            )
        rows.append(list(current_row))
        angles.append(current_angle)

    for lineno, line in enumerate(body, start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise PatternFormatError(f"{path}:{lineno}: expected 4 fields")
        try:
            angle = float(parts[0])
            codeword = int(parts[1])
            value = complex(float(parts[2]), float(parts[3]))
        except ValueError as exc:
            raise PatternFormatError(f"{path}:{lineno}: {exc}") from exc
        if current_angle is not None and angle != current_angle:
            close_block(lineno)
            if angle <= angles[-1]:
                raise PatternFormatError(
                    f"{path}:{lineno}: angles must be sorted strictly increasing"
                )
            current_angle = angle
            current_row = []
        elif current_angle is None:
            current_angle = angle
        if codeword != len(current_row):
            raise PatternFormatError(
                f"{path}:{lineno}: duplicated or out-of-order codeword row "
                f"(angle {angle}, codeword {codeword})"
            )
        current_row.append(value)
    close_block(len(body) + 1)

    values = np.asarray(rows, dtype=complex)
    grid = AngleGrid(np.asarray(angles, dtype=float))
    phase_bits = meta.get("phase_bits")
    return BeamPatternSet(
        values=values,
        grid=grid,
        element_count=int(meta["elements"]),
        scan_angles_deg=np.asarray(meta["scan_angles_deg"], dtype=float),
        carrier_hz=meta.get("carrier_hz"),
        phase_bits=None if phase_bits is None else int(phase_bits),
    )
