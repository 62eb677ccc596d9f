"""Localization impact of beam-model mismatch.

Given a true beam source and a (calibrated) model source, the pseudo-true
channel parameters are the model parameters whose noise-free signal best
matches the truth's.  Mapping those back to a position and differencing
against the true position gives the asymptotic localization bias (ALB),
evaluated pointwise or over a scene grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .isac_channel import (
    SPEED_OF_LIGHT,
    ChannelParams,
    SceneGeometry,
    SignalConfig,
    UeState,
    beam_schedule,
    channel_params,
    delay_response,
    geo_params,
)

__all__ = [
    "PseudoTrueOptions",
    "PseudoTrueResult",
    "AlbGrid",
    "InfeasibleGeometryError",
    "pseudo_true",
    "locate",
    "alb",
    "alb_grid",
    "cdf",
    "save_alb_csv",
    "load_alb_csv",
    "save_cdf_csv",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleGeometryError(ValueError):
    """Raised when delays or angles cannot correspond to any scene position."""


@dataclass(frozen=True)
class PseudoTrueOptions:
    """Solver controls for the pseudo-true parameter search.

    The outer problem over (tau_l, tau_r, phi) runs coordinate descent
    with golden-section line searches; the bracket half-widths set how far
    one sweep can move each coordinate.
    """

    max_sweeps: int = 500
    rel_tolerance: float = 1e-12
    delay_bracket_s: float = 2e-9
    angle_bracket_deg: float = 2.0
    golden_iterations: int = 48


@dataclass(eq=False)
class PseudoTrueResult:
    """Best-fit model parameters against the true noise-free signal."""

    params: ChannelParams
    residual: float
    iterations: int
    converged: bool
    # reserved: SNR-dependent bound term, not computed by this package
    mcrb: None = None


@dataclass(eq=False)
class AlbGrid:
    """Per-cell localization bias over a rectangular scene grid."""

    x_centers_m: np.ndarray
    y_centers_m: np.ndarray
    alb_m: np.ndarray
    pseudo_xy_m: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        nx, ny = self.x_centers_m.size, self.y_centers_m.size
        if self.alb_m.shape != (nx, ny) or self.valid.shape != (nx, ny):
            raise ValueError("grid field shapes disagree")
        if self.pseudo_xy_m.shape != (nx, ny, 2):
            raise ValueError("pseudo-state field must be (nx, ny, 2)")
        finite = self.alb_m[self.valid]
        if finite.size and (np.any(~np.isfinite(finite)) or np.any(finite < 0)):
            raise ValueError("valid cells must hold finite non-negative bias values")

    @property
    def values(self) -> np.ndarray:
        """Valid bias values, flattened in deterministic cell order."""
        return self.alb_m[self.valid]


class _GainProjectedResidual:
    """Residual of the model signal against a fixed truth signal, with the
    two complex gains eliminated in closed form (variable projection).

    For all-ones pilots the schedule repeats collapse algebraically, so one
    evaluation costs O(scan_count * subcarriers) regardless of the repeat
    count; arbitrary pilots fall back to the full-size computation.
    """

    def __init__(self, truth_matrix: np.ndarray, model_source,
                 signal_cfg: SignalConfig):
        self.cfg = signal_cfg
        self.source = model_source
        self.k = signal_cfg.subcarrier_count
        self.spacing = signal_cfg.subcarrier_spacing_hz
        self.scan = signal_cfg.scan_count
        self.repeats = signal_cfg.repeats
        self.fast = signal_cfg.pilots is None
        if self.fast:
            # collapse the repeated schedule to one scan block
            base = truth_matrix.reshape(self.repeats, self.scan, self.k)
            self.truth_base = base.sum(axis=0)  # scan x K
            self.col_sum = truth_matrix.sum(axis=0)  # length K
            self.truth_sq = float(np.vdot(truth_matrix, truth_matrix).real)
        else:
            self.truth = truth_matrix
            self.truth_sq = float(np.vdot(truth_matrix, truth_matrix).real)

    def _dirichlet(self, delta_tau: float) -> complex:
        theta = 2.0 * np.pi * self.spacing * delta_tau
        num = np.exp(1j * self.k * theta) - 1.0
        den = np.exp(1j * theta) - 1.0
        if abs(den) < 1e-12:
            return complex(self.k)
        return complex(num / den)

    def value(self, tau_l: float, tau_r: float, phi_deg: float):
        """Projected squared residual and the fitted (alpha_l, alpha_r)."""
        try:
            row = np.asarray(self.source.response_row(phi_deg), dtype=complex)
        except ValueError:
            return math.inf, (0j, 0j)
        d_los = delay_response(tau_l, self.k, self.spacing)
        d_ris = delay_response(tau_r, self.k, self.spacing)
        if self.fast:
            rep = float(self.repeats)
            g11 = rep * self.scan * self.k
            g22 = rep * self.k * float(np.vdot(row, row).real)
            g12 = rep * complex(row.sum()) * self._dirichlet(tau_r - tau_l)
            z1 = complex(np.vdot(d_los, self.col_sum))
            z2 = complex(row.conj() @ (self.truth_base @ d_ris.conj()))
        else:
            beam = np.tile(row, self.repeats)
            u1 = self.cfg.pilots * d_los[None, :]
            u2 = self.cfg.pilots * (beam[:, None] * d_ris[None, :])
            g11 = float(np.vdot(u1, u1).real)
            g22 = float(np.vdot(u2, u2).real)
            g12 = complex(np.vdot(u1, u2))
            z1 = complex(np.vdot(u1, self.truth))
            z2 = complex(np.vdot(u2, self.truth))
        # solve the 2x2 Hermitian system [g11 g12; g12* g22] alpha = [z1; z2]
        det = g11 * g22 - (g12.conjugate() * g12).real
        scale = max(g11, g22, 1e-300)
        if g22 <= 1e-15 * scale:
            alpha_l = z1 / g11 if g11 > 0 else 0j
            alpha_r = 0j
        elif g11 <= 1e-15 * scale:
            alpha_l = 0j
            alpha_r = z2 / g22
        elif det <= 1e-15 * scale * scale:
            # nearly collinear regressors: fit the LOS column alone
            alpha_l = z1 / g11
            alpha_r = 0j
        else:
            alpha_l = (g22 * z1 - g12 * z2) / det
            alpha_r = (g11 * z2 - g12.conjugate() * z1) / det
        fitted = (z1.conjugate() * alpha_l + z2.conjugate() * alpha_r).real
        residual = max(self.truth_sq - fitted, 0.0)
        return float(residual), (complex(alpha_l), complex(alpha_r))


def _golden_min(fun, lo: float, hi: float, iterations: int):
    """Deterministic golden-section minimization; returns (x, fun(x))."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iterations):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fun(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def pseudo_true(true_source, model_source, ue: UeState,
                geometry: SceneGeometry, signal_cfg: SignalConfig,
                opts: PseudoTrueOptions | None = None) -> PseudoTrueResult:
    """Fit the model's channel parameters to the truth's noise-free signal.

    The truth signal is built from the true beam source at the exact
    geometric parameters of `ue`.  Gains are eliminated per evaluation by
    closed-form least squares; the remaining (tau_l, tau_r, phi) search is
    coordinate descent initialized at the true values, accepting only
    strict improvements, so the residual never exceeds its initial value
    and a matched model terminates immediately at the truth.
    """
    opts = opts or PseudoTrueOptions()
    true_params = channel_params(ue, geometry, signal_cfg)
    beam_true = beam_schedule(true_source, true_params.phi_a_deg,
                              signal_cfg.scan_count, signal_cfg.repeats)
    from .isac_channel import noise_free_signal

    truth_vec = noise_free_signal(true_params, beam_true, signal_cfg)
    truth_matrix = truth_vec.reshape(signal_cfg.codeword_count,
                                     signal_cfg.subcarrier_count)
    objective = _GainProjectedResidual(truth_matrix, model_source, signal_cfg)

    x = [true_params.tau_l, true_params.tau_r, true_params.phi_a_deg]
    best, gains = objective.value(*x)
    if not np.isfinite(best):
        raise ValueError("model beam source cannot evaluate the true azimuth")
    scale = max(objective.truth_sq, 1e-300)

    brackets = (opts.delay_bracket_s, opts.delay_bracket_s, opts.angle_bracket_deg)
    lower = (0.0, 0.0, -90.0)
    upper = (math.inf, math.inf, 90.0)

    sweeps = 0
    converged = best <= 1e-30 * scale
    while not converged and sweeps < opts.max_sweeps:
        sweeps += 1
        previous = best
        for i in range(3):
            lo = max(x[i] - brackets[i], lower[i])
            hi = min(x[i] + brackets[i], upper[i])
            if hi <= lo:
                continue

            def coord_fun(v, _i=i):
                trial = list(x)
                trial[_i] = v
                return objective.value(*trial)[0]

            candidate, f_candidate = _golden_min(coord_fun, lo, hi,
                                                 opts.golden_iterations)
            if f_candidate < best:
                x[i] = candidate
                best = f_candidate
        change = previous - best
        if change <= opts.rel_tolerance * max(previous, 1e-300):
            converged = True

    best, gains = objective.value(*x)
    params = ChannelParams(gains[0], x[0], gains[1], x[1], x[2])
    return PseudoTrueResult(params=params, residual=float(best),
                            iterations=sweeps, converged=converged)


def locate(tau_l: float, tau_r: float, phi_a_deg: float,
           geometry: SceneGeometry, max_iterations: int = 100) -> UeState:
    """Invert (tau_l, tau_r, phi) to a position by weighted Gauss–Newton.

    Residuals are expressed in meters (delays scaled by the speed of light,
    the angle by the current array–user range) so the three observables are
    commensurate.  Initialized at the intersection of the base-station
    range circle with the array bearing ray.
    """
    d_feed = geometry.bs_ris_distance_m
    range_ris = SPEED_OF_LIGHT * tau_r - d_feed
    if range_ris <= 0:
        raise InfeasibleGeometryError(
            "round-trip delay is shorter than the station-to-array distance"
        )
    range_bs = SPEED_OF_LIGHT * tau_l

    u = geometry.ris_boresight
    v = np.array([-u[1], u[0]])
    phi = math.radians(phi_a_deg)
    direction = math.cos(phi) * u + math.sin(phi) * v

    # bearing-ray point at the distance matching the base-station circle
    offset = geometry.ris_xy_m - geometry.bs_xy_m
    b_coef = 2.0 * float(direction @ offset)
    c_coef = float(offset @ offset) - range_bs ** 2
    disc = b_coef ** 2 - 4.0 * c_coef
    if disc >= 0:
        roots = [(-b_coef + math.sqrt(disc)) / 2.0, (-b_coef - math.sqrt(disc)) / 2.0]
        feasible = [r for r in roots if r > 0]
        start_range = min(feasible, key=lambda r: abs(r - range_ris)) \
            if feasible else range_ris
    else:
        start_range = range_ris
    s = geometry.ris_xy_m + start_range * direction

    target = np.array([range_bs, SPEED_OF_LIGHT * tau_r, phi])
    for _ in range(max_iterations):
        d_bs = s - geometry.bs_xy_m
        d_ris = s - geometry.ris_xy_m
        r_bs = np.linalg.norm(d_bs)
        r_ris = np.linalg.norm(d_ris)
        if r_bs < 1e-12 or r_ris < 1e-12:
            raise InfeasibleGeometryError("iterate collapsed onto a station")
        along = float(d_ris @ u)
        across = float(d_ris @ v)
        phi_cur = math.atan2(across, along)
        residual = np.array([
            r_bs - target[0],
            d_feed + r_ris - target[1],
            r_ris * (phi_cur - target[2]),
        ])
        jac = np.zeros((3, 2))
        jac[0] = d_bs / r_bs
        jac[1] = d_ris / r_ris
        jac[2] = (along * v - across * u) / r_ris
        step, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
        s = s + step
        if np.linalg.norm(step) < 1e-12:
            break
    else:
        raise InfeasibleGeometryError("position fit did not converge")
    return UeState(float(s[0]), float(s[1]))


def alb(ue: UeState, true_source, model_source, geometry: SceneGeometry,
        signal_cfg: SignalConfig,
        opts: PseudoTrueOptions | None = None) -> float:
    """Localization bias at one position: distance from the true position to
    the position implied by the pseudo-true parameters."""
    fit = pseudo_true(true_source, model_source, ue, geometry, signal_cfg, opts)
    implied = locate(fit.params.tau_l, fit.params.tau_r, fit.params.phi_a_deg,
                     geometry)
    return float(np.hypot(ue.x_m - implied.x_m, ue.y_m - implied.y_m))


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _alb_cell(task):
    """Worker for one grid cell; returns (alb, pseudo_x, pseudo_y, valid)."""
    x, y, true_source, model_source, geometry, signal_cfg, opts = task
    try:
        ue = UeState(x, y)
        fit = pseudo_true(true_source, model_source, ue, geometry, signal_cfg, opts)
        implied = locate(fit.params.tau_l, fit.params.tau_r,
                         fit.params.phi_a_deg, geometry)
        value = float(np.hypot(x - implied.x_m, y - implied.y_m))
        return value, implied.x_m, implied.y_m, True
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return math.nan, math.nan, math.nan, False


def alb_grid(region: tuple[float, float, float, float], step: float,
             true_source, model_source, geometry: SceneGeometry,
             signal_cfg: SignalConfig, opts: PseudoTrueOptions | None = None,
             jobs: int = 1) -> AlbGrid:
    """Localization bias per cell center over (x_min, x_max, y_min, y_max).

    Cells with degenerate geometry (user on a station, azimuth outside the
    pattern coverage) are marked invalid rather than zero.  Cells are
    independent; jobs > 1 distributes them over processes and merges by
    cell index, so the result does not depend on scheduling.
    """
    if step <= 0:
        raise ValueError("grid step must be positive")
    x_min, x_max, y_min, y_max = region
    xs = _axis(x_min, x_max, step)
    ys = _axis(y_min, y_max, step)
    tasks = [
        (float(x), float(y), true_source, model_source, geometry, signal_cfg, opts)
        for x in xs
        for y in ys
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_alb_cell, tasks, chunksize=8))
    else:
        results = [_alb_cell(t) for t in tasks]

    alb_vals = np.full((xs.size, ys.size), np.nan)
    pseudo = np.full((xs.size, ys.size, 2), np.nan)
    valid = np.zeros((xs.size, ys.size), dtype=bool)
    for idx, (value, px, py, ok) in enumerate(results):
        i, j = divmod(idx, ys.size)
        alb_vals[i, j] = value
        pseudo[i, j] = (px, py)
        valid[i, j] = ok
    return AlbGrid(xs, ys, alb_vals, pseudo, valid)


def cdf(values, query_points) -> list[tuple[float, float]]:
    """Empirical right-continuous CDF evaluated at the query thresholds."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("cdf needs at least one value")
    if np.any(~np.isfinite(vals)):
        raise ValueError("cdf values must be finite")
    ordered = np.sort(vals)
    out = []
    for q in np.atleast_1d(np.asarray(query_points, dtype=float)):
        frac = np.searchsorted(ordered, q, side="right") / ordered.size
        out.append((float(q), float(frac)))
    return out


# ---------------------------------------------------------------------------
# Plot-ready CSV output
# ---------------------------------------------------------------------------


def save_alb_csv(grid: AlbGrid, path) -> None:
    lines = ["x_m,y_m,alb_m,valid"]
    for i, x in enumerate(grid.x_centers_m):
        for j, y in enumerate(grid.y_centers_m):
            ok = bool(grid.valid[i, j])
            value = grid.alb_m[i, j]
            text = repr(float(value)) if ok else "nan"
            lines.append(f"{float(x)!r},{float(y)!r},{text},{int(ok)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_alb_csv(path) -> list[tuple[float, float, float, bool]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "x_m,y_m,alb_m,valid":
        raise ValueError(f"{path}: not a bias-grid CSV")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields")
        rows.append((float(parts[0]), float(parts[1]), float(parts[2]),
                     parts[3] == "1"))
    return rows


def save_cdf_csv(points: list[tuple[float, float]], path) -> None:
    lines = ["threshold_m,fraction"]
    for threshold, fraction in points:
        lines.append(f"{float(threshold)!r},{float(fraction)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
