"""Monotone, smoothness-regularized polynomial tone-curve fitting.

A degree-7 polynomial in the power basis is fitted to (x, y) samples by
minimizing squared error plus a curvature penalty, with the derivative
constrained non-negative on a uniform grid. The curvature integral over
[0, 1] is a closed-form quadratic in the coefficients, so the whole fit
is one quadratic program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpan, InsufficientData, MaxIterations
from .model import ColorMatrix, PixelPairSet, ToneCurve
from .qp import QuadProgram, solve_qp

_QP_TOL = 1e-8
_MIN_SPAN = 0.2


@dataclass(frozen=True)
class FitConfig:
    """Tone-fit settings: polynomial degree, curvature weight, and the
    number of uniform points where the derivative is constrained."""

    degree: int = 7
    smoothness: float = 1e-5
    constraint_grid: int = 257

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.smoothness < 0:
            raise ValueError("smoothness must be >= 0")
        if self.constraint_grid < self.degree + 1:
            raise ValueError("constraint_grid must be at least degree + 1")


def curvature_matrix(degree: int) -> np.ndarray:
    """S with a' S a = integral of f''(t)^2 dt over [0, 1]."""
    s = np.zeros((degree + 1, degree + 1))
    for j in range(2, degree + 1):
        for k in range(2, degree + 1):
            s[j, k] = j * (j - 1) * k * (k - 1) / (j + k - 3)
    return s


def _power_basis(x: np.ndarray, degree: int) -> np.ndarray:
    return np.vander(x, degree + 1, increasing=True)


def _derivative_rows(t: np.ndarray, degree: int) -> np.ndarray:
    rows = np.zeros((t.size, degree + 1))
    for j in range(1, degree + 1):
        rows[:, j] = j * t ** (j - 1)
    return rows


def _solve_fit(x, y, cfg: FitConfig, floor: float) -> np.ndarray:
    v = _power_basis(x, cfg.degree)
    q = 2.0 * (v.T @ v + cfg.smoothness * curvature_matrix(cfg.degree))
    c = -2.0 * (v.T @ y)
    t = np.linspace(0.0, 1.0, cfg.constraint_grid)
    g = _derivative_rows(t, cfg.degree)
    identity_coef = np.zeros(cfg.degree + 1)
    identity_coef[1] = 1.0  # f(t) = t is strictly feasible for any floor < 1
    prob = QuadProgram(q=q, c=c, a=-g, b=np.full(t.size, -floor))
    return np.asarray(solve_qp(prob, _QP_TOL, start=identity_coef).x)


def _solve_fit_value_grid(x, y, cfg: FitConfig) -> np.ndarray:
    """Fit with non-decreasing values enforced on the validation grid."""
    from .model import TONE_GRID_POINTS

    v = _power_basis(x, cfg.degree)
    q = 2.0 * (v.T @ v + cfg.smoothness * curvature_matrix(cfg.degree))
    c = -2.0 * (v.T @ y)
    t = np.linspace(0.0, 1.0, TONE_GRID_POINTS)
    values = _power_basis(t, cfg.degree)
    rises = values[1:] - values[:-1]
    identity_coef = np.zeros(cfg.degree + 1)
    identity_coef[1] = 1.0
    prob = QuadProgram(q=q, c=c, a=-rises, b=np.zeros(rises.shape[0]))
    return np.asarray(solve_qp(prob, _QP_TOL, start=identity_coef).x)


def fit_monotone(x, y, cfg: FitConfig = FitConfig(), direction: str = "forward",
                 channel: int = 1) -> ToneCurve:
    """Fit one monotone tone curve to samples with x in [0, 1].

    Raises InsufficientData with fewer than degree + 1 samples and
    DegenerateSpan when the x values cover less than 0.2 of [0, 1].
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    if x.size < cfg.degree + 1:
        raise InsufficientData(
            f"need at least {cfg.degree + 1} samples, have {x.size}"
        )
    if x.min() < -1e-9 or x.max() > 1.0 + 1e-9:
        raise ValueError("x samples must lie in [0, 1]")
    if np.ptp(x) < _MIN_SPAN:
        raise DegenerateSpan(
            f"x samples span {np.ptp(x):.3f} of [0, 1]; need {_MIN_SPAN}"
        )
    x = np.clip(x, 0.0, 1.0)

    # The derivative is constrained on a finite grid, so a fitted degree-6
    # derivative can in rare cases dip between grid points; hard data can
    # also stall the active set outright. Retry with small positive
    # derivative floors, and as a last resort constrain the value
    # differences on the validation grid itself.
    last_error: Exception | None = None
    for floor in (0.0, 1e-7, 1e-5, 1e-3):
        try:
            return ToneCurve(_solve_fit(x, y, cfg, floor), direction, channel)
        except (ValueError, MaxIterations) as exc:
            last_error = exc
    try:
        return ToneCurve(_solve_fit_value_grid(x, y, cfg), direction, channel)
    except (ValueError, MaxIterations):
        raise last_error from None


def _forward_samples(m: ColorMatrix, pairs: PixelPairSet, channel: int):
    pool = pairs.unsaturated()
    x = np.clip(pool.raw @ m.rows[channel - 1], 0.0, 1.0)
    y = pool.rendered[:, channel - 1]
    return x, y


def fit_forward_tones(m: ColorMatrix, pairs: PixelPairSet,
                      cfg: FitConfig = FitConfig()):
    """Per-channel curves mapping colour-corrected raw to rendered."""
    return tuple(
        fit_monotone(*_forward_samples(m, pairs, ch), cfg, "forward", ch)
        for ch in (1, 2, 3)
    )


def fit_inverse_tones(m: ColorMatrix, pairs: PixelPairSet,
                      cfg: FitConfig = FitConfig()):
    """Per-channel curves mapping rendered back to colour-corrected raw."""
    pool = pairs.unsaturated()
    curves = []
    for ch in (1, 2, 3):
        x = pool.rendered[:, ch - 1]
        y = pool.raw @ m.rows[ch - 1]
        curves.append(fit_monotone(x, y, cfg, "inverse", ch))
    return tuple(curves)
