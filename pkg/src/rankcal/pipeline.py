"""End-to-end calibration and bidirectional application.

Forward rendering is modelled as LUT(f(M rho)): colour correction, then
per-channel tone curves, then a small gamut-correction lattice. The
backward path reuses the forward matrix: raw = LUT_b(M^-1 f^-1(P)), with
its lattice fitted in linear raw where coarse uniform nodes are better
justified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, InsufficientData
from .gamut import apply_lattice, fit_lattice
from .model import (
    ColorMatrix,
    ModelMetadata,
    PipelineModel,
    PixelPairSet,
    RgbTriple,
)
from .ranking import (
    DEFAULT_MAX_COLORS,
    DEFAULT_SPHERE_COUNT,
    DEFAULT_TRIALS,
    estimate_row,
    rescale_achromatic,
    sample_sphere,
)
from .tonefit import FitConfig, fit_forward_tones, fit_inverse_tones

MIN_CALIBRATION_PAIRS = 30
MIN_DISTINCT_RENDERED = 10
_GAUGE_HEADROOM = 1.02


@dataclass(frozen=True)
class CalibrationConfig:
    """Settings for a full calibration run.

    The lattice regularization here is deliberately stiffer than the
    fit_lattice default: calibration targets are quantized or noisy
    renderings, and at small sample counts a loose lattice chases
    per-cell noise (measured 1.7x worse backward error at 140 pairs),
    while rich corpora are insensitive to the extra stiffness.
    """

    rng_seed: int = 0
    sphere_count: int = DEFAULT_SPHERE_COUNT
    trials: int = DEFAULT_TRIALS
    max_colors: int = DEFAULT_MAX_COLORS
    fit: FitConfig = field(default_factory=FitConfig)
    lattice_resolution: int = 5
    lattice_regularization: float = 0.05

    def settings_dict(self) -> dict:
        return {
            "seed": self.rng_seed,
            "sphere_count": self.sphere_count,
            "trials": self.trials,
            "max_colors": self.max_colors,
            "tone_degree": self.fit.degree,
            "tone_smoothness": self.fit.smoothness,
            "constraint_grid": self.fit.constraint_grid,
            "lattice_resolution": self.lattice_resolution,
            "lattice_regularization": self.lattice_regularization,
        }


class _Stage:
    """Context manager adding the stage name to errors and timing it."""

    def __init__(self, name: str, progress):
        self.name = name
        self.progress = progress

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            message = f"stage {self.name!r}: {exc}"
            if isinstance(exc, CalibrationError):
                raise type(exc)(message) from exc
            if isinstance(exc, Exception):
                raise CalibrationError(message) from exc
            return False
        if self.progress is not None:
            self.progress(self.name, time.perf_counter() - self.t0)
        return False


def _check_calibration_input(pairs: PixelPairSet) -> PixelPairSet:
    pool = pairs.unsaturated()
    if len(pool) < MIN_CALIBRATION_PAIRS:
        raise InsufficientData(
            f"calibration needs at least {MIN_CALIBRATION_PAIRS} unsaturated "
            f"pairs, have {len(pool)}"
        )
    for ch in range(3):
        distinct = np.unique(pool.rendered[:, ch]).size
        if distinct < MIN_DISTINCT_RENDERED:
            raise InsufficientData(
                f"channel {ch + 1} has {distinct} distinct rendered values; "
                f"need {MIN_DISTINCT_RENDERED}"
            )
    return pool


def calibrate(pairs: PixelPairSet, cfg: CalibrationConfig = CalibrationConfig(),
              progress=None) -> PipelineModel:
    """Recover the full pipeline from pixel pairs.

    Stages: matrix row estimation, achromatic rescaling, forward tone
    curves, forward lattice, inverse tone curves, backward lattice.
    Deterministic for a fixed seed. ``progress(stage, seconds)`` is
    called after each stage when provided.
    """
    pool = _check_calibration_input(pairs)

    with _Stage("matrix", progress):
        sphere = sample_sphere(cfg.sphere_count)
        rows = [
            estimate_row(pairs, ch, sphere, cfg.trials, cfg.max_colors,
                         cfg.rng_seed + 101 * (ch - 1))
            for ch in (1, 2, 3)
        ]
        directions = ColorMatrix(np.vstack(rows))

    with _Stage("achromatic_rescale", progress):
        anchored = rescale_achromatic(directions, pairs)
        # The achromatic gauge can push bright corrected raws well above 1
        # (the grey's rendered value exceeds its linear response under
        # gamma-like tones), but tone curves are defined on [0, 1] and
        # application clamps there. Shrink each row so the training data
        # fits, with slight headroom; the tone fit absorbs any row scale.
        corrected = pool.raw @ anchored.rows.T
        peak = corrected.max(axis=0)
        row_scale = np.maximum(1.0, _GAUGE_HEADROOM * peak)
        matrix = ColorMatrix(anchored.rows / row_scale[:, None])
        matrix_inv = matrix.inverse()  # raises SingularMatrix

    with _Stage("forward_tones", progress):
        forward_tones = fit_forward_tones(matrix, pairs, cfg.fit)

    with _Stage("forward_lattice", progress):
        corrected = np.clip(pool.raw @ matrix.rows.T, 0.0, 1.0)
        toned = np.column_stack([
            forward_tones[ch](corrected[:, ch]) for ch in range(3)
        ])
        forward_lut = fit_lattice(toned, pool.rendered, cfg.lattice_resolution,
                                  cfg.lattice_regularization)

    with _Stage("inverse_tones", progress):
        inverse_tones = fit_inverse_tones(matrix, pairs, cfg.fit)

    with _Stage("backward_lattice", progress):
        linearized = np.column_stack([
            inverse_tones[ch](pool.rendered[:, ch]) for ch in range(3)
        ])
        back = np.clip(linearized @ matrix_inv.T, 0.0, 1.0)
        backward_lut = fit_lattice(back, pool.raw, cfg.lattice_resolution,
                                   cfg.lattice_regularization)

    with _Stage("assemble", progress):
        cameras = sorted(set(pairs.camera))
        camera_id = cameras[0] if len(cameras) == 1 else "mixed"
        model = PipelineModel(
            matrix=matrix,
            forward_tones=forward_tones,
            forward_lut=forward_lut,
            inverse_tones=inverse_tones,
            backward_lut=backward_lut,
            metadata=ModelMetadata.from_dict(
                camera_id, len(pairs), cfg.settings_dict()
            ),
        )
    return model


def map_forward(model: PipelineModel, raws: np.ndarray) -> np.ndarray:
    """Raw rows (n, 3) to predicted rendered rows in [0, 1]^3."""
    raws = np.asarray(raws, dtype=float).reshape(-1, 3)
    corrected = np.clip(raws @ model.matrix.rows.T, 0.0, 1.0)
    toned = np.column_stack([
        model.forward_tones[ch](corrected[:, ch]) for ch in range(3)
    ])
    return np.clip(apply_lattice(model.forward_lut, toned), 0.0, 1.0)


def map_backward(model: PipelineModel, rendered: np.ndarray) -> np.ndarray:
    """Rendered rows (n, 3) to predicted raw rows in [0, 1]^3."""
    rendered = np.asarray(rendered, dtype=float).reshape(-1, 3)
    linearized = np.column_stack([
        model.inverse_tones[ch](rendered[:, ch]) for ch in range(3)
    ])
    back = np.clip(linearized @ model.matrix.inverse().T, 0.0, 1.0)
    return np.clip(apply_lattice(model.backward_lut, back), 0.0, 1.0)


def apply_forward(model: PipelineModel, raw: RgbTriple) -> RgbTriple:
    """Predict the rendered colour for one raw triple."""
    arr = raw.as_array() if isinstance(raw, RgbTriple) else np.asarray(raw, dtype=float)
    return RgbTriple.from_array(map_forward(model, arr.reshape(1, 3))[0])


def apply_backward(model: PipelineModel, rendered: RgbTriple) -> RgbTriple:
    """Predict the raw colour for one rendered triple."""
    arr = rendered.as_array() if isinstance(rendered, RgbTriple) else np.asarray(
        rendered, dtype=float)
    return RgbTriple.from_array(map_backward(model, arr.reshape(1, 3))[0])
