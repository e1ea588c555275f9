"""Value types shared by every stage of the calibration toolkit.

All colour math runs on normalized intensities: raw values are divided by
the sensor white level and rendered values by 255 at ingestion, so both
sides live in (or near) the unit interval. Types are immutable after
construction and validate their own invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Grid used to validate tone-curve monotonicity, and the slack allowed
# between consecutive grid values.
TONE_GRID_POINTS = 1024
TONE_MONOTONE_TOL = 1e-9

# |det M| must exceed this after achromatic rescaling.
MATRIX_DET_MIN = 1e-8

# Forward/inverse tone curves must invert each other to within this bound
# on the 256-point grid, wherever the forward slope is at least 0.05.
TONE_ROUNDTRIP_TOL = 0.05
TONE_ROUNDTRIP_SLOPE_MIN = 0.05


def _as_float_array(values, shape, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RgbTriple:
    """A single RGB colour with normalized, finite components."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name in ("r", "g", "b"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"RgbTriple.{name} must be finite")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "RgbTriple":
        a = np.asarray(arr, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class PixelPair:
    """One raw/rendered correspondence with its provenance tags."""

    raw: RgbTriple
    rendered: RgbTriple
    camera: str
    illuminant: str
    exposure: str
    patch: str
    saturated: bool


@dataclass(frozen=True)
class PixelPairSet:
    """Corresponding raw and rendered samples, the calibration input.

    ``raw`` and ``rendered`` are (n, 3) arrays of normalized intensities.
    Rendered components must lie in [0, 1]; raw components are
    non-negative and may exceed 1 only on entries flagged ``saturated``.
    Saturated entries are retained for evaluation but excluded from all
    estimation steps.
    """

    raw: np.ndarray
    rendered: np.ndarray
    camera: tuple[str, ...]
    illuminant: tuple[str, ...]
    exposure: tuple[str, ...]
    patch: tuple[str, ...]
    saturated: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.raw, dtype=float)
        rendered = np.asarray(self.rendered, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != 3 or rendered.shape != raw.shape:
            raise ValueError("raw and rendered must both have shape (n, 3)")
        n = raw.shape[0]
        sat = np.asarray(self.saturated, dtype=bool)
        if sat.shape != (n,):
            raise ValueError("saturated must have shape (n,)")
        if not (np.all(np.isfinite(raw)) and np.all(np.isfinite(rendered))):
            raise ValueError("pixel values must be finite")
        if rendered.size and (rendered.min() < 0.0 or rendered.max() > 1.0):
            raise ValueError("rendered values must lie in [0, 1]")
        if raw.size and raw.min() < 0.0:
            raise ValueError("raw values must be non-negative")
        if np.any((raw > 1.0).any(axis=1) & ~sat):
            raise ValueError("raw values above 1 are only allowed on saturated entries")
        for name in ("camera", "illuminant", "exposure", "patch"):
            tags = tuple(str(t) for t in getattr(self, name))
            if len(tags) != n:
                raise ValueError(f"{name} tags must have length {n}")
            object.__setattr__(self, name, tags)
        raw = raw.copy()
        rendered = rendered.copy()
        sat = sat.copy()
        for a in (raw, rendered, sat):
            a.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "rendered", rendered)
        object.__setattr__(self, "saturated", sat)

    def __len__(self) -> int:
        return self.raw.shape[0]

    def entry(self, i: int) -> PixelPair:
        return PixelPair(
            raw=RgbTriple.from_array(self.raw[i]),
            rendered=RgbTriple.from_array(self.rendered[i]),
            camera=self.camera[i],
            illuminant=self.illuminant[i],
            exposure=self.exposure[i],
            patch=self.patch[i],
            saturated=bool(self.saturated[i]),
        )

    def subset(self, indices) -> "PixelPairSet":
        idx = np.asarray(indices)
        return PixelPairSet(
            raw=self.raw[idx],
            rendered=self.rendered[idx],
            camera=tuple(self.camera[i] for i in idx),
            illuminant=tuple(self.illuminant[i] for i in idx),
            exposure=tuple(self.exposure[i] for i in idx),
            patch=tuple(self.patch[i] for i in idx),
            saturated=self.saturated[idx],
        )

    def unsaturated(self) -> "PixelPairSet":
        return self.subset(np.flatnonzero(~self.saturated))

    @classmethod
    def from_arrays(cls, raw, rendered, saturated=None, camera="cam0",
                    illuminant="i0", exposure="e0") -> "PixelPairSet":
        """Build a set from bare arrays with uniform tags (mainly for tests)."""
        raw = np.asarray(raw, dtype=float)
        n = raw.shape[0]
        if saturated is None:
            saturated = np.zeros(n, dtype=bool)
        return cls(
            raw=raw,
            rendered=np.asarray(rendered, dtype=float),
            camera=(camera,) * n,
            illuminant=(illuminant,) * n,
            exposure=(exposure,) * n,
            patch=tuple(f"p{i}" for i in range(n)),
            saturated=np.asarray(saturated, dtype=bool),
        )


@dataclass(frozen=True)
class ColorMatrix:
    """The 3x3 colour-correction matrix; rows are estimated independently."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = _as_float_array(self.rows, (3, 3), "ColorMatrix.rows")
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("ColorMatrix rows must be non-zero")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls) -> "ColorMatrix":
        return cls(np.eye(3))

    def det(self) -> float:
        return float(np.linalg.det(self.rows))

    def inverse(self) -> np.ndarray:
        from .errors import SingularMatrix

        if abs(self.det()) <= MATRIX_DET_MIN:
            raise SingularMatrix(f"|det M| = {abs(self.det()):.3e} <= {MATRIX_DET_MIN}")
        return np.linalg.inv(self.rows)

    def apply(self, raws: np.ndarray) -> np.ndarray:
        """Map raw colours (n, 3) or (3,) through the matrix."""
        return np.asarray(raws, dtype=float) @ self.rows.T


@dataclass(frozen=True)
class ToneCurve:
    """A monotone polynomial tone curve on [0, 1] in the power basis.

    ``coefficients[i]`` multiplies t**i. Validation checks that the curve
    is non-decreasing on a uniform 1024-point grid (slack 1e-9).
    """

    coefficients: np.ndarray
    direction: str
    channel: int

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 1 or coef.size < 2:
            raise ValueError("ToneCurve needs at least two coefficients")
        if not np.all(np.isfinite(coef)):
            raise ValueError("ToneCurve coefficients must be finite")
        if self.direction not in ("forward", "inverse"):
            raise ValueError(f"unknown tone direction {self.direction!r}")
        if self.channel not in (1, 2, 3):
            raise ValueError(f"tone channel must be 1..3, got {self.channel}")
        coef = coef.copy()
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        grid = np.linspace(0.0, 1.0, TONE_GRID_POINTS)
        values = self(grid)
        drops = np.diff(values)
        if drops.size and drops.min() < -TONE_MONOTONE_TOL:
            raise ValueError(
                f"ToneCurve is not monotone: drop {drops.min():.3e} on the "
                f"{TONE_GRID_POINTS}-point grid"
            )

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, t) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coefficients)

    def derivative(self, t) -> np.ndarray:
        dcoef = self.coefficients[1:] * np.arange(1, self.coefficients.size)
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), dcoef)

    @classmethod
    def linear(cls, direction: str, channel: int, degree: int = 7) -> "ToneCurve":
        coef = np.zeros(degree + 1)
        coef[1] = 1.0
        return cls(coef, direction, channel)


@dataclass(frozen=True)
class Lattice3:
    """A cubic LUT over [0, 1]^3 evaluated by trilinear interpolation.

    ``nodes[i, j, k]`` is the RGB value stored at grid position
    (i, j, k) / (resolution - 1).
    """

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 4 or nodes.shape[3] != 3:
            raise ValueError("Lattice3 nodes must have shape (r, r, r, 3)")
        r = nodes.shape[0]
        if nodes.shape[:3] != (r, r, r) or r < 2:
            raise ValueError("Lattice3 must be cubic with resolution >= 2")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("Lattice3 nodes must be finite")
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def resolution(self) -> int:
        return self.nodes.shape[0]

    @classmethod
    def identity(cls, resolution: int = 5) -> "Lattice3":
        axis = np.linspace(0.0, 1.0, resolution)
        rr, gg, bb = np.meshgrid(axis, axis, axis, indexing="ij")
        return cls(np.stack([rr, gg, bb], axis=-1))


@dataclass(frozen=True)
class ModelMetadata:
    """Provenance carried inside a serialized model."""

    camera: str = ""
    samples: int = 0
    settings: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "camera", str(self.camera))
        object.__setattr__(self, "samples", int(self.samples))
        pairs = tuple((str(k), str(v)) for k, v in self.settings)
        object.__setattr__(self, "settings", pairs)

    @classmethod
    def from_dict(cls, camera: str, samples: int, settings: dict) -> "ModelMetadata":
        pairs = tuple((k, str(settings[k])) for k in sorted(settings))
        return cls(camera=camera, samples=samples, settings=pairs)


@dataclass(frozen=True)
class PipelineModel:
    """The full recovered pipeline, applicable in both directions."""

    matrix: ColorMatrix
    forward_tones: tuple[ToneCurve, ToneCurve, ToneCurve]
    forward_lut: Lattice3
    inverse_tones: tuple[ToneCurve, ToneCurve, ToneCurve]
    backward_lut: Lattice3
    metadata: ModelMetadata = field(default_factory=ModelMetadata)

    def __post_init__(self) -> None:
        object.__setattr__(self, "forward_tones", tuple(self.forward_tones))
        object.__setattr__(self, "inverse_tones", tuple(self.inverse_tones))
        for curves, direction in ((self.forward_tones, "forward"),
                                  (self.inverse_tones, "inverse")):
            if len(curves) != 3:
                raise ValueError(f"need exactly three {direction} tone curves")
            for k, curve in enumerate(curves, start=1):
                if curve.direction != direction or curve.channel != k:
                    raise ValueError(
                        f"{direction} tone curve {k} is tagged "
                        f"({curve.direction!r}, channel {curve.channel})"
                    )
        degrees = {c.degree for c in self.forward_tones + self.inverse_tones}
        if len(degrees) != 1:
            raise ValueError(f"tone curves disagree on degree: {sorted(degrees)}")
        self.matrix.inverse()  # raises SingularMatrix when degenerate
        self._check_tone_roundtrip()

    def _check_tone_roundtrip(self) -> None:
        t = np.linspace(0.0, 1.0, 256)
        for fwd, inv in zip(self.forward_tones, self.inverse_tones):
            slope = fwd.derivative(t)
            mask = slope >= TONE_ROUNDTRIP_SLOPE_MIN
            if not np.any(mask):
                continue
            back = inv(np.clip(fwd(t[mask]), 0.0, 1.0))
            gap = np.abs(back - t[mask]).max()
            if gap > TONE_ROUNDTRIP_TOL:
                raise ValueError(
                    f"forward/inverse tone curves disagree by {gap:.4f} on "
                    f"channel {fwd.channel} (limit {TONE_ROUNDTRIP_TOL})"
                )

    @classmethod
    def identity(cls, resolution: int = 5, degree: int = 7) -> "PipelineModel":
        fwd = tuple(ToneCurve.linear("forward", k, degree) for k in (1, 2, 3))
        inv = tuple(ToneCurve.linear("inverse", k, degree) for k in (1, 2, 3))
        return cls(
            matrix=ColorMatrix.identity(),
            forward_tones=fwd,
            forward_lut=Lattice3.identity(resolution),
            inverse_tones=inv,
            backward_lut=Lattice3.identity(resolution),
        )


def parameter_count(model: PipelineModel) -> int:
    """Number of scalars in the forward model: matrix + tones + forward LUT."""
    tone = sum(c.coefficients.size for c in model.forward_tones)
    lut = model.forward_lut.resolution ** 3 * 3
    return 9 + tone + lut


def backward_parameter_count(model: PipelineModel) -> int:
    """Scalars specific to the backward direction (the matrix is shared)."""
    tone = sum(c.coefficients.size for c in model.inverse_tones)
    lut = model.backward_lut.resolution ** 3 * 3
    return tone + lut
