"""Synthetic cameras with known ground truth.

A camera is a colour matrix, an analytic strictly increasing tone curve,
an optional gamut map fitted over a reference colour cloud, and optional
rendered-domain noise and 8-bit quantization. Rendering follows
matrix -> gamut -> tone, so the recoverable row directions are those of
the gamut-folded matrix (``effective_matrix``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelParseError
from .gamut import AffineGamutMap, solve_affine_gamut
from .model import ColorMatrix, PixelPairSet
from .ranking import SATURATION_LIMIT

TONE_FAMILIES = ("gamma", "srgb", "filmic")
GAMUT_MODES = ("none", "affine", "warped")

DEFAULT_WARP_SCALE = 0.02

# ACES-style rational S-curve, normalized to hit 1 at 1.
_FILMIC_NORM = (1.0 * (2.51 * 1.0 + 0.03)) / (1.0 * (2.43 * 1.0 + 0.59) + 0.14)


@dataclass(frozen=True)
class ToneSpec:
    """Analytic tone curve: 'gamma' (t**g), 'srgb', or 'filmic'."""

    family: str = "gamma"
    gamma: float = 1.0 / 2.2

    def __post_init__(self) -> None:
        if self.family not in TONE_FAMILIES:
            raise ValueError(f"unknown tone family {self.family!r}")
        if self.family == "gamma" and not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.family == "gamma":
            return np.power(np.maximum(t, 0.0), self.gamma)
        if self.family == "srgb":
            lin = np.maximum(t, 0.0)
            return np.where(
                lin <= 0.0031308,
                12.92 * lin,
                1.055 * np.power(np.maximum(lin, 0.0031308), 1.0 / 2.4) - 0.055,
            )
        x = np.maximum(t, 0.0)
        return (x * (2.51 * x + 0.03)) / (x * (2.43 * x + 0.59) + 0.14) / _FILMIC_NORM


@dataclass(frozen=True)
class SyntheticCamera:
    """Ground-truth rendering pipeline for simulation."""

    matrix: ColorMatrix
    tone: ToneSpec
    gamut: AffineGamutMap | None = None
    warp_scale: float = 0.0
    noise_sigma: float = 0.0
    quantize: bool = False
    camera_id: str = "sim"
    seed: int = 0

    def __post_init__(self) -> None:
        if abs(self.matrix.det()) < 1e-8:
            raise ValueError("camera matrix must be invertible")
        grid = np.linspace(0.0, 1.0, 512)
        if np.any(np.diff(self.tone(grid)) <= 0.0):
            raise ValueError("tone curve must be strictly increasing on [0, 1]")
        if self.warp_scale < 0.0 or self.noise_sigma < 0.0:
            raise ValueError("warp_scale and noise_sigma must be non-negative")
        if self.warp_scale > 0.0 and self.gamut is None:
            raise ValueError("a warped camera needs a fitted gamut map")

    def effective_matrix(self) -> np.ndarray:
        """Row directions recoverable from rank evidence: T @ M."""
        if self.gamut is None:
            return self.matrix.rows.copy()
        return self.gamut.t @ self.matrix.rows


def _warp(v: np.ndarray, scale: float) -> np.ndarray:
    """Smooth in-cube perturbation, zero on every cube face."""
    bump = np.sin(np.pi * v[:, 0]) * np.sin(np.pi * v[:, 1]) * np.sin(np.pi * v[:, 2])
    direction = np.array([1.0, -0.7, 0.4])
    return v + scale * bump[:, None] * direction


def render_batch(camera: SyntheticCamera, raws: np.ndarray,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Render raw rows (n, 3) to rendered rows in [0, 1]^3."""
    raws = np.asarray(raws, dtype=float).reshape(-1, 3)
    v = raws @ camera.matrix.rows.T
    if camera.gamut is not None:
        v = camera.gamut.apply(v)
        if camera.warp_scale > 0.0:
            v = _warp(np.clip(v, 0.0, 1.0), camera.warp_scale)
    v = np.clip(v, 0.0, 1.0)
    out = camera.tone(v)
    if camera.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("rendering with noise requires an explicit rng")
        out = out + rng.normal(0.0, camera.noise_sigma, size=out.shape)
    if camera.quantize:
        out = np.round(np.clip(out, 0.0, 1.0) * 255.0) / 255.0
    return np.clip(out, 0.0, 1.0)


def render(camera: SyntheticCamera, raw,
           rng: np.random.Generator | None = None):
    """Render one raw triple; see render_batch."""
    arr = raw.as_array() if hasattr(raw, "as_array") else np.asarray(raw, dtype=float)
    return render_batch(camera, arr.reshape(1, 3), rng)[0]


def make_camera(seed: int = 0, delta: float = 0.25,
                tone: ToneSpec = ToneSpec(),
                gamut_mode: str = "affine",
                noise_sigma: float = 0.0,
                quantize: bool = False,
                warp_scale: float = DEFAULT_WARP_SCALE,
                camera_id: str | None = None) -> SyntheticCamera:
    """Build a random but reproducible camera.

    The matrix is the identity plus off-diagonal perturbations of size
    ``delta`` (at most 0.4), renormalized to unit row sums so greys stay
    grey through colour correction. For 'affine' and 'warped' gamut
    modes, (T, o) is fitted over a seeded reference cloud of corrected
    colours, exactly the affine formulation the calibration assumes.
    """
    if not 0.0 <= delta <= 0.4:
        raise ValueError("delta must be in [0, 0.4]")
    if gamut_mode not in GAMUT_MODES:
        raise ValueError(f"unknown gamut mode {gamut_mode!r}")
    rng = np.random.default_rng(seed)
    rows = np.eye(3)
    off = rng.uniform(-delta, delta, size=(3, 3))
    off[np.diag_indices(3)] = 0.0
    rows = rows + off
    rows /= rows.sum(axis=1, keepdims=True)
    matrix = ColorMatrix(rows)

    gamut = None
    if gamut_mode in ("affine", "warped"):
        cloud = rng.uniform(0.0, 1.0, size=(2000, 3))
        corners = np.array(np.meshgrid([0.0, 1.0], [0.0, 1.0], [0.0, 1.0],
                                       indexing="ij")).reshape(3, -1).T
        # real gamut mapping preserves the neutral axis; replicating axis
        # samples weights the least-squares fit the same way
        axis = np.linspace(0.02, 0.98, 200)[:, None] * np.ones((1, 3))
        cloud = np.vstack([cloud, corners, np.tile(axis, (3, 1))])
        gamut = solve_affine_gamut(cloud @ matrix.rows.T)

    return SyntheticCamera(
        matrix=matrix,
        tone=tone,
        gamut=gamut,
        warp_scale=warp_scale if gamut_mode == "warped" else 0.0,
        noise_sigma=noise_sigma,
        quantize=quantize,
        camera_id=camera_id if camera_id is not None else f"sim{seed}",
        seed=seed,
    )


def make_illuminants(count: int, seed: int = 0) -> list[np.ndarray]:
    """Diagonal illuminant gains; the first is always neutral."""
    if count < 1:
        raise ValueError("need at least one illuminant")
    out = [np.ones(3)]
    rng = np.random.default_rng(seed)
    for _ in range(count - 1):
        d = rng.uniform(0.55, 1.0, size=3)
        out.append(d / d.max())
    return out


def make_exposures(count: int) -> list[float]:
    """Half-stop exposure ladder centred on 1."""
    if count < 1:
        raise ValueError("need at least one exposure")
    return [float(2.0 ** (0.5 * (i - (count - 1) / 2))) for i in range(count)]


def _reflectances(n_patches: int, rng: np.random.Generator) -> np.ndarray:
    """Scene-like patch reflectances: a grey series, a low-chroma
    population, and saturated colours.

    Real charts carry a roughly logarithmic grey ramp ending in a deep
    black, and real scenes are full of near-neutral surfaces; without
    near-achromatic pairs the matrix scale cannot be pinned (uniform
    one-shot pixel draws must land on some), and without dark patches
    the tone fit extrapolates blindly at the dark end. The 0.2% black
    stays above the rendered-zero saturation cut.
    """
    n_grey = min(8, max(3, n_patches // 18)) if n_patches >= 3 else n_patches
    ramp = np.geomspace(0.002, 0.9, max(2, n_grey - 1)).tolist()
    ramp.append(0.25)  # a mid grey renders near mid-range for every tone family
    greys = np.array(sorted(ramp))[:n_grey, None] * np.ones((1, 3))
    n_rest = n_patches - greys.shape[0]
    n_neutral = n_rest // 6
    base = rng.uniform(0.08, 0.92, size=(n_neutral, 1))
    neutrals = np.clip(base + rng.uniform(-0.02, 0.02, size=(n_neutral, 3)),
                       0.002, 0.98)
    colours = rng.uniform(0.02, 0.98, size=(n_rest - n_neutral, 3))
    return np.vstack([greys, neutrals, colours])[:n_patches]


def make_corpus(camera: SyntheticCamera, n_patches: int,
                illuminants=None, exposures=None,
                rng_seed: int = 0) -> PixelPairSet:
    """Labelled raw/rendered pairs over patches x illuminants x exposures."""
    if n_patches < 1:
        raise ValueError("need at least one patch")
    illuminants = [np.ones(3)] if illuminants is None else [
        np.asarray(d, dtype=float).reshape(3) for d in illuminants
    ]
    exposures = [1.0] if exposures is None else [float(e) for e in exposures]
    rng = np.random.default_rng(rng_seed)
    refl = _reflectances(n_patches, rng)

    raw_rows, rend_rows = [], []
    cam_t, illu_t, expo_t, patch_t = [], [], [], []
    for ei, exposure in enumerate(exposures):
        for li, d in enumerate(illuminants):
            raws = np.clip(exposure * refl * d[None, :], 0.0, 1.0)
            rendered = render_batch(camera, raws, rng)
            raw_rows.append(raws)
            rend_rows.append(rendered)
            cam_t += [camera.camera_id] * n_patches
            illu_t += [f"i{li}"] * n_patches
            expo_t += [f"e{ei}"] * n_patches
            patch_t += [f"p{pi}" for pi in range(n_patches)]

    raw = np.vstack(raw_rows)
    rendered = np.vstack(rend_rows)
    saturated = (
        (raw >= SATURATION_LIMIT).any(axis=1)
        | (rendered * 255.0 == 255.0).any(axis=1)
        | (rendered * 255.0 == 0.0).any(axis=1)
    )
    return PixelPairSet(
        raw=raw,
        rendered=rendered,
        camera=tuple(cam_t),
        illuminant=tuple(illu_t),
        exposure=tuple(expo_t),
        patch=tuple(patch_t),
        saturated=saturated,
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def serialize_camera(camera: SyntheticCamera) -> str:
    """Sidecar ground-truth document in the keyed text style."""
    lines = ["camera.version = 1"]
    lines.append(f"camera.id = {camera.camera_id}")
    lines.append(f"camera.seed = {camera.seed}")
    for i in range(3):
        for j in range(3):
            lines.append(f"matrix.r{i + 1}.c{j + 1} = {_fmt(camera.matrix.rows[i, j])}")
    lines.append(f"tone.family = {camera.tone.family}")
    lines.append(f"tone.gamma = {_fmt(camera.tone.gamma)}")
    lines.append(f"gamut.mode = "
                 f"{'none' if camera.gamut is None else ('warped' if camera.warp_scale > 0 else 'affine')}")
    if camera.gamut is not None:
        for i in range(3):
            for j in range(3):
                lines.append(f"gamut.t.r{i + 1}.c{j + 1} = {_fmt(camera.gamut.t[i, j])}")
        for i in range(3):
            lines.append(f"gamut.o.{i + 1} = {_fmt(camera.gamut.o[i])}")
    lines.append(f"warp.scale = {_fmt(camera.warp_scale)}")
    lines.append(f"noise.sigma = {_fmt(camera.noise_sigma)}")
    lines.append(f"quantize = {1 if camera.quantize else 0}")
    return "\n".join(lines) + "\n"


def deserialize_camera(text: str) -> SyntheticCamera:
    """Parse a camera sidecar document."""
    values: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line.rstrip("\r")
        if not line.strip():
            continue
        if " = " not in line:
            raise ModelParseError(f"line {lineno}: expected 'key = value'")
        key, value = line.split(" = ", 1)
        values[key.strip()] = value

    def need(key: str) -> str:
        if key not in values:
            raise ModelParseError(f"missing key {key!r}")
        return values[key]

    if need("camera.version") != "1":
        raise ModelParseError(f"unknown camera version {values['camera.version']!r}")
    rows = np.array([
        [float(need(f"matrix.r{i + 1}.c{j + 1}")) for j in range(3)]
        for i in range(3)
    ])
    mode = need("gamut.mode")
    gamut = None
    if mode in ("affine", "warped"):
        t = np.array([
            [float(need(f"gamut.t.r{i + 1}.c{j + 1}")) for j in range(3)]
            for i in range(3)
        ])
        o = np.array([float(need(f"gamut.o.{i + 1}")) for i in range(3)])
        gamut = AffineGamutMap(t, o)
    return SyntheticCamera(
        matrix=ColorMatrix(rows),
        tone=ToneSpec(need("tone.family"), float(need("tone.gamma"))),
        gamut=gamut,
        warp_scale=float(need("warp.scale")),
        noise_sigma=float(need("noise.sigma")),
        quantize=need("quantize") == "1",
        camera_id=need("camera.id"),
        seed=int(need("camera.seed")),
    )
