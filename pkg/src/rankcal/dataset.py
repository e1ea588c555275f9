"""Corpus ingestion, training-subset selection, and RMSE evaluation.

The on-disk corpus is a small CSV, one pixel pair per row:

    camera,illuminant,exposure,patch,raw_r,raw_g,raw_b,jpeg_r,jpeg_g,jpeg_b,white_level

Raw columns are divided by the row's white level and jpeg columns by 255
at load, so everything downstream works on [0, 1]. Rows whose jpeg values
touch 0 or 255, or whose raw values reach 99.5% of the white level, are
flagged saturated; they stay in the set for evaluation but are excluded
from estimation. Lines starting with '#' are comments.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import CorpusFormatError, EmptyCorpus, InsufficientVariety
from .model import PixelPairSet

CSV_COLUMNS = (
    "camera", "illuminant", "exposure", "patch",
    "raw_r", "raw_g", "raw_b", "jpeg_r", "jpeg_g", "jpeg_b", "white_level",
)
RAW_SATURATION_FRACTION = 0.995


@dataclass(frozen=True)
class SubsetSpec:
    """Training-subset selector.

    kind 'uniform' draws ``k`` entries without replacement; kind
    'exposures_illuminants' draws ``n_exposures`` exposure ids and
    ``n_illuminants`` illuminant ids and keeps every entry matching both.
    """

    kind: str
    k: int = 0
    n_exposures: int = 0
    n_illuminants: int = 0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind == "uniform":
            if self.k < 1:
                raise ValueError("uniform subset needs k >= 1")
        elif self.kind == "exposures_illuminants":
            if self.n_exposures < 1 or self.n_illuminants < 1:
                raise ValueError("need at least one exposure and one illuminant")
        else:
            raise ValueError(f"unknown subset kind {self.kind!r}")


def parse_subset_spec(text: str, rng_seed: int = 0) -> SubsetSpec | None:
    """Parse the CLI subset vocabulary: 'all', 'uniform:K', 'exp:E,illu:I'."""
    text = text.strip()
    if text == "all":
        return None
    if text.startswith("uniform:"):
        return SubsetSpec(kind="uniform", k=int(text[len("uniform:"):]),
                          rng_seed=rng_seed)
    if text.startswith("exp:"):
        parts = dict(p.split(":", 1) for p in text.split(","))
        if set(parts) != {"exp", "illu"}:
            raise ValueError(f"bad subset spec {text!r}")
        return SubsetSpec(
            kind="exposures_illuminants",
            n_exposures=int(parts["exp"]),
            n_illuminants=int(parts["illu"]),
            rng_seed=rng_seed,
        )
    raise ValueError(f"bad subset spec {text!r}; use all, uniform:K, or exp:E,illu:I")


def load_corpus(path) -> PixelPairSet:
    """Read a corpus CSV; errors carry the offending line number."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_corpus(fh, str(path))


def loads_corpus(text: str) -> PixelPairSet:
    return _parse_corpus(io.StringIO(text), "<string>")


def _parse_corpus(fh, origin: str) -> PixelPairSet:
    header = None
    raws, jpegs = [], []
    cam_t, illu_t, expo_t, patch_t = [], [], [], []
    saturated = []
    reader = csv.reader(fh)
    for lineno, row in enumerate(reader, start=1):
        if not row or (row[0].lstrip().startswith("#")):
            continue
        if header is None:
            if tuple(c.strip() for c in row) != CSV_COLUMNS:
                raise CorpusFormatError(
                    f"{origin}: line {lineno}: expected header "
                    f"{','.join(CSV_COLUMNS)}"
                )
            header = row
            continue
        if len(row) != len(CSV_COLUMNS):
            raise CorpusFormatError(
                f"{origin}: line {lineno}: expected {len(CSV_COLUMNS)} fields, "
                f"got {len(row)}"
            )
        try:
            numbers = [float(v) for v in row[4:]]
        except ValueError:
            raise CorpusFormatError(
                f"{origin}: line {lineno}: non-numeric value"
            ) from None
        if not all(np.isfinite(numbers)):
            raise CorpusFormatError(f"{origin}: line {lineno}: non-finite value")
        raw = numbers[0:3]
        jpeg = numbers[3:6]
        white = numbers[6]
        if white <= 0:
            raise CorpusFormatError(
                f"{origin}: line {lineno}: white_level must be positive"
            )
        if min(jpeg) < 0 or max(jpeg) > 255 or min(raw) < 0:
            raise CorpusFormatError(
                f"{origin}: line {lineno}: values out of range"
            )
        sat = any(v == 0.0 or v == 255.0 for v in jpeg) or any(
            v >= RAW_SATURATION_FRACTION * white for v in raw
        )
        raws.append([v / white for v in raw])
        jpegs.append([v / 255.0 for v in jpeg])
        cam_t.append(row[0])
        illu_t.append(row[1])
        expo_t.append(row[2])
        patch_t.append(row[3])
        saturated.append(sat)
    if header is None:
        raise CorpusFormatError(f"{origin}: missing header line")
    if not raws:
        raise EmptyCorpus(f"{origin}: no data rows")
    # raw values above the white level only occur on rows the 0.995 rule
    # already flags, so the PixelPairSet invariant holds by construction
    return PixelPairSet(
        raw=np.array(raws),
        rendered=np.array(jpegs),
        camera=tuple(cam_t),
        illuminant=tuple(illu_t),
        exposure=tuple(expo_t),
        patch=tuple(patch_t),
        saturated=np.array(saturated, dtype=bool),
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def save_corpus(pairs: PixelPairSet, path) -> None:
    """Write a corpus CSV (white level 1, values already normalized)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(len(pairs)):
            raw = pairs.raw[i]
            jpeg = pairs.rendered[i] * 255.0
            fields = [
                pairs.camera[i], pairs.illuminant[i],
                pairs.exposure[i], pairs.patch[i],
                _fmt(raw[0]), _fmt(raw[1]), _fmt(raw[2]),
                _fmt(jpeg[0]), _fmt(jpeg[1]), _fmt(jpeg[2]),
                "1",
            ]
            fh.write(",".join(fields) + "\n")


def select_subset(corpus: PixelPairSet, spec: SubsetSpec) -> PixelPairSet:
    """Draw a seeded training subset; see SubsetSpec."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot subset an empty corpus")
    rng = np.random.default_rng(spec.rng_seed)
    if spec.kind == "uniform":
        if spec.k > len(corpus):
            raise InsufficientVariety(
                f"requested {spec.k} entries from a corpus of {len(corpus)}"
            )
        idx = rng.choice(len(corpus), size=spec.k, replace=False)
        return corpus.subset(idx)

    exposures = sorted(set(corpus.exposure))
    illuminants = sorted(set(corpus.illuminant))
    if spec.n_exposures > len(exposures) or spec.n_illuminants > len(illuminants):
        raise InsufficientVariety(
            f"corpus has {len(exposures)} exposures and {len(illuminants)} "
            f"illuminants; requested {spec.n_exposures} and {spec.n_illuminants}"
        )
    keep_e = set(rng.choice(exposures, size=spec.n_exposures, replace=False))
    keep_i = set(rng.choice(illuminants, size=spec.n_illuminants, replace=False))
    idx = [
        i for i in range(len(corpus))
        if corpus.exposure[i] in keep_e and corpus.illuminant[i] in keep_i
    ]
    return corpus.subset(np.array(idx, dtype=int))


def _as_rgb_array(values) -> np.ndarray:
    if hasattr(values, "__len__") and len(values) and hasattr(values[0], "as_array"):
        return np.vstack([t.as_array() for t in values])
    return np.asarray(values, dtype=float).reshape(-1, 3)


def rmse(predictions, truth, domain: str = "rendered255") -> float:
    """Root mean squared error over all samples and channels.

    domain 'rendered255' scales errors by 255 to match 8-bit reporting;
    'raw01' reports in normalized raw units.
    """
    pred = _as_rgb_array(predictions)
    ref = _as_rgb_array(truth)
    if pred.shape != ref.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {ref.shape}")
    if pred.shape[0] == 0:
        raise ValueError("rmse needs at least one sample")
    if domain == "rendered255":
        scale = 255.0
    elif domain == "raw01":
        scale = 1.0
    else:
        raise ValueError(f"unknown rmse domain {domain!r}")
    err = (pred - ref) * scale
    return float(np.sqrt(np.mean(err * err)))
