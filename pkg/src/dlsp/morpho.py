"""Core grid types, PGM serialization, label binning, augmentation, and
dataset manifests shared by every other module.

A morphology is a grayscale donor-fraction field on a pixel grid: value 1.0
is pure donor, 0.0 pure acceptor.  Row 0 touches the top electrode (cathode,
electron-collecting from the acceptor phase), the last row touches the bottom
electrode (anode, hole-collecting from the donor phase).  That orientation is
load-bearing: labels are not invariant under vertical flips or phase swaps,
which is why augmentation is restricted to lateral operations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

DEFAULT_SIZE = 101
N_BINS = 10

SPLITS = ("train", "val", "test")

MANIFEST_HEADER = ["path", "jsc", "class", "split", "group"]


class MalformedHeader(ValueError):
    """PGM data does not start with a valid binary (P5) header."""


class TruncatedPayload(ValueError):
    """PGM payload is shorter than width*height bytes."""


class UnsupportedMaxval(ValueError):
    """PGM maxval is not 255."""


class DegenerateRange(ValueError):
    """Binning requested over a collapsed value range."""


class EmptyManifest(ValueError):
    """Operation requires a manifest with at least one sample."""


def _as_grid(m) -> np.ndarray:
    """Coerce a Morphology, BinaryMorphology, or bare array to a float grid
    in [0, 1]."""
    if isinstance(m, Morphology):
        v = m.values
    elif isinstance(m, BinaryMorphology):
        v = m.donor_mask.astype(np.float64)
    else:
        v = np.asarray(m, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"expected a 2D grid, got shape {v.shape}")
    if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
        raise ValueError("grid values must be finite and lie in [0, 1]")
    return v


@dataclass(frozen=True)
class Morphology:
    """Immutable donor-fraction field.  Arrays are marked read-only so
    instances can be shared freely across worker threads/processes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] < 3:
            raise ValueError(f"morphology must be at least 3x3, got shape {v.shape}")
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("morphology values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BinaryMorphology:
    """Two-phase view of a morphology: True marks donor pixels."""

    donor_mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.donor_mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError(f"donor mask must be 2D, got shape {mask.shape}")
        mask.setflags(write=False)
        object.__setattr__(self, "donor_mask", mask)

    @property
    def height(self) -> int:
        return self.donor_mask.shape[0]

    @property
    def width(self) -> int:
        return self.donor_mask.shape[1]


def binarize(m: Morphology, threshold: float = 0.5) -> BinaryMorphology:
    """Threshold a grayscale morphology into donor/acceptor phases.

    Pixels strictly above ``threshold`` become donor.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    v = _as_grid(m)
    return BinaryMorphology(v > threshold)


# ---------------------------------------------------------------------------
# PGM (binary, "P5") codec
#
# The on-disk format is pinned bit-exactly: header b"P5\n<width> <height>\n255\n"
# followed by height*width bytes row-major with byte = round-half-up(value*255).


def encode_pgm(m) -> bytes:
    """Encode a grid (Morphology or array in [0, 1]) as binary PGM bytes."""
    v = _as_grid(m)
    h, w = v.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    payload = np.floor(v * 255.0 + 0.5).astype(np.uint8).tobytes()
    return header + payload


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of PGM header")
    return data[start:pos], pos


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode binary PGM bytes to a float grid with value = byte / 255.

    Only the P5 variant with maxval 255 is accepted.
    """
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise MalformedHeader(f"unsupported PGM magic {magic!r} (only P5)")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise MalformedHeader(f"non-numeric PGM header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + height * width]
    if len(payload) < height * width:
        raise TruncatedPayload(
            f"payload holds {len(payload)} bytes, need {height * width}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return raw.astype(np.float64) / 255.0


def save_morphology(m: Morphology, path) -> None:
    Path(path).write_bytes(encode_pgm(m))


def load_morphology(path) -> Morphology:
    return Morphology(decode_pgm(Path(path).read_bytes()))


# ---------------------------------------------------------------------------
# Label binning


@dataclass(frozen=True)
class BinningSpec:
    """Equal-width mapping from a performance value to one of 10 classes.

    Edges are computed once from labeled data and then frozen; class 9 is the
    best-performing bin.
    """

    j_min: float
    j_max: float
    n_bins: int = N_BINS

    def __post_init__(self):
        if not self.j_min < self.j_max:
            raise DegenerateRange(f"j_min {self.j_min} must be < j_max {self.j_max}")
        if self.n_bins != N_BINS:
            raise ValueError(f"n_bins is fixed at {N_BINS}")


def compute_binning(jscs) -> BinningSpec:
    """Build the 10-bin spec spanning the extremes of the given values."""
    values = [float(j) for j in jscs]
    if len(values) < 2 or min(values) == max(values):
        raise DegenerateRange("need at least two distinct values to bin")
    return BinningSpec(j_min=min(values), j_max=max(values))


def assign_class(jsc: float, b: BinningSpec) -> int:
    """Map a performance value to its class id, clamped to [0, 9]."""
    span = b.j_max - b.j_min
    k = int(np.floor(b.n_bins * (jsc - b.j_min) / span))
    return min(max(k, 0), b.n_bins - 1)


def save_binning(b: BinningSpec, path) -> None:
    Path(path).write_text(
        f"j_min={b.j_min!r}\nj_max={b.j_max!r}\nn_bins={b.n_bins}\n"
    )


def load_binning(path) -> BinningSpec:
    fields = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return BinningSpec(
        j_min=float(fields["j_min"]),
        j_max=float(fields["j_max"]),
        n_bins=int(fields.get("n_bins", N_BINS)),
    )


# ---------------------------------------------------------------------------
# Augmentation
#
# The device is laterally symmetric and periodic but vertically asymmetric
# (distinct electrodes), so only the horizontal mirror and cyclic horizontal
# shifts preserve the label.  No vertical flips, no phase inversion.


def mirror(m: Morphology) -> Morphology:
    """Horizontal mirror (left-right flip)."""
    return Morphology(m.values[:, ::-1])


def augment(m: Morphology, shifts: int = 0) -> list[Morphology]:
    """Label-preserving variants: the original, its mirror, and ``shifts``
    evenly spaced cyclic horizontal shifts."""
    if shifts < 0:
        raise ValueError("shifts must be >= 0")
    out = [m, mirror(m)]
    for k in range(1, shifts + 1):
        s = (m.width * k) // (shifts + 1)
        out.append(Morphology(np.roll(m.values, s, axis=1)))
    return out


# ---------------------------------------------------------------------------
# Dataset manifest


@dataclass(frozen=True)
class LabeledSample:
    """One manifest row.  ``jsc`` and ``class_id`` stay None until labeling."""

    path: str
    jsc: float | None
    class_id: int | None
    split: str
    group: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.class_id is not None and not 0 <= self.class_id < N_BINS:
            raise ValueError(f"class_id out of range: {self.class_id}")


@dataclass(frozen=True)
class DatasetManifest:
    samples: tuple[LabeledSample, ...]
    binning: BinningSpec | None = None
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        paths = [s.path for s in self.samples]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest contains duplicate paths")

    def subset(self, split: str) -> tuple[LabeledSample, ...]:
        return tuple(s for s in self.samples if s.split == split)


def binning_sidecar_path(manifest_path) -> Path:
    return Path(manifest_path).with_suffix(".binning")


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write the manifest CSV (LF endings) plus the binning sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for s in manifest.samples:
            writer.writerow(
                [
                    s.path,
                    "" if s.jsc is None else repr(s.jsc),
                    "" if s.class_id is None else s.class_id,
                    s.split,
                    s.group,
                ]
            )
    if manifest.binning is not None:
        save_binning(manifest.binning, binning_sidecar_path(path))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise ValueError(
                f"manifest header {reader.fieldnames} != {MANIFEST_HEADER}"
            )
        for row in reader:
            samples.append(
                LabeledSample(
                    path=row["path"],
                    jsc=float(row["jsc"]) if row["jsc"] else None,
                    class_id=int(row["class"]) if row["class"] else None,
                    split=row["split"],
                    group=row["group"],
                )
            )
    sidecar = binning_sidecar_path(path)
    binning = load_binning(sidecar) if sidecar.exists() else None
    return DatasetManifest(samples=tuple(samples), binning=binning)


def resolve_sample_path(manifest_path, sample: LabeledSample) -> Path:
    """Sample paths are stored relative to the manifest's directory."""
    p = Path(sample.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def _apportion(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Integer split targets by largest remainder; ties go to earlier splits."""
    raw = [n * f for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    short = n - sum(base)
    order = sorted(range(3), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_dataset(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> DatasetManifest:
    """Assign every sample to train/val/test by a seeded group-aware shuffle.

    All samples sharing a group (augmented variants of one source snapshot)
    land in the same split so near-duplicates cannot leak across splits.
    """
    if not manifest.samples:
        raise EmptyManifest("cannot split an empty manifest")
    f = tuple(float(x) for x in fractions)
    if len(f) != 3 or any(x <= 0 for x in f) or abs(sum(f) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 positive values summing to 1, got {f}")

    groups: dict[str, list[int]] = {}
    for i, s in enumerate(manifest.samples):
        groups.setdefault(s.group, []).append(i)
    keys = list(groups)
    perm = np.random.default_rng(seed).permutation(len(keys))
    targets = _apportion(len(manifest.samples), f)

    assignment = {}
    counts = [0, 0, 0]
    for gi in perm:
        key = keys[int(gi)]
        si = next((i for i in range(3) if counts[i] < targets[i]), 2)
        counts[si] += len(groups[key])
        assignment[key] = SPLITS[si]

    samples = tuple(
        replace(s, split=assignment[s.group]) for s in manifest.samples
    )
    return DatasetManifest(
        samples=samples, binning=manifest.binning, provenance=manifest.provenance
    )


# ---------------------------------------------------------------------------
# Phase interface


def interface_mask(b: BinaryMorphology) -> np.ndarray:
    """True at pixels with at least one 4-neighbor of the opposite phase.

    Lateral neighbors wrap periodically; top/bottom do not.
    """
    donor = b.donor_mask
    out = donor != np.roll(donor, 1, axis=1)
    out |= donor != np.roll(donor, -1, axis=1)
    out[1:, :] |= donor[1:, :] != donor[:-1, :]
    out[:-1, :] |= donor[:-1, :] != donor[1:, :]
    return out
