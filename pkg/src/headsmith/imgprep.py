"""Radiograph preprocessing on 8-bit grayscale images.

Images are 2-D ``uint8`` numpy arrays. Files are binary PGM (P5, maxval
255). The convolution and pooling helpers are reference implementations
of the feature-map arithmetic used by CNN backbones.
"""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, ShapeError

logger = logging.getLogger(__name__)


def as_image(img):
    """Validate and return ``img`` as a C-contiguous uint8 matrix."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"grayscale image must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255) or np.any(arr != np.round(arr)):
            raise DataError("pixel values must be integers in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def equalization_lut(img):
    """256-entry lookup table mapping each level ``v`` to its equalized level."""
    img = as_image(img)
    cdf = np.cumsum(kernels.histogram256(img))
    total = int(img.size)
    cdf_min = int(cdf[cdf > 0][0])
    den = total - cdf_min
    if den == 0:
        return np.arange(256, dtype=np.uint8)
    num = 255 * np.maximum(cdf - cdf_min, 0)
    # exact integer round-half-up of num / den (all terms non-negative)
    return ((2 * num + den) // (2 * den)).astype(np.uint8)


def equalize(img):
    """Histogram equalization; a constant image is returned unchanged."""
    img = as_image(img)
    return equalization_lut(img)[img]


def mirror_horizontal(img):
    """Reverse column order, turning a right-knee view into a left-knee one."""
    return np.ascontiguousarray(as_image(img)[:, ::-1])


def invert(img):
    return 255 - as_image(img)


def border_center_means(img, frame=0.10):
    """Mean intensity of the border frame and of the region inside it.

    The frame is ``frame`` of each dimension wide (at least one pixel).
    Returns ``None`` for the centre when the frame covers the whole image.
    """
    img = as_image(img)
    m, n = img.shape
    bh = max(1, int(frame * m))
    bw = max(1, int(frame * n))
    mask = np.ones(img.shape, dtype=bool)
    mask[bh : m - bh, bw : n - bw] = False
    centre = img[~mask]
    border_mean = float(img[mask].mean())
    return border_mean, (float(centre.mean()) if centre.size else None)


def is_negative(img, margin=1.15, frame=0.10):
    border, centre = border_center_means(img, frame)
    return centre is not None and border > margin * centre


def detect_and_invert_negatives(batch, margin=1.15, frame=0.10):
    """Invert images whose border is brighter than ``margin`` times their centre.

    Returns the processed batch (same order) and the flagged indices.
    """
    if margin <= 0:
        raise ConfigError("margin must be positive")
    if len(batch) == 0:
        raise DataError("empty image batch")
    out, flagged = [], []
    for i, img in enumerate(batch):
        img = as_image(img)
        if is_negative(img, margin, frame):
            flagged.append(i)
            img = invert(img)
        out.append(img)
    return out, flagged


def convolve2d(img, kernel):
    """Valid-mode 2-D convolution (kernel flipped) returning float64."""
    arr = np.asarray(img, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if arr.ndim != 2 or k.ndim != 2 or min(k.shape) < 1:
        raise ShapeError("image and kernel must be 2-D and non-empty")
    if k.shape[0] > arr.shape[0] or k.shape[1] > arr.shape[1]:
        raise ShapeError(f"kernel {k.shape} is larger than image {arr.shape}")
    return kernels.convolve2d_valid(np.ascontiguousarray(arr), np.ascontiguousarray(k))


@dataclass(frozen=True)
class PoolSpec:
    window: int
    stride: int

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ConfigError("pool window and stride must be >= 1")


def pooled_dim(u, spec):
    if spec.window > u:
        raise ShapeError(f"pool window {spec.window} exceeds input dimension {u}")
    return (u - spec.window) // spec.stride + 1


def max_pool(img, spec):
    img = as_image(img)
    pooled_dim(img.shape[0], spec)
    pooled_dim(img.shape[1], spec)
    return kernels.max_pool2d(img, spec.window, spec.stride)


# --- PGM files and directory batches ---------------------------------------


def _pgm_tokens(buf, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1  # one whitespace byte ends the header


def read_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, w, h, maxval), offset = _pgm_tokens(buf, 4)
    if magic != b"P5" or int(maxval) != 255:
        raise DataError(f"{path}: only binary 8-bit PGM (P5, maxval 255) is supported")
    w, h = int(w), int(h)
    pixels = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=offset)
    return pixels.reshape(h, w).copy()


def write_pgm(path, img):
    img = as_image(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


OPERATIONS = ("equalize", "mirror", "negatives")


def process_directory(operation, in_dir, out_dir, margin=1.15):
    """Apply ``operation`` to every ``*.pgm`` in ``in_dir``.

    Writes results under the same names into ``out_dir`` plus a
    ``manifest.json`` listing each file and whether it changed or was
    flagged. Returns the manifest dict.
    """
    if operation not in OPERATIONS:
        raise ConfigError(f"operation must be one of {OPERATIONS}")
    names = sorted(f for f in os.listdir(in_dir) if f.lower().endswith(".pgm"))
    if not names:
        raise DataError(f"no .pgm files in {in_dir}")
    images = [read_pgm(os.path.join(in_dir, f)) for f in names]
    flagged = set()
    if operation == "equalize":
        results = [equalize(img) for img in images]
    elif operation == "mirror":
        results = [mirror_horizontal(img) for img in images]
    else:
        results, idx = detect_and_invert_negatives(images, margin)
        flagged = set(idx)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (name, before, after) in enumerate(zip(names, images, results)):
        write_pgm(os.path.join(out_dir, name), after)
        entries.append({"file": name, "changed": bool(not np.array_equal(before, after)), "flagged": i in flagged})
    manifest = {
        "operation": operation,
        "margin": margin if operation == "negatives" else None,
        "files": entries,
        "flagged": [e["file"] for e in entries if e["flagged"]],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    logger.info("%s: processed %d images, %d flagged", operation, len(names), len(flagged))
    return manifest
