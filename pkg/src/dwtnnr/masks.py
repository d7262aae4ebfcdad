"""Deterministic observation-mask generators.

All generators return a boolean ``(m, n)`` array where ``True`` means the
entry is observed. Mask files use binary PGM with 255 for observed and 0
for missing pixels.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import as_mask
from .errors import DomainError

TRIANGLE_ORIENTATIONS = ("lower-right", "lower-left", "upper-left", "upper-right")


@dataclass
class MaskSpec:
    """Flag-level description of a mask, as accepted by :func:`make_mask`.

    ``kind`` is one of ``random``, ``blocks``, ``triangle``, ``diamond`` or
    ``from-image``. Only the fields relevant to ``kind`` are read.
    """

    kind: str
    missing_ratio: float = 0.5
    seed: int = 0
    rectangles: list = field(default_factory=list)
    box: tuple = None
    orientation: str = "lower-right"
    center: tuple = None
    semi_axes: tuple = None
    image: np.ndarray = None
    threshold: int = 128


def random_mask(m, n, missing_ratio, seed=0):
    """Exactly ``round(missing_ratio * m * n)`` missing entries chosen by a seeded shuffle."""
    if not 0.0 <= missing_ratio <= 1.0:
        raise DomainError(f"missing_ratio must lie in [0, 1], got {missing_ratio}")
    total = m * n
    n_missing = int(round(missing_ratio * total))
    rng = np.random.default_rng(seed)
    missing = rng.permutation(total)[:n_missing]
    mask = np.ones(total, dtype=bool)
    mask[missing] = False
    return mask.reshape(m, n)


def block_mask(m, n, rects):
    """Missing iff covered by one of the ``(top, left, height, width)`` rectangles."""
    mask = np.ones((m, n), dtype=bool)
    for rect in rects:
        top, left, height, width = (int(v) for v in rect)
        if height < 1 or width < 1 or top < 0 or left < 0 or top + height > m or left + width > n:
            raise DomainError(f"rectangle {tuple(rect)} outside a {m}x{n} matrix")
        mask[top:top + height, left:left + width] = False
    return mask


def triangle_mask(m, n, box, orientation="lower-right"):
    """Right-triangle hole inside ``box = (top, left, height, width)``.

    For the default orientation the entries on or below the box's
    anti-diagonal are missing, so a k x k box loses k(k+1)/2 entries. The
    other orientations mirror that triangle.
    """
    top, left, h, w = (int(v) for v in box)
    if h < 1 or w < 1:
        raise DomainError(f"degenerate triangle box {tuple(box)}")
    if top < 0 or left < 0 or top + h > m or left + w > n:
        raise DomainError(f"triangle box {tuple(box)} outside a {m}x{n} matrix")
    if orientation not in TRIANGLE_ORIENTATIONS:
        raise DomainError(f"unknown orientation {orientation!r}")
    i = np.arange(h)[:, None]
    j = np.arange(w)[None, :]
    # integer form of i/(h-1) + j/(w-1) >= 1, exact for any box
    hole = i * (w - 1) + j * (h - 1) >= (h - 1) * (w - 1)
    if orientation in ("lower-left", "upper-left"):
        hole = hole[:, ::-1]
    if orientation in ("upper-left", "upper-right"):
        hole = hole[::-1, :]
    mask = np.ones((m, n), dtype=bool)
    mask[top:top + h, left:left + w] = ~hole
    return mask


def diamond_mask(m, n, center, semi_axes):
    """Missing where ``|i - ci| / a + |j - cj| / b <= 1``."""
    ci, cj = (float(v) for v in center)
    a, b = (float(v) for v in semi_axes)
    if not (a > 0 and b > 0):
        raise DomainError(f"diamond semi-axes must be positive, got {semi_axes}")
    if ci - a < -0.5 or cj - b < -0.5 or ci + a > m - 0.5 or cj + b > n - 0.5:
        raise DomainError(f"diamond at {center} with semi-axes {semi_axes} outside a {m}x{n} matrix")
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    hole = np.abs(i - ci) / a + np.abs(j - cj) / b <= 1.0
    return ~hole


def shape_mask(m, n, kind, **params):
    """Dispatch to :func:`triangle_mask` or :func:`diamond_mask`."""
    if kind == "triangle":
        return triangle_mask(m, n, params["box"], params.get("orientation", "lower-right"))
    if kind == "diamond":
        return diamond_mask(m, n, params["center"], params["semi_axes"])
    raise DomainError(f"unknown shape kind {kind!r}")


def mask_from_image(img, threshold=128, shape=None):
    """Observed iff the pixel value is at least ``threshold``."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise DomainError(f"mask image must be single-channel, got shape {img.shape}")
    if shape is not None and img.shape != tuple(shape):
        raise DomainError(f"mask image is {img.shape}, expected {tuple(shape)}")
    return img >= threshold


def make_mask(spec, m, n):
    """Build the mask described by ``spec`` for an ``m x n`` matrix."""
    if spec.kind == "random":
        return random_mask(m, n, spec.missing_ratio, spec.seed)
    if spec.kind == "blocks":
        return block_mask(m, n, spec.rectangles)
    if spec.kind == "triangle":
        if spec.box is None:
            raise DomainError("triangle mask needs a bounding box")
        return triangle_mask(m, n, spec.box, spec.orientation)
    if spec.kind == "diamond":
        if spec.center is None or spec.semi_axes is None:
            raise DomainError("diamond mask needs a center and semi-axes")
        return diamond_mask(m, n, spec.center, spec.semi_axes)
    if spec.kind == "from-image":
        return mask_from_image(spec.image, spec.threshold, shape=(m, n))
    raise DomainError(f"unknown mask kind {spec.kind!r}")


def mask_to_pixels(mask):
    """255 where observed, 0 where missing."""
    return np.where(as_mask(mask), 255, 0).astype(np.uint8)
