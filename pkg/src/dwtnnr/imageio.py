"""Binary netpbm (P5/P6, maxval 255) codec and float-plane conversion."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError

_WHITESPACE = b" \t\n\r\v\f"


@dataclass
class ImagePlanes:
    """Per-channel float planes in the ``[0, 255]`` scale, each ``height x width``."""

    planes: list

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise DomainError(f"expected 1 or 3 channels, got {self.channels}")
        shapes = {np.shape(p) for p in self.planes}
        if len(shapes) != 1:
            raise DomainError(f"planes have differing shapes {sorted(shapes)}")
        self.planes = [np.asarray(p, dtype=np.float64) for p in self.planes]
        if self.planes[0].ndim != 2:
            raise DomainError("planes must be 2-D")
        if not all(np.all(np.isfinite(p)) for p in self.planes):
            raise DomainError("planes contain non-finite values")

    @property
    def channels(self):
        return len(self.planes)

    @property
    def height(self):
        return self.planes[0].shape[0]

    @property
    def width(self):
        return self.planes[0].shape[1]

    def to_array(self):
        """``(h, w)`` for gray, ``(h, w, 3)`` for RGB."""
        if self.channels == 1:
            return self.planes[0].copy()
        return np.stack(self.planes, axis=-1)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            return cls([arr])
        if arr.ndim == 3:
            return cls([arr[..., c] for c in range(arr.shape[2])])
        raise DomainError(f"cannot build an image from shape {arr.shape}")


def _next_token(data, pos):
    """Skip whitespace and ``#`` comments, then return ``(token, end)``."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", offset=start)
    return data[start:pos], pos


def _int_token(data, pos, what):
    tok, end = _next_token(data, pos)
    if not tok.isdigit():
        raise ParseError(f"invalid {what} {tok!r}", offset=end - len(tok))
    return int(tok), end


def read_pnm(data):
    """Decode binary PGM (P5) or PPM (P6) bytes into :class:`ImagePlanes`."""
    data = bytes(data)
    if len(data) < 2:
        raise ParseError("file too short for a netpbm header", offset=0)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}; only P5 and P6 are accepted", offset=0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    maxval, pos = _int_token(data, pos, "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", offset=pos)
    if maxval != 255:
        raise ParseError(f"maxval {maxval} unsupported; only 255 is accepted", offset=pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise ParseError("missing whitespace after maxval", offset=pos)
    pos += 1
    expected = width * height * channels
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise ParseError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            offset=pos + len(payload),
        )
    pix = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    pix = pix.reshape(height, width, channels)
    return ImagePlanes([pix[..., c].copy() for c in range(channels)])


def to_bytes(plane):
    """Round half away from zero and clamp to ``[0, 255]``."""
    plane = np.clip(np.asarray(plane, dtype=np.float64), 0.0, 255.0)
    # values are non-negative after clipping, so floor(x + 0.5) rounds half away from zero
    return np.floor(plane + 0.5).astype(np.uint8)


def write_pnm(img):
    """Encode :class:`ImagePlanes` with the canonical ``P5``/``P6`` header."""
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    pix = np.stack([to_bytes(p) for p in img.planes], axis=-1)
    return header + pix.tobytes()


def split_channels(img):
    return [p.copy() for p in img.planes]


def merge_channels(planes):
    return ImagePlanes([np.asarray(p, dtype=np.float64).copy() for p in planes])


def read_image(path):
    with open(path, "rb") as fh:
        return read_pnm(fh.read())


def write_image(path, img):
    with open(path, "wb") as fh:
        fh.write(write_pnm(img))


def read_gray(path):
    """Read a single-channel PGM as a float array."""
    img = read_image(path)
    if img.channels != 1:
        raise DomainError(f"{path}: expected a grayscale (P5) image")
    return img.planes[0]


def write_gray(path, arr):
    write_image(path, ImagePlanes([np.asarray(arr, dtype=np.float64)]))


def read_mask(path):
    """Read a mask PGM: pixels >= 128 are observed."""
    return read_gray(path) >= 128


def write_mask(path, mask):
    write_gray(path, np.where(mask, 255.0, 0.0))
