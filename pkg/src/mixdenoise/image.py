"""Grayscale image I/O and quality metrics.

Images are 2-D float64 arrays with intensities on [0, 1].  PGM is the
only file format: P5 (binary) and P2 (ASCII) are read, P5 is written.
"""

import re

import numpy as np

MAX_GRAY = 255.0


class PgmFormatError(ValueError):
    """Malformed PGM header or unsupported variant."""


class PgmDataError(IOError):
    """PGM payload shorter than the header promises."""


def validate_image(img, name="image"):
    """Check that `img` is a finite 2-D float array; returns it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


_TOKEN = re.compile(rb"\S+")


def _read_header_tokens(data):
    """Yield (token, end_offset) pairs, skipping '#' comments."""
    pos = 0
    while True:
        m = _TOKEN.search(data, pos)
        if m is None:
            raise PgmFormatError("unexpected end of header")
        tok = m.group()
        if tok.startswith(b"#"):
            nl = data.find(b"\n", m.start())
            if nl < 0:
                raise PgmFormatError("unterminated comment in header")
            pos = nl + 1
            continue
        yield tok, m.end()
        pos = m.end()


def load_pgm(path):
    """Read a P5 (binary) or P2 (ASCII) PGM file as a [0, 1] float image.

    Intensities are divided by the header's maxval, so an 8-bit 255 maps
    to exactly 1.0.  Maxval up to 65535 is accepted (two-byte big-endian
    samples for maxval > 255, per the netpbm convention).
    """
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = _read_header_tokens(data)
    magic, _ = next(tokens)
    if magic not in (b"P5", b"P2"):
        raise PgmFormatError(f"not a PGM file (magic {magic!r})")

    fields = []
    end = 0
    for _ in range(3):
        tok, end = next(tokens)
        if not tok.isdigit():
            raise PgmFormatError(f"non-numeric header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise PgmFormatError(f"maxval {maxval} out of range (1..65535)")

    n = width * height
    if magic == b"P2":
        values = data[end:].split()
        if len(values) < n:
            raise PgmDataError(f"ASCII payload has {len(values)} of {n} samples")
        try:
            raw = np.array(values[:n], dtype=np.float64)
        except ValueError as exc:
            raise PgmFormatError(f"bad ASCII sample: {exc}") from None
        if raw.min() < 0 or raw.max() > maxval:
            raise PgmFormatError("ASCII sample out of range")
    else:
        # Exactly one whitespace byte separates the header from the payload.
        payload = data[end + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(payload) < need:
            raise PgmDataError(f"binary payload has {len(payload)} of {need} bytes")
        raw = np.frombuffer(payload[:need], dtype=dtype).astype(np.float64)

    img = (raw / maxval).reshape(height, width)
    return img


def save_pgm(img, path):
    """Write an image as binary 8-bit PGM.

    Values are clamped to [0, 1] and quantized by round-half-up of v*255.
    """
    arr = validate_image(img)
    q = np.floor(np.clip(arr, 0.0, 1.0) * MAX_GRAY + 0.5).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(q.tobytes())


def psnr(clean, test):
    """Peak signal-to-noise ratio in decibels, 10*log10(255^2 / MSE).

    MSE is taken on the 0-255 scale over the raw values (no clamping, so
    the metric is exact for unclamped additive noise).  Identical images
    return +inf.
    """
    a = validate_image(clean, "clean")
    b = validate_image(test, "test")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean(((a - b) * MAX_GRAY) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(MAX_GRAY ** 2 / mse)
