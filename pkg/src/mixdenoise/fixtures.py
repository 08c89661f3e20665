"""Deterministic procedural test images.

The benchmark suite stands in for the classic photographic test images,
which are not distributed with the package (see scripts/fetch_images.sh
for pulling the originals).  All generators are seed-free closed forms,
so every build produces bit-identical fixtures.

`texture` carries a calibrated mid-gray contrast: its mean squared
deviation from 0.5 is fixed at TEXTURE_MSD, which pins the expected
PSNR of uniform-replacement impulse corruption independently of any
particular photograph.
"""

import numpy as np

#: Calibrated mean((v - 0.5)^2) of the texture fixture.
TEXTURE_MSD = 0.04722971906894163


def ramp(n=256):
    """Smooth diagonal gradient with a gentle bow, range [0.15, 0.85]."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    t = (i + j) / (2.0 * (n - 1))
    return 0.15 + 0.7 * (0.75 * t + 0.25 * t ** 2)


def boxes(n=256, block=32):
    """Piecewise-constant rectangles cycling through 7 gray levels."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    levels = ((i // block) * 3 + (j // block) * 5) % 7
    return 0.12 + 0.76 * levels / 6.0


def stripes(n=256, period=40.0):
    """Smooth oblique sinusoidal stripes, range [0.15, 0.85]."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return 0.5 + 0.35 * np.sin(2.0 * np.pi * (j + 0.35 * i) / period)


def blobs(n=256):
    """Sum of fixed Gaussian bumps on a mid-gray background."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    y, x = i / (n - 1.0), j / (n - 1.0)
    centers = [
        (0.25, 0.3, 0.12, 0.35),
        (0.7, 0.65, 0.18, -0.3),
        (0.35, 0.78, 0.09, 0.25),
        (0.8, 0.2, 0.14, -0.22),
    ]
    img = np.full((n, n), 0.5)
    for cy, cx, width, amp in centers:
        img += amp * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2.0 * width ** 2))
    return np.clip(img, 0.05, 0.95)


def _texture_base(n):
    i, j = np.meshgrid(np.arange(n, dtype=np.float64),
                       np.arange(n, dtype=np.float64), indexing="ij")
    t = np.sin(2.0 * np.pi * (0.966 * j + 0.259 * i) / 20.0)
    t += 0.8 * np.sin(2.0 * np.pi * (0.5 * j - 0.866 * i) / 31.0)
    t += 0.9 * np.sin(2.0 * np.pi * j / 97.0) * np.sin(2.0 * np.pi * i / 83.0)
    # Soft-edged blocks: a hard sign() would create zero-deviation 3x3
    # windows at block corners, which median-based detectors misread.
    t += 0.5 * np.tanh(3.0 * np.sin(2.0 * np.pi * i / 64.0)
                       * np.sin(2.0 * np.pi * j / 64.0))
    return t - t.mean()


def texture(n=256):
    """Oscillatory plaid with mean((v - 0.5)^2) == TEXTURE_MSD.

    A tanh squash keeps values strictly inside (0, 1); the squash gain
    is found by bisection, which is monotone in the resulting contrast.
    """
    base = _texture_base(n)

    def msd(gain):
        v = 0.5 * np.tanh(gain * base)
        return float((v ** 2).mean())

    lo, hi = 1e-6, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if msd(mid) < TEXTURE_MSD:
            lo = mid
        else:
            hi = mid
    gain = 0.5 * (lo + hi)
    return 0.5 + 0.5 * np.tanh(gain * base)


def suite(n=256):
    """The 5-image benchmark set keyed by name."""
    return {
        "ramp": ramp(n),
        "boxes": boxes(n),
        "stripes": stripes(n),
        "blobs": blobs(n),
        "texture": texture(n),
    }
