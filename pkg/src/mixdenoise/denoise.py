"""Pluggable denoising operators for the smoothing step.

Every denoiser maps (noisy image, noise level on the 0-255 scale) to an
estimate of the underlying image; the removed residual plays the role
of the regularizer's gradient in the outer loop.  Built-ins cover the
identity, explicit heat diffusion (the single-layer smoothing operator)
and a self-contained TV restoration; arbitrary external denoisers plug
in through a one-shot subprocess bridge.

Bridge wire format (little-endian), identical for request and reply:

    bytes 0..3   magic b"MND1"
    bytes 4..5   width  (uint16)
    bytes 6..7   height (uint16)
    bytes 8..15  noise level, 0-255 scale (float64)
    then width*height float64 pixels, row-major, [0, 1] scale

One subprocess invocation per call; stdin carries the request, stdout
the reply.
"""

import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .em import NoiseParams, uniform_weights
from .image import validate_image
from .noise import effective_variance
from .tv import TvConfig, divergence, gradient, solve_v

BRIDGE_MAGIC = b"MND1"
_HEADER = struct.Struct("<4sHHd")


class BridgeError(RuntimeError):
    """External denoiser failed, timed out or broke the wire protocol."""


@dataclass(frozen=True)
class Identity:
    """Pass-through denoiser."""


@dataclass(frozen=True)
class HeatDiffusion:
    """Explicit-Euler heat equation; dt must respect the 0.25 stability bound."""

    steps: int = 10
    dt: float = 0.2


@dataclass(frozen=True)
class TvRof:
    """TV restoration with fidelity lambda = strength * level / 255."""

    strength: float = 1.0
    iters: int = 8
    sweeps: int = 20


@dataclass(frozen=True)
class ExternalBridge:
    """Subprocess denoiser speaking the wire format above."""

    command: tuple
    timeout: float = 60.0


def effective_level(params):
    """Mixture's single-Gaussian equivalent std on the 0-255 scale.

    Assumes `params` carries variances on the internal [0,1]^2 scale,
    as the pipeline maintains them.
    """
    return float(np.sqrt(effective_variance(params)) * 255.0)


def denoise(noisy, level, kind):
    """Apply the denoiser `kind` at the given 0-255 noise level."""
    noisy = validate_image(noisy, "noisy")
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if isinstance(kind, Identity):
        return noisy.copy()
    if isinstance(kind, HeatDiffusion):
        return _heat_diffusion(noisy, kind)
    if isinstance(kind, TvRof):
        return _tv_rof(noisy, level, kind)
    if isinstance(kind, ExternalBridge):
        return _bridge_call(noisy, level, kind)
    raise TypeError(f"unknown denoiser kind {kind!r}")


def _heat_diffusion(img, kind):
    if kind.dt > 0.25:
        raise ValueError(f"heat-diffusion dt={kind.dt} exceeds stability bound 0.25")
    if kind.dt < 0 or kind.steps < 0:
        raise ValueError("heat-diffusion needs dt >= 0 and steps >= 0")
    u = img.copy()
    for _ in range(kind.steps):
        u = u + kind.dt * divergence(gradient(u))
    return u


def _tv_rof(img, level, kind):
    tv_weight = kind.strength * level / 255.0
    if tv_weight == 0.0:
        return img.copy()
    params = NoiseParams((1.0,), (1.0,))
    w = uniform_weights(1, img.shape)
    cfg = TvConfig(
        tv_weight=tv_weight,
        penalty=2.0 * tv_weight,
        coupling=0.0,
        bregman_iters=kind.iters,
        sweeps=kind.sweeps,
    )
    zero = np.zeros_like(img)
    v, _, _ = solve_v(img, zero, zero, w, params, cfg)
    return v


def _bridge_call(img, level, kind):
    h, w = img.shape
    if w > 0xFFFF or h > 0xFFFF:
        raise BridgeError(f"image {w}x{h} exceeds the bridge's uint16 dimensions")
    payload = _HEADER.pack(BRIDGE_MAGIC, w, h, float(level))
    payload += np.ascontiguousarray(img, dtype="<f8").tobytes()
    try:
        proc = subprocess.run(
            list(kind.command),
            input=payload,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            timeout=kind.timeout,
        )
    except subprocess.TimeoutExpired:
        raise BridgeError(
            f"denoiser {kind.command[0]!r} timed out after {kind.timeout}s"
        ) from None
    except OSError as exc:
        raise BridgeError(f"cannot launch denoiser {kind.command[0]!r}: {exc}") from None
    if proc.returncode != 0:
        err = proc.stderr.decode(errors="replace").strip()
        raise BridgeError(
            f"denoiser exited with status {proc.returncode}: {err[:500]}"
        )
    out = proc.stdout
    if len(out) < _HEADER.size:
        raise BridgeError(f"reply too short for header ({len(out)} bytes)")
    magic, rw, rh, _ = _HEADER.unpack_from(out)
    if magic != BRIDGE_MAGIC:
        raise BridgeError(f"bad reply magic {magic!r}")
    if (rw, rh) != (w, h):
        raise BridgeError(f"reply shape {rw}x{rh} does not match input {w}x{h}")
    need = _HEADER.size + w * h * 8
    if len(out) < need:
        raise BridgeError(f"reply payload truncated ({len(out)} of {need} bytes)")
    pixels = np.frombuffer(out[_HEADER.size:need], dtype="<f8").reshape(h, w)
    if not np.all(np.isfinite(pixels)):
        raise BridgeError("reply contains non-finite pixels")
    return pixels.astype(np.float64)
