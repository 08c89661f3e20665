"""Noise synthesis, mixture densities and variance pre-estimation.

Synthesis is seeded and bit-reproducible: all draws come from a Philox
stream in a documented order (see `synthesize_labeled`).  Gaussian
corruption is purely additive and never clamped; impulse replacements
write exact values.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from . import rng
from .em import NoiseParams
from .image import validate_image

GAUSSIAN_MIXTURE = "gaussian-mixture"
GAUSSIAN_RANDOM_VALUED = "gaussian-plus-random-valued"
GAUSSIAN_SALT_PEPPER = "gaussian-plus-salt-pepper"
IMPULSE_KINDS = (GAUSSIAN_RANDOM_VALUED, GAUSSIAN_SALT_PEPPER)
KINDS = (GAUSSIAN_MIXTURE,) + IMPULSE_KINDS


@dataclass(frozen=True)
class NoiseSpec:
    """Recipe for one synthetic corruption.

    kind: one of the module-level kind constants.
    ratios: mixture probabilities; for impulse kinds exactly
        (1 - r, r) with component 2 the impulse.
    sigmas: standard deviations on the 0-255 scale; impulse kinds take a
        single Gaussian sigma.  sigma == 0 is allowed and yields the
        degenerate no-noise component.
    seed: Philox key; fixes the realization bit-exactly.
    """

    kind: str
    ratios: tuple
    sigmas: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        r = np.array(self.ratios)
        if len(r) < 1 or abs(r.sum() - 1.0) > 1e-12:
            raise ValueError("ratios must sum to 1")
        if np.any(r <= 0) or np.any(r > 1):
            raise ValueError("each ratio must lie in (0, 1]")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigmas must be >= 0")
        if self.kind == GAUSSIAN_MIXTURE:
            if len(self.sigmas) != len(self.ratios):
                raise ValueError("need one sigma per mixture component")
        else:
            if len(r) != 2:
                raise ValueError("impulse kinds use exactly 2 components")
            if len(self.sigmas) != 1:
                raise ValueError("impulse kinds take a single Gaussian sigma")
        return self

    @property
    def impulse_ratio(self):
        if self.kind not in IMPULSE_KINDS:
            raise ValueError(f"{self.kind} has no impulse component")
        return self.ratios[1]


def synthesize(clean, spec):
    """Corrupt `clean` according to `spec`; deterministic given the seed."""
    noisy, _ = synthesize_labeled(clean, spec)
    return noisy


def synthesize_labeled(clean, spec):
    """Corrupt `clean` and also return the per-pixel component labels.

    Draw order from the Philox stream keyed by spec.seed: (1) one
    uniform block selecting the component per pixel, (2) one standard
    normal block (two uniform blocks via Box-Muller), (3) for impulse
    kinds one further uniform block of replacement values.  Labels are
    component indices (impulse pixels get label 1 for impulse kinds).
    """
    clean = validate_image(clean, "clean")
    spec.validate()
    gen = rng.make_generator(spec.seed)
    sel = rng.uniforms(gen, clean.shape)
    normal = rng.normals(gen, clean.shape)

    if spec.kind == GAUSSIAN_MIXTURE:
        edges = np.cumsum(spec.ratios)
        labels = np.searchsorted(edges, sel, side="right").astype(np.int64)
        labels = np.minimum(labels, len(spec.ratios) - 1)
        sigma = np.array(spec.sigmas)[labels] / 255.0
        return clean + normal * sigma, labels

    r = spec.impulse_ratio
    impulse = sel < r
    labels = impulse.astype(np.int64)
    sigma = spec.sigmas[0] / 255.0
    noisy = clean + normal * sigma
    repl = rng.uniforms(gen, clean.shape)
    if spec.kind == GAUSSIAN_RANDOM_VALUED:
        noisy = np.where(impulse, repl, noisy)
    else:
        noisy = np.where(impulse, (repl < 0.5).astype(np.float64), noisy)
    return noisy, labels


def mixture_pdf(z, params):
    """Density of the zero-mean Gaussian mixture at residual z.

    `params` is scale-agnostic; evaluate z on the same scale as the
    variances.  Vectorized over z.
    """
    params.validate()
    z = np.asarray(z, dtype=np.float64)
    var = np.array(params.variances).reshape((-1,) + (1,) * z.ndim)
    r = np.array(params.ratios).reshape(var.shape)
    dens = r / np.sqrt(2.0 * np.pi * var) * np.exp(-z[None] ** 2 / (2.0 * var))
    out = dens.sum(axis=0)
    return float(out) if out.ndim == 0 else out


def impulse_mixture_pdf(z, impulse_ratio, sigma, kind, clean_hist=None):
    """Density of Gaussian-plus-impulse noise at residual z (0-255 scale).

    Random-valued kind assumes the clean image is uniform on [0, 255],
    which makes the impulse contribution the triangular term
    r (255 - |z|)/255^2 on |z| <= 255.  Salt-and-pepper needs the clean
    image's normalized 256-bin histogram: the impulse density is then
    (r/2) p2(-z) + (r/2) p2(255 - z).
    """
    if not 0.0 < impulse_ratio < 1.0:
        raise ValueError("impulse ratio must lie in (0, 1)")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    z = np.asarray(z, dtype=np.float64)
    gauss = (1.0 - impulse_ratio) / (np.sqrt(2.0 * np.pi) * sigma) * np.exp(
        -z ** 2 / (2.0 * sigma ** 2)
    )
    if kind == GAUSSIAN_RANDOM_VALUED:
        tri = np.where(np.abs(z) <= 255.0, (255.0 - np.abs(z)) / 255.0 ** 2, 0.0)
        out = gauss + impulse_ratio * tri
    elif kind == GAUSSIAN_SALT_PEPPER:
        if clean_hist is None:
            raise ValueError("salt-and-pepper density needs the clean histogram")
        hist = np.asarray(clean_hist, dtype=np.float64)
        if hist.shape != (256,) or abs(hist.sum() - 1.0) > 1e-9:
            raise ValueError("clean_hist must be a normalized 256-bin histogram")
        out = gauss + 0.5 * impulse_ratio * (
            _hist_density(hist, -z) + _hist_density(hist, 255.0 - z)
        )
    else:
        raise ValueError(f"not an impulse kind: {kind!r}")
    return float(out) if z.ndim == 0 else out


def _hist_density(hist, t):
    """Histogram treated as a piecewise-constant density on [0, 255]."""
    t = np.asarray(t, dtype=np.float64)
    idx = np.floor(t).astype(np.int64)
    inside = (t >= 0.0) & (t <= 255.0)
    idx = np.clip(idx, 0, 255)
    return np.where(inside, hist[idx], 0.0)


#: 3x3 kernel whose response to smooth structure vanishes to 2nd order.
LAPLACIAN_DIFF_KERNEL = np.array(
    [[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]]
)


def estimate_noise_variance(f, method="laplacian"):
    """Global noise-variance estimate on the 0-255 scale.

    method "laplacian" (default) is the fast difference-of-Laplacians
    estimator: var = sum((f * M)^2) / (36 (H-2)(W-2)) with M the kernel
    above, insensitive to constant offsets and linear ramps.  method
    "literal" keeps the historical form sum(f * M) / (10 H W) for
    comparison; it is not a meaningful variance for zero-mean noise.
    """
    f = validate_image(f, "f") * 255.0
    h, w = f.shape
    if h < 3 or w < 3:
        raise ValueError("image must be at least 3x3")
    resp = convolve2d(f, LAPLACIAN_DIFF_KERNEL, mode="valid")
    if method == "laplacian":
        return float((resp ** 2).sum() / (36.0 * (h - 2) * (w - 2)))
    if method == "literal":
        return float(resp.sum() / (10.0 * h * w))
    raise ValueError(f"unknown method {method!r}")


def effective_variance(params):
    """Single-Gaussian equivalent variance sum_k r_k var_k of a mixture."""
    if isinstance(params, NoiseParams):
        params.validate()
        return float(np.dot(params.ratios, params.variances))
    raise TypeError("effective_variance expects NoiseParams")
