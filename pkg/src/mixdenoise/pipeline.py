"""Outer restoration loop: denoise, synthesize, re-estimate, classify.

One iteration runs
    1. u <- denoise(v + mult, level from current mixture params)
    2. v, d, b <- weighted-TV synthesis against u
    3. mult <- mult + step * (v - u)          (noise put back)
    4. weights <- closed-form classification under the current params
    5. params <- closed-form mixture update from those weights
    6. stop when |u_new - u_old|^2 / |u_old|^2 < tol

The classification step must precede the parameter step: the loop
starts from spatially uniform weights, and updating the parameters
first would hand every component the same variance, an exact fixed
point of the alternation that no later iteration can leave.  Running
the weight update first seeds the split from the deliberately distinct
initial variances instead.

For Gaussian-plus-impulse inputs only the initialization differs: an
adaptive center-weighted median filter flags impulse pixels, seeding a
near-binary weight field and a two-way split of a fast global variance
estimate.  The loop itself is shared unchanged.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import em
from .denoise import TvRof, denoise, effective_level
from .image import psnr, validate_image
from .noise import estimate_noise_variance
from .tv import TvConfig, solve_v, synthesis_energy

GAUSSIAN_MIXTURE_MODE = "gaussian-mixture"
GAUSSIAN_IMPULSE_MODE = "gaussian-impulse"

#: Ratio clamp for the detected impulse fraction.
_RATIO_EPS = 1e-6


@dataclass(frozen=True)
class AcwmfConfig:
    """Detection thresholds of the center-weighted median filter.

    A pixel is flagged when any of the four center-weighted median
    differences exceeds scale * local_mad + offset, with `scale` taken
    from `thresholds` (largest first, matching center weights 1,3,5,7).
    """

    thresholds: tuple = (0.8, 0.6, 0.4, 0.2)
    offset: float = 2.0 / 255.0


def default_init_params():
    """Two-component start: variances 500/255^2 and 50/255^2, sorted."""
    return em.NoiseParams(
        (0.5, 0.5), (500.0 / 255.0 ** 2, 50.0 / 255.0 ** 2)
    ).canonical()


@dataclass(frozen=True)
class SolverConfig:
    coupling: float = 0.8
    multiplier_step: float = 1e-2
    tol: float = 1e-4
    max_iters: int = 30
    ncomponents: int = 2
    init_params: em.NoiseParams = field(default_factory=default_init_params)
    denoiser: object = field(default_factory=TvRof)
    tv: TvConfig = field(default_factory=TvConfig)
    mode: str = GAUSSIAN_MIXTURE_MODE
    warm_start: bool = True
    acwmf: AcwmfConfig = field(default_factory=AcwmfConfig)

    def validate(self):
        if self.coupling <= 0:
            raise ValueError("coupling must be > 0")
        if self.multiplier_step <= 0:
            raise ValueError("multiplier_step must be > 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.ncomponents < 1:
            raise ValueError("ncomponents must be >= 1")
        if self.mode not in (GAUSSIAN_MIXTURE_MODE, GAUSSIAN_IMPULSE_MODE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == GAUSSIAN_IMPULSE_MODE and self.ncomponents != 2:
            raise ValueError("impulse mode uses exactly 2 components")
        self.init_params.validate()
        if self.init_params.ncomponents != self.ncomponents:
            raise ValueError("init_params component count does not match")
        self.tv.validate()
        return self


@dataclass
class HistoryRecord:
    iteration: int
    neg_log_likelihood: float
    synthesis_energy: float
    rel_change: float
    psnr_db: float  # nan when no clean reference was given


@dataclass
class SolverState:
    u: np.ndarray
    v: np.ndarray
    multiplier: np.ndarray
    d: np.ndarray
    b: np.ndarray
    params: em.NoiseParams
    weights: np.ndarray
    iteration: int
    history: list


def _cwm_median(windows, center, weight):
    """Median of the 3x3 window with the center counted `weight` times."""
    if weight == 1:
        return np.median(windows, axis=0)
    stack = np.concatenate(
        [windows, np.repeat(center[None], weight - 1, axis=0)], axis=0
    )
    return np.median(stack, axis=0)


def acwmf(f, cfg=None):
    """Adaptive center-weighted median filter (3x3, center weights 1,3,5,7).

    Flagged pixels are replaced by the plain 3x3 median; everything else
    passes through untouched.  Boundaries use replicate padding.
    """
    f = validate_image(f, "f")
    if f.shape[0] < 3 or f.shape[1] < 3:
        raise ValueError("image must be at least 3x3")
    cfg = cfg or AcwmfConfig()
    pad = np.pad(f, 1, mode="edge")
    windows = np.stack(
        [pad[i:i + f.shape[0], j:j + f.shape[1]] for i in range(3) for j in range(3)]
    )
    median = np.median(windows, axis=0)
    mad = np.median(np.abs(windows - median[None]), axis=0)

    detected = np.zeros(f.shape, dtype=bool)
    for weight, scale in zip((1, 3, 5, 7), cfg.thresholds):
        cwm = _cwm_median(windows, f, weight)
        detected |= np.abs(cwm - f) > scale * mad + cfg.offset
    return np.where(detected, median, f)


def init_impulse(f, cfg):
    """Impulse-aware initialization: (weight field, mixture params).

    Pixels the median filter leaves untouched seed the Gaussian
    component, flagged pixels the impulse component (weights clamped
    just inside (0, 1)).  The global variance estimate is split 1:9
    between the two components and the ratio is the detected fraction.
    """
    f = validate_image(f, "f")
    filtered = acwmf(f, cfg.acwmf)
    impulse_mask = filtered != f
    eps = em.WEIGHT_EPS
    w_impulse = np.where(impulse_mask, 1.0 - eps, eps)
    weights = np.stack([1.0 - w_impulse, w_impulse])
    frac = float(np.clip(impulse_mask.mean(), _RATIO_EPS, 1.0 - _RATIO_EPS))
    var = estimate_noise_variance(f) / 255.0 ** 2
    var = max(var, 10.0 * em.VARIANCE_FLOOR)
    params = em.NoiseParams((1.0 - frac, frac), (var / 10.0, 9.0 * var / 10.0))
    return weights, params.validate()


def restore(f, cfg, clean_ref=None, callback=None, initial=None):
    """Run the full mixed-noise restoration; returns (u, SolverState).

    `initial` optionally overrides the (weights, params) starting point;
    when absent it comes from the mode (uniform weights and
    cfg.init_params for Gaussian mixtures, the median-filter detector
    for impulse mode).  `callback(state)` runs after every iteration.
    """
    f = validate_image(f, "f")
    cfg.validate()
    if clean_ref is not None:
        clean_ref = validate_image(clean_ref, "clean_ref")
        if clean_ref.shape != f.shape:
            raise ValueError("clean_ref shape does not match input")

    if initial is not None:
        weights, params = initial
        weights = em.validate_weights(weights)
        params = params.validate()
    elif cfg.mode == GAUSSIAN_IMPULSE_MODE:
        weights, params = init_impulse(f, cfg)
    else:
        weights = em.uniform_weights(cfg.ncomponents, f.shape)
        params = cfg.init_params

    tv_cfg = replace(cfg.tv, coupling=cfg.coupling)
    v = f.copy()
    mult = np.zeros_like(f)
    warm = None
    u_prev = None
    history = []
    state = None

    for it in range(1, cfg.max_iters + 1):
        level = effective_level(params)
        u = denoise(v + mult, level, cfg.denoiser)
        _check_finite(u, "denoiser output", it)

        v, d, b = solve_v(f, u, mult, weights, params, tv_cfg, warm=warm)
        _check_finite(v, "synthesis step", it)
        if cfg.warm_start:
            warm = (v, d, b)
        energy = synthesis_energy(
            v, f, u, mult, weights, params, tv_cfg.tv_weight, cfg.coupling
        )

        mult = mult + cfg.multiplier_step * (v - u)

        weights = em.update_weights(u, f, params)
        params, perm = em.update_params(u, f, weights, return_permutation=True)
        weights = weights[perm]

        if u_prev is None:
            rel = math.inf
        else:
            denom = float((u_prev ** 2).sum())
            rel = float(((u - u_prev) ** 2).sum()) / max(denom, np.finfo(float).tiny)
        nll = em.neg_log_likelihood(u, f, params)
        quality = psnr_or_nan(clean_ref, u)
        history.append(HistoryRecord(it, nll, energy, rel, quality))
        u_prev = u

        state = SolverState(u, v, mult, d, b, params, weights, it, history)
        if callback is not None:
            callback(state)
        if rel < cfg.tol:
            break

    return u_prev, state


def psnr_or_nan(clean_ref, u):
    if clean_ref is None:
        return float("nan")
    return psnr(clean_ref, u)


def _check_finite(arr, what, iteration):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(
            f"non-finite values after {what} at outer iteration {iteration}"
        )
