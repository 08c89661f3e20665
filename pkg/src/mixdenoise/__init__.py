"""Mixed-noise image restoration toolkit.

Grayscale images are 2-D float64 arrays on the [0, 1] intensity scale.
Noise standard deviations in user-facing configs are given on the 0-255
scale and converted internally.
"""

from .image import load_pgm, save_pgm, psnr, PgmFormatError, PgmDataError
from .noise import (
    NoiseSpec,
    synthesize,
    synthesize_labeled,
    mixture_pdf,
    impulse_mixture_pdf,
    estimate_noise_variance,
    effective_variance,
)
from .em import (
    NoiseParams,
    uniform_weights,
    neg_log_likelihood,
    surrogate_upper_bound,
    update_weights,
    update_params,
    em_fit,
)
from .tv import TvConfig, gradient, divergence, shrink, synthesis_energy, solve_v
from .denoise import (
    Identity,
    HeatDiffusion,
    TvRof,
    ExternalBridge,
    BridgeError,
    denoise,
    effective_level,
)
from .pipeline import SolverConfig, SolverState, AcwmfConfig, acwmf, init_impulse, restore

__version__ = "0.1.0"

__all__ = [
    "load_pgm", "save_pgm", "psnr", "PgmFormatError", "PgmDataError",
    "NoiseSpec", "synthesize", "synthesize_labeled", "mixture_pdf",
    "impulse_mixture_pdf", "estimate_noise_variance", "effective_variance",
    "NoiseParams", "uniform_weights", "neg_log_likelihood",
    "surrogate_upper_bound", "update_weights", "update_params", "em_fit",
    "TvConfig", "gradient", "divergence", "shrink", "synthesis_energy", "solve_v",
    "Identity", "HeatDiffusion", "TvRof", "ExternalBridge", "BridgeError",
    "denoise", "effective_level",
    "SolverConfig", "SolverState", "AcwmfConfig", "acwmf", "init_impulse", "restore",
]
