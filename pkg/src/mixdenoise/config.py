"""Flat key-value configuration files.

Grammar (one logical line per setting, '#' starts a comment):

    key = value
    section.key = value

Keys are dotted lowercase words.  Values are typed by the schema of the
consuming builder: integers, floats, booleans (true/false), bare or
quoted strings, and comma-separated lists.  Unknown keys are an error
so typos fail loudly (exit code 2 in the CLI).
"""

from dataclasses import replace

from .denoise import ExternalBridge, HeatDiffusion, Identity, TvRof
from .em import NoiseParams
from .noise import IMPULSE_KINDS, KINDS, NoiseSpec
from .pipeline import (
    GAUSSIAN_IMPULSE_MODE,
    GAUSSIAN_MIXTURE_MODE,
    AcwmfConfig,
    SolverConfig,
    default_init_params,
)
from .tv import TvConfig


class ConfigError(ValueError):
    """Bad key, bad value or inconsistent combination in a config."""


def parse_config_text(text):
    """Parse config text into a flat {dotted key: raw string} dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key] = value
    return out


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _convert(key, raw, kind):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "floats":
            return tuple(float(x) for x in raw.split(","))
        if kind == "ints":
            return tuple(int(x) for x in raw.split(","))
        if kind == "str":
            return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    raise AssertionError(kind)


class _Section:
    """Typed, consumed-key view over the raw dict."""

    def __init__(self, raw, consumed):
        self.raw = raw
        self.consumed = consumed

    def get(self, key, kind, default=None):
        if key not in self.raw:
            return default
        self.consumed.add(key)
        return _convert(key, self.raw[key], kind)


def build_noise_spec(raw, consumed, seed=0):
    """NoiseSpec from the noise.* keys; returns None for kind 'none'."""
    sec = _Section(raw, consumed)
    kind = sec.get("noise.kind", "str", "none")
    if kind == "none":
        return None
    if kind not in KINDS:
        raise ConfigError(f"noise.kind: unknown kind {kind!r}")
    sigmas = sec.get("noise.sigmas", "floats")
    if sigmas is None:
        raise ConfigError("noise.sigmas is required")
    if kind in IMPULSE_KINDS:
        ratio = sec.get("noise.impulse_ratio", "float")
        if ratio is None:
            raise ConfigError("noise.impulse_ratio is required for impulse kinds")
        ratios = (1.0 - ratio, ratio)
    else:
        ratios = sec.get("noise.ratios", "floats")
        if ratios is None:
            raise ConfigError("noise.ratios is required")
    spec = NoiseSpec(kind, ratios, sigmas, seed)
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None
    return spec


def build_denoiser(raw, consumed):
    sec = _Section(raw, consumed)
    kind = sec.get("denoiser.kind", "str", "tv-rof")
    if kind == "identity":
        return Identity()
    if kind == "heat":
        return HeatDiffusion(
            steps=sec.get("denoiser.steps", "int", 10),
            dt=sec.get("denoiser.dt", "float", 0.2),
        )
    if kind == "tv-rof":
        return TvRof(
            strength=sec.get("denoiser.strength", "float", 1.0),
            iters=sec.get("denoiser.iters", "int", 8),
            sweeps=sec.get("denoiser.sweeps", "int", 20),
        )
    if kind == "external":
        command = sec.get("denoiser.command", "str")
        if not command:
            raise ConfigError("denoiser.command is required for the external kind")
        return ExternalBridge(
            command=tuple(command.split()),
            timeout=sec.get("denoiser.timeout", "float", 60.0),
        )
    raise ConfigError(f"denoiser.kind: unknown kind {kind!r}")


def build_solver_config(raw, consumed):
    sec = _Section(raw, consumed)
    tv = TvConfig(
        tv_weight=sec.get("tv.weight", "float", TvConfig.tv_weight),
        penalty=sec.get("tv.penalty", "float", TvConfig.penalty),
        bregman_iters=sec.get("tv.bregman_iters", "int", TvConfig.bregman_iters),
        sweeps=sec.get("tv.sweeps", "int", TvConfig.sweeps),
        linear_tol=sec.get("tv.linear_tol", "float", TvConfig.linear_tol),
        literal_bregman_step=sec.get(
            "tv.literal_bregman_step", "bool", TvConfig.literal_bregman_step
        ),
    )
    ncomp = sec.get("solver.components", "int", 2)
    init_ratios = sec.get("solver.init_ratios", "floats")
    init_sigmas = sec.get("solver.init_sigmas", "floats")
    if (init_ratios is None) != (init_sigmas is None):
        raise ConfigError("solver.init_ratios and solver.init_sigmas go together")
    if init_ratios is not None:
        init = NoiseParams.from_sigmas255(init_ratios, init_sigmas).canonical()
    elif ncomp == 2:
        init = default_init_params()
    else:
        raise ConfigError("solver.init_ratios/init_sigmas required when components != 2")
    mode = sec.get("solver.mode", "str", GAUSSIAN_MIXTURE_MODE)
    if mode not in (GAUSSIAN_MIXTURE_MODE, GAUSSIAN_IMPULSE_MODE):
        raise ConfigError(f"solver.mode: unknown mode {mode!r}")
    acwmf_scales = sec.get("solver.acwmf_thresholds", "floats")
    acwmf_offset = sec.get("solver.acwmf_offset", "float")
    acwmf_cfg = AcwmfConfig()
    if acwmf_scales is not None:
        if len(acwmf_scales) != 4:
            raise ConfigError("solver.acwmf_thresholds needs exactly 4 values")
        acwmf_cfg = replace(acwmf_cfg, thresholds=acwmf_scales)
    if acwmf_offset is not None:
        acwmf_cfg = replace(acwmf_cfg, offset=acwmf_offset)
    cfg = SolverConfig(
        coupling=sec.get("solver.coupling", "float", 0.8),
        multiplier_step=sec.get("solver.multiplier_step", "float", 1e-2),
        tol=sec.get("solver.tol", "float", 1e-4),
        max_iters=sec.get("solver.max_iters", "int", 30),
        ncomponents=ncomp,
        init_params=init,
        denoiser=build_denoiser(raw, consumed),
        tv=tv,
        mode=mode,
        warm_start=sec.get("solver.warm_start", "bool", True),
        acwmf=acwmf_cfg,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    return cfg


def build_experiment_config(raw):
    """Full experiment setup from a parsed config dict.

    Returns an ExperimentConfig; raises ConfigError on unknown keys.
    """
    from .harness import EmitFlags, ExperimentConfig

    consumed = set()
    sec = _Section(raw, consumed)
    input_path = sec.get("input", "str")
    if not input_path:
        raise ConfigError("input is required")
    output = sec.get("output", "str")
    if not output:
        raise ConfigError("output is required")
    seeds = sec.get("seeds", "ints", (0,))
    if len(seeds) < 1:
        raise ConfigError("seeds must list at least one seed")
    emit = EmitFlags(
        restored=sec.get("emit.restored", "bool", True),
        weight_maps=sec.get("emit.weight_maps", "bool", False),
        history=sec.get("emit.history", "bool", False),
        summary=sec.get("emit.summary", "bool", True),
    )
    noise = build_noise_spec(raw, consumed)
    solver = build_solver_config(raw, consumed)
    unknown = set(raw) - consumed
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(
        input=input_path,
        noise=noise,
        solver=solver,
        seeds=tuple(seeds),
        output=output,
        emit=emit,
    )
