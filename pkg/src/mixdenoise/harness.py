"""Batch experiment runner and sweep curves.

An experiment corrupts each input image with the configured noise (or
takes the input as-is for kind "none"), restores it per (image, seed)
cell and writes deterministic artifacts:

    details.csv   one row per (image, seed) cell
    summary.csv   one row per image, seed-averaged
    summary.txt   aligned text, adds wall-clock seconds per 10 outer
                  iterations (timing excluded from the CSVs so repeated
                  runs are byte-identical)
    per-cell restored/noisy PGMs, weight-map PGMs and history CSVs
    according to the emit flags

All CSV headers are fixed; see the module constants.
"""

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .image import load_pgm, psnr, save_pgm
from .noise import GAUSSIAN_MIXTURE, NoiseSpec, synthesize
from .pipeline import restore

log = logging.getLogger("mixdenoise")

DETAILS_HEADER = "image,seed,noisy_psnr_db,restored_psnr_db,iterations"
SUMMARY_HEADER = "image,seeds,noisy_psnr_db,restored_psnr_db,iterations"
HISTORY_HEADER = "iteration,neg_log_likelihood,synthesis_energy,rel_change,psnr_db"
CURVE_HEADER = "value,noisy_psnr_db,restored_psnr_db"


@dataclass(frozen=True)
class EmitFlags:
    restored: bool = True
    weight_maps: bool = False
    history: bool = False
    summary: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    input: str
    noise: NoiseSpec | None
    solver: object
    seeds: tuple = (0,)
    output: str = "out"
    emit: EmitFlags = EmitFlags()


def _fmt(x):
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.6f}"
    return str(x)


def _collect_inputs(path):
    p = Path(path)
    if p.is_dir():
        return sorted(p.glob("*.pgm"))
    return [p]


def run_experiment(cfg):
    """Run every (image, seed) cell; returns (summary_rows, n_failed).

    Unreadable inputs are skipped with a logged warning and counted in
    n_failed; callers decide the exit status.
    """
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    inputs = _collect_inputs(cfg.input)

    detail_rows = []
    n_failed = 0
    wall = {}
    for path in inputs:
        try:
            clean = load_pgm(path)
        except Exception as exc:
            log.warning("skipping %s: %s", path, exc)
            n_failed += 1
            continue
        stem = path.stem
        for seed in cfg.seeds:
            row, secs = _run_cell(cfg, outdir, stem, clean, seed)
            detail_rows.append(row)
            wall.setdefault(stem, []).append(secs)

    detail_rows.sort(key=lambda r: (r["image"], r["seed"]))
    summary_rows = _summarize(detail_rows, wall)
    if cfg.emit.summary:
        _write_csv(outdir / "details.csv", DETAILS_HEADER, (
            [r["image"], r["seed"], r["noisy_psnr_db"], r["restored_psnr_db"],
             r["iterations"]] for r in detail_rows
        ))
        _write_csv(outdir / "summary.csv", SUMMARY_HEADER, (
            [r["image"], r["seeds"], r["noisy_psnr_db"], r["restored_psnr_db"],
             r["iterations"]] for r in summary_rows
        ))
        _write_summary_text(outdir / "summary.txt", summary_rows)
    return summary_rows, n_failed


def _run_cell(cfg, outdir, stem, clean, seed):
    if cfg.noise is not None:
        noisy = synthesize(clean, replace(cfg.noise, seed=seed))
        clean_ref = clean
        noisy_db = psnr(clean, noisy)
    else:
        noisy = clean
        clean_ref = None
        noisy_db = float("nan")

    t0 = time.perf_counter()
    restored, state = restore(noisy, cfg.solver, clean_ref=clean_ref)
    secs = time.perf_counter() - t0
    restored_db = psnr(clean_ref, restored) if clean_ref is not None else float("nan")

    prefix = outdir / f"{stem}_s{seed}"
    if cfg.emit.restored:
        save_pgm(restored, f"{prefix}_restored.pgm")
        save_pgm(noisy, f"{prefix}_noisy.pgm")
    if cfg.emit.weight_maps:
        for k in range(state.weights.shape[0]):
            save_pgm(state.weights[k], f"{prefix}_w{k + 1}.pgm")
    if cfg.emit.history:
        _write_csv(f"{prefix}_history.csv", HISTORY_HEADER, (
            [h.iteration, h.neg_log_likelihood, h.synthesis_energy,
             h.rel_change, h.psnr_db] for h in state.history
        ))
    row = {
        "image": stem,
        "seed": seed,
        "noisy_psnr_db": noisy_db,
        "restored_psnr_db": restored_db,
        "iterations": state.iteration,
    }
    return row, secs


def _summarize(detail_rows, wall):
    by_image = {}
    for r in detail_rows:
        by_image.setdefault(r["image"], []).append(r)
    rows = []
    for image in sorted(by_image):
        cells = by_image[image]
        secs = wall.get(image, [0.0])
        iters = float(np.mean([c["iterations"] for c in cells]))
        per10 = 10.0 * float(np.sum(secs)) / max(
            sum(c["iterations"] for c in cells), 1
        )
        rows.append({
            "image": image,
            "seeds": len(cells),
            "noisy_psnr_db": float(np.mean([c["noisy_psnr_db"] for c in cells])),
            "restored_psnr_db": float(np.mean([c["restored_psnr_db"] for c in cells])),
            "iterations": iters,
            "secs_per_10_iters": per10,
        })
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_summary_text(path, rows):
    cols = ["image", "seeds", "noisy_psnr_db", "restored_psnr_db",
            "iterations", "secs_per_10_iters"]
    table = [cols] + [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(cols))]
    with open(path, "w", encoding="utf-8") as fh:
        for line in table:
            fh.write("  ".join(s.rjust(w) for s, w in zip(line, widths)) + "\n")


SWEEP_AXES = ("sigma2", "ratio")


def _sweep_spec(base, axis, value):
    """Noise spec for one sweep point; drops zero-ratio components."""
    if base is None or base.kind != GAUSSIAN_MIXTURE or len(base.ratios) != 2:
        raise ValueError("sweeps need a 2-component gaussian-mixture noise spec")
    if axis == "sigma2":
        return replace(base, sigmas=(base.sigmas[0], float(value)))
    if axis == "ratio":
        r1 = float(value)
        if not 0.0 <= r1 <= 1.0:
            raise ValueError(f"ratio {r1} outside [0, 1]")
        if r1 == 0.0:
            return replace(base, ratios=(1.0,), sigmas=(base.sigmas[1],))
        if r1 == 1.0:
            return replace(base, ratios=(1.0,), sigmas=(base.sigmas[0],))
        return replace(base, ratios=(r1, 1.0 - r1))
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep(cfg, axis, values):
    """Run the experiment once per axis value; returns curve rows.

    Each point writes its artifacts under output/<axis>_<value>/ and the
    aggregated (value, noisy, restored) curve lands in output/curve.csv.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    curve = []
    n_failed = 0
    for value in values:
        spec = _sweep_spec(cfg.noise, axis, value)
        sub = replace(
            cfg, noise=spec, output=str(outdir / f"{axis}_{_fmt(float(value))}")
        )
        rows, failed = run_experiment(sub)
        n_failed += failed
        noisy = float(np.mean([r["noisy_psnr_db"] for r in rows])) if rows else float("nan")
        restored = float(np.mean([r["restored_psnr_db"] for r in rows])) if rows else float("nan")
        curve.append({"value": float(value), "noisy_psnr_db": noisy,
                      "restored_psnr_db": restored})
    _write_csv(outdir / "curve.csv", CURVE_HEADER, (
        [r["value"], r["noisy_psnr_db"], r["restored_psnr_db"]] for r in curve
    ))
    return curve, n_failed
