"""Acceptance suite: one test per release criterion.

Each test prints a single `ACCEPTANCE <nn> <name>: PASS|FAIL` line (run
pytest with -s to see them) and then asserts.  Tolerances are pinned
here and nowhere else.
"""

from dataclasses import replace

import numpy as np
import pytest

from mixdenoise import fixtures
from mixdenoise.denoise import TvRof
from mixdenoise.em import (
    NoiseParams,
    em_fit,
    neg_log_likelihood,
    surrogate_upper_bound,
    update_params,
    update_weights,
    uniform_weights,
)
from mixdenoise.harness import EmitFlags, ExperimentConfig, run_experiment, sweep
from mixdenoise.image import psnr, save_pgm
from mixdenoise.noise import NoiseSpec, synthesize, synthesize_labeled
from mixdenoise.pipeline import GAUSSIAN_IMPULSE_MODE, SolverConfig, acwmf, restore
from mixdenoise.tv import TvConfig, divergence, gradient, solve_v, synthesis_energy
from oracles import chambolle_rof, rof_energy, subgradient_descent, synthesis_objective


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"\nACCEPTANCE {num:02d} {name}: {status}{suffix}")
    assert ok, f"criterion {num} {name} failed: {detail}"


def seed_mean_psnr(img, spec, nseeds=5):
    vals = []
    for seed in range(nseeds):
        noisy = synthesize(img, replace(spec, seed=seed))
        vals.append(psnr(img, noisy))
    return float(np.mean(vals))


def test_criterion_01_noisy_psnr_reproduction():
    cases = [
        ("texture512 mixed 10/50", fixtures.texture(512),
         NoiseSpec("gaussian-mixture", (0.7, 0.3), (10.0, 50.0)), 19.02),
        ("boxes256 mixed 15/75", fixtures.boxes(256),
         NoiseSpec("gaussian-mixture", (0.7, 0.3), (15.0, 75.0)), 15.41),
        ("blobs256 mixed 10/50 r.3/.7", fixtures.blobs(256),
         NoiseSpec("gaussian-mixture", (0.3, 0.7), (10.0, 50.0)), 15.57),
        ("texture512 gauss+uniform r=.3 s=15", fixtures.texture(512),
         NoiseSpec("gaussian-plus-random-valued", (0.7, 0.3), (15.0,)), 13.81),
    ]
    details = []
    ok = True
    for label, img, spec, target in cases:
        got = seed_mean_psnr(img, spec)
        details.append(f"{label}: {got:.3f} vs {target}")
        ok &= abs(got - target) <= 0.15
    report(1, "noisy-psnr-reproduction", ok, "; ".join(details))


def test_criterion_02_surrogate_touches_likelihood():
    rng = np.random.default_rng(7)
    worst_eq = 0.0
    worst_gap = np.inf
    for _ in range(200):
        k = int(rng.integers(1, 4))
        u = rng.random((8, 8))
        f = rng.random((8, 8))
        raw = rng.random(k) + 0.1
        params = NoiseParams(tuple(raw / raw.sum()),
                             tuple(10 ** rng.uniform(-4, -1, k)))
        w = update_weights(u, f, params, clamp=False)
        h_opt = surrogate_upper_bound(u, f, params, w, include_constants=True)
        nll = neg_log_likelihood(u, f, params)
        worst_eq = max(worst_eq, abs(h_opt - nll) / max(1.0, abs(nll)))
        if k == 1:
            # the per-pixel weight simplex is a single point: no distinct
            # competitor exists, only the equality above is checkable
            continue
        for _ in range(20):
            pert = np.clip(w + rng.normal(0.0, 0.1, w.shape), 1e-12, None)
            pert /= pert.sum(axis=0)
            h_pert = surrogate_upper_bound(u, f, params, pert, include_constants=True)
            worst_gap = min(worst_gap, h_pert - h_opt)
    ok = worst_eq <= 1e-10 and worst_gap > 0.0
    report(2, "surrogate-equality-and-bound", ok,
           f"max equality err {worst_eq:.2e}, min strict gap {worst_gap:.2e}")


def test_criterion_03_energy_descent():
    # fixed-residual EM sweeps on 64x64 fixtures
    sweep_ok = True
    worst_step = -np.inf
    for name in ("blobs", "texture"):
        img = getattr(fixtures, name)(64)
        noisy = synthesize(img, NoiseSpec("gaussian-mixture", (0.7, 0.3),
                                          (10.0, 50.0), seed=5))
        z = noisy - img
        zeros = np.zeros_like(z)
        params = NoiseParams((0.5, 0.5), (50 / 255 ** 2, 500 / 255 ** 2)).canonical()
        prev = neg_log_likelihood(z, zeros, params)
        for _ in range(50):
            w = update_weights(z, zeros, params)
            params, perm = update_params(z, zeros, w, return_permutation=True)
            nll = neg_log_likelihood(z, zeros, params)
            worst_step = max(worst_step, nll - prev)
            sweep_ok &= nll <= prev + 1e-9
            prev = nll

    # full outer loop, built-in TV denoiser, warm start off
    outer_ok = True
    worst_rel = -np.inf
    for name in ("blobs", "texture"):
        img = getattr(fixtures, name)(64)
        noisy = synthesize(img, NoiseSpec("gaussian-mixture", (0.7, 0.3),
                                          (10.0, 50.0), seed=5))
        cfg = replace(
            SolverConfig(),
            warm_start=False,
            denoiser=TvRof(),
            tol=1e-9,
            max_iters=30,
            init_params=NoiseParams.from_sigmas255((0.5, 0.5), (10.0, 50.0)).canonical(),
        )
        _, state = restore(noisy, cfg)
        nlls = [h.neg_log_likelihood for h in state.history]
        for a, b in zip(nlls, nlls[1:]):
            rel = (b - a) / abs(a)
            worst_rel = max(worst_rel, rel)
            outer_ok &= b <= a + 1e-6 * abs(a)
    report(3, "energy-descent", sweep_ok and outer_ok,
           f"worst EM step +{max(worst_step, 0):.2e}, worst outer rel {worst_rel:+.2e}")


def test_criterion_04_parameter_recovery():
    img = fixtures.texture(256)
    init = NoiseParams((0.5, 0.5), (50 / 255 ** 2, 500 / 255 ** 2)).canonical()
    ok = True
    details = []
    for seed in range(5):
        noisy = synthesize(img, NoiseSpec("gaussian-mixture", (0.7, 0.3),
                                          (10.0, 50.0), seed=seed))
        params, _ = em_fit(noisy - img, 2, init, max_iter=300, tol=1e-10)
        r2 = params.ratios[1]
        s1 = float(np.sqrt(params.variances[0]) * 255)
        s2 = float(np.sqrt(params.variances[1]) * 255)
        ok &= abs(r2 - 0.3) <= 0.05
        ok &= abs(s1 - 10.0) <= 1.0 and abs(s2 - 50.0) <= 5.0
        details.append(f"seed {seed}: r2={r2:.3f} s=({s1:.2f},{s2:.2f})")
    report(4, "parameter-recovery", ok, "; ".join(details))


def test_criterion_05_tv_solver_oracle_equivalence():
    rng = np.random.default_rng(3)
    worst = 0.0
    ok = True
    for _ in range(10):
        f = rng.random((8, 8))
        u_next = rng.random((8, 8))
        mu = 0.1 * rng.standard_normal((8, 8))
        raw = rng.random((2, 8, 8)) + 0.1
        w = raw / raw.sum(axis=0)
        params = NoiseParams((0.5, 0.5), (0.004, 0.04))
        tv_weight, coupling = 0.1, 0.8
        e_oracle = subgradient_descent(f, u_next, mu, w, params, tv_weight,
                                       coupling, iters=30000)
        cfg = TvConfig(tv_weight=tv_weight, penalty=2 * tv_weight,
                       coupling=coupling, bregman_iters=80, sweeps=30)
        v, _, _ = solve_v(f, u_next, mu, w, params, cfg)
        e_sb = synthesis_objective(v, f, u_next, mu, w, params, tv_weight, coupling)
        rel = abs(e_sb - e_oracle) / abs(e_oracle)
        worst = max(worst, rel)
        ok &= rel <= 1e-3

    # uniform weights, coupling -> 0: plain TV restoration vs dual reference
    f = rng.random((16, 16))
    weight = 0.15
    e_ref = rof_energy(chambolle_rof(f, weight, n_iter=4000), f, weight)
    params = NoiseParams((1.0,), (1.0,))
    w = uniform_weights(1, f.shape)
    cfg = TvConfig(tv_weight=weight, penalty=2 * weight, coupling=0.0,
                   bregman_iters=80, sweeps=30)
    zero = np.zeros_like(f)
    v, _, _ = solve_v(f, zero, zero, w, params, cfg)
    rel_rof = abs(rof_energy(v, f, weight) - e_ref) / abs(e_ref)
    ok &= rel_rof <= 1e-3
    report(5, "tv-solver-oracle-equivalence", ok,
           f"worst weighted rel {worst:.2e}, rof rel {rel_rof:.2e}")


def test_criterion_06_adjoint_identity():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        h = int(rng.integers(2, 24))
        w_ = int(rng.integers(2, 24))
        v = rng.standard_normal((h, w_))
        p = rng.standard_normal((2, h, w_))
        a = float((gradient(v) * p).sum())
        b = float((v * divergence(p)).sum())
        worst = max(worst, abs(a + b) / max(1.0, abs(a)))
    report(6, "adjoint-identity", worst <= 1e-12, f"worst rel {worst:.2e}")


def test_criterion_07_end_to_end_improvement():
    cfg = SolverConfig()
    ok = True
    details = []
    worst_gain = np.inf
    worst_frac = np.inf
    for name, img in fixtures.suite(256).items():
        spec = NoiseSpec("gaussian-mixture", (0.7, 0.3), (10.0, 50.0), seed=11)
        noisy, labels = synthesize_labeled(img, spec)
        u, state = restore(noisy, cfg, clean_ref=img)
        gain = psnr(img, u) - psnr(img, noisy)
        frac = float((state.weights[1][labels == 1] > 0.5).mean())
        worst_gain = min(worst_gain, gain)
        worst_frac = min(worst_frac, frac)
        ok &= gain >= 5.0 and frac >= 0.70
        details.append(f"{name} +{gain:.2f}dB w2 {frac:.2f}")
    report(7, "end-to-end-improvement", ok, "; ".join(details))


def _sweep_experiment(tmp_path, outname):
    indir = tmp_path / "in"
    indir.mkdir(exist_ok=True)
    save_pgm(fixtures.texture(128), indir / "texture.pgm")
    return ExperimentConfig(
        input=str(indir),
        noise=NoiseSpec("gaussian-mixture", (0.3, 0.7), (15.0, 50.0)),
        solver=SolverConfig(),
        seeds=(0, 1, 2),
        output=str(tmp_path / outname),
        emit=EmitFlags(restored=False, summary=True),
    )


def test_criterion_08_sweep_trends(tmp_path):
    cfg = _sweep_experiment(tmp_path, "sig")
    curve, _ = sweep(cfg, "sigma2", [float(s) for s in range(5, 55, 5)])
    sig_vals = [pt["restored_psnr_db"] for pt in curve]
    sig_ok = all(b <= a + 0.2 for a, b in zip(sig_vals, sig_vals[1:]))

    cfg = replace(_sweep_experiment(tmp_path, "rat"),
                  noise=NoiseSpec("gaussian-mixture", (0.5, 0.5), (5.0, 30.0)))
    curve, _ = sweep(cfg, "ratio", [round(0.1 * k, 1) for k in range(11)])
    rat_vals = [pt["restored_psnr_db"] for pt in curve]
    rat_ok = all(b >= a - 0.2 for a, b in zip(rat_vals, rat_vals[1:]))
    report(8, "sweep-trends", sig_ok and rat_ok,
           f"sigma2 {['%.2f' % v for v in sig_vals]}, "
           f"ratio {['%.2f' % v for v in rat_vals]}")


def test_criterion_09_impulse_path():
    img = fixtures.texture(256)
    sp_ok = True
    rv_ok = True
    for seed in range(5):
        sp = NoiseSpec("gaussian-plus-salt-pepper", (0.9, 0.1), (0.0,), seed=seed)
        noisy, labels = synthesize_labeled(img, sp)
        detected = acwmf(noisy) != noisy
        truth = labels == 1
        tp = (detected & truth).sum()
        sp_ok &= tp / detected.sum() >= 0.9 and tp / truth.sum() >= 0.9

        rv = NoiseSpec("gaussian-plus-random-valued", (0.7, 0.3), (15.0,), seed=seed)
        noisy, labels = synthesize_labeled(img, rv)
        detected = acwmf(noisy) != noisy
        truth = labels == 1
        rv_ok &= (detected & truth).sum() / truth.sum() >= 0.8

    spec = NoiseSpec("gaussian-plus-random-valued", (0.7, 0.3), (15.0,), seed=3)
    noisy = synthesize(img, spec)
    cfg = replace(SolverConfig(), mode=GAUSSIAN_IMPULSE_MODE)
    u, _ = restore(noisy, cfg, clean_ref=img)
    gain = psnr(img, u) - psnr(img, noisy)
    ok = sp_ok and rv_ok and gain >= 6.0
    report(9, "impulse-path", ok,
           f"sp_ok {sp_ok}, rv_ok {rv_ok}, restore gain +{gain:.2f}dB")


def test_criterion_10_determinism(tmp_path):
    indir = tmp_path / "in"
    indir.mkdir()
    for name, img in (("blobs", fixtures.blobs(64)), ("texture", fixtures.texture(64))):
        save_pgm(img, indir / f"{name}.pgm")

    def make(outname):
        return ExperimentConfig(
            input=str(indir),
            noise=NoiseSpec("gaussian-mixture", (0.7, 0.3), (10.0, 50.0)),
            solver=SolverConfig(),
            seeds=(0, 1),
            output=str(tmp_path / outname),
            emit=EmitFlags(restored=True, weight_maps=True, history=True),
        )

    run_experiment(make("run_a"))
    run_experiment(make("run_b"))
    a_dir = tmp_path / "run_a"
    b_dir = tmp_path / "run_b"
    names = sorted(p.name for p in a_dir.iterdir())
    assert names == sorted(p.name for p in b_dir.iterdir())
    compared = 0
    ok = True
    for name in names:
        if name.endswith((".csv", ".pgm")):
            ok &= (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
            compared += 1
    report(10, "determinism", ok and compared > 0,
           f"{compared} artifacts byte-compared")
