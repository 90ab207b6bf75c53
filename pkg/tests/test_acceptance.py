"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines.
Criteria 7-10 share one set of six seeded training runs (a session fixture);
everything else is exact math or fast sampling.
"""

import math
import time

import numpy as np
import pytest

from conftest import architecture_gradcheck
from inrdenoise.cli import main as cli_main
from inrdenoise.experiments import ExperimentConfig, run_compare, run_denoise
from inrdenoise.imaging import (Image, Prng, add_gaussian_noise, synth_phantom)
from inrdenoise.metrics import mad_sigma, paired_t_test, psnr, snr, ssim
from inrdenoise.models import KINDS, default_model_config
from inrdenoise.snrlab import run_corollary, run_remark_cases, run_theorem1
from inrdenoise.training import default_train_config


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------- 1-3: lab


def test_criterion_1_theorem_invariant():
    worst_ratio = math.inf
    elapsed_max = 0.0
    ok = True
    for delta in (0.1, 0.5, 0.9, 0.99):
        t0 = time.perf_counter()
        rep = run_theorem1(dim=64, delta=delta, trials=10_000, seed=0)
        dt = time.perf_counter() - t0
        elapsed_max = max(elapsed_max, dt)
        worst_ratio = min(worst_ratio, rep.min_ratio)
        ok = ok and rep.all_hold and dt < 10.0
        # the 2/(1+delta) bound holds to 1e-12 relative slack
        ok = ok and rep.min_bound_margin >= 1.0 - 1e-12
    verdict(1, ok, f"4 deltas x 10000 trials all hold, min ratio "
                   f"{worst_ratio:.4f}, max runtime {elapsed_max:.2f}s")


def test_criterion_2_remark_cases():
    rep = run_remark_cases(dim=64, seed=0)
    ok = abs(rep.worst_case_ratio - 1.0) <= 1e-12 and \
        abs(rep.best_case_ratio - 2.0) <= 1e-12
    verdict(2, ok, f"worst ratio {rep.worst_case_ratio:.15f}, "
                   f"best ratio {rep.best_case_ratio:.15f}")


def test_criterion_3_corollary_monotone():
    rep = run_corollary([0.9, 0.7, 0.5, 0.3, 0.1], dim=64, seed=0)
    ok = rep.monotone
    seq = ", ".join(f"{v:.3f}" for v in rep.snr_sequence)
    verdict(3, ok, f"supervision SNR strictly increasing: [{seq}]")


# ------------------------------------------------------------- 4: gradients


def test_criterion_4_gradient_correctness():
    t0 = time.perf_counter()
    worst = 0.0
    for kind in KINDS:
        for seed in (0, 1, 2):
            worst = max(worst, architecture_gradcheck(kind, seed))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-4 and dt < 30.0
    verdict(4, ok, f"3 architectures x 3 seeds max rel err {worst:.2e} "
                   f"in {dt:.1f}s")


# ------------------------------------------------------- 5-6: metric forms


def test_criterion_5_metric_closed_forms():
    a = Image(np.zeros((16, 16)))
    b = Image(np.full((16, 16), 0.5))
    psnr_ok = abs(psnr(a, b) - 6.0206) <= 1e-3
    comp = synth_phantom(96, 96, "composite")
    ssim_ok = ssim(comp, comp) == 1.0
    snr_ok = snr(np.ones(4), 0.5 * np.ones(4)) == 2.0
    field = Prng(77).normals(256 * 256).reshape(256, 256) * (25.0 / 255.0)
    sig = mad_sigma(field)
    mad_ok = abs(sig - 25.0) / 25.0 < 0.05
    ok = psnr_ok and ssim_ok and snr_ok and mad_ok
    verdict(5, ok, f"psnr {psnr(a, b):.4f} dB, ssim(self) 1.0 exact, "
                   f"snr 2.0 exact, mad {sig:.2f} vs 25")


def test_criterion_6_noise_calibration(composite_96):
    sample = add_gaussian_noise(composite_96, 25, 0)
    val = psnr(composite_96, sample.noisy)
    ok = 19.7 <= val <= 20.7
    verdict(6, ok, f"PSNR(clean, noisy) at sigma 25 = {val:.2f} dB "
                   f"(theory 20.17, clipping lifts)")


# ----------------------------------------------- 7-10: seeded training runs


@pytest.fixture(scope="session")
def its_runs(tmp_path_factory):
    """Six runs: SIREN defaults, composite 96x96, sigma 25, seeds 0-2, N in {0, 200}."""
    root = tmp_path_factory.mktemp("its")
    outputs = {}
    for n in (0, 200):
        cfg = ExperimentConfig(
            input="phantom:composite",
            sigma255=25.0,
            model=default_model_config("siren"),
            train=default_train_config("siren", iterations=2000, its_period=n,
                                       log_every=50),
            output_dir=str(root / f"n{n}"),
            runs_per_cell=3,
            phantom_size=(96, 96),
        )
        outputs[n] = run_denoise(cfg)
    return outputs


def test_criterion_7_its_efficacy(its_runs):
    off, on = its_runs[0], its_runs[200]
    gain = np.mean([s_on.last_psnr - s_off.last_psnr
                    for s_on, s_off in zip(on.summaries, off.summaries)])
    ssim_delta = np.mean([s_on.last_ssim - s_off.last_ssim
                          for s_on, s_off in zip(on.summaries, off.summaries)])
    walls = [s.wall_seconds for s in on.summaries + off.summaries]
    ok = gain >= 0.3 and ssim_delta >= -1e-9 and max(walls) < 300.0
    verdict(7, ok, f"mean last-PSNR gain {gain:+.3f} dB (need >= 0.3), "
                   f"SSIM delta {ssim_delta:+.4f}, slowest run {max(walls):.0f}s")


def test_criterion_8_overfitting_relief(its_runs):
    def declines(output):
        vals = []
        for records in output.records:
            curve = [r.psnr_clean for r in records]
            vals.append(max(curve) - curve[-1])
        return vals

    d_off = np.mean(declines(its_runs[0]))
    d_on = np.mean(declines(its_runs[200]))
    ok = d_off >= 0.5 and d_on < d_off
    verdict(8, ok, f"peak-to-last decline: vanilla {d_off:.3f} dB (need >= 0.5), "
                   f"substitution {d_on:.3f} dB (strictly less)")


def test_criterion_9_its_overhead(its_runs):
    w_off = np.mean([s.wall_seconds for s in its_runs[0].summaries])
    w_on = np.mean([s.wall_seconds for s in its_runs[200].summaries])
    ok = w_on <= 1.05 * w_off
    verdict(9, ok, f"wall-clock: substitution {w_on:.1f}s vs vanilla {w_off:.1f}s "
                   f"(ratio {w_on / w_off:.3f}, cap 1.05)")


def test_criterion_10_residual_noise_reduction(its_runs):
    def final_sigma(output):
        return np.mean([records[-1].sigma_hat for records in output.records])

    s_off = final_sigma(its_runs[0])
    s_on = final_sigma(its_runs[200])
    ok = s_on <= s_off
    verdict(10, ok, f"final error-map sigma-hat: substitution {s_on:.3f} "
                    f"vs vanilla {s_off:.3f} (0-255 scale)")


# ------------------------------------------------------- 11: paired t-test


def test_criterion_11_paired_significance(tmp_path):
    # 4 phantoms x 2 noise levels = 8 paired cells at desk scale
    base = dict(
        input="phantom:gradient,phantom:disk,phantom:stripes,phantom:composite",
        model=default_model_config("siren", width=32, depth=2),
        phantom_size=(48, 48),
        output_dir=str(tmp_path / "cmp"),
    )
    cfg_a = ExperimentConfig(
        train=default_train_config("siren", iterations=600, its_period=0,
                                   log_every=200), **base)
    cfg_b = ExperimentConfig(
        train=default_train_config("siren", iterations=600, its_period=150,
                                   log_every=200), **base)
    out = run_compare(cfg_a, cfg_b, sigmas=[25.0, 50.0])
    cells_ok = len(out.rows) >= 8
    direction_ok = out.mean_psnr_delta > 0
    finite_ok = math.isfinite(out.psnr_p) and 0.0 <= out.psnr_p <= 1.0

    # p-value vs a numerically integrated t-density on fixed inputs
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([0.0, 0.0, 1.0, 2.0])
    t, p = paired_t_test(a, b)
    nu = 3
    const = math.gamma((nu + 1) / 2) / (math.sqrt(nu * math.pi) * math.gamma(nu / 2))
    xs = np.linspace(abs(t), 400.0, 200_001)
    tail = float(np.trapezoid(const * (1 + xs * xs / nu) ** (-(nu + 1) / 2), xs))
    oracle_ok = abs(p - 2 * tail) <= 1e-6

    ok = cells_ok and direction_ok and finite_ok and oracle_ok
    verdict(11, ok, f"{len(out.rows)} cells, mean PSNR delta "
                    f"{out.mean_psnr_delta:+.3f} dB, p {out.psnr_p:.3e} "
                    f"{out.significance or '(n.s.)'}, oracle gap "
                    f"{abs(p - 2 * tail):.2e}")
