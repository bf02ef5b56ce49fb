"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The verdict lines are also collected into an "acceptance criteria" section
of the pytest terminal summary.
"""

import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from scipy.stats import spearmanr

from oracles import fd_layer_errors, grid_search_power, prox_radial_oracle, rel_err
from rslp.barrier import ball_radius_sq, prox_barrier, prox_jacobians
from rslp.channel import generate_channels, random_phases
from rslp.engine import benchmark_inference
from rslp.evaluate import DEFAULT_SNR, FEASIBILITY_TOL, SweepSpec, evaluate_point
from rslp.geometry import SlotBatch
from rslp.ipm import solve_batch, solve_slp
from rslp.model import TrainConfig, build_model, lagrangian_loss, make_batch, train
from rslp.quant import binarize, memory_estimate
from test_barrier import draw_case, fd_jacobians
from test_model import batch_of, fd_grad
from test_nn import layer_cases

TRAIN_SAMPLES = 2000
TEST_SAMPLES = 500
DELTA_SQ = 1e-4
EVAL_SNR = 20.0


def test_c01_prox_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        inst, w = draw_case(rng, inside=True)
        gamma, ups = rng.uniform(1e-3, 1.0), rng.uniform(1e-3, 5.0)
        s = np.linalg.norm(prox_barrier(inst, w, gamma, ups)) / np.linalg.norm(w)
        c = prox_radial_oracle(w, ball_radius_sq(inst), gamma, ups)
        worst = max(worst, abs(s - c) / c)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10
    assert criterion(1, "prox vs golden section", ok,
                     f"max radial rel err {worst:.2e} (<= 1e-6), {elapsed:.1f} s (< 10 s)")


def test_c02_jacobians(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        inst, w = draw_case(rng)
        gamma, ups = rng.uniform(0.01, 0.5), rng.uniform(0.05, 2.0)
        for analytic, numeric in zip(prox_jacobians(inst, w, gamma, ups), fd_jacobians(inst, w, gamma, ups, 1e-6)):
            worst = max(worst, np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 5
    assert criterion(2, "prox Jacobians vs finite differences", ok,
                     f"max rel err {worst:.2e} (<= 1e-5), {elapsed:.1f} s (< 5 s)")


def test_c03_single_user_optimum(criterion):
    t0 = time.perf_counter()
    H = generate_channels(4, 1, 200, 103).samples
    phases = random_phases(200, 1, np.random.default_rng(103))
    batch = SlotBatch.from_channels(H, phases, 10.0, 0.0, np.pi / 4)
    sol = solve_batch(batch)
    expected = batch.gamma * batch.n0 / np.sum(np.abs(H[:, 0]) ** 2, axis=1)
    err = float(np.mean(np.abs(sol.power / expected - 1)))
    elapsed = time.perf_counter() - t0
    ok = bool(sol.ok.all()) and err <= 0.01 and elapsed < 30
    assert criterion(3, "single-user closed form", ok,
                     f"mean rel err {err:.2e} (<= 1e-2), {elapsed:.1f} s (< 30 s)")


def test_c04_grid_search(criterion):
    t0 = time.perf_counter()
    H = generate_channels(2, 1, 20, 104).samples
    phases = random_phases(20, 1, np.random.default_rng(104))
    batch = SlotBatch.from_channels(H, phases, 10.0, 0.0)
    worst = 0.0
    for s in range(len(batch)):
        power = solve_slp(batch.instances(s)).power
        grid, _ = grid_search_power(batch.vectors[s].reshape(-1, 4), batch.delta_eff[s], batch.threshold[s])
        worst = max(worst, abs(power - grid) / grid)
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 300
    assert criterion(4, "solver vs exhaustive grid", ok,
                     f"max rel gap {worst:.2e} (<= 2e-2), {elapsed:.1f} s (< 300 s)")


def _exhaustive_binary(values):
    """Exact minimum of ||W - beta b||^2 over sign patterns b with optimal beta."""
    W = [Fraction(v) for v in values]
    n = len(W)
    best = None
    for b in product((-1, 1), repeat=n):
        beta = sum(w * s for w, s in zip(W, b)) / n
        err = sum((w - beta * s) ** 2 for w, s in zip(W, b))
        best = err if best is None else min(best, err)
    return best


def test_c05_binary_quantizer(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    mismatches = 0
    for _ in range(50):
        W = rng.standard_normal(rng.integers(1, 9))
        q = binarize(W)
        levels = q.levels().ravel().tolist()
        exact_beta = sum(Fraction(v) * s for v, s in zip(W.tolist(), levels)) / W.size
        err = sum((Fraction(v) - exact_beta * s) ** 2 for v, s in zip(W.tolist(), levels))
        mismatches += err != _exhaustive_binary(W.tolist()) or q.beta != float(exact_beta)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 1
    assert criterion(5, "binary quantizer optimality", ok,
                     f"{mismatches} of 50 tensors off the exact optimum, {elapsed:.2f} s (< 1 s)")


def test_c06_memory_ratios(criterion):
    t0 = time.perf_counter()
    binary = memory_estimate(build_model(4, 4, precision="binary")).ratio_vs_fp32
    ternary = memory_estimate(build_model(4, 4, precision="ternary")).ratio_vs_fp32
    elapsed = time.perf_counter() - t0
    ok = binary >= 15 and ternary >= 10 and elapsed < 1
    assert criterion(6, "memory ratios", ok,
                     f"binary {binary:.2f}x (>= 15), ternary {ternary:.2f}x (>= 10), {elapsed:.2f} s (< 1 s)")


@pytest.fixture(scope="module")
def trained():
    """Models of every precision trained on the same desk-scale dataset."""
    H = generate_channels(4, 4, TRAIN_SAMPLES, 10).samples
    cfg = TrainConfig(delta_sq=DELTA_SQ, samples=TRAIN_SAMPLES)
    models, seconds = {}, {}
    for precision in ("fp32", "binary", "ternary"):
        t0 = time.perf_counter()
        model = build_model(4, 4, precision=precision, seed=0)
        train(model, H, cfg)
        models[precision] = model
        seconds[precision] = time.perf_counter() - t0
    return models, seconds


@pytest.fixture(scope="module")
def test_slots():
    return SweepSpec(samples=TEST_SAMPLES, seed=2024).test_set()


@pytest.fixture(scope="module")
def baseline(test_slots):
    return {snr: evaluate_point("ipm", *test_slots, snr, DELTA_SQ) for snr in DEFAULT_SNR}


@pytest.mark.slow
def test_c07_learned_quality(criterion, trained, test_slots, baseline):
    models, seconds = trained
    t0 = time.perf_counter()
    row = evaluate_point("dnet_fp32", *test_slots, EVAL_SNR, DELTA_SQ, models["fp32"])
    elapsed = seconds["fp32"] + time.perf_counter() - t0
    ratio = row.mean_power / baseline[EVAL_SNR].mean_power
    ok = ratio <= 1.35 and row.feasibility_rate >= 0.9 and elapsed < 1800
    assert criterion(7, "fp32 network quality", ok,
                     f"power {ratio:.3f}x ipm (<= 1.35), feasible {row.feasibility_rate:.1%} "
                     f"(>= 90%, margin <= {FEASIBILITY_TOL:g}), {elapsed:.0f} s (< 1800 s)")


@pytest.mark.slow
def test_c08_quantized_ordering(criterion, trained, test_slots, baseline):
    models, seconds = trained
    t0 = time.perf_counter()
    sweep = {p: [evaluate_point(f"dnet_{p}", *test_slots, snr, DELTA_SQ, m).mean_power for snr in DEFAULT_SNR]
             for p, m in models.items()}
    elapsed = sum(seconds.values()) + time.perf_counter() - t0
    i = DEFAULT_SNR.index(EVAL_SNR)
    ref = baseline[EVAL_SNR].mean_power
    rb, rt = sweep["binary"][i] / ref, sweep["ternary"][i] / ref
    avg = {p: float(np.mean(v)) for p, v in sweep.items()}
    ok = (rb <= 1.6 and rt <= 1.6 and avg["fp32"] <= avg["ternary"] and avg["fp32"] <= avg["binary"]
          and elapsed < 2700)
    assert criterion(8, "quantized network ordering", ok,
                     f"binary {rb:.3f}x, ternary {rt:.3f}x ipm (<= 1.6); sweep mean power "
                     f"fp32 {avg['fp32']:.4g} vs ternary {avg['ternary']:.4g}, binary {avg['binary']:.4g} "
                     f"(fp32 lowest), {elapsed:.0f} s (< 2700 s)")


@pytest.mark.slow
def test_c09_robustness_monotonicity(criterion, trained, test_slots):
    models, _ = trained
    t0 = time.perf_counter()
    bounds = (0.0, 1e-5, 1e-4, 1e-3)
    ipm = [evaluate_point("ipm", *test_slots, 30.0, d).mean_power for d in bounds]
    net = [evaluate_point("dnet_fp32", *test_slots, 30.0, d, models["fp32"]).mean_power for d in bounds]
    rho = spearmanr(bounds, net).statistic
    elapsed = time.perf_counter() - t0
    strict = all(b > a for a, b in zip(ipm, ipm[1:]))
    ok = strict and rho >= 0.9 and elapsed < 600
    assert criterion(9, "power vs error bound", ok,
                     f"ipm strictly increasing: {strict}, network Spearman {rho:.2f} (>= 0.9), "
                     f"{elapsed:.0f} s (< 600 s)")


@pytest.mark.slow
def test_c10_latency_ordering(criterion, trained, test_slots):
    models, _ = trained
    t0 = time.perf_counter()
    model = models["fp32"]
    batch = make_batch(*test_slots, EVAL_SNR, DELTA_SQ, model)
    rows = {r.method: r.median_us for r in benchmark_inference(models, batch)}
    elapsed = time.perf_counter() - t0
    b, t, f = rows["binary"], rows["ternary"], rows["fp32"]
    ok = b <= t < f and f >= 1.5 * b and elapsed < 120
    assert criterion(10, "inference latency ordering", ok,
                     f"median binary {b:.1f} us, ternary {t:.1f} us, fp32 {f:.1f} us, "
                     f"fp32/binary {f / b:.2f} (>= 1.5), {elapsed:.0f} s (< 120 s)")


def test_c11_gradient_suite(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        for layer, x, train_mode in layer_cases(rng):
            worst = max(worst, max(fd_layer_errors(layer, x, rng, train_mode).values()))
        for form in ("exact", "scalar"):
            b = batch_of(S=4, M=3, K=2, seed=seed)
            w = rng.standard_normal((4, 6))
            ups = rng.uniform(0, 1, (4, 2, 2))
            _, grad = lagrangian_loss(b, w, ups, form=form)
            num = fd_grad(lambda: lagrangian_loss(b, w, ups, form=form)[0], w, 1e-6)
            worst = max(worst, rel_err(grad, num))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 60
    assert criterion(11, "layer and loss gradients", ok,
                     f"max rel err {worst:.2e} (<= 1e-4) over 10 seeds, {elapsed:.1f} s (< 60 s)")
