"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The end-to-end and overfit runs are executed twice (fixtures below) so the
determinism criterion can compare their artifacts byte for byte.
"""
import json
import math
import time

import numpy as np
import pytest

from _oracles import brute_cmc, central_diff, central_diff_batched, worst_ratio, wrapped_deg
from latentfp.cli import main as cli_main
from latentfp.energy import EnergyParams, e_grad, orientation_field, reliability_field, stripes, structure_tensor, \
    total_energy
from latentfp.evalkit import (
    BIFURCATION,
    ENDING,
    ScoreMatrix,
    cmc_curve,
    cmc_from_csv,
    extract_minutiae,
    minutiae_from_binary,
)
from latentfp.nn import (
    Checkpoint,
    TrainConfig,
    TrainingSet,
    activation_backward,
    activation_forward,
    batchnorm_backward,
    batchnorm_forward,
    build_cae,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
    save_checkpoint,
    train,
    write_loss_csv,
)
from latentfp.synth import DegradeParams, SynthConfig, aligned_target, degrade, make_identity

ANGLES = (0, 30, 45, 60, 90, 120, 135, 150)
E2E_FILES = ("model.ckpt", "loss.csv", "scores_raw.csv", "scores_enhanced.csv", "cmc_raw.csv",
             "cmc_enhanced.csv", "summary.json")


# -- 1 ---------------------------------------------------------------------------

def test_c1_energy_gradient(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    # sigma 1 keeps the 7x7 smoothing kernels inside 8x8 images
    params = EnergyParams(sigma_s=1.0, sigma_o=1.0, lam=0.1)
    worst_full = worst_grad = 0.0
    for _ in range(20):
        h, w = (int(v) for v in rng.integers(8, 17, size=2))
        t, r = rng.random((h, w)), rng.random((h, w))
        rep = total_energy(t, r, params)
        stack = lambda x: np.broadcast_to(t, x.shape)
        fd = central_diff_batched(lambda x: total_energy(stack(x), x, params).e_total, r)
        worst_full = max(worst_full, worst_ratio(rep.grad_total, fd))
        g = e_grad(t, r, params)[1]
        fd_g = central_diff_batched(lambda x: e_grad(stack(x), x, params)[0], r)
        worst_grad = max(worst_grad, worst_ratio(g, fd_g))
    dt = time.perf_counter() - t0
    ok = worst_full <= 5e-4 and worst_grad <= 1e-4 and dt < 30
    report(1, "energy gradient vs finite differences", ok,
           f"worst rel err E {worst_full:.2e} (<=5e-4), E_grad {worst_grad:.2e} (<=1e-4), {dt:.1f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------

def test_c2_conv_adjoint(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        n, ci, co = (int(v) for v in rng.integers(1, 4, size=3))
        k = int(rng.integers(1, 6))
        stride = int(rng.integers(1, 4))
        h, w = (int(v) for v in rng.integers(max(k, stride), 14, size=2))
        wt = rng.standard_normal((co, ci, k, k))
        x = rng.standard_normal((n, ci, h, w))
        cx, _ = conv2d_forward(x, wt, np.zeros(co), stride)
        y = rng.standard_normal(cx.shape)
        ty, _ = conv_transpose2d_forward(y, wt.transpose(1, 0, 2, 3), np.zeros(ci), stride, out_size=(h, w))
        gap = abs(np.vdot(cx, y) - np.vdot(x, ty)) / (np.linalg.norm(x) * np.linalg.norm(y))
        worst = max(worst, gap)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    report(2, "conv_transpose is the adjoint of conv", ok, f"worst |<Ax,y>-<x,A'y>|/(|x||y|) {worst:.1e}, {dt:.1f}s")
    assert ok


# -- 3 ---------------------------------------------------------------------------

def test_c3_orientation_accuracy(report):
    t0 = time.perf_counter()
    errs, rels = [], []
    inner = (slice(12, -12), slice(12, -12))
    for a in ANGLES:
        tensor = structure_tensor(stripes(64, 64, a, 8))
        errs.append(float(np.median(wrapped_deg(orientation_field(tensor)[inner], math.radians(a)))))
        rels.append(float(np.median(reliability_field(tensor)[inner])))
    flat_r = reliability_field(structure_tensor(np.full((32, 32), 0.5)))
    dt = time.perf_counter() - t0
    ok = max(errs) <= 2.0 and min(rels) >= 0.9 and not flat_r.any() and dt < 10
    report(3, "orientation and reliability on stripes", ok,
           f"max median error {max(errs):.3f} deg, min median R {min(rels):.3f}, "
           f"constant-image R max {flat_r.max():.1f}, {dt:.1f}s")
    assert ok


# -- 4 ---------------------------------------------------------------------------

def _fd_check(fwd, args, grads, rng, rtol):
    """Worst relative error of analytic grads of <fwd(*args), P> for every argument."""
    out = fwd(*args)
    proj = rng.standard_normal(out.shape)
    analytic = grads(proj)
    worst = 0.0
    for i, (arg, g) in enumerate(zip(args, analytic)):
        def f(v, i=i):
            a = list(args)
            a[i] = v
            return float((fwd(*a) * proj).sum())
        worst = max(worst, worst_ratio(g, central_diff(f, arg)))
    return worst


def test_c4_layer_backward(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    results = {}

    x, w, b = rng.standard_normal((2, 3, 7, 6)), rng.standard_normal((4, 3, 4, 4)), rng.standard_normal(4)
    _, cache = conv2d_forward(x, w, b)
    results["conv"] = (_fd_check(lambda *a: conv2d_forward(*a)[0], (x, w, b),
                                 lambda p: conv2d_backward(p, cache), rng, 1e-4), 1e-4)

    x, w, b = rng.standard_normal((2, 4, 4, 3)), rng.standard_normal((3, 4, 4, 4)), rng.standard_normal(3)
    fwd = lambda xx, ww, bb: conv_transpose2d_forward(xx, ww, bb, 2, (7, 6))[0]
    _, cache = conv_transpose2d_forward(x, w, b, 2, (7, 6))
    results["conv_transpose"] = (_fd_check(fwd, (x, w, b), lambda p: conv_transpose2d_backward(p, cache), rng, 1e-4),
                                 1e-4)

    x, g, be = rng.standard_normal((3, 2, 4, 4)), rng.standard_normal(2), rng.standard_normal(2)
    bn = lambda xx, gg, bb: batchnorm_forward(xx, gg, bb, np.zeros(2), np.ones(2), "train")[0]
    _, cache = batchnorm_forward(x, g, be, np.zeros(2), np.ones(2), "train")
    results["batchnorm"] = (_fd_check(bn, (x, g, be), lambda p: batchnorm_backward(p, cache), rng, 1e-3), 1e-3)

    for kind in ("relu", "leaky_relu", "sigmoid"):
        x = rng.standard_normal((2, 2, 4, 4))
        x[np.abs(x) < 1e-2] = 0.3
        _, cache = activation_forward(x, kind, 0.2)
        results[kind] = (_fd_check(lambda v: activation_forward(v, kind, 0.2)[0], (x,),
                                   lambda p: (activation_backward(p, cache),), rng, 1e-4), 1e-4)
    dt = time.perf_counter() - t0
    ok = all(err <= tol for err, tol in results.values()) and dt < 60
    detail = ", ".join(f"{k} {e:.1e}" for k, (e, _) in results.items())
    report(4, "layer backward passes vs finite differences", ok, f"{detail}; {dt:.1f}s")
    assert ok


# -- 5 ---------------------------------------------------------------------------

def overfit_run(out_dir):
    """One 32x40 pair cut from the ridge-filled center of a standard master."""
    master, target, _ = make_identity(0, 0, SynthConfig())
    master, target = master[16:48, 20:60], target[16:48, 20:60]
    latent, drawn = degrade(master, DegradeParams(), [], seed=1)
    pair = TrainingSet(latent[None], aligned_target(target, drawn)[None])
    # reference optimizer settings; batch of one because there is a single pair
    cfg = TrainConfig(learning_rate=2e-4, beta1=0.5, weight_decay_mu=1e-4, lam=0.1, batch_size=1,
                      epochs=1, iterations_per_epoch=200, rng_seed=0)
    t0 = time.perf_counter()
    res = train(build_cae((1, 32, 40), stages=2, bottleneck_channels=128, seed=0), pair, cfg)
    dt = time.perf_counter() - t0
    save_checkpoint(out_dir / "overfit.ckpt", Checkpoint(res.model, res.adam, res.rng.bit_generator.state,
                                                         res.iteration))
    write_loss_csv(out_dir / "overfit_loss.csv", res.loss_log)
    return res, dt


@pytest.fixture(scope="module")
def overfit(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("overfit_a"), tmp_path_factory.mktemp("overfit_b")
    res, dt = overfit_run(a)
    overfit_run(b)
    return res, dt, a, b


def test_c5_overfit(report, overfit):
    res, dt, _, _ = overfit
    e = np.array([row[4] for row in res.loss_log])
    ma = np.convolve(e, np.ones(20) / 20, mode="valid")
    rises = int(np.count_nonzero(np.diff(ma) > 0))
    ratio = e[-1] / e[0]
    ok = ratio <= 0.1 and rises == 0 and dt < 300
    report(5, "overfit one 32x40 pair in 200 iterations", ok,
           f"E {e[0]:.4f} -> {e[-1]:.4f} (ratio {ratio:.4f} <= 0.1), moving-average rises {rises}, {dt:.1f}s")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def e2e_run(out_dir):
    t0 = time.perf_counter()
    status = cli_main(["e2e", "--out", str(out_dir), "--seed", "0"])
    return status, time.perf_counter() - t0


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("e2e_a"), tmp_path_factory.mktemp("e2e_b")
    status_a, dt = e2e_run(a)
    status_b, _ = e2e_run(b)
    return status_a, status_b, dt, a, b


def test_c6_end_to_end(report, e2e):
    status, _, dt, out, _ = e2e
    assert status == 0
    raw = cmc_from_csv((out / "cmc_raw.csv").read_text())
    enh = cmc_from_csv((out / "cmc_enhanced.csv").read_text())
    summary = json.loads((out / "summary.json").read_text())
    gain = enh[0] - raw[0]
    dominates = bool(np.all(enh[:10] >= raw[:10]))
    e_raw, e_enh = summary["mean_energy_raw"], summary["mean_energy_enhanced"]
    ok_a, ok_c = gain >= 0.10, e_enh < e_raw
    ok = ok_a and dominates and ok_c and dt < 1800
    report(6, "end-to-end identification improvement", ok,
           f"rank-1 raw {raw[0]:.3f} enhanced {enh[0]:.3f} (gain {100 * gain:+.1f} pp, need +10); "
           f"dominates ranks 1-10 {dominates}; mean E raw {e_raw:.4f} enhanced {e_enh:.4f}; {dt:.0f}s")
    assert ok


# -- 7 ---------------------------------------------------------------------------

def test_c7_cmc_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    mismatches = 0
    for _ in range(100):
        scores = rng.integers(0, 5, size=(10, 10)) / 5.0
        labels = list(range(10))
        gallery = [int(v) for v in rng.permutation(10)]
        curve, ranks = cmc_curve(ScoreMatrix(scores, labels, gallery))
        ref_curve, ref_ranks = brute_cmc(scores, labels, gallery)
        mismatches += int(not (np.array_equal(curve, ref_curve) and np.array_equal(ranks, ref_ranks)))
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 5
    report(7, "CMC equals sort-and-scan oracle with ties", ok, f"{mismatches}/100 mismatches, {dt:.2f}s")
    assert ok


# -- 8 ---------------------------------------------------------------------------

def test_c8_determinism(report, overfit, e2e):
    _, _, oa, ob = overfit
    status_a, status_b, _, ea, eb = e2e
    diffs = [n for n in ("overfit.ckpt", "overfit_loss.csv") if (oa / n).read_bytes() != (ob / n).read_bytes()]
    diffs += [n for n in E2E_FILES if (ea / n).read_bytes() != (eb / n).read_bytes()]
    ok = not diffs and status_a == status_b == 0
    report(8, "repeated runs are bitwise identical", ok,
           "overfit checkpoint/loss and e2e checkpoint, CSVs, summary identical" if ok else f"differ: {diffs}")
    assert ok


# -- 9 ---------------------------------------------------------------------------

def test_c9_minutiae_geometry(report):
    t0 = time.perf_counter()
    line = np.zeros((30, 40))
    line[15, 10:30] = 1
    m_line = extract_minutiae(line, orientation_field(structure_tensor(line)))
    line_ok = len(m_line) == 2 and all(m.kind == ENDING for m in m_line)

    y = np.zeros((40, 40))
    y[20:34, 20] = 1
    for k in range(1, 12):
        y[20 - k, 20 - k] = y[20 - k, 20 + k] = 1
    m_y = extract_minutiae(y, orientation_field(structure_tensor(y)))
    bif = [m for m in m_y if m.kind == BIFURCATION]
    y_ok = len(bif) == 1 and (bif[0].x, bif[0].y) == (20, 20)

    # 128x160 masters: a 64x80 desk master holds too few ridges for 15 minutiae
    counts = []
    cfg = SynthConfig(width=160, height=128)
    for i in range(20):
        master, target, _ = make_identity(0, i, cfg)
        counts.append(len(minutiae_from_binary(target, master)))
    counts_ok = 15 <= min(counts) and max(counts) <= 120
    dt = time.perf_counter() - t0
    ok = line_ok and y_ok and counts_ok and dt < 10
    report(9, "minutiae extractor geometry", ok,
           f"segment endings {len(m_line)}, Y bifurcations {len(bif)}, "
           f"master minutiae {min(counts)}-{max(counts)} over 20 masters, {dt:.1f}s")
    assert ok
