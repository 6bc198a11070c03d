"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with its measured numbers (run with `pytest -s` to see every
line as it happens)."""

import json
import math
import time

import numpy as np
import pytest

import featdist as fd
from featdist.cli import main
from featdist.kernels import KernelSpec
from featdist.metrics import MetricConfig
from featdist.report import display_value
from featdist.robustness import (
    LabeledPool,
    attack_experiment,
    gap_noise_band,
    sample_sweep,
)
from tests.conftest import ramp_gaussians
from tests.test_cka import oracle_hsic


def report_line(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)


def test_criterion_fd_gaussian_oracle():
    name = "FD Gaussian oracle (n=20000, d=8, analytic 8.0, <10s single-thread)"
    rng_r = np.random.default_rng(1)
    rng_s = np.random.default_rng(2)
    real = rng_r.standard_normal((20000, 8))
    syn = rng_s.standard_normal((20000, 8)) + 1.0
    start = time.perf_counter()
    value = fd.frechet_from_features(real, syn).value
    elapsed = time.perf_counter() - start
    rel_err = abs(value - 8.0) / 8.0
    ok = rel_err <= 0.05 and elapsed < 10.0
    report_line(name, ok, f"FD={value:.4f} rel_err={rel_err:.3%} runtime={elapsed:.2f}s")
    assert rel_err <= 0.05
    assert elapsed < 10.0


def test_criterion_fd_identity_and_symmetry():
    name = "FD identity/symmetry (100 random moment pairs, d<=16)"
    rng = np.random.default_rng(3)
    worst_self = 0.0
    worst_asym = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 17))
        b1 = rng.standard_normal((d + 2, d))
        b2 = rng.standard_normal((d + 2, d))
        a = fd.GaussianMoments(mean=rng.standard_normal(d), cov=b1.T @ b1 / d, n_samples=d + 2)
        b = fd.GaussianMoments(mean=rng.standard_normal(d), cov=b2.T @ b2 / d, n_samples=d + 2)
        worst_self = max(worst_self, fd.frechet_distance(a, a), fd.frechet_distance(b, b))
        ab = fd.frechet_distance(a, b)
        ba = fd.frechet_distance(b, a)
        if ab > 0:
            worst_asym = max(worst_asym, abs(ab - ba) / ab)
    ok = worst_self <= 1e-8 and worst_asym <= 1e-9
    report_line(name, ok, f"max FD(x,x)={worst_self:.2e} max rel asym={worst_asym:.2e}")
    assert worst_self <= 1e-8
    assert worst_asym <= 1e-9


def test_criterion_hsic_brute_force():
    name = "HSIC brute-force equivalence (50 cases, n<=64, all kernels)"
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(4, 65))
        d = int(rng.integers(1, 9))
        x = rng.standard_normal((n, d))
        y = rng.standard_normal((n, d))
        sigma = float(rng.uniform(0.5, 3.0))
        for spec in (
            KernelSpec("linear"),
            KernelSpec("polynomial", degree=2, coef=1.0),
            KernelSpec("rbf", bandwidth_override=sigma),
        ):
            kx = fd.gram(x, spec)
            ky = fd.gram(y, spec)
            got = fd.hsic(kx, ky)
            expected = oracle_hsic(kx.values, ky.values)
            worst = max(worst, abs(got - expected))
    ok = worst <= 1e-10
    report_line(name, ok, f"max |engine - oracle| = {worst:.2e}")
    assert worst <= 1e-10


def test_criterion_cka_bounds_and_self_similarity():
    name = "CKA bounds/self-similarity (200 random pairs, all kernels)"
    rng = np.random.default_rng(5)
    specs = [KernelSpec("linear"), KernelSpec("polynomial"), KernelSpec("rbf")]
    lo, hi, worst_self = np.inf, -np.inf, 1.0
    for case in range(200):
        n = int(rng.integers(8, 257))
        d = int(rng.integers(1, 65))
        x = rng.standard_normal((n, d))
        y = rng.standard_normal((n, d))
        spec = specs[case % 3]
        v = fd.cka(x, y, spec, seed=case).value
        lo, hi = min(lo, v), max(hi, v)
        worst_self = min(worst_self, fd.cka(x, x, spec, seed=case).value)
    ok = lo >= 0.0 and hi <= 1.0 + 1e-9 and worst_self >= 1.0 - 1e-6
    report_line(name, ok, f"range=[{lo:.3e}, {hi:.6f}] min self={worst_self:.9f}")
    assert lo >= 0.0
    assert hi <= 1.0 + 1e-9
    assert worst_self >= 1.0 - 1e-6


def test_criterion_linear_kernel_invariances():
    name = "Linear-kernel invariances (x7.3 scaling, orthogonal rotation)"
    rng = np.random.default_rng(6)
    x = rng.standard_normal((120, 12))
    y = rng.standard_normal((120, 12))
    q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    base = fd.cka(x, y, KernelSpec("linear"), seed=0).value
    scaled = fd.cka(x, 7.3 * y, KernelSpec("linear"), seed=0).value
    rotated = fd.cka(x, y @ q, KernelSpec("linear"), seed=0).value
    d_scale = abs(scaled - base)
    d_rot = abs(rotated - base)
    ok = d_scale <= 1e-8 and d_rot <= 1e-8
    report_line(name, ok, f"|d_scale|={d_scale:.2e} |d_rotation|={d_rot:.2e}")
    assert d_scale <= 1e-8
    assert d_rot <= 1e-8


def test_criterion_overall_reference_values():
    name = "Overall aggregation reference values (87.22 and 81.37)"
    # four per-layer scores and six per-extractor scores on the engine's
    # [0,1] scale; printed x100 at two decimals
    layers = [0.9906, 0.8689, 0.8280, 0.8013]
    extractors = [0.6265, 0.7225, 0.8610, 0.9704, 0.7799, 0.9216]

    def mean_of(values):
        results = [
            fd.MetricResult(metric="cka", value=v, kernel=KernelSpec("rbf"),
                            n_real=10, n_syn=10)
            for v in values
        ]
        return fd.overall_score(results)

    m4 = mean_of(layers)
    m6 = mean_of(extractors)
    s4 = display_value(m4, scale=100.0)
    s6 = display_value(m6, scale=100.0)
    # printed precision: the rendered string equals the reference value;
    # the 1e-12 slack covers the float boundary of the exact-half case
    ok = (
        s4 == "87.22"
        and s6 == "81.37"
        and abs(m4 * 100 - 87.22) <= 0.005 + 1e-12
        and abs(m6 * 100 - 81.37) <= 0.005 + 1e-12
    )
    report_line(name, ok, f"mean4 -> {s4} (expect 87.22), mean6 -> {s6} (expect 81.37)")
    assert s4 == "87.22"
    assert s6 == "81.37"
    assert abs(m4 * 100 - 87.22) <= 0.005 + 1e-12
    assert abs(m6 * 100 - 81.37) <= 0.005 + 1e-12


def test_criterion_attack_harness(attack_fixture):
    name = "Attack harness (10 seeds Chosen<Random; shuffled control in noise band)"
    pool = LabeledPool(
        features=fd.FeatureMatrix(attack_fixture["pool_features"]),
        labels=attack_fixture["pool_labels"],
        num_classes=attack_fixture["num_classes"],
    )
    cfg = MetricConfig(metric="fd")
    real = attack_fixture["real"]
    real_labels = attack_fixture["real_labels"]
    gaps = [
        attack_experiment(real, pool, real_labels, 2000, cfg, seed=s).gap
        for s in range(10)
    ]
    perm = np.random.default_rng(99).permutation(pool.n)
    shuffled = LabeledPool(
        features=pool.features, labels=pool.labels[perm], num_classes=pool.num_classes
    )
    shuffled_gaps = [
        attack_experiment(real, shuffled, real_labels, 2000, cfg, seed=s).gap
        for s in range(10)
    ]
    _, band = gap_noise_band(real, pool, 2000, cfg, seeds=range(100, 120))
    all_negative = all(g < 0 for g in gaps)
    control_in_band = max(abs(g) for g in shuffled_gaps) <= band
    ok = all_negative and control_in_band
    report_line(
        name, ok,
        f"attack gaps [{min(gaps):.3f}, {max(gaps):.3f}] all<0={all_negative}; "
        f"max |shuffled gap|={max(abs(g) for g in shuffled_gaps):.3f} vs band={band:.3f}",
    )
    assert all_negative
    assert control_in_band


def test_criterion_sweep_stability():
    name = "Sweep stability analog (sizes 1K..16K: CKA range < FD range, CKA < 2%)"
    d = 64
    real = ramp_gaussians(20000, d, 20.0, seed=21)
    pool = ramp_gaussians(20000, d, 20.0, seed=22, shift=0.05)
    configs = [
        MetricConfig(metric="fd"),
        MetricConfig(metric="cka", kernel=KernelSpec("rbf"), cka_sample_cap=8000),
    ]
    sweep = sample_sweep(real, pool, [1000, 2000, 4000, 8000, 16000], configs, seed=5)
    cka_var = sweep.variation["cka[rbf]"]
    fd_var = sweep.variation["fd"]
    ok = cka_var < fd_var and cka_var < 0.02
    report_line(name, ok, f"CKA range={cka_var:.3%} FD range={fd_var:.3%}")
    assert cka_var < fd_var
    assert cka_var < 0.02


def test_criterion_determinism(tmp_path):
    name = "Determinism (byte-identical reports; blocked==unblocked Gram bitwise)"
    # identical recipe runs -> byte-identical JSON
    rng = np.random.default_rng(7)
    real = rng.standard_normal((64, 6))
    syn = rng.standard_normal((64, 6)) + 0.1
    fd.save_features(real, tmp_path / "real.npy")
    fd.save_features(syn, tmp_path / "syn.npy")
    for stem, arr in (("real", real), ("syn", syn)):
        fd.write_manifest(
            fd.FeatureManifest(
                dataset_id="fix", extractor_id="e", layer_id="l",
                n=64, d=6, dtype="float64", path=f"{stem}.npy",
            ),
            tmp_path / f"{stem}.json",
        )
    recipe = {
        "model_id": "determinism",
        "real": [{"extractor_id": "e", "layer_id": "l", "manifest": "real.json"}],
        "syn": [{"extractor_id": "e", "layer_id": "l", "manifest": "syn.json"}],
        "metrics": ["fd", "cka"],
        "kernel": {"kind": "rbf", "bandwidth_fraction": 1.0},
        "seed": 11,
    }
    (tmp_path / "recipe.json").write_text(json.dumps(recipe))
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["evaluate", "--recipe", str(tmp_path / "recipe.json"), "--out", str(out_a)]) == 0
    assert main(["evaluate", "--recipe", str(tmp_path / "recipe.json"),
                 "--out", str(out_b), "--threads", "8"]) == 0
    reports_identical = out_a.read_bytes() == out_b.read_bytes()

    z = rng.standard_normal((1000, 32))
    spec = KernelSpec("rbf", bandwidth_override=4.0)
    unblocked = fd.gram(z, spec, block_size=z.shape[0]).values
    gram_identical = all(
        np.array_equal(fd.gram(z, spec, block_size=bs, threads=t).values, unblocked)
        for bs in (1, 64, 256, 300, 4096)
        for t in (1, 4)
    )
    ok = reports_identical and gram_identical
    report_line(
        name, ok,
        f"reports byte-identical={reports_identical}, "
        f"gram bit-identical across blocks/threads={gram_identical}",
    )
    assert reports_identical
    assert gram_identical


def test_criterion_performance():
    name = "Performance (RBF CKA n=5000 d=512: <30s @1 thread, >=3x @8 threads)"
    rng = np.random.default_rng(8)
    x = rng.standard_normal((5000, 512))
    y = rng.standard_normal((5000, 512)) + 0.1
    spec = KernelSpec("rbf")
    start = time.perf_counter()
    v1 = fd.cka(x, y, spec, seed=0, threads=1).value
    t_serial = time.perf_counter() - start
    start = time.perf_counter()
    v8 = fd.cka(x, y, spec, seed=0, threads=8).value
    t_parallel = time.perf_counter() - start
    speedup = t_serial / t_parallel
    ok = t_serial < 30.0 and speedup >= 3.0
    report_line(
        name, ok,
        f"1 thread {t_serial:.2f}s; 8 threads {t_parallel:.2f}s; "
        f"speedup {speedup:.2f}x; values bitwise equal={v1 == v8}",
    )
    assert v1 == v8
    assert t_serial < 30.0
    # NOTE: unattainable on this 2-core box (hard ceiling ~2x); the
    # implementation is faithfully parallel and this assertion states the
    # criterion as written.
    assert speedup >= 3.0
