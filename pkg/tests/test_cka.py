import numpy as np
import pytest

from featdist.cka import cka, hsic
from featdist.errors import (
    CenteringMismatch,
    DegenerateInput,
    DimensionMismatch,
    SizeMismatch,
)
from featdist.kernels import GramMatrix, KernelSpec, gram


# --- independent oracles (explicit H, double loops; never call engine paths) ---

def oracle_kernel_matrix(z, spec, sigma=None):
    n = z.shape[0]
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if spec.kind == "linear":
                k[i, j] = z[i] @ z[j]
            elif spec.kind == "polynomial":
                k[i, j] = (z[i] @ z[j] + spec.coef) ** spec.degree
            else:
                d2 = ((z[i] - z[j]) ** 2).sum()
                k[i, j] = np.exp(-d2 / (2 * sigma * sigma))
    return k


def oracle_hsic(k, l):
    """Tr(K H L H) / (n-1)^2 with H materialized, double-loop trace."""
    n = k.shape[0]
    h = np.eye(n) - np.ones((n, n)) / n
    kc = h @ k @ h
    lc = h @ l @ h
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += kc[i, j] * lc[j, i]
    return total / (n - 1) ** 2


def oracle_cka(x, y, spec, sigma=None):
    k = oracle_kernel_matrix(x, spec, sigma)
    l = oracle_kernel_matrix(y, spec, sigma)
    return oracle_hsic(k, l) / np.sqrt(oracle_hsic(k, k) * oracle_hsic(l, l))


class TestHsic:
    def test_constant_features_zero(self):
        rng = np.random.default_rng(0)
        kx = gram(rng.standard_normal((10, 3)), KernelSpec("linear"))
        ky = gram(np.full((10, 2), 7.0), KernelSpec("linear"))
        assert hsic(kx, ky) == 0.0

    def test_hand_case(self):
        # centered K = [[1,-1],[-1,1]], K^2 = [[2,-2],[-2,2]], trace 4, /(n-1)^2 = 4
        k = GramMatrix(np.array([[1.0, -1.0], [-1.0, 1.0]]), centered=True)
        assert hsic(k, k) == pytest.approx(4.0, abs=1e-14)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((16, 4))
        w = rng.standard_normal((16, 4))
        kx = gram(z, KernelSpec("linear"))
        ky = gram(w, KernelSpec("linear"))
        expected = oracle_hsic(kx.values, ky.values)
        assert hsic(kx, ky) == pytest.approx(expected, abs=1e-10)

    def test_centered_pair_direct_trace(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((12, 3))
        kx = gram(z, KernelSpec("linear"))
        from featdist.kernels import center

        a = hsic(kx, kx)
        b = hsic(center(kx), center(kx))
        assert a == pytest.approx(b, rel=1e-12)

    def test_size_mismatch(self):
        kx = gram(np.zeros((4, 2)) + np.eye(4, 2), KernelSpec("linear"))
        ky = gram(np.eye(5, 2), KernelSpec("linear"))
        with pytest.raises(SizeMismatch):
            hsic(kx, ky)

    def test_centering_mismatch(self):
        rng = np.random.default_rng(3)
        kx = gram(rng.standard_normal((6, 2)), KernelSpec("linear"))
        from featdist.kernels import center

        with pytest.raises(CenteringMismatch):
            hsic(kx, center(kx))

    def test_nonnegative_clamp(self):
        rng = np.random.default_rng(4)
        kx = gram(rng.standard_normal((8, 2)), KernelSpec("rbf", bandwidth_override=1.0))
        assert hsic(kx, kx) >= 0.0

    def test_threads_bitwise(self):
        rng = np.random.default_rng(5)
        kx = gram(rng.standard_normal((500, 4)), KernelSpec("linear"))
        ky = gram(rng.standard_normal((500, 4)), KernelSpec("linear"))
        assert hsic(kx, ky) == hsic(kx, ky, threads=4)


class TestCka:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((40, 6))
        for spec in [
            KernelSpec("linear"),
            KernelSpec("polynomial", degree=3, coef=1.0),
            KernelSpec("rbf"),
        ]:
            assert cka(x, x, spec, seed=0).value >= 1.0 - 1e-6

    def test_isotropic_scaling_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((60, 5))
        y = rng.standard_normal((60, 5))
        base = cka(x, y, KernelSpec("linear"), seed=0).value
        scaled = cka(x, 7.3 * y, KernelSpec("linear"), seed=0).value
        assert scaled == pytest.approx(base, abs=1e-8)
        doubled = cka(x, 2.0 * x, KernelSpec("linear"), seed=0).value
        assert doubled == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_rotation_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((50, 6))
        y = rng.standard_normal((50, 6))
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        base = cka(x, y, KernelSpec("linear"), seed=0).value
        rotated = cka(x, y @ q, KernelSpec("linear"), seed=0).value
        assert rotated == pytest.approx(base, abs=1e-8)

    def test_rbf_translation_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 4))
        y = rng.standard_normal((50, 4))
        t = rng.standard_normal(4) * 10
        base = cka(x, y, KernelSpec("rbf"), seed=0).value
        shifted = cka(x + t, y + t, KernelSpec("rbf"), seed=0).value
        assert shifted == pytest.approx(base, abs=1e-8)

    def test_degenerate_input(self):
        x = np.array([[1.0], [-1.0]])
        y = np.array([[5.0], [5.0]])
        with pytest.raises(DegenerateInput):
            cka(x, y, KernelSpec("linear"), seed=0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cka(np.zeros((4, 2)), np.zeros((4, 3)), KernelSpec("linear"))

    def test_brute_force_oracle_linear(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((32, 4))
        y = rng.standard_normal((32, 4))
        expected = oracle_cka(x, y, KernelSpec("linear"))
        got = cka(x, y, KernelSpec("linear"), seed=0).value
        assert got == pytest.approx(expected, abs=1e-10)

    def test_brute_force_oracle_rbf_fixed_sigma(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((24, 3))
        y = rng.standard_normal((24, 3))
        spec = KernelSpec("rbf", bandwidth_override=2.5)
        expected = oracle_cka(x, y, spec, sigma=2.5)
        got = cka(x, y, spec, seed=0).value
        assert got == pytest.approx(expected, abs=1e-10)

    def test_brute_force_oracle_polynomial(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((20, 3))
        y = rng.standard_normal((20, 3))
        spec = KernelSpec("polynomial", degree=2, coef=1.0)
        expected = oracle_cka(x, y, spec)
        got = cka(x, y, spec, seed=0).value
        assert got == pytest.approx(expected, abs=1e-10)

    def test_bounds_random_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(4, 64))
            d = int(rng.integers(1, 16))
            x = rng.standard_normal((n, d))
            y = rng.standard_normal((n, d))
            for spec in [KernelSpec("linear"), KernelSpec("polynomial"), KernelSpec("rbf")]:
                v = cka(x, y, spec, seed=0).value
                assert 0.0 <= v <= 1.0 + 1e-9

    def test_symmetry_equal_n(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((30, 4))
        y = rng.standard_normal((30, 4))
        a = cka(x, y, KernelSpec("rbf"), seed=1).value
        b = cka(y, x, KernelSpec("rbf"), seed=1).value
        assert abs(a - b) <= 1e-10

    def test_symmetry_unequal_n_same_seed(self):
        rng = np.random.default_rng(9)
        big = rng.standard_normal((80, 4))
        small = rng.standard_normal((50, 4))
        a = cka(big, small, KernelSpec("linear"), seed=2).value
        b = cka(small, big, KernelSpec("linear"), seed=2).value
        assert a == b

    def test_unequal_n_subsamples_larger(self):
        rng = np.random.default_rng(10)
        big = rng.standard_normal((90, 3))
        small = rng.standard_normal((40, 3))
        r = cka(big, small, KernelSpec("linear"), seed=3)
        assert r.n_real == 40 and r.n_syn == 40

    def test_sample_cap_engages_with_warning(self, caplog):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((64, 3))
        y = rng.standard_normal((64, 3))
        with caplog.at_level("WARNING", logger="featdist"):
            r = cka(x, y, KernelSpec("linear"), seed=4, sample_cap=32)
        assert r.n_real == 32 and r.n_syn == 32
        assert any("cap" in rec.message for rec in caplog.records)

    def test_provenance_recorded(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((25, 4))
        y = rng.standard_normal((25, 4))
        r = cka(x, y, KernelSpec("rbf", bandwidth_fraction=0.5), norm="softmax", seed=9)
        assert r.metric == "cka"
        assert r.kernel.kind == "rbf"
        assert r.normalization.kind == "softmax"
        assert r.seed == 9
        assert r.bandwidth_used is not None and r.bandwidth_used > 0

    def test_threads_bitwise_end_to_end(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((300, 8))
        y = rng.standard_normal((300, 8))
        a = cka(x, y, KernelSpec("rbf"), seed=0, threads=1).value
        b = cka(x, y, KernelSpec("rbf"), seed=0, threads=8).value
        assert a == b
