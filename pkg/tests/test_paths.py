import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowpaths.paths import (REFERENCE_SPECS, PairedBatch, PathFamily, PathSpec, path_point,
                             path_weights, sample_perturbation, schedule_curve, sigma_sq,
                             write_schedule_csv)

mp.mp.dps = 50

SB_VE = PathSpec(PathFamily.SB_VE, 2.6, 0.4)
SB_VE_LINEAR = PathSpec(PathFamily.SB_VE, 0.99, 0.375)
ICFM = PathSpec(PathFamily.ICFM, c=0.1)


def mp_sigma_sq(k, c, t):
    k, c, t = mp.mpf(k), mp.mpf(c), mp.mpf(t)
    return c * (k ** (2 * t) - 1) / (2 * mp.log(k))


specs = st.one_of(
    st.builds(PathSpec, st.sampled_from([PathFamily.SB_VE, PathFamily.SB_SV]),
              st.floats(0.2, 5.0).filter(lambda k: abs(k - 1) > 1e-3), st.floats(0.01, 2.0)),
    st.builds(PathSpec, st.just(PathFamily.ICFM), st.just(1.0), st.floats(0.01, 2.0)),
)


class TestSigmaSq:
    def test_zero_at_origin(self):
        assert sigma_sq(SB_VE, 0.0) == 0.0

    def test_endpoint_matches_high_precision(self):
        ref = float(mp_sigma_sq("2.6", "0.4", 1))
        assert abs(ref - 1.20563) < 1e-5
        assert sigma_sq(SB_VE, 1.0) == pytest.approx(ref, abs=1e-12)

    def test_k_to_one_limit(self):
        spec = PathSpec(PathFamily.SB_VE, 1.0, 0.4)
        # symmetric high-precision evaluation around k=1 cancels the first-order term
        ref = (mp_sigma_sq(1 + mp.mpf("1e-6"), "0.4", "0.5") + mp_sigma_sq(1 - mp.mpf("1e-6"), "0.4", "0.5")) / 2
        assert abs(float(ref) - 0.2) < 1e-9
        assert sigma_sq(spec, 0.5) == pytest.approx(0.2, abs=1e-9)

    def test_k_continuity_across_one(self):
        ts = np.linspace(0, 1, 1001)
        hi = sigma_sq(PathSpec(PathFamily.SB_VE, 1 + 1e-6, 0.4), ts)
        lo = sigma_sq(PathSpec(PathFamily.SB_VE, 1 - 1e-6, 0.4), ts)
        assert np.max(np.abs(hi - lo)) < 1e-8

    @pytest.mark.parametrize("k", [2.6, 0.99])
    def test_strictly_increasing(self, k):
        s = sigma_sq(PathSpec(PathFamily.SB_VE, k, 0.4), np.linspace(0, 1, 1001))
        assert np.all(np.diff(s) > 0)

    def test_rejects_icfm_and_bad_t(self):
        with pytest.raises(ValueError):
            sigma_sq(ICFM, 0.5)
        with pytest.raises(ValueError):
            sigma_sq(SB_VE, 1.5)
        with pytest.raises(ValueError):
            sigma_sq(SB_VE, -0.1)


class TestPathPoint:
    def test_sb_ve_midpoint(self):
        p = path_point(SB_VE, 0.5)
        k = mp.mpf("2.6")
        beta_ref = (k - 1) / (k ** 2 - 1)
        var_ref = mp_sigma_sq("2.6", "0.4", "0.5") * (1 - beta_ref)
        assert p.beta == pytest.approx(0.27778, abs=1e-5)
        assert p.beta == pytest.approx(float(beta_ref), abs=1e-14)
        assert p.var == pytest.approx(0.24187, abs=1e-5)
        assert p.var == pytest.approx(float(var_ref), abs=1e-13)

    def test_near_linear_k(self):
        assert path_point(SB_VE_LINEAR, 0.5).beta == pytest.approx(0.50251, abs=1e-5)

    def test_icfm(self):
        p = path_point(ICFM, 0.7)
        assert (p.alpha, p.beta, p.var) == pytest.approx((0.3, 0.7, 0.1), abs=1e-15)

    @pytest.mark.parametrize("spec", [SB_VE, SB_VE_LINEAR])
    def test_sb_ve_boundary_variance(self, spec):
        assert path_point(spec, 1.0).var == 0.0
        assert path_point(spec, 0.0).var == 0.0

    def test_sb_sv_constant_variance(self):
        spec = PathSpec(PathFamily.SB_SV, 2.6, 0.15)
        _, _, var = path_weights(spec, np.linspace(0, 1, 11))
        assert np.all(var == 0.15)

    def test_sb_ve_variance_peak(self):
        ts = np.linspace(0, 1, 200001)
        _, beta, var = path_weights(SB_VE, ts)
        assert np.all(var[1:-1] > 0)
        t_peak = ts[np.argmax(var)]
        t_half = ts[np.argmin(np.abs(beta - 0.5))]
        assert t_peak == pytest.approx(t_half, abs=1e-4)

    @given(spec=specs)
    @settings(max_examples=50, deadline=None)
    def test_weights_sum_to_one(self, spec):
        alpha, beta, var = path_weights(spec, np.linspace(0, 1, 1001))
        assert np.max(np.abs(alpha + beta - 1.0)) <= 1e-14
        assert np.all(var >= 0)


class TestSamplePerturbation:
    def test_boundaries_exact(self, rng):
        x0, y = rng.standard_normal(5), rng.standard_normal(5)
        assert np.array_equal(sample_perturbation(SB_VE, x0, y, 0.0, rng), x0)
        assert np.array_equal(sample_perturbation(SB_VE, x0, y, 1.0, rng), y)

    def test_icfm_variance_monte_carlo(self):
        n = 10**6
        z = np.zeros(n)
        draws = sample_perturbation(ICFM, z, z, 0.5, np.random.default_rng(0))
        band = 3 * 0.1 * np.sqrt(2.0 / (n - 1))
        assert abs(draws.var(ddof=1) - 0.1) < band

    def test_complex_noise_splits_variance(self):
        z = np.zeros((200000, 2))
        draws = sample_perturbation(ICFM, z, z, 0.5, np.random.default_rng(1), complex_valued=True)
        assert draws.var(axis=0) == pytest.approx([0.05, 0.05], rel=0.02)
        # circular: total complex variance is c
        assert np.mean(np.sum(draws**2, axis=1)) == pytest.approx(0.1, rel=0.02)

    def test_deterministic(self):
        x0, y = np.ones(4), np.zeros(4)
        a = sample_perturbation(SB_VE, x0, y, 0.3, np.random.default_rng(7))
        b = sample_perturbation(SB_VE, x0, y, 0.3, np.random.default_rng(7))
        assert a.tobytes() == b.tobytes()

    def test_per_row_times(self, rng):
        x0, y = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        out = sample_perturbation(SB_VE, x0, y, np.array([0.0, 1.0, 0.0]), rng)
        assert np.array_equal(out[0], x0[0]) and np.array_equal(out[1], y[1])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            sample_perturbation(ICFM, np.zeros(3), np.zeros(4), 0.5, rng)


class TestScheduleCurve:
    def test_straightness(self):
        dev = lambda spec: max(abs(p.beta - p.t) for p in schedule_curve(spec, 101))
        assert dev(SB_VE) > 0.2
        assert dev(SB_VE_LINEAR) < 0.005

    def test_icfm_three_points(self):
        assert [p.beta for p in schedule_curve(ICFM, 3)] == [0.0, 0.5, 1.0]

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            schedule_curve(ICFM, 1)

    def test_csv_round_trip(self, tmp_path):
        pts = schedule_curve(SB_VE, 11)
        write_schedule_csv(pts, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "t,alpha,beta,var"
        back = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert np.array_equal(back[:, 2], [p.beta for p in pts])


class TestPathSpec:
    @pytest.mark.parametrize("spec", REFERENCE_SPECS)
    def test_round_trip(self, spec):
        assert PathSpec.from_dict(spec.to_dict()) == spec

    def test_validation(self):
        with pytest.raises(ValueError):
            PathSpec(PathFamily.SB_VE, 2.6, 0.0)
        with pytest.raises(ValueError):
            PathSpec(PathFamily.SB_VE, -1.0, 0.4)
        with pytest.raises(ValueError):
            PathSpec.from_dict({"family": "sb-ve", "k": 2.6, "c": 0.4, "sigma": 1})

    def test_paired_batch(self):
        with pytest.raises(ValueError):
            PairedBatch(np.zeros((2, 3)), np.zeros((2, 4)))
        assert PairedBatch(np.zeros(3), np.ones(3)).dim == 3
