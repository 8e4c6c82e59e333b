import numpy as np
import pytest
import sympy as sp

from flowpaths.oracle import (ExactPredictor, GaussianWorld, PosteriorMeanPredictor, ToyDataset,
                              conditional_mean_x0_given_y, energy_distance, posterior_mean_x0,
                              read_pairs_csv, sample_pair, sample_pairs, two_arcs, write_pairs_csv)
from flowpaths.paths import REFERENCE_SPECS, PathFamily, PathSpec, path_point, sample_perturbation
from flowpaths.sampler import InferenceConfig, LossKind, ddp_infer, solve_ode

SB_VE = PathSpec(PathFamily.SB_VE, 2.6, 0.4)
ICFM = PathSpec(PathFamily.ICFM, c=0.1)


def symbolic_posterior_1d(alpha, beta, var):
    """E[x0 | x_t, y] for x0~N(0,1), y=x0+n, n~N(0,1), by completing the square."""
    x0, xt, y = sp.symbols("x0 x_t y", real=True)
    log_joint = -x0**2 / 2 - (y - x0)**2 / 2 - (xt - alpha * x0 - beta * y)**2 / (2 * var)
    return sp.solve(sp.diff(log_joint, x0), x0)[0], (xt, y)


class TestGaussianWorld:
    def test_noiseless_pairs_identical(self, rng):
        world = GaussianWorld([0.0, 1.0], np.eye(2), noise_cov=np.zeros((2, 2)))
        x0, y = sample_pair(world, rng)
        assert np.array_equal(x0, y)

    def test_standard_covariance(self):
        b = sample_pairs(GaussianWorld.standard(), np.random.default_rng(0), 10**5)
        c = np.cov(b.x0[:, 0], b.y[:, 0])[0, 1]
        assert abs(c - 1.0) < 4 * np.sqrt(2.0 / 10**5)  # sd of the product x0*y is sqrt(2)

    def test_reproducible(self):
        a = sample_pairs(GaussianWorld.standard(), np.random.default_rng(5), 10)
        b = sample_pairs(GaussianWorld.standard(), np.random.default_rng(5), 10)
        assert np.array_equal(a.x0, b.x0) and np.array_equal(a.y, b.y)

    def test_validation(self):
        with pytest.raises(ValueError):
            GaussianWorld([0.0], [[-1.0]])
        with pytest.raises(ValueError):
            GaussianWorld([0.0, 0.0], np.eye(2), A=[[1, 1], [1, 1]])


class TestConditionalMean:
    def test_standard_world(self):
        assert conditional_mean_x0_given_y(GaussianWorld.standard(), np.array([2.0]))[0] == pytest.approx(1.0)

    def test_noiseless_inverts(self, rng):
        A = np.array([[2.0, 0.5], [0.0, 1.0]])
        u = np.array([0.3, -1.0])
        world = GaussianWorld([0.0, 0.0], np.eye(2), A=A, u=u, noise_cov=np.zeros((2, 2)))
        y = rng.standard_normal(2)
        assert np.allclose(conditional_mean_x0_given_y(world, y), np.linalg.solve(A, y - u), atol=1e-12)

    def test_at_mean(self):
        world = GaussianWorld([1.5, -2.0], [[2.0, 0.3], [0.3, 1.0]], A=[[1.0, 0.2], [0.0, 1.0]], u=[0.1, 0.2])
        mean_y, _, _ = world.y_moments()
        assert np.allclose(conditional_mean_x0_given_y(world, mean_y), [1.5, -2.0], atol=1e-14)

    def test_singular_rejected(self):
        world = GaussianWorld.standard()
        world.noise_cov = np.array([[-1.0]])  # bypass validation: cov_y becomes 0
        with pytest.raises(np.linalg.LinAlgError):
            conditional_mean_x0_given_y(world, np.array([1.0]))


class TestPosteriorMean:
    def test_sb_ve_t0_returns_xt(self, rng):
        world = GaussianWorld.standard()
        b = sample_pairs(world, rng, 8)
        assert np.allclose(posterior_mean_x0(world, SB_VE, b.x0, b.y, 0.0), b.x0, atol=1e-14)

    @pytest.mark.parametrize("spec", REFERENCE_SPECS)
    def test_t1_is_conditional_mean(self, spec, rng):
        world = GaussianWorld.standard()
        y = rng.standard_normal((8, 1))
        assert np.array_equal(posterior_mean_x0(world, spec, y, y, 1.0), conditional_mean_x0_given_y(world, y))

    @pytest.mark.parametrize("spec,t", [(ICFM, 0.7), (ICFM, 1.0), (SB_VE, 0.4), (PathSpec(PathFamily.SB_SV, 2.6, 0.15), 0.9)])
    def test_matches_symbolic_and_regression(self, spec, t):
        world = GaussianWorld.standard()
        p = path_point(spec, t)
        expr, (xt, y) = symbolic_posterior_1d(sp.nsimplify(p.alpha), sp.nsimplify(p.beta), sp.nsimplify(p.var))
        coef_xt, coef_y = float(sp.diff(expr, xt)), float(sp.diff(expr, y))

        rng = np.random.default_rng(11)
        b = sample_pairs(world, rng, 400000)
        x_t = sample_perturbation(spec, b.x0, b.y, t, rng)
        design = np.column_stack([x_t[:, 0], b.y[:, 0]])
        fit, *_ = np.linalg.lstsq(design, b.x0[:, 0], rcond=None)
        assert fit == pytest.approx([coef_xt, coef_y], abs=0.01)

        probe_xt, probe_y = np.array([[0.4]]), np.array([[-1.1]])
        got = posterior_mean_x0(world, spec, probe_xt, probe_y, t)[0, 0]
        assert got == pytest.approx(coef_xt * 0.4 + coef_y * -1.1, abs=1e-12)

    def test_per_row_times(self, rng):
        world = GaussianWorld.standard()
        b = sample_pairs(world, rng, 4)
        ts = np.array([0.1, 0.5, 0.9, 1.0])
        rows = posterior_mean_x0(world, ICFM, b.x0, b.y, ts)
        for i, t in enumerate(ts):
            assert np.allclose(rows[i], posterior_mean_x0(world, ICFM, b.x0[i], b.y[i], t))

    def test_ode_reaches_mmse_floor(self):
        world = GaussianWorld.standard()
        b = sample_pairs(world, np.random.default_rng(3), 10**4)
        out = solve_ode(PosteriorMeanPredictor(world, SB_VE), b.y, InferenceConfig(SB_VE, "dp", 50))
        floor = np.mean((conditional_mean_x0_given_y(world, b.y) - b.x0) ** 2)
        assert np.mean((out - b.x0) ** 2) <= 1.05 * floor

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_ddp_with_oracle(self, kind, rng):
        world = GaussianWorld.standard()
        y = rng.standard_normal((16, 1))
        out = ddp_infer(PosteriorMeanPredictor(world, ICFM, kind), y)
        assert np.allclose(out, conditional_mean_x0_given_y(world, y), atol=1e-15)

    def test_exact_predictor_fm(self, rng):
        x0, y = rng.standard_normal(3), rng.standard_normal(3)
        assert np.array_equal(ExactPredictor(x0, "fm").predict(y, y, 0.5), x0 - y)


class TestEnergyDistance:
    def test_identical(self, rng):
        a = rng.standard_normal((50, 2))
        assert energy_distance(a, a) == 0.0

    def test_singletons(self):
        assert energy_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(10.0)

    def test_same_distribution(self):
        rng = np.random.default_rng(0)
        assert energy_distance(rng.standard_normal(10**4), rng.standard_normal(10**4)) < 0.02

    def test_shift_detected(self):
        rng = np.random.default_rng(0)
        assert energy_distance(rng.standard_normal(2000), 1 + rng.standard_normal(2000)) > 0.3

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            energy_distance(np.zeros((3, 2)), np.zeros((3, 3)))


class TestToyData:
    def test_two_arcs_geometry(self, rng):
        b = two_arcs(rng, 2000, noise_std=0.0, shift=(0.0, 0.0))
        upper = np.hypot(b.x0[:, 0], b.x0[:, 1])
        lower = np.hypot(b.x0[:, 0] - 1.0, b.x0[:, 1] - 0.5)
        assert np.all(np.isclose(upper, 1.0) | np.isclose(lower, 1.0))
        assert np.array_equal(b.x0, b.y)

    def test_degradation_stats(self):
        b = two_arcs(np.random.default_rng(0), 50000, shift=(0.6, -0.4), noise_std=0.3)
        d = b.y - b.x0
        assert d.mean(axis=0) == pytest.approx([0.6, -0.4], abs=0.01)
        assert d.std(axis=0) == pytest.approx([0.3, 0.3], rel=0.02)

    def test_dataset_reproducible(self):
        ds = ToyDataset("two-arcs-2d", seed=4)
        assert np.array_equal(ds.sample(10).y, ds.sample(10).y)
        assert not np.array_equal(ds.sample(10).y, ds.sample(10, offset=1).y)
        with pytest.raises(ValueError):
            ToyDataset("moons")

    def test_csv_round_trip(self, tmp_path):
        b = ToyDataset("two-arcs-2d").sample(20)
        write_pairs_csv(b, tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x0_0,x0_1,y_0,y_1"
        back = read_pairs_csv(tmp_path / "p.csv")
        assert np.array_equal(back.x0, b.x0) and np.array_equal(back.y, b.y)
