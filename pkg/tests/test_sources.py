import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special, stats

from rectent import sources as S
from rectent.geometry import hausdorff_integral

TWO_PI = 2.0 * math.pi
CATALOG = ["circle:uniform", "circle:vonmises:1", "circle:vonmises:4", "wishart1:normal:1",
           "wishart1:normal:2", "embed:normal:1:2", "embed:normal:2:3", "gauss:corr:0.5",
           "product:circle:uniformxcircle:vonmises:1"]


@pytest.fixture(scope="module", params=CATALOG)
def catalog_source(request):
    return S.from_catalog(request.param)


class TestCatalog:
    def test_normalization(self, catalog_source):
        total = hausdorff_integral(catalog_source.support, catalog_source.density)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_samples_on_support_with_positive_density(self, catalog_source):
        X = S.sample(catalog_source, 3, 500)
        theta, on = catalog_source.density_with_flag(X)
        assert on.all() and np.all(theta > 0)

    def test_sample_determinism(self, catalog_source):
        assert np.array_equal(S.sample(catalog_source, 99, 64), S.sample(catalog_source, 99, 64))

    def test_off_support_density_is_zero_and_flagged(self, catalog_source):
        far = 100.0 * np.arange(1.0, catalog_source.ambient_dim + 1)[None, :]
        theta, on = catalog_source.density_with_flag(far)
        assert theta[0] == 0.0 and not on[0]

    @pytest.mark.parametrize("bad", ["", "circle", "circle:nope", "circle:vonmises:x",
                                     "wishart1:normal:5", "embed:normal:3:2", "product:circle:uniform",
                                     "gauss:corr:1.5"])
    def test_bad_catalog_strings(self, bad):
        with pytest.raises(S.CatalogError):
            S.from_catalog(bad)


class TestParamDensity:
    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            S.ParamDensity(lambda z: np.full(len(z), 0.5), (0.0,), (1.0,))

    def test_vonmises_normalization_matches_bessel(self):
        # independent oracle: 2 pi I0(1) as the normalizer
        val, _ = integrate.quad(lambda t: math.exp(math.cos(t)), 0, TWO_PI, epsabs=1e-14)
        assert val == pytest.approx(TWO_PI * special.i0(1.0), rel=1e-12)
        assert S.vonmises_angle(1.0).total_mass() == pytest.approx(1.0, abs=1e-8)

    def test_inverse_cdf_sampler_distribution(self):
        d = S.vonmises_angle(1.0)
        z = d.sample(np.random.default_rng(0), 20000)[:, 0]
        ref = stats.vonmises(1.0)
        # scipy's von Mises lives on [-pi, pi)
        w = np.where(z >= math.pi, z - TWO_PI, z)
        assert stats.kstest(w, ref.cdf).pvalue > 1e-3

    def test_rejection_sampler_distribution(self):
        cov = np.array([[1.0, 0.3], [0.3, 1.0]])
        mvn = stats.multivariate_normal(cov=cov)
        d = S.ParamDensity(mvn.pdf, (-8.0, -8.0), (8.0, 8.0), name="mvn")
        Z = d.sample(np.random.default_rng(1), 20000)
        assert np.allclose(np.cov(Z.T), cov, atol=0.05)

    def test_density_zero_outside_box(self):
        assert S.uniform_angle()(np.array([[-0.1], [TWO_PI]])).tolist() == [0.0, 0.0]


class TestPushforward:
    def test_uniform_circle_constant_density(self, circle_uniform):
        X = S.sample(circle_uniform, 7, 3)
        assert np.allclose(np.sum(X ** 2, axis=1), 1.0, atol=1e-12)
        assert np.allclose(circle_uniform.density(X), 1 / TWO_PI)

    def test_circle_density_equals_angle_density(self, circle_vonmises):
        t = np.array([0.1, 1.0, 3.0, 5.5])
        P = np.column_stack([np.cos(t), np.sin(t)])
        expected = np.exp(np.cos(t)) / (TWO_PI * special.i0(1.0))
        assert np.allclose(circle_vonmises.density(P), expected, rtol=1e-12)

    def test_embedded_normal_density(self):
        s = S.from_catalog("embed:normal:1:2")
        x = np.array([[0.3, 0.0], [-1.2, 0.0]])
        assert np.allclose(s.density(x), stats.norm.pdf(x[:, 0]))
        assert s.density(np.array([[0.3, 1e-3]]))[0] == 0.0

    def test_vanishing_jacobian_rejected(self):
        flat = S.LipschitzChart(lambda t: np.zeros((len(t), 2)), (0.0,), (TWO_PI,), 2,
                                inverse=lambda p: np.zeros((len(p), 1)))
        with pytest.raises(ValueError):
            S.pushforward_source(S.uniform_angle(), flat)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            S.pushforward_source(S.uniform_angle(), S.embedding_chart(2, 2))

    def test_box_probability_matches_monte_carlo(self, circle_vonmises):
        # Pr{x in B} for the box B = [0, 1] x [0, 1]: the arc phi in [0, pi/2]
        X = S.sample(circle_vonmises, 11, 200_000)
        inside = np.all((X >= 0) & (X <= 1), axis=1)
        p_mc = inside.mean()
        se = math.sqrt(p_mc * (1 - p_mc) / len(X))
        val = hausdorff_integral(
            circle_vonmises.support,
            lambda P: circle_vonmises.density(P) * np.all((P >= 0) & (P <= 1), axis=1),
            breakpoints={0: [math.pi / 2]})
        assert abs(p_mc - val) < 3 * se


class TestWishart:
    def test_m1_density_at_one(self):
        # brute force change of variables: X = z^2, density of X at 1 is 2 phi(1) / J(1), J = 2
        s = S.from_catalog("wishart1:normal:1")
        assert s.density(np.array([[1.0]]))[0] == pytest.approx(stats.norm.pdf(1.0), rel=1e-12)
        assert stats.chi2(1).pdf(1.0) == pytest.approx(s.density(np.array([[1.0]]))[0], rel=1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_density_symmetric_in_sign(self, a, b):
        s = S.wishart1_source(2)
        z = np.array([a, b])
        if np.linalg.norm(z) < 1e-3:
            return
        X1 = np.outer(z, z).reshape(1, 4)
        X2 = np.outer(-z, -z).reshape(1, 4)
        assert s.density(X1)[0] == s.density(X2)[0]

    def test_m2_normalization_monte_carlo(self, wishart2):
        # area formula by plain Monte Carlo over the parameter box: int theta(f(z)) J(z) dz
        rng = np.random.default_rng(5)
        z = rng.uniform(-8, 8, size=(400_000, 2))
        chart = wishart2.support.charts[0]
        zf = z * np.where(z[:, :1] < 0, -1.0, 1.0)
        theta = wishart2.density(chart(zf))
        J = 2 ** 1.5 * np.sum(z ** 2, axis=1)
        # integral over the half box equals the mass; the full box counts it twice
        est = 0.5 * 256 * np.mean(theta * J)
        se = 0.5 * 256 * np.std(theta * J) / math.sqrt(len(z))
        assert abs(est - 1.0) < max(4 * se, 1e-4)

    def test_m3_closed_form_entropy_formula(self):
        m = 3
        h = S.wishart1_entropy(m)
        expect = 1.5 * math.log(TWO_PI * math.e) + math.log(2) + 1.5 * (special.digamma(1.5) + math.log(2))
        assert h == pytest.approx(expect, rel=1e-14)

    def test_unsupported_dimension(self):
        with pytest.raises(NotImplementedError):
            S.wishart1_source(4)

    def test_samples_are_rank_one(self, wishart2):
        X = S.sample(wishart2, 1, 50).reshape(50, 2, 2)
        assert np.allclose(np.linalg.det(X), 0.0, atol=1e-9)


class TestProduct:
    def test_torus_density_constant(self, torus_uniform):
        X = S.sample(torus_uniform, 2, 100)
        assert np.allclose(torus_uniform.density(X), 1 / TWO_PI ** 2)

    def test_torus_normalization(self, torus_uniform):
        assert hausdorff_integral(torus_uniform.support, torus_uniform.density) == \
            pytest.approx(1.0, abs=1e-5)

    def test_product_density_factorizes(self, circle_vonmises, circle_uniform):
        p = S.product_source(circle_vonmises, circle_uniform)
        X = S.sample(p, 4, 200)
        assert np.array_equal(p.density(X),
                              circle_vonmises.density(X[:, :2]) * circle_uniform.density(X[:, 2:]))

    def test_factor_streams_independent(self):
        p = S.from_catalog("product:circle:uniformxcircle:uniform")
        X = S.sample(p, 8, 50_000)
        a = np.arctan2(X[:, 1], X[:, 0])
        b = np.arctan2(X[:, 3], X[:, 2])
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02

    def test_product_entropy_adds(self, circle_vonmises, circle_uniform):
        p = S.product_source(circle_vonmises, circle_uniform)
        assert p.analytic_entropy == pytest.approx(
            circle_vonmises.analytic_entropy + math.log(TWO_PI))


class TestDiscreteAndRotation:
    def test_discrete_source(self):
        s = S.discrete_source([[0.0], [1.0], [2.0]], [0.5, 0.25, 0.25])
        assert s.dim == 0
        assert s.analytic_entropy == pytest.approx(1.5 * math.log(2))
        X = S.sample(s, 1, 10_000)
        assert abs(np.mean(X[:, 0] == 0.0) - 0.5) < 0.02

    def test_discrete_bad_probabilities(self):
        with pytest.raises(ValueError):
            S.discrete_source([[0.0], [1.0]], [0.5, 0.6])

    def test_rotation_preserves_density_values(self, circle_vonmises):
        a = 0.7
        Q = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        r = S.orthogonal_transform(circle_vonmises, Q)
        X = S.sample(circle_vonmises, 1, 20)
        assert np.allclose(r.density(X @ Q.T), circle_vonmises.density(X))

    def test_rotation_rejects_non_orthogonal(self, circle_uniform):
        with pytest.raises(ValueError):
            S.orthogonal_transform(circle_uniform, np.diag([1.0, 2.0]))
