import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lipwgan.data import (
    RNG_ALGORITHM,
    LatentSpec,
    MixtureSpec,
    gaussian,
    grid_mixture,
    make_rng,
    random_mixture_pair,
    sample_latent,
    sample_mixture,
    sample_mixture_points,
    split_seed,
    standard_normal,
)

# replay contract: the first Box-Muller draws of PCG64(0)
FIRST_NORMALS_SEED0 = [1.3766350132497243, 0.7887205905387179, 0.3624497920131611, 0.08220133353931267]


class TestRng:
    def test_algorithm_recorded(self):
        assert RNG_ALGORITHM == "PCG64"
        assert isinstance(make_rng(0).bit_generator, np.random.PCG64)

    def test_frozen_stream(self):
        assert standard_normal(make_rng(0), 4).tolist() == FIRST_NORMALS_SEED0

    def test_box_muller_by_hand(self):
        u = np.random.Generator(np.random.PCG64(3)).random((2, 1))
        r = math.sqrt(-2.0 * math.log(1.0 - u[0, 0]))
        expect = [r * math.cos(2 * math.pi * u[1, 0]), r * math.sin(2 * math.pi * u[1, 0])]
        np.testing.assert_allclose(standard_normal(make_rng(3), 2), expect, rtol=1e-15)

    def test_normal_distribution(self):
        z = standard_normal(make_rng(1), 20_000)
        assert stats.kstest(z, "norm").pvalue > 1e-3

    def test_split_seed(self):
        assert split_seed(0, 0) == 15793235383387715774
        assert split_seed(12345, 7) == 13015481096164472892
        assert len({split_seed(5, i) for i in range(100)}) == 100

    def test_odd_sizes(self):
        assert standard_normal(make_rng(0), (3, 3)).shape == (3, 3)


class TestMixtureSpec:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MixtureSpec((0.5, 0.6), ((0, 0), (1, 1)), ((1, 1), (1, 1)))

    def test_positive_stddevs(self):
        with pytest.raises(ValueError):
            gaussian([0.0, 0.0], [1.0, 0.0])

    def test_json_round_trip(self):
        spec = grid_mixture(4)
        assert MixtureSpec.from_json(spec.to_json()) == spec

    def test_grid(self):
        spec = grid_mixture(9, spacing=2.0)
        assert spec.K == 9 and spec.dim == 2
        np.testing.assert_allclose(spec.mean(), [0.0, 0.0], atol=1e-15)
        with pytest.raises(ValueError):
            grid_mixture(5)


class TestSampleMixture:
    def test_near_dirac(self):
        pts = sample_mixture_points(gaussian([1.5, -2.0], 1e-12), 100, 0)
        np.testing.assert_allclose(pts, np.tile([1.5, -2.0], (100, 1)), atol=1e-9)

    def test_sample_mean(self):
        spec = MixtureSpec((0.2, 0.5, 0.3), ((0, 0), (3, -1), (-2, 4)), ((1, 1), (0.5, 2), (1, 0.3)))
        n = 100_000
        pts = sample_mixture_points(spec, n, 7)
        # mixture variance per axis = E[var] + var of means
        w, m, s = map(np.asarray, (spec.weights, spec.means, spec.stddevs))
        var = w @ (s ** 2) + w @ (m ** 2) - (w @ m) ** 2
        assert np.all(np.abs(pts.mean(axis=0) - w @ m) <= 4 * np.sqrt(var / n))

    def test_component_frequencies(self):
        spec = MixtureSpec((0.25, 0.75), ((-100, 0), (100, 0)), ((1, 1), (1, 1)))
        pts = sample_mixture_points(spec, 40_000, 2)
        frac = np.mean(pts[:, 0] < 0)
        assert abs(frac - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / 40_000)

    def test_deterministic(self):
        spec = grid_mixture(4)
        a, b = sample_mixture(spec, 50, make_rng(3)), sample_mixture(spec, 50, make_rng(3))
        assert a.points.tobytes() == b.points.tobytes() and a.unit

    def test_single_component_is_plain_gaussian(self):
        pts = sample_mixture_points(gaussian([1.0, 2.0], [0.5, 3.0]), 10, make_rng(4))
        z = standard_normal(make_rng(4), (10, 2))
        assert pts.tobytes() == (np.array([1.0, 2.0]) + np.array([0.5, 3.0]) * z).tobytes()

    def test_bad_n(self):
        with pytest.raises(ValueError):
            sample_mixture_points(grid_mixture(4), 0, 0)


class TestLatent:
    def test_uniform_support(self):
        z = sample_latent(LatentSpec(3, "uniform", 2.5), 10_000, 0)
        assert z.shape == (10_000, 3) and np.all(np.abs(z) <= 2.5)

    def test_gaussian_variance(self):
        z = sample_latent(LatentSpec(2, "gaussian", 1.7), 100_000, 1)
        np.testing.assert_allclose(z.var(axis=0), 1.7 ** 2, rtol=0.1)

    def test_deterministic(self):
        spec = LatentSpec()
        assert sample_latent(spec, 20, 5).tobytes() == sample_latent(spec, 20, 5).tobytes()

    @pytest.mark.parametrize("kw", [{"dim": 0}, {"family": "cauchy"}, {"scale": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            LatentSpec(**kw)


class TestRandomPairs:
    def test_degenerate_ranges(self):
        mu, nu = random_mixture_pair(3, make_rng(0), mean_box=(1.0, 1.0), std_range=(0.5, 0.5))
        assert mu == nu

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_default_support(self, seed):
        for spec in random_mixture_pair(4, make_rng(seed)):
            assert spec.K == 4
            assert np.all(np.abs(np.asarray(spec.means)) <= 5.0)
            s = np.asarray(spec.stddevs)
            assert np.all((s >= 0.2) & (s <= 1.0))
            assert spec.weights == (0.25,) * 4

    def test_distinct_seeds_distinct_specs(self):
        assert random_mixture_pair(4, make_rng(1)) != random_mixture_pair(4, make_rng(2))

    @pytest.mark.parametrize("kw", [{"mean_box": (1.0, -1.0)}, {"std_range": (0.0, 1.0)}, {"std_range": (2.0, 1.0)}])
    def test_invalid_ranges(self, kw):
        with pytest.raises(ValueError):
            random_mixture_pair(2, make_rng(0), **kw)
