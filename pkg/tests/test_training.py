import csv
import math

import numpy as np
import pytest

from lipwgan.data import LatentSpec, gaussian, grid_mixture, make_rng, sample_latent, sample_mixture_points
from lipwgan.nets import empirical_lipschitz, generator_forward
from lipwgan.optim import OptimizerConfig
from lipwgan.ot import DiscConfig, sampler_from_generator
from lipwgan.training import (
    GeneratorConfig,
    TrainConfig,
    TrainHistory,
    evaluate_model,
    evaluation_runs,
    train_wgan,
)

SMALL = TrainConfig(generator_steps=40, batch_size=64, eval_every=20, n_eval=128)


def lipschitz_pairs(rng, dim, n=2000):
    return rng.normal(size=(n, dim)) * 2, rng.normal(size=(n, dim)) * 2


class TestTrainWgan:
    def test_dirac_collapse(self):
        m = np.array([1.0, -0.5])
        cfg = TrainConfig(generator_steps=600, batch_size=128, eval_every=600, n_eval=128, seed=1)
        gen, _, hist = train_wgan(GeneratorConfig(2, 8), DiscConfig(2, 8), gaussian(m, 1e-12), cfg)
        out = generator_forward(gen, sample_latent(LatentSpec(), 1000, make_rng(9)))
        assert np.mean(np.linalg.norm(out - m, axis=1)) <= 0.1
        assert not hist.diverged

    def test_zero_step_sizes_freeze_parameters(self):
        zero = OptimizerConfig("adam", 0.0)
        cfg = TrainConfig(generator_steps=15, batch_size=32, eval_every=15, n_eval=64,
                          disc_optimizer=zero, gen_optimizer=zero)
        g0, d0, _ = train_wgan(GeneratorConfig(3, 6), DiscConfig(2, 6), grid_mixture(4),
                               TrainConfig(generator_steps=1, batch_size=32, eval_every=1, n_eval=64,
                                           disc_optimizer=zero, gen_optimizer=zero))
        g, d, _ = train_wgan(GeneratorConfig(3, 6), DiscConfig(2, 6), grid_mixture(4), cfg)
        for a, b in zip(g0.weights + g0.biases + d0.weights + d0.biases, g.weights + g.biases + d.weights + d.biases):
            np.testing.assert_array_equal(a, b)

    def test_replay_identical_history(self, tmp_path):
        runs = []
        for i in range(2):
            _, _, hist = train_wgan(GeneratorConfig(3, 8), DiscConfig(3, 8), grid_mixture(4), SMALL)
            path = tmp_path / f"h{i}.csv"
            hist.write_csv(path)
            runs.append(path.read_bytes())
        assert runs[0] == runs[1]

    def test_history_schema(self, tmp_path):
        _, _, hist = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), grid_mixture(4), SMALL)
        assert [r.step for r in hist.records] == [0, 20, 40]
        path = tmp_path / "h.csv"
        hist.write_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == list(TrainHistory.HEADER)
        assert rows[1][-1] == "nan"

    def test_record_time(self):
        cfg = TrainConfig(generator_steps=2, batch_size=16, eval_every=1, n_eval=32, record_time=True)
        _, _, hist = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), grid_mixture(4), cfg)
        assert all(math.isfinite(r.elapsed_s) and r.elapsed_s >= 0 for r in hist.records)

    def test_invariants_at_every_evaluation(self):
        seen = []
        rng = np.random.default_rng(0)

        def check(step, gen, disc):
            seen.append(step)
            assert empirical_lipschitz(disc, lipschitz_pairs(rng, 2)) <= 1 + 1e-9
            assert empirical_lipschitz(gen, lipschitz_pairs(rng, 2)) <= gen.K1 ** gen.depth + 1e-9

        _, _, hist = train_wgan(GeneratorConfig(3, 8), DiscConfig(3, 8), grid_mixture(4), SMALL, callback=check)
        assert seen == [0, 20, 40]
        assert all(r.ipm_obj <= r.w1 + 1e-7 for r in hist.records)

    def test_finite_mode_with_fixed_dataset(self):
        data = sample_mixture_points(grid_mixture(4), 300, make_rng(0))
        cfg = TrainConfig(generator_steps=10, batch_size=32, eval_every=10, n_eval=64, mode="finite")
        _, _, hist = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), data, cfg)
        assert len(hist.records) == 2

    def test_asymptotic_needs_mixture(self):
        with pytest.raises(ValueError):
            train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), np.zeros((10, 2)), SMALL)

    def test_divergence_guard(self):
        cfg = TrainConfig(generator_steps=5, batch_size=16, eval_every=5, n_eval=32)
        _, _, hist = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), gaussian([1e7, 0.0], 1.0), cfg)
        assert hist.diverged and "diverged" in hist.message
        assert [r.step for r in hist.records] == [0]

    @pytest.mark.parametrize("kw", [{"n_critic": 0}, {"mode": "online"}, {"projection": "clip"}, {"batch_size": 0}])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    @pytest.mark.slow
    def test_training_reduces_w1(self):
        # K = 4, p = 3, q = 5: end-of-training W1 below the step-0 value in the median over seeds
        drops = []
        for seed in range(5):
            cfg = TrainConfig(generator_steps=400, eval_every=400, n_eval=256, seed=seed)
            _, _, hist = train_wgan(GeneratorConfig(3), DiscConfig(5), grid_mixture(4), cfg)
            drops.append(hist.records[-1].w1 - hist.records[0].w1)
        assert np.median(drops) < 0


class TestEvaluateModel:
    def test_self_pushforward(self):
        gen, _, _ = train_wgan(GeneratorConfig(3, 8), DiscConfig(2, 4), grid_mixture(4), SMALL)
        latent = LatentSpec()
        w1, rec = evaluate_model(gen, latent, sampler_from_generator(gen, latent), 512, 3, 0)
        w1_far, _ = evaluate_model(gen, latent, grid_mixture(4), 512, 3, 0)
        assert w1 < 0.5 * w1_far
        assert rec.value >= 0.9

    def test_untrained_recall_near_zero(self):
        g, _, _ = train_wgan(GeneratorConfig(3, 8), DiscConfig(2, 4),
                             grid_mixture(4, spacing=20.0, stddev=0.01),
                             TrainConfig(generator_steps=1, eval_every=1, n_eval=32, batch_size=16))
        _, rec = evaluate_model(g, LatentSpec(), grid_mixture(4, spacing=20.0, stddev=0.01), 512, 2, 1)
        assert rec.value <= 0.05

    def test_deterministic(self):
        g, _, _ = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), grid_mixture(4),
                             TrainConfig(generator_steps=1, eval_every=1, n_eval=32, batch_size=16))
        a = evaluate_model(g, LatentSpec(), grid_mixture(4), 128, 2, 3)
        b = evaluate_model(g, LatentSpec(), grid_mixture(4), 128, 2, 3)
        assert a == b

    def test_runs_are_child_seeded(self):
        g, _, _ = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), grid_mixture(4),
                             TrainConfig(generator_steps=1, eval_every=1, n_eval=32, batch_size=16))
        w1s, recs, ipms = evaluation_runs(g, LatentSpec(), grid_mixture(4), 64, 3, 11)
        assert len(set(w1s)) == 3 and ipms == []
        mean_w1, rec = evaluate_model(g, LatentSpec(), grid_mixture(4), 64, 3, 11)
        assert mean_w1 == float(np.mean(w1s)) and rec.value == float(np.mean(recs))

    def test_bad_args(self):
        g, _, _ = train_wgan(GeneratorConfig(2, 4), DiscConfig(2, 4), grid_mixture(4),
                             TrainConfig(generator_steps=1, eval_every=1, n_eval=32, batch_size=16))
        with pytest.raises(ValueError):
            evaluate_model(g, LatentSpec(), grid_mixture(4), 1, 1, 0)
