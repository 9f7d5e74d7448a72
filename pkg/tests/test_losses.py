"""Loss math against independent 64-bit oracles and spec'd properties."""

import math

import numpy as np
import pytest

from compoundcl import losses
from compoundcl.errors import ShapeError


def oracle_softmax(z, t):
    z = np.asarray(z, dtype=np.float64) / t
    e = np.exp(z - z.max())
    return e / e.sum()


def entropy(p):
    p = np.asarray(p, dtype=np.float64)
    return float(-(p[p > 0] * np.log(p[p > 0])).sum())


class TestTemperatureSoftmax:
    def test_uniform_for_constant_logits(self):
        for t in (0.5, 1.0, 3.0):
            np.testing.assert_allclose(
                losses.softmax_with_temperature([0.0, 0.0, 0.0], t), np.full(3, 1 / 3), atol=1e-12
            )

    def test_worked_value_t1(self):
        got = losses.softmax_with_temperature([2.0, 1.0, 0.0], 1.0)
        np.testing.assert_allclose(got, oracle_softmax([2, 1, 0], 1.0), atol=1e-12)
        np.testing.assert_allclose(got, [0.6652, 0.2447, 0.0900], atol=5e-5)

    def test_worked_value_t3_smooths(self):
        p1 = losses.softmax_with_temperature([2.0, 1.0, 0.0], 1.0)
        p3 = losses.softmax_with_temperature([2.0, 1.0, 0.0], 3.0)
        np.testing.assert_allclose(p3, oracle_softmax([2, 1, 0], 3.0), atol=1e-12)
        np.testing.assert_allclose(p3, [0.4484, 0.3213, 0.2302], atol=5e-5)
        assert entropy(p3) > entropy(p1)

    def test_rows_sum_to_one_and_rank_preserved(self, rng):
        z = rng.normal(0, 5, size=(200, 7))
        for t in (0.5, 1.0, 2.0, 3.0, 5.0):
            p = losses.softmax_with_temperature(z, t)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
            assert np.array_equal(np.argsort(p, axis=1), np.argsort(z, axis=1))

    def test_entropy_strictly_increases_with_temperature(self, rng):
        temps = [0.5, 1.0, 2.0, 3.0, 5.0]
        for _ in range(20):
            z = rng.normal(0, 3, size=6)
            if np.allclose(z, z[0]):
                continue
            ents = [entropy(losses.softmax_with_temperature(z, t)) for t in temps]
            assert all(b > a for a, b in zip(ents, ents[1:]))

    def test_stability_under_huge_logits(self):
        p = losses.softmax_with_temperature([1000.0, 0.0, -1000.0], 1.0)
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p.sum(), 1.0, atol=1e-12)

    def test_invalid_temperature(self):
        with pytest.raises(ValueError):
            losses.softmax_with_temperature([1.0, 2.0], 0.0)
        with pytest.raises(ValueError):
            losses.softmax_with_temperature([1.0, 2.0], -2.0)


class TestCrossEntropy:
    def test_perfect_prediction_is_zero_within_clamp(self):
        assert losses.cross_entropy([1, 0, 0], [1.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)

    def test_worked_value(self):
        p = oracle_softmax([2, 1, 0], 1.0)
        expected = -math.log(p[0])
        assert losses.cross_entropy([1, 0, 0], p) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.4077, abs=2e-4)

    def test_uniform_gives_log_k(self):
        assert losses.cross_entropy([0, 0, 1], np.full(3, 1 / 3)) == pytest.approx(math.log(3), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            losses.cross_entropy([1, 0], [0.5, 0.25, 0.25])


class TestDistillationLoss:
    def test_matching_peaked_distributions(self):
        assert losses.distillation_loss([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)

    def test_worked_value_with_padding(self):
        # padded teacher entry contributes nothing: -(0.5+0.5) ln 0.4 = -ln 0.4
        got = losses.distillation_loss([0.5, 0.5, 0.0], [0.4, 0.4, 0.2])
        assert got == pytest.approx(-math.log(0.4), abs=1e-12)
        assert got == pytest.approx(0.9163, abs=5e-5)

    def test_self_distillation_equals_entropy(self, rng):
        for _ in range(10):
            p = rng.dirichlet(np.ones(5))
            assert losses.distillation_loss(p, p) == pytest.approx(entropy(p), abs=1e-9)

    def test_negative_teacher_rejected(self):
        with pytest.raises(ValueError):
            losses.distillation_loss([-0.1, 1.1, 0.0], [0.3, 0.3, 0.4])

    def test_padding_neutrality(self, rng):
        # diverting student mass to teacher-unsupported padded classes never
        # decreases the loss
        for _ in range(25):
            k, extra = 5, 3
            t = rng.dirichlet(np.ones(k))
            s = rng.dirichlet(np.ones(k))
            base = losses.distillation_loss(t, s)
            tp = losses.zero_pad_targets(t, k + extra)
            leak = rng.uniform(0.05, 0.5)
            sp = np.concatenate([s * (1 - leak), np.full(extra, leak / extra)])
            assert losses.distillation_loss(tp, sp) >= base - 1e-12

    def test_zero_pad_targets_exact_zeros(self):
        padded = losses.zero_pad_targets(np.array([[0.6, 0.4]]), 5)
        assert padded.shape == (1, 5)
        assert np.all(padded[:, 2:] == 0.0)


class TestCombinedLoss:
    def _parts(self):
        p = oracle_softmax([2, 1, 0], 1.0)
        ce = losses.cross_entropy([1, 0, 0], p)
        dist = losses.distillation_loss([0.5, 0.5, 0.0], [0.4, 0.4, 0.2])
        return p, ce, dist

    def test_gamma_zero_is_exactly_cross_entropy(self):
        p, ce, _ = self._parts()
        got = losses.combined_loss([1, 0, 0], p, [0.5, 0.5, 0.0], [0.4, 0.4, 0.2], 0.0)
        assert got == ce

    def test_gamma_one_is_exactly_distillation(self):
        p, _, dist = self._parts()
        got = losses.combined_loss([1, 0, 0], p, [0.5, 0.5, 0.0], [0.4, 0.4, 0.2], 1.0)
        assert got == dist

    def test_worked_convex_combination(self):
        p, ce, dist = self._parts()
        got = losses.combined_loss([1, 0, 0], p, [0.5, 0.5, 0.0], [0.4, 0.4, 0.2], 0.1)
        assert got == pytest.approx(0.9 * ce + 0.1 * dist, abs=1e-12)
        assert got == pytest.approx(0.9 * 0.4077 + 0.1 * 0.9163, abs=1e-4)

    def test_gamma_out_of_range(self):
        p, *_ = self._parts()
        for g in (-0.1, 1.1):
            with pytest.raises(ValueError):
                losses.combined_loss([1, 0, 0], p, [0.5, 0.5, 0.0], [0.4, 0.4, 0.2], g)


class TestGammaDecay:
    def test_decay_factor_matches_closed_form(self):
        assert losses.GAMMA_DECAY_FACTOR == pytest.approx(math.exp(-1.0 / (1.0 + math.e)), abs=0)
        assert losses.GAMMA_DECAY_FACTOR == pytest.approx(0.76419, abs=5e-6)

    def test_first_step_from_default_weight(self):
        assert losses.gamma_decay(0.1) == pytest.approx(0.1 * math.exp(-1 / (1 + math.e)), abs=1e-15)
        assert losses.gamma_decay(0.1) == pytest.approx(0.076419, abs=5e-6)

    def test_sequence_is_geometric_and_positive(self):
        g = 0.1
        ratio = math.exp(-1.0 / (1.0 + math.e))
        for n in range(1, 60):
            g = losses.gamma_decay(g)
            assert g > 0.0
            assert g == pytest.approx(0.1 * ratio**n, rel=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            losses.gamma_decay(0.0)


class TestLossGradient:
    @pytest.mark.parametrize("gamma", [0.0, 0.1, 0.5, 1.0])
    def test_matches_finite_differences(self, gamma, rng):
        n, k = 4, 6
        z = rng.normal(0, 2, size=(n, k))
        y = np.eye(k)[rng.integers(0, k, n)]
        t = losses.zero_pad_targets(rng.dirichlet(np.ones(4), size=n), k)
        temp = 3.0

        def mean_loss(zz):
            p = losses.softmax_with_temperature(zz, 1.0)
            s = losses.softmax_with_temperature(zz, temp)
            return losses.combined_loss(y, p, t, s, gamma)

        grad = losses.combined_loss_grad(z, y, t, temp, gamma)
        eps = 1e-6
        for _ in range(30):
            i, j = rng.integers(0, n), rng.integers(0, k)
            zp = z.copy()
            zp[i, j] += eps
            zm = z.copy()
            zm[i, j] -= eps
            fd = (mean_loss(zp) - mean_loss(zm)) / (2 * eps)
            assert abs(fd - grad[i, j]) <= 1e-4 * max(1e-3, abs(fd), abs(grad[i, j]))
