import numpy as np
import pytest

from rwpm.diffusion import (
    DEFAULT_ALPHA,
    DEFAULT_ITERS,
    SHORT_ITERS,
    DiffusionConfig,
    diffuse_closed_form,
    diffuse_iterative,
    diffusion_objective,
    symmetrize,
)
from rwpm.errors import ParameterError, SizeError
from rwpm.graph import build_affinity, softmax_transition

from conftest import random_graph, random_stochastic

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
EYE2 = np.eye(2)


def naive_objective(s, m, m0, alpha):
    n = len(m)
    total = 0.0
    for i in range(n):
        for j in range(n):
            diff = m[i] - m[j]
            total += 0.5 * s[i, j] * float(diff @ diff)
    for i in range(n):
        diff = m[i] - m0[i]
        total += (1 - alpha) / alpha * float(diff @ diff)
    return total


class TestIterative:
    def test_alpha_zero_returns_m0(self, rng):
        s = random_graph(rng, 6)
        m0 = rng.standard_normal((6, 3))
        out = diffuse_iterative(s, m0, 0.0, 7).refined
        np.testing.assert_array_equal(out, m0)

    def test_zero_iterations(self, rng):
        s = random_graph(rng, 5)
        m0 = rng.standard_normal((5, 2))
        res = diffuse_iterative(s, m0, 0.9, 0)
        np.testing.assert_array_equal(res.refined, m0)
        assert res.residual_history == []

    def test_one_step_by_hand(self):
        # 0.5 * S @ I + 0.5 * I
        out = diffuse_iterative(SWAP, EYE2, 0.5, 1).refined
        np.testing.assert_allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_history_length(self, rng):
        s = random_graph(rng, 8)
        res = diffuse_iterative(s, rng.standard_normal((8, 2)), 0.7, 13)
        assert len(res.residual_history) == 13

    def test_tolerance_stops_early(self, rng):
        s = random_graph(rng, 8)
        res = diffuse_iterative(s, rng.standard_normal((8, 2)), 0.5, 500, tol=1e-6)
        assert len(res.residual_history) < 500
        assert res.residual_history[-1] < 1e-6

    def test_defaults(self):
        assert DEFAULT_ALPHA == 0.99
        assert DEFAULT_ITERS == 20
        assert SHORT_ITERS == 5

    def test_dimension_mismatch(self, rng):
        with pytest.raises(SizeError):
            diffuse_iterative(random_graph(rng, 4), np.ones((5, 2)), 0.5, 1)

    def test_alpha_range(self):
        with pytest.raises(ParameterError):
            diffuse_iterative(SWAP, EYE2, 1.0, 1)
        with pytest.raises(ParameterError):
            DiffusionConfig(alpha=0.0, closed_form=True)

    def test_contraction(self, rng):
        for alpha in (0.5, 0.9, 0.99):
            s = random_stochastic(rng, 20)
            res = diffuse_iterative(s, rng.standard_normal((20, 4)), alpha, 40)
            hist = np.array(res.residual_history)
            assert np.all(hist[1:] <= alpha * hist[:-1] + 1e-12)

    def test_boundedness(self, rng):
        s = random_stochastic(rng, 15)
        m0 = rng.standard_normal((15, 3))
        bound = np.linalg.norm(m0, axis=1).max()
        for t in range(1, 30):
            m = diffuse_iterative(s, m0, 0.9, t).refined
            assert np.linalg.norm(m, axis=1).max() <= bound + 1e-9


class TestClosedForm:
    def test_two_by_two_by_hand(self):
        out = diffuse_closed_form(SWAP, EYE2, 0.5).refined
        np.testing.assert_allclose(out, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-15)

    def test_identical_rows_fixed(self, rng):
        s = random_graph(rng, 6)
        row = rng.standard_normal(4)
        m0 = np.tile(row, (6, 1))
        for alpha in (0.1, 0.5, 0.99):
            np.testing.assert_allclose(diffuse_closed_form(s, m0, alpha).refined, m0, atol=1e-12)

    def test_fixed_point_residual(self, rng):
        s = random_graph(rng, 8)
        m0 = rng.standard_normal((8, 3))
        m = diffuse_closed_form(s, m0, 0.8).refined
        resid = np.linalg.norm(m - (0.8 * s @ m + 0.2 * m0)) / np.linalg.norm(m)
        assert resid <= 1e-9

    def test_iterative_converges_to_closed_form(self, rng):
        s = random_graph(rng, 64, tau=0.05)
        m0 = rng.standard_normal((64, 5))
        exact = diffuse_closed_form(s, m0, 0.5).refined
        approx = diffuse_iterative(s, m0, 0.5, 60).refined
        assert np.linalg.norm(approx - exact) / np.linalg.norm(exact) <= 1e-9

    def test_rejects_alpha_zero(self):
        with pytest.raises(ParameterError):
            diffuse_closed_form(SWAP, EYE2, 0.0)


class TestObjective:
    def test_zero_for_identical_rows(self, rng):
        s = random_graph(rng, 5)
        m = np.tile(rng.standard_normal(3), (5, 1))
        assert diffusion_objective(s, m, m, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_fidelity_vanishes_at_m0(self, rng):
        s = random_graph(rng, 5)
        m = rng.standard_normal((5, 3))
        smooth = 0.5 * sum(s[i, j] * np.sum((m[i] - m[j]) ** 2) for i in range(5) for j in range(5))
        assert diffusion_objective(s, m, m, 0.3) == pytest.approx(smooth, rel=1e-12)

    def test_matches_double_loop(self, rng):
        s = random_graph(rng, 6)
        m = rng.standard_normal((6, 4))
        m0 = rng.standard_normal((6, 4))
        assert abs(diffusion_objective(s, m, m0, 0.7) - naive_objective(s, m, m0, 0.7)) <= 1e-10

    def test_closed_form_minimizes_on_doubly_stochastic(self, rng):
        # symmetric and row-stochastic: the limit is the exact minimizer
        s = SWAP
        m0 = rng.standard_normal((2, 3))
        m = diffuse_closed_form(s, m0, 0.6).refined
        best = diffusion_objective(s, m, m0, 0.6)
        for _ in range(20):
            probe = m + 1e-3 * rng.standard_normal(m.shape)
            assert diffusion_objective(s, probe, m0, 0.6) >= best

    def test_symmetrized_decrease(self, rng):
        m0 = rng.standard_normal((10, 4))
        s = softmax_transition(build_affinity(m0), 0.2)
        m = diffuse_closed_form(s, m0, 0.9).refined
        sym = symmetrize(s)
        assert diffusion_objective(sym, m, m0, 0.9) <= diffusion_objective(sym, m0, m0, 0.9) + 1e-9

    def test_shape_mismatch(self, rng):
        with pytest.raises(SizeError):
            diffusion_objective(SWAP, EYE2, np.ones((2, 3)), 0.5)
