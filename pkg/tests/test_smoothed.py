import numpy as np
import pytest

from vecbal.core import FractionalColoring, VectorSequence, prefix_disc_value
from vecbal.instances import NoiseModel, gen_smoothed, gen_uniform_sequence
from vecbal.smoothed import (
    BlockState,
    DefaultPrefixSolver,
    DualCertificate,
    IntervalFamily,
    block_decomposition,
    build_block_lp,
    calibrate_delta,
    certificate_from_farkas,
    check_dual_certificate,
    dual_lhs_matrix_form,
    fractional_signing,
    greedy_prefix_signs,
    max_prefix_deviation,
    prefix_value,
    round_block,
    smoothed_prefix_solve,
    solve_block_lp,
    theory_block_length,
)

from oracles import unit_rows


def smoothed_block(d, n, eps, seed):
    base = gen_uniform_sequence(n, d, seed)
    vs = gen_smoothed(VectorSequence(base.vectors * (1 - eps)), NoiseModel("uniform_sphere_scaled", eps, seed))
    return vs.vectors.T


class TestBlockDecomposition:
    def test_small_example(self):
        fam = block_decomposition(4, 2)
        assert set(fam.intervals) == {(0, 2), (0, 4), (0, 1), (2, 3), (2, 4)}
        assert len(fam) == 5

    def test_b_equals_n_gives_all_prefixes(self):
        assert set(block_decomposition(5, 5).intervals) == {(0, k) for k in range(1, 6)}

    @pytest.mark.parametrize("n,b", [(9, 3), (8, 3), (16, 4), (10, 1), (7, 7), (12, 5)])
    def test_cover_property(self, n, b):
        fam = block_decomposition(n, b)
        for k in range(1, n + 1):
            cover = fam.prefix_cover(k)
            assert cover is not None and len(cover) <= 2
            covered = np.zeros(n, dtype=int)
            for iv in cover:
                covered += fam.mask(iv)
            assert list(covered) == [1] * k + [0] * (n - k)

    def test_errors(self):
        with pytest.raises(ValueError):
            block_decomposition(3, 4)
        with pytest.raises(ValueError):
            IntervalFamily(3, ((1, 1),), 1)

    def test_long_classification(self):
        fam = block_decomposition(6, 3)
        assert fam.is_long((0, 3)) and not fam.is_long((3, 5))

    def test_theory_preset(self):
        assert theory_block_length(1024) == 2 and theory_block_length(1) == 1


class TestBlockLP:
    def test_one_by_one(self):
        s = BlockState(np.array([[1.0]]), np.array([0.0]), 1.0)
        p = build_block_lp(s, IntervalFamily(1, ((0, 1),), 1))
        assert np.array_equal(p.A_eq, [[1.0]]) and np.array_equal(p.b_eq, [0.0])
        assert np.array_equal(p.lo_in, [-2.0]) and np.array_equal(p.up_in, [2.0])
        assert np.array_equal(p.lb, [-1.0]) and np.array_equal(p.ub, [1.0])

    def test_all_ones_preimage(self):
        rng = np.random.default_rng(0)
        M = unit_rows(rng, 6, 2).T
        s = BlockState(M, -M @ np.ones(6), 10.0)
        x = fractional_signing(s, block_decomposition(6, 2))
        assert x is not None
        assert np.max(np.abs(M @ x.values + s.w)) <= 1e-7

    def test_zero_carry_is_feasible(self):
        rng = np.random.default_rng(1)
        M = unit_rows(rng, 8, 3).T
        assert fractional_signing(BlockState(M, np.zeros(3), 0.5), block_decomposition(8, 2)) is not None

    def test_two_column_example(self):
        s = BlockState(np.array([[1.0, 1.0]]), np.array([-1.0]), 1.0)
        x = fractional_signing(s, block_decomposition(2, 1))
        assert x is not None and x.values.sum() == pytest.approx(1.0)
        assert abs(x.values[0]) <= 2 + 1e-7

    def test_carry_must_respect_delta(self):
        with pytest.raises(ValueError):
            BlockState(np.ones((1, 2)), np.array([2.0]), 1.0)

    def test_dimension_mismatch(self):
        s = BlockState(np.ones((1, 3)), np.array([0.0]), 1.0)
        with pytest.raises(ValueError):
            build_block_lp(s, block_decomposition(2, 1))

    @pytest.mark.parametrize("seed", range(8))
    def test_rounding_guarantee_on_smoothed_blocks(self, seed):
        d, n, b = 3, 32, 4
        M = smoothed_block(d, n, 0.2, seed)
        delta = 4.0
        w = np.random.default_rng(seed).uniform(-delta, delta, d)
        s = BlockState(M, w, delta)
        fam = block_decomposition(n, b)
        res = solve_block_lp(s, fam)
        if res.status != "feasible":
            pytest.skip("infeasible draw")
        x = res.point
        assert build_block_lp(s, fam).max_violation(x) <= 1e-7
        assert np.max(np.abs(M @ x + w)) <= 1e-7
        for a, bb in fam.intervals:
            assert np.max(np.abs(M[:, a:bb] @ x[a:bb])) <= 2 * delta + 1e-7
        assert prefix_value(M, x) <= 4 * delta + 2e-7


class TestDualCertificate:
    def test_membership(self):
        DualCertificate(np.array([2.0, 0.0]), {(0, 1): np.array([0.5, 0.5])})
        with pytest.raises(ValueError):
            DualCertificate(np.array([1.0, 0.0]), {})
        with pytest.raises(ValueError):
            DualCertificate(np.array([2.0, 0.0]), {(0, 1): np.array([1.0, 0.5])})

    def test_alpha_zero_closed_form(self):
        d, n = 2, 3
        M = np.array([[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
        s = BlockState(M, np.zeros(d), 1.0)
        c = DualCertificate(np.array([d, 0.0]), {})
        lhs, holds = check_dual_certificate(s, block_decomposition(n, 1), c)
        assert lhs == pytest.approx(d * np.abs(M[0]).sum())
        assert holds == (lhs >= d * 1.0)

    def test_orthogonal_y(self):
        M = np.array([[0.0, 0.0], [1.0, -1.0], [0.5, 0.5]])
        s = BlockState(M, np.zeros(3), 1.0)
        c = DualCertificate(np.array([3.0, 0.0, 0.0]), {})
        assert check_dual_certificate(s, block_decomposition(2, 1), c) == (0.0, False)

    def test_unknown_interval(self):
        s = BlockState(np.ones((1, 2)), np.zeros(1), 1.0)
        c = DualCertificate(np.array([1.0]), {(1, 2): np.array([0.1])})
        with pytest.raises(ValueError):
            check_dual_certificate(s, IntervalFamily(2, ((0, 1),), 1), c)

    @pytest.mark.parametrize("seed", range(10))
    def test_routes_agree(self, seed):
        rng = np.random.default_rng(seed)
        d, n, b = 3, 12, 3
        M = smoothed_block(d, n, 0.2, seed)
        fam = block_decomposition(n, b)
        y = rng.standard_normal(d)
        y *= d / np.abs(y).sum()
        keys = [fam.intervals[i] for i in rng.choice(len(fam), size=4, replace=False)]
        raw = {k: rng.standard_normal(d) for k in keys}
        tot = sum(np.abs(v).sum() for v in raw.values())
        alphas = {k: v * (d / 2) / tot * rng.uniform(0.2, 1) for k, v in raw.items()}
        c = DualCertificate(y, alphas)
        s = BlockState(M, np.zeros(d), 1.0)
        assert check_dual_certificate(s, fam, c)[0] == pytest.approx(dual_lhs_matrix_form(s, fam, c), abs=1e-9)

    def test_certificate_from_infeasible_lp(self):
        M = np.array([[0.1, 0.1, 0.1]])
        s = BlockState(M, np.array([1.0]), 1.0)
        fam = block_decomposition(3, 1)
        res = solve_block_lp(s, fam)
        assert res.status == "infeasible"
        c = certificate_from_farkas(s, fam, res)
        lhs, holds = check_dual_certificate(s, fam, c)
        assert not holds and lhs < s.delta * s.d
        assert fractional_signing(s, fam) is None

    def test_certificate_needs_infeasible_result(self):
        s = BlockState(np.ones((1, 1)), np.zeros(1), 1.0)
        fam = block_decomposition(1, 1)
        with pytest.raises(ValueError):
            certificate_from_farkas(s, fam, solve_block_lp(s, fam))


def fixed_inner(signs):
    def inner(M):
        sg = np.array(signs[: M.shape[1]], dtype=float)
        return sg, prefix_value(M, sg)

    return inner


class TestRounding:
    def test_integral_input_unchanged(self):
        M = np.array([[1.0, 0.5, -0.2]])
        x = FractionalColoring(np.array([1.0, -1.0, 1.0]))
        r = round_block(BlockState(M, np.zeros(1), 1.0), x, bits=16)
        assert list(r.coloring.signs) == [1, -1, 1]
        assert r.bound == pytest.approx(0.0, abs=1e-12)

    def test_half_example(self):
        M = np.array([[1.0, 1.0]])
        s = BlockState(M, np.zeros(1), 1.0)
        r = round_block(s, FractionalColoring(np.zeros(2)), fixed_inner([1, -1]), bits=8)
        assert list(r.coloring.signs) == [1, -1]
        assert r.level_sizes == (2,) and r.level_values == (1.0,)
        dev = max_prefix_deviation(M, r.coloring.as_float(), np.zeros(2))
        assert dev == 1.0 <= r.level_values[0] and r.bound == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_guarantee_random(self, seed):
        rng = np.random.default_rng(seed)
        d, n = 2, 10
        M = unit_rows(rng, n, d).T
        x = FractionalColoring(rng.uniform(-1, 1, n))
        r = round_block(BlockState(M, np.zeros(d), 1.0), x, bits=20)
        assert max_prefix_deviation(M, r.coloring.as_float(), x.values) <= r.bound + 1e-12

    def test_bad_inner(self):
        s = BlockState(np.ones((1, 2)), np.zeros(1), 1.0)
        with pytest.raises(ValueError):
            round_block(s, FractionalColoring(np.zeros(2)), lambda M: (np.zeros(M.shape[1]), 0.0), bits=4)

    def test_bits_range(self):
        s = BlockState(np.ones((1, 1)), np.zeros(1), 1.0)
        with pytest.raises(ValueError):
            round_block(s, FractionalColoring(np.zeros(1)), bits=0)


class TestInner:
    def test_default_solver_exact_then_greedy(self):
        rng = np.random.default_rng(0)
        inner = DefaultPrefixSolver(exact_limit=6)
        small = unit_rows(rng, 5, 2).T
        big = unit_rows(rng, 9, 2).T
        inner(small)
        inner(big)
        assert [c[2] for c in inner.calls] == [True, False]
        assert inner.calls[1][1] == prefix_value(big, greedy_prefix_signs(big))

    def test_calibration_is_twice_worst(self):
        inner = DefaultPrefixSolver()
        delta = calibrate_delta(2, 8, inner, samples=4, seed=3)
        assert delta == pytest.approx(2 * max(c[1] for c in inner.calls))


class TestPipeline:
    def test_single_block_equals_inner(self):
        vs = VectorSequence(unit_rows(np.random.default_rng(2), 12, 2))
        inner = DefaultPrefixSolver()
        x, trace = smoothed_prefix_solve(vs, 12, 3, delta=5.0, inner=inner)
        signs, _ = DefaultPrefixSolver()(vs.vectors.T)
        assert np.array_equal(x.signs, signs.astype(int))
        assert len(trace.blocks) == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants_d1(self, seed):
        n, b, T = 16, 4, 96
        base = gen_uniform_sequence(T, 1, seed)
        vs = gen_smoothed(VectorSequence(base.vectors * 0.8), NoiseModel("uniform_sphere_scaled", 0.2, seed))
        x, trace = smoothed_prefix_solve(vs, n, b, seed=seed)
        delta = trace.delta_final
        if not trace.degraded:
            for rec in trace.blocks:
                assert rec.end_norm <= delta + 1e-6
            assert prefix_disc_value(vs, x) <= 6 * delta + 1e-6
        assert prefix_disc_value(vs, x) == pytest.approx(trace.total_prefix_value)

    def test_trailing_block_accounted(self):
        T, n = 70, 32
        base = gen_uniform_sequence(T, 2, 4)
        vs = gen_smoothed(VectorSequence(base.vectors * 0.8), NoiseModel("uniform_sphere_scaled", 0.2, 4))
        x, trace = smoothed_prefix_solve(vs, n, 4, seed=4)
        assert trace.trailing_count == 6
        assert prefix_disc_value(vs, x) == pytest.approx(trace.total_prefix_value)
        if not trace.degraded:
            assert trace.total_prefix_value <= trace.reported_bound + 1e-6

    def test_tiny_delta_degrades_and_resets(self):
        vs = VectorSequence(unit_rows(np.random.default_rng(9), 32, 2))
        x, trace = smoothed_prefix_solve(vs, 8, 2, delta=1e-3)
        assert trace.degraded
        assert trace.delta_final > 1e-3
        assert "delta_reset" in ",".join(r.reason for r in trace.blocks)
        assert len(x) == 32

    def test_argument_checks(self):
        vs = VectorSequence(np.ones((4, 1)))
        with pytest.raises(ValueError):
            smoothed_prefix_solve(vs, 5)
        with pytest.raises(ValueError):
            smoothed_prefix_solve(vs, 2, delta=-1.0)
