import numpy as np
import pytest

from vecbal.core import (
    Coloring,
    DiscrepancyReport,
    FractionalColoring,
    SetSystem,
    VectorSequence,
    comb_disc_value,
    comb_disc_witness,
    dag_disc_value,
    dag_disc_witness,
    path_prefix_family,
    prefix_disc_value,
    prefix_disc_witness,
    prefix_sums,
)
from vecbal.graphs import Dag, GraphError, RootedTree

from oracles import family_value, rand_dag_edges, root_paths, unit_rows

e1, e2 = [1.0, 0.0], [0.0, 1.0]


def vs_(rows, norm="unit_ball"):
    return VectorSequence(np.array(rows, dtype=float), norm)


def col(*s):
    return Coloring(np.array(s))


class TestTypes:
    def test_vector_sequence_shape_and_readonly(self):
        vs = vs_([e1, e2])
        assert (vs.count, vs.dim) == (2, 2)
        with pytest.raises(ValueError):
            vs.vectors[0, 0] = 3.0

    def test_one_dimensional_input_is_a_column(self):
        assert vs_([0.5, -0.5]).vectors.shape == (2, 1)

    def test_norm_classes(self):
        vs_([[1.5, 0.0]], "two_ball")
        with pytest.raises(ValueError):
            vs_([[1.5, 0.0]])
        with pytest.raises(ValueError):
            vs_([[2.1, 0.0]], "two_ball")
        vs_([[1.0 + 5e-10, 0.0]])  # within tolerance

    def test_rejects_nonfinite_and_unknown_class(self):
        with pytest.raises(ValueError):
            vs_([[np.nan]])
        with pytest.raises(ValueError):
            vs_([[0.1]], "cube")

    def test_coloring_validation(self):
        assert len(col(1, -1, 1)) == 3
        with pytest.raises(ValueError):
            Coloring(np.array([1, 0]))
        assert np.array_equal((-col(1, -1)).signs, [-1, 1])

    def test_fractional_coloring_clamps(self):
        f = FractionalColoring(np.array([1 + 5e-10, -0.5]))
        assert f.values[0] == 1.0
        with pytest.raises(ValueError):
            FractionalColoring(np.array([1.1]))

    def test_set_system_dedup_and_range(self):
        ss = SetSystem.of(3, [[1, 0], [0, 1], [2]])
        assert ss.sets == ((0, 1), (2,))
        with pytest.raises(ValueError):
            SetSystem.of(2, [[2]])


class TestPrefix:
    def test_sums_telescoping(self):
        assert np.allclose(prefix_sums(vs_([[1], [1]]), col(1, -1)).ravel(), [1, 0])

    def test_sums_two_dims(self):
        assert np.allclose(prefix_sums(vs_([e1, e2]), col(1, 1)), [[1, 0], [1, 1]])

    def test_sums_halves(self):
        out = prefix_sums(vs_([[0.5], [0.5], [0.5]]), col(1, 1, -1)).ravel()
        assert np.allclose(out, [0.5, 1.0, 0.5])

    def test_values(self):
        assert prefix_disc_value(vs_([[1], [1], [1]]), col(1, -1, 1)) == 1
        assert prefix_disc_value(vs_([e1, e2]), col(1, 1)) == 1
        assert prefix_disc_value(vs_([[1, 0], [0.6, 0.8]]), col(1, 1)) == pytest.approx(1.6)

    def test_witness_is_argmax(self):
        value, tau = prefix_disc_witness(vs_([[1, 0], [0.6, 0.8]]), col(1, 1))
        assert tau == 1 and value == pytest.approx(1.6)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prefix_disc_value(vs_([[1]]), col(1, 1))


class TestDag:
    def test_path(self):
        assert dag_disc_value(Dag.path(3), vs_([[1], [1], [1]]), col(1, -1, 1)) == 1

    def test_single_vertex(self):
        v = [0.6, -0.8]
        assert dag_disc_value(Dag.path(1), vs_([v]), col(-1)) == pytest.approx(0.8)

    def test_root_with_two_children(self):
        g = Dag(3, ((0, 1), (0, 2)))
        assert dag_disc_value(g, vs_([[1], [1], [1]]), col(1, -1, -1)) == 1

    def test_witness_path_reevaluates(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            T = int(rng.integers(1, 9))
            edges = rand_dag_edges(T, 0.4, rng)
            g = Dag(T, tuple(edges))
            V = unit_rows(rng, T, 2)
            x = Coloring(rng.choice([-1, 1], size=T))
            value, path = dag_disc_witness(g, VectorSequence(V), x)
            assert path[0] == 0 and all(g.has_edge(a, b) for a, b in zip(path, path[1:]))
            assert value == pytest.approx(float(np.max(np.abs(x.signs[list(path)] @ V[list(path)]))))
            assert value == pytest.approx(family_value(root_paths(T, edges), V, x.signs), abs=1e-12)

    def test_cycle_rejected(self):
        with pytest.raises(GraphError):
            Dag(2, ((0, 1), (1, 0)))

    def test_tree_dag_round_trip(self):
        t = RootedTree.from_parent_list([None, 0, 0, 1])
        g = Dag.from_tree(t)
        assert set(g.edges) == {(0, 1), (0, 2), (1, 3)}


class TestComb:
    def test_values(self):
        ss = SetSystem.of(2, [[0], [1], [0, 1]])
        assert comb_disc_value(ss, vs_([[1], [1]]), col(1, -1)) == 1
        assert comb_disc_value(SetSystem.of(2, []), vs_([[1], [1]]), col(1, 1)) == 0
        assert comb_disc_value(SetSystem.of(3, [[0, 1, 2]]), vs_([[1], [1], [1]]), col(1, 1, -1)) == 1

    def test_empty_family_witness(self):
        assert comb_disc_witness(SetSystem.of(1, []), vs_([[1]]), col(1)) == (0.0, None)

    def test_prefix_family_equivalence(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            T = int(rng.integers(1, 13))
            vs = VectorSequence(unit_rows(rng, T, 3))
            x = Coloring(rng.choice([-1, 1], size=T))
            assert prefix_disc_value(vs, x) == comb_disc_value(path_prefix_family(T), vs, x)
            assert prefix_disc_value(vs, x) == dag_disc_value(Dag.path(T), vs, x)


def test_report_fields():
    r = DiscrepancyReport(1.0, 0, col(1))
    assert r.exact is False and r.extra == {}
