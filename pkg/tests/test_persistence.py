import math

import numpy as np
import pytest

from persivol.cubical import FilteredPairComplex, random_pair_complex
from persivol.errors import OracleScopeError
from persivol.persistence import (
    Bar,
    PersistenceDiagram,
    bottleneck_distance,
    count_bars,
    diagram_from_ranks,
    euler_characteristic,
    image_persistence,
    ordinary_persistence,
    rank_function,
    rank_oracle,
)

INF = math.inf


@pytest.fixture
def two_vertex_pair():
    # v1 (f=0, in A), v2 (f=1, in A), edge (f=2, in B only).
    return FilteredPairComplex((3,), None, [0.0, 2.0, 1.0], [1, 0, 1], [1, 1, 1])


def diag(*bars):
    return PersistenceDiagram(tuple(Bar(*b) for b in bars))


class TestHandExample:
    def test_rank_profile(self, two_vertex_pair):
        c = two_vertex_pair
        assert [rank_oracle(c, r, r, 0) for r in (0.0, 1.0, 2.0)] == [1, 2, 1]

    def test_rank_examples(self, two_vertex_pair):
        c = two_vertex_pair
        assert rank_oracle(c, 1.0, 1.0, 0) == 2
        assert rank_oracle(c, 2.0, 2.0, 0) == 1
        assert rank_oracle(c, -1.0, -1.0, 0) == 0

    def test_rank_requires_ordered_args(self, two_vertex_pair):
        with pytest.raises(ValueError):
            rank_oracle(two_vertex_pair, 2.0, 1.0, 0)

    def test_image_diagram(self, two_vertex_pair):
        d = image_persistence(two_vertex_pair)
        assert d.bars == (Bar(0, 0.0, INF), Bar(0, 1.0, 2.0))

    def test_oracle_reproduces_diagram(self, two_vertex_pair):
        assert diagram_from_ranks(two_vertex_pair).bars == image_persistence(
            two_vertex_pair
        ).bars


class TestOracleEquivalence:
    def test_random_complexes_match(self):
        for seed in range(25):
            c = random_pair_complex(seed + 100, max_cells=100)
            assert image_persistence(c).bars == diagram_from_ranks(c).bars

    def test_random_3d_complexes_match(self):
        for seed in range(10):
            c = random_pair_complex(seed + 300, max_cells=350, dim=3)
            assert image_persistence(c).bars == diagram_from_ranks(c).bars

    def test_full_pair_equals_ordinary(self):
        # When A == B the image module is plain sublevel persistence.
        for seed in range(30):
            c = random_pair_complex(seed + 200, max_cells=100)
            full = FilteredPairComplex(c.doubled_shape, c.active, c.f, c.in_b, c.in_b)
            assert ordinary_persistence(c).bars == diagram_from_ranks(full).bars

    def test_empty_a_gives_empty_diagram(self):
        c = FilteredPairComplex((3,), None, [0.0, 1.0, 0.5], [0, 0, 0], [1, 1, 1])
        assert len(image_persistence(c)) == 0
        assert len(diagram_from_ranks(c)) == 0

    def test_oracle_size_guard(self):
        c = random_pair_complex(1, max_cells=100)
        big = FilteredPairComplex(
            (5001,), None, np.zeros(5001), np.ones(5001), np.ones(5001)
        )
        assert c.n_cells <= 2000
        with pytest.raises(OracleScopeError):
            diagram_from_ranks(big)


class TestRankFunction:
    def test_grid_matches_pointwise_oracle(self):
        rng = np.random.default_rng(30)
        for seed in range(8):
            c = random_pair_complex(seed + 700, max_cells=80)
            rf = rank_function(c)
            for _ in range(6):
                s, t = sorted(rng.random(2) * 3.2)
                for j in range(c.dim + 1):
                    assert rf.rank(s, t, j) == rank_oracle(c, s, t, j)

    def test_ranks_nonnegative_and_monotone_in_t(self):
        for seed in range(10):
            c = random_pair_complex(seed + 800, max_cells=100)
            rf = rank_function(c)
            for r in rf.ranks.values():
                m = r.shape[0]
                for si in range(m):
                    row = r[si, si:]
                    assert np.all(row >= 0)
                    assert np.all(np.diff(row) <= 0)

    def test_rank_bounded_by_start_dimension(self):
        # The image rank can never exceed the rank at the start level itself.
        for seed in range(10):
            c = random_pair_complex(seed + 900, max_cells=100)
            rf = rank_function(c)
            for r in rf.ranks.values():
                m = r.shape[0]
                for si in range(m):
                    assert np.all(r[si, si:] <= r[si, si])


class TestDiagramOps:
    def test_count_bars_examples(self):
        assert count_bars(diag(), 5.0, 6.0) == 0
        assert count_bars(diag((0, 0.0, INF)), 5.0, 6.0) == 1
        assert count_bars(diag((0, 0.0, 1.0), (0, 2.0, 3.0)), 1.5, 1.8) == 0

    def test_count_bars_rejects_bad_window(self):
        with pytest.raises(ValueError):
            count_bars(diag(), 2.0, 2.0)

    def test_euler_characteristic_examples(self, two_vertex_pair):
        d = image_persistence(two_vertex_pair)
        assert euler_characteristic(d, 1.5) == 2
        # Half-open convention: the bar (1, 2) is dead at its death value.
        assert euler_characteristic(d, 2.0) == 1
        assert euler_characteristic(diag(), 0.0) == 0

    def test_euler_characteristic_signs(self):
        d = diag((0, 0.0, INF), (1, 0.25, 0.75))
        assert euler_characteristic(d, 0.5) == 0
        assert euler_characteristic(d, 0.8) == 1

    def test_birth_le_death_enforced(self):
        with pytest.raises(Exception):
            Bar(0, 1.0, 0.5)

    def test_json_roundtrip_with_inf(self):
        d = diag((0, 0.0, INF), (1, 0.5, 1.5))
        back = PersistenceDiagram.from_json(d.to_json())
        assert back.bars == d.bars
        assert '"inf"' in d.to_json()

    def test_text_roundtrip(self):
        d = diag((2, 0.25, 0.75), (0, 0.0, INF))
        back = PersistenceDiagram.from_text(d.to_text())
        assert back.bars == d.bars


class TestStructuralProperties:
    def test_single_essential_component_when_b_connected(self):
        # B spans the whole grid (hence connected); a nonempty A must carry
        # exactly one surviving degree-0 class.
        rng = np.random.default_rng(31)
        found = 0
        for seed in range(30):
            extents = (int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            vals = rng.random(extents)
            from persivol.geometry import ScalarGrid
            from persivol.cubical import build_pair_complex

            geo = ScalarGrid(2, (0.0, 0.0), 1.0, extents)
            c = build_pair_complex(
                geo.with_values(vals * 1.2), geo.with_values(rng.random(extents)), 0.5
            )
            if not np.any(c.in_a):
                continue
            found += 1
            d = image_persistence(c)
            assert sum(1 for b in d.bars if b.dim == 0 and b.essential) == 1
        assert found > 5

    def test_all_births_before_deaths(self):
        for seed in range(20):
            d = image_persistence(random_pair_complex(seed + 400, max_cells=120))
            for b in d.bars:
                assert b.birth < b.death

    def test_injection_into_ordinary_diagram(self):
        # The image diagram can never show more bars than the B-diagram over
        # any window between consecutive critical values.
        for seed in range(40):
            c = random_pair_complex(seed + 500, max_cells=120)
            di = image_persistence(c)
            db = ordinary_persistence(c)
            crit = sorted(
                {b.birth for b in db.bars}
                | {b.death for b in db.bars if not b.essential}
            )
            for a, b in zip(crit, crit[1:]):
                assert count_bars(di, a, b) <= count_bars(db, a, b)


class TestBottleneck:
    def test_identical_diagrams(self):
        d = diag((0, 0.0, 10.0), (1, 1.0, 2.0))
        assert bottleneck_distance(d, d) == 0.0

    def test_single_bar_to_empty(self):
        assert bottleneck_distance(diag((0, 0.0, 10.0)), diag()) == pytest.approx(5.0)

    def test_coordinate_shift(self):
        assert bottleneck_distance(
            diag((0, 0.0, 10.0)), diag((0, 1.0, 9.0))
        ) == pytest.approx(1.0)

    def test_infinite_bars_match_by_birth(self):
        assert bottleneck_distance(
            diag((0, 0.0, INF)), diag((0, 0.3, INF))
        ) == pytest.approx(0.3)

    def test_unbalanced_infinite_bars(self):
        assert bottleneck_distance(diag((0, 0.0, INF)), diag()) == INF

    def test_degrees_are_independent(self):
        a = diag((1, 0.0, 4.0))
        b = diag((0, 0.0, 4.0))
        assert bottleneck_distance(a, b) == pytest.approx(2.0)

    def test_triangle_inequality_sampled(self):
        rng = np.random.default_rng(32)

        def rand_diag():
            bars = []
            for _ in range(int(rng.integers(0, 5))):
                x, y = sorted(rng.random(2) * 4)
                bars.append((0, float(x), float(y)))
            return diag(*bars)

        for _ in range(40):
            a, b, c = rand_diag(), rand_diag(), rand_diag()
            dab = bottleneck_distance(a, b)
            dbc = bottleneck_distance(b, c)
            dac = bottleneck_distance(a, c)
            assert dac <= dab + dbc + 1e-9

    def test_stability_under_bar_perturbation(self):
        # Perturbing every endpoint by at most delta moves the diagram by at
        # most delta.
        rng = np.random.default_rng(33)
        for _ in range(25):
            bars = []
            for _ in range(int(rng.integers(1, 6))):
                x, y = sorted(rng.random(2) * 4)
                bars.append((0, float(x), float(y + 1e-3)))
            delta = float(rng.random() * 0.2)
            moved = [
                (
                    0,
                    b + float(rng.uniform(-delta, delta)),
                    d + float(rng.uniform(-delta, delta)),
                )
                for _, b, d in bars
            ]
            moved = [(0, min(b, d), max(b, d)) for _, b, d in moved]
            assert bottleneck_distance(diag(*bars), diag(*moved)) <= delta + 1e-9
