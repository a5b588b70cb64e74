"""Graph generators: exact degree/edge-count laws, rewiring and overlay
distributions, the nested restriction chain, and level selection."""

import numpy as np
import pytest

from epinetsim.networks import (
    LEVEL_NAMES,
    Network,
    NetworkError,
    NetworkSuite,
    build_er_overlay,
    build_ring_lattice,
    build_suite,
    rewire,
    select_network,
    write_edge_lists,
)
from epinetsim.params import GBR_BEHAVIOR


def edge_set(net: Network) -> set[tuple[int, int]]:
    return {tuple(sorted(e)) for e in net.edges.tolist()}


class TestRingLattice:
    def test_n5_is_complete(self):
        # +-1 and +-2 neighbors of each of 5 nodes cover every pair
        net = build_ring_lattice(5)
        assert net.n_edges == 10
        assert edge_set(net) == {(i, j) for i in range(5) for j in range(i + 1, 5)}

    def test_n8_has_16_edges_all_degree_4(self):
        net = build_ring_lattice(8)
        assert net.n_edges == 16
        assert np.all(net.degrees() == 4)

    @pytest.mark.parametrize("n", [0, 1, 4])
    def test_too_small_raises(self, n):
        with pytest.raises(NetworkError):
            build_ring_lattice(n)

    @pytest.mark.parametrize("n", [5, 6, 37, 200])
    def test_degree_exactly_four(self, n):
        net = build_ring_lattice(n)
        assert net.n_edges == 2 * n
        assert np.all(net.degrees() == 4)
        # simple graph: no self loops, no duplicates
        assert np.all(net.edges[:, 0] != net.edges[:, 1])
        assert len(edge_set(net)) == net.n_edges


class TestRewire:
    def test_edge_count_preserved_exactly(self):
        rng = np.random.default_rng(7)
        base = build_ring_lattice(400)
        for alpha in (0.0, 0.05, 0.5, 1.0):
            out = rewire(base, alpha, rng)
            assert out.n_edges == base.n_edges
            assert np.all(out.edges[:, 0] != out.edges[:, 1])
            assert len(edge_set(out)) == out.n_edges

    def test_alpha_zero_is_identity(self):
        base = build_ring_lattice(60)
        out = rewire(base, 0.0, np.random.default_rng(0))
        assert edge_set(out) == edge_set(base)

    def test_alpha_validation(self):
        base = build_ring_lattice(10)
        with pytest.raises(NetworkError):
            rewire(base, -0.1, np.random.default_rng(0))
        with pytest.raises(NetworkError):
            rewire(base, 1.5, np.random.default_rng(0))

    def test_changed_edge_count_is_binomial(self):
        # each of the 2n edges is independently redrawn with probability alpha,
        # so the count of edges leaving the base set is Binomial(2n, alpha)
        n, alpha, builds = 3000, 0.006, 300
        base = build_ring_lattice(n)
        base_codes = set(base.edge_codes().tolist())
        rng = np.random.default_rng(123)
        changed = np.empty(builds)
        for b in range(builds):
            out = rewire(base, alpha, rng)
            changed[b] = sum(1 for c in out.edge_codes().tolist() if c not in base_codes)
        mean_expected = 2 * n * alpha
        sd = np.sqrt(2 * n * alpha * (1 - alpha))
        assert abs(changed.mean() - mean_expected) < 4 * sd / np.sqrt(builds)


class TestErOverlay:
    def test_edge_count_binomial(self):
        # G(n, beta) with beta = d/(n-1): edge count ~ Binomial(n(n-1)/2, beta)
        n, d, samples = 500, 3.0, 100
        beta = d / (n - 1)
        total = n * (n - 1) // 2
        rng = np.random.default_rng(5)
        counts = np.array([build_er_overlay(n, d, rng).n_edges for _ in range(samples)])
        sd = np.sqrt(total * beta * (1 - beta))
        assert abs(counts.mean() - total * beta) < 4 * sd / np.sqrt(samples)

    def test_simple_graph(self):
        net = build_er_overlay(300, 5.0, np.random.default_rng(1))
        assert np.all(net.edges[:, 0] != net.edges[:, 1])
        assert len(edge_set(net)) == net.n_edges

    def test_degree_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(NetworkError):
            build_er_overlay(100, -1.0, rng)
        with pytest.raises(NetworkError):
            build_er_overlay(100, 100.0, rng)

    def test_zero_degree_gives_empty_graph(self):
        assert build_er_overlay(100, 0.0, np.random.default_rng(0)).n_edges == 0


class TestSuite:
    def test_levels_are_nested(self):
        suite = build_suite(800, GBR_BEHAVIOR, np.random.default_rng(11))
        assert len(suite.levels) == 8
        for lo, hi in zip(suite.levels, suite.levels[1:]):
            assert edge_set(lo) <= edge_set(hi)

    def test_base_level_is_the_ring_lattice(self):
        suite = build_suite(600, GBR_BEHAVIOR, np.random.default_rng(3))
        assert edge_set(suite.levels[0]) == edge_set(build_ring_lattice(600))

    def test_unrestricted_mean_degree(self):
        # four lattice layers (degree 4 each, minus overlap) plus overlays of
        # expected extra degree 1.5 + 0.8 + 1.5 + 0.8 = 4.6
        n, builds = 3000, 4
        rng = np.random.default_rng(21)
        degs = [build_suite(n, GBR_BEHAVIOR, rng).levels[7].mean_degree for _ in range(builds)]
        assert abs(np.mean(degs) - (16.0 + 4.6)) / (16.0 + 4.6) < 0.05

    def test_from_single_shares_topology(self):
        net = build_ring_lattice(50)
        suite = NetworkSuite.from_single(net)
        assert all(edge_set(g) == edge_set(net) for g in suite.levels)

    def test_wrong_level_count_rejected(self):
        net = build_ring_lattice(10)
        with pytest.raises(NetworkError):
            NetworkSuite(10, [net] * 3)


class TestSelectNetwork:
    def test_flag_sum_table(self):
        assert LEVEL_NAMES[select_network(0, 0, 0)] == "R_l"
        assert LEVEL_NAMES[select_network(3, 3, 1)] == "L_0"
        assert LEVEL_NAMES[select_network(1, 2, 0)] == "R_xs"

    def test_every_sum_maps_to_its_level(self):
        order = ["R_l", "R_m", "R_s", "R_xs", "L_l", "L_m", "L_s", "L_0"]
        for w in range(4):
            for s in range(4):
                for h in range(2):
                    assert LEVEL_NAMES[select_network(w, s, h)] == order[w + s + h]

    def test_flag_validation(self):
        with pytest.raises(NetworkError):
            select_network(4, 0, 0)
        with pytest.raises(NetworkError):
            select_network(0, -1, 0)
        with pytest.raises(NetworkError):
            select_network(0, 0, 2)

    def test_tightening_never_adds_contacts(self):
        suite = build_suite(500, GBR_BEHAVIOR, np.random.default_rng(9))
        loose = edge_set(suite.levels[select_network(0, 0, 0)])
        tight = edge_set(suite.levels[select_network(3, 3, 1)])
        assert tight <= loose


class TestEdgeLists:
    def test_writes_one_file_per_level(self, tmp_path):
        suite = build_suite(60, GBR_BEHAVIOR, np.random.default_rng(2))
        paths = write_edge_lists(suite, tmp_path)
        assert [p.name for p in paths] == [f"{name}.edges" for name in LEVEL_NAMES]
        lines = (tmp_path / "L_0.edges").read_text().strip().splitlines()
        assert len(lines) == suite.levels[0].n_edges
