"""Contact-network generators.

Restriction levels are modeled as a chain of eight undirected graphs on the
same node set, from the bare proximity lattice (hard lockdown) to the lattice
plus several random overlays (no restrictions). Each level is a superset of
the previous one, so tightening restrictions never invents new contacts:

    L_0  ring lattice, degree 4
    L_s, L_m, L_l    union with one, two, three independent proximity lattices,
                     each built over a shuffled node arrangement and lightly
                     rewired (so every level adds about 4 contacts per node)
    R_xs, R_s, R_m, R_l   union with cumulative random overlays of expected
                          extra degree p_rxs, p_rs, p_rm, p_rl

The active level for a day is picked from the sum of the workplace-closing,
school-closing, and stay-home flags (0 = everything open -> R_l, 7 = full
lockdown -> L_0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .params import BehaviorParams

LEVEL_NAMES = ("L_0", "L_s", "L_m", "L_l", "R_xs", "R_s", "R_m", "R_l")
N_LEVELS = len(LEVEL_NAMES)
MAX_RESTRICTION_SUM = 7


class NetworkError(ValueError):
    """Invalid network size or generator argument."""


@dataclass
class Network:
    """Undirected simple graph: node count plus an (m, 2) edge array."""

    n: int
    edges: np.ndarray

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n

    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edges[:, 0], minlength=self.n)
        deg += np.bincount(self.edges[:, 1], minlength=self.n)
        return deg

    def edge_codes(self) -> np.ndarray:
        """Each undirected edge as a single sorted integer code u*n + v, u < v."""
        u = self.edges.min(axis=1).astype(np.int64)
        v = self.edges.max(axis=1).astype(np.int64)
        codes = u * self.n + v
        codes.sort()
        return codes

    def edge_set(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a, b in self.edges.tolist()}

    def to_csr(self) -> sparse.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.shape[0], dtype=np.int32)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


def _network_from_codes(n: int, codes: np.ndarray) -> Network:
    u, v = np.divmod(codes, n)
    return Network(n, np.column_stack([u, v]))


def build_ring_lattice(n: int) -> Network:
    """Ring lattice where node i links to i+-1 and i+-2 (mod n): 2n edges, degree 4."""
    if n < 5:
        raise NetworkError(f"ring lattice requires n >= 5 (distinct +-1/+-2 neighbors), got n={n}")
    i = np.arange(n, dtype=np.int64)
    edges = np.concatenate([
        np.column_stack([i, (i + 1) % n]),
        np.column_stack([i, (i + 2) % n]),
    ])
    return Network(n, edges)


def rewire(base: Network, alpha: float, rng: np.random.Generator) -> Network:
    """Independently replace each edge (i, j) with (i, k) with probability alpha.

    The new endpoint k is uniform over nodes that are neither i nor a current
    neighbor of i, so the graph stays simple and the edge count is preserved.
    Edges whose left endpoint already touches every other node are left alone.
    """
    if not 0.0 <= alpha <= 1.0:
        raise NetworkError(f"rewiring probability must be in [0, 1], got {alpha!r}")
    n = base.n
    edges = base.edges.copy()
    hit = np.flatnonzero(rng.random(edges.shape[0]) < alpha)
    if hit.size == 0:
        return Network(n, edges)
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in edges.tolist():
        adj[a].add(b)
        adj[b].add(a)
    for idx in hit.tolist():
        i, j = int(edges[idx, 0]), int(edges[idx, 1])
        if len(adj[i]) >= n - 1:
            continue
        while True:
            k = int(rng.integers(0, n))
            if k != i and k not in adj[i]:
                break
        adj[i].discard(j)
        adj[j].discard(i)
        adj[i].add(k)
        adj[k].add(i)
        edges[idx, 1] = k
    return Network(n, edges)


def _sample_pair_codes(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly sample m distinct unordered node pairs, returned as sorted codes."""
    total = n * (n - 1) // 2
    if m >= total:
        u, v = np.triu_indices(n, k=1)
        return (u.astype(np.int64) * n + v).astype(np.int64)
    seen = np.empty(0, dtype=np.int64)
    while seen.size < m:
        batch = max(16, int(1.2 * (m - seen.size)))
        cand = rng.integers(0, n, size=(batch, 2), dtype=np.int64)
        cand = cand[cand[:, 0] != cand[:, 1]]
        codes = cand.min(axis=1) * n + cand.max(axis=1)
        seen = np.union1d(seen, codes)
    if seen.size > m:
        keep = rng.permutation(seen.size)[:m]
        seen = seen[np.sort(keep)]
    return seen


def build_er_overlay(n: int, expected_added_degree: float, rng: np.random.Generator) -> Network:
    """Erdos-Renyi overlay G(n, beta) with beta = expected_added_degree / (n - 1)."""
    if expected_added_degree < 0:
        raise NetworkError(f"expected added degree must be >= 0, got {expected_added_degree!r}")
    if expected_added_degree > n - 1:
        raise NetworkError(
            f"expected added degree {expected_added_degree!r} exceeds n-1 = {n - 1}"
        )
    beta = expected_added_degree / (n - 1)
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, beta))
    return _network_from_codes(n, _sample_pair_codes(n, m, rng))


@dataclass
class NetworkSuite:
    """The eight nested restriction levels for one region, plus CSR adjacency."""

    n: int
    levels: list[Network]
    adjacency: list[sparse.csr_matrix] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.levels) != N_LEVELS:
            raise NetworkError(f"a suite has {N_LEVELS} levels, got {len(self.levels)}")
        if not self.adjacency:
            self.adjacency = [g.to_csr() for g in self.levels]

    @classmethod
    def from_single(cls, network: Network) -> "NetworkSuite":
        """Degenerate suite where every restriction level shares one topology."""
        adj = network.to_csr()
        return cls(network.n, [network] * N_LEVELS, [adj] * N_LEVELS)

    def level(self, index: int) -> Network:
        return self.levels[index]

    def mean_degrees(self) -> list[float]:
        return [g.mean_degree for g in self.levels]


def build_shuffled_lattice(n: int, alpha: float, rng: np.random.Generator) -> Network:
    """Degree-4 proximity lattice over a random node arrangement, rewired with alpha.

    Shuffling the arrangement makes the sample independent of the base ring,
    so composing several of them grows the mean degree by about 4 per layer
    instead of retracing the same physical neighborhoods.
    """
    perm = rng.permutation(n).astype(np.int64)
    ring = build_ring_lattice(n)
    return rewire(Network(n, perm[ring.edges]), alpha, rng)


def build_suite(n: int, behavior: BehaviorParams, rng: np.random.Generator) -> NetworkSuite:
    """Build the full L_0 .. R_l chain for a region of n nodes."""
    base = build_ring_lattice(n)
    codes = base.edge_codes()
    levels = [base]
    for _ in range(3):
        extra = build_shuffled_lattice(n, behavior.p_l, rng)
        codes = np.union1d(codes, extra.edge_codes())
        levels.append(_network_from_codes(n, codes))
    for added_degree in behavior.overlay_degrees:
        overlay = build_er_overlay(n, added_degree, rng)
        codes = np.union1d(codes, overlay.edge_codes())
        levels.append(_network_from_codes(n, codes))
    return NetworkSuite(n, levels)


def select_network(wpcf: int, scf: int, ldf: int) -> int:
    """Map the day's restriction flags to a suite level index (0 = L_0 .. 7 = R_l).

    The flag sum s in [0, 7] picks [R_l, R_m, R_s, R_xs, L_l, L_m, L_s, L_0][s],
    i.e. level index 7 - s: no restrictions -> densest graph.
    """
    if not 0 <= int(wpcf) <= 3:
        raise NetworkError(f"workplace-closing flag must be in 0..3, got {wpcf!r}")
    if not 0 <= int(scf) <= 3:
        raise NetworkError(f"school-closing flag must be in 0..3, got {scf!r}")
    if int(ldf) not in (0, 1):
        raise NetworkError(f"stay-home flag must be 0 or 1, got {ldf!r}")
    return MAX_RESTRICTION_SUM - (int(wpcf) + int(scf) + int(ldf))


def write_edge_lists(suite: NetworkSuite, directory: str | Path) -> list[Path]:
    """Write one "u v" edge-list file per level into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, net in zip(LEVEL_NAMES, suite.levels):
        path = directory / f"{name}.edges"
        with open(path, "w") as fh:
            for u, v in net.edges.tolist():
                fh.write(f"{u} {v}\n")
        paths.append(path)
    return paths
