"""Exhaustive cross-checks for the edit-distance machinery.

Two independent referees: a breadth-first search over the single-edit graph
(insert or delete one token per edge), which proves distance minimality
without any DP, and a full enumeration of deletion masks, which proves the
deletion oracle picks an optimal mask. Both are feasible only for short
interiors over small alphabets; `oracle-test` wires them to the CLI.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .vocab import RESERVED, TokenSeq
from .edits import lev_distance, oracle_deletion

MAX_EXHAUSTIVE_LEN = 7


def content_alphabet(size):
    """First `size` non-reserved ids."""
    return tuple(range(len(RESERVED), len(RESERVED) + size))


def all_interiors(alphabet, max_len):
    out = []
    for n in range(max_len + 1):
        out.extend(itertools.product(alphabet, repeat=n))
    return out


def _edit_graph(alphabet, cap):
    """Nodes: all interiors with length <= cap. Edges: single insert/delete."""
    nodes = all_interiors(alphabet, cap)
    index = {node: i for i, node in enumerate(nodes)}
    adjacency = []
    for node in nodes:
        nbrs = [index[node[:i] + node[i + 1 :]] for i in range(len(node))]
        if len(node) < cap:
            for i in range(len(node) + 1):
                for a in alphabet:
                    nbrs.append(index[node[:i] + (a,) + node[i:]])
        adjacency.append(nbrs)
    return nodes, index, adjacency


def bfs_distances(alphabet, max_len):
    """All-pairs shortest edit paths from every interior of length <= max_len.

    The graph is capped at length max_len + 1; a shortest path never needs
    longer intermediates (delete-then-insert orderings stay within the cap),
    so BFS distances within the cap are exact.
    """
    cap = max_len + 1
    nodes, index, adjacency = _edit_graph(alphabet, cap)
    sources = [n for n in nodes if len(n) <= max_len]
    dist = np.full((len(sources), len(nodes)), -1, dtype=np.int16)
    for s_row, src in enumerate(sources):
        row = dist[s_row]
        row[index[src]] = 0
        queue = deque([index[src]])
        while queue:
            u = queue.popleft()
            du = row[u] + 1
            for v in adjacency[u]:
                if row[v] < 0:
                    row[v] = du
                    queue.append(v)
    return sources, index, dist


@dataclass
class OracleCheckReport:
    max_len: int
    alphabet_size: int
    pairs_checked: int = 0
    distance_mismatches: int = 0
    deletion_mismatches: int = 0
    examples: list = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def passed(self):
        return self.distance_mismatches == 0 and self.deletion_mismatches == 0

    def summary_lines(self):
        status = "PASS" if self.passed else "FAIL"
        yield (
            f"oracle-test: interiors up to length {self.max_len} over "
            f"{self.alphabet_size} symbols, {self.pairs_checked} ordered pairs, "
            f"{self.elapsed_s:.1f}s"
        )
        yield f"  distance vs BFS edit graph: {self.distance_mismatches} mismatches"
        yield f"  deletion oracle vs exhaustive masks: {self.deletion_mismatches} mismatches"
        for kind, a, b, got, want in self.examples:
            yield f"  e.g. {kind} a={a} b={b}: got {got}, brute force says {want}"
        yield f"  {status}"


def _lev_distance_broken(a, b):
    """Deliberately buggy DP (missing base-row init); detector self-test only."""
    xs, ys = a.interior, b.interior
    la, lb = len(xs), len(ys)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = [0] * (lb + 1)
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        for j in range(1, lb + 1):
            if xs[i - 1] == ys[j - 1]:
                cur[j] = prev[j - 1]
            else:
                cur[j] = 1 + min(prev[j], cur[j - 1])
        prev, cur = cur, prev
    return prev[lb]


def run_oracle_check(max_len, alphabet_size, mutate=False, max_reported=5):
    """Check lev_distance and oracle_deletion against brute force, all pairs.

    With mutate=True the distance function is replaced by a broken variant;
    the run is expected to FAIL, demonstrating the checks have teeth.
    """
    if max_len > MAX_EXHAUSTIVE_LEN:
        raise ConfigError(f"exhaustive check supports max_len <= {MAX_EXHAUSTIVE_LEN}")
    if alphabet_size < 1:
        raise ConfigError("alphabet_size must be >= 1")
    distance_fn = _lev_distance_broken if mutate else lev_distance
    t0 = time.perf_counter()
    alphabet = content_alphabet(alphabet_size)
    sources, index, dist = bfs_distances(alphabet, max_len)
    row_of = {src: r for r, src in enumerate(sources)}
    node_col = [index[src] for src in sources]
    report = OracleCheckReport(max_len=max_len, alphabet_size=alphabet_size)

    seqs = [TokenSeq.from_interior(src) for src in sources]
    for ai, a in enumerate(sources):
        seq_a = seqs[ai]
        # distance check against the BFS referee
        for bi, b in enumerate(sources):
            got = distance_fn(seq_a, seqs[bi])
            want = int(dist[ai, node_col[bi]])
            if got != want:
                report.distance_mismatches += 1
                if len(report.examples) < max_reported:
                    report.examples.append(("distance", a, b, got, want))
            report.pairs_checked += 1

        # deletion-oracle check: best over all masks, via BFS distances
        subset_rows = sorted({row_of[s] for s in _subsequences(a)})
        best = dist[subset_rows].min(axis=0)
        for bi, b in enumerate(sources):
            mask = oracle_deletion(seq_a, seqs[bi])
            kept = tuple(t for t, m in zip(a, mask[1:-1]) if not m)
            achieved = int(dist[row_of[kept], node_col[bi]])
            optimal = int(best[node_col[bi]])
            if achieved != optimal:
                report.deletion_mismatches += 1
                if len(report.examples) < max_reported:
                    report.examples.append(("deletion", a, b, achieved, optimal))

    report.elapsed_s = time.perf_counter() - t0
    return report


def _subsequences(tokens):
    seen = set()
    for bits in range(1 << len(tokens)):
        sub = tuple(t for i, t in enumerate(tokens) if bits >> i & 1)
        seen.add(sub)
    return seen
