"""Lifting paths to the universal cover.

Paths are sequences of :class:`~nbwalk.multigraph.Dart`. Times are 1-based:
``p[t-1]`` is the t-th dart, and prefix 0 is the empty path. Erasing
backtracks is done with a stack; the stack after each prefix is the geodesic
from the start to the current position in the cover tree.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .multigraph import Dart


def is_path(p: Sequence[Dart]) -> bool:
    return all(p[i].head == p[i + 1].tail for i in range(len(p) - 1))


def is_backtrack_free(p: Sequence[Dart]) -> bool:
    return all(p[i + 1].id != p[i].reversal for i in range(len(p) - 1))


def reverse_path(p: Sequence[Dart], dart_by_id) -> list[Dart]:
    """The path traversed backwards; ``dart_by_id`` maps dart ids to darts."""
    return [dart_by_id(e.reversal) for e in reversed(p)]


def reduce(p: Iterable[Dart]) -> list[Dart]:
    """Erase backtracks iteratively (a loop followed by itself cancels)."""
    stack: list[Dart] = []
    for e in p:
        if stack and e.id == stack[-1].reversal:
            stack.pop()
        else:
            stack.append(e)
    return stack


def vertex_sequence(p: Sequence[Dart]) -> list:
    """Vertices visited at times 0..n."""
    if not p:
        return []
    return [p[0].tail] + [e.head for e in p]


def cover_nodes(p: Sequence[Dart]) -> list[int]:
    """Cover-tree node of every prefix, as small integers.

    Two prefixes get the same node iff their reductions coincide. Nodes are
    interned in a trie keyed by (parent node, dart id), so comparison is exact.
    """
    nodes = [0]
    parent = [0]
    via = [None]
    child: dict = {}
    cur = 0
    for e in p:
        if cur and via[cur] == e.reversal:
            cur = parent[cur]
        else:
            key = (cur, e.id)
            nxt = child.get(key)
            if nxt is None:
                nxt = child[key] = len(parent)
                parent.append(cur)
                via.append(e.id)
            cur = nxt
        nodes.append(cur)
    return nodes


@dataclass
class LiftTrace:
    depths: list  # |NB(p restricted to t)| for t = 0..n
    phi: list  # 1-based positions of the surviving darts
    excursions: list  # M_k: erased darts just before the k-th survivor
    pending: int  # erased darts after the last survivor
    survivors: list  # NB(p)

    @property
    def n(self) -> int:
        return len(self.depths) - 1

    def gaps(self) -> list[int]:
        """Phi(k+1) - Phi(k) with Phi(0) = 0."""
        return [m + 1 for m in self.excursions]

    def to_json(self) -> dict:
        return {
            "phi": self.phi,
            "excursions": self.excursions,
            "pending": self.pending,
            "survivors": [_jsonable(e.id) for e in self.survivors],
            "depths": self.depths,
        }


def _jsonable(x):
    if isinstance(x, bytes):
        return x.hex()
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


def lift_trace(p: Sequence[Dart]) -> LiftTrace:
    stack: list[tuple[Dart, int]] = []
    depths = [0]
    for t, e in enumerate(p, 1):
        if stack and e.id == stack[-1][0].reversal:
            stack.pop()
        else:
            stack.append((e, t))
        depths.append(len(stack))
    phi = [t for _, t in stack]
    excursions = []
    prev = 0
    for t in phi:
        excursions.append(t - prev - 1)
        prev = t
    return LiftTrace(depths, phi, excursions, len(p) - prev, [e for e, _ in stack])


def escape_times(p: Sequence[Dart]) -> set[int]:
    """Times t in [0, n-1] after which the cover lift never recrosses dart t+1.

    Horizon-relative: only the darts of ``p`` are consulted, so the result can
    only shrink as the path is extended.
    """
    return {t - 1 for t in lift_trace(p).phi}


class CycleKind(Enum):
    NOT_CYCLE = "not_cycle"
    TRIVIAL_CYCLE = "trivial_cycle"
    NT_CYCLE = "nt_cycle"


@dataclass(frozen=True)
class CycleClass:
    kind: CycleKind
    fnt: bool
    fnb: Optional[bool]  # None unless p is backtrack-free and closed


def classify_cycle(p: Sequence[Dart]) -> CycleClass:
    if not p:
        raise ValueError("empty path")
    first, last = p[0], p[-1]
    if first.tail != last.head:
        return CycleClass(CycleKind.NOT_CYCLE, False, None)
    single_loop = len(p) == 1 and first.is_loop
    if not reduce(p):
        return CycleClass(CycleKind.TRIVIAL_CYCLE, False, None)
    fnt = single_loop or first.id != last.reversal
    fnb = None
    if is_backtrack_free(p):
        fnb = single_loop or last.id != first.reversal
    return CycleClass(CycleKind.NT_CYCLE, fnt, fnb)


# ---------------------------------------------------------------------------
# Cycle windows


def _earliest_nt_starts(p: Sequence[Dart]) -> list[int]:
    """For each end u (1..n), the smallest i < u with (p[i+1..u]) an NT-cycle, or -1.

    Windows are closed in the base graph and open in the cover tree, i.e. the
    base vertex repeats but the cover node does not.
    """
    verts = vertex_sequence(p)
    nodes = cover_nodes(p)
    first: dict = {}
    other: dict = {}
    out = [-1] * (len(p) + 1)
    for t, (v, c) in enumerate(zip(verts, nodes)):
        f = first.get(v)
        if f is None:
            first[v] = (t, c)
            continue
        t0, c0 = f
        if c != c0:
            out[t] = t0
            if v not in other:
                other[v] = t
        else:
            out[t] = other.get(v, -1)
    return out


def _cover_mask(n: int, starts: Sequence[int], horizon: Optional[int] = None, min_len: int = 0) -> np.ndarray:
    """Boolean mask over times 0..n of the union of windows [i+1, u]."""
    h = n if horizon is None else horizon
    diff = np.zeros(n + 2, dtype=np.int64)
    for u in range(1, h + 1):
        i = starts[u]
        if i >= 0 and u - i > min_len:
            diff[i + 1] += 1
            diff[u + 1] -= 1
    return np.cumsum(diff)[: n + 1] > 0


def nt_cycle_mask(p: Sequence[Dart], horizons: Sequence[int] = ()) -> np.ndarray | list[np.ndarray]:
    starts = _earliest_nt_starts(p)
    if not horizons:
        return _cover_mask(len(p), starts)
    return [_cover_mask(len(p), starts, h)[: h + 1] for h in horizons]


def nt_cycle_times(p: Sequence[Dart]) -> set[int]:
    """All t in [1, n] lying in some window of ``p`` that is an NT-cycle."""
    return set(np.flatnonzero(nt_cycle_mask(p)).tolist())


def nt_counts(p: Sequence[Dart], horizons: Sequence[int]) -> list[int]:
    """Number of NT-cycle times of each prefix p[:h]."""
    return [int(m.sum()) for m in nt_cycle_mask(p, horizons)]


def cycle_windows(p: Sequence[Dart]) -> list[tuple[int, int]]:
    """All windows [s, u] (1-based, inclusive) that are closed in the base graph."""
    verts = vertex_sequence(p)
    seen: dict = {}
    out = []
    for u, v in enumerate(verts):
        for i in seen.get(v, ()):
            out.append((i + 1, u))
        seen.setdefault(v, []).append(u)
    return sorted(out)


def cycle_times(p: Sequence[Dart]) -> set[int]:
    """Times covered by closed windows; equals NT-cycle times on backtrack-free paths."""
    out = set()
    for s, u in cycle_windows(p):
        out.update(range(s, u + 1))
    return out


@dataclass
class CycleStats:
    n: int
    nt_times: frozenset
    c_indicator: dict  # alpha -> bool
    long_times: frozenset  # I(n, L)
    loop_times: frozenset  # loops outside I(n, L)
    disjoint_fnt: int  # D(n)
    short_times: frozenset  # times in closed windows of length <= L
    L: int = 0
    fnt_windows: list = field(default_factory=list, repr=False)

    @property
    def short_count(self) -> int:
        return len(self.short_times)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "L": self.L,
            "nt_times": sorted(self.nt_times),
            "c_indicator": {str(a): v for a, v in self.c_indicator.items()},
            "long_times": sorted(self.long_times),
            "loop_times": sorted(self.loop_times),
            "disjoint_fnt": self.disjoint_fnt,
            "short_count": self.short_count,
        }


def fnt_windows(p: Sequence[Dart]) -> list[tuple[int, int]]:
    """Non-loop FNT-cycle windows: NT, length >= 2, first dart not the reverse of the last."""
    verts = vertex_sequence(p)
    nodes = cover_nodes(p)
    by_vertex: dict = {}
    out = []
    for u, v in enumerate(verts):
        for i in by_vertex.get(v, ()):
            if u - i >= 2 and nodes[i] != nodes[u] and p[i].id != p[u - 1].reversal:
                out.append((i + 1, u))
        by_vertex.setdefault(v, []).append(u)
    return out


def max_disjoint(windows: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Earliest-end-first selection of pairwise disjoint closed integer intervals."""
    chosen = []
    last = -1
    for s, u in sorted(windows, key=lambda w: (w[1], w[0])):
        if s > last:
            chosen.append((s, u))
            last = u
    return chosen


def cycle_stats(p: Sequence[Dart], alpha, L: int) -> CycleStats:
    alphas = [alpha] if isinstance(alpha, (int, float)) else list(alpha)
    for a in alphas:
        if not 0 < a < 1:
            raise ValueError("alpha must lie in (0, 1)")
    if L < 1:
        raise ValueError("L must be >= 1")
    n = len(p)
    starts = _earliest_nt_starts(p)
    nt = frozenset(np.flatnonzero(_cover_mask(n, starts)).tolist())
    long_mask = _cover_mask(n, starts, min_len=L)
    long_times = frozenset(np.flatnonzero(long_mask).tolist())
    loop_times = frozenset(t for t in range(1, n + 1) if p[t - 1].is_loop and t not in long_times)
    windows = fnt_windows(p)

    verts = vertex_sequence(p)
    positions: dict = {}
    diff = np.zeros(n + 2, dtype=np.int64)
    for u, v in enumerate(verts):
        pos = positions.setdefault(v, [])
        k = bisect.bisect_left(pos, u - L)
        if k < len(pos):
            diff[pos[k] + 1] += 1
            diff[u + 1] -= 1
        pos.append(u)
    short = frozenset(np.flatnonzero(np.cumsum(diff)[: n + 1] > 0).tolist())

    return CycleStats(
        n=n,
        nt_times=nt,
        c_indicator={a: len(nt) > a * n for a in alphas},
        long_times=long_times,
        loop_times=loop_times,
        disjoint_fnt=len(max_disjoint(windows)),
        short_times=short,
        L=L,
        fnt_windows=windows,
    )
