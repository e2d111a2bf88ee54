"""Non-backtracking path and cycle counts, cogrowth, and path surgery.

All counts are exact Python integers. ``b[n]`` is the number of
non-backtracking cycles of length n at the root and ``b_star[n]`` the number
of those that are fully non-backtracking (a loop, or last dart not the
reverse of the first). ``b[0] = b_star[0] = 1`` by convention and is ignored
by every statistic.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .cover import cycle_windows, is_backtrack_free, is_path, reduce, vertex_sequence
from .multigraph import Dart, GraphOracle, Multigraph, ResourceGuardError, ball

DEFAULT_BUDGET = 50_000_000  # darts x max length


@dataclass
class NbOperator:
    succ: list  # succ[e] = dart ids f with head(e) = tail(f), f != reversal(e)
    matrix: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return len(self.succ)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def nb_operator(g: Multigraph) -> NbOperator:
    succ = []
    rows, cols = [], []
    for e in g.darts:
        nxt = [f for f in g.incidence[e.head] if f != e.reversal]
        succ.append(nxt)
        rows.extend([e.id] * len(nxt))
        cols.extend(nxt)
    n = len(g.darts)
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return NbOperator(succ, m)


def _advance(succ, vec: list) -> list:
    out = [0] * len(vec)
    for f, c in enumerate(vec):
        if c:
            for h in succ[f]:
                out[h] += c
    return out


def nb_path_count(g: Multigraph, x, n: int) -> int:
    """Number of backtrack-free dart sequences of length n starting at x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    succ = nb_operator(g).succ
    vec = [0] * len(g.darts)
    for e in g.incidence[x]:
        vec[e] += 1
    for _ in range(n - 1):
        vec = _advance(succ, vec)
    return sum(vec)


@dataclass
class CycleCensus:
    root: object
    b: list
    b_star: list
    c_x_bound: Optional[float] = None
    girth_at_root: Optional[int] = None

    @property
    def N(self) -> int:
        return len(self.b) - 1

    @property
    def S(self) -> list[int]:
        return [n for n in range(1, self.N + 1) if self.b[n]]

    @property
    def S_star(self) -> list[int]:
        return [n for n in range(1, self.N + 1) if self.b_star[n]]

    @property
    def b_hat(self) -> list[int]:
        return [b - s for b, s in zip(self.b, self.b_star)]

    @property
    def fekete_lower(self) -> float:
        """max over 2 <= n <= N of (b*_n / 2)^(1/n), a certified lower bound for cogrowth."""
        best = 0.0
        for n in range(2, self.N + 1):
            if self.b_star[n]:
                best = max(best, math.exp((math.log(self.b_star[n]) - math.log(2)) / n))
        return best

    def to_json(self) -> dict:
        out = {
            "root": _key_json(self.root),
            "b": self.b[1:],
            "b_star": self.b_star[1:],
            "fekete_lower": self.fekete_lower,
            "S": self.S,
            "S_star": self.S_star,
        }
        if self.c_x_bound is not None:
            out["c_x_bound"] = self.c_x_bound
            out["girth_at_root"] = self.girth_at_root
        return out


def _key_json(v):
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, tuple):
        return [_key_json(x) for x in v]
    return v


def cycle_census(g: Multigraph, x, N: int, budget: int = DEFAULT_BUDGET, cogr: Optional[float] = None) -> CycleCensus:
    """Exact b_n(x), b*_n(x) for 1 <= n <= N by DP over (start dart, current dart)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if len(g.darts) * N > budget:
        raise ResourceGuardError(f"census budget guard: {len(g.darts)} darts x N={N} exceeds {budget}")
    succ = nb_operator(g).succ
    closing = [e.head == x for e in g.darts]
    b = [1] + [0] * N
    b_star = [1] + [0] * N
    for e0 in g.incidence[x]:
        rev0 = g.darts[e0].reversal
        vec = [0] * len(g.darts)
        vec[e0] = 1
        for n in range(1, N + 1):
            tot = 0
            for f, c in enumerate(vec):
                if c and closing[f]:
                    tot += c
            b[n] += tot
            # n = 1: a closed 1-dart path is a loop, which counts as FNB
            b_star[n] += tot if n == 1 else tot - (vec[rev0] if closing[rev0] else 0)
            if n < N:
                vec = _advance(succ, vec)
    census = CycleCensus(x, b, b_star)
    if cogr is not None:
        L = shortest_cycle_through(g, x)
        if L is not None:
            census.girth_at_root = L
            census.c_x_bound = 2 + 2 * L * cogr ** (L - 2)
    return census


def shortest_cycle_through(g: Multigraph, x) -> Optional[int]:
    """Length of a shortest simple cycle through x (1 for a loop), or None."""
    best = None
    for e in g.incidence[x]:
        d = g.darts[e]
        if d.is_loop:
            return 1
        # shortest path from head(e) back to x avoiding the edge of e
        banned = {d.id, d.reversal}
        dist = {d.head: 0}
        queue = deque([d.head])
        while queue:
            v = queue.popleft()
            if v == x:
                break
            for f in g.incidence[v]:
                fd = g.darts[f]
                if f in banned or fd.head in dist:
                    continue
                dist[fd.head] = dist[v] + 1
                queue.append(fd.head)
        if x in dist:
            L = dist[x] + 1
            best = L if best is None else min(best, L)
    return best


# ---------------------------------------------------------------------------
# Cogrowth


@dataclass
class CogrowthEstimate:
    method: str  # "spectral", "spectral-squared" or "fekete-lower"
    value: Optional[float]
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"method": self.method, "value": self.value, "converged": self.converged, "diagnostics": self.diagnostics}


def _power_iteration(m: sp.csr_matrix, tol: float, max_iter: int):
    x = np.ones(m.shape[0])
    lam = None
    delta = math.inf
    for it in range(1, max_iter + 1):
        y = m @ x
        norm = np.abs(y).sum()
        if norm == 0:
            return 0.0, it, 0.0, True
        new = float(norm / np.abs(x).sum())
        x = y / norm
        if lam is not None:
            delta = float(abs(new - lam) / new)
            if delta < tol:
                return new, it, delta, True
        lam = new
    return lam, max_iter, delta, False


def cogrowth(target, tol: float = 1e-12, max_iter: int = 100_000, root=None, radii: Sequence[int] = (2, 4, 6, 8),
             max_ball: int = 200_000) -> CogrowthEstimate:
    """Cogrowth of a finite graph (power iteration on the non-backtracking
    operator) or a certified lower bound for an oracle (ball censuses)."""
    if isinstance(target, Multigraph):
        op = nb_operator(target)
        lam, it, delta, ok = _power_iteration(op.matrix, tol, max_iter)
        if ok:
            return CogrowthEstimate("spectral", lam, True, {"iterations": it, "last_delta": delta})
        # period-2 oscillation (bipartite dart dynamics): iterate B^2 instead
        lam2, it2, delta2, ok2 = _power_iteration(op.matrix @ op.matrix, tol, max_iter)
        diag = {"iterations": it, "last_delta": delta, "iterations_squared": it2, "last_delta_squared": delta2}
        if ok2:
            return CogrowthEstimate("spectral-squared", math.sqrt(lam2), True, diag)
        return CogrowthEstimate("spectral-squared", None, False, diag)

    if not isinstance(target, GraphOracle):
        raise TypeError("cogrowth needs a Multigraph or a GraphOracle")
    o = target.root if root is None else root
    best = 0.0
    per_radius = []
    for r in radii:
        bl = ball(target, o, r, max_vertices=max_ball)
        # closed walks of length <= 2r + 1 from o stay inside the ball
        census = cycle_census(bl.graph, o, 2 * r + 1)
        best = max(best, census.fekete_lower)
        per_radius.append({"radius": r, "fekete_lower": census.fekete_lower, "vertices": len(bl.graph.vertices)})
    return CogrowthEstimate("fekete-lower", best, True, {"radius": radii[-1] if radii else 0, "per_radius": per_radius})


# ---------------------------------------------------------------------------
# Ramanujan check


@dataclass
class RamanujanCertificate:
    passed: bool
    d: int
    N: int
    witness: Optional[tuple] = None  # (root, n, b*_n)
    note: str = "pass at finite depth is necessary-only evidence"

    def to_json(self) -> dict:
        w = None
        if self.witness is not None:
            w = [_key_json(self.witness[0]), self.witness[1], self.witness[2]]
        return {"passed": self.passed, "d": self.d, "N": self.N, "witness": w, "note": self.note}


def fnb_bound_holds(b_star: int, d: int, n: int) -> bool:
    """Exact test of b* <= 2 (d-1)^(n/2)."""
    return b_star * b_star <= 4 * (d - 1) ** n


def ramanujan_certificate(g, roots: Optional[Sequence] = None, N: int = 10, d: Optional[int] = None) -> RamanujanCertificate:
    """Check b*_n(x) <= 2 (d-1)^(n/2) for all roots and 1 <= n <= N.

    ``g`` is a regular Multigraph or a regular GraphOracle; for an oracle the
    census of each root is taken on the ball of radius ceil(N/2), which holds
    every cycle of length <= N.
    """
    if isinstance(g, GraphOracle):
        if g.regular is None:
            raise ValueError("ramanujan_certificate needs a regular graph")
        d = g.regular
        roots = [g.root] if roots is None else list(roots)
        censuses = [cycle_census(ball(g, x, (N + 1) // 2).graph, x, N) for x in roots]
    else:
        reg = g.regular_degree()
        if d is None:
            if reg is None:
                raise ValueError("ramanujan_certificate needs a regular graph")
            d = reg
        elif reg is not None and reg != d:
            raise ValueError(f"graph is {reg}-regular, not {d}-regular")
        roots = list(g.vertices) if roots is None else list(roots)
        censuses = [cycle_census(g, x, N) for x in roots]
    for census in censuses:
        for n in range(1, N + 1):
            if not fnb_bound_holds(census.b_star[n], d, n):
                return RamanujanCertificate(False, d, N, (census.root, n, census.b_star[n]))
    return RamanujanCertificate(True, d, N)


# ---------------------------------------------------------------------------
# Interval selection and path surgery


def vitali_select(intervals: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Greedy selection of pairwise disjoint intervals, longest first.

    Ties go to the smaller start, then the smaller end. Intervals are closed
    integer intervals and disjoint means sharing no integer. The result keeps
    the input order. The union of the selected intervals, tripled about their
    centres, covers every input interval, so their total length is at least a
    third of the length of the union of the input.
    """
    order = sorted(range(len(intervals)), key=lambda i: (-(intervals[i][1] - intervals[i][0]), intervals[i][0], intervals[i][1]))
    chosen: list[int] = []
    for i in order:
        s, u = intervals[i]
        if s > u:
            raise ValueError(f"bad interval {intervals[i]}")
        if all(u < intervals[j][0] or s > intervals[j][1] for j in chosen):
            chosen.append(i)
    return [intervals[i] for i in sorted(chosen)]


def interval_length(iv: tuple[int, int]) -> int:
    return iv[1] - iv[0]


def union_length(intervals: Sequence[tuple[int, int]]) -> int:
    """Lebesgue measure of the union of [s, u] over the intervals."""
    total = 0
    end = None
    for s, u in sorted(intervals):
        if end is None or s > end:
            total += u - s
            end = u
        elif u > end:
            total += u - end
            end = u
    return total


def reduce_excise(p: Sequence[Dart]) -> list[Dart]:
    """Shorten a backtrack-free path to a cycle-free one.

    Each round selects disjoint cycle windows with :func:`vitali_select`,
    deletes them, and erases the backtracks created at the seams. Rounds repeat
    until no cycle is left; the first round alone removes at least a third of
    the cycle times.
    """
    if not is_backtrack_free(p):
        raise ValueError("reduce_excise needs a backtrack-free path")
    cur = list(p)
    while True:
        windows = cycle_windows(cur)
        if not windows:
            return cur
        drop = set()
        for s, u in vitali_select(windows):
            drop.update(range(s, u + 1))
        cur = reduce([e for t, e in enumerate(cur, 1) if t not in drop])


def _last_cycle_start(p: Sequence[Dart]) -> Optional[int]:
    verts = vertex_sequence(p)
    target = verts[-1]
    for i, v in enumerate(verts[:-1]):
        if v == target:
            return i
    return None


def close_to_cycle(p: Sequence[Dart], dart_by_id) -> list[Dart]:
    """Extend a backtrack-free path whose last dart completes a cycle to a
    backtrack-free cycle that begins with the path itself.

    With m the first time the final vertex was visited and P' =
    reduce_excise(p): if P' does not end in the last dart of p, the result is
    p followed by P' reversed; otherwise P' = H + p[s:] with s minimal, and the
    result is p + p[m:s] + reverse(H). When p[m] is the reverse of the last
    dart that second form would backtrack at the seam, so the result is p
    followed by reduce_excise(p[:m]) reversed, whose first dart reverses
    p[m-1]. ``dart_by_id`` maps ids to darts.
    """
    if not p or not is_backtrack_free(p):
        raise ValueError("close_to_cycle needs a nonempty backtrack-free path")
    m = _last_cycle_start(p)
    if m is None:
        raise ValueError("path does not end by completing a cycle")
    n = len(p)
    reduced = reduce_excise(p)
    # s = number of darts of p before the longest common suffix with reduced
    s = n
    while s > 0 and n - s < len(reduced) and reduced[len(reduced) - (n - s) - 1] == p[s - 1]:
        s -= 1
    rev = lambda path: [dart_by_id(e.reversal) for e in reversed(path)]  # noqa: E731
    if s == n:
        return list(p) + rev(reduced)
    if p[m].id == p[-1].reversal:
        return list(p) + rev(reduce_excise(p[:m]))
    head = reduced[: len(reduced) - (n - s)]
    return list(p) + list(p[m:s]) + rev(head)


def close_to_cycle_bound(p: Sequence[Dart]) -> float:
    """2n - (cycle times)/3 + (length of the longest cycle ending at time n)."""
    from .cover import cycle_times

    m = _last_cycle_start(p)
    n = len(p)
    return 2 * n - len(cycle_times(p)) / 3 + (n - m)


def fnb_injection(c: Sequence[Dart], base: Sequence[Dart], dart_by_id) -> list[Dart]:
    """Map a non-FNB NB-cycle at x to an FNB-cycle at x, injectively.

    ``base`` is a simple cycle starting and ending at x. Three cases, told
    apart by the first dart of the output (a loop, a dart of the base cycle,
    anything else):

    * the last dart is a loop: drop it (length - 1);
    * the last dart lies on the base cycle: the maximal final run along the
      base cycle is a partial lap (e_k..e_L) plus whole laps; keep what
      precedes it, walk back (e_{k-1}..e_1) reversed, then the whole laps
      reversed (length change in [2 - L, L - 2]);
    * otherwise: append one lap of the base cycle (length + L).
    """
    c = list(c)
    x = c[0].tail if c else None
    if len(c) < 2 or c[-1].head != x or not is_backtrack_free(c):
        raise ValueError("c must be a non-backtracking cycle of length >= 2")
    if c[-1].id != c[0].reversal:
        raise ValueError("c is already fully non-backtracking")
    if not base or base[0].tail != x or base[-1].head != x or not is_path(base) or not is_backtrack_free(base):
        raise ValueError("base must be a cycle at the root of c")
    if c[-1].is_loop:
        return c[:-1]

    fwd = [e.id for e in base]
    bwd = [e.reversal for e in reversed(base)]
    if c[-1].id not in fwd and c[-1].id not in bwd:
        return c + list(base)
    lap = fwd if c[-1].id in fwd else bwd
    on_lap = set(lap)
    L = len(lap)
    j = len(c)
    while j > 0 and c[j - 1].id in on_lap:
        j -= 1
    run = c[j:]
    k0 = (L - len(run) % L) % L  # run = lap[k0:] + whole laps
    whole = run[(L - k0) % L:]
    back = [dart_by_id(dart_by_id(lap[i]).reversal) for i in range(k0 - 1, -1, -1)]
    return c[:j] + back + [dart_by_id(e.reversal) for e in reversed(whole)]
