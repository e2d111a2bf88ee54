"""Return probabilities of simple random walk and spectral-radius estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .multigraph import GraphOracle, ResourceGuardError, ball, make_oracle

EXACT_MAX_STEPS = 30
DEFAULT_MAX_STATES = 2_000_000


@dataclass
class ReturnTable:
    origin: object
    p: list  # p[n] = p_n(o, o) for n = 0..N
    exact: bool = False
    method: str = "lumped"

    @property
    def N(self) -> int:
        return len(self.p) - 1

    def even(self) -> list[tuple[int, float]]:
        """(n, p_{2n}) for 1 <= n <= N/2."""
        return [(n, float(self.p[2 * n])) for n in range(1, self.N // 2 + 1)]

    def to_json(self) -> dict:
        vals = [str(x) for x in self.p] if self.exact else [float(x) for x in self.p]
        origin = self.origin.hex() if isinstance(self.origin, bytes) else self.origin
        return {"origin": origin, "N": self.N, "exact": self.exact, "method": self.method, "p": vals}


def _step_dict(dist: dict, trans, exact: bool) -> dict:
    out: dict = {}
    for s, mass in dist.items():
        for t, pr in trans(s):
            out[t] = out.get(t, 0) + mass * (pr if exact else float(pr))
    return out


def return_probabilities(oracle, o=None, N: int = 100, exact: bool = False, method: str = "auto",
                         max_states: int = DEFAULT_MAX_STATES, check_mass: bool = True) -> ReturnTable:
    """p_n(o, o) for 0 <= n <= N by an exact distribution DP.

    ``method="lumped"`` runs the DP on the oracle's exact quotient chain
    (a few states per distance level); ``method="ball"`` runs it on the
    vertices of ball(o, N), which the walk cannot leave in N steps. ``auto``
    prefers the quotient when the oracle has one.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    if exact and N > EXACT_MAX_STEPS:
        raise ValueError(f"exact mode supports N <= {EXACT_MAX_STEPS}")
    oracle = make_oracle(oracle)
    o = oracle.root if o is None else o
    chain = oracle.lumped_chain(o) if method in ("auto", "lumped") else None
    if method == "lumped" and chain is None:
        raise ValueError(f"no exact quotient chain for {oracle.family} at {o!r}")
    one = Fraction(1) if exact else 1.0

    if chain is not None:
        trans = chain.trans
        start = chain.origin
        used = "lumped"
    else:
        bl = ball(oracle, o, N, max_vertices=max_states)
        g = bl.graph

        def trans(v):
            w = Fraction(1, oracle.degree(v))
            out: dict = {}
            for e in g.incidence[v]:
                h = g.darts[e].head
                out[h] = out.get(h, 0) + w
            return list(out.items())

        start = o
        used = "ball"

    dist = {start: one}
    p = [one]
    for n in range(1, N + 1):
        dist = _step_dict(dist, trans, exact)
        if len(dist) > max_states:
            raise ResourceGuardError(f"state guard: {len(dist)} states at step {n} exceed {max_states}")
        if check_mass and not exact:
            total = math.fsum(dist.values())
            if abs(total - 1.0) > 1e-12:
                raise AssertionError(f"probability mass {total!r} at step {n}")
        p.append(dist.get(start, 0 * one))
    return ReturnTable(o, p, exact, used)


@dataclass
class SpectralReport:
    lower_bounds: dict  # n -> p_{2n}^{1/(2n)}
    best_lower: float
    fitted_rho: float
    kappa: float
    intercept: float
    slow_convergence: bool
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "lower_bounds": {str(k): v for k, v in self.lower_bounds.items()},
            "best_lower": self.best_lower,
            "fitted_rho": self.fitted_rho,
            "kappa": self.kappa,
            "intercept": self.intercept,
            "slow_convergence": self.slow_convergence,
            "diagnostics": self.diagnostics,
        }


def rho_estimate(t: ReturnTable, min_steps: int = 8, kappa_limit: float = 3.0) -> SpectralReport:
    """Lower bounds p_{2n}^{1/(2n)} and a fit log p_{2n} = a + 2n log rho + kappa log n.

    The fit uses the top half of the even window, 2n in [N/2, N].
    """
    if t.N < min_steps:
        raise ValueError(f"need at least N = {min_steps} steps, got {t.N}")
    pairs = [(n, v) for n, v in t.even() if v > 0]
    if not pairs:
        raise ValueError("every even return probability is zero")
    lower = {n: math.exp(math.log(v) / (2 * n)) for n, v in pairs}
    half = t.N // 2
    window = [(n, v) for n, v in pairs if n >= max(1, half // 2)]
    if len(window) < 3:
        window = pairs
    ns = np.array([n for n, _ in window], dtype=float)
    y = np.log(np.array([v for _, v in window]))
    design = np.column_stack([np.ones_like(ns), 2 * ns, np.log(ns)])
    coef, residuals, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    a, log_rho, kappa = (float(c) for c in coef)
    rms = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return SpectralReport(
        lower_bounds=lower,
        best_lower=max(lower.values()),
        fitted_rho=math.exp(log_rho),
        kappa=kappa,
        intercept=a,
        slow_convergence=abs(kappa) > kappa_limit,
        diagnostics={"fit_window": [int(ns[0]), int(ns[-1])], "fit_points": len(window), "rank": int(rank), "rms_residual": rms},
    )


def tree_rho(d: int) -> float:
    """Spectral radius of the d-regular tree."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return 2 * math.sqrt(d - 1) / d


class RhoFromCogrowth(NamedTuple):
    rho: float
    boundary: bool  # cogr <= sqrt(d-1): the Ramanujan value is returned


def rho_from_cogrowth(cogr: float, d: int) -> RhoFromCogrowth:
    if d < 3:
        raise ValueError("d must be >= 3")
    if cogr < 0 or cogr > d - 1 + 1e-9:
        raise ValueError(f"cogrowth {cogr} outside [0, d-1]")
    if cogr <= math.sqrt(d - 1):
        return RhoFromCogrowth(tree_rho(d), True)
    return RhoFromCogrowth(((d - 1) / cogr + cogr) / d, False)


def cogr_from_rho(rho: float, d: int, tol: float = 1e-12) -> float:
    if d < 3:
        raise ValueError("d must be >= 3")
    low = tree_rho(d)
    if not low - tol <= rho <= 1 + tol:
        raise ValueError(f"rho {rho} outside [{low}, 1]")
    disc = max(0.0, d * d * rho * rho - 4 * (d - 1))
    return (d * rho + math.sqrt(disc)) / 2


def formula_residual(rho: float, cogr: float, d: int) -> float:
    """|d rho - (d-1)/cogr - cogr|."""
    return abs(d * rho - (d - 1) / cogr - cogr)


def lazy_rho(rho: float, p_delay: float) -> float:
    """Spectral radius after holding with probability ``p_delay`` at each step."""
    if not 0 <= p_delay < 1:
        raise ValueError("p_delay must lie in [0, 1)")
    return p_delay + (1 - p_delay) * rho


def oracle_rho(oracle: GraphOracle, N: int = 400, o=None) -> SpectralReport:
    return rho_estimate(return_probabilities(oracle, o, N))
