"""Seeded random walks and the cycle-statistics experiments built on them.

Every trial draws from its own generator, seeded by a splitmix64 mix of the
master seed and the trial index, so results do not depend on how trials are
scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .census import cycle_census
from .cover import lift_trace, nt_cycle_mask
from .multigraph import Dart, FamilySpec, GraphOracle, ResourceGuardError, ball, make_oracle

MASK64 = (1 << 64) - 1
Z95 = 1.959963984540054
DEFAULT_MAX_TRIALS = 1_000_000


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master: int, trial: int) -> int:
    """64-bit seed of one trial: splitmix64(splitmix64(master) ^ trial)."""
    return splitmix64(splitmix64(master & MASK64) ^ (trial & MASK64))


class WalkStuck(RuntimeError):
    """A non-backtracking walk reached a vertex of degree 1."""


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_srw(oracle, o=None, n: int = 1, seed=0) -> list[Dart]:
    """Simple random walk: each step picks one of the darts at the current vertex uniformly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    oracle = make_oracle(oracle)
    v = oracle.root if o is None else o
    u = _rng(seed).random(n)
    path = []
    for x in u:
        e = oracle.dart_at(v, int(x * oracle.degree(v)))
        path.append(e)
        v = e.head
    return path


def simulate_nbw(oracle, o=None, n: int = 1, seed=0) -> list[Dart]:
    """Non-backtracking walk: after the first step, never take the reversal of the last dart."""
    if n < 1:
        raise ValueError("n must be >= 1")
    oracle = make_oracle(oracle)
    v = oracle.root if o is None else o
    u = _rng(seed).random(n)
    e = oracle.dart_at(v, int(u[0] * oracle.degree(v)))
    path = [e]
    for x in u[1:]:
        v = e.head
        deg = oracle.degree(v)
        if deg < 2:
            raise WalkStuck(f"non-backtracking walk stuck at degree-1 vertex {v!r}")
        k = int(x * (deg - 1))
        if k >= oracle.dart_index(v, e.reversal):
            k += 1
        e = oracle.dart_at(v, k)
        path.append(e)
    return path


# ---------------------------------------------------------------------------
# Configuration and reports


@dataclass
class WalkConfig:
    family: dict
    steps: int
    trials: int
    seed: int = 0
    origin: Optional[object] = None
    walk: str = "srw"  # "srw" or "nbw"
    workers: int = 1
    max_trials: int = DEFAULT_MAX_TRIALS

    def __post_init__(self):
        if isinstance(self.family, FamilySpec):
            self.family = self.family.to_dict()
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.walk not in ("srw", "nbw"):
            raise ValueError("walk must be 'srw' or 'nbw'")
        if self.trials > self.max_trials:
            raise ResourceGuardError(f"trial guard: {self.trials} trials exceed {self.max_trials}")

    @classmethod
    def from_dict(cls, obj: dict) -> "WalkConfig":
        known = {"family", "steps", "trials", "seed", "origin", "walk", "workers", "max_trials"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown walk config keys: {sorted(extra)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(self.origin, bytes):
            out["origin"] = self.origin.hex()
        return out

    def oracle(self) -> GraphOracle:
        return make_oracle(self.family)

    def start(self, oracle: GraphOracle):
        return oracle.root if self.origin is None else self.origin

    def path(self, oracle: GraphOracle, trial: int) -> list[Dart]:
        sim = simulate_srw if self.walk == "srw" else simulate_nbw
        return sim(oracle, self.start(oracle), self.steps, trial_seed(self.seed, trial))


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    estimate: object
    ci: object
    tallies: dict
    per_trial: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self, per_trial: bool = True) -> dict:
        out = {
            "experiment": self.experiment,
            "config": self.config,
            "estimate": self.estimate,
            "ci": self.ci,
            "tallies": self.tallies,
            "extra": self.extra,
        }
        if per_trial:
            out["per_trial"] = self.per_trial
        return out

    def to_csv(self) -> str:
        """Per-trial statistics, one row per trial."""
        cols = list(self.per_trial)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial"] + cols)
        n = len(self.per_trial[cols[0]]) if cols else 0
        for i in range(n):
            w.writerow([i] + [self.per_trial[c][i] for c in cols])
        return buf.getvalue()


def proportion_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Normal interval with continuity correction; Clopper-Pearson when k/n < 1e-3."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = k / n
    if p < 1e-3:
        a = 1 - level
        lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
        hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
        return lo, hi
    z = float(stats.norm.ppf(0.5 + level / 2))
    half = z * math.sqrt(p * (1 - p) / n) + 0.5 / n
    return max(0.0, p - half), min(1.0, p + half)


def mean_ci(values: Sequence[float]) -> tuple[float, tuple[float, float]]:
    x = np.asarray(values, dtype=float)
    m = float(x.mean())
    if len(x) < 2:
        return m, (m, m)
    half = Z95 * float(x.std(ddof=1)) / math.sqrt(len(x))
    return m, (m - half, m + half)


def _run(task, cfg: WalkConfig, extra: tuple) -> list:
    """Apply ``task(cfg, extra, trials)`` over all trials in trial order."""
    idx = list(range(cfg.trials))
    if cfg.workers <= 1 or cfg.trials < 2:
        return task(cfg, extra, idx)
    chunks = [idx[i :: cfg.workers] for i in range(cfg.workers)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(task, [cfg] * len(chunks), [extra] * len(chunks), chunks))
    out = [None] * cfg.trials
    for chunk, res in zip(chunks, parts):
        for i, r in zip(chunk, res):
            out[i] = r
    return out


# ---------------------------------------------------------------------------
# Experiments


def default_checkpoints(n: int) -> list[int]:
    return sorted({max(1, n // 4), max(1, n // 2), n})


def _density_task(cfg: WalkConfig, extra: tuple, trials: list) -> list:
    (checkpoints,) = extra
    oracle = cfg.oracle()
    out = []
    for t in trials:
        masks = nt_cycle_mask(cfg.path(oracle, t), checkpoints)
        out.append([int(m.sum()) for m in masks])
    return out


def nt_density_experiment(cfg: WalkConfig, checkpoints: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Fraction of times in [1, h] lying on a non-trivial cycle, per trial and checkpoint h."""
    cps = default_checkpoints(cfg.steps) if checkpoints is None else sorted(set(int(h) for h in checkpoints))
    if not cps or cps[0] < 1 or cps[-1] > cfg.steps:
        raise ValueError("checkpoints must lie in [1, steps]")
    if cps[-1] != cfg.steps:
        cps.append(cfg.steps)
    counts = _run(_density_task, cfg, (tuple(cps),))
    dens = {h: [c[i] / h for c in counts] for i, h in enumerate(cps)}
    final = dens[cfg.steps]
    est, ci = mean_ci(final)
    per_cp = {str(h): {"mean": mean_ci(dens[h])[0], "ci": list(mean_ci(dens[h])[1])} for h in cps}
    per_trial = {f"density_{h}": dens[h] for h in cps}
    per_trial["max_density"] = [max(dens[h][i] for h in cps) for i in range(cfg.trials)]
    positive = sum(1 for x in final if x > 0)
    return ExperimentReport(
        "nt_density",
        {"walk": cfg.to_dict(), "checkpoints": cps},
        est,
        list(ci),
        {"positive": positive, "zero": cfg.trials - positive},
        per_trial,
        {"checkpoints": per_cp},
    )


def on_short_cycle(oracle: GraphOracle, v, L: int) -> bool:
    """Whether some non-trivial cycle of length <= L passes through v.

    Such a cycle rotates to a closed path at v whose reduction is a
    non-backtracking cycle at v of length <= L, and that stays within
    distance L // 2 of v.
    """
    bl = ball(oracle, v, L // 2)
    return any(cycle_census(bl.graph, v, L).b[1:])


def _qn_lumped(cfg, oracle, chain, L, horizons, block):
    seeds = [np.random.default_rng(trial_seed(cfg.seed, t)) for t in range(cfg.trials)]
    state = np.full(cfg.trials, chain.origin, dtype=np.int64)
    cache: dict = {}

    def member(s):
        hit = cache.get(s)
        if hit is None:
            hit = cache[s] = on_short_cycle(oracle, chain.representative(s), L)
        return hit

    rows = {}
    pending = sorted(horizons)
    done = 0
    while pending:
        width = min(block, pending[-1] - done)
        u = np.stack([g.random(width) for g in seeds], axis=1)
        for j in range(width):
            state = chain.step(state, u[j])
            done += 1
            if pending and done == pending[0]:
                rows[done] = [int(member(int(s))) for s in state]
                pending.pop(0)
    return rows


def qn_experiment(cfg: WalkConfig, L: int, horizons: Sequence[int] = (10, 100, 1000, 10000), block: int = 256) -> ExperimentReport:
    """q_n: probability that the walk at time n sits on a non-trivial cycle of length <= L.

    When the oracle has an exact quotient chain whose classes are automorphism
    orbits, trials run vectorised on that chain; otherwise each trial walks on
    the oracle itself.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    hs = sorted(set(int(h) for h in horizons))
    if not hs or hs[0] < 1:
        raise ValueError("horizons must be positive")
    oracle = cfg.oracle()
    chain = oracle.lumped_chain(cfg.start(oracle)) if cfg.walk == "srw" else None
    if chain is not None:
        rows = _qn_lumped(cfg, oracle, chain, L, hs, block)
        method = "lumped"
    else:
        big = WalkConfig(**{**asdict(cfg), "steps": hs[-1]})
        per = _run(_qn_task, big, (L, tuple(hs)))
        rows = {h: [p[i] for p in per] for i, h in enumerate(hs)}
        method = "walk"
    est, cis, tallies = {}, {}, {}
    for h in hs:
        k = sum(rows[h])
        est[str(h)] = k / cfg.trials
        cis[str(h)] = list(proportion_ci(k, cfg.trials))
        tallies[str(h)] = {"on_cycle": k, "off_cycle": cfg.trials - k}
    return ExperimentReport(
        "qn",
        {"walk": cfg.to_dict(), "L": L, "horizons": hs},
        est,
        cis,
        tallies,
        {f"on_cycle_{h}": rows[h] for h in hs},
        {"method": method},
    )


def _qn_task(cfg: WalkConfig, extra: tuple, trials: list) -> list:
    L, hs = extra
    oracle = cfg.oracle()
    cache: dict = {}
    out = []
    for t in trials:
        path = cfg.path(oracle, t)
        row = []
        for h in hs:
            v = path[h - 1].head
            key = oracle.canonical_key(v)
            if key not in cache:
                cache[key] = on_short_cycle(oracle, v, L)
            row.append(int(cache[key]))
        out.append(row)
    return out


def escape_envelope(t) -> float:
    return (8 / 9) ** (t / 2)


def _gap_task(cfg: WalkConfig, extra: tuple, trials: list) -> list:
    (burn,) = extra
    oracle = cfg.oracle()
    out = []
    for t in trials:
        tr = lift_trace(cfg.path(oracle, t))
        # a survivor close to the horizon may still be erased later
        keep = [g for g, end in zip(tr.gaps(), tr.phi) if end <= cfg.steps - burn]
        out.append(keep)
    return out


def escape_tail_experiment(cfg: WalkConfig, t_min: int = 10, t_max: int = 40, t0: int = 0, burn: int = 200) -> ExperimentReport:
    """Empirical tail P(gap > t) of the gaps between surviving darts against (8/9)^(t/2)."""
    oracle = cfg.oracle()
    if oracle.min_degree is None or oracle.min_degree < 3:
        raise ValueError("escape tails need every degree >= 3")
    gaps_per = _run(_gap_task, cfg, (burn,))
    gaps = np.concatenate([np.asarray(g, dtype=np.int64) for g in gaps_per]) if gaps_per else np.zeros(0, np.int64)
    N = len(gaps)
    if N == 0:
        raise ValueError("no gaps survived the burn margin; increase steps")
    rows = []
    violations = []
    for t in range(t_min, t_max + 1):
        k = int((gaps > t).sum())
        env = escape_envelope(t)
        sigma = math.sqrt(env * (1 - env) / N)
        emp = k / N
        rows.append({"t": t, "count": k, "empirical": emp, "envelope": env, "sigma": sigma, "ci": list(proportion_ci(k, N))})
        if t > t0 and emp > env + 3 * sigma:
            violations.append(t)
    odd_excursions = int(((gaps - 1) % 2 != 0).sum())
    return ExperimentReport(
        "escape_tail",
        {"walk": cfg.to_dict(), "t_min": t_min, "t_max": t_max, "t0": t0, "burn": burn},
        {str(r["t"]): r["empirical"] for r in rows},
        {str(r["t"]): r["ci"] for r in rows},
        {"gaps": N, "by_trial": [len(g) for g in gaps_per]},
        {"n_gaps": [len(g) for g in gaps_per]},
        {"rows": rows, "violations": violations, "odd_excursions": odd_excursions},
    )


def _pair_task(cfg: WalkConfig, extra: tuple, trials: list) -> list:
    oracle = cfg.oracle()
    out = []
    for t in trials:
        p = cfg.path(oracle, t)
        out.append(sum(1 for i in range(1, len(p) // 2 + 1) if p[2 * i - 1].id == p[2 * i - 2].reversal))
    return out


def _merged_bins(obs: np.ndarray, exp: np.ndarray, min_expected: float = 5.0):
    """Merge adjacent bins from both ends until every expected count is >= min_expected."""
    o, e = list(obs), list(exp)
    while len(e) > 2 and e[0] < min_expected:
        e0, o0 = e.pop(0), o.pop(0)
        e[0] += e0
        o[0] += o0
    while len(e) > 2 and e[-1] < min_expected:
        e1, o1 = e.pop(), o.pop()
        e[-1] += e1
        o[-1] += o1
    # interior bins of a binomial are the largest, so the ends are all that need merging
    return np.array(o, dtype=float), np.array(e, dtype=float)


def backtrack_pair_experiment(cfg: WalkConfig) -> ExperimentReport:
    """Z = #{i <= n/2 : dart 2i reverses dart 2i-1}, compared with Binomial(n/2, 1/d)."""
    oracle = cfg.oracle()
    d = oracle.regular
    if d is None:
        raise ValueError("backtrack pairs need a regular graph")
    if cfg.walk != "srw":
        raise ValueError("backtrack pairs are defined for simple random walk")
    z = np.asarray(_run(_pair_task, cfg, ()), dtype=np.int64)
    m = cfg.steps // 2
    p = 1 / d
    mean, var = m * p, m * p * (1 - p)
    mu4 = m * p * (1 - p) * (1 + 3 * p * (1 - p) * (m - 2))
    T = cfg.trials
    se_mean = math.sqrt(var / T)
    se_var = math.sqrt(max(mu4 - var * var, 0.0) / T)
    emp_mean = float(z.mean())
    emp_var = float(z.var(ddof=1)) if T > 1 else 0.0
    obs = np.bincount(z, minlength=m + 1)[: m + 1].astype(float)
    exp = stats.binom.pmf(np.arange(m + 1), m, p) * T
    o, e = _merged_bins(obs, exp)
    e *= o.sum() / e.sum()
    chi = stats.chisquare(o, e)
    return ExperimentReport(
        "backtrack_pairs",
        {"walk": cfg.to_dict()},
        {"mean": emp_mean, "variance": emp_var},
        {"mean": [emp_mean - Z95 * se_mean, emp_mean + Z95 * se_mean]},
        {str(k): int(c) for k, c in enumerate(obs) if c},
        {"Z": z.tolist()},
        {
            "d": d,
            "pairs": m,
            "binomial_mean": mean,
            "binomial_variance": var,
            "se_mean": se_mean,
            "se_variance": se_var,
            "mean_z": (emp_mean - mean) / se_mean,
            "variance_z": (emp_var - var) / se_var if se_var else 0.0,
            "chi_square": float(chi.statistic),
            "chi_square_bins": len(o),
            "chi_square_p": float(chi.pvalue),
        },
    )


EXPERIMENTS = {
    "nt_density": nt_density_experiment,
    "qn": qn_experiment,
    "escape_tail": escape_tail_experiment,
    "backtrack_pairs": backtrack_pair_experiment,
}


def run_experiment(config: dict) -> ExperimentReport:
    """Run ``{"experiment": name, "walk": {...}, **params}``."""
    cfg = dict(config)
    name = cfg.pop("experiment", None)
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    if "walk" not in cfg:
        raise ValueError("experiment config needs a 'walk' section")
    walk = WalkConfig.from_dict(cfg.pop("walk"))
    return EXPERIMENTS[name](walk, **cfg)
