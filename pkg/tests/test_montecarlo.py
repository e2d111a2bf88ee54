import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from nbwalk.cover import is_path, nt_cycle_times, reduce
from nbwalk.multigraph import ResourceGuardError, build_graph, complete_graph, make_oracle
from nbwalk.montecarlo import (
    WalkConfig,
    WalkStuck,
    _merged_bins,
    backtrack_pair_experiment,
    escape_envelope,
    escape_tail_experiment,
    mean_ci,
    nt_density_experiment,
    on_short_cycle,
    proportion_ci,
    qn_experiment,
    run_experiment,
    simulate_nbw,
    simulate_srw,
    splitmix64,
    trial_seed,
)

TREE3 = {"family": "regular_tree", "d": 3}
LOOPED3 = {"family": "looped_tree", "d": 3}
K4 = {"family": "complete", "m": 4}
TPC = {"family": "tree_plus_cycle", "d": 3, "L": 4}


# --- seeding ----------------------------------------------------------------------


def test_splitmix64_reference_values():
    # first outputs of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_trial_seeds_distinct():
    seeds = {trial_seed(42, t) for t in range(10000)}
    assert len(seeds) == 10000
    assert all(0 <= s < 2**64 for s in seeds)


# --- simulation -----------------------------------------------------------------------


@pytest.mark.parametrize("spec", [TREE3, LOOPED3, K4, TPC], ids=lambda s: s["family"])
def test_srw_is_a_path_of_n_darts(spec):
    p = simulate_srw(spec, n=500, seed=1)
    assert len(p) == 500 and is_path(p)
    assert p[0].tail == make_oracle(spec).root


def test_srw_deterministic():
    a = simulate_srw(TPC, n=300, seed=9)
    b = simulate_srw(TPC, n=300, seed=9)
    assert [e.id for e in a] == [e.id for e in b]
    assert [e.id for e in a] != [e.id for e in simulate_srw(TPC, n=300, seed=10)]


def test_srw_loop_frequency_looped_tree():
    p = simulate_srw(LOOPED3, n=100_000, seed=3)
    k = sum(e.is_loop for e in p)
    sigma = math.sqrt(len(p) * (1 / 3) * (2 / 3))
    assert abs(k - len(p) / 3) < 3 * sigma


def test_srw_on_tree_has_no_nt_cycles():
    assert nt_cycle_times(simulate_srw(TREE3, n=3000, seed=4)) == set()


def test_srw_rejects_zero_steps():
    with pytest.raises(ValueError):
        simulate_srw(TREE3, n=0)


@given(st.integers(0, 2**63), st.sampled_from([TREE3, LOOPED3, K4, TPC]))
def test_nbw_is_reduced(seed, spec):
    p = simulate_nbw(spec, n=60, seed=seed)
    assert is_path(p) and reduce(p) == p


def test_nbw_on_tree_is_simple():
    p = simulate_nbw(TREE3, n=400, seed=5)
    verts = [p[0].tail] + [e.head for e in p]
    assert len(set(verts)) == len(verts)


def test_nbw_uniform_on_k4():
    trials = 100_000
    rng = np.random.default_rng(11)
    counts = Counter(tuple(e.id for e in simulate_nbw(K4, o=0, n=4, seed=rng)) for _ in range(trials))
    assert len(counts) == 24
    p = 1 / 24
    sigma = math.sqrt(trials * p * (1 - p))
    assert all(abs(c - trials * p) < 3.5 * sigma for c in counts.values())
    chi = stats.chisquare(list(counts.values()))
    assert chi.pvalue > 1e-3


def test_nbw_stuck():
    with pytest.raises(WalkStuck):
        simulate_nbw(build_graph([(0, 1), (1, 2)]), o=0, n=5)


# --- configs and statistics ------------------------------------------------------------


def test_walk_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(TREE3, steps=0, trials=1)
    with pytest.raises(ValueError):
        WalkConfig(TREE3, steps=1, trials=1, walk="lazy")
    with pytest.raises(ResourceGuardError):
        WalkConfig(TREE3, steps=1, trials=10, max_trials=5)
    with pytest.raises(ValueError):
        WalkConfig.from_dict({"family": TREE3, "steps": 1, "trials": 1, "bogus": 2})


def test_walk_config_round_trip():
    cfg = WalkConfig(TPC, steps=10, trials=3, seed=4, walk="nbw")
    assert WalkConfig.from_dict(cfg.to_dict()) == cfg


def test_proportion_ci():
    lo, hi = proportion_ci(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(2 * (1.959963984540054 * 0.05 + 0.005))
    assert proportion_ci(0, 10000)[0] == 0.0
    assert proportion_ci(0, 10000)[1] == pytest.approx(1 - 0.025 ** (1 / 10000))
    lo, hi = proportion_ci(3, 10000)
    assert lo < 3e-4 < hi


@given(st.integers(1, 5000), st.data())
def test_proportion_ci_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = proportion_ci(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_mean_ci():
    m, (lo, hi) = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and lo < 2 < hi
    assert mean_ci([5.0]) == (5.0, (5.0, 5.0))


def test_merged_bins_keep_totals():
    obs = np.array([1, 2, 30, 40, 20, 3, 1.0])
    exp = np.array([0.5, 3, 30, 40, 21, 2.5, 0.8])
    o, e = _merged_bins(obs, exp)
    assert o.sum() == obs.sum() and e.sum() == pytest.approx(exp.sum())
    assert (e >= 5).all()


# --- experiments ----------------------------------------------------------------------------


def check_report(rep, trials):
    js = json.loads(json.dumps(rep.to_json()))
    assert js["experiment"] == rep.experiment
    if rep.per_trial:
        assert all(len(v) == trials for v in rep.per_trial.values())
        assert rep.to_csv().count("\n") == trials + 1


def test_density_tree_is_zero():
    rep = nt_density_experiment(WalkConfig(TREE3, steps=2000, trials=20, seed=1))
    assert rep.estimate == 0.0 and rep.tallies == {"positive": 0, "zero": 20}
    check_report(rep, 20)


def test_density_k4_is_large():
    rep = nt_density_experiment(WalkConfig(K4, steps=2000, trials=30, seed=2))
    assert rep.estimate > 0.5 and rep.ci[0] > 0.2
    assert rep.ci[0] <= rep.estimate <= rep.ci[1]
    assert sum(rep.tallies.values()) == 30


def test_density_looped_tree_positive():
    rep = nt_density_experiment(WalkConfig(LOOPED3, steps=2000, trials=20, seed=3))
    assert rep.estimate > 0.05 and rep.ci[0] > 0


def test_density_checkpoints():
    rep = nt_density_experiment(WalkConfig(TPC, steps=400, trials=10, seed=3), checkpoints=[100, 200])
    assert rep.config["checkpoints"] == [100, 200, 400]
    assert set(rep.per_trial) == {"density_100", "density_200", "density_400", "max_density"}
    with pytest.raises(ValueError):
        nt_density_experiment(WalkConfig(TPC, steps=400, trials=2), checkpoints=[500])


def test_density_independent_of_workers():
    a = nt_density_experiment(WalkConfig(TPC, steps=300, trials=8, seed=5))
    b = nt_density_experiment(WalkConfig(TPC, steps=300, trials=8, seed=5, workers=3))
    assert a.per_trial == b.per_trial and a.estimate == b.estimate


def test_on_short_cycle():
    o = make_oracle(TPC)
    assert on_short_cycle(o, o.root, 4)
    assert not on_short_cycle(o, o.root, 3)
    # a tree neighbour of the root: out, around the 4-cycle and back has length 6
    u = o.dart_at(o.root, 0).head
    assert not on_short_cycle(o, u, 5) and on_short_cycle(o, u, 6)
    k4 = make_oracle(complete_graph(4))
    assert on_short_cycle(k4, 0, 3) and not on_short_cycle(k4, 0, 2)


def test_qn_tree_zero():
    rep = qn_experiment(WalkConfig(TREE3, steps=1, trials=200, seed=1), L=6, horizons=(10, 100))
    assert rep.estimate == {"10": 0.0, "100": 0.0}


def test_qn_k4_one():
    rep = qn_experiment(WalkConfig(K4, steps=1, trials=200, seed=1), L=3, horizons=(10, 100, 1000))
    assert set(rep.estimate.values()) == {1.0}


def exact_qn(oracle, start, n, L):
    """q_n by pushing the exact distribution of simple random walk n steps."""
    dist = {start: 1.0}
    for _ in range(n):
        nxt = {}
        for v, m in dist.items():
            w = m / oracle.degree(v)
            for e in oracle.darts_at(v):
                nxt[e.head] = nxt.get(e.head, 0.0) + w
        dist = nxt
    return sum(m for v, m in dist.items() if on_short_cycle(oracle, v, L))


@pytest.mark.parametrize("which", ["root", "tree_vertex"])
def test_qn_matches_exact(which):
    o = make_oracle(TPC)
    start = o.root if which == "root" else o.dart_at(o.root, 0).head
    trials = 4000
    rep = qn_experiment(WalkConfig(TPC, steps=1, trials=trials, seed=8, origin=start), L=4, horizons=(6, 9))
    assert rep.extra["method"] == ("lumped" if which == "root" else "walk")
    for h in (6, 9):
        q = exact_qn(o, start, h, 4)
        sigma = math.sqrt(q * (1 - q) / trials)
        assert abs(rep.estimate[str(h)] - q) < 4 * sigma + 1e-12
        lo, hi = rep.ci[str(h)]
        assert lo <= rep.estimate[str(h)] <= hi


def test_qn_deterministic_and_worker_independent():
    cfg = WalkConfig(TPC, steps=1, trials=500, seed=2)
    a = qn_experiment(cfg, L=4, horizons=(10, 50))
    b = qn_experiment(cfg, L=4, horizons=(10, 50))
    assert a.to_json() == b.to_json()
    v = make_oracle(TPC).dart_at(make_oracle(TPC).root, 0).head  # tree vertex: per-walk path
    c1 = qn_experiment(WalkConfig(TPC, steps=1, trials=40, seed=2, origin=v), L=4, horizons=(10,))
    c2 = qn_experiment(WalkConfig(TPC, steps=1, trials=40, seed=2, origin=v, workers=2), L=4, horizons=(10,))
    assert c1.per_trial == c2.per_trial


def test_qn_rejects():
    with pytest.raises(ValueError):
        qn_experiment(WalkConfig(TPC, steps=1, trials=2), L=0)
    with pytest.raises(ValueError):
        qn_experiment(WalkConfig(TPC, steps=1, trials=2), L=4, horizons=(0,))


def test_escape_tail_tree():
    rep = escape_tail_experiment(WalkConfig(TREE3, steps=3000, trials=10, seed=4), t_min=10, t_max=30)
    assert rep.extra["odd_excursions"] == 0
    assert rep.extra["violations"] == []
    row20 = next(r for r in rep.extra["rows"] if r["t"] == 20)
    assert row20["envelope"] == pytest.approx(escape_envelope(20)) and row20["empirical"] <= row20["envelope"] + 3 * row20["sigma"]


def test_escape_tail_looped_tree_beyond_t0():
    rep = escape_tail_experiment(WalkConfig(LOOPED3, steps=3000, trials=10, seed=5), t_min=10, t_max=60, t0=40)
    assert not [t for t in rep.extra["violations"] if t > 40]


def test_escape_tail_rejects_low_degree():
    with pytest.raises(ValueError):
        escape_tail_experiment(WalkConfig({"family": "cycle", "k": 5}, steps=100, trials=2))


@pytest.mark.parametrize("d", [3, 4])
def test_backtrack_pairs_binomial(d):
    rep = backtrack_pair_experiment(WalkConfig({"family": "regular_tree", "d": d}, steps=100, trials=3000, seed=d))
    assert abs(rep.extra["mean_z"]) < 3.5 and abs(rep.extra["variance_z"]) < 3.5
    assert rep.extra["chi_square_p"] > 1e-3
    assert sum(rep.tallies.values()) == 3000


def test_backtrack_pairs_rejects_irregular():
    with pytest.raises(ValueError):
        backtrack_pair_experiment(WalkConfig(TPC, steps=10, trials=2))


def test_run_experiment_dispatch():
    rep = run_experiment({"experiment": "nt_density", "walk": {"family": TREE3, "steps": 50, "trials": 3}})
    assert rep.experiment == "nt_density"
    with pytest.raises(ValueError):
        run_experiment({"experiment": "nope", "walk": {}})
    with pytest.raises(ValueError):
        run_experiment({"experiment": "qn"})


def test_identical_configs_identical_reports():
    cfg = {"experiment": "backtrack_pairs", "walk": {"family": TREE3, "steps": 40, "trials": 50, "seed": 3}}
    assert json.dumps(run_experiment(cfg).to_json()) == json.dumps(run_experiment(cfg).to_json())
