"""Fitted spectral radius against closed forms for the built-in infinite families.

    python scripts/rho_table.py --N 400
"""

import argparse

from nbwalk.multigraph import make_oracle
from nbwalk.spectral import lazy_rho, oracle_rho, tree_rho

ROWS = [
    ({"family": "regular_tree", "d": 3}, tree_rho(3)),
    ({"family": "regular_tree", "d": 4}, tree_rho(4)),
    ({"family": "regular_tree", "d": 5}, tree_rho(5)),
    # a loop at every vertex of the 2-regular tree: simple random walk holds with probability 1/3
    ({"family": "looped_tree", "d": 3}, lazy_rho(tree_rho(2), 1 / 3)),
    ({"family": "tree_plus_cycle", "d": 3, "L": 4}, None),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=400, help="even steps of return probabilities")
    args = ap.parse_args(argv)
    print(f"{'family':<32}{'fitted':>10}{'kappa':>9}{'best lower':>12}{'closed form':>13}")
    for spec, exact in ROWS:
        rep = oracle_rho(make_oracle(spec), N=args.N)
        name = ",".join(f"{k}={v}" for k, v in spec.items() if k != "family")
        label = f"{spec['family']}({name})"
        ref = f"{exact:.6f}" if exact is not None else "-"
        print(f"{label:<32}{rep.fitted_rho:>10.6f}{rep.kappa:>9.3f}{rep.best_lower:>12.6f}{ref:>13}")


if __name__ == "__main__":
    main()
