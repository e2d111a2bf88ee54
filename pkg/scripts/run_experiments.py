"""Run every experiment config in configs/ and write reports plus manifests.

    python scripts/run_experiments.py --out results/

Each report goes to <out>/<config name>.json with a sibling .manifest.json,
through the same code path as ``nbwalk experiment``.
"""

import argparse
import sys
from pathlib import Path

from nbwalk.cli import main

ROOT = Path(__file__).resolve().parent.parent


def main_script(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--only", nargs="*", help="config names (without .json) to run")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for cfg in sorted(args.configs.glob("*.json")):
        if '"experiment"' not in cfg.read_text():
            continue  # graph files live here too
        if args.only and cfg.stem not in args.only:
            continue
        print(f"running {cfg.name}", file=sys.stderr)
        code = main(["experiment", "--config", str(cfg), "--out", str(args.out / cfg.name)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main_script())
