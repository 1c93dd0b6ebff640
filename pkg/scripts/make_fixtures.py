"""Write the synthetic loss fixtures (unit, identical, random) under one directory
and print the loss report of each.

    python3 scripts/make_fixtures.py fixtures/
"""

import argparse
from pathlib import Path

from striplab import objectives as obj
from striplab.fixtures import FACTORIES, evaluate_losses


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for name, make in sorted(FACTORIES.items()):
        fx = make() if name == "unit" else make(seed=args.seed)
        path = fx.save(args.root / name)
        print(f"# {path}")
        print(obj.format_report(evaluate_losses(fx)), end="")


if __name__ == "__main__":
    main()
