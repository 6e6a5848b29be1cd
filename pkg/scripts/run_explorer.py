#!/usr/bin/env python3
"""Run the family explorer and print the ranked table."""

import argparse
import sys

from belab.cli import explore
from belab.errors import ScenarioError
from belab.scenario import load_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("family", help="family scenario file")
    ap.add_argument("--budget", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--top", type=int, default=10)
    args = ap.parse_args()
    try:
        members, vals = load_family(args.family)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return 2
    budget = args.budget or vals.get("explore.budget") or len(members)
    seed = vals.get("seed", 0) if args.seed is None else args.seed
    result = explore(members, budget, seed=seed)
    print(f"{'label':<70} {'cd margin':>10} {'avr':>10} settled")
    for row in result["table"][: args.top]:
        print(f"{row['label']:<70} {row['cd_margin']:>10.3g} {row['avr']:>10.4g} {row['avr_settled']}")
    print(f"excluded (curvature hypothesis fails): {len(result['excluded'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
