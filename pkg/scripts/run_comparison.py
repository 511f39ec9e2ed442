"""Run a GLS vs EB-GLS campaign and print the comparison table.

    python scripts/run_comparison.py scripts/comparison.yaml --workers 4
"""
import argparse
import sys
from pathlib import Path

from glstsp.harness import Campaign, run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("campaign", nargs="?", default=str(Path(__file__).with_name("comparison.yaml")))
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()

    campaign = Campaign.from_yaml(args.campaign)
    result = run_campaign(campaign, workers=args.workers, out=args.out)
    sys.stdout.write((result.out / "table.csv").read_text())
    for w in result.warnings:
        print(w, file=sys.stderr)


if __name__ == "__main__":
    main()
