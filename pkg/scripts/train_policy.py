"""Train the shipped TD3 policy and report how it fares on fig8-style missions.

    python scripts/train_policy.py --out policies/td3_seed0.gsnp [--steps N] [--seed S]
"""
import argparse
import json
import sys

from gpsspoof.cli import main as cli_main
from gpsspoof.policy import load_policy
from gpsspoof.replicate import battery


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="policies/td3_seed0.gsnp")
    ap.add_argument("--steps", type=int)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cmd = ["train", "--out", args.out, "--seed", str(args.seed)]
    if args.steps is not None:
        cmd += ["--steps", str(args.steps)]
    code = cli_main(cmd)
    if code:
        return code
    rows = battery(load_policy(args.out))
    print(json.dumps(rows, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(run())
