"""Attack-free and constrained-attack runs of a policy on ten seeded fig8-style missions.

    python scripts/a6_battery.py policies/td3_seed0.gsnp [--direction tar_minus_col] [--seeds 10]
"""
import argparse
import sys

from gpsspoof.attack import DIRECTION_REVERSED, DIRECTIONS
from gpsspoof.policy import SurrogatePolicy, load_policy
from gpsspoof.replicate import battery


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("policy", help="weights file, or 'surrogate'")
    ap.add_argument("--direction", choices=DIRECTIONS, default=DIRECTION_REVERSED)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.3)
    args = ap.parse_args(argv)
    pol = SurrogatePolicy() if args.policy == "surrogate" else load_policy(args.policy)
    rows = battery(pol, range(args.seeds), args.noise, args.direction)
    print(f"{'seed':>4} {'target_x':>8} {'baseline':>14} {'attack':>14} {'max_tr':>6}")
    for r in rows:
        print(f"{r['seed']:>4} {r['target_x']:8.1f} {r['baseline']:>14} {r['attack']:>14} "
              f"{r['attack_max_test_ratio']:6.2f}")
    ok = [r for r in rows if r["baseline"] == "ReachedTarget"]
    hit = [r for r in ok if r["attack"] == "Collided"]
    print(f"baseline success {len(ok)}/{len(rows)}; attack converted {len(hit)}/{len(ok)}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
