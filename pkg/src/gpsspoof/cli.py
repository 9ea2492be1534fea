"""Command line: run, replicate, train, analyze.

Exit codes: 0 clean completion, 1 config or IO error, 2 infeasible scenario
(policy cannot be loaded, or the search or convergence is impossible).
The default output directory comes from ``GPSSPOOF_OUT`` (else ``./out``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import attack as atk
from .config import ConfigError, PolicySource, load_config, with_seed
from .estimator import FusionConfig
from .geo import LocalPos
from .harness import PolicyLoadError, export, run_scenario, summarize, write_summary
from .learner import Td3Config, config_dict, train, write_curve
from .policy import save_policy
from .replicate import EXPERIMENTS, replicate

OUT_ENV = "GPSSPOOF_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("gpsspoof")


def default_out(sub: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "out")) / sub


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    records, verdict = run_scenario(cfg)
    out = Path(args.out) if args.out else default_out(cfg.name)
    export(records, out)
    s = summarize(records, verdict)
    write_summary(out / "summary.json", s)
    _print(s)
    return EXIT_OK


def cmd_replicate(args) -> int:
    src = PolicySource("weights", args.policy) if args.policy else None
    out = Path(args.out) if args.out else default_out(args.experiment)
    rep = replicate(args.experiment, out, src)
    _print(rep)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = Td3Config(seed=args.seed) if args.steps is None else Td3Config(total_steps=args.steps, seed=args.seed)
    t0 = time.perf_counter()
    res = train(cfg, log_every=args.log_every)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_policy(res.policy, out, metadata={"td3": config_dict(cfg), "episodes": len(res.curve),
                                           "train_seconds": round(elapsed, 1)})
    write_curve(res.curve, out.with_suffix(".curve.csv"))
    wins = [e.success for e in res.curve[-100:]]
    _print({"policy": str(out), "episodes": len(res.curve), "train_seconds": round(elapsed, 1),
            "recent_success": sum(wins) / max(1, len(wins))})
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = FusionConfig()
    if args.what == "delay":
        r = atk.measure_reflection_delay(cfg, LocalPos(0.0, args.offset_m))
        _print({"offset_m": args.offset_m, "T": r.T, "max_test_ratio": r.max_test_ratio})
        return EXIT_OK
    out = Path(args.out) if args.out else default_out("envelope")
    rep = replicate("fig7-envelope", out)
    _print(rep)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpsspoof", description="GPS spoofing against a learned UAV navigator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="fly one configured scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replicate", help="run a canned experiment")
    rp.add_argument("experiment", choices=EXPERIMENTS)
    rp.add_argument("--out")
    rp.add_argument("--policy", help="weights file; default is the scripted surrogate")
    rp.set_defaults(func=cmd_replicate)

    t = sub.add_parser("train", help="train a TD3 policy")
    t.add_argument("--out", required=True)
    t.add_argument("--steps", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log-every", type=int, default=100)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("analyze", help="estimator envelope tools")
    a.add_argument("what", choices=("envelope", "delay"))
    a.add_argument("--out")
    a.add_argument("--offset-m", type=float, default=3.33)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.cmd == "train" else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PolicyLoadError, atk.NotFound, atk.NeverConverges, atk.DegenerateDirection) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
