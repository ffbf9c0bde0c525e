"""Sweep learning rate, group size and seed for toy training; report how often reward reaches a target.

    python3 scripts/train_toy_curve.py --lr 4 8 16 --K 8 --seeds 20
"""
import argparse
import json
import sys
import time

import numpy as np

from cotforge.grpo import GRPOConfig, train_toy


def trailing_best(rewards, window):
    r = np.asarray(rewards)
    if len(r) < window:
        return float(r.mean()) if len(r) else 0.0
    return float(np.convolve(r, np.ones(window) / window, mode="valid").max())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lr", type=float, nargs="+", default=[GRPOConfig().learning_rate])
    ap.add_argument("--K", type=int, nargs="+", default=[GRPOConfig().K])
    ap.add_argument("--mode", choices=["alg1", "eq5"], default="alg1")
    ap.add_argument("--beta", type=float, default=GRPOConfig().beta)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--window", type=int, default=20)
    ap.add_argument("--target", type=float, default=0.9)
    ap.add_argument("--json", help="write per-run results here")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'K':>4} {'lr':>7} {'hit':>7} {'median':>7} {'min':>6} {'max':>6} {'sec':>6}")
    for K in args.K:
        for lr in args.lr:
            start = time.perf_counter()
            best = []
            for seed in range(args.seeds):
                cfg = GRPOConfig(K=K, learning_rate=lr, steps=args.steps, seed=seed, mode=args.mode, beta=args.beta)
                b = trailing_best(train_toy(cfg=cfg).mean_rewards, args.window)
                best.append(b)
                rows.append({"K": K, "lr": lr, "seed": seed, "best_trailing_mean": b})
            hits = sum(b >= args.target for b in best)
            print(f"{K:>4} {lr:>7g} {hits:>3}/{args.seeds:<3} {np.median(best):>7.3f} {min(best):>6.3f} "
                  f"{max(best):>6.3f} {time.perf_counter() - start:>6.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
