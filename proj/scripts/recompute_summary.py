#!/usr/bin/env python3
"""Recompute summary.csv from trace.csv and compare.

Either point it at an existing output directory (--dir) or let it run the CLI
first (--cli and --config). Exits 1 on any mismatch beyond the tolerance.
"""

import argparse
import csv
import math
import subprocess
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

METRICS = ("cum_regret", "coverage_rate", "undercoverage_count")


def checkpoints(horizon):
    pts = {1, 10, 100, 1000, horizon}
    if horizon >= 100:
        step = horizon // 100
        pts.update(k * step for k in range(1, 101))
    return sorted(t for t in pts if 1 <= t <= horizon)


def mean_ci(xs):
    n = len(xs)
    m = sum(xs) / n
    if n < 2:
        return m, m, m
    s = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))
    half = 1.96 * s / math.sqrt(n)
    return m, m - half, m + half


def recompute(trace_path):
    # (policy, run) -> list of rows in t order
    runs = defaultdict(list)
    with open(trace_path, newline="") as f:
        for row in csv.DictReader(f):
            runs[(row["policy"], int(row["run_id"]))].append(row)
    per_policy = defaultdict(lambda: defaultdict(list))
    for (policy, _), rows in sorted(runs.items()):
        horizon = len(rows)
        wanted = set(checkpoints(horizon))
        covered = under = 0
        for row in rows:
            t = int(row["t"])
            covered += int(row["covered"])
            under += int(row["undercover"])
            if t in wanted:
                per_policy[policy][(t, "cum_regret")].append(float(row["cum_regret"]))
                per_policy[policy][(t, "coverage_rate")].append(covered / t)
                per_policy[policy][(t, "undercoverage_count")].append(float(under))
    out = {}
    for policy, cells in per_policy.items():
        for key, xs in cells.items():
            out[(policy,) + key] = mean_ci(xs)
    return out


def compare(out_dir, tol):
    expected = recompute(out_dir / "trace.csv")
    seen = 0
    bad = 0
    with open(out_dir / "summary.csv", newline="") as f:
        for row in csv.DictReader(f):
            key = (row["policy"], int(row["t"]), row["metric"])
            ref = expected.get(key)
            if ref is None:
                print(f"no trace data for {key}")
                bad += 1
                continue
            got = (float(row["mean"]), float(row["ci_lo"]), float(row["ci_hi"]))
            for g, r in zip(got, ref):
                if abs(g - r) > tol * max(1.0, abs(r)):
                    print(f"mismatch {key}: summary {got} recomputed {ref}")
                    bad += 1
                    break
            seen += 1
    if seen != len(expected):
        print(f"summary has {seen} rows, trace implies {len(expected)}")
        bad += 1
    print(f"compared {seen} summary rows, {bad} problems")
    return bad == 0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", type=Path, help="existing output directory with summary.csv and trace.csv")
    ap.add_argument("--cli", help="path to the sbcp binary")
    ap.add_argument("--config", help="config to run when --dir is not given")
    ap.add_argument("--runs", default="5")
    ap.add_argument("--horizon", default="2000")
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args()

    if args.dir:
        return 0 if compare(args.dir, args.tol) else 1
    if not (args.cli and args.config):
        ap.error("need --dir, or --cli with --config")
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [args.cli, "run", "--config", args.config, "--runs", args.runs, "--horizon", args.horizon,
               "--trace", "--out", tmp]
        subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
        return 0 if compare(Path(tmp), args.tol) else 1


if __name__ == "__main__":
    sys.exit(main())
