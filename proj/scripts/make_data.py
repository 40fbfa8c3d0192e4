#!/usr/bin/env python3
"""Regenerate the bundled example data under data/.

Everything is drawn from fixed seeds with the standard library so the files
are reproducible; the committed copies are the reference.

    python3 scripts/make_data.py [--out data]
"""

import argparse
import math
import random
from pathlib import Path


def write_score_log(path, rows, n_cand, gt_draw, other_draw, rng, digits):
    fmt = f"{{:.{digits}f}}"
    header = ["round_id", "gt_score"] + [f"cand_{i}" for i in range(n_cand)]
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for r in range(rows):
            gt = fmt.format(gt_draw(rng))
            others = [fmt.format(other_draw(rng)) for _ in range(n_cand - 1)]
            slot = rng.randrange(n_cand)
            cands = others[:slot] + [gt] + others[slot:]
            f.write(",".join([str(r), gt] + cands) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # Classifier logits: 20 classes, the true class usually scores highest.
    write_score_log(
        out / "classifier_logits.csv", 5000, 20,
        lambda g: g.gauss(2.5, 1.5),
        lambda g: g.gauss(0.0, 1.0),
        random.Random(20240101), 4)

    # Retrieval cosine similarities: 1 relevant passage among 51 candidates.
    clip = lambda x: max(-1.0, min(1.0, x))
    write_score_log(
        out / "retrieval_cosine.csv", 2000, 51,
        lambda g: clip(g.gauss(0.62, 0.12)),
        lambda g: clip(g.gauss(0.35, 0.10)),
        random.Random(20240102), 4)

    # Auction bid pool: log-normal private values in currency units, rounded to cents.
    g = random.Random(20240103)
    with open(out / "bids.csv", "w", newline="\n") as f:
        for _ in range(3000):
            f.write(f"{math.exp(g.gauss(3.5, 0.8)):.2f}\n")


if __name__ == "__main__":
    main()
