#!/usr/bin/env python3
"""Regenerate tests/fixtures/passmatrix_30x4.inc.

Draws a random 30x4 row-stochastic matrix and computes the expected
statistics (mean, variance, mutual-information score, voted label, vote
margin) with straightforward reference code, independent of the C++
implementation.
"""
import math
import random
from pathlib import Path

PASSES = 30
CLASSES = 4
SEED = 20260823

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "passmatrix_30x4.inc"


def main():
    rng = random.Random(SEED)
    rows = []
    for _ in range(PASSES):
        raw = [rng.gammavariate(0.7, 1.0) for _ in range(CLASSES)]
        s = sum(raw)
        rows.append([v / s for v in raw])

    mean = [sum(r[c] for r in rows) / PASSES for c in range(CLASSES)]
    var = [
        sum((r[c] - mean[c]) ** 2 for r in rows) / PASSES
        for c in range(CLASSES)
    ]
    ent_mean = -sum(p * math.log(p) for p in mean if p > 0)
    mean_ent = (
        -sum(p * math.log(p) for r in rows for p in r if p > 0) / PASSES
    )
    bald = min(max(ent_mean - mean_ent, 0.0), math.log(CLASSES))

    votes = [0] * CLASSES
    for r in rows:
        votes[r.index(max(r))] += 1
    hard = votes.index(max(votes))
    margin = votes[hard] / PASSES

    def arr(name, values):
        body = ",\n    ".join(
            ", ".join(f"{v:.17g}" for v in values[i : i + 4])
            for i in range(0, len(values), 4)
        )
        return f"static const double {name}[] = {{\n    {body}}};\n"

    flat = [v for r in rows for v in r]
    text = "// Generated by scripts/make_passmatrix_fixture.py; do not edit.\n"
    text += arr("kFixtureProbs", flat)
    text += arr("kFixtureMean", mean)
    text += arr("kFixtureVariance", var)
    text += f"static const double kFixtureBald = {bald:.17g};\n"
    text += f"static const int kFixtureHardLabel = {hard};\n"
    text += f"static const double kFixtureVoteMargin = {margin:.17g};\n"

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(text)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
