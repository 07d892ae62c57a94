#!/usr/bin/env python3
"""Rebuild the pancreatic-cancer case-study CSVs from their summary table.

Only group summaries are published, so each group is reconstructed
deterministically: ages are normal scores rescaled to the exact reported mean
and SD, and indicator/stage counts are laid out in a fixed order.
"""
import statistics
import sys
from pathlib import Path

# n, age mean, age sd, women, ecog1, (IIA, III, IV), responders
PHASE1 = {
    "1": (7, 66.7, 7.87, 6, 6, (0, 3, 4), 0),
    "2": (7, 60.4, 10.66, 4, 1, (0, 1, 6), 3),
}
PHASE2 = {
    "1": (25, 56.8, 9.95, 14, 17, (1, 2, 22), 8),
    "2": (25, 56.8, 9.95, 14, 17, (1, 2, 22), 8),
}


def ages(n, mean, sd):
    nd = statistics.NormalDist()
    z = [nd.inv_cdf((i + 0.5) / n) for i in range(n)]
    m, s = statistics.mean(z), statistics.stdev(z)
    return [mean + sd * (v - m) / s for v in z]


def rows(group, spec):
    n, mean, sd, women, ecog1, stages, resp = spec
    stage = ["IIA"] * stages[0] + ["III"] * stages[1] + ["IV"] * stages[2]
    assert len(stage) == n
    out = []
    for i, age in enumerate(ages(n, mean, sd)):
        out.append(
            f"{age:.6f},{int(i < women)},{int(i >= n - ecog1)},{stage[i]},{group},{int(i < resp)}"
        )
    return out


def write(path, column, groups):
    lines = [f"age,woman,ecog1,stage,{column},response"]
    for g, spec in groups.items():
        lines += rows(g, spec)
    Path(path).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "configs/case_study")
    out.mkdir(parents=True, exist_ok=True)
    write(out / "phase1.csv", "dose", PHASE1)
    write(out / "phase2.csv", "arm", PHASE2)
