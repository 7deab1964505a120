"""Regenerates data/sample.csv (seeded, deterministic)."""
import csv
import math
import random
import sys

SEED = 20240601
N = 600


def main(path):
    rng = random.Random(SEED)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "age_band", "region", "smoker", "income", "x4", "x5", "treated", "outcome"])
        for i in range(N):
            age = rng.randrange(4)
            region = rng.choice(["north", "south", "east", "west"])
            smoker = rng.randrange(2)
            income = rng.choice(["low", "mid", "high"])
            x4 = rng.randrange(2)
            x5 = rng.randrange(3)
            p = 1.0 / (1.0 + math.exp(-(0.6 * smoker - 0.3 * age + 0.2)))
            t = 1 if rng.random() < p else 0
            effect = 2.0 + 0.5 * smoker
            y = 3.0 * age + 1.5 * smoker + (1.0 if income == "high" else 0.0) + effect * t + rng.gauss(0, 0.5)
            w.writerow([f"u{i:04d}", age, region, smoker, income, x4, x5, t, f"{y:.4f}"])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/sample.csv")
