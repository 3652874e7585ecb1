#!/usr/bin/env python3
"""Write data/student_synth.csv: 649 synthetic rows with the column layout of
the UCI student performance (Portuguese) table.

The values are drawn from a fixed-seed generative model, so the file is
reproducible; it is a stand-in for the original data, not a copy of it.

    python3 tools/make_student_synth.py [--out data/student_synth.csv] [--seed 7]
"""

import argparse
import csv
import pathlib

import numpy as np

COLUMNS = [
    "school", "sex", "age", "address", "famsize", "Pstatus", "Medu", "Fedu",
    "Mjob", "Fjob", "reason", "guardian", "traveltime", "studytime", "failures",
    "schoolsup", "famsup", "paid", "activities", "nursery", "higher", "internet",
    "romantic", "famrel", "freetime", "goout", "Dalc", "Walc", "health",
    "absences", "G1", "G2", "G3",
]


def choice(rng, values, probs, size):
    return rng.choice(values, p=probs, size=size)


def yes_no(rng, p_yes, size):
    return np.where(rng.random(size) < p_yes, "yes", "no")


def generate(n, seed):
    rng = np.random.default_rng(seed)
    sex = choice(rng, ["F", "M"], [0.59, 0.41], n)
    female = sex == "F"
    school = choice(rng, ["GP", "MS"], [0.65, 0.35], n)
    age = np.clip(np.round(rng.normal(16.7, 1.2, n)), 15, 22).astype(int)
    address = np.where(rng.random(n) < np.where(school == "GP", 0.78, 0.5), "U", "R")
    famsize = choice(rng, ["GT3", "LE3"], [0.7, 0.3], n)
    pstatus = choice(rng, ["T", "A"], [0.88, 0.12], n)
    medu = rng.choice(5, p=[0.01, 0.22, 0.29, 0.21, 0.27], size=n)
    fedu = np.clip(medu + rng.integers(-1, 2, n), 0, 4)
    jobs = ["teacher", "health", "services", "at_home", "other"]
    mjob = choice(rng, jobs, [0.11, 0.07, 0.21, 0.21, 0.40], n)
    fjob = choice(rng, jobs, [0.06, 0.04, 0.28, 0.07, 0.55], n)
    reason = choice(rng, ["course", "other", "home", "reputation"], [0.44, 0.11, 0.23, 0.22], n)
    guardian = choice(rng, ["mother", "father", "other"], [0.70, 0.24, 0.06], n)
    traveltime = rng.choice([1, 2, 3, 4], p=[0.56, 0.33, 0.08, 0.03], size=n)
    # Female students study more in the original data; keep that dependency.
    study_base = rng.choice([1, 2, 3, 4], p=[0.33, 0.47, 0.14, 0.06], size=n)
    studytime = np.clip(study_base + (female & (rng.random(n) < 0.35)), 1, 4)
    failures = rng.choice([0, 1, 2, 3], p=[0.84, 0.11, 0.03, 0.02], size=n)
    schoolsup = yes_no(rng, 0.10, n)
    famsup = yes_no(rng, 0.61, n)
    paid = yes_no(rng, 0.06, n)
    activities = yes_no(rng, 0.49, n)
    nursery = yes_no(rng, 0.80, n)
    higher = np.where(rng.random(n) < np.where(female, 0.92, 0.85), "yes", "no")
    internet = yes_no(rng, 0.77, n)
    romantic = yes_no(rng, 0.37, n)
    famrel = rng.choice([1, 2, 3, 4, 5], p=[0.03, 0.04, 0.16, 0.49, 0.28], size=n)
    freetime = rng.choice([1, 2, 3, 4, 5], p=[0.07, 0.16, 0.39, 0.27, 0.11], size=n)
    goout = rng.choice([1, 2, 3, 4, 5], p=[0.07, 0.22, 0.32, 0.21, 0.18], size=n)
    dalc = np.clip(rng.choice([1, 2, 3, 4, 5], p=[0.70, 0.19, 0.07, 0.02, 0.02], size=n) + (~female & (rng.random(n) < 0.2)), 1, 5)
    walc = np.clip(dalc + rng.integers(0, 3, n), 1, 5)
    health = rng.choice([1, 2, 3, 4, 5], p=[0.14, 0.12, 0.19, 0.17, 0.38], size=n)
    absences = np.minimum(rng.poisson(3.5, n) * (rng.random(n) < 0.8), 32)

    ability = (
        11.0
        + 0.9 * female
        + 0.8 * (studytime - 2)
        - 1.6 * failures
        + 0.35 * (medu - 2)
        + 1.0 * (higher == "yes")
        - 0.9 * (school == "MS")
        - 0.3 * (dalc - 1)
        - 0.05 * absences
        + rng.normal(0.0, 1.9, n)
    )
    g1 = np.clip(np.round(ability + rng.normal(0.0, 1.1, n)), 0, 19).astype(int)
    g2 = np.clip(np.round(0.35 * g1 + 0.65 * ability + rng.normal(0.0, 0.9, n)), 0, 19).astype(int)
    g3 = np.clip(np.round(0.25 * g1 + 0.6 * g2 + 0.15 * ability + 0.4 * female + rng.normal(0.0, 0.8, n)), 0, 19)
    dropout = (rng.random(n) < 0.015 + 0.03 * (failures > 0)).astype(bool)
    g3 = np.where(dropout, 0, g3).astype(int)

    cols = [school, sex, age, address, famsize, pstatus, medu, fedu, mjob, fjob, reason, guardian,
            traveltime, studytime, failures, schoolsup, famsup, paid, activities, nursery, higher,
            internet, romantic, famrel, freetime, goout, dalc, walc, health, absences, g1, g2, g3]
    return [list(row) for row in zip(*cols)]


def main():
    here = pathlib.Path(__file__).resolve().parent.parent
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(here / "data" / "student_synth.csv"))
    parser.add_argument("--rows", type=int, default=649)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rows = generate(args.rows, args.seed)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([str(v) for v in row])


if __name__ == "__main__":
    main()
