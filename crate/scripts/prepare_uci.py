#!/usr/bin/env python3
"""Convert the raw UCI Adult and German credit files into header CSVs.

Usage:
    prepare_uci.py adult      <adult.data> <adult.test> <out.csv>
    prepare_uci.py adult-full <adult.data> <adult.test> <out.csv>
    prepare_uci.py german     <german.data> <out.csv>

Adult: the original train/test files are merged, whitespace is stripped, the
trailing '.' on test labels is removed, income >50K becomes label 1, `sex` is
renamed to `gender`, and `race` is binarized to White / Non-White. Missing
values ('?') are kept so the loader can drop them.

The `adult` mode additionally follows the common recourse-benchmark layout:
`education` is dropped (education-num carries it) and the remaining
categoricals are binarized (Private / Non-Private, Married / Non-Married,
Managerial-Specialist / Other, Husband / Non-Husband, US / Non-US).
`adult-full` keeps every original category.

German: label 1 (good) stays 1, label 2 (bad) becomes 0. Category codes are
kept verbatim.
"""
import csv
import sys

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "gender",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "present_employment", "installment_rate", "status_sex",
    "other_debtors", "residence_since", "property", "age",
    "other_installment_plans", "housing", "number_of_credits", "job",
    "people_liable", "telephone", "foreign_worker", "credit",
]


BINARIZE = {
    "workclass": lambda v: "Private" if v == "Private" else "Non-Private",
    "marital-status": lambda v: "Married" if v.startswith("Married") else "Non-Married",
    "occupation": lambda v: (
        "Managerial-Specialist" if v in ("Exec-managerial", "Prof-specialty") else "Other"
    ),
    "relationship": lambda v: "Husband" if v == "Husband" else "Non-Husband",
    "native-country": lambda v: "US" if v == "United-States" else "Non-US",
}


def adult(train_path, test_path, out_path, binarize=True):
    rows = []
    for path in (train_path, test_path):
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                cells = [c.strip() for c in line.split(",")]
                if len(cells) != len(ADULT_COLUMNS):
                    continue
                label = cells[-1].rstrip(".")
                cells[-1] = "1" if label == ">50K" else "0"
                race = ADULT_COLUMNS.index("race")
                if cells[race] != "?":
                    cells[race] = "White" if cells[race] == "White" else "Non-White"
                if binarize:
                    for name, f in BINARIZE.items():
                        i = ADULT_COLUMNS.index(name)
                        if cells[i] != "?":
                            cells[i] = f(cells[i])
                rows.append(cells)
    columns = list(ADULT_COLUMNS)
    if binarize:
        drop = columns.index("education")
        columns.pop(drop)
        for r in rows:
            r.pop(drop)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out_path}")


def german(data_path, out_path):
    rows = []
    with open(data_path) as fh:
        for line in fh:
            cells = line.split()
            if len(cells) != len(GERMAN_COLUMNS):
                continue
            cells[-1] = "1" if cells[-1] == "1" else "0"
            rows.append(cells)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GERMAN_COLUMNS)
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out_path}")


if __name__ == "__main__":
    if len(sys.argv) == 5 and sys.argv[1] == "adult":
        adult(*sys.argv[2:])
    elif len(sys.argv) == 5 and sys.argv[1] == "adult-full":
        adult(*sys.argv[2:], binarize=False)
    elif len(sys.argv) == 4 and sys.argv[1] == "german":
        german(*sys.argv[2:])
    else:
        sys.exit(__doc__)
