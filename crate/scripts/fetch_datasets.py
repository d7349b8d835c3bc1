#!/usr/bin/env python3
"""Fetch the UCI Adult and German Credit datasets and write headered CSVs.

The original UCI files are taken from the `responsibly` wheel on PyPI, which
ships them unmodified. Output goes to data/adult.csv and data/german.csv
(or to the directory given as the first argument).
"""
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings_status", "employment",
    "installment_commitment", "personal_status", "other_parties",
    "residence_since", "property_magnitude", "age", "other_payment_plans",
    "housing", "existing_credits", "job", "num_dependents",
    "own_telephone", "foreign_worker", "class",
]


def adult_rows(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        fields = [f.strip() for f in line.split(",")]
        fields[-1] = fields[-1].rstrip(".")
        yield fields


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "responsibly==0.1.2", "-d", tmp],
            check=True,
        )
        wheel = next(Path(tmp).glob("responsibly-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            adult = z.read("responsibly/dataset/adult/adult.data").decode()
            adult_test = z.read("responsibly/dataset/adult/adult.test").decode()
            german = z.read("responsibly/dataset/german/german.data").decode()

    rows = list(adult_rows(adult)) + list(adult_rows(adult_test))
    with open(out / "adult.csv", "w", newline="\n") as f:
        f.write(",".join(ADULT_COLUMNS) + "\n")
        for r in rows:
            assert len(r) == len(ADULT_COLUMNS), r
            f.write(",".join(r) + "\n")
    print(f"adult.csv: {len(rows)} rows")

    n = 0
    with open(out / "german.csv", "w", newline="\n") as f:
        f.write(",".join(GERMAN_COLUMNS) + "\n")
        for line in io.StringIO(german):
            fields = line.split()
            if not fields:
                continue
            assert len(fields) == len(GERMAN_COLUMNS), fields
            f.write(",".join(fields) + "\n")
            n += 1
    print(f"german.csv: {n} rows")


if __name__ == "__main__":
    main()
