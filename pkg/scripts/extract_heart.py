"""Rebuild src/dek/data/heart.csv from the KEEL copy of Statlog (Heart).

The raw file ships inside the ``keel-ds`` wheel. Download it with
``pip download keel-ds --no-deps -d /tmp/dl`` and pass the wheel path.
The class column is dropped; all other values are copied verbatim
(KEEL stores ``oldpeak`` multiplied by 10, which normalization absorbs).
"""
import csv
import sys
import zipfile
from pathlib import Path

COLUMNS = [
    "age", "sex", "chest_pain", "resting_bp", "cholesterol",
    "fasting_blood_sugar", "resting_ecg", "max_heart_rate",
    "exercise_angina", "oldpeak", "slope", "major_vessels", "thal",
]
MEMBER = "keel_ds/data/balanced/raw/heart.dat"


def main(wheel: str) -> None:
    raw = zipfile.ZipFile(wheel).read(MEMBER).decode("utf-8").split()
    out = Path(__file__).resolve().parents[1] / "src" / "dek" / "data" / "heart.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for line in raw:
            writer.writerow(line.split(",")[:-1])
    print(f"wrote {len(raw)} rows to {out}")


if __name__ == "__main__":
    main(sys.argv[1])
