"""Build data/adult.csv from the raw UCI Adult training file (adult.data).

Usage: python3 scripts/prepare_adult.py path/to/adult.data data/adult.csv

Keeps six categorical and two continuous features and collapses the raw
categories into coarse groups (the grouping popularised by DiCE, with race
kept as White / Black / Other).
"""
import csv
import sys

RAW_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "gender", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]

WORKCLASS = {
    "Federal-gov": "Government", "Local-gov": "Government", "State-gov": "Government",
    "Self-emp-inc": "Self-Employed", "Self-emp-not-inc": "Self-Employed",
    "Private": "Private",
    "Never-worked": "Other/Unknown", "Without-pay": "Other/Unknown", "?": "Other/Unknown",
}
EDUCATION = {
    "Preschool": "School", "1st-4th": "School", "5th-6th": "School", "7th-8th": "School",
    "9th": "School", "10th": "School", "11th": "School", "12th": "School",
    "Assoc-voc": "Assoc", "Assoc-acdm": "Assoc",
}
MARITAL = {
    "Married-civ-spouse": "Married", "Married-AF-spouse": "Married",
    "Married-spouse-absent": "Married", "Never-married": "Single",
}
OCCUPATION = {
    "Adm-clerical": "White-Collar", "Exec-managerial": "White-Collar",
    "Craft-repair": "Blue-Collar", "Farming-fishing": "Blue-Collar",
    "Handlers-cleaners": "Blue-Collar", "Machine-op-inspct": "Blue-Collar",
    "Transport-moving": "Blue-Collar",
    "Other-service": "Service", "Priv-house-serv": "Service",
    "Protective-serv": "Service", "Tech-support": "Service",
    "Prof-specialty": "Professional", "Sales": "Sales",
    "Armed-Forces": "Other/Unknown", "?": "Other/Unknown",
}
RACE = {"White": "White", "Black": "Black"}

OUT_COLUMNS = [
    "age", "workclass", "education", "marital_status", "occupation",
    "race", "gender", "hours_per_week", "income",
]


def main(src, dst):
    with open(src) as fin, open(dst, "w", newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(OUT_COLUMNS)
        for line in fin:
            line = line.strip()
            if not line:
                continue
            row = dict(zip(RAW_COLUMNS, (c.strip() for c in line.split(","))))
            writer.writerow([
                row["age"],
                WORKCLASS[row["workclass"]],
                EDUCATION.get(row["education"], row["education"]),
                MARITAL.get(row["marital_status"], row["marital_status"]),
                OCCUPATION[row["occupation"]],
                RACE.get(row["race"], "Other"),
                row["gender"],
                row["hours_per_week"],
                row["income"],
            ])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
