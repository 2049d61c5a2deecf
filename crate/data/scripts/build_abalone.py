"""Rebuild data/abalone.csv from the KEEL abalone subsets.

The KEEL imbalanced-classification archive ships several binary splits of the
UCI Abalone table. Rings 3, 8, 9, 10 and 21 can be recovered from them:

    rings 3      positives of abalone-3_vs_11
    rings 21     positives of abalone-21_vs_8
    rings 8      negatives of abalone-21_vs_8
    rings 9      negatives of abalone9-18
    rings 10     negatives of abalone-20_vs_8-9-10 minus rings 8 and 9

Rings 8/9/10 are labelled normal, rings 3/21 abnormal (1,919 rows; the KEEL
split keeps 567 of the 568 ring-8 rows).
Sex is encoded as M=0, F=1, I=2 so the table keeps 8 feature columns.

Usage: python3 build_abalone.py <dir containing the KEEL .dat files> > abalone.csv
"""
import collections
import os
import sys


def read_keel(path):
    rows = []
    in_data = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.lower() == "@data":
                in_data = True
                continue
            if not in_data:
                continue
            cells = [c.strip() for c in line.split(",")]
            rows.append((tuple(cells[:-1]), cells[-1]))
    return rows


def find(root, name):
    for dirpath, _, files in os.walk(root):
        if name in files:
            return os.path.join(dirpath, name)
    raise SystemExit(f"missing {name} under {root}")


def main():
    root = sys.argv[1]
    load = lambda n: read_keel(find(root, n + ".dat"))
    r3 = [f for f, c in load("abalone-3_vs_11") if c == "positive"]
    a21 = load("abalone-21_vs_8")
    r21 = [f for f, c in a21 if c == "positive"]
    r8 = [f for f, c in a21 if c == "negative"]
    r9 = [f for f, c in load("abalone9-18") if c == "negative"]
    pool = collections.Counter(f for f, c in load("abalone-20_vs_8-9-10") if c == "negative")
    pool.subtract(collections.Counter(r8))
    pool.subtract(collections.Counter(r9))
    if any(v < 0 for v in pool.values()):
        raise SystemExit("ring 8/9 rows not contained in the 8-9-10 pool")
    r10 = list(pool.elements())

    sex = {"M": "0", "F": "1", "I": "2"}
    print("sex,length,diameter,height,whole_weight,shucked_weight,viscera_weight,shell_weight,rings,label")
    for rings, label, group in [(8, "normal", r8), (9, "normal", r9), (10, "normal", r10),
                                (3, "abnormal", r3), (21, "abnormal", r21)]:
        for f in group:
            print(",".join([sex[f[0]], *f[1:], str(rings), label]))
    print(f"rings: 3={len(r3)} 8={len(r8)} 9={len(r9)} 10={len(r10)} 21={len(r21)}", file=sys.stderr)


if __name__ == "__main__":
    main()
