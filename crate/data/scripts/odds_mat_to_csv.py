"""Convert an ODDS .mat file (arrays X and y) to CSV with a label column.

Usage: python odds_mat_to_csv.py thyroid.mat ../thyroid.csv
"""
import csv
import sys

import numpy as np


def load(path):
    try:
        from scipy.io import loadmat

        m = loadmat(path)
        return np.asarray(m["X"], dtype=float), np.asarray(m["y"]).ravel()
    except NotImplementedError:
        # v7.3 files are HDF5 and stored transposed.
        import h5py

        with h5py.File(path, "r") as f:
            return np.asarray(f["X"], dtype=float).T, np.asarray(f["y"]).ravel()


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    x, y = load(sys.argv[1])
    with open(sys.argv[2], "w", newline="") as out:
        w = csv.writer(out)
        w.writerow([f"x{i}" for i in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    print(f"{x.shape[0]} rows, {x.shape[1]} features, {int((y == 1).sum())} abnormal")


if __name__ == "__main__":
    main()
