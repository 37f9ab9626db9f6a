#!/usr/bin/env python3
"""Convert a DHNE-format dataset (train_data.npz / test_data.npz) into the
hyperedge and node-type text files read by hsagnn.

Each npz holds an (N, k) integer array of per-type node indices
("train_data" / "test_data") and "nums_type", the node count of every type.

Example:
    convert_dhne_npz.py DHNE/data/GPS out/ --stem gps --type-names user location activity
"""

import argparse
import pathlib
import sys

import numpy as np


def load_edges(path, key):
    with np.load(path, allow_pickle=True) as data:
        edges = np.asarray(data[key], dtype=np.int64)
        nums = np.asarray(data["nums_type"], dtype=np.int64) if "nums_type" in data else None
    return edges, nums


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("src", type=pathlib.Path, help="directory with train_data.npz and test_data.npz")
    parser.add_argument("dst", type=pathlib.Path, help="output directory")
    parser.add_argument("--stem", default="gps", help="output file stem (default: gps)")
    parser.add_argument("--type-names", nargs="*", help="one name per node type (default: t0 t1 ...)")
    parser.add_argument("--train-only", action="store_true", help="skip test_data.npz")
    args = parser.parse_args()

    train, nums = load_edges(args.src / "train_data.npz", "train_data")
    parts = [train]
    test_path = args.src / "test_data.npz"
    if not args.train_only and test_path.exists():
        test, test_nums = load_edges(test_path, "test_data")
        if nums is None:
            nums = test_nums
        parts.append(test)
    edges = np.concatenate(parts, axis=0)
    if edges.ndim != 2 or edges.shape[1] < 2:
        sys.exit(f"expected an (N, k>=2) edge array, got shape {edges.shape}")
    k = edges.shape[1]
    if nums is None:
        nums = edges.max(axis=0) + 1
    names = args.type_names or [f"t{i}" for i in range(k)]
    if len(names) != k:
        sys.exit(f"--type-names needs {k} names")
    if np.any(edges < 0) or np.any(edges >= nums[np.newaxis, :k]):
        sys.exit("edge index outside nums_type")

    args.dst.mkdir(parents=True, exist_ok=True)
    token = lambda t, i: f"{names[t]}_{i}"
    with open(args.dst / f"{args.stem}.edges", "w") as f:
        for row in edges:
            f.write(" ".join(token(t, int(i)) for t, i in enumerate(row)) + "\n")
    with open(args.dst / f"{args.stem}.types", "w") as f:
        for t in range(k):
            for i in range(int(nums[t])):
                f.write(f"{token(t, i)}\t{names[t]}\n")
    print(f"{len(edges)} hyperedges, {int(nums[:k].sum())} nodes -> {args.dst}")


if __name__ == "__main__":
    main()
