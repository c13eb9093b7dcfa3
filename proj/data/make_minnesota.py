"""Regenerate minnesota.mtx / minnesota.xy from the MatlabBGL Minnesota road graph.

The .mat file ships inside the `pygsp` wheel (pygsp/data/pointclouds/minnesota.mat).
Usage: python3 make_minnesota.py path/to/minnesota.mat
"""
import sys

import numpy as np
import scipy.io as sio

mat = sio.loadmat(sys.argv[1])
adj = mat["A"].tocoo()
xy = mat["xy"]
n = xy.shape[0]

pairs = sorted({(max(i, j), min(i, j)) for i, j in zip(adj.row, adj.col) if i != j})
with open("minnesota.mtx", "w") as f:
    f.write("%%MatrixMarket matrix coordinate pattern symmetric\n")
    f.write("% Minnesota road network (MatlabBGL), lower triangle, 1-based\n")
    f.write(f"{n} {n} {len(pairs)}\n")
    for i, j in pairs:
        f.write(f"{i + 1} {j + 1}\n")

with open("minnesota.xy", "w") as f:
    for lon, lat in xy:
        f.write(f"{float(lon)!r} {float(lat)!r}\n")
