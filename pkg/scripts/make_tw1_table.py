"""Regenerate the Tracy-Widom (beta=1) CDF table shipped in graphtest/data.

F_1(s) = det(I - K_s) on L^2(0, inf) with K_s(x, y) = Ai(s + (x + y)/2) / 2,
discretized by Gauss-Legendre quadrature on [0, L] (Bornemann's Nystrom
method).  The grid runs from -8 to 4 in steps of 0.01; the upper end is
where F_1 reaches ~0.99978, matching the widely used published table that
stops just short of F = 0.9998.

Usage: python scripts/make_tw1_table.py [out.csv]

Prints the sha256 to paste into ``graphtest.dist.TW1_TABLE_SHA256``.
"""
import hashlib
import sys
from pathlib import Path

import numpy as np
from scipy.special import airy

X_MIN, X_MAX, STEP = -8.0, 4.0, 0.01
NODES, LENGTH = 240, 30.0


def tw1_cdf_fredholm(s, nodes=NODES, length=LENGTH):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = (x + 1.0) * length / 2.0
    w = w * length / 2.0
    sw = np.sqrt(w)
    kernel = 0.5 * airy((x[:, None] + x[None, :]) / 2.0 + s)[0]
    return np.linalg.det(np.eye(nodes) - sw[:, None] * kernel * sw[None, :])


def main(out):
    count = int(round((X_MAX - X_MIN) / STEP)) + 1
    xs = X_MIN + STEP * np.arange(count)
    fs = np.array([tw1_cdf_fredholm(s) for s in xs])
    if not np.all(np.diff(fs) > 0):
        raise SystemExit("table is not strictly increasing")
    lines = ["x,F"] + [f"{x:.2f},{f:.17g}" for x, f in zip(xs, fs)]
    data = ("\n".join(lines) + "\n").encode()
    Path(out).write_bytes(data)
    print(f"wrote {count} rows to {out}")
    print(f"F(x_min)={fs[0]:.6g}  F(x_max)={fs[-1]:.9f}")
    print("sha256", hashlib.sha256(data).hexdigest())


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src/graphtest/data/tw1_table.csv"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
