"""Illustration of the photostability crossing finder on synthetic curves.

The ZPL and photoionisation-threshold curves are made up: no threshold data
ship with the package.  The pair below is built to cross at 32 GPa.

Usage: python scripts/photostability_demo.py [--crossing 32]
"""
import argparse

import numpy as np

from g4v import pressure_model as pm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--crossing", type=float, default=32.0, help="designed crossing pressure (GPa)")
    args = ap.parse_args()
    grid = np.array([0.0, 32.0, 72.0, 120.0, 180.0])
    zpl_ev = 2.38 + 0.004 * grid + 1e-5 * grid**2
    threshold_ev = zpl_ev + 0.0003 * (args.crossing - grid) * (grid + 150.0)
    zpl = pm.fit_quadratic(grid, zpl_ev, observable="zpl_eV")
    thr = pm.fit_quadratic(grid, threshold_ev, observable="threshold_eV")
    res = pm.photostability_limit(zpl, thr)
    if res.pressure is None:
        print("photostable over the whole grid")
    else:
        print(f"ZPL reaches the threshold at {res.pressure:.4f} GPa"
              + (" (at the grid boundary)" if res.at_boundary else ""))


if __name__ == "__main__":
    main()
