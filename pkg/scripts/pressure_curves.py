"""Spin-orbit splittings and the ZPL fine-structure width versus pressure.

Writes one CSV per defect with lambda_g, lambda_u (GHz) and lambda_g + lambda_u (meV)
on a 1 GPa grid, and prints the fitted calibration curves.

Usage: python scripts/pressure_curves.py --outdir curves [--interp quadratic|linear]
"""
import argparse
from pathlib import Path

import numpy as np

from g4v import pressure_model as pm
from g4v.io import write_csv
from g4v.units import Energy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="curves")
    ap.add_argument("--interp", choices=("quadratic", "linear"), default="quadratic")
    args = ap.parse_args()
    outdir = Path(args.outdir)
    grid = np.arange(0.0, 181.0, 1.0)
    for name in pm.DEFECTS:
        table = pm.load_defect(name)
        lg = pm.curve_for(table, "lambda_g", args.interp)
        lu = pm.curve_for(table, "lambda_u", args.interp)
        rows = []
        for p in grid:
            a, b = pm.evaluate(lg, p), pm.evaluate(lu, p)
            rows.append((p, a, b, Energy(a + b, "GHz").mev))
        path = write_csv(outdir / f"{name.lower()}_lambda.csv",
                         ["pressure_GPa", "lambda_g_GHz", "lambda_u_GHz", "zpl_width_meV"], rows)
        if args.interp == "quadratic":
            c0, c1, c2 = lg.coeffs
            print(f"{name}: lambda_g = {c0:.2f} + {c1:.4f} P + {c2:.3e} P^2 GHz "
                  f"(rms {lg.rms_residual:.2f} GHz); width {rows[0][3]:.2f} -> {rows[-1][3]:.2f} meV; {path}")
        else:
            print(f"{name}: width {rows[0][3]:.2f} -> {rows[-1][3]:.2f} meV; {path}")


if __name__ == "__main__":
    main()
