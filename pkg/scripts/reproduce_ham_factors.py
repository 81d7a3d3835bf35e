"""Ham reduction factors for every defect and state at zero pressure.

Usage: python scripts/reproduce_ham_factors.py [--cutoff 64]
"""
import argparse
import time

from g4v import jt_vibronic as jt
from g4v import pressure_model as pm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cutoff", type=int, default=jt.DEFAULT_CUTOFF)
    args = ap.parse_args()
    print(f"{'defect':6} {'state':8} {'p_ref':>6} {'p_calc':>7} {'q_calc':>7} {'lambda_ref':>10} "
          f"{'lambda_calc':>11} {'N':>3} {'time_s':>6}")
    for name in pm.DEFECTS:
        table = pm.load_defect(name)
        for state in pm.STATES:
            zp = table.zero_pressure[state]
            t0 = time.perf_counter()
            hf, sol, _ = jt.compute_ham_factors(
                jt.JTParams(zp["e_jt"], zp["delta_jt"], zp["hbar_omega"]), cutoff=args.cutoff)
            dt = time.perf_counter() - t0
            lam = jt.effective_lambda(hf.p, zp["lambda0"])
            print(f"{name:6} {state:8} {zp['p_factor']:6.3f} {hf.p:7.4f} {hf.q:7.4f} {zp['lambda']:10.1f} "
                  f"{lam:11.1f} {sol.cutoff:3d} {dt:6.2f}")


if __name__ == "__main__":
    main()
