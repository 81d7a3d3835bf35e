"""Dopant axial constants and first-neighbour carbon orbital tensors from the shipped raw tensors.

Usage: python scripts/reproduce_hyperfine.py [--normalization printed|consistent]
"""
import argparse

import numpy as np

from g4v import hf_decompose as hd
from g4v import pressure_model as pm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--normalization", choices=sorted(hd.NORMALIZATIONS), default=None,
                    help="override the normalisation stored in each input file")
    args = ap.parse_args()
    np.set_printoptions(precision=2, suppress=True)
    for name in pm.DEFECTS:
        doc = hd.load_tensor_input(pm.data_dir() / "tensors" / f"{name.lower()}_ground_tensors.json")
        if args.normalization:
            doc["dopant"]["normalization"] = args.normalization
            for shell in doc["shells"].values():
                shell["normalization"] = args.normalization
        out = hd.run_decomposition(doc)
        d = out["dopant"]
        print(f"{name} ({d['isotope']}, q={out['q']}): A_par={d['a_par']:.2f} A_perp={d['a_perp']:.2f} "
              f"A1={d['a1']:.3f} A2={d['a2']:.3f} MHz (off-pattern residual {d['residual']:.3f})")
        for shell, block in out["shells"].items():
            print(f"  {shell}")
            for key in ("A", "A_x", "A_y"):
                m = np.asarray(block[key])
                comps = [m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2]]
                print(f"    {key:4} " + " ".join(f"{c:8.2f}" for c in comps))


if __name__ == "__main__":
    main()
