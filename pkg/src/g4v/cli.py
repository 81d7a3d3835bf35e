"""Command-line front end.

Exit codes: 0 success, 2 validation or schema error, 3 non-convergence,
4 out-of-range pressure or measured value, 5 frame or symmetry violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import hf_decompose as hfd
from . import jt_vibronic as jt
from . import pressure_model as pm
from . import spin_hamiltonian as sh
from .errors import (
    DegeneracyError,
    FrameError,
    MissingDataError,
    NonConvergenceError,
    RangeError,
    SymmetryError,
    ValidationError,
)
from .io import RunManifest, csv_text, json_text, manifest_path_for, write_csv, write_json
from .units import Energy, MagneticField

log = logging.getLogger("g4v")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_RANGE = 4
EXIT_SYMMETRY = 5

LEVEL_HEADER = ["index", "energy_GHz", "degeneracy", "labels"]
OBSERVABLE_UNITS = {"lambda_g": "GHz", "lambda_u": "GHz", "zpl_sum": "GHz", "a_ple": "MHz"}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (SymmetryError, FrameError)):
        return EXIT_SYMMETRY
    if isinstance(exc, (NonConvergenceError, DegeneracyError)):
        return EXIT_NONCONVERGENCE
    if isinstance(exc, RangeError):
        return EXIT_RANGE
    if isinstance(exc, (ValidationError, MissingDataError)):
        return EXIT_VALIDATION
    raise exc


def _emit(out: str | None, header, rows, manifest: RunManifest) -> None:
    if out:
        write_csv(out, header, rows)
        write_json(manifest_path_for(out), manifest.to_dict())
    else:
        sys.stdout.write(csv_text(header, rows))


# ---------------------------------------------------------------------------
# jt-solve
# ---------------------------------------------------------------------------

def cmd_jt_solve(args) -> int:
    params = jt.JTParams(args.ejt, args.delta, args.omega)
    c = jt.fit_couplings(params)
    escalate = None if args.no_escalate else jt.ESCALATED_CUTOFF
    sol = jt.solve(c, params.hbar_omega, cutoff=args.cutoff, n_eigen=args.n_eigen,
                   escalate_to=escalate)
    if not sol.converged:
        raise NonConvergenceError(
            f"ground doublet moved {sol.doublet_shift:.3g} meV between cutoffs {sol.cutoff - 4} and "
            f"{sol.cutoff}; residuals {np.array2string(sol.residuals, precision=3)}",
            residuals=sol.residuals,
        )
    p = jt.ham_factor_p(sol)
    q = jt.ham_factor_q(p)
    print(f"V_meV={c.v_linear:.9g}")
    print(f"G_meV={c.g_quadratic:.9g}")
    print(f"p={p:.9g}")
    print(f"q={q:.9g}")
    print(f"cutoff={sol.cutoff}")
    if args.out:
        manifest = RunManifest("jt-solve", {
            "e_jt_meV": args.ejt, "delta_jt_meV": args.delta, "hbar_omega_meV": args.omega,
            "cutoff": sol.cutoff, "n_eigen": args.n_eigen, "v_linear_meV": c.v_linear,
            "g_quadratic_meV": c.g_quadratic, "p": p, "q": q,
        })
        rows = [(k, e) for k, e in enumerate(sol.eigenvalues)]
        write_csv(args.out, ["index", "energy_meV"], rows)
        write_json(manifest_path_for(args.out), manifest.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# levels / spectrum
# ---------------------------------------------------------------------------

def _isotope(table: pm.DefectParamTable, isotope: str | None):
    if isotope in (None, "", "none"):
        return None
    name = table.isotope["name"] if table.isotope else None
    if isotope != name:
        raise ValidationError(f"{table.defect} data ship hyperfine constants for {name}, not {isotope}")
    return float(table.isotope["nuclear_spin"])


def _state_spec(table, state, report, nuclear_spin, bfield, lambda_ghz) -> sh.SpinSystemSpec:
    hf = quad = None
    if nuclear_spin is not None:
        h = table.hyperfine[state]
        hf = sh.EffectiveHF(h["a_par"], h["a_perp"], h.get("a1", 0.0), h.get("a2", 0.0))
        if state == "ground" and table.quadrupole and nuclear_spin >= 1:
            qd = table.quadrupole
            quad = sh.QuadrupoleParams(qd["q_static"], qd.get("q1", 0.0), qd.get("q2", 0.0),
                                       qd.get("nuclear_moment"))
    return sh.SpinSystemSpec(lambda_eff=lambda_ghz, hf=hf, quad=quad,
                             nuclear_spin=nuclear_spin or 0.0, b_field=bfield)


def _pipeline(args):
    table = pm.load_defect(args.defect)
    report = pm.observable_report(table, args.pressure, mode=args.interp)
    nuclear_spin = _isotope(table, args.isotope)
    bfield = MagneticField(args.bfield, "G")
    inputs = {
        "defect": table.defect, "pressure_GPa": args.pressure, "interp": args.interp,
        "isotope": args.isotope or "none", "bfield_G": args.bfield, "solve_jt": bool(args.solve_jt),
    }
    level_sets = {}
    for state in ("ground", "excited"):
        snap = report[state]
        lam = snap["lambda"]
        if args.solve_jt:
            factors, _, _ = jt.compute_ham_factors(
                jt.JTParams(snap["e_jt"], snap["delta_jt"], snap["hbar_omega"]))
            lam = lam * factors.p / snap["p_factor"]
            inputs[f"p_solved_{state}"] = factors.p
        inputs[f"lambda_{state}_GHz"] = lam
        spec = _state_spec(table, state, report, nuclear_spin, bfield, lam)
        inputs[f"terms_{state}"] = sh.active_terms(spec)
        level_sets[state] = sh.levels(sh.assemble(spec))
    if nuclear_spin is not None and args.pressure != 0:
        inputs["hyperfine_note"] = "zero-pressure hyperfine constants used at non-zero pressure"
    manifest = RunManifest("", inputs)
    manifest.add_data_file(table.source)
    return table, level_sets, manifest


def _level_rows(lv: sh.LevelSet):
    deg = lv.degeneracies
    return [(k, e, deg[k], lv.labels[k]) for k, e in enumerate(lv.eigenvalues)]


def _line_rows(lines):
    return [(k, ln.energy, ln.degeneracy, f"{ln.initial} -> {ln.final}") for k, ln in enumerate(lines)]


def cmd_levels(args) -> int:
    _, level_sets, manifest = _pipeline(args)
    manifest.command = "levels"
    manifest.inputs["state"] = args.state
    lines = sh.ple_lines(level_sets["ground"], level_sets["excited"])
    _emit(args.out, LEVEL_HEADER, _level_rows(level_sets[args.state]), manifest)
    if args.out:
        out = Path(args.out)
        lines_path = out.with_name(out.stem + ".lines" + out.suffix)
        write_csv(lines_path, LEVEL_HEADER, _line_rows(lines))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    _, level_sets, manifest = _pipeline(args)
    manifest.command = "spectrum"
    lines = sh.ple_lines(level_sets["ground"], level_sets["excited"])
    _emit(args.out, LEVEL_HEADER, _line_rows(lines), manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# hf-decompose
# ---------------------------------------------------------------------------

def cmd_hf_decompose(args) -> int:
    doc = hfd.load_tensor_input(args.input)
    result = hfd.run_decomposition(doc, q=args.q)
    manifest = RunManifest("hf-decompose", {"input": str(args.input), "q": result["q"]})
    manifest.add_data_file(args.input)
    rows = []
    if result["dopant"]:
        d = result["dopant"]
        rows += [("dopant", key, d[key]) for key in ("a_par", "a_perp", "a1", "a2", "residual")]
    for name, s in sorted(result["shells"].items()):
        for key in ("A", "A_x", "A_y"):
            m = np.asarray(s[key])
            for comp, (i, j) in zip(("xx", "yy", "zz", "xy", "xz", "yz"),
                                    ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))):
                rows.append((name, f"{key}_{comp}", m[i, j]))
    if args.out:
        out = Path(args.out)
        write_json(out, result)
        write_csv(out.with_suffix(".csv"), ["block", "quantity", "value_MHz"], rows)
        write_json(manifest_path_for(out), manifest.to_dict())
    else:
        sys.stdout.write(json_text(result))
    return EXIT_OK


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    table = pm.load_defect(args.defect)
    native = OBSERVABLE_UNITS[args.observable]
    value = Energy(args.value, args.unit).to(native).value
    curve = pm.curve_for(table, args.observable, mode=args.interp)
    pressure = pm.calibrate(curve, value)
    unc = pm.calibration_uncertainty(curve, pressure)
    print(f"pressure_GPa={pressure:.9g}")
    print(f"uncertainty_GPa={unc:.3g}")
    print(f"fit={curve.mode} ({curve.fit_note}), rms_residual={curve.rms_residual:.3g} {native}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="g4v", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"g4v {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log data corrections and solver details")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("jt-solve", help="solve one E x e Jahn-Teller problem")
    p.add_argument("--ejt", type=float, required=True, help="Jahn-Teller energy (meV)")
    p.add_argument("--delta", type=float, required=True, help="barrier energy (meV)")
    p.add_argument("--omega", type=float, required=True, help="effective phonon energy (meV)")
    p.add_argument("--cutoff", type=int, default=jt.DEFAULT_CUTOFF)
    p.add_argument("--n-eigen", type=int, default=6)
    p.add_argument("--no-escalate", action="store_true",
                   help="fail instead of retrying at a larger cutoff when unconverged")
    p.add_argument("--out", help="eigenvalue CSV path")
    p.set_defaults(func=cmd_jt_solve)

    def pipeline_flags(p):
        p.add_argument("--defect", required=True, choices=pm.DEFECTS)
        p.add_argument("--pressure", type=float, default=0.0, help="hydrostatic pressure (GPa)")
        p.add_argument("--isotope", default="none", help="dopant isotope, e.g. 29Si, or 'none'")
        p.add_argument("--bfield", type=float, default=0.0, help="axial field (gauss)")
        p.add_argument("--interp", choices=("linear", "quadratic"), default="linear")
        p.add_argument("--solve-jt", action="store_true",
                       help="rescale lambda by a freshly solved Ham factor")
        p.add_argument("--out", help="CSV path (stdout when omitted)")

    p = sub.add_parser("levels", help="fine-structure levels of one electronic state")
    pipeline_flags(p)
    p.add_argument("--state", choices=("ground", "excited"), default="ground")
    p.set_defaults(func=cmd_levels)

    p = sub.add_parser("spectrum", help="optical line positions relative to the ZPL")
    pipeline_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("hf-decompose", help="orbital hyperfine decomposition of raw tensors")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=float, default=None, help="override the reduction factor in the input")
    p.add_argument("--out", help="JSON output path (a CSV is written next to it)")
    p.set_defaults(func=cmd_hf_decompose)

    p = sub.add_parser("calibrate", help="pressure from a measured splitting")
    p.add_argument("--defect", required=True, choices=pm.DEFECTS)
    p.add_argument("--observable", required=True, choices=sorted(OBSERVABLE_UNITS))
    p.add_argument("--value", type=float, required=True)
    p.add_argument("--unit", default="GHz", choices=("GHz", "MHz", "meV"))
    p.add_argument("--interp", choices=("linear", "quadratic"), default="quadratic")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped onto documented exit codes
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
