"""Pressure-indexed parameter tables, interpolation curves and sensor calibration.

Tables are JSON files, one per defect, validated against
``schemas/defect_table.schema.json``.  Energies are meV, spin-orbit
splittings GHz, hyperfine constants MHz, pressures GPa and distances
angstrom.

Two interpolation modes are offered.  ``"quadratic"`` is an unconstrained
least-squares parabola over the whole grid; ``"linear"`` is piecewise linear
through the grid points and therefore exact at every tabulated pressure.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy.optimize import brentq

from .errors import MissingDataError, RangeError, SchemaError, ValidationError
from .io import sha256_file, write_csv
from .jt_vibronic import JTParams

log = logging.getLogger(__name__)

DATA_DIR_ENV = "G4V_DATA_DIR"
DEFECTS = ("SiV", "GeV", "SnV", "PbV")
STATES = ("ground", "excited")
STATE_SUFFIX = {"g": "ground", "u": "excited"}
SERIES_FIELDS = ("e_jt", "delta_jt", "hbar_omega", "p_factor", "lambda")
HF_FIELDS = ("a_par", "a_perp", "a1", "a2")
EXTRAPOLATION_MARGIN = 0.10

# Magnitude heuristic for the permuted excited-state columns: a vibrational
# quantum is tens of meV while barriers are a few meV.
_SWAP_OMEGA_BELOW = 10.0
_SWAP_DELTA_ABOVE = 10.0


def data_dir() -> Path:
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("g4v").joinpath("data")))


def _schema():
    return json.loads(resources.files("g4v").joinpath("schemas/defect_table.schema.json").read_text())


@dataclass(frozen=True)
class PressurePoint:
    pressure: float
    e_jt: float
    delta_jt: float
    hbar_omega: float
    p_factor: float
    lambda_ghz: float
    d1: float | None = None
    d2: float | None = None

    def __post_init__(self):
        JTParams(self.e_jt, self.delta_jt, self.hbar_omega)
        if not 0 < self.p_factor <= 1:
            raise ValidationError(f"p_factor {self.p_factor} outside (0, 1]")
        if self.lambda_ghz < 0:
            raise ValidationError(f"negative spin-orbit splitting {self.lambda_ghz}")

    @property
    def jt_params(self) -> JTParams:
        return JTParams(self.e_jt, self.delta_jt, self.hbar_omega)

    def value(self, name: str) -> float:
        return self.lambda_ghz if name == "lambda" else getattr(self, name)


@dataclass
class DefectParamTable:
    defect: str
    ground: list[PressurePoint]
    excited: list[PressurePoint]
    zero_pressure: dict = field(default_factory=dict)
    structure: dict = field(default_factory=dict)
    hyperfine: dict = field(default_factory=dict)
    hyperfine_series: dict = field(default_factory=dict)
    quadrupole: dict | None = None
    isotope: dict | None = None
    q_factor: float | None = None
    a_ple: float | None = None
    corrections: list[str] = field(default_factory=list)
    source: str = ""
    sha256: str = ""

    def points(self, state: str) -> list[PressurePoint]:
        if state not in STATES:
            raise ValidationError(f"state must be one of {STATES}, got {state!r}")
        return self.ground if state == "ground" else self.excited

    def pressures(self, state: str = "ground") -> np.ndarray:
        return np.array([pt.pressure for pt in self.points(state)])

    def series(self, observable: str) -> tuple[np.ndarray, np.ndarray]:
        """(pressures, values) for ``observable``.

        Accepted names are ``<field>_g`` / ``<field>_u`` with field one of
        e_jt, delta_jt, hbar_omega, p_factor, lambda, a_par, a_perp, a1, a2;
        ``zpl_sum`` (lambda_g + lambda_u, GHz) and ``a_ple`` (MHz).
        """
        if observable == "zpl_sum":
            pg, yg = self.series("lambda_g")
            pu, yu = self.series("lambda_u")
            if not np.array_equal(pg, pu):
                raise ValidationError("ground and excited grids differ; zpl_sum undefined")
            return pg, yg + yu
        if observable == "a_ple":
            pg, ag = self.series("a_par_g")
            pu, au = self.series("a_par_u")
            if not np.array_equal(pg, pu):
                raise ValidationError("ground and excited hyperfine grids differ")
            return pg, 0.5 * (au - ag)
        name, _, suffix = observable.rpartition("_")
        if suffix not in STATE_SUFFIX or not name:
            raise ValidationError(f"unknown observable {observable!r}")
        state = STATE_SUFFIX[suffix]
        if name in SERIES_FIELDS:
            pts = self.points(state)
            return (np.array([pt.pressure for pt in pts]), np.array([pt.value(name) for pt in pts]))
        if name in HF_FIELDS:
            rows = [r for r in self.hyperfine_series.get(state, []) if name in r]
            if not rows:
                raise MissingDataError(
                    f"{self.defect}: no pressure-dependent {name} data for the {state} state; "
                    "load a table with a populated hyperfine_series"
                )
            return np.array([r["pressure"] for r in rows]), np.array([r[name] for r in rows])
        raise ValidationError(f"unknown observable {observable!r}")


def _canonicalize_row(row: dict, where: str, notes: list[str]) -> dict:
    row = dict(row)
    if row["hbar_omega"] < _SWAP_OMEGA_BELOW and row["delta_jt"] >= _SWAP_DELTA_ABOVE:
        row["delta_jt"], row["hbar_omega"] = row["hbar_omega"], row["delta_jt"]
        msg = (f"{where}: swapped delta_jt/hbar_omega columns "
               f"(now delta_jt={row['delta_jt']}, hbar_omega={row['hbar_omega']})")
        notes.append(msg)
        log.info(msg)
    return row


def _interp_structure(structure: list[dict], pressure: float):
    if len(structure) < 2:
        if structure:
            return structure[0]["d1"], structure[0]["d2"]
        return None, None
    ps = np.array([s["pressure"] for s in structure])
    d1 = float(np.interp(pressure, ps, [s["d1"] for s in structure]))
    d2 = float(np.interp(pressure, ps, [s["d2"] for s in structure]))
    return d1, d2


def load_table(path) -> DefectParamTable:
    """Load and validate one defect table.  ``path`` may also be a defect name."""
    p = Path(path)
    if not p.suffix and str(path) in DEFECTS:
        p = data_dir() / f"{str(path).lower()}.json"
    try:
        text = p.read_text()
    except FileNotFoundError as exc:
        raise SchemaError(f"{p}: file not found") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: not valid JSON ({exc})") from exc
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise SchemaError(f"{p}: schema violation at {where}: {exc.message}") from exc

    notes: list[str] = []
    states: dict[str, list[PressurePoint]] = {}
    for state in STATES:
        sdoc = doc["states"][state]
        pts = []
        for k, raw in enumerate(sdoc["series"]):
            where = f"{doc['defect']} {state} row {k} (P={raw['pressure']} GPa)"
            row = _canonicalize_row(raw, where, notes)
            d1, d2 = row.get("d1"), row.get("d2")
            if d1 is None and sdoc.get("structure"):
                # Only attach structure at pressures the structural table covers.
                covered = [s for s in sdoc["structure"] if s["pressure"] == row["pressure"]]
                if covered:
                    d1, d2 = covered[0]["d1"], covered[0]["d2"]
            try:
                pts.append(PressurePoint(row["pressure"], row["e_jt"], row["delta_jt"], row["hbar_omega"],
                                         row["p_factor"], row["lambda"], d1, d2))
            except ValidationError as exc:
                raise ValidationError(f"{p}: {where}: {exc}") from exc
        ps = [pt.pressure for pt in pts]
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValidationError(f"{p}: {state} pressures must be strictly increasing, got {ps}")
        states[state] = pts

    return DefectParamTable(
        defect=doc["defect"],
        ground=states["ground"],
        excited=states["excited"],
        zero_pressure={s: doc["states"][s].get("zero_pressure", {}) for s in STATES},
        structure={s: doc["states"][s].get("structure", []) for s in STATES},
        hyperfine={s: doc["states"][s].get("hyperfine") for s in STATES},
        hyperfine_series={s: doc["states"][s].get("hyperfine_series", []) for s in STATES},
        quadrupole=doc.get("quadrupole"),
        isotope=doc.get("isotope"),
        q_factor=doc.get("q_factor"),
        a_ple=doc.get("a_ple"),
        corrections=notes,
        source=str(p),
        sha256=sha256_file(p),
    )


def load_defect(name: str) -> DefectParamTable:
    canon = {d.lower(): d for d in DEFECTS}.get(str(name).lower())
    if canon is None:
        raise ValidationError(f"unknown defect {name!r}; expected one of {DEFECTS}")
    return load_table(data_dir() / f"{canon.lower()}.json")


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureCurve:
    observable: str
    coeffs: tuple  # (c0, c1, c2), value = c0 + c1 P + c2 P^2; empty in linear mode
    p_min: float
    p_max: float
    residuals: np.ndarray
    mode: str = "quadratic"
    grid_p: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grid_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fit_note: str = "unconstrained least squares"

    @property
    def allowed_range(self) -> tuple[float, float]:
        span = self.p_max - self.p_min
        return self.p_min - EXTRAPOLATION_MARGIN * span, self.p_max + EXTRAPOLATION_MARGIN * span

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2))) if self.residuals.size else 0.0

    def __call__(self, p):
        return evaluate(self, p)

    def slope(self, p: float) -> float:
        if self.mode == "quadratic":
            return self.coeffs[1] + 2 * self.coeffs[2] * p
        k = int(np.clip(np.searchsorted(self.grid_p, p) - 1, 0, len(self.grid_p) - 2))
        return float((self.grid_y[k + 1] - self.grid_y[k]) / (self.grid_p[k + 1] - self.grid_p[k]))


def _as_xy(points, y=None):
    if y is None:
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("points must be a sequence of (P, y) pairs")
        return arr[:, 0], arr[:, 1]
    return np.asarray(points, dtype=float), np.asarray(y, dtype=float)


def fit_quadratic(points, y=None, observable: str = "") -> PressureCurve:
    """Least-squares parabola through (P, y) data."""
    p, v = _as_xy(points, y)
    if len(p) < 3:
        raise ValidationError(f"quadratic fit needs at least 3 points, got {len(p)}")
    if len(np.unique(p)) < 3:
        raise ValidationError("quadratic fit is rank deficient: fewer than 3 distinct pressures")
    poly = np.polynomial.Polynomial.fit(p, v, 2).convert()
    coeffs = np.zeros(3)
    coeffs[: len(poly.coef)] = poly.coef
    resid = v - np.polynomial.polynomial.polyval(p, coeffs)
    return PressureCurve(observable, tuple(float(c) for c in coeffs), float(p.min()), float(p.max()),
                         resid, "quadratic", p.copy(), v.copy())


def piecewise_linear(points, y=None, observable: str = "") -> PressureCurve:
    p, v = _as_xy(points, y)
    if len(p) < 2:
        raise ValidationError("linear interpolation needs at least 2 points")
    order = np.argsort(p)
    p, v = p[order], v[order]
    if np.any(np.diff(p) <= 0):
        raise ValidationError("pressures must be distinct")
    return PressureCurve(observable, (), float(p[0]), float(p[-1]), np.zeros(len(p)), "linear", p, v,
                         fit_note="piecewise linear through grid points")


def make_curve(p, y, mode: str = "quadratic", observable: str = "") -> PressureCurve:
    if mode == "quadratic":
        return fit_quadratic(p, y, observable=observable)
    if mode == "linear":
        return piecewise_linear(p, y, observable=observable)
    raise ValidationError(f"interpolation mode must be 'quadratic' or 'linear', got {mode!r}")


def curve_for(table: DefectParamTable, observable: str, mode: str = "quadratic") -> PressureCurve:
    p, y = table.series(observable)
    return make_curve(p, y, mode, observable=f"{table.defect}:{observable}")


def evaluate(curve: PressureCurve, p):
    """Curve value at pressure ``p`` (scalar or array); refuses far extrapolation."""
    arr = np.asarray(p, dtype=float)
    lo, hi = curve.allowed_range
    if np.any(arr < lo - 1e-12) or np.any(arr > hi + 1e-12) or not np.all(np.isfinite(arr)):
        raise RangeError(
            f"pressure {p} GPa outside the allowed range [{lo:g}, {hi:g}] GPa of {curve.observable or 'curve'}"
        )
    if curve.mode == "quadratic":
        out = np.polynomial.polynomial.polyval(arr, curve.coeffs)
    else:
        gp, gy = curve.grid_p, curve.grid_y
        out = np.interp(arr, gp, gy)
        left = arr < gp[0]
        right = arr > gp[-1]
        if np.any(left):
            s = (gy[1] - gy[0]) / (gp[1] - gp[0])
            out = np.where(left, gy[0] + s * (arr - gp[0]), out)
        if np.any(right):
            s = (gy[-1] - gy[-2]) / (gp[-1] - gp[-2])
            out = np.where(right, gy[-1] + s * (arr - gp[-1]), out)
    return float(out) if np.ndim(out) == 0 else out


def _check_monotonic(curve: PressureCurve) -> int:
    if curve.mode == "quadratic":
        s0, s1 = curve.slope(curve.p_min), curve.slope(curve.p_max)
        if s0 == 0 or s1 == 0 or np.sign(s0) != np.sign(s1):
            raise ValidationError(f"{curve.observable}: curve is not strictly monotonic on "
                                  f"[{curve.p_min:g}, {curve.p_max:g}] GPa")
        return int(np.sign(s0))
    d = np.diff(curve.grid_y)
    if np.all(d > 0):
        return 1
    if np.all(d < 0):
        return -1
    raise ValidationError(f"{curve.observable}: grid values are not strictly monotonic")


def calibrate(curve: PressureCurve, measured: float) -> float:
    """Pressure at which the curve equals ``measured`` (within [p_min, p_max])."""
    _check_monotonic(curve)
    lo, hi = curve.p_min, curve.p_max
    f_lo, f_hi = evaluate(curve, lo) - measured, evaluate(curve, hi) - measured
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        v_lo, v_hi = sorted((evaluate(curve, lo), evaluate(curve, hi)))
        raise RangeError(
            f"measured value {measured:g} outside the calibrated range [{v_lo:g}, {v_hi:g}] "
            f"of {curve.observable or 'curve'} (pressures {lo:g}-{hi:g} GPa)"
        )
    return float(brentq(lambda x: evaluate(curve, x) - measured, lo, hi, xtol=1e-10, rtol=1e-14,
                        maxiter=200))


def calibration_uncertainty(curve: PressureCurve, pressure: float) -> float:
    """Pressure uncertainty from the rms fit residual divided by the local slope."""
    slope = abs(curve.slope(pressure))
    # Slopes at round-off level relative to the curve's own scale count as flat.
    span = max(curve.p_max - curve.p_min, 1e-300)
    scale = float(np.max(np.abs(curve.grid_y))) / span if curve.grid_y.size else 0.0
    if slope <= 1e-12 * scale:
        return float("inf")
    return curve.rms_residual / slope


@dataclass(frozen=True)
class PhotostabilityResult:
    pressure: float | None
    at_boundary: bool = False


def photostability_limit(zpl_curve: PressureCurve, threshold_curve: PressureCurve,
                         n_scan: int = 2001) -> PhotostabilityResult:
    """Smallest pressure where the ZPL reaches the photoionisation threshold."""
    lo = max(zpl_curve.p_min, threshold_curve.p_min)
    hi = min(zpl_curve.p_max, threshold_curve.p_max)
    if hi < lo:
        raise ValidationError("curves do not share a pressure range")

    def diff(x):
        return evaluate(zpl_curve, x) - evaluate(threshold_curve, x)

    if diff(lo) >= 0:
        return PhotostabilityResult(lo, True)
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([diff(x) for x in grid])
    idx = np.nonzero(vals >= 0)[0]
    if idx.size == 0:
        return PhotostabilityResult(None, False)
    k = int(idx[0])
    if vals[k] == 0:
        root = float(grid[k])
    else:
        root = float(brentq(diff, grid[k - 1], grid[k], xtol=1e-10, rtol=1e-14))
    return PhotostabilityResult(root, bool(abs(root - hi) < 1e-9 * max(1.0, abs(hi))))


def observable_report(table: DefectParamTable, pressure: float, mode: str = "linear") -> dict:
    """Interpolated snapshot of every tabulated observable at ``pressure``.

    Defaults to piecewise-linear interpolation so that grid pressures
    reproduce the table exactly.  Structural distances are tabulated at two
    pressures only and are always interpolated linearly.
    """
    out = {"defect": table.defect, "pressure": float(pressure), "mode": mode}
    for state, suffix in (("ground", "g"), ("excited", "u")):
        snap = {}
        for name in SERIES_FIELDS:
            snap[name] = evaluate(curve_for(table, f"{name}_{suffix}", mode), pressure)
        d1, d2 = _interp_structure(table.structure.get(state, []), pressure)
        if d1 is not None:
            snap["d1"], snap["d2"] = d1, d2
        out[state] = snap
    return out


def export_curve_csv(curve: PressureCurve, pressures, path) -> Path:
    pressures = np.asarray(pressures, dtype=float)
    values = evaluate(curve, pressures)
    rows = [(p, v) for p, v in zip(pressures, np.atleast_1d(values))]
    return write_csv(path, ["pressure_GPa", curve.observable or "value"], rows)
