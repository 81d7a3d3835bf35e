"""Effective spin Hamiltonian on orbital (x) electron spin (x) nuclear spin.

Basis ordering
--------------
orbital {e+, e-} (L_z = +1, -1)  (x)  spin {up, down}  (x)  nuclear m = I, I-1, ..., -I

Orbital ladder convention: sigma_plus = |e-><e+| and sigma_minus = |e+><e-|,
so that every coupling term conserves (L_z + S_z + I_z) mod 3.  With this
choice the A1 term (S+ I_z) sigma_minus takes |e-, down> into |e+, up>.

All energies are GHz internally; hyperfine and quadrupole constants are
entered in MHz and converted on construction.  The spin-orbit term is
-lambda L_z S_z with lambda > 0 as tabulated, which puts {e+ up, e- down}
in the lower branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import SingularRegimeError, ValidationError
from .units import (
    BOHR_MAGNETON_GHZ_PER_T,
    ELEMENTARY_CHARGE,
    PLANCK_J_S,
    Energy,
    MagneticField,
)

MHZ_TO_GHZ = 1e-3
DEGENERACY_TOL_GHZ = 1e-6

_LZ = np.diag([1.0, -1.0])
_SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]])   # |e-><e+|
_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |e+><e-|
_ORB_ID = np.eye(2)


def spin_matrices(j: float):
    """(J_z, J_+, J_-) for angular momentum ``j`` with m ordered j, j-1, ..., -j."""
    dim = int(round(2 * j)) + 1
    m = j - np.arange(dim)
    jz = np.diag(m)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)); row index of m+1 is one above m.
    up = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(up, 1)
    return jz, jp, jp.T.copy()


def _check_nuclear_spin(i_spin: float) -> float:
    i_spin = float(i_spin)
    if i_spin < 0 or abs(2 * i_spin - round(2 * i_spin)) > 1e-12:
        raise ValidationError(f"nuclear spin must be a non-negative half-integer, got {i_spin}")
    return round(2 * i_spin) / 2


def _kron3(orb, spin, nuc):
    return np.kron(np.kron(orb, spin), nuc)


def _hc_sum(x):
    return x + x.conj().T


@dataclass(frozen=True)
class EffectiveHF:
    """Axial static (a_par, a_perp) and dynamic (a1, a2) hyperfine constants in MHz."""

    a_par: float
    a_perp: float
    a1: float = 0.0
    a2: float = 0.0
    reduced: bool = True

    def __post_init__(self):
        if not all(np.isfinite([self.a_par, self.a_perp, self.a1, self.a2])):
            raise ValidationError("hyperfine constants must be finite")


@dataclass(frozen=True)
class QuadrupoleParams:
    q_static: float
    q1: float = 0.0
    q2: float = 0.0
    nuclear_moment: float | None = None  # m^2

    def __post_init__(self):
        if not all(np.isfinite([self.q_static, self.q1, self.q2])):
            raise ValidationError("quadrupole constants must be finite")


@dataclass(frozen=True)
class SpinSystemSpec:
    lambda_eff: float  # GHz
    g_factor: float = 2.0
    hf: EffectiveHF | None = None
    quad: QuadrupoleParams | None = None
    nuclear_spin: float = 0.0
    b_field: MagneticField = field(default_factory=lambda: MagneticField(0.0, "T"))
    # Quenched orbital Zeeman factor multiplying mu_B B L_z; None leaves it out.
    orbital_zeeman: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "nuclear_spin", _check_nuclear_spin(self.nuclear_spin))
        if not np.isfinite(self.lambda_eff):
            raise ValidationError("lambda_eff must be finite")
        if self.b_field.value < 0:
            raise ValidationError("field magnitude along the defect axis must be non-negative")
        if self.hf is not None and self.nuclear_spin == 0:
            raise ValidationError("hyperfine constants given but nuclear spin is zero")
        if self.quad is not None and self.nuclear_spin < 1:
            raise ValidationError("quadrupole terms need nuclear spin I >= 1")

    @property
    def dimension(self) -> int:
        return 4 * int(round(2 * self.nuclear_spin + 1))


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

def _nuc_dim(i_spin):
    return int(round(2 * i_spin)) + 1


def build_soc(lambda_eff: float, nuclear_spin: float = 0.0) -> np.ndarray:
    """-lambda L_z S_z (GHz)."""
    i_spin = _check_nuclear_spin(nuclear_spin)
    sz, _, _ = spin_matrices(0.5)
    return -lambda_eff * _kron3(_LZ, sz, np.eye(_nuc_dim(i_spin)))


def build_zeeman(g: float, b: MagneticField, nuclear_spin: float = 0.0) -> np.ndarray:
    """g mu_B B S_z for a field along the defect axis (GHz).  Nuclear Zeeman omitted."""
    i_spin = _check_nuclear_spin(nuclear_spin)
    sz, _, _ = spin_matrices(0.5)
    return g * BOHR_MAGNETON_GHZ_PER_T * b.tesla * _kron3(_ORB_ID, sz, np.eye(_nuc_dim(i_spin)))


def build_orbital_zeeman(factor: float, b: MagneticField, nuclear_spin: float = 0.0) -> np.ndarray:
    i_spin = _check_nuclear_spin(nuclear_spin)
    return factor * BOHR_MAGNETON_GHZ_PER_T * b.tesla * _kron3(
        _LZ, np.eye(2), np.eye(_nuc_dim(i_spin)))


def _require_nuclear(i_spin):
    i_spin = _check_nuclear_spin(i_spin)
    if i_spin == 0:
        raise ValidationError("hyperfine terms need a nuclear spin I > 0")
    return i_spin


def build_static_hf(hf: EffectiveHF, nuclear_spin: float) -> np.ndarray:
    """(A_perp/2)(S+ I- + S- I+) + A_par S_z I_z (GHz)."""
    i_spin = _require_nuclear(nuclear_spin)
    sz, sp_, _ = spin_matrices(0.5)
    iz, ip, im = spin_matrices(i_spin)
    flip = _hc_sum(_kron3(_ORB_ID, sp_, im))
    axial = _kron3(_ORB_ID, sz, iz)
    return MHZ_TO_GHZ * (0.5 * hf.a_perp * flip + hf.a_par * axial)


def build_dynamic_hf(hf: EffectiveHF, nuclear_spin: float) -> np.ndarray:
    """A1[(S+I_z + S_zI+) s- + h.c.] + A2[S-I- s- + S+I+ s+] (GHz)."""
    i_spin = _require_nuclear(nuclear_spin)
    sz, sp_, _ = spin_matrices(0.5)
    sm = sp_.T
    iz, ip, im = spin_matrices(i_spin)
    t1 = np.kron(_SIGMA_MINUS, np.kron(sp_, iz) + np.kron(sz, ip))
    t2 = np.kron(_SIGMA_MINUS, np.kron(sm, im))
    return MHZ_TO_GHZ * (hf.a1 * _hc_sum(t1) + hf.a2 * _hc_sum(t2))


def build_quadrupole(quad: QuadrupoleParams, nuclear_spin: float) -> np.ndarray:
    """Q[I_z^2 - I(I+1)/3] + Q1[(I+I_z + I_zI+) s- + h.c.] + Q2[I-^2 s- + I+^2 s+] (GHz)."""
    i_spin = _check_nuclear_spin(nuclear_spin)
    if i_spin < 1:
        raise ValidationError(f"quadrupole interaction needs I >= 1, got I={i_spin}")
    iz, ip, im = spin_matrices(i_spin)
    s_id = np.eye(2)
    axial = iz @ iz - i_spin * (i_spin + 1) / 3 * np.eye(len(iz))
    h = quad.q_static * _kron3(_ORB_ID, s_id, axial)
    h = h + quad.q1 * _hc_sum(_kron3(_SIGMA_MINUS, s_id, ip @ iz + iz @ ip))
    h = h + quad.q2 * _hc_sum(_kron3(_SIGMA_MINUS, s_id, im @ im))
    return MHZ_TO_GHZ * h


def quadrupole_coupling(rho: float, v_zz: float) -> float:
    """Quadrupole coupling constant in MHz from moment rho (m^2) and EFG V_zz (V/m^2).

    Evaluated as rho * e * V_zz / h, which is the dimensionally consistent
    reading when V_zz is a field gradient in V/m^2.
    """
    return rho * ELEMENTARY_CHARGE * v_zz / PLANCK_J_S / 1e6


def efg_from_quadrupole(q_mhz: float, rho: float) -> float:
    """Inverse of :func:`quadrupole_coupling`: V_zz in V/m^2."""
    if rho == 0:
        raise SingularRegimeError("zero quadrupole moment cannot be inverted")
    return q_mhz * 1e6 * PLANCK_J_S / (rho * ELEMENTARY_CHARGE)


def hamiltonian_terms(spec: SpinSystemSpec) -> dict[str, np.ndarray]:
    """Every active term of ``spec`` as a named matrix (GHz)."""
    i_spin = spec.nuclear_spin
    terms = {
        "soc": build_soc(spec.lambda_eff, i_spin),
        "zeeman": build_zeeman(spec.g_factor, spec.b_field, i_spin),
    }
    if spec.orbital_zeeman is not None:
        terms["orbital_zeeman"] = build_orbital_zeeman(spec.orbital_zeeman, spec.b_field, i_spin)
    if spec.hf is not None:
        terms["static_hf"] = build_static_hf(spec.hf, i_spin)
        terms["dynamic_hf"] = build_dynamic_hf(spec.hf, i_spin)
    if spec.quad is not None:
        terms["quadrupole"] = build_quadrupole(spec.quad, i_spin)
    return terms


def active_terms(spec: SpinSystemSpec) -> dict[str, bool]:
    """Provenance record of which interactions ``assemble`` includes."""
    return {
        "soc": True,
        "zeeman": True,
        "orbital_zeeman": spec.orbital_zeeman is not None,
        "static_hf": spec.hf is not None,
        "dynamic_hf": spec.hf is not None and (spec.hf.a1 != 0 or spec.hf.a2 != 0),
        "quadrupole": spec.quad is not None,
    }


def assemble(spec: SpinSystemSpec) -> np.ndarray:
    terms = hamiltonian_terms(spec)
    h = np.zeros((spec.dimension, spec.dimension))
    for m in terms.values():
        h = h + m
    return h


# ---------------------------------------------------------------------------
# Levels and labels
# ---------------------------------------------------------------------------

def _fmt_half(x: float) -> str:
    f = Fraction(x).limit_denominator(2)
    s = str(abs(f))
    return ("-" if f < 0 else "+") + s


def basis_labels(nuclear_spin: float) -> list[str]:
    i_spin = _check_nuclear_spin(nuclear_spin)
    ms = [i_spin - k for k in range(_nuc_dim(i_spin))]
    out = []
    for orb in ("e+", "e-"):
        for s in ("up", "down"):
            for m in ms:
                out.append(f"{orb},{s}" + (f",mI={_fmt_half(m)}" if i_spin > 0 else ""))
    return out


def _spin_from_dim(dim: int) -> float:
    if dim % 4:
        raise ValidationError(f"dimension {dim} is not 4(2I+1)")
    return (dim // 4 - 1) / 2


@dataclass
class LevelSet:
    eigenvalues: np.ndarray  # GHz ascending
    eigenvectors: np.ndarray  # columns
    groups: list[list[int]]
    labels: list[str]
    nuclear_spin: float

    @property
    def degeneracies(self) -> list[int]:
        out = [0] * len(self.eigenvalues)
        for g in self.groups:
            for i in g:
                out[i] = len(g)
        return out

    def __len__(self):
        return len(self.eigenvalues)

    def index_of(self, label: str) -> int:
        """Level whose eigenvector has the largest weight on basis state ``label``."""
        k = basis_labels(self.nuclear_spin).index(label)
        return int(np.argmax(np.abs(self.eigenvectors[k, :]) ** 2))


def levels(h: np.ndarray, tol: float = DEGENERACY_TOL_GHZ) -> LevelSet:
    """Exact diagonalisation with degeneracy grouping at ``tol`` GHz.

    Inside each degenerate group the eigenvectors are rotated to diagonalise
    the basis index, which makes them as close to product states as the group
    allows and gives reproducible labels.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError("Hamiltonian must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12 * scale:
        raise ValidationError("Hamiltonian is not Hermitian")
    i_spin = _spin_from_dim(h.shape[0])
    vals, vecs = np.linalg.eigh(h)
    vecs = vecs.astype(complex)
    groups: list[list[int]] = []
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > tol:
            groups.append(list(range(start, k)))
            start = k
    index_op = np.diag(np.arange(h.shape[0], dtype=float))
    for g in groups:
        if len(g) > 1:
            sub = vecs[:, g]
            m = sub.conj().T @ index_op @ sub
            _, u = np.linalg.eigh(0.5 * (m + m.conj().T))
            vecs[:, g] = sub @ u
    # Fix the global phase of each vector: largest component real positive.
    for k in range(vecs.shape[1]):
        j = int(np.argmax(np.abs(vecs[:, k])))
        vecs[:, k] *= np.exp(-1j * np.angle(vecs[j, k]))
    names = basis_labels(i_spin)
    labels = [names[int(np.argmax(np.abs(vecs[:, k]) ** 2))] for k in range(vecs.shape[1])]
    return LevelSet(eigenvalues=vals, eigenvectors=vecs, groups=groups, labels=labels,
                    nuclear_spin=i_spin)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def hf_splitting_perturbative(a_par: float, a1: float, g: float, b: MagneticField) -> float:
    """Lowest-branch hyperfine splitting A_par + A1^2 / (g mu_B B + A_par), MHz."""
    zeeman_mhz = g * BOHR_MAGNETON_GHZ_PER_T * b.tesla * 1e3
    den = zeeman_mhz + a_par
    if abs(den) < 1e-12 * max(1.0, abs(a_par), abs(zeeman_mhz)):
        raise SingularRegimeError("g mu_B B + A_par vanishes; perturbative formula is singular")
    return a_par + a1 * a1 / den


def lowest_branch_hf_splitting(spec: SpinSystemSpec) -> float:
    """Exact hyperfine splitting (MHz) of the |e-, down> lowest-branch manifold.

    Defined as 2 [E(e-, down, m = I-1) - E(e-, down, m = I)], which reduces to
    A_par in the secular limit.  Levels are identified by their dominant basis
    component.
    """
    i_spin = spec.nuclear_spin
    if i_spin == 0:
        raise ValidationError("hyperfine splitting needs I > 0")
    lv = levels(assemble(spec))
    top = f"e-,down,mI={_fmt_half(i_spin)}"
    nxt = f"e-,down,mI={_fmt_half(i_spin - 1)}"
    e_top = lv.eigenvalues[lv.index_of(top)]
    e_nxt = lv.eigenvalues[lv.index_of(nxt)]
    return 2.0 * (e_nxt - e_top) * 1e3


def a_ple(a_g: float, a_u: float) -> float:
    """Optical hyperfine line spacing (A_u - A_g)/2 in MHz."""
    return 0.5 * (a_u - a_g)


def zpl_broadening_proxy(lambda_g: float, lambda_u: float) -> Energy:
    """Width of the four-line ZPL fine structure, lambda_g + lambda_u (GHz in, Energy out)."""
    return Energy(lambda_g + lambda_u, "GHz")


@dataclass(frozen=True)
class Line:
    energy: float  # GHz
    weight: float
    degeneracy: int
    initial: str  # excited-state labels
    final: str  # ground-state labels


def _orbital_resolved(vecs: np.ndarray, nuc_dim: int) -> np.ndarray:
    """Reshape eigenvector columns into (orbital, spin*nuclear, level)."""
    return vecs.reshape(2, 2 * nuc_dim, vecs.shape[1])


def ple_lines(ground: LevelSet, excited: LevelSet, zpl_offset: float = 0.0,
              min_weight: float = 1e-2) -> list[Line]:
    """Optical lines excited -> ground, conserving electron and nuclear spin.

    The optical operator acts only on the orbital factor, so the weight of a
    transition between two states is the summed squared overlap of their
    spin-nuclear components over all orbital pairs.  Lines are reported per
    pair of degenerate groups, sorted by energy.
    """
    if ground.nuclear_spin != excited.nuclear_spin:
        raise ValidationError("ground and excited level sets have different nuclear spin")
    nd = _nuc_dim(ground.nuclear_spin)
    g = _orbital_resolved(ground.eigenvectors, nd)
    u = _orbital_resolved(excited.eigenvectors, nd)
    # overlap[o_u, o_g, i_u, i_g] = <u_i, o_u | g_j, o_g> on spin-nuclear space
    ov = np.einsum("asi,bsj->abij", u.conj(), g)
    w = np.sum(np.abs(ov) ** 2, axis=(0, 1))
    lines = []
    for gu in excited.groups:
        for gg in ground.groups:
            block = w[np.ix_(gu, gg)]
            total = float(block.sum())
            if total < min_weight:
                continue
            e = zpl_offset + float(np.mean(excited.eigenvalues[gu]) - np.mean(ground.eigenvalues[gg]))
            lines.append(Line(
                energy=e,
                weight=total,
                degeneracy=int(np.count_nonzero(block > min_weight)),
                initial=";".join(excited.labels[i] for i in gu),
                final=";".join(ground.labels[j] for j in gg),
            ))
    lines.sort(key=lambda ln: (ln.energy, ln.initial, ln.final))
    return lines
