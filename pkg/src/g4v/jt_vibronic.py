"""Quadratic E x e Jahn-Teller problem in a truncated two-mode oscillator basis.

Conventions
-----------
Coordinates are dimensionless, Q_i = (a_i + a_i^dagger)/sqrt(2), so the
elastic energy is hbar_omega * Q^2 / 2 and the couplings ``v_linear`` and
``g_quadratic`` carry units of meV.  The electronic doublet is {|e_x>, |e_y>}
with Pauli matrices acting on it, and the working Hamiltonian is

    H = hbar_omega (n_x + n_y + 1)
        + V (Q_x sigma_z - Q_y sigma_x)
        + G [(Q_x^2 - Q_y^2) sigma_z + 2 Q_x Q_y sigma_x].

The relative sign between the linear and quadratic sigma_x terms fixes
the trigonal warping: with the opposite chirality shown here the lower sheet
has three minima at phi = 0, +-120 deg (for G > 0) and three saddles in
between.  The orbital angular momentum is L_z = sigma_y.

The basis is ordered electronic-major: index = e * n_vib + k where k walks
the vibrational states (n_x, n_y) with n_x + n_y <= N by total quantum
number, then by decreasing n_x.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import (
    CutoffOverflowError,
    DegeneracyError,
    NoSolutionError,
    NonConvergenceError,
    ValidationError,
)
from .units import MEV_TO_GHZ

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 64
ESCALATED_CUTOFF = 96
DEFAULT_MAX_NNZ = 2_000_000
# Relative (to hbar_omega) thresholds.
CONVERGENCE_TOL = 1e-6
DOUBLET_GAP_TOL = 1e-6

_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])


@dataclass(frozen=True)
class JTParams:
    """APES characterisation of one E x e problem, all in meV."""

    e_jt: float
    delta_jt: float
    hbar_omega: float

    def __post_init__(self):
        vals = (self.e_jt, self.delta_jt, self.hbar_omega)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite Jahn-Teller parameters {vals}")
        if self.e_jt <= 0:
            raise ValidationError(f"e_jt must be positive, got {self.e_jt}")
        if self.hbar_omega <= 0:
            raise ValidationError(f"hbar_omega must be positive, got {self.hbar_omega}")
        if not 0 <= self.delta_jt < self.e_jt:
            raise ValidationError(
                f"barrier must satisfy 0 <= delta_jt < e_jt, got delta_jt={self.delta_jt}, e_jt={self.e_jt}"
            )


@dataclass(frozen=True)
class JTCouplings:
    v_linear: float
    g_quadratic: float


@dataclass(frozen=True)
class HamFactors:
    p: float
    q: float


@dataclass
class VibronicSolution:
    eigenvalues: np.ndarray
    ground_doublet: np.ndarray  # shape (2, dim), L_z eigenbasis, positive <L_z> first
    cutoff: int
    converged: bool
    hbar_omega: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    doublet_shift: float = float("nan")  # ground energy change between N-4 and N
    p_shift: float = float("nan")  # |p(N) - p(N-4)|
    lz_projection: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), complex))

    @property
    def dimension(self) -> int:
        return self.ground_doublet.shape[1]

    @property
    def doublet_gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])


# ---------------------------------------------------------------------------
# APES and coupling constants
# ---------------------------------------------------------------------------

def apes_stationary_points(c: JTCouplings, hbar_omega: float) -> tuple[float, float]:
    """Closed-form (depth, barrier) of the lower sheet for G >= 0.

    Along a minimum direction the lower sheet is (K/2 - G) rho^2 - V rho and
    along a saddle direction (K/2 + G) rho^2 - V rho, with K = hbar_omega.
    """
    k, v, g = hbar_omega, c.v_linear, abs(c.g_quadratic)
    if g >= k / 2:
        raise NoSolutionError("quadratic coupling G >= hbar_omega/2 leaves the APES unbounded")
    depth = v * v / (2 * (k - 2 * g))
    saddle = v * v / (2 * (k + 2 * g))
    return depth, depth - saddle


def fit_couplings(params: JTParams) -> JTCouplings:
    """Invert (E_JT, delta_JT, hbar_omega) into (V, G).

    ``V`` is eliminated through the depth condition V^2 = 2 E_JT (K - 2G); the
    remaining one-dimensional barrier condition is solved for G by bracketed
    root finding on [0, K/2).
    """
    k = params.hbar_omega
    if params.delta_jt == 0:
        return JTCouplings(v_linear=float(np.sqrt(2 * params.e_jt * k)), g_quadratic=0.0)

    def v_of(g):
        return np.sqrt(2 * params.e_jt * (k - 2 * g))

    def barrier_mismatch(g):
        _, barrier = apes_stationary_points(JTCouplings(v_of(g), g), k)
        return barrier - params.delta_jt

    g_hi = 0.5 * k * (1 - 1e-14)
    max_barrier = barrier_mismatch(g_hi) + params.delta_jt
    if max_barrier <= params.delta_jt:
        raise NoSolutionError(
            f"barrier {params.delta_jt} meV unreachable; maximum attainable is {max_barrier:.6g} meV",
            max_barrier=max_barrier,
        )
    g = brentq(barrier_mismatch, 0.0, g_hi, xtol=1e-15 * k, rtol=4 * np.finfo(float).eps, maxiter=500)
    return JTCouplings(v_linear=float(v_of(g)), g_quadratic=float(g))


def apes_energies(qx, qy, c: JTCouplings, hbar_omega: float):
    """Both adiabatic sheets at (qx, qy), measured from the degenerate point.

    Works elementwise on arrays.  Returns ``(lower, upper)``.
    """
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    elastic = 0.5 * hbar_omega * (qx**2 + qy**2)
    wz = c.v_linear * qx + c.g_quadratic * (qx**2 - qy**2)
    wx = -c.v_linear * qy + 2 * c.g_quadratic * qx * qy
    r = np.hypot(wz, wx)
    return elastic - r, elastic + r


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def vibrational_states(cutoff: int) -> list[tuple[int, int]]:
    return [(nx, n - nx) for n in range(cutoff + 1) for nx in range(n, -1, -1)]


def _single_mode(cutoff: int):
    """Exact single-mode Q, Q^2 and number operators on levels 0..cutoff."""
    n = np.arange(cutoff + 1, dtype=float)
    off1 = np.sqrt(n[1:] / 2.0)
    q = sp.diags([off1, off1], [-1, 1], format="csr")
    off2 = np.sqrt(n[1:-1] * n[2:]) / 2.0
    q2 = sp.diags([off2, n + 0.5, off2], [-2, 0, 2], format="csr")
    return q, q2


def estimate_nnz(cutoff: int) -> int:
    n_vib = (cutoff + 1) * (cutoff + 2) // 2
    # diagonal + linear (4 neighbours, 2 electronic blocks) + quadratic (~8)
    return 2 * n_vib * 15


def build_hamiltonian(c: JTCouplings, hbar_omega: float, cutoff: int,
                      max_nnz: int = DEFAULT_MAX_NNZ) -> sp.csr_matrix:
    """Sparse real-symmetric vibronic Hamiltonian (meV)."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValidationError(f"cutoff must be an integer >= 1, got {cutoff}")
    cutoff = int(cutoff)
    if estimate_nnz(cutoff) > max_nnz:
        raise CutoffOverflowError(
            f"cutoff {cutoff} needs about {estimate_nnz(cutoff)} nonzeros, above the limit {max_nnz}"
        )
    q, q2 = _single_mode(cutoff)
    eye = sp.identity(cutoff + 1, format="csr")
    qx, qy = sp.kron(q, eye), sp.kron(eye, q)
    qx2, qy2 = sp.kron(q2, eye), sp.kron(eye, q2)
    qxqy = sp.kron(q, q)

    states = vibrational_states(cutoff)
    keep = np.array([nx * (cutoff + 1) + ny for nx, ny in states])

    def restrict(m):
        return m.tocsr()[keep][:, keep]

    qx, qy, qx2, qy2, qxqy = map(restrict, (qx, qy, qx2, qy2, qxqy))
    nsum = np.array([nx + ny + 1 for nx, ny in states], dtype=float)

    h = sp.kron(np.eye(2), sp.diags(hbar_omega * nsum))
    if c.v_linear != 0:
        h = h + c.v_linear * (sp.kron(_SZ, qx) - sp.kron(_SX, qy))
    if c.g_quadratic != 0:
        h = h + c.g_quadratic * (sp.kron(_SZ, qx2 - qy2) + sp.kron(_SX, 2 * qxqy))
    h = h.tocsr()
    h.eliminate_zeros()
    h.sort_indices()
    return h


def lz_operator(cutoff: int) -> sp.csr_matrix:
    n_vib = (cutoff + 1) * (cutoff + 2) // 2
    return sp.kron(_SY, sp.identity(n_vib), format="csr")


def sigma_z_operator(cutoff: int) -> sp.csr_matrix:
    n_vib = (cutoff + 1) * (cutoff + 2) // 2
    return sp.kron(_SZ, sp.identity(n_vib), format="csr")


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------

def _lowest_eigenpairs(h: sp.csr_matrix, k: int, shift: float, method: str):
    dim = h.shape[0]
    if method == "auto":
        method = "dense" if dim <= 400 else "sparse"
    if method == "dense" or k >= dim - 1:
        vals, vecs = scipy.linalg.eigh(h.toarray(), subset_by_index=[0, min(k, dim) - 1])
        return vals, vecs
    if method != "sparse":
        raise ValidationError(f"unknown eigensolver method {method!r}")
    # Deterministic start vector keeps output byte-stable across runs.
    v0 = np.linspace(1.0, 2.0, dim)
    # Ask for a few extra pairs: a cut falling inside a degenerate multiplet
    # otherwise lets ARPACK return an arbitrary member of the next level.
    k_req = min(k + 4, dim - 2)
    try:
        vals, vecs = spla.eigsh(h, k=k_req, sigma=shift, which="LM", v0=v0, tol=0.0)
    except spla.ArpackNoConvergence as exc:
        raise NonConvergenceError(f"ARPACK failed to converge: {exc}") from exc
    order = np.argsort(vals)[:k]
    return vals[order], vecs[:, order]


def _doublet_projection(vecs: np.ndarray, op: sp.spmatrix) -> np.ndarray:
    pair = vecs[:, :2]
    return pair.conj().T @ (op @ pair)


def _p_from_projection(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def _solve_at(c: JTCouplings, hbar_omega: float, cutoff: int, n_eigen: int, method: str,
              max_nnz: int):
    h = build_hamiltonian(c, hbar_omega, cutoff, max_nnz=max_nnz)
    depth, _ = apes_stationary_points(c, hbar_omega)
    # The truncated Hamiltonian is bounded below by the APES minimum, so a
    # shift under -depth makes shift-invert return the lowest states.
    shift = -depth - 0.25 * hbar_omega
    vals, vecs = _lowest_eigenpairs(h, n_eigen, shift, method)
    residuals = np.linalg.norm(h @ vecs - vecs * vals, axis=0)
    return h, vals, vecs, residuals


def solve(c: JTCouplings, hbar_omega: float, cutoff: int = DEFAULT_CUTOFF, n_eigen: int = 4,
          escalate_to: int | None = ESCALATED_CUTOFF, method: str = "auto",
          max_nnz: int = DEFAULT_MAX_NNZ) -> VibronicSolution:
    """Lowest ``n_eigen`` vibronic levels and the ground doublet.

    Convergence is judged by re-solving at ``cutoff - 4``; if the ground
    energy moves by more than 1e-6 hbar_omega the cutoff is raised once to
    ``escalate_to``.
    """
    if n_eigen < 2:
        raise ValidationError("n_eigen must be at least 2")
    if hbar_omega <= 0:
        raise ValidationError("hbar_omega must be positive")
    cutoff = int(cutoff)
    if cutoff < 5:
        # Too small for the N-4 comparison: solve once, report unconverged.
        cutoffs = [cutoff]
    else:
        cutoffs = [cutoff - 4, cutoff]

    results = [_solve_at(c, hbar_omega, n, n_eigen, method, max_nnz) for n in cutoffs]
    sol = _assemble_solution(results, cutoffs, hbar_omega)
    if not sol.converged and escalate_to is not None and escalate_to > cutoff:
        log.info("vibronic solve unconverged at N=%d (shift %.3g meV); escalating to N=%d",
                 cutoff, sol.doublet_shift, escalate_to)
        return solve(c, hbar_omega, escalate_to, n_eigen, escalate_to=None, method=method,
                     max_nnz=max_nnz)
    return sol


def _assemble_solution(results, cutoffs, hbar_omega) -> VibronicSolution:
    h, vals, vecs, residuals = results[-1]
    cutoff = cutoffs[-1]
    lz = lz_operator(cutoff)
    m = _doublet_projection(vecs, lz)
    m = 0.5 * (m + m.conj().T)
    w, u = np.linalg.eigh(m)
    order = np.argsort(-w)  # positive <L_z> first
    w, u = w[order], u[:, order]
    doublet = (vecs[:, :2] @ u).T

    if len(results) == 2:
        _, vals_lo, vecs_lo, _ = results[0]
        shift = float(abs(vals[0] - vals_lo[0]))
        p_lo = _p_from_projection(_doublet_projection(vecs_lo, lz_operator(cutoffs[0])))
        p_shift = abs(_p_from_projection(m) - p_lo)
        converged = shift < CONVERGENCE_TOL * hbar_omega
    else:
        shift, p_shift, converged = float("nan"), float("nan"), False
    return VibronicSolution(
        eigenvalues=np.asarray(vals),
        ground_doublet=doublet,
        cutoff=cutoff,
        converged=bool(converged),
        hbar_omega=hbar_omega,
        residuals=np.asarray(residuals),
        doublet_shift=shift,
        p_shift=float(p_shift),
        lz_projection=np.diag(w),
    )


# ---------------------------------------------------------------------------
# Reduction factors
# ---------------------------------------------------------------------------

def _check_doublet(sol: VibronicSolution):
    if not sol.converged:
        raise NonConvergenceError(
            f"vibronic solution at N={sol.cutoff} is not converged (shift {sol.doublet_shift:.3g} meV)",
            residuals=sol.residuals,
        )
    if sol.doublet_gap > DOUBLET_GAP_TOL * sol.hbar_omega:
        raise DegeneracyError(
            f"lowest two vibronic levels split by {sol.doublet_gap:.3g} meV; no E doublet identified"
        )


def ham_factor_p(sol: VibronicSolution) -> float:
    """Magnitude of L_z projected on the ground vibronic doublet."""
    _check_doublet(sol)
    return float(np.max(np.abs(np.diag(sol.lz_projection).real)))


def ham_factor_q(p: float) -> float:
    if not 0 < p <= 1:
        raise ValidationError(f"Ham factor p must lie in (0, 1], got {p}")
    return (1 + p) / 2


def reduction_factor_q_direct(sol: VibronicSolution) -> float:
    """Research-only: q read off sigma_z projected on the ground doublet.

    The identity q = (1 + p)/2 holds for the linear problem; this evaluates
    the matrix element directly so the two can be compared.
    """
    _check_doublet(sol)
    sz = sigma_z_operator(sol.cutoff)
    pair = sol.ground_doublet.T
    m = pair.conj().T @ (sz @ pair)
    m = 0.5 * (m + m.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def effective_lambda(p: float, lambda0_mev: float) -> float:
    """Ham-reduced spin-orbit splitting p * lambda0, returned in GHz."""
    if not 0 < p <= 1:
        raise ValidationError(f"Ham factor p must lie in (0, 1], got {p}")
    if not np.isfinite(lambda0_mev):
        raise ValidationError("lambda0 must be finite")
    return p * lambda0_mev * MEV_TO_GHZ


def compute_ham_factors(params: JTParams, cutoff: int = DEFAULT_CUTOFF, n_eigen: int = 4,
                        **kwargs) -> tuple[HamFactors, VibronicSolution, JTCouplings]:
    """Fit couplings, solve, and return (HamFactors, solution, couplings)."""
    c = fit_couplings(params)
    sol = solve(c, params.hbar_omega, cutoff=cutoff, n_eigen=n_eigen, **kwargs)
    p = ham_factor_p(sol)
    return HamFactors(p=p, q=ham_factor_q(p)), sol, c
