"""Orbital-resolved hyperfine tensors from C3-related raw tensors.

Given a tensor A0 computed with the hole in |e_x>, and the tensors of the two
C3-related sites rotated back onto the reference site (A+ = C3 B, A- = C3^-1 C),
the orbital decomposition reads

    a_mean = (A0 + A+ + A-) / 3
    a_x    = q * kappa * (2 A0 - A+ - A-)
    a_y    = q / sqrt(3) * (A+ - A-)

``kappa`` is 1/4 in the ``"printed"`` normalisation (the one that reproduces
the reference carbon values) and 1/3 in the ``"consistent"`` normalisation,
for which A0 = a_mean + a_x/q exactly.

Frames
------
Tensors start in the cubic crystal frame.  A :class:`FrameConvention` fixes
the defect axis Z (a <111> direction), the azimuthal X axis, the handedness
of Y, and the sense of the C3 rotation used to carry partner sites back onto
the reference site.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import FrameError, SchemaError, SymmetryError, ValidationError
from .spin_hamiltonian import EffectiveHF

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-6  # MHz
NORMALIZATIONS = {"printed": 0.25, "consistent": 1.0 / 3.0}

CUBIC = "cubic_crystal"
DEFECT = "defect_axial"


@dataclass(frozen=True)
class HyperfineTensor3:
    matrix: np.ndarray
    frame: str = CUBIC
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValidationError(f"hyperfine tensor must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("hyperfine tensor has non-finite entries")
        asym = np.max(np.abs(m - m.T))
        if asym > SYMMETRY_TOL:
            raise SymmetryError(
                f"tensor {self.label!r} has antisymmetric part {asym:.3g} MHz; hyperfine tensors are real symmetric"
            )
        if self.frame not in (CUBIC, DEFECT):
            raise FrameError(f"unknown frame {self.frame!r}")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_components(cls, xx, yy, zz, xy, xz, yz, frame=CUBIC, label=""):
        return cls(np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]), frame, label)

    def components(self) -> tuple[float, float, float, float, float, float]:
        m = self.matrix
        return (m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2])

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def _with(self, matrix, frame=None, label=None):
        return HyperfineTensor3(matrix, self.frame if frame is None else frame,
                                self.label if label is None else label)

    def __add__(self, other):
        _same_frame(self, other)
        return self._with(self.matrix + other.matrix)

    def __sub__(self, other):
        _same_frame(self, other)
        return self._with(self.matrix - other.matrix)

    def __mul__(self, k):
        return self._with(float(k) * self.matrix)

    __rmul__ = __mul__


def _same_frame(*ts: HyperfineTensor3):
    frames = {t.frame for t in ts}
    if len(frames) > 1:
        raise FrameError(f"tensors are in different frames: {sorted(frames)}")


@dataclass(frozen=True)
class FrameConvention:
    """Defect frame: Z axis, azimuthal X axis, handedness and C3 sense.

    ``handedness=+1`` takes Y = Z x X (right-handed), ``-1`` takes Y = X x Z.
    ``rotation_sense=+1`` means the partner rotation C3 is +120 deg about Z.
    """

    axis: tuple = (1.0, 1.0, 1.0)
    x_axis: tuple = (1.0, -2.0, 1.0)
    handedness: int = 1
    rotation_sense: int = 1

    def __post_init__(self):
        z = np.asarray(self.axis, dtype=float)
        if z.shape != (3,) or np.linalg.norm(z) == 0:
            raise FrameError("defect axis must be a non-zero 3-vector")
        zn = z / np.linalg.norm(z)
        if not np.allclose(np.abs(zn), 1 / np.sqrt(3), atol=1e-12):
            raise FrameError(f"defect axis {self.axis} is not a <111> direction")
        x = np.asarray(self.x_axis, dtype=float)
        if abs(np.dot(x, zn)) > 1e-9 * max(1.0, np.linalg.norm(x)):
            raise FrameError("x_axis must be perpendicular to the defect axis")
        if self.handedness not in (1, -1) or self.rotation_sense not in (1, -1):
            raise FrameError("handedness and rotation_sense must be +1 or -1")

    @property
    def z(self) -> np.ndarray:
        z = np.asarray(self.axis, dtype=float)
        return z / np.linalg.norm(z)

    @property
    def frame_matrix(self) -> np.ndarray:
        """Rows are the X, Y, Z unit vectors in cubic coordinates."""
        z = self.z
        x = np.asarray(self.x_axis, dtype=float)
        x = x / np.linalg.norm(x)
        y = self.handedness * np.cross(z, x)
        return np.array([x, y, z])

    def c3(self) -> np.ndarray:
        return rotation_matrix(self.z, self.rotation_sense * 120.0)

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConvention":
        return cls(axis=tuple(d.get("axis", (1, 1, 1))), x_axis=tuple(d.get("x_axis", (1, -2, 1))),
                   handedness=int(d.get("handedness", 1)),
                   rotation_sense=int(d.get("rotation_sense", 1)))


def rotation_matrix(axis, angle_deg: float) -> np.ndarray:
    """Rodrigues rotation about ``axis``; entries within 1e-12 of an integer are snapped."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    th = np.radians(angle_deg)
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    r = np.eye(3) + np.sin(th) * k + (1 - np.cos(th)) * (k @ k)
    snapped = np.round(r)
    return np.where(np.abs(r - snapped) < 1e-12, snapped, r)


def _require_cubic(*ts: HyperfineTensor3):
    for t in ts:
        if t.frame != CUBIC:
            raise FrameError(f"tensor {t.label!r} must be in the cubic crystal frame")


def rotate_tensor(t: HyperfineTensor3, angle: float, conv: FrameConvention | None = None) -> HyperfineTensor3:
    """R T R^T for a +-120 deg rotation about the convention's defect axis."""
    if angle not in (120, -120, 120.0, -120.0):
        raise ValidationError("only +-120 deg rotations about the defect axis are supported")
    conv = conv or FrameConvention()
    _require_cubic(t)
    r = rotation_matrix(conv.z, angle)
    return t._with(r @ t.matrix @ r.T)


def mirror_tensor(t: HyperfineTensor3, normal) -> HyperfineTensor3:
    """Image of ``t`` under the mirror plane with the given normal."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    m = np.eye(3) - 2 * np.outer(n, n)
    return t._with(m @ t.matrix @ m.T)


def generate_equivalents_onaxis(t: HyperfineTensor3, conv: FrameConvention | None = None):
    """(T, C3 T, C3^-1 T) for a site on the rotation axis."""
    conv = conv or FrameConvention()
    _require_cubic(t)
    r = conv.c3()
    return (t, t._with(r @ t.matrix @ r.T), t._with(r.T @ t.matrix @ r))


@dataclass(frozen=True)
class OrbitalHFSet:
    a_mean: HyperfineTensor3
    a_x: HyperfineTensor3
    a_y: HyperfineTensor3
    q_applied: float
    normalization: str = "printed"

    def to_frame(self, conv: FrameConvention) -> "OrbitalHFSet":
        return OrbitalHFSet(to_defect_frame(self.a_mean, conv), to_defect_frame(self.a_x, conv),
                            to_defect_frame(self.a_y, conv), self.q_applied, self.normalization)

    def as_dict(self) -> dict:
        return {
            "q_applied": self.q_applied,
            "normalization": self.normalization,
            "frame": self.a_mean.frame,
            "A": self.a_mean.matrix.tolist(),
            "A_x": self.a_x.matrix.tolist(),
            "A_y": self.a_y.matrix.tolist(),
        }


def decompose(a0: HyperfineTensor3, a_plus: HyperfineTensor3, a_minus: HyperfineTensor3,
              q: float, normalization: str = "printed") -> OrbitalHFSet:
    """Orbital decomposition of a reference tensor and its two rotated partners."""
    if not 0 < q <= 1:
        raise ValidationError(f"reduction factor q must lie in (0, 1], got {q}")
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"normalization must be one of {sorted(NORMALIZATIONS)}")
    _same_frame(a0, a_plus, a_minus)
    kappa = NORMALIZATIONS[normalization]
    a, b, c = a0.matrix, a_plus.matrix, a_minus.matrix
    frame = a0.frame
    return OrbitalHFSet(
        a_mean=HyperfineTensor3((a + b + c) / 3.0, frame, "A"),
        a_x=HyperfineTensor3(q * kappa * (2 * a - b - c), frame, "A_x"),
        a_y=HyperfineTensor3(q / np.sqrt(3.0) * (b - c), frame, "A_y"),
        q_applied=q,
        normalization=normalization,
    )


def decompose_offaxis(c1: HyperfineTensor3, c2: HyperfineTensor3, c3: HyperfineTensor3, q: float,
                      conv: FrameConvention | None = None, normalization: str = "printed") -> OrbitalHFSet:
    """Rotate the C2 site by C3 and the C3 site by C3^-1 onto C1, then decompose."""
    conv = conv or FrameConvention()
    _require_cubic(c1, c2, c3)
    r = conv.c3()
    return decompose(c1, c2._with(r @ c2.matrix @ r.T), c3._with(r.T @ c3.matrix @ r), q,
                     normalization)


def recombine(hf_set: OrbitalHFSet) -> tuple[HyperfineTensor3, HyperfineTensor3, HyperfineTensor3]:
    """Inverse of :func:`decompose`: (A0, A+, A-) from (a_mean, a_x, a_y)."""
    q = hf_set.q_applied
    kappa = NORMALIZATIONS[hf_set.normalization]
    # 2A - B - C = a_x / (q kappa) and B - C = sqrt(3) a_y / q
    d = hf_set.a_x.matrix / (q * kappa)
    e = np.sqrt(3.0) * hf_set.a_y.matrix / q
    m = hf_set.a_mean.matrix
    a0 = m + d / 3.0
    b = m - d / 6.0 + e / 2.0
    c = m - d / 6.0 - e / 2.0
    frame = hf_set.a_mean.frame
    return (HyperfineTensor3(a0, frame), HyperfineTensor3(b, frame), HyperfineTensor3(c, frame))


def to_defect_frame(t: HyperfineTensor3, conv: FrameConvention) -> HyperfineTensor3:
    _require_cubic(t)
    f = conv.frame_matrix
    return HyperfineTensor3(f @ t.matrix @ f.T, DEFECT, t.label)


@dataclass(frozen=True)
class AxialFit:
    hf: EffectiveHF
    residual: float  # largest component of the orbital tensors outside the axial pattern (MHz)


def extract_axial(hf_set: OrbitalHFSet, conv: FrameConvention | None = None,
                  tol: float = 0.1) -> AxialFit:
    """Four-parameter on-axis form (A_par, A_perp, A1, A2) from an orbital set.

    In the defect frame the on-axis pattern is

        a_mean = diag(A_perp, A_perp, A_par)
        a_x:  XZ = A1,  XX = -A2,  YY = +A2
        a_y:  YZ = A1,  XY = +A2

    with a_x taken in the consistent (q/3) normalisation; a printed-normalised
    set is rescaled by 4/3 before reading.  Any component outside this pattern
    counts towards the reported residual, which must stay below ``tol``.
    """
    conv = conv or FrameConvention()
    s = hf_set if hf_set.a_mean.frame == DEFECT else hf_set.to_frame(conv)
    am, ay = s.a_mean.matrix, s.a_y.matrix
    ax = s.a_x.matrix * (NORMALIZATIONS["consistent"] / NORMALIZATIONS[hf_set.normalization])
    a_par = am[2, 2]
    a_perp = 0.5 * (am[0, 0] + am[1, 1])
    a1 = 0.5 * (ax[0, 2] + ay[1, 2])
    a2 = 0.25 * (ax[1, 1] - ax[0, 0]) + 0.5 * ay[0, 1]
    model_mean = np.diag([a_perp, a_perp, a_par])
    model_x = np.array([[-a2, 0, a1], [0, a2, 0], [a1, 0, 0]])
    model_y = np.array([[0, a2, 0], [a2, 0, a1], [0, a1, 0]])
    residual = float(max(np.max(np.abs(am - model_mean)), np.max(np.abs(ax - model_x)),
                         np.max(np.abs(ay - model_y))))
    if residual > tol:
        raise SymmetryError(
            f"orbital tensors deviate from the on-axis pattern by {residual:.3g} MHz (tolerance {tol}); "
            "site is not on the symmetry axis or the frame convention is wrong"
        )
    return AxialFit(EffectiveHF(float(a_par), float(a_perp), float(a1), float(a2)), residual)


def detect_axis(tensors) -> tuple[int, int, int]:
    """Heuristic <111> axis: the direction about which the tensors are most C3-invariant.

    Only a guess; sign patterns of the off-diagonal elements can favour the
    wrong axis, so explicit axes should be preferred.
    """
    best, best_err = None, np.inf
    for axis in ((1, 1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, -1)):
        r = rotation_matrix(axis, 120.0)
        err = sum(np.max(np.abs(r @ t.matrix @ r.T - t.matrix)) for t in tensors)
        if err < best_err - 1e-12:
            best, best_err = axis, err
    return best


# ---------------------------------------------------------------------------
# Input files
# ---------------------------------------------------------------------------

def _schema():
    text = resources.files("g4v").joinpath("schemas/tensor_input.schema.json").read_text()
    return json.loads(text)


def _tensor_from_entry(entry: dict, label: str) -> HyperfineTensor3:
    rows = entry["tensor"]
    return HyperfineTensor3(np.array(rows, dtype=float), entry.get("frame", CUBIC), label)


def load_tensor_input(path) -> dict:
    """Read and schema-validate a tensor input file; returns the parsed document.

    Corrections listed under ``corrections`` are applied to the named tensor
    components and logged.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{path}: schema violation at {where}: {exc.message}") from exc
    for corr in doc.get("corrections", []):
        site = doc["sites"][corr["site"]]
        i, j = corr["index"]
        old = site["tensor"][i][j]
        site["tensor"][i][j] = corr["value"]
        if i != j:
            site["tensor"][j][i] = corr["value"]
        log.warning("tensor input %s: %s[%d][%d] %s -> %s (%s)", path.name, corr["site"], i, j, old,
                    corr["value"], corr.get("reason", ""))
    return doc


def run_decomposition(doc: dict, q: float | None = None) -> dict:
    """Evaluate every on-axis site and carbon shell of a parsed tensor input."""
    q = float(doc["q"] if q is None else q)
    conv_default = FrameConvention.from_dict(doc.get("frame", {}))
    sites = {name: _tensor_from_entry(entry, name) for name, entry in doc["sites"].items()}
    out: dict = {"defect": doc.get("defect", ""), "q": q, "dopant": None, "shells": {}}

    dop = doc.get("dopant")
    if dop:
        conv = FrameConvention.from_dict(dop.get("frame", doc.get("frame", {})))
        norm = dop.get("normalization", "printed")
        t = sites[dop["site"]]
        hf_set = decompose(*generate_equivalents_onaxis(t, conv), q=q, normalization=norm)
        fit = extract_axial(hf_set, conv, tol=dop.get("tolerance", 0.1))
        out["dopant"] = {
            "site": dop["site"],
            "isotope": dop.get("isotope", ""),
            "nuclear_spin": dop.get("nuclear_spin"),
            "a_par": fit.hf.a_par,
            "a_perp": fit.hf.a_perp,
            "a1": fit.hf.a1,
            "a2": fit.hf.a2,
            "residual": fit.residual,
        }

    for name, shell in doc.get("shells", {}).items():
        conv = FrameConvention.from_dict(shell.get("frame", doc.get("frame", {})))
        norm = shell.get("normalization", "printed")
        c1 = sites[shell["c1"]]
        c3 = sites[shell["c3"]]
        if "c2" in shell:
            c2 = sites[shell["c2"]]
        else:
            c2 = mirror_tensor(c1, shell["mirror_normal"])
        hf_set = decompose_offaxis(c1, c2, c3, q, conv, normalization=norm).to_frame(conv)
        out["shells"][name] = hf_set.as_dict()
    return out
