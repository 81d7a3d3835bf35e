"""Physical constants and unit conversions.

Vibronic quantities are carried in meV and spin-Hamiltonian quantities in
GHz.  Every conversion between the two goes through :func:`convert_energy`
so the factors below are the single source of truth.
"""
from __future__ import annotations

from dataclasses import dataclass

# CODATA 2018 exact / recommended values.
PLANCK_EV_S = 4.135667696e-15          # eV s
PLANCK_J_S = 6.62607015e-34            # J s
ELEMENTARY_CHARGE = 1.602176634e-19    # C
SPEED_OF_LIGHT = 299792458.0           # m / s
BOHR_MAGNETON_GHZ_PER_T = 13.996245    # mu_B / h in GHz / T

GAUSS_PER_TESLA = 1.0e4

# meV -> GHz follows from E = h f:  1e-3 eV / h / 1e9.
MEV_TO_GHZ = 1.0e-3 / PLANCK_EV_S / 1.0e9
# cm^-1 -> GHz is c * 100 / 1e9.
CM1_TO_GHZ = SPEED_OF_LIGHT * 100.0 / 1.0e9

# Factor that takes one unit of each energy to GHz.
_TO_GHZ = {
    "GHz": 1.0,
    "MHz": 1.0e-3,
    "meV": MEV_TO_GHZ,
    "cm-1": CM1_TO_GHZ,
}
_ENERGY_ALIASES = {
    "ghz": "GHz",
    "mhz": "MHz",
    "mev": "meV",
    "cm-1": "cm-1",
    "cm^-1": "cm-1",
    "cm⁻¹": "cm-1",
    "1/cm": "cm-1",
}

_FIELD_ALIASES = {"t": "T", "tesla": "T", "g": "G", "gauss": "G"}


def canonical_energy_unit(unit: str) -> str:
    """Map a user spelling of an energy unit onto its canonical name."""
    key = str(unit).strip().lower()
    if key not in _ENERGY_ALIASES:
        raise ValueError(f"unsupported energy unit {unit!r}; expected one of {sorted(_TO_GHZ)}")
    return _ENERGY_ALIASES[key]


def canonical_field_unit(unit: str) -> str:
    key = str(unit).strip().lower()
    if key not in _FIELD_ALIASES:
        raise ValueError(f"unsupported field unit {unit!r}; expected tesla or gauss")
    return _FIELD_ALIASES[key]


@dataclass(frozen=True)
class Energy:
    value: float
    unit: str = "GHz"

    def __post_init__(self):
        object.__setattr__(self, "unit", canonical_energy_unit(self.unit))
        object.__setattr__(self, "value", float(self.value))

    def to(self, unit: str) -> "Energy":
        return convert_energy(self, unit)

    @property
    def ghz(self) -> float:
        return self.to("GHz").value

    @property
    def mev(self) -> float:
        return self.to("meV").value

    @property
    def mhz(self) -> float:
        return self.to("MHz").value


@dataclass(frozen=True)
class MagneticField:
    value: float
    unit: str = "T"

    def __post_init__(self):
        object.__setattr__(self, "unit", canonical_field_unit(self.unit))
        object.__setattr__(self, "value", float(self.value))

    @property
    def tesla(self) -> float:
        if self.unit == "T":
            return self.value
        return self.value / GAUSS_PER_TESLA

    @property
    def gauss(self) -> float:
        if self.unit == "G":
            return self.value
        return self.value * GAUSS_PER_TESLA


def convert_energy(e: Energy, target_unit: str) -> Energy:
    """Rescale ``e`` into ``target_unit``.  Same-unit conversion returns ``e`` untouched."""
    target = canonical_energy_unit(target_unit)
    if target == e.unit:
        return e
    return Energy(e.value * (_TO_GHZ[e.unit] / _TO_GHZ[target]), target)


def energy_factor(source: str, target: str) -> float:
    """Multiplicative factor taking values in ``source`` units to ``target`` units."""
    return _TO_GHZ[canonical_energy_unit(source)] / _TO_GHZ[canonical_energy_unit(target)]


def zeeman_splitting(g: float, b: MagneticField) -> Energy:
    """Electron Zeeman gap g * mu_B * B, returned in GHz."""
    if b.value < 0:
        raise ValueError("magnetic field magnitude must be non-negative")
    return Energy(g * BOHR_MAGNETON_GHZ_PER_T * b.tesla, "GHz")
