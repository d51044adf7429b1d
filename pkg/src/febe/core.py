"""Electron kinematics, two-level-system parameters and the coupling g.

Everything here is SI. Energies handed in by users are in eV and converted
once, in :func:`kinematics_from_energy`.
"""

import cmath
import math
from dataclasses import dataclass, field

from .constants import (
    ELECTRON_MASS,
    ELECTRON_REST_ENERGY_EV,
    ELEMENTARY_CHARGE,
    HBAR,
    SPEED_OF_LIGHT,
    VACUUM_PERMITTIVITY,
    wavelength_to_omega,
)
from .errors import DomainError
from .special import modified_bessel_k


@dataclass(frozen=True)
class ElectronKinematics:
    """Central-momentum kinematics of a free electron.

    ``zeta`` is the curvature of the dispersion relation expressed as a phase
    per unit drift: a momentum offset q accumulates ``zeta * q**2 * L`` extra
    phase over a drift length L.
    """

    kinetic_energy: float  # eV
    beta: float
    gamma: float
    v0: float  # m/s
    zeta: float  # m

    def shift(self, omega):
        """Momentum offset (1/m) matching an energy quantum hbar*omega."""
        return omega / self.v0


def kinematics_from_energy(kinetic_energy_ev):
    """Build :class:`ElectronKinematics` from a kinetic energy in eV."""
    e_kin = float(kinetic_energy_ev)
    if not e_kin > 0.0 or not math.isfinite(e_kin):
        raise DomainError(f"kinetic energy must be positive, got {kinetic_energy_ev!r}")
    t = e_kin / ELECTRON_REST_ENERGY_EV
    gamma = 1.0 + t
    # sqrt(1 - 1/gamma^2) without cancellation at small t
    beta = math.sqrt(t * (t + 2.0)) / gamma
    v0 = beta * SPEED_OF_LIGHT
    zeta = HBAR / (2.0 * gamma**3 * ELECTRON_MASS * v0)
    return ElectronKinematics(e_kin, beta, gamma, v0, zeta)


@dataclass(frozen=True)
class TwoLevelSystem:
    """Transition frequency, lifetime and transition dipole of an emitter.

    ``dipole_orientation`` is a unit vector ``(perp, transverse, z)``: ``perp``
    points from the electron trajectory to the emitter, ``z`` along the
    trajectory. The remaining transverse axis does not couple.
    """

    omega_a: float  # rad/s
    tau: float  # s
    dipole_length: float  # m
    dipole_orientation: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.omega_a > 0.0:
            raise DomainError("transition frequency must be positive")
        if not self.tau > 0.0:
            raise DomainError("lifetime must be positive")
        if not self.dipole_length >= 0.0:
            raise DomainError("dipole length must be non-negative")
        o = tuple(float(c) for c in self.dipole_orientation)
        if len(o) != 3:
            raise DomainError("dipole orientation needs three components")
        if abs(math.sqrt(sum(c * c for c in o)) - 1.0) > 1e-9:
            raise DomainError(f"dipole orientation must have unit norm, got {o}")
        object.__setattr__(self, "dipole_orientation", o)

    @classmethod
    def from_wavelength(cls, wavelength, tau, dipole_length, dipole_orientation=(1.0, 0.0, 0.0)):
        return cls(wavelength_to_omega(wavelength), tau, dipole_length, dipole_orientation)

    @property
    def wavelength(self):
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.omega_a


PERPENDICULAR = (1.0, 0.0, 0.0)
PARALLEL = (0.0, 0.0, 1.0)


def snv_center(orientation=PERPENDICULAR):
    """Tin-vacancy centre in diamond: 620 nm, 4.5 ns lifetime, 0.27 nm dipole."""
    return TwoLevelSystem.from_wavelength(620e-9, 4.5e-9, 0.27e-9, orientation)


@dataclass(frozen=True)
class CouplingGeometry:
    r_perp: float  # m, trajectory-to-emitter distance
    z_a: float = field(default=0.0)  # m, longitudinal emitter position

    def __post_init__(self):
        if not self.r_perp > 0.0:
            raise DomainError(f"r_perp must be positive, got {self.r_perp}")


def coupling_g(kin, tls, geom, relativistic=True):
    """Dimensionless complex electron-emitter coupling g.

    g = e^2 w / (2 pi eps0 gamma hbar v0^2) exp(i w z_a / v0)
        [-K1(xi) e_perp + (i/gamma) K0(xi) e_z] . l21,   xi = w r / (gamma v0)

    With ``relativistic=False`` every gamma in the expression is set to 1.
    """
    if not isinstance(geom, CouplingGeometry):
        raise DomainError("geom must be a CouplingGeometry")
    gam = kin.gamma if relativistic else 1.0
    w = tls.omega_a
    v0 = kin.v0
    xi = w * geom.r_perp / (gam * v0)
    prefactor = ELEMENTARY_CHARGE**2 * w / (2.0 * math.pi * VACUUM_PERMITTIVITY * gam * HBAR * v0**2)
    l_perp, _, l_z = tls.dipole_orientation
    field_dot_l = -modified_bessel_k(1, xi) * l_perp + 1j * modified_bessel_k(0, xi) * l_z / gam
    return complex(prefactor * tls.dipole_length * cmath.exp(1j * w * geom.z_a / v0) * field_dot_l)
