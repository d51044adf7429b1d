"""Driving a two-level emitter with a periodic train of electrons.

Each electron kicks the emitter density vector u = [rho11, rho22, rho12,
rho21] by -i M u; between electrons the emitter decays with lifetime tau.
In the dilute-beam continuum limit this becomes du/dt = -i H_eff u with
H_eff = M / T - i Gamma.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, null_space
from scipy.optimize import brentq

from .constants import ELECTRON_MASS, ELEMENTARY_CHARGE, EV, SPEED_OF_LIGHT
from .errors import DomainError, RegimeWarning, StepSizeError
from .scattering import DensityMatrix2, perturbation_matrix
from .wavepacket import _write_csv


@dataclass(frozen=True)
class BeamParams:
    T: float  # s, time between electrons
    tau: float  # s, emitter lifetime

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise DomainError(f"electron period T must be positive, got {self.T}")
        if not self.tau > 0.0:
            raise DomainError(f"lifetime must be positive, got {self.tau}")

    @classmethod
    def from_current(cls, current, tau):
        if not current > 0.0:
            raise DomainError(f"current must be positive, got {current}")
        return cls(ELEMENTARY_CHARGE / current, tau)

    @property
    def average_current(self):
        return ELEMENTARY_CHARGE / self.T


def decay_matrix(tau):
    """Gamma such that the decay part of du/dt is -Gamma u."""
    r = 1.0 / tau
    return np.array(
        [[0, -r, 0, 0], [0, r, 0, 0], [0, 0, 0.5 * r, 0], [0, 0, 0, 0.5 * r]],
        dtype=complex,
    )


@dataclass(frozen=True)
class EffectiveHamiltonian:
    h: np.ndarray
    m: np.ndarray
    beam: BeamParams


def effective_hamiltonian(pm, beam):
    """H_eff = M / T - i Gamma. ``pm`` is a PerturbationMatrix or a 4x4 array."""
    m = np.asarray(getattr(pm, "m", pm), dtype=complex)
    gamma = decay_matrix(beam.tau) if math.isfinite(beam.tau) else np.zeros((4, 4), dtype=complex)
    h = m / beam.T - 1j * gamma
    h.flags.writeable = False
    return EffectiveHamiltonian(h, m, beam)


def steady_state_nullspace(heff):
    """Steady state as the trace-normalised null vector of H_eff."""
    h = heff.h
    ns = null_space(h, rcond=1e-12)
    if ns.shape[1] == 0:
        # numerically the null vector is the eigenvector of the smallest eigenvalue
        w, v = np.linalg.eig(h)
        vec = v[:, int(np.argmin(np.abs(w)))]
    else:
        vec = ns[:, 0]
    return DensityMatrix2.from_vector(vec)


def steady_state_closed_form(g, s, beam, regime_ratio=10.0):
    """Closed-form steady state of the first-order beam dynamics.

    With x = 2 |g s| tau / T the populations are (1 + x^2, x^2) / (1 + 2 x^2)
    and rho12 = 2 i g* s* (tau / T) / (1 + 2 x^2). For s = 0 the second-order
    population pumping is used instead.
    """
    g, s = complex(g), complex(s)
    ratio = beam.tau / beam.T
    if s == 0:
        p = abs(g) ** 2 * ratio
        return DensityMatrix2((1 + p) / (1 + 2 * p), p / (1 + 2 * p), 0.0)
    if abs(s) < regime_ratio * abs(g):
        warnings.warn(f"|s| = {abs(s):.3g} is not much larger than |g| = {abs(g):.3g}", RegimeWarning)
    x2 = (2.0 * abs(g * s) * ratio) ** 2
    den = 1.0 + 2.0 * x2
    rho12 = 2j * (g * s).conjugate() * ratio / den
    return DensityMatrix2((1 + x2) / den, x2 / den, rho12)


@dataclass(frozen=True)
class Evolution:
    """Continuous and per-electron trajectories of u (rows are time samples)."""

    t: np.ndarray
    continuous: np.ndarray
    t_discrete: np.ndarray
    discrete: np.ndarray

    def states(self, which="continuous"):
        return [DensityMatrix2.from_vector(u) for u in getattr(self, which)]

    def to_csv(self, path_or_file, which="continuous"):
        t = self.t if which == "continuous" else self.t_discrete
        u = getattr(self, which)
        rows = zip(t, u[:, 0].real, u[:, 1].real, u[:, 2].real, u[:, 2].imag)
        _write_csv(path_or_file, ["t", "rho11", "rho22", "re_rho12", "im_rho12"], rows)


def evolve(u0, heff, duration, dt):
    """Integrate the emitter dynamics two ways.

    * continuous: exact matrix-exponential steps of du/dt = -i H_eff u.
    * discrete: the kick u <- (I - i M) u for every electron followed by
      free decay over one period T.
    """
    beam = heff.beam
    if not dt > 0.0 or dt > beam.T * (1 + 1e-12) or dt > beam.tau / 100.0 * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3g} s must satisfy 0 < dt <= T = {beam.T:.3g} s and dt <= tau/100")
    if not duration > 0.0:
        raise DomainError("duration must be positive")
    u = u0.as_vector() if isinstance(u0, DensityMatrix2) else np.asarray(u0, dtype=complex)

    steps = int(math.ceil(duration / dt - 1e-9))
    prop = expm(-1j * heff.h * dt)
    cont = np.empty((steps + 1, 4), dtype=complex)
    cont[0] = u
    for i in range(steps):
        cont[i + 1] = prop @ cont[i]

    kicks = int(math.ceil(duration / beam.T - 1e-9))
    kick_map = expm(-decay_matrix(beam.tau) * beam.T) @ (np.eye(4) - 1j * heff.m)
    disc = np.empty((kicks + 1, 4), dtype=complex)
    disc[0] = u
    for i in range(kicks):
        disc[i + 1] = kick_map @ disc[i]
    return Evolution(np.arange(steps + 1) * dt, cont, np.arange(kicks + 1) * beam.T, disc)


def discrete_fixed_point(heff):
    """Trace-normalised fixed point u of the per-electron kick-and-decay map.

    Returned as a raw vector: the truncated kick is not completely positive,
    so the fixed point may sit marginally outside the physical set.
    """
    beam = heff.beam
    kick_map = expm(-decay_matrix(beam.tau) * beam.T) @ (np.eye(4) - 1j * heff.m)
    w, v = np.linalg.eig(kick_map)
    vec = v[:, int(np.argmin(np.abs(w - 1.0)))]
    return vec / (vec[0] + vec[1])


@dataclass(frozen=True)
class RabiReport:
    oscillatory: bool
    omega_R: float  # rad/s, 2 |g s| / T
    threshold_ratio: float  # (T / tau) / (8 |g s|)
    min_electrons_per_lifetime: float  # tau / T at threshold


def rabi_report(g, s, beam):
    gs = abs(complex(g) * complex(s))
    if gs == 0.0:
        return RabiReport(False, 0.0, math.inf, math.inf)
    ratio = (beam.T / beam.tau) / (8.0 * gs)
    return RabiReport(ratio < 1.0, 2.0 * gs / beam.T, ratio, 1.0 / (8.0 * gs))


def rabi_from_eigenvalues(heff):
    """Oscillation frequency read off the eigenvalues of H_eff (0 if overdamped).

    Solutions go as exp(-i lambda t); an oscillating pair has real parts
    +-omega with equal imaginary parts.
    """
    w = np.linalg.eigvals(heff.h)
    scale = max(1.0, np.abs(w).max())
    osc = w[np.abs(w.real) > 1e-9 * scale]
    if osc.size < 2:
        return 0.0
    return float(np.abs(osc.real).max())


def eigen_oscillatory(heff):
    return rabi_from_eigenvalues(heff) > 0.0


def excited_state_vs_current(g, s_values, tau, currents):
    """Steady-state rho22 for each |s| (columns) versus current (rows).

    Uses the nullspace of the full second-order M, so coherent (|g s|) and
    incoherent (|g|^2) pumping both contribute at every current.
    """
    currents = np.asarray(currents, dtype=float)
    if np.any(currents <= 0):
        raise DomainError("currents must be positive")
    table = np.empty((currents.size, len(s_values)))
    for j, s in enumerate(s_values):
        for i, cur in enumerate(currents):
            table[i, j] = driven_steady_state(g, s, BeamParams.from_current(cur, tau), first_order_only=False).rho22
    return table


def saturation_current(g, s, tau, lo=1e-24, hi=1e3):
    """Current at which the steady-state rho22 reaches 1/4, half its asymptote."""

    def excess(log_current):
        beam = BeamParams.from_current(math.exp(log_current), tau)
        return driven_steady_state(g, s, beam, first_order_only=False).rho22 - 0.25

    return math.exp(brentq(excess, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14))


@dataclass(frozen=True)
class PhaseBudget:
    energy_spread_term: float  # rad
    divergence_term: float  # rad
    total: float  # rad, worst case sum of magnitudes


def phase_uncertainty(kin, tls, L_p, delta_E, delta_theta):
    """Jitter of the drift phase L_p omega_a / v0.

    ``delta_E`` is the energy spread in eV, ``delta_theta`` the beam divergence
    in rad. The energy term is reported as a magnitude.
    """
    if L_p < 0 or delta_E < 0 or delta_theta < 0:
        raise DomainError("drift length, energy spread and divergence must be non-negative")
    drift_phase = L_p * tls.omega_a / kin.v0
    rest = ELECTRON_MASS * SPEED_OF_LIGHT**2
    term1 = drift_phase * delta_E * EV / (kin.beta * kin.gamma**3 * rest)
    term2 = 0.5 * delta_theta**2 * drift_phase
    return PhaseBudget(term1, term2, term1 + term2)


def driven_steady_state(g, s, beam, s2=0j, first_order_only=True):
    """Nullspace steady state for given coupling and bunching."""
    pm = perturbation_matrix(g, s, s2, first_order_only=first_order_only)
    return steady_state_nullspace(effective_hamiltonian(pm, beam))
