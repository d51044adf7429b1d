"""Second-order scattering of a free electron off a two-level emitter.

The scattering operator is ``S = (1 - |g|^2/2) - i (g b sigma+ + g* b+ sigma-)``
where ``b`` lowers the electron momentum by ``omega_a / v0``. This module
traces it out in both directions: the emitter's density-matrix change
(through the 4x4 matrix ``M``) and the electron's spectrum change.
"""

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OffResonanceError, PerturbativeWarning, RegimeWarning
from .special import bessel_j_table
from .wavepacket import _write_csv

PERTURBATIVE_GUARD = 0.1


@dataclass(frozen=True)
class DensityMatrix2:
    """Emitter state; level 1 is the ground state."""

    rho11: float
    rho22: float
    rho12: complex

    def __post_init__(self):
        object.__setattr__(self, "rho11", float(self.rho11))
        object.__setattr__(self, "rho22", float(self.rho22))
        object.__setattr__(self, "rho12", complex(self.rho12))
        if not all(map(math.isfinite, (self.rho11, self.rho22, self.rho12.real, self.rho12.imag))):
            raise DomainError("density matrix entries must be finite")
        if abs(self.rho11 + self.rho22 - 1.0) > 1e-12:
            raise DomainError(f"trace is {self.rho11 + self.rho22}, expected 1")
        if self.rho11 * self.rho22 - abs(self.rho12) ** 2 < -1e-12 or min(self.rho11, self.rho22) < -1e-12:
            raise DomainError("density matrix is not positive semi-definite")

    @property
    def rho21(self):
        return self.rho12.conjugate()

    @classmethod
    def ground(cls):
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def excited(cls):
        return cls(0.0, 1.0, 0.0)

    @classmethod
    def from_pure(cls, c1, c2):
        """State c1|1> + c2|2>; amplitudes must be normalised."""
        c1, c2 = complex(c1), complex(c2)
        norm = abs(c1) ** 2 + abs(c2) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"pure state has norm {norm}")
        return cls(abs(c1) ** 2, abs(c2) ** 2, c1 * c2.conjugate())

    @classmethod
    def superposition(cls):
        """(|1> + |2>) / sqrt(2)."""
        return cls(0.5, 0.5, 0.5)

    @classmethod
    def from_vector(cls, u):
        """From u = [rho11, rho22, rho12, rho21], symmetrising the coherences."""
        u = np.asarray(u, dtype=complex)
        trace = (u[0] + u[1]).real
        rho12 = 0.5 * (u[2] + np.conj(u[3])) / trace
        return cls(u[0].real / trace, 1.0 - u[0].real / trace, rho12)

    def as_vector(self):
        return np.array([self.rho11, self.rho22, self.rho12, self.rho21], dtype=complex)

    def as_matrix(self):
        return np.array([[self.rho11, self.rho12], [self.rho21, self.rho22]], dtype=complex)


@dataclass(frozen=True)
class DensityChange:
    d11: complex
    d22: complex
    d12: complex
    d21: complex

    def as_vector(self):
        return np.array([self.d11, self.d22, self.d12, self.d21], dtype=complex)

    def as_matrix(self):
        return np.array([[self.d11, self.d12], [self.d21, self.d22]], dtype=complex)


@dataclass(frozen=True)
class PerturbationMatrix:
    m: np.ndarray
    g: complex
    s: complex
    s2: complex
    reliable: bool = True


def perturbation_matrix(g, s, s2=0j, guard=PERTURBATIVE_GUARD, first_order_only=False):
    """4x4 matrix M with Delta u = -i M u for u = [rho11, rho22, rho12, rho21].

    ``first_order_only`` drops the |g|^2 and g^2 s2 entries, which is the
    regime |s| >> |g| of the beam steady state.
    """
    g, s, s2 = complex(g), complex(s), complex(s2)
    reliable = abs(g) < guard
    if not reliable:
        warnings.warn(f"|g| = {abs(g):.3g} exceeds {guard}; second-order result unreliable", PerturbativeWarning)
    gc, sc = g.conjugate(), s.conjugate()
    gs, gcsc = g * s, gc * sc
    a2 = 0.0 if first_order_only else abs(g) ** 2
    q = 0j if first_order_only else 1j * g * g * s2
    qc = 0j if first_order_only else 1j * gc * gc * s2.conjugate()
    m = np.array(
        [
            [-1j * a2, 1j * a2, -gs, gcsc],
            [1j * a2, -1j * a2, gs, -gcsc],
            [-gcsc, gcsc, -1j * a2, qc],
            [gs, -gs, q, -1j * a2],
        ],
        dtype=complex,
    )
    m.flags.writeable = False
    return PerturbationMatrix(m, g, s, s2, reliable)


def apply_to_atom(pm, rho):
    """Change of the emitter density matrix after one electron passes."""
    du = -1j * (pm.m @ rho.as_vector())
    return DensityChange(*du)


def average_energy_change(g, rho, s):
    """Mean electron energy change in units of hbar * omega_a."""
    g, s = complex(g), complex(s)
    val = abs(g) ** 2 * (rho.rho22 - rho.rho11) + 1j * (g * rho.rho12 * s - g.conjugate() * rho.rho21 * s.conjugate())
    return float(val.real)


@dataclass(frozen=True)
class SidebandChange:
    """Spectrum change integrated over each sideband (probabilities)."""

    n: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray
    spacing: float

    @property
    def total(self):
        return self.first_order + self.second_order

    def value(self, n, part="total"):
        idx = np.nonzero(self.n == n)[0]
        if idx.size == 0:
            return 0.0
        return float(getattr(self, part)[idx[0]])

    def to_csv(self, path_or_file):
        rows = zip(self.n, self.n * self.spacing, self.first_order, self.second_order, self.total)
        _write_csv(
            path_or_file,
            ["n", "k", "delta_rho_first_order", "delta_rho_second_order", "delta_rho_total"],
            rows,
        )


@dataclass(frozen=True)
class SpectrumChange:
    """Per-bin change of the electron momentum density (per 1/m).

    Multiply by ``bin_width`` for per-bin probabilities.
    """

    k_values: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray
    bin_width: float
    spacing: float

    @property
    def total(self):
        return self.first_order + self.second_order

    def probabilities(self, part="total"):
        return getattr(self, part) * self.bin_width

    def sideband_index(self):
        return np.rint(self.k_values / self.spacing).astype(int)

    def sidebands(self):
        """Integrate each part over windows of +-spacing/2 around n * spacing."""
        idx = self.sideband_index()
        lo = idx.min()
        n = np.arange(lo, idx.max() + 1)
        first = np.bincount(idx - lo, weights=self.first_order) * self.bin_width
        second = np.bincount(idx - lo, weights=self.second_order) * self.bin_width
        return SidebandChange(n, first, second, self.spacing)

    def to_csv(self, path_or_file):
        rows = zip(self.sideband_index(), self.k_values, self.first_order, self.second_order, self.total)
        _write_csv(
            path_or_file,
            ["n", "k", "delta_rho_first_order", "delta_rho_second_order", "delta_rho_total"],
            rows,
        )


def eels_change(g, rho, grid, q_a):
    """Electron spectrum change on a momentum grid for emitter state ``rho``.

    ``q_a`` is omega_a / v0 and must be a whole number of grid bins.
    """
    g = complex(g)
    k = grid.shift_bins(q_a)
    psi = grid.amplitudes
    up = grid.shifted(k)  # psi(k + q_a)
    down = grid.shifted(-k)  # psi(k - q_a)
    dens = np.abs(psi) ** 2

    second = abs(g) ** 2 * (-dens + rho.rho11 * np.abs(up) ** 2 + rho.rho22 * np.abs(down) ** 2)

    b_rho = up * np.conj(psi)  # <k|b rho|k>
    rho_b = psi * np.conj(down)  # <k|rho b|k>
    bd_rho = down * np.conj(psi)  # <k|b+ rho|k>
    rho_bd = psi * np.conj(up)  # <k|rho b+|k>
    first = -1j * (g * rho.rho12 * (b_rho - rho_b) + g.conjugate() * rho.rho21 * (bd_rho - rho_bd))
    return SpectrumChange(grid.q_values, first.real, second, grid.bin_width, grid.spacing)


def spectrum_first_moment(spectrum, q_a):
    """Mean momentum change of a spectrum in units of q_a (= hbar omega_a of energy)."""
    return float(np.sum(spectrum.k_values * spectrum.total) * spectrum.bin_width / q_a)


def resonant_harmonic(omega_a, omega, rtol=1e-9):
    l = int(round(omega_a / omega))
    if l < 1 or abs(omega_a - l * omega) > rtol * omega_a:
        raise OffResonanceError(
            f"omega_a/omega = {omega_a / omega:.9f} is not a whole harmonic; use eels_change on a grid"
        )
    return l


def eels_modulated_closed_form(kin, mod, tls, g, rho):
    """Sideband-integrated spectrum change for a resonant modulated packet.

    Requires omega_a = l * omega for integer l and sigma_q << omega/v0. Each
    sideband n carries the population term |g|^2 (rho11 J_{n+l}^2 +
    rho22 J_{n-l}^2 - J_n^2) and the coherence term 2 Im f_n with

        f_n = g rho12 exp(-i (L_p q_a - l phi)) exp(-2 i n q0 zeta L_p q_a)
              [J_{n+l} J_n exp(-i zeta L_p q_a^2) - J_n J_{n-l} exp(i zeta L_p q_a^2)]

    damped by the Gaussian average of the linear chirp over the peak.
    """
    g = complex(g)
    l = resonant_harmonic(tls.omega_a, mod.omega)
    q0 = kin.shift(mod.omega)
    if mod.sigma_q > 0.1 * q0:
        warnings.warn("sigma_q is not small against omega/v0; sidebands overlap", RegimeWarning)
    qa = kin.shift(tls.omega_a)
    zeta = kin.zeta
    lp = mod.L_p

    top = mod.n_max + l
    n = np.arange(-top, top + 1)
    orders, j = bessel_j_table(-top - l, top + l, 2.0 * mod.g_m_abs)
    jn = j[n - orders[0]]
    jn_up = j[n + l - orders[0]]
    jn_dn = j[n - l - orders[0]]

    second = abs(g) ** 2 * (-(jn**2) + rho.rho11 * jn_up**2 + rho.rho22 * jn_dn**2)

    curvature = zeta * lp * qa * qa
    prefactor = g * rho.rho12 * cmath.exp(-1j * (lp * qa - l * mod.g_m_phase))
    f = (
        prefactor
        * np.exp(-2j * n * q0 * zeta * lp * qa)
        * (jn_up * jn * np.exp(-1j * curvature) - jn * jn_dn * np.exp(1j * curvature))
    )
    damping = math.exp(-2.0 * (zeta * lp * qa * mod.sigma_q) ** 2)
    first = 2.0 * f.imag * damping
    return SidebandChange(n, first, second, q0)


def antisymmetric_signal(spectrum, part="first_order"):
    """Delta(n) - Delta(-n) for n >= 1, as ``(n, values)``."""
    if isinstance(spectrum, SpectrumChange):
        spectrum = spectrum.sidebands()
    n = np.asarray(spectrum.n)
    vals = np.asarray(getattr(spectrum, part))
    pos = n[n > 0]
    if not np.array_equal(np.sort(-n[n < 0]), pos):
        raise DomainError("sidebands are not labelled symmetrically about n = 0")
    lookup = dict(zip(n.tolist(), vals.tolist()))
    return pos, np.array([lookup[k] - lookup[-k] for k in pos])


def phase_matched_gm_phase(g, rho12, L_p, q_a, harmonic, branch=0):
    """Modulation phase phi_gm satisfying the anti-symmetry condition.

    arg g + arg rho12 - L_p q_a + l phi_gm = branch * pi + (l - 1) pi / 2
    """
    l = int(harmonic)
    target = branch * math.pi + 0.5 * (l - 1) * math.pi
    phi = (target - cmath.phase(complex(g)) - cmath.phase(complex(rho12)) + L_p * q_a) / l
    return math.remainder(phi, 2.0 * math.pi)


@dataclass(frozen=True)
class ModulationOptimum:
    g_m: float
    L_p: float
    sideband: int
    signal: float  # max |Delta(n) - Delta(-n)| / |g rho12|


def _normalized_signal(kin, tls, g, rho, sigma_q, gm_abs, lp):
    from .wavepacket import ModulationParams

    phi = phase_matched_gm_phase(g, rho.rho12, lp, kin.shift(tls.omega_a), 1)
    mod = ModulationParams(sigma_q, tls.omega_a, gm_abs * cmath.exp(1j * phi), L_p=lp)
    n, vals = antisymmetric_signal(eels_modulated_closed_form(kin, mod, tls, g, rho))
    vals = np.abs(vals) / abs(g * rho.rho12)
    i = int(np.argmax(vals))
    return float(vals[i]), int(n[i])


def max_signal_over_drift(kin, tls, g, rho, gm_abs, lp_count=121, sigma_q=None):
    """Largest normalised anti-symmetric signal over one dispersion period.

    Returns ``(signal, sideband, L_p)`` for a phase-matched resonant
    modulation of strength ``gm_abs``.
    """
    from scipy.optimize import minimize_scalar

    from .wavepacket import dispersion_period

    if sigma_q is None:
        sigma_q = 1e-4 * kin.shift(tls.omega_a)
    period = dispersion_period(kin, tls.omega_a)
    lps = np.linspace(period / lp_count, period, lp_count)
    vals = [_normalized_signal(kin, tls, g, rho, sigma_q, gm_abs, lp)[0] for lp in lps]
    i = int(np.argmax(vals))
    step = lps[1] - lps[0]
    res = minimize_scalar(
        lambda lp: -_normalized_signal(kin, tls, g, rho, sigma_q, gm_abs, lp)[0],
        bounds=(max(lps[i] - step, 1e-12), lps[i] + step),
        method="bounded",
        options={"xatol": 1e-10 * period},
    )
    signal, n = _normalized_signal(kin, tls, g, rho, sigma_q, gm_abs, res.x)
    if signal < vals[i]:
        return vals[i], _normalized_signal(kin, tls, g, rho, sigma_q, gm_abs, lps[i])[1], float(lps[i])
    return signal, n, float(res.x)


def optimal_modulation_search(
    kin,
    tls,
    g=1e-3,
    rho=None,
    gm_range=(0.05, 2.0),
    gm_count=60,
    lp_count=121,
    sigma_q=None,
):
    """Maximise the anti-symmetric first-order EELS signal over (|g_m|, L_p).

    The modulation is resonant with the emitter (l = 1) and its phase is
    re-tuned at every L_p so that the anti-symmetry condition holds. A grid
    search over one dispersion period is refined with Nelder-Mead.
    """
    from scipy.optimize import minimize

    from .wavepacket import dispersion_period

    rho = DensityMatrix2.superposition() if rho is None else rho
    if abs(rho.rho12) == 0.0:
        raise DomainError("the signal is identically zero without emitter coherence")
    if sigma_q is None:
        sigma_q = 1e-4 * kin.shift(tls.omega_a)
    period = dispersion_period(kin, tls.omega_a)
    gms = np.linspace(gm_range[0], gm_range[1], gm_count)
    lps = np.linspace(period / lp_count, period, lp_count)
    best = (-1.0, None, None)
    for gm in gms:
        for lp in lps:
            val, _ = _normalized_signal(kin, tls, g, rho, sigma_q, gm, lp)
            if val > best[0]:
                best = (val, gm, lp)

    def objective(x):
        gm, lp_rel = x
        if not gm_range[0] <= gm <= gm_range[1]:
            return 0.0
        return -_normalized_signal(kin, tls, g, rho, sigma_q, gm, lp_rel * period)[0]

    res = minimize(
        objective,
        x0=[best[1], best[2] / period],
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-12, "initial_simplex": [
            [best[1], best[2] / period],
            [best[1] + (gms[1] - gms[0]), best[2] / period],
            [best[1], (best[2] + lps[1] - lps[0]) / period],
        ]},
    )
    gm_opt, lp_opt = float(res.x[0]), float(res.x[1] * period)
    signal, n_opt = _normalized_signal(kin, tls, g, rho, sigma_q, gm_opt, lp_opt)
    return ModulationOptimum(gm_opt, lp_opt, n_opt, signal)


def signal_vs_drift(kin, tls, g, rho, gm_abs, lps, sigma_q=None):
    """Per-sideband anti-symmetric signal (normalised) along a drift-length sweep.

    Returns ``(n, table)`` with ``table[i, j]`` the signal at ``lps[i]`` and
    sideband ``n[j]``.
    """
    if sigma_q is None:
        sigma_q = 1e-4 * kin.shift(tls.omega_a)
    from .wavepacket import ModulationParams

    rows = []
    n = None
    for lp in lps:
        phi = phase_matched_gm_phase(g, rho.rho12, lp, kin.shift(tls.omega_a), 1)
        mod = ModulationParams(sigma_q, tls.omega_a, gm_abs * cmath.exp(1j * phi), L_p=lp)
        n, vals = antisymmetric_signal(eels_modulated_closed_form(kin, mod, tls, g, rho))
        rows.append(vals / abs(g * rho.rho12))
    return n, np.array(rows)
