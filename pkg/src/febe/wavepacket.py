"""PINEM-modulated Gaussian electron wavepackets in momentum space.

The incident packet is an unchirped Gaussian of momentum spread ``sigma_q``
that drifts ``L_s`` to the modulator, picks up sidebands ``J_n(2|g_m|)
e^{i n phi}`` spaced by ``omega / v0``, and drifts ``L_p`` to the emitter.
Momenta are offsets from the central momentum, in 1/m.

Two routes to the ladder expectations ``s = <b>`` and ``s2 = <b^2>`` are
provided: a sampled overlap on a :class:`MomentumGrid` and the Bessel-resummed
closed form. They are meant to check each other.
"""

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import ELECTRON_MASS, HBAR
from .errors import CutoffError, DomainError, GridResolutionError
from .special import bessel_j_peak, bessel_j_range, bessel_j_table

CUTOFF_DEFICIT = 1e-12
NORM_TOLERANCE = 1e-9
# Gaussian amplitude exp(-x^2/4) is below 1e-21 past 14 sigma
_ENVELOPE_HALF_WIDTH = 14.0


def sideband_deficit(g_m_abs, n_max):
    """1 - sum_{|n|<=n_max} J_n(2|g_m|)^2."""
    j = bessel_j_range(n_max, 2.0 * g_m_abs)
    return 1.0 - (j[0] ** 2 + 2.0 * np.sum(j[1:] ** 2))


def adaptive_cutoff(g_m_abs, margin=2):
    """Smallest sideband cutoff meeting the Bessel sum rule to 1e-13, plus margin."""
    n = 1
    while sideband_deficit(g_m_abs, n) > 0.1 * CUTOFF_DEFICIT:
        n += 1
    return n + margin


@dataclass(frozen=True)
class ModulationParams:
    sigma_q: float  # 1/m
    omega: float  # rad/s
    g_m: complex
    L_s: float = 0.0  # m
    L_p: float = 0.0  # m
    n_max: Optional[int] = None

    def __post_init__(self):
        if not self.sigma_q > 0.0:
            raise DomainError("sigma_q must be positive")
        if not self.omega > 0.0:
            raise DomainError("modulation frequency must be positive")
        if self.L_s < 0.0 or self.L_p < 0.0:
            raise DomainError("drift lengths must be non-negative")
        object.__setattr__(self, "g_m", complex(self.g_m))
        if self.n_max is None:
            object.__setattr__(self, "n_max", adaptive_cutoff(abs(self.g_m)))
        else:
            if self.n_max < 1:
                raise DomainError("n_max must be at least 1")
            deficit = sideband_deficit(abs(self.g_m), self.n_max)
            if deficit > CUTOFF_DEFICIT:
                raise CutoffError(f"n_max={self.n_max} too small for |g_m|={abs(self.g_m)}", deficit)

    @property
    def g_m_abs(self):
        return abs(self.g_m)

    @property
    def g_m_phase(self):
        return math.atan2(self.g_m.imag, self.g_m.real)

    def with_(self, **changes):
        """Copy with fields replaced; the sideband cutoff is re-derived."""
        if "n_max" not in changes and "g_m" in changes:
            changes["n_max"] = None
        return replace(self, **changes)


def classical_bunching_length(kin, mod):
    """Drift length for perfect classical bunching, v0^2 / (4 zeta |g_m| omega^2)."""
    if mod.g_m_abs == 0.0:
        raise DomainError("bunching length is undefined for |g_m| = 0")
    return kin.v0**2 / (4.0 * kin.zeta * mod.g_m_abs * mod.omega**2)


def dispersion_period(kin, omega):
    """Drift length over which zeta L (omega/v0)^2 advances by 2 pi."""
    return 2.0 * math.pi * kin.v0**2 / (kin.zeta * omega**2)


def quarter_period(kin, omega):
    """pi gamma^3 m v0^3 / (hbar omega^2): a quarter of :func:`dispersion_period`."""
    return math.pi * kin.gamma**3 * ELECTRON_MASS * kin.v0**3 / (HBAR * omega**2)


@dataclass(frozen=True)
class MomentumGrid:
    """Sampled wavefunction on uniformly spaced momentum offsets.

    ``amplitudes`` are normalised so that ``sum(|a|^2) * bin_width == 1``.
    ``spacing`` is the sideband spacing (omega / v0) used for labelling.
    """

    q_values: np.ndarray
    amplitudes: np.ndarray
    bin_width: float
    spacing: float

    def __post_init__(self):
        q = np.array(self.q_values, dtype=float)
        a = np.array(self.amplitudes, dtype=complex)
        if q.shape != a.shape or q.ndim != 1:
            raise DomainError("q_values and amplitudes must be 1-D and equally long")
        q.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "q_values", q)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_amplitudes(cls, amplitudes, bin_width, spacing=None, center_index=None, normalize=True):
        """Grid from raw amplitudes; q = 0 sits at ``center_index`` (default: middle)."""
        a = np.asarray(amplitudes, dtype=complex)
        if center_index is None:
            center_index = a.size // 2
        q = (np.arange(a.size) - center_index) * bin_width
        if normalize:
            a = a / math.sqrt(np.sum(np.abs(a) ** 2) * bin_width)
        return cls(q, a, bin_width, bin_width if spacing is None else spacing)

    @property
    def density(self):
        return np.abs(self.amplitudes) ** 2

    def norm(self):
        return float(np.sum(self.density) * self.bin_width)

    def shift_bins(self, q_shift):
        """Integer number of bins equal to ``q_shift``; raises if not resolvable."""
        k = q_shift / self.bin_width
        kr = round(k)
        if abs(k - kr) > 1e-9 * max(1.0, abs(k)):
            raise GridResolutionError(
                f"shift {q_shift:.6e} 1/m is {k:.6f} bins; rebuild the grid so it is an integer"
            )
        return int(kr)

    def shifted(self, nbins):
        """Amplitudes a(q + nbins*dq), zero outside the window."""
        a = self.amplitudes
        out = np.zeros_like(a)
        if nbins == 0:
            out[:] = a
        elif abs(nbins) < a.size:
            if nbins > 0:
                out[:-nbins] = a[nbins:]
            else:
                out[-nbins:] = a[:nbins]
        return out

    def sideband_index(self):
        return np.rint(self.q_values / self.spacing).astype(int)

    def real_space_density(self):
        """Diagnostic |psi(z)|^2 from an FFT of the amplitudes (z in m)."""
        n = self.amplitudes.size
        psi = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(self.amplitudes))) * n * self.bin_width
        z = np.fft.fftshift(np.fft.fftfreq(n, d=self.bin_width)) * 2.0 * math.pi
        dens = np.abs(psi) ** 2 / (2.0 * math.pi)
        return z, dens

    def to_csv(self, path_or_file):
        rows = zip(self.q_values, self.amplitudes.real, self.amplitudes.imag, self.density)
        _write_csv(path_or_file, ["q", "re", "im", "abs2"], rows)


def _write_csv(path_or_file, header, rows):
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def default_bins_per_sideband(mod, kin, bins_per_sigma=16):
    return int(math.ceil(bins_per_sigma * kin.shift(mod.omega) / mod.sigma_q))


def build_momentum_grid(kin, mod, window=None, bins_per_sideband=None):
    """Sample the drifted, modulated packet on a grid.

    ``window`` is the half-width in units of omega/v0; ``bins_per_sideband``
    is the number of bins per omega/v0, so that shifts by whole harmonics of
    omega land on bins exactly.
    """
    q0 = kin.shift(mod.omega)
    if window is None:
        window = mod.n_max + 4
    if window < mod.n_max + 2:
        raise DomainError(f"window {window} must be at least n_max + 2 = {mod.n_max + 2}")
    if bins_per_sideband is None:
        bins_per_sideband = default_bins_per_sideband(mod, kin)
    bins_per_sideband = int(bins_per_sideband)
    dq = q0 / bins_per_sideband
    if dq > mod.sigma_q / 8.0:
        raise DomainError(
            f"{bins_per_sideband} bins per sideband gives {mod.sigma_q / dq:.2f} bins per sigma_q; need >= 8"
        )
    half_bins = int(math.ceil(window * bins_per_sideband))
    idx = np.arange(-half_bins, half_bins + 1)
    q = idx * dq
    amps = np.zeros(q.size, dtype=complex)

    sigma = mod.sigma_q
    zeta = kin.zeta
    phi = mod.g_m_phase
    orders, weights = bessel_j_table(-mod.n_max, mod.n_max, 2.0 * mod.g_m_abs)
    reach = int(math.ceil(_ENVELOPE_HALF_WIDTH * sigma / dq))
    for n, jn in zip(orders, weights):
        if jn == 0.0:
            continue
        centre = half_bins + n * bins_per_sideband
        lo = max(centre - reach, 0)
        hi = min(centre + reach + 1, q.size)
        if lo >= hi:
            continue
        qn = q[lo:hi] - n * q0
        source_phase = qn * mod.L_s + zeta * qn * qn * mod.L_s
        amps[lo:hi] += jn * np.exp(1j * n * phi) * np.exp(-qn * qn / (4.0 * sigma * sigma) - 1j * source_phase)
    amps *= (2.0 * math.pi * sigma * sigma) ** -0.25
    amps *= np.exp(-1j * (q * mod.L_p + zeta * q * q * mod.L_p))

    norm = float(np.sum(np.abs(amps) ** 2) * dq)
    deficit = 1.0 - norm
    if abs(deficit) > NORM_TOLERANCE:
        raise CutoffError("sideband cutoff or grid window too small", deficit)
    amps /= math.sqrt(norm)
    return MomentumGrid(q, amps, dq, q0)


def ladder_expectation_grid(grid, q_shift):
    """sum_q psi(q + q_shift) psi*(q) dq; q_shift must be a whole number of bins."""
    k = grid.shift_bins(q_shift)
    return complex(np.sum(grid.shifted(k) * np.conj(grid.amplitudes)) * grid.bin_width)


def ladder_expectation_analytic(kin, mod, omega_a, order=1):
    """Closed-form <b> (order=1) or <b^2> (order=2) for the modulated packet.

    Sums over harmonics l the Bessel term J_l[4|g_m| sin(zeta L_p w wa / v0^2)]
    with phase exp(i l (phi_gm - pi/2)), times the Gaussian detuning envelope
    and the L_s / L_p phase factors. The -pi/2 (not +pi/2) is what the
    sampled wavefunction gives; only the phase of odd harmonics depends on it.
    """
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    wa = order * omega_a
    w = mod.omega
    v0 = kin.v0
    zeta = kin.zeta
    sigma = mod.sigma_q
    q0 = w / v0
    a_shift = wa / v0
    ratio = wa / w
    gm = mod.g_m_abs

    arg = 4.0 * gm * math.sin(zeta * mod.L_p * w * wa / v0**2)
    # J_l(arg) < 1e-17 for |l| well beyond 4|g_m|; detuning envelope < e^-40 beyond reach
    j_reach = mod.n_max * 2 + 2
    env_reach = math.sqrt(320.0) * sigma / q0
    lo = max(-j_reach, int(math.floor(ratio - env_reach)))
    hi = min(j_reach, int(math.ceil(ratio + env_reach)))
    if lo > hi:
        return 0j
    ls, jl = bessel_j_table(lo, hi, arg)
    detune = ls - ratio
    exponent = (
        -((q0 * detune) ** 2) / (8.0 * sigma * sigma)
        + 1j * mod.L_s * q0 * detune
        - 2.0 * sigma * sigma * zeta * zeta * (mod.L_s * q0 * detune - mod.L_p * a_shift) ** 2
        + 1j * ls * (mod.g_m_phase - 0.5 * math.pi)
    )
    terms = jl * np.exp(exponent)
    terms = terms[np.abs(terms) > 1e-14 * max(1e-300, np.max(np.abs(terms)))]
    return complex(np.exp(-1j * mod.L_p * a_shift) * np.sum(terms))


@dataclass(frozen=True)
class LadderExpectations:
    s: complex
    s2: complex


def ladder_expectations(kin, mod, omega_a):
    return LadderExpectations(
        ladder_expectation_analytic(kin, mod, omega_a, 1),
        ladder_expectation_analytic(kin, mod, omega_a, 2),
    )


@dataclass(frozen=True)
class DriftOptimum:
    L_p: float  # m
    s_max: float
    peak_reachable: bool


def max_s_over_drift(kin, mod, harmonic, samples=2001):
    """Scan L_p over one period of the Bessel argument and maximise |s|.

    The emitter is taken resonant with the given harmonic (omega_a =
    harmonic * omega). ``peak_reachable`` is False when 4|g_m| is below the
    location of the first maximum of J_harmonic, in which case the returned
    |s| is the best achievable, not the Bessel peak.
    """
    harmonic = int(harmonic)
    if harmonic < 1:
        raise DomainError("harmonic order must be >= 1")
    omega_a = harmonic * mod.omega
    span = math.pi * kin.v0**2 / (kin.zeta * mod.omega * omega_a)

    def abs_s(lp):
        return abs(ladder_expectation_analytic(kin, mod.with_(L_p=lp), omega_a, 1))

    grid = np.linspace(0.0, span, samples)
    vals = np.array([abs_s(lp) for lp in grid])
    i = int(np.argmax(vals))
    step = grid[1] - grid[0]
    res = minimize_scalar(
        lambda lp: -abs_s(lp),
        bounds=(max(grid[i] - step, 0.0), min(grid[i] + step, span)),
        method="bounded",
        options={"xatol": span * 1e-12},
    )
    best_lp, best = (res.x, -res.fun) if -res.fun >= vals[i] else (grid[i], vals[i])
    x_peak, _ = bessel_j_peak(harmonic)
    return DriftOptimum(float(best_lp), float(best), bool(4.0 * mod.g_m_abs >= x_peak))


def bunching_profile(kin, mod, n_z=1024):
    """Density over one modulation period in the sharp-momentum limit.

    Returns ``(z, density)`` with z in m and density normalised to mean 1.
    """
    q0 = kin.shift(mod.omega)
    if 2 * mod.n_max + 1 > n_z:
        raise DomainError("n_z must exceed the number of sidebands")
    orders, weights = bessel_j_table(-mod.n_max, mod.n_max, 2.0 * mod.g_m_abs)
    coeffs = np.zeros(n_z, dtype=complex)
    phase = orders * mod.g_m_phase - kin.zeta * mod.L_p * (orders * q0) ** 2
    coeffs[orders % n_z] = weights * np.exp(1j * phase)
    psi = np.fft.ifft(coeffs) * n_z
    z = np.arange(n_z) * (2.0 * math.pi / q0) / n_z
    return z, np.abs(psi) ** 2


def shortest_bunch_drift(kin, mod, samples=801, n_z=1024):
    """Drift length at which the current spike of :func:`bunching_profile` first peaks.

    The peak density recurs at later drifts (fractional revivals of the
    sideband phases); the earliest drift reaching the highest spike to
    within 1e-3 is taken, then refined locally.
    """
    span = dispersion_period(kin, mod.omega) / 2.0

    def peak(lp):
        return float(np.max(bunching_profile(kin, mod.with_(L_p=lp), n_z)[1]))

    grid = np.linspace(0.0, span, samples)
    vals = np.array([peak(lp) for lp in grid])
    i = int(np.argmax(vals >= (1.0 - 1e-3) * vals.max()))
    while i + 1 < samples and vals[i + 1] > vals[i]:
        i += 1
    step = grid[1] - grid[0]
    res = minimize_scalar(
        lambda lp: -peak(lp),
        bounds=(max(grid[i] - step, 0.0), grid[i] + step),
        method="bounded",
    )
    return (float(res.x), -float(res.fun)) if -res.fun >= vals[i] else (float(grid[i]), float(vals[i]))
