"""One electron scattering off two emitters in sequence, then post-selection.

The electron is treated as a sharp momentum state and tracked only through
its sideband shift m (units of omega_a / v0, negative = energy lost). Each
scattering event applies ``S = 1 - |g|^2/2 - i (g b sigma+ + g* b+ sigma-)``
and the product is truncated consistently at second order in the couplings.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PerturbativeWarning
from .scattering import PERTURBATIVE_GUARD

SHIFTS = (-2, -1, 0, 1, 2)
_OFFSET = 2  # array index of shift 0


def _pure_atom(state):
    amps = np.asarray(state, dtype=complex)
    if amps.shape != (2,):
        raise DomainError("an atom state needs two amplitudes (ground, excited)")
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > 1e-12:
        raise DomainError(f"atom state is not normalised (norm {norm})")
    return amps


GROUND = (1.0, 0.0)
EXCITED = (0.0, 1.0)


@dataclass(frozen=True)
class TwoAtomJointState:
    """Amplitudes ``amplitudes[m + 2, a1, a2]``; levels 0 = ground, 1 = excited."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.shape != (len(SHIFTS), 2, 2):
            raise DomainError(f"joint state must have shape (5, 2, 2), got {a.shape}")
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    def amplitude(self, m, a1, a2):
        """Amplitude for shift m and atom levels a1, a2 in {1, 2}."""
        return complex(self.amplitudes[m + _OFFSET, a1 - 1, a2 - 1])

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def branch_probabilities(self):
        return {m: float(np.sum(np.abs(self.amplitudes[m + _OFFSET]) ** 2)) for m in SHIFTS}

    def to_records(self):
        return [
            {"m": m, "a1": a1, "a2": a2, "re": z.real, "im": z.imag}
            for m in SHIFTS
            for a1 in (1, 2)
            for a2 in (1, 2)
            for z in [self.amplitude(m, a1, a2)]
        ]

    def to_json(self):
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text):
        amps = np.zeros((len(SHIFTS), 2, 2), dtype=complex)
        for rec in json.loads(text):
            amps[rec["m"] + _OFFSET, rec["a1"] - 1, rec["a2"] - 1] = complex(rec["re"], rec["im"])
        return cls(amps)


def _scatter_orders(orders, g, atom_axis):
    """Apply S(g) on one atom to an order-indexed list of (5, 2, 2) arrays."""
    g = complex(g)
    out = [o.copy() for o in orders]
    for k in range(len(orders)):
        src = orders[k]
        if k + 1 < len(orders):
            kick = np.zeros_like(src)
            # g b sigma+: ground -> excited, shift m -> m - 1
            # g* b+ sigma-: excited -> ground, shift m -> m + 1
            lo = np.take(src, 0, axis=atom_axis)
            hi = np.take(src, 1, axis=atom_axis)
            up = np.zeros_like(lo)
            up[:-1] = lo[1:]
            dn = np.zeros_like(hi)
            dn[1:] = hi[:-1]
            if atom_axis == 1:
                kick[:, 1, :] = g * up
                kick[:, 0, :] = g.conjugate() * dn
            else:
                kick[:, :, 1] = g * up
                kick[:, :, 0] = g.conjugate() * dn
            out[k + 1] = out[k + 1] - 1j * kick
        if k + 2 < len(orders):
            out[k + 2] = out[k + 2] - 0.5 * abs(g) ** 2 * src
    return out


def sequential_scatter(g1, g2, atom1=GROUND, atom2=GROUND, guard=PERTURBATIVE_GUARD):
    """Joint electron-atom-atom state after passing atom 1 and then atom 2.

    Terms up to second order in (g1, g2) are kept, including the b^2 and
    exchange contributions; higher orders are dropped, so the norm falls
    short of one at fourth order for a sharp electron. Any propagation phase
    between the emitters is taken to be absorbed into the phase of ``g2``.
    """
    a1 = _pure_atom(atom1)
    a2 = _pure_atom(atom2)
    if max(abs(g1), abs(g2)) >= guard:
        warnings.warn("coupling beyond the perturbative guard", PerturbativeWarning)
    start = np.zeros((len(SHIFTS), 2, 2), dtype=complex)
    start[_OFFSET] = np.outer(a1, a2)
    orders = [start, np.zeros_like(start), np.zeros_like(start)]
    orders = _scatter_orders(orders, g1, atom_axis=1)
    orders = _scatter_orders(orders, g2, atom_axis=2)
    return TwoAtomJointState(sum(orders))


@dataclass(frozen=True)
class PostSelectedPair:
    """Two-qubit state ``[a11, a12, a21, a22]`` conditioned on an electron shift."""

    two_qubit_amplitudes: np.ndarray
    probability: float
    shift: int

    def amplitude(self, a1, a2):
        return complex(self.two_qubit_amplitudes[2 * (a1 - 1) + (a2 - 1)])

    def density_matrix(self):
        v = self.two_qubit_amplitudes
        return np.outer(v, v.conj())


def postselect(state, shift):
    """Condition the joint state on a measured electron shift and renormalise."""
    if shift not in SHIFTS:
        raise DomainError(f"shift must be one of {SHIFTS}, got {shift}")
    branch = state.amplitudes[shift + _OFFSET].reshape(4)
    prob = float(np.vdot(branch, branch).real)
    if prob == 0.0:
        raise DomainError(f"branch with shift {shift} has zero probability")
    amps = branch / math.sqrt(prob)
    amps.flags.writeable = False
    return PostSelectedPair(amps, prob, shift)


def concurrence(pair):
    """Pure-state concurrence 2 |a11 a22 - a12 a21|."""
    a = pair.two_qubit_amplitudes if isinstance(pair, PostSelectedPair) else np.asarray(pair, dtype=complex)
    return float(min(1.0, 2.0 * abs(a[0] * a[3] - a[1] * a[2])))


# Mixed initial atom states: each state is expanded into its eigen-ensemble
# and the (linear) scattering map is applied to every pure component.


def _ensemble(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DomainError("atom density matrix must be 2x2")
    if abs(np.trace(rho).real - 1.0) > 1e-12 or np.abs(rho - rho.conj().T).max() > 1e-12:
        raise DomainError("atom density matrix must be Hermitian with unit trace")
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-12:
        raise DomainError("atom density matrix is not positive semi-definite")
    return [(float(p), v[:, i]) for i, p in enumerate(w) if p > 1e-15]


@dataclass(frozen=True)
class PostSelectedMixedPair:
    density_matrix: np.ndarray  # 4x4, basis |11>, |12>, |21>, |22>
    probability: float
    shift: int


def postselect_mixed(g1, g2, rho1, rho2, shift):
    """Post-selected two-atom density matrix for mixed initial atom states."""
    if shift not in SHIFTS:
        raise DomainError(f"shift must be one of {SHIFTS}, got {shift}")
    acc = np.zeros((4, 4), dtype=complex)
    for p1, v1 in _ensemble(rho1):
        for p2, v2 in _ensemble(rho2):
            branch = sequential_scatter(g1, g2, v1, v2).amplitudes[shift + _OFFSET].reshape(4)
            acc += p1 * p2 * np.outer(branch, branch.conj())
    prob = float(np.trace(acc).real)
    if prob == 0.0:
        raise DomainError(f"branch with shift {shift} has zero probability")
    return PostSelectedMixedPair(acc / prob, prob, shift)


def mixed_concurrence(rho):
    """Two-qubit concurrence of a 4x4 density matrix (spin-flip construction).

    The spin-flip eigenvalues are taken as singular values of W^T F W with
    W the square-root ensemble of rho, which stays exact for low-rank states.
    """
    rho = rho.density_matrix if isinstance(rho, PostSelectedMixedPair) else np.asarray(rho, dtype=complex)
    flip = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = w > 1e-14 * max(w.max(), 0.0)
    ensemble = v[:, keep] * np.sqrt(w[keep])
    lam = np.zeros(4)
    sv = np.linalg.svd(ensemble.T @ flip @ ensemble, compute_uv=False)
    lam[: sv.size] = np.sort(sv)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
