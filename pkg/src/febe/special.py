"""Bessel functions needed by the coupling and wavepacket code.

Modified Bessel functions of the second kind K0, K1 are evaluated piecewise:

* ``x <= 2``: ascending series (A&S 9.6.11), cancellation costs < 2 digits.
* ``2 < x < 25``: Steed's continued fraction (Thompson & Barnett 1987).
* ``x >= 25``: Hankel asymptotic expansion, truncated at its smallest term.

Integer-order Bessel functions of the first kind use Miller's downward
recurrence normalised with ``J0 + 2 * sum(J_2k) = 1``.
"""

import math

import numpy as np

from .errors import DomainError

_EULER_GAMMA = 0.5772156649015329
_EPS = 1e-17
_SERIES_MAX = 2.0
_ASYMPTOTIC_MIN = 25.0


def _bessel_i01_and_k01_series(x):
    y = 0.25 * x * x
    log_half = math.log(0.5 * x)
    # k = 0 terms
    term0 = 1.0  # (x^2/4)^k / (k!)^2
    term1 = 1.0  # (x^2/4)^k / (k! (k+1)!)
    psi_k1 = -_EULER_GAMMA  # psi(k + 1)
    psi_k2 = 1.0 - _EULER_GAMMA  # psi(k + 2)
    i0 = term0
    i1 = term1
    s0 = psi_k1 * term0
    s1 = (psi_k1 + psi_k2) * term1
    k = 0
    while True:
        k += 1
        term0 *= y / (k * k)
        term1 *= y / (k * (k + 1))
        psi_k1 += 1.0 / k
        psi_k2 += 1.0 / (k + 1)
        i0 += term0
        i1 += term1
        s0 += psi_k1 * term0
        s1 += (psi_k1 + psi_k2) * term1
        if term0 < _EPS * i0 and term1 < _EPS * i1:
            break
    i1 *= 0.5 * x
    k0 = -log_half * i0 + s0
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1
    return k0, k1


def _bessel_k01_steed(x):
    # Steed's CF2 for nu = 0; returns K0, K1.
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, 100_000):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    h *= a1
    k0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def _bessel_k_asymptotic(order, x):
    mu = 4.0 * order * order
    total = 1.0
    term = 1.0
    for k in range(1, 60):
        new = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(new) >= abs(term):
            break
        term = new
        total += term
        if abs(term) < _EPS * abs(total):
            break
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * total


def modified_bessel_k(order, x):
    """K_order(x) for order in {0, 1} and real x > 0."""
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order}")
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"K_n(x) requires finite x > 0, got {x}")
    if x <= _SERIES_MAX:
        return _bessel_i01_and_k01_series(x)[order]
    if x < _ASYMPTOTIC_MIN:
        return _bessel_k01_steed(x)[order]
    return _bessel_k_asymptotic(order, x)


def bessel_k0(x):
    return modified_bessel_k(0, x)


def bessel_k1(x):
    return modified_bessel_k(1, x)


def _miller_start(nmax, x):
    n = max(nmax, int(x)) + 20 + int(math.sqrt(40.0 * max(nmax, x, 1.0)))
    return n + (n % 2)


def bessel_j_range(nmax, x):
    """Array ``[J_0(x), ..., J_nmax(x)]`` for integer orders and real x."""
    nmax = int(nmax)
    if nmax < 0:
        raise DomainError("nmax must be non-negative")
    x = float(x)
    sign_flip = x < 0.0
    ax = abs(x)
    out = np.zeros(nmax + 1)
    if ax == 0.0:
        out[0] = 1.0
        return out
    if ax < 1e-6:
        # two-term power series; next term is O(x^4) relative
        half = 0.5 * ax
        coef = 1.0
        for n in range(nmax + 1):
            if n > 0:
                coef *= half / n
                if coef == 0.0:
                    break
            out[n] = coef * (1.0 - half * half / (n + 1))
    else:
        start = _miller_start(nmax, ax)
        big = 1e250
        j_next, j_cur = 0.0, 1e-300
        vals = np.zeros(start + 1)
        vals[start] = j_cur
        for k in range(start, 0, -1):
            j_prev = (2.0 * k / ax) * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            vals[k - 1] = j_cur
            if abs(j_cur) > big:
                vals[k - 1 :] /= big
                j_cur /= big
                j_next /= big
        norm = vals[0] + 2.0 * vals[2::2].sum()
        out = vals[: nmax + 1] / norm
    if sign_flip:
        out[1::2] *= -1.0
    return out


def bessel_j(n, x):
    """J_n(x) for any integer n (negative orders via J_-n = (-1)^n J_n)."""
    n = int(n)
    val = bessel_j_range(abs(n), x)[abs(n)]
    if n < 0 and n % 2:
        val = -val
    return val


def bessel_j_table(nmin, nmax, x):
    """Orders nmin..nmax and the matching J_n(x) values."""
    orders = np.arange(int(nmin), int(nmax) + 1)
    top = int(np.max(np.abs(orders))) if orders.size else 0
    base = bessel_j_range(top, x)
    vals = base[np.abs(orders)]
    odd_negative = (orders < 0) & (orders % 2 == 1)
    vals = np.where(odd_negative, -vals, vals)
    return orders, vals


def bessel_j_peak(order, tol=1e-15):
    """Location and height of the first maximum of J_order on x > 0.

    Bisection on the sign of J'_n = (J_{n-1} - J_{n+1}) / 2 inside a bracket
    around its first zero.
    """
    order = int(order)
    if order < 1:
        raise DomainError("peak search is defined for order >= 1")

    def slope(x):
        vals = bessel_j_range(order + 1, x)
        return vals[order - 1] - vals[order + 1]

    # first zero of J'_n lies in (n, n + 2 n^(1/3) + 1)
    a, b = float(order) * 0.9, order + 2.0 * order ** (1.0 / 3.0) + 1.0
    while b - a > tol * b:
        mid = 0.5 * (a + b)
        if slope(mid) > 0.0:
            a = mid
        else:
            b = mid
    x = 0.5 * (a + b)
    return x, bessel_j(order, x)
