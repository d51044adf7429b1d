import cmath
import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from febe.errors import DomainError, OffResonanceError, PerturbativeWarning
from febe.scattering import (
    DensityMatrix2,
    SpectrumChange,
    antisymmetric_signal,
    apply_to_atom,
    average_energy_change,
    eels_change,
    eels_modulated_closed_form,
    max_signal_over_drift,
    optimal_modulation_search,
    perturbation_matrix,
    phase_matched_gm_phase,
    signal_vs_drift,
    spectrum_first_moment,
)
from febe.wavepacket import (
    ModulationParams,
    MomentumGrid,
    build_momentum_grid,
    dispersion_period,
    ladder_expectation_grid,
    quarter_period,
)
from oracles import ladder_expectation, product_space_scatter, scattering_operator

complexes = st.builds(
    lambda r, p: r * cmath.exp(1j * p),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=-math.pi, max_value=math.pi),
)


def random_pure_state(rng):
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    a /= np.linalg.norm(a)
    return DensityMatrix2.from_pure(*a)


def random_ladder(rng, size=7):
    c = rng.normal(size=size) + 1j * rng.normal(size=size)
    return c / np.linalg.norm(c)


@st.composite
def density_matrices(draw):
    p = draw(st.floats(min_value=0.0, max_value=1.0))
    r = draw(st.floats(min_value=0.0, max_value=1.0)) * math.sqrt(p * (1 - p))
    phi = draw(st.floats(min_value=-math.pi, max_value=math.pi))
    return DensityMatrix2(1 - p, p, r * cmath.exp(1j * phi))


# ---- density matrix and M ---------------------------------------------------


def test_density_matrix_validation():
    with pytest.raises(DomainError):
        DensityMatrix2(0.6, 0.6, 0.0)
    with pytest.raises(DomainError):
        DensityMatrix2(0.5, 0.5, 0.6)
    with pytest.raises(DomainError):
        DensityMatrix2.from_pure(1.0, 1.0)
    rho = DensityMatrix2.from_pure(0.6, 0.8j)
    assert rho.rho12 == pytest.approx(-0.48j)
    assert rho.rho21 == pytest.approx(0.48j)
    assert np.allclose(DensityMatrix2.from_vector(rho.as_vector()).as_vector(), rho.as_vector())


def test_m_without_bunching_only_moves_population():
    g = 3e-3 * cmath.exp(0.4j)
    m = perturbation_matrix(g, 0, 0).m
    assert np.all(m[:2, 2:] == 0) and np.all(m[2:, :2] == 0)
    assert m[2, 3] == 0 and m[3, 2] == 0
    assert m[0, 0] == pytest.approx(-1j * abs(g) ** 2)


def test_zero_coupling_gives_zero_matrix():
    pm = perturbation_matrix(0, 0.5, 0.2j)
    assert np.all(pm.m == 0)
    d = apply_to_atom(pm, DensityMatrix2.superposition())
    assert np.all(d.as_vector() == 0)


def test_guard_warns_and_flags():
    with pytest.warns(PerturbativeWarning):
        pm = perturbation_matrix(0.2, 0.1, 0)
    assert not pm.reliable
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert perturbation_matrix(0.2, 0.1, 0, guard=0.5).reliable


def test_ground_state_absorbs():
    g = 2e-3 * cmath.exp(1.0j)
    d = apply_to_atom(perturbation_matrix(g, 0, 0), DensityMatrix2.ground())
    assert d.d22 == pytest.approx(abs(g) ** 2, abs=1e-18)
    assert d.d11 == pytest.approx(-abs(g) ** 2, abs=1e-18)


def test_coherence_is_first_order_with_bunching():
    g = 1e-3
    d = apply_to_atom(perturbation_matrix(g, 0.5j, 0), DensityMatrix2.ground())
    assert abs(d.d12) == pytest.approx(0.5 * g, rel=1e-12)


@given(complexes, complexes, complexes, density_matrices())
@settings(max_examples=100)
def test_atom_change_trace_and_hermiticity(g, s, s2, rho):
    d = apply_to_atom(perturbation_matrix(0.05 * g, s, s2), rho)
    assert abs(d.d11 + d.d22) < 1e-15
    assert abs(d.d21 - np.conj(d.d12)) < 1e-15
    assert abs(d.d11.imag) < 1e-15 and abs(d.d22.imag) < 1e-15


# ---- product-space oracle ----------------------------------------------------


def test_m_matches_product_space_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        c = random_ladder(rng)
        g = 10 ** rng.uniform(-4, -2) * cmath.exp(1j * rng.uniform(-math.pi, math.pi))
        rho = random_pure_state(rng)
        d = apply_to_atom(perturbation_matrix(g, ladder_expectation(c), ladder_expectation(c, 2)), rho)
        d_ref, _, _ = product_space_scatter(g, c, rho.as_matrix())
        assert np.abs(d.as_matrix() - d_ref).max() < 1e-10


def test_eels_and_energy_match_product_space_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        c = random_ladder(rng)
        g = 10 ** rng.uniform(-4, -2) * cmath.exp(1j * rng.uniform(-math.pi, math.pi))
        rho = random_pure_state(rng)
        _, de_ref, index = product_space_scatter(g, c, rho.as_matrix())
        padded = np.concatenate([np.zeros(2), c, np.zeros(2)])
        grid = MomentumGrid.from_amplitudes(padded, 1.0, center_index=2)
        spec = eels_change(g, rho, grid, 1.0)
        assert np.abs(spec.total - de_ref).max() < 1e-10
        energy = average_energy_change(g, rho, ladder_expectation(c))
        assert abs(energy - float(np.sum(index * de_ref))) < 1e-10


def test_full_product_agrees_to_third_order():
    rng = np.random.default_rng(3)
    c = random_ladder(rng)
    rho = random_pure_state(rng)
    for g in (1e-3, 1e-2):
        trunc, _, _ = product_space_scatter(g, c, rho.as_matrix())
        full, _, _ = product_space_scatter(g, c, rho.as_matrix(), full=True)
        assert np.abs(trunc - full).max() <= 2 * g**3


def test_scattering_operator_unitary_to_second_order():
    size = 21
    inner = slice(2, 2 * size - 2)  # away from the truncated ladder ends
    deficits = {}
    for g in (1e-3, 1e-2):
        s = scattering_operator(g, size)
        deficits[g] = np.abs((s.conj().T @ s - np.eye(2 * size))[inner, inner]).max()
    c_fit = max(d / g**3 for g, d in deficits.items())
    assert c_fit < 1.0
    assert deficits[1e-2] / deficits[1e-3] > 1e3  # at least cubic


# ---- EELS on the grid --------------------------------------------------------


def test_conventional_eels_limit():
    amps = np.zeros(11)
    amps[5] = 1.0
    dk = 0.37
    grid = MomentumGrid.from_amplitudes(amps, dk)
    g = 1e-3 * cmath.exp(0.9j)
    spec = eels_change(g, DensityMatrix2.ground(), grid, 3 * dk)
    prob = spec.probabilities()
    expected = np.zeros(11)
    expected[5] = -abs(g) ** 2
    expected[2] = abs(g) ** 2
    assert np.abs(prob - expected).max() < 1e-12


def test_incoherent_atom_has_no_first_order(kin60, snv):
    q0 = kin60.shift(snv.omega_a)
    grid = build_momentum_grid(kin60, ModulationParams(0.02 * q0, snv.omega_a, 0.7, L_p=5e-3))
    spec = eels_change(1e-3, DensityMatrix2(0.3, 0.7, 0.0), grid, q0)
    assert np.all(spec.first_order == 0)


def test_first_order_odd_second_order_even(kin60, snv):
    q0 = kin60.shift(snv.omega_a)
    grid = build_momentum_grid(kin60, ModulationParams(0.02 * q0, snv.omega_a, 0.7 * cmath.exp(0.2j), L_p=5e-3))
    rho = DensityMatrix2(0.4, 0.6, 0.3 - 0.2j)
    flipped = DensityMatrix2(0.4, 0.6, -rho.rho12)
    a = eels_change(2e-3, rho, grid, q0)
    b = eels_change(2e-3, flipped, grid, q0)
    assert np.allclose(a.first_order, -b.first_order, atol=1e-18)
    assert np.array_equal(a.second_order, b.second_order)


@pytest.fixture(scope="module")
def fig3_setup(kin60, snv):
    g = 1e-3
    rho = DensityMatrix2.superposition()
    q0 = kin60.shift(snv.omega_a)
    phi = phase_matched_gm_phase(g, rho.rho12, 10e-3, q0, 1)
    mod = ModulationParams(0.02 * q0, snv.omega_a, 0.68 * cmath.exp(1j * phi), L_p=10e-3)
    return g, rho, mod


def test_closed_form_matches_grid_per_sideband(kin60, snv, fig3_setup):
    g, rho, mod = fig3_setup
    q0 = kin60.shift(snv.omega_a)
    for variant in (mod, mod.with_(L_s=2e-3), mod.with_(L_p=3.3e-3, g_m=1.4j)):
        sb = eels_change(g, rho, build_momentum_grid(kin60, variant), q0).sidebands()
        cf = eels_modulated_closed_form(kin60, variant, snv, g, rho)
        for part in ("first_order", "second_order"):
            a = dict(zip(sb.n.tolist(), getattr(sb, part)))
            b = dict(zip(cf.n.tolist(), getattr(cf, part)))
            worst = max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))
            assert worst < 1e-8


@given(complexes, density_matrices(), st.floats(min_value=0, max_value=2), st.floats(min_value=0, max_value=0.03))
@settings(max_examples=25, deadline=None)
def test_trace_and_moment_consistency(g, rho, gm, lp):
    from febe.core import kinematics_from_energy, snv_center

    kin, tls = kinematics_from_energy(60e3), snv_center()
    q0 = kin.shift(tls.omega_a)
    grid = build_momentum_grid(kin, ModulationParams(0.05 * q0, tls.omega_a, gm * cmath.exp(0.3j), L_p=lp))
    g = 1e-2 * g
    spec = eels_change(g, rho, grid, q0)
    assert abs(np.sum(spec.total) * spec.bin_width) < 1e-9
    energy = average_energy_change(g, rho, ladder_expectation_grid(grid, q0))
    moment = spectrum_first_moment(spec, q0)
    assert abs(moment - energy) <= 1e-8 * max(abs(energy), abs(g) ** 2) + 1e-30  # floor for subnormal g


def test_average_energy_change_examples():
    g = 2e-3
    assert average_energy_change(g, DensityMatrix2.ground(), 0.4 + 0.1j) == pytest.approx(-(g**2))
    assert average_energy_change(g, DensityMatrix2.superposition(), 0.3j) == pytest.approx(-g * 0.3)


def test_closed_form_needs_resonance(kin60, snv):
    q0 = kin60.shift(snv.omega_a)
    mod = ModulationParams(0.02 * q0, snv.omega_a / 1.5, 0.5)
    with pytest.raises(OffResonanceError):
        eels_modulated_closed_form(kin60, mod, snv, 1e-3, DensityMatrix2.superposition())


def test_closed_form_first_order_vanishes_without_coherence(kin60, snv, fig3_setup):
    _, _, mod = fig3_setup
    cf = eels_modulated_closed_form(kin60, mod, snv, 1e-3, DensityMatrix2(0.5, 0.5, 0.0))
    assert np.all(cf.first_order == 0)


def test_closed_form_second_harmonic_matches_grid(kin60, snv):
    omega = snv.omega_a / 2
    q_a = kin60.shift(snv.omega_a)
    rho = DensityMatrix2.from_pure(0.6, 0.8 * cmath.exp(0.5j))
    mod = ModulationParams(0.02 * kin60.shift(omega), omega, 1.6 * cmath.exp(-0.4j), L_p=20e-3)
    sb = eels_change(1e-3, rho, build_momentum_grid(kin60, mod), q_a).sidebands()
    cf = eels_modulated_closed_form(kin60, mod, snv, 1e-3, rho)
    a = dict(zip(sb.n.tolist(), sb.total))
    b = dict(zip(cf.n.tolist(), cf.total))
    assert max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b)) < 1e-8


def test_closed_form_periodic_in_drift(kin60, snv):
    g, rho = 1e-3, DensityMatrix2.superposition()
    period = dispersion_period(kin60, snv.omega_a)
    n, table = signal_vs_drift(kin60, snv, g, rho, 0.9, [3e-3, 3e-3 + period], sigma_q=1e-6 * kin60.shift(snv.omega_a))
    assert np.allclose(table[0], table[1], atol=1e-9)


# ---- anti-symmetric signal ----------------------------------------------------


def test_antisymmetric_signal_of_second_order_is_zero(kin60, snv, fig3_setup):
    g, rho, mod = fig3_setup
    cf = eels_modulated_closed_form(kin60, mod, snv, g, rho)
    _, anti = antisymmetric_signal(cf, part="second_order")
    assert np.abs(anti).max() < 1e-3 * np.abs(cf.second_order).max()


def test_phase_condition_makes_first_order_antisymmetric(kin60, snv, fig3_setup):
    g, rho, mod = fig3_setup
    cf = eels_modulated_closed_form(kin60, mod, snv, g, rho)
    lookup = dict(zip(cf.n.tolist(), cf.first_order))
    sym = max(abs(lookup[k] + lookup[-k]) for k in cf.n if k > 0)
    assert sym < 1e-3 * np.abs(cf.first_order).max()


def test_antisymmetric_signal_rejects_one_sided_labels():
    from febe.scattering import SidebandChange

    sb = SidebandChange(np.array([0, 1, 2]), np.zeros(3), np.zeros(3), 1.0)
    with pytest.raises(DomainError):
        antisymmetric_signal(sb)


def test_phase_condition_maximises_signal(kin60, snv):
    g, rho = 1e-3 * cmath.exp(0.7j), DensityMatrix2.from_pure(2**-0.5, 2**-0.5 * cmath.exp(-0.4j))
    q0 = kin60.shift(snv.omega_a)
    lp = 9e-3
    best = phase_matched_gm_phase(g, rho.rho12, lp, q0, 1)
    phis = best + np.linspace(-math.pi, math.pi, 181)[:-1]

    def n1(phi):
        mod = ModulationParams(1e-4 * q0, snv.omega_a, 0.68 * cmath.exp(1j * phi), L_p=lp)
        _, anti = antisymmetric_signal(eels_modulated_closed_form(kin60, mod, snv, g, rho))
        return abs(anti[0])

    vals = [n1(p) for p in phis]
    assert math.remainder(phis[int(np.argmax(vals))] - best, math.pi) == pytest.approx(0.0, abs=1e-9)


def test_signal_extremum_at_quarter_period(kin60, snv):
    period = dispersion_period(kin60, snv.omega_a)
    lps = np.linspace(period / 400, period / 2, 200)
    n, table = signal_vs_drift(kin60, snv, 1e-3, DensityMatrix2.superposition(), 0.68, lps)
    best = lps[int(np.argmax(np.abs(table[:, 0])))]
    assert best == pytest.approx(quarter_period(kin60, snv.omega_a), rel=1e-2)


def test_optimal_modulation_search(kin60, snv):
    opt = optimal_modulation_search(kin60, snv, g=1e-3)
    assert opt.g_m == pytest.approx(0.68, abs=0.02)
    assert opt.L_p == pytest.approx(quarter_period(kin60, snv.omega_a), rel=1e-2)
    assert opt.sideband == 1


def test_optimal_drift_independent_of_strength_and_sideband_moves_up(kin60, snv):
    rho = DensityMatrix2.superposition()
    quarter = quarter_period(kin60, snv.omega_a)
    small = max_signal_over_drift(kin60, snv, 1e-3, rho, 0.2)
    large = max_signal_over_drift(kin60, snv, 1e-3, rho, 2.0)
    assert small[1] == 1
    assert large[1] >= 2
    assert small[2] == pytest.approx(quarter, rel=1e-2)
    assert large[2] == pytest.approx(quarter, rel=1e-2)


def test_spectrum_csv_columns(kin60, snv, fig3_setup):
    g, rho, mod = fig3_setup
    spec = eels_change(g, rho, build_momentum_grid(kin60, mod.with_(g_m=0.1, L_p=0.0)), kin60.shift(snv.omega_a))
    buf = io.StringIO()
    spec.to_csv(buf)
    header = buf.getvalue().splitlines()[0]
    assert header == "n,k,delta_rho_first_order,delta_rho_second_order,delta_rho_total"
    assert isinstance(spec, SpectrumChange)
