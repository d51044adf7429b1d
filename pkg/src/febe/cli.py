"""``febe`` command line: run a scenario, write CSV (and optionally SVG)."""

import argparse
import cmath
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .beam import (
    BeamParams,
    driven_steady_state,
    effective_hamiltonian,
    evolve,
    phase_uncertainty,
    rabi_from_eigenvalues,
    rabi_report,
    saturation_current,
    steady_state_nullspace,
)
from .config import SCENARIOS, ConfigError, ValidationFailure, parse_config
from .core import PARALLEL, PERPENDICULAR, CouplingGeometry, TwoLevelSystem, coupling_g, kinematics_from_energy
from .entanglement import EXCITED, GROUND, SHIFTS, concurrence, postselect, sequential_scatter
from .errors import FebeError, PerturbativeWarning
from .results import PlotHint, ResultTable
from .scattering import (
    DensityMatrix2,
    antisymmetric_signal,
    average_energy_change,
    eels_change,
    eels_modulated_closed_form,
    max_signal_over_drift,
    perturbation_matrix,
    phase_matched_gm_phase,
    spectrum_first_moment,
)
from .special import bessel_j_peak
from .svg import render_svg
from .wavepacket import (
    ModulationParams,
    build_momentum_grid,
    dispersion_period,
    ladder_expectation_grid,
    ladder_expectations,
    max_s_over_drift,
    quarter_period,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ---- boundary layer: lab units -> physics objects --------------------------


def _kinematics(cfg, key="electron.kinetic_energy_kev"):
    return kinematics_from_energy(cfg.si(key))


def _emitter(cfg):
    orient = PERPENDICULAR if cfg["atom.orientation"] == "perpendicular" else PARALLEL
    return TwoLevelSystem.from_wavelength(
        cfg.si("atom.wavelength_nm"), cfg.si("atom.lifetime_ns"), cfg.si("atom.dipole_nm"), orient
    )


def _coupling(cfg, kin, tls):
    if cfg["coupling.source"] == "geometry":
        geom = CouplingGeometry(cfg.si("geometry.r_perp_nm"), cfg.si("geometry.z_a_nm"))
        return coupling_g(kin, tls, geom)
    return cfg["coupling.g_abs"] * cmath.exp(1j * cfg["coupling.g_phase_rad"])


def _atom_state(name):
    if name == "ground":
        return DensityMatrix2.ground()
    if name == "excited":
        return DensityMatrix2.excited()
    if name == "mixed":
        return DensityMatrix2(0.5, 0.5, 0.0)
    return DensityMatrix2.superposition()


def _modulation(cfg, kin, tls, g, rho, L_p=None, g_m_abs=None):
    omega = tls.omega_a / cfg["modulation.harmonic"]
    L_p = cfg.si("modulation.l_p_mm") if L_p is None else L_p
    g_m_abs = cfg["modulation.g_m_abs"] if g_m_abs is None else g_m_abs
    phase = cfg["modulation.phase_rad"]
    if cfg["modulation.phase"] == "matched" and rho.rho12 != 0 and g != 0:
        phase = phase_matched_gm_phase(g, rho.rho12, L_p, kin.shift(tls.omega_a), cfg["modulation.harmonic"])
    return ModulationParams(
        cfg["electron.sigma_rel"] * kin.shift(omega),
        omega,
        g_m_abs * cmath.exp(1j * phase),
        L_s=cfg.si("modulation.l_s_mm"),
        L_p=L_p,
    )


def _sweep(cfg, start, stop, count, scale):
    start = cfg.get("sweep.start", start)
    stop = cfg.get("sweep.stop", stop)
    count = cfg.get("sweep.count", count)
    scale = cfg.get("sweep.scale", scale)
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ValidationFailure("sweep.start and sweep.stop must be positive for a log sweep")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _pmap(cfg, fn, items):
    """Ordered map, optionally threaded; output order never depends on timing."""
    workers = cfg["run.workers"]
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---- scenarios --------------------------------------------------------------


def run_coupling(cfg):
    tls_base = _emitter(cfg)
    energies = cfg["coupling.energies_kev"]
    radii = _sweep(cfg, 1.0, 100.0, 60, "log")
    columns, units = ["r_perp_nm"], ["nm"]
    for e in energies:
        columns += [f"g_perp_{e:g}kev", f"g_par_{e:g}kev"]
        units += ["1", "1"]
    perp = TwoLevelSystem(tls_base.omega_a, tls_base.tau, tls_base.dipole_length, PERPENDICULAR)
    par = TwoLevelSystem(tls_base.omega_a, tls_base.tau, tls_base.dipole_length, PARALLEL)
    kins = [kinematics_from_energy(e * 1e3) for e in energies]

    def row(r_nm):
        geom = CouplingGeometry(r_nm * 1e-9)
        out = [r_nm]
        for kin in kins:
            out += [abs(coupling_g(kin, perp, geom)), abs(coupling_g(kin, par, geom))]
        return out

    rows = _pmap(cfg, row, radii)
    kin = _kinematics(cfg)
    g_here = coupling_g(kin, tls_base, CouplingGeometry(cfg.si("geometry.r_perp_nm"), cfg.si("geometry.z_a_nm")))
    meta = [("abs_g_at_configured_point", f"{abs(g_here):.12g}")]
    ys = tuple(columns[1:])
    return ResultTable(columns, units, rows, meta, PlotHint("r_perp_nm", ys, logx=True, logy=True, title="|g| vs distance"))


def run_spectrum(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    rho = _atom_state(cfg["atom.state"])
    g = _coupling(cfg, kin, tls)
    mod = _modulation(cfg, kin, tls, g, rho)
    grid = build_momentum_grid(kin, mod)
    prob = grid.density * grid.bin_width
    k_rel = grid.q_values / grid.spacing
    rows = [[n, k, kr, p] for n, k, kr, p in zip(grid.sideband_index(), grid.q_values, k_rel, prob)]
    lad = ladder_expectations(kin, mod, tls.omega_a)
    meta = [
        ("abs_s", f"{abs(lad.s):.12g}"),
        ("abs_s2", f"{abs(lad.s2):.12g}"),
        ("n_max", str(mod.n_max)),
    ]
    return ResultTable(
        ["n", "k", "k_rel", "probability"],
        ["1", "1/m", "omega/v0", "1"],
        rows,
        meta,
        PlotHint("k_rel", ("probability",), title="electron momentum spectrum"),
    )


def run_eels(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    rho = _atom_state(cfg["atom.state"])
    g = _coupling(cfg, kin, tls)
    mod = _modulation(cfg, kin, tls, g, rho)
    grid = build_momentum_grid(kin, mod)
    q_a = kin.shift(tls.omega_a)
    spec = eels_change(g, rho, grid, q_a)
    rows = [
        [n, k, a, b, a + b]
        for n, k, a, b in zip(spec.sideband_index(), spec.k_values, spec.first_order, spec.second_order)
    ]
    s = ladder_expectation_grid(grid, q_a)
    meta = [
        ("abs_g", f"{abs(g):.12g}"),
        ("abs_s", f"{abs(s):.12g}"),
        ("average_energy_change_hbar_omega_a", f"{average_energy_change(g, rho, s):.12g}"),
        ("spectrum_first_moment_hbar_omega_a", f"{spectrum_first_moment(spec, q_a):.12g}"),
    ]
    sb = spec.sidebands()
    if np.array_equal(np.sort(-sb.n[sb.n < 0]), sb.n[sb.n > 0]):
        n_pos, anti = antisymmetric_signal(sb)
        for n, v in zip(n_pos[:5], anti[:5]):
            meta.append((f"antisymmetric_first_order_n{n}", f"{v:.12g}"))
    return ResultTable(
        ["n", "k", "delta_rho_first_order", "delta_rho_second_order", "delta_rho_total"],
        ["1", "1/m", "m", "m", "m"],
        rows,
        meta,
        PlotHint("k", ("delta_rho_first_order", "delta_rho_second_order"), title="electron spectrum change"),
    )


def run_sweep_lp(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    rho = _atom_state(cfg["atom.state"])
    g = _coupling(cfg, kin, tls)
    if cfg["sweep.observable"] == "s":
        return _sweep_lp_harmonics(cfg, kin, tls)
    if rho.rho12 == 0 or g == 0:
        raise ValidationFailure("sweep-lp with observable = eels needs emitter coherence and g != 0")
    period_mm = dispersion_period(kin, tls.omega_a / cfg["modulation.harmonic"]) * 1e3
    lps = _sweep(cfg, period_mm / 80, period_mm, 80, "linear")

    def row(lp_mm):
        mod = _modulation(cfg, kin, tls, g, rho, L_p=lp_mm * 1e-3)
        sb = eels_modulated_closed_form(kin, mod, tls, g, rho)
        return sb.n, sb.first_order / abs(g * rho.rho12)

    results = _pmap(cfg, row, lps)
    n_all = sorted(set().union(*(r[0].tolist() for r in results)))
    rows = []
    for lp, (n, vals) in zip(lps, results):
        lookup = dict(zip(n.tolist(), vals.tolist()))
        rows.append([lp] + [lookup.get(k, 0.0) for k in n_all])
    cols = ["L_p_mm"] + [f"n{k}" for k in n_all]
    meta = [
        ("dispersion_period_mm", f"{period_mm:.12g}"),
        ("quarter_period_mm", f"{quarter_period(kin, tls.omega_a / cfg['modulation.harmonic']) * 1e3:.12g}"),
    ]
    shown = tuple(f"n{k}" for k in n_all if 1 <= abs(k) <= 2)
    return ResultTable(
        cols, ["mm"] + ["1"] * len(n_all), rows, meta,
        PlotHint("L_p_mm", shown, title="first-order EELS / |g rho12| vs drift"),
    )


def _sweep_lp_harmonics(cfg, kin, tls):
    top = cfg["sweep.harmonics"]
    gm = cfg["modulation.g_m_abs"]

    def row(l):
        omega = tls.omega_a / l
        mod = ModulationParams(cfg["electron.sigma_rel"] * kin.shift(omega), omega, gm)
        opt = max_s_over_drift(kin, mod, l)
        return [l, opt.s_max, opt.L_p * 1e3, bessel_j_peak(l)[1], int(opt.peak_reachable)]

    rows = _pmap(cfg, row, range(1, top + 1))
    return ResultTable(
        ["harmonic", "max_abs_s", "L_p_mm", "bessel_peak", "peak_reachable"],
        ["1", "1", "mm", "1", "1"],
        rows,
        [("g_m_abs", f"{gm:.12g}")],
        PlotHint("harmonic", ("max_abs_s", "bessel_peak"), title="max |s| vs harmonic"),
    )


def run_sweep_gm(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    rho = _atom_state(cfg["atom.state"])
    g = _coupling(cfg, kin, tls)
    if rho.rho12 == 0 or g == 0:
        raise ValidationFailure("sweep-gm needs emitter coherence and g != 0")
    if cfg["modulation.harmonic"] != 1:
        raise ValidationFailure("sweep-gm is defined for modulation.harmonic = 1")
    gms = _sweep(cfg, 0.1, 2.0, 191, "linear")

    def row(gm):
        signal, n, lp = max_signal_over_drift(kin, tls, g, rho, gm)
        return [gm, signal, n, lp * 1e3]

    rows = _pmap(cfg, row, gms)
    best = max(rows, key=lambda r: r[1])
    meta = [
        ("argmax_g_m", f"{best[0]:.12g}"),
        ("argmax_L_p_mm", f"{best[3]:.12g}"),
        ("quarter_period_mm", f"{quarter_period(kin, tls.omega_a) * 1e3:.12g}"),
    ]
    return ResultTable(
        ["g_m", "max_antisymmetric_signal", "sideband", "L_p_mm"],
        ["1", "1", "1", "mm"],
        rows,
        meta,
        PlotHint("g_m", ("max_antisymmetric_signal",), title="best anti-symmetric signal vs |g_m|"),
    )


def run_steady(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    g = _coupling(cfg, kin, tls)
    currents = _sweep(cfg, 1e-3, 1e6, 91, "log")
    rows, meta = [], [("abs_g", f"{abs(g):.12g}")]
    for s in cfg["beam.s_values"]:
        for cur in currents:
            st = driven_steady_state(g, s, BeamParams.from_current(cur * 1e-9, tls.tau), first_order_only=False)
            rows.append([s, cur, st.rho11, st.rho22, st.rho12.real, st.rho12.imag])
        if g != 0:
            meta.append((f"saturation_current_na_s{s:g}", f"{saturation_current(g, s, tls.tau) * 1e9:.12g}"))
    return ResultTable(
        ["s_abs", "I", "rho11", "rho22", "re_rho12", "im_rho12"],
        ["1", "nA", "1", "1", "1", "1"],
        rows,
        meta,
        PlotHint("I", ("rho22",), group="s_abs", logx=True, title="steady-state excitation vs current"),
    )


def run_rabi(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    g = _coupling(cfg, kin, tls)
    s = cfg["beam.s_abs"]
    beam = BeamParams.from_current(cfg.si("beam.current_na"), tls.tau)
    duration = cfg.si("beam.duration_ns")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativeWarning)
        heff = effective_hamiltonian(perturbation_matrix(g, s), beam)
    dt = min(beam.T, tls.tau / 100.0, duration / 2000.0)
    ev = evolve(DensityMatrix2.ground(), heff, duration, dt)
    rep = rabi_report(g, s, beam)
    rows = [[t * 1e9, u[0].real, u[1].real, u[2].real, u[2].imag] for t, u in zip(ev.t, ev.continuous)]
    ss = steady_state_nullspace(heff)
    meta = [
        ("oscillatory", str(rep.oscillatory)),
        ("threshold_ratio", f"{rep.threshold_ratio:.12g}"),
        ("omega_R_rad_per_s", f"{rep.omega_R:.12g}"),
        ("omega_R_from_eigenvalues_rad_per_s", f"{rabi_from_eigenvalues(heff):.12g}"),
        ("min_electrons_per_lifetime", f"{rep.min_electrons_per_lifetime:.12g}"),
        ("electrons_per_lifetime", f"{tls.tau / beam.T:.12g}"),
        ("steady_rho22", f"{ss.rho22:.12g}"),
        ("discrete_final_rho22", f"{ev.discrete[-1][1].real:.12g}"),
    ]
    return ResultTable(
        ["t", "rho11", "rho22", "re_rho12", "im_rho12"],
        ["ns", "1", "1", "1", "1"],
        rows,
        meta,
        PlotHint("t", ("rho22", "re_rho12", "im_rho12"), title="driven emitter"),
    )


def run_entangle(cfg):
    g1 = cfg["entangle.g1_abs"]
    g2 = cfg["entangle.g2_abs"] * cmath.exp(1j * cfg["entangle.g2_phase_rad"])
    start = {"ground": GROUND, "excited": EXCITED, "superposition": (2**-0.5, 2**-0.5)}[cfg["entangle.atoms"]]
    state = sequential_scatter(g1, g2, start, start)
    rows = [
        [r["m"], r["a1"], r["a2"], 10 * r["a1"] + r["a2"], r["re"], r["im"], r["re"] ** 2 + r["im"] ** 2]
        for r in state.to_records()
    ]
    shift = cfg["entangle.shift"]
    if shift not in SHIFTS:
        raise ValidationFailure(f"entangle.shift must be one of {SHIFTS}")
    pair = postselect(state, shift)
    meta = [
        ("shift", str(shift)),
        ("probability", f"{pair.probability:.12g}"),
        ("concurrence", f"{concurrence(pair):.12g}"),
        ("norm_deficit", f"{1.0 - state.norm():.12g}"),
    ]
    for (a1, a2), z in zip(((1, 1), (1, 2), (2, 1), (2, 2)), pair.two_qubit_amplitudes):
        meta.append((f"postselected_a{a1}{a2}", f"{z.real:.12g}{z.imag:+.12g}j"))
    return ResultTable(
        ["m", "a1", "a2", "levels", "re", "im", "abs2"],
        ["1", "1", "1", "1", "1", "1", "1"],
        rows,
        meta,
        PlotHint("m", ("abs2",), group="levels", logy=True, title="joint-state weights by electron shift"),
    )


def run_phase_budget(cfg):
    kin, tls = _kinematics(cfg), _emitter(cfg)
    de, dth = cfg["phase.delta_e_ev"], cfg.si("phase.delta_theta_mrad")
    lps = _sweep(cfg, 1.0, 20.0, 20, "linear")
    rows = []
    for lp in lps:
        b = phase_uncertainty(kin, tls, lp * 1e-3, de, dth)
        rows.append([lp, b.energy_spread_term, b.divergence_term, b.total, b.energy_spread_term / (2 * math.pi), b.divergence_term / (2 * math.pi)])
    here = phase_uncertainty(kin, tls, cfg.si("modulation.l_p_mm"), de, dth)
    meta = [
        ("energy_spread_term_turns", f"{here.energy_spread_term / (2 * math.pi):.12g}"),
        ("divergence_term_turns", f"{here.divergence_term / (2 * math.pi):.12g}"),
        ("total_rad", f"{here.total:.12g}"),
    ]
    return ResultTable(
        ["L_p_mm", "energy_spread_term", "divergence_term", "total", "energy_spread_turns", "divergence_turns"],
        ["mm", "rad", "rad", "rad", "1", "1"],
        rows,
        meta,
        PlotHint("L_p_mm", ("energy_spread_term", "divergence_term", "total"), title="drift-phase jitter budget"),
    )


RUNNERS = {
    "coupling": run_coupling,
    "spectrum": run_spectrum,
    "eels": run_eels,
    "sweep-lp": run_sweep_lp,
    "sweep-gm": run_sweep_gm,
    "steady": run_steady,
    "rabi": run_rabi,
    "entangle": run_entangle,
    "phase-budget": run_phase_budget,
}


def run(cfg):
    """Execute a scenario and attach the resolved configuration to its table."""
    table = RUNNERS[cfg.scenario](cfg)
    header = [("febe_version", __version__)] + [
        ("config." + line.split(" = ", 1)[0], line.split(" = ", 1)[1]) for line in cfg.resolved_lines()
    ]
    table.metadata = header + table.metadata
    return table


def build_parser():
    p = argparse.ArgumentParser(prog="febe", description="Free-electron / two-level-emitter scenarios.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write <scenario>.svg")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(args.scenario, text, args.overrides, filename=args.config or "<config>")
    except ValidationFailure as exc:
        print(f"febe: validation error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"febe: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run(cfg)
    except (FebeError, ValueError, ArithmeticError) as exc:
        print(f"febe: {cfg.scenario}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    os.makedirs(args.out, exist_ok=True)
    table.write_csv(os.path.join(args.out, f"{cfg.scenario}.csv"))
    with open(os.path.join(args.out, "resolved-config.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(cfg.resolved_lines()) + "\n")
    if args.svg:
        with open(os.path.join(args.out, f"{cfg.scenario}.svg"), "w", encoding="utf-8") as fh:
            fh.write(render_svg(table))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
