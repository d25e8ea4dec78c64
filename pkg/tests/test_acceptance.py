"""End-to-end acceptance checks; each prints one PASS/FAIL line in the terminal summary."""

import filecmp
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from snspd_optics.analysis import absorbance, pol_contrast, predicted_sde
from snspd_optics.cli import report_figures
from snspd_optics.metrology import (
    MeasurementRecord,
    PowerReading,
    RatioReading,
    StokesCounts,
    Unpolarized,
    budget,
    optimal_polarization,
    sde,
    stokes_from_counts,
    synthesize_measurement,
)
from snspd_optics.rcwa import rcwa_response
from snspd_optics.stack import PRESETS, Excitation, preset
from snspd_optics.tmm import spectral_sweep, tmm_response


def check(name, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


def eta(stack, wl, pol, n=15):
    return absorbance(rcwa_response(stack, Excitation(wl, pol), n), stack.absorber_indices())


def test_c01_mirror_band():
    t0 = time.perf_counter()
    r_min = min(r.R for _, r in spectral_sweep(preset("mirror13"), 1350, 1800, 1))
    dt = time.perf_counter() - t0
    check("1 mirror band", r_min >= 0.97 and dt < 5, f"min R {r_min:.5f} over 1350-1800 nm, {dt:.2f} s")


def test_c02_planar_minimum():
    t0 = time.perf_counter()
    sweep = spectral_sweep(preset("single-planar"), 1350, 1800, 1)
    wl, r = min(sweep, key=lambda p: p[1].R)
    dt = time.perf_counter() - t0
    ok = abs(wl - 1562) <= 20 and 0.02 <= r.R <= 0.09 and dt < 5
    check("2 planar minimum", ok, f"R_min {r.R:.5f} at {wl:g} nm, {dt:.2f} s")


def test_c03_rcwa_tmm_oracle():
    worst = 0.0
    for name in PRESETS:
        s = preset(name).with_fill_factor(1.0)
        for wl in np.linspace(1350, 1800, 20):
            for pol in ("TE", "TM"):
                a = rcwa_response(s, Excitation(wl, pol), 5)
                b = tmm_response(s.planarized(), Excitation(wl, pol))
                diffs = [abs(a.R - b.R), abs(a.T - b.T)]
                diffs += [abs(x - y) for x, y in zip(a.absorbance_per_layer, b.absorbance_per_layer)]
                worst = max(worst, *diffs)
    check("3 rcwa-tmm oracle", worst <= 1e-8, f"max deviation {worst:.2e}")


def test_c04_energy_conservation():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for name in PRESETS:
        for pol in ("TE", "TM"):
            for wl in rng.uniform(1350, 1800, 50):
                r = rcwa_response(preset(name), Excitation(wl, pol), 15)
                worst = max(worst, abs(r.R + r.T + r.A - 1))
    check("4 energy conservation", worst <= 1e-6, f"max |R+T+A-1| {worst:.2e}")


def test_c05_convergence():
    s = preset("bilayer-device")
    t0 = time.perf_counter()
    d = {p: abs(eta(s, 1550, p, 15) - eta(s, 1550, p, 25)) for p in ("TE", "TM")}
    dt = time.perf_counter() - t0
    ok = d["TE"] <= 1e-3 and d["TM"] <= 5e-3 and dt < 60
    check("5 convergence", ok, f"dA TE {d['TE']:.1e}, TM {d['TM']:.1e}, {dt:.1f} s")


def test_c06_bandwidth():
    bi = preset("bilayer-device")
    band = min(eta(bi, wl, "TE") for wl in range(1470, 1651, 5))
    single = preset("single-device")
    window = min(eta(single.with_fill_factor(ff), 1550, "TE") for ff in np.linspace(0.58, 0.75, 9))
    check("6 bandwidth", band >= 0.98 and window >= 0.98, f"bilayer min {band:.4f}, single ff-window min {window:.4f}")


def test_c07_polarization_crossing():
    s = preset("single-device")
    wls = np.arange(1560, 1601, 5.0)
    c = [pol_contrast(eta(s, wl, "TE"), eta(s, wl, "TM")) for wl in wls]
    changes = [float(wls[i]) for i in range(len(c) - 1) if c[i] * c[i + 1] < 0]
    check("7 polarization crossing", bool(changes), f"sign change after {changes} nm, C_pol {c[0]:+.4f} .. {c[-1]:+.4f}")


def test_c08_tm_penalty():
    s = preset("bilayer-device")
    gap = np.mean([eta(s, wl, "TE") - eta(s, wl, "TM") for wl in range(1450, 1641, 10)])
    check("8 TM penalty", 0.18 <= gap <= 0.40, f"mean TE-TM {gap:.4f}")


def table_record(pcr, p, alpha, rsw, wavelength):
    att_u = math.sqrt(alpha**2 - p**2)
    return MeasurementRecord(
        wavelength,
        1.0 / pcr**2,
        (0.0, 0.0, 0.0),
        PowerReading(1e-4, rel_uncertainty=p),
        tuple(PowerReading(7e-8, rel_uncertainty=att_u) for _ in range(3)),
        RatioReading(0.5, rsw),
    )


def test_c09_uncertainty_budget():
    t0 = time.perf_counter()
    u1550 = 100 * budget(table_record(0.0035, 0.0039, 0.0055, 0.0053, 1550)).combined
    u1640 = [100 * budget(table_record(pcr, 0.0048, 0.0070, 0.0065, 1640)).combined for pcr in (0.0035, 0.0039)]
    dt = time.perf_counter() - t0
    ok = 1.20 <= u1550 <= 1.22 and all(1.48 <= u <= 1.52 for u in u1640) and dt < 1
    check("9 uncertainty budget", ok, f"1550 {u1550:.4f} %, 1640 {u1640[0]:.4f} / {u1640[1]:.4f} %")


def test_c10_round_trip():
    exact = sde(synthesize_measurement(0.925, 1e5, 300.0))[0]
    vals = np.array([sde(synthesize_measurement(0.925, 1e5, 300.0, "poisson", s))[0] for s in range(100)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    ok = abs(exact - 0.925) <= 1e-12 and abs(vals.mean() - 0.925) <= 3 * se
    check("10 metrology round trip", ok, f"exact error {abs(exact - 0.925):.1e}, poisson mean {vals.mean():.5f} (se {se:.1e})")


PURE = {
    "H": ((1000, 0, 500, 500, 500, 500), 0.0, 0.0),
    "V": ((0, 1000, 500, 500, 500, 500), math.pi / 2, 0.0),
    "D": ((500, 500, 1000, 0, 500, 500), math.pi / 4, 0.0),
    "A": ((500, 500, 0, 1000, 500, 500), 3 * math.pi / 4, 0.0),
    "RHC": ((500, 500, 500, 500, 1000, 0), None, math.pi / 4),
    "LHC": ((500, 500, 500, 500, 0, 1000), None, -math.pi / 4),
}


def test_c11_stokes_suite():
    bad = []
    for label, (counts, psi, chi) in PURE.items():
        sol = optimal_polarization(*stokes_from_counts(StokesCounts(*counts)))
        good = abs(sol.p - 1) <= 1e-12 and abs(sol.chi - chi) <= 1e-12
        if psi is not None:
            good &= abs(sol.psi - psi) <= 1e-12
        if not good:
            bad.append(label)
    try:
        optimal_polarization(*stokes_from_counts(StokesCounts(*[300] * 6)))
        unpolarized = False
    except Unpolarized:
        unpolarized = True
    k_rule = optimal_polarization(1000, -500, 500, 0).psi == 3 * math.pi / 8
    ok = not bad and unpolarized and k_rule
    check("11 stokes suite", ok, f"pure-state failures {bad}, unpolarized raised {unpolarized}, k-rule exact {k_rule}")


def test_c12_determinism(tmp_path):
    a = report_figures("bilayer", tmp_path / "a")
    b = report_figures("bilayer", tmp_path / "b")
    names = [p.name for p in a]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    ok = names == [p.name for p in b] and not mismatch and not errors
    check("12 determinism", ok, f"{len(match)} of {len(names)} files byte-identical")


def test_note_predicted_sde():
    vals = {name: predicted_sde(eta(preset(name), 1550, "TE")) for name in ("single-device", "bilayer-device")}
    ok = all(0.90 <= v <= 0.93 for v in vals.values())
    check("note predicted SDE", ok, ", ".join(f"{k} {v:.4f}" for k, v in vals.items()))
