"""Acceptance suite: one timed check per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from dimergate.cli import chirality_scan, chirality_zero_crossings
from dimergate.evolve import dynamical_phase, geometric_phase, propagate, run_gate, wrap_phase
from dimergate.exchange import calibrate_sweep_u, direct_sqrt_swap, sensitivity_scan, superexchange_sqrt_swap
from dimergate.lattice import LATTICE_PRESETS, extract_tight_binding
from dimergate.model import (
    BasisTag,
    HubbardParams,
    basis_state,
    bosonic_dark_vector,
    build_h_bosonic,
    build_h_singlet,
    build_h_spin6,
    i_minus,
    i_plus,
)
from dimergate.noise import NoiseModel, noisy_gate_fidelity
from dimergate.readout import fidelity_from_decay, fit_sto, sinusoid
from dimergate.schedules import LinearBiasSweep
from dimergate.symmetry import check_chiral, zero_mode_count

SPIN = BasisTag.SPIN_FERMIONIC6


@pytest.fixture
def report(capsys):
    """Run a criterion body, time it and print one PASS/FAIL line."""

    def run(number, title, limit, body):
        start = time.perf_counter()
        failure = None
        try:
            details = body()
        except AssertionError as exc:
            failure, details = exc, str(exc).splitlines()[0] if str(exc) else "assertion failed"
        elapsed = time.perf_counter() - start
        if failure is None and elapsed >= limit:
            failure = AssertionError(f"runtime {elapsed:.2f} s exceeds {limit} s")
        status = "FAIL" if failure else "PASS"
        with capsys.disabled():
            print(f"\n[{status}] criterion {number:>2}: {title} ({elapsed:.2f} s / {limit} s) {details or ''}")
        if failure:
            raise failure

    return run


def test_criterion_01_spectrum_exactness(report):
    def body():
        rng = np.random.default_rng(1)
        worst = 0.0
        for t, d in zip(rng.uniform(1e-2, 1e4, 1000), rng.uniform(-1e4, 1e4, 1000)):
            evals = np.linalg.eigvalsh(build_h_singlet(HubbardParams(t, d)).matrix)
            e = 2 * math.hypot(t, d)
            worst = max(worst, float(np.max(np.abs(evals - [-e, 0.0, e])) / e))
        assert worst < 1e-10, f"worst relative error {worst:.2e}"
        return f"worst rel err {worst:.1e}"

    report(1, "spectrum exactness", 1.0, body)


def test_criterion_02_holonomy_quantisation(report):
    def body():
        sweep = LinearBiasSweep()
        gamma = geometric_phase(sweep, points=4096)
        delta = dynamical_phase(sweep)
        assert abs(wrap_phase(gamma - math.pi)) < 1e-6, f"gamma = {gamma}"
        assert abs(delta) < 1e-8, f"dynamical phase = {delta}"
        return f"gamma - pi = {wrap_phase(gamma - math.pi):.1e}"

    report(2, "holonomy quantisation", 1.0, body)


def test_criterion_03_swap_reproduction(report):
    def body():
        sweep = LinearBiasSweep()
        gate = run_gate(sweep)
        site = BasisTag.SITE_FERMIONIC6
        idx = [0, 2, 3, 5]
        overlap = abs(np.vdot(i_plus(site).amplitudes[idx], gate.u_computational @ i_minus(site).amplitudes[idx]))
        drift = 0.0
        for label in ("t+", "t0", "t-"):
            psi = basis_state(SPIN, label)
            final, _ = propagate(sweep, psi)
            drift = max(drift, float(np.max(np.abs(final.amplitudes - psi.amplitudes))))
        assert gate.process_fidelity > 0.9999, f"fidelity {gate.process_fidelity}"
        assert overlap > 0.9999, f"overlap {overlap}"
        assert drift < 1e-12, f"triplet drift {drift}"
        return f"F = {gate.process_fidelity:.6f}, overlap = {overlap:.6f}"

    report(3, "SWAP reproduction", 5.0, body)


def test_criterion_04_alpha_calibration(report):
    def body():
        sweep = LinearBiasSweep()
        u_values = list(sweep.t_max * np.linspace(-1.0, 1.0, 21))
        kappas = chirality_scan(sweep, u_values, steps=2048)
        crossings = chirality_zero_crossings(sweep, u_values, kappas, steps=2048, xtol=1e-3 * sweep.t_max)
        # independent route: U at which the exchange phase integral reaches -+pi/2
        oracle = [calibrate_sweep_u(sweep, a).u for a in (0.5, -0.5)]
        assert len(crossings) == 2, f"crossings {crossings}"
        errs = [min(abs(c / o - 1) for c in crossings) for o in oracle]
        k0 = kappas[u_values.index(0.0)] if 0.0 in u_values else kappas[len(kappas) // 2]
        assert max(errs) < 0.02, f"crossings {crossings} vs oracle {oracle}"
        assert abs(abs(k0) - 0.5) < 1e-3, f"kappa(0) = {k0}"
        return f"crossings {[round(c, 1) for c in sorted(crossings)]} vs {[round(o, 1) for o in sorted(oracle)]}"

    report(4, "alpha calibration", 60.0, body)


def test_criterion_05_noise_plateau(report):
    def body():
        geo = LinearBiasSweep()
        f0 = noisy_gate_fidelity(geo, NoiseModel(0.0, seed=11), n_gates=16, n_trials=1).mean
        drops = []
        for pct in (1, 2, 3, 4, 5):
            res = noisy_gate_fidelity(geo, NoiseModel(pct / 100, seed=11), n_gates=16, n_trials=200)
            drops.append(100 * (f0 - res.mean))
        assert max(drops) < 0.5, f"geometric drops {drops} pp"

        def drop(schedule, amplitude):
            clean = noisy_gate_fidelity(schedule, NoiseModel(0.0, seed=13), n_gates=8, n_trials=1, target_alpha=0.5)
            noisy = noisy_gate_fidelity(schedule, NoiseModel(amplitude, seed=13), n_gates=8, n_trials=200, target_alpha=0.5)
            return 100 * (clean.mean - noisy.mean)

        direct = drop(direct_sqrt_swap(), 0.03)
        sup = drop(superexchange_sqrt_swap(), 0.03)
        assert direct < 0.5, f"direct drop {direct} pp at 3%"
        assert sup > direct, f"superexchange drop {sup} pp not above direct {direct} pp"
        return f"geometric max drop {max(drops):.3f} pp, 3%: direct {direct:.3f} pp < superexchange {sup:.3f} pp"

    report(5, "noise plateau", 600.0, body)


def test_criterion_06_sensitivity_integrals(report):
    def body():
        d = sensitivity_scan(direct_sqrt_swap()).symmetric_variation
        s = sensitivity_scan(superexchange_sqrt_swap()).symmetric_variation
        assert abs(d - 4.4) <= 1.5, f"direct {d:.2f}%"
        assert abs(s - 17.6) <= 3.0, f"superexchange {s:.2f}%"
        return f"direct +-{d:.2f}%, superexchange +-{s:.2f}%"

    report(6, "sensitivity integrals", 10.0, body)


def test_criterion_07_lattice_extraction(report):
    def body():
        depths = LATTICE_PRESETS["fig3a-geometric-swap"]
        stag = extract_tight_binding(depths.at_phase(math.pi / 2))
        dim = extract_tight_binding(depths.at_phase(0.0))
        assert 2000 <= abs(stag.delta) <= 8000, f"staggered delta {stag.delta}"
        assert 100 / 3 <= stag.t <= 300, f"staggered t {stag.t}"
        assert 1500 <= dim.t <= 6000, f"dimerised t {dim.t}"
        assert abs(dim.delta) < 1e-6 * dim.t, f"dimerised delta {dim.delta}"
        return f"staggered delta {stag.delta:.0f} Hz t {stag.t:.1f} Hz, dimerised t {dim.t:.0f} Hz"

    report(7, "lattice extraction", 30.0, body)


def test_criterion_08_symmetry_suite(report):
    def body():
        rng = np.random.default_rng(8)
        for t, d, u in zip(rng.uniform(1, 5000, 100), rng.uniform(-5000, 5000, 100), rng.uniform(-3000, 3000, 100)):
            free = build_h_spin6(HubbardParams(t, d))
            assert check_chiral(free) <= 1e-12, "chiral residual at U = 0"
            assert check_chiral(build_h_spin6(HubbardParams(t, d, u))) == pytest.approx(2 * abs(u), rel=1e-12)
            assert zero_mode_count(free) == 4, "zero modes at U = 0"
            assert zero_mode_count(build_h_spin6(HubbardParams(t, d, u))) == 3, "zero modes at U != 0"
            evals = np.sort(np.linalg.eigvalsh(free.matrix))
            assert np.allclose(evals, -evals[::-1], atol=1e-12 * max(t, abs(d))), "spectral pairing"
        return "100 draws"

    report(8, "symmetry suite", 1.0, body)


def test_criterion_09_readout_pipeline(report):
    def body():
        n = np.array([0, 10, 20, 40, 60, 80, 100])
        rep = fidelity_from_decay(n, 0.5 * 0.995**n, np.full(len(n), 0.5))
        assert rep.f_raw == pytest.approx(0.995, rel=1e-10), f"f_raw {rep.f_raw}"
        rng = np.random.default_rng(9)
        times = np.linspace(0, 0.02, 100)
        truth = (0.3, 140.0, 0.4, 0.5)
        fits = [fit_sto(times, sinusoid(times, *truth) + rng.normal(0, 0.02, 100), sigma=np.full(100, 0.02)) for _ in range(200)]
        ratios = {}
        for i, key in enumerate(("amplitude", "frequency", "phase", "offset")):
            spread = np.std([(f.amplitude, f.frequency, f.phase, f.offset)[i] for f in fits])
            ratios[key] = spread / np.mean([f.errors[key] for f in fits])
            assert 0.5 < ratios[key] < 2.0, f"{key} spread/predicted {ratios[key]:.2f}"
        return "spread/predicted " + ", ".join(f"{k} {v:.2f}" for k, v in ratios.items())

    report(9, "readout pipeline", 60.0, body)


def test_criterion_10_bosonic_duality(report):
    def body():
        rng = np.random.default_rng(10)
        for t, d, u in zip(rng.uniform(1, 5000, 100), rng.uniform(-5000, 5000, 100), rng.uniform(-3000, 3000, 100)):
            h = build_h_bosonic(HubbardParams(t, d, u), BasisTag.BOSONIC_SPIN4).matrix
            assert np.all(h[3, :] == 0) and np.all(h[:, 3] == 0), "|s> couples"
            block = build_h_bosonic(HubbardParams(t, d), BasisTag.BOSONIC_SPIN4).matrix[:3, :3]
            w, v = np.linalg.eigh(block)
            zero = v[:, int(np.argmin(np.abs(w)))]
            dark = bosonic_dark_vector(2 * math.atan2(t, -d)).amplitudes[:3]
            assert abs(abs(np.vdot(dark, zero)) - 1) < 1e-12, "dark composition"
            assert abs(zero[1]) < 1e-12, "dark state populates D+"
        return "100 draws"

    report(10, "bosonic duality", 1.0, body)
