from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimergate.errors import PreconditionError
from dimergate.evolve import run_gate
from dimergate.model import BasisTag, HubbardParams, StateVector, basis_state, dark_state, dark_vector, i_minus, i_plus
from dimergate.readout import (
    StoConfig,
    alpha_from_chirality,
    apply_sto,
    computational_state,
    fidelity_from_decay,
    fit_sto,
    remove_doublons,
    simulate_sto_trace,
    sinusoid,
    spin_chirality,
    state_fractions,
)
from dimergate.schedules import LinearBiasSweep

SPIN = BasisTag.SPIN_FERMIONIC6
SITE = BasisTag.SITE_FERMIONIC6
STO = StoConfig(140.0, tuple(np.linspace(0.0, 2 / 140.0, 81)))


def test_state_fraction_examples():
    assert state_fractions(basis_state(SPIN, "D-"))["doublon"] == 1
    f = state_fractions(dark_state(HubbardParams(1.0, 0.0)).vector)
    assert f["doublon"] == pytest.approx(1) and f["singlet"] == pytest.approx(0, abs=1e-30)
    f = state_fractions(dark_vector(math.pi / 2))
    assert f["singlet"] == pytest.approx(0.5) and f["doublon"] == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        state_fractions(StateVector(np.ones(6), SPIN))


@settings(max_examples=50)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_fractions_conserve_probability(raw):
    v = np.array(raw[:6]) + 1j * np.array(raw[6:])
    psi = StateVector(v / np.linalg.norm(v), SITE)
    f = state_fractions(psi)
    assert all(0 <= x <= 1 + 1e-12 for x in f.values())
    assert sum(f.values()) == pytest.approx(1.0, abs=1e-10)


def test_sto_rotation_examples():
    s = basis_state(SPIN, "s")
    assert np.allclose(apply_sto(s, STO, 0.0).amplitudes, s.amplitudes)
    quarter = apply_sto(s, STO, STO.period / 4)
    assert abs(abs(quarter.overlap(i_minus())) - 1) < 1e-12
    assert STO.period / 4 == pytest.approx(1.8e-3, rel=0.02)
    half = apply_sto(s, STO, STO.period / 2)
    assert abs(abs(half.amplitude("t0")) - 1) < 1e-12
    with pytest.raises(PreconditionError):
        apply_sto(basis_state(SPIN, "D+"), STO, 1e-3)


def test_doublon_removal_projects_and_renormalises():
    psi = dark_vector(math.pi / 2)
    out = remove_doublons(psi)
    assert abs(out.amplitude("s")) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        remove_doublons(basis_state(SPIN, "D-"))


def test_traces_of_equatorial_states_are_antiphased():
    a = fit_sto(*(lambda tr: (tr.times, tr.singlet))(simulate_sto_trace(i_minus(), STO)))
    b = fit_sto(*(lambda tr: (tr.times, tr.singlet))(simulate_sto_trace(i_plus(), STO)))
    assert abs(abs(math.remainder(a.phase - b.phase, 2 * math.pi)) - math.pi) < 1e-8
    assert a.amplitude == pytest.approx(b.amplitude, abs=1e-9)


def test_singlet_trace_starts_at_maximum():
    tr = simulate_sto_trace(basis_state(SPIN, "s"), STO)
    assert tr.singlet[0] == pytest.approx(1.0) and tr.singlet[0] == tr.singlet.max()


def test_triplet_zero_trace_starts_at_minimum():
    tr = simulate_sto_trace(basis_state(SPIN, "t0"), STO)
    assert tr.singlet[0] == pytest.approx(0.0) and tr.singlet[0] == tr.singlet.min()


def test_polarised_triplet_trace_is_flat():
    tr = simulate_sto_trace(basis_state(SPIN, "t+"), STO)
    assert np.all(tr.singlet == 0)
    fit = fit_sto(tr.times, tr.singlet, frequency=140.0)
    assert fit.amplitude == pytest.approx(0.0, abs=1e-12) and fit.degenerate_phase


def test_noisy_trace_is_seeded():
    a = simulate_sto_trace(i_minus(), STO, sigma=0.02, seed=3)
    b = simulate_sto_trace(i_minus(), STO, sigma=0.02, seed=3)
    assert np.array_equal(a.singlet, b.singlet) and np.all(a.sigma == 0.02)


def test_fit_recovers_noiseless_sinusoid():
    times = np.linspace(0, 0.02, 60)
    fit = fit_sto(times, sinusoid(times, 0.3, 140.0, 0.4, 0.5))
    for got, want in zip((fit.amplitude, fit.frequency, fit.phase, fit.offset), (0.3, 140.0, 0.4, 0.5)):
        assert got == pytest.approx(want, rel=1e-8)
    assert np.all(np.linalg.eigvalsh(fit.covariance) >= -1e-20)


def test_fit_normalises_sign_and_phase():
    times = np.linspace(0, 0.02, 60)
    fit = fit_sto(times, sinusoid(times, -0.3, 140.0, 0.4, 0.5))
    assert fit.amplitude > 0
    assert fit.phase == pytest.approx(0.4 - math.pi, abs=1e-8)


def test_fit_preconditions():
    with pytest.raises(PreconditionError):
        fit_sto(np.linspace(0, 1e-3, 4), np.zeros(4))
    times = np.linspace(0, 1e-3, 40)
    with pytest.raises(PreconditionError, match="half an oscillation"):
        fit_sto(times, sinusoid(times, 0.3, 140.0, 0.4, 0.5))


def test_fit_uncertainty_calibration():
    rng = np.random.default_rng(11)
    times = np.linspace(0, 0.02, 100)
    truth = np.array([0.3, 140.0, 0.4, 0.5])
    fits = [fit_sto(times, sinusoid(times, *truth) + rng.normal(0, 0.02, 100), sigma=np.full(100, 0.02)) for _ in range(200)]
    for i, key in enumerate(("amplitude", "frequency", "phase", "offset")):
        spread = np.std([(f.amplitude, f.frequency, f.phase, f.offset)[i] for f in fits])
        predicted = np.mean([f.errors[key] for f in fits])
        assert 0.5 < spread / predicted < 2.0


def test_decay_inversion_exact():
    n = np.array([0, 10, 20, 40, 60, 80, 100])
    rep = fidelity_from_decay(n, np.exp(-n / 200), np.full(len(n), 0.5))
    assert rep.f_raw == pytest.approx(math.exp(-1 / 200), rel=1e-10)
    assert rep.n_e == pytest.approx(200, rel=1e-8)
    assert rep.f_surv == 1 and rep.f_corr == rep.f_raw and rep.reliable


def test_decay_with_offsets_and_loss_correction():
    n = np.array([0, 10, 20, 40, 60, 80, 100])
    rep = fidelity_from_decay(n, 0.5 * np.exp(-n / 200), 0.5 * np.exp(-n / 1000))
    assert rep.f_surv == pytest.approx(math.exp(-1 / 1000), rel=1e-9)
    assert rep.f_corr == pytest.approx(rep.f_raw / rep.f_surv)


def test_decay_resolution_at_experimental_grid():
    rng = np.random.default_rng(0)
    n = np.array([0, 10, 20, 40, 60, 80, 100])
    amps = 0.5 * 0.995**n + rng.normal(0, 0.005, len(n))
    rep = fidelity_from_decay(n, amps, sigma_amplitudes=np.full(len(n), 0.005))
    assert abs(rep.f_raw - 0.995) < 0.002
    assert rep.errors["f_raw"] <= 1e-3


def test_decay_flags_bad_data():
    rep = fidelity_from_decay([0, 1, 2, 3], [0.5, 0.6, 0.7, 0.8])
    assert not rep.reliable and rep.notes
    with pytest.raises(PreconditionError):
        fidelity_from_decay([0, 1], [1.0, 0.9])


def test_chirality_examples():
    assert spin_chirality(i_minus()) == pytest.approx(0.5)
    assert spin_chirality(i_plus()) == pytest.approx(-0.5)
    for label in ("s", "t0", "t+"):
        assert spin_chirality(basis_state(SPIN, label)) == pytest.approx(0.0, abs=1e-15)
    for label in ("u,d", "d,u", "uu"):
        assert spin_chirality(basis_state(SITE, label)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(PreconditionError):
        spin_chirality(StateVector(np.ones(6), SITE))


def test_alpha_from_chirality_examples():
    assert alpha_from_chirality(0.5) == pytest.approx(1.0)
    assert alpha_from_chirality(0.0, 1) == pytest.approx(0.5)
    assert alpha_from_chirality(0.0, -1) == pytest.approx(-0.5)
    assert alpha_from_chirality(-0.5) == pytest.approx(0.0)
    with pytest.raises(PreconditionError):
        alpha_from_chirality(0.6)


def test_chirality_flips_under_swap():
    report = run_gate(LinearBiasSweep())
    assert spin_chirality(computational_state(report.u_computational)) == pytest.approx(-0.5, abs=1e-3)
