from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dimergate.errors import PreconditionError, TrackingError
from dimergate.evolve import dynamical_phase, run_gate
from dimergate.exchange import (
    Regime,
    direct_sqrt_swap,
    exact_e_psi,
    exact_e_psi_many,
    exchange_curve,
    integrated_exchange,
    j_direct,
    j_direct_first_order,
    j_superexchange,
    sensitivity_scan,
    superexchange_sqrt_swap,
)
from dimergate.model import HubbardParams
from dimergate.schedules import BlackmanBarrier, LinearBiasSweep


@given(st.floats(1e-2, 1e4), st.floats(-1e4, 1e4))
def test_zero_interaction_gives_zero(t, d):
    assert exact_e_psi(HubbardParams(t, d, 0.0)) == 0.0


def test_limits_at_zero_bias():
    assert exact_e_psi(HubbardParams(1000.0, 0.0, 5.0)) == pytest.approx(-5.0, rel=1e-9)
    assert exact_e_psi(HubbardParams(100.0, 0.0, 1e5)) == pytest.approx(4 * 100.0**2 / 1e5, rel=1e-4)


def test_closed_form_examples():
    assert j_direct(HubbardParams(1.0, 0.0, 0.5)) == -0.5
    assert j_superexchange(HubbardParams(1.0, 0.0, 10.0)) == pytest.approx(0.4)
    assert j_direct(HubbardParams(1.0, 2.0, 3.0)) == pytest.approx(1.0)


def test_closed_form_poles():
    with pytest.raises(PreconditionError, match="delta/t"):
        j_direct(HubbardParams(1.0, 1.0, 1.0))
    with pytest.raises(PreconditionError, match="U = 0"):
        j_superexchange(HubbardParams(1.0, 0.0, 0.0))
    with pytest.raises(PreconditionError, match="2 delta/U"):
        j_superexchange(HubbardParams(1.0, 1.0, 2.0))


@pytest.mark.parametrize("ratio", [0.0, 0.5, 2.0])
def test_first_order_direct_exchange_is_quadratically_close(ratio):
    errs = []
    for u in (10.0, 1.0):
        p = HubbardParams(1000.0, ratio * 1000.0, u)
        errs.append(abs(exact_e_psi(p) - j_direct_first_order(p)) / u)
    assert errs[1] <= errs[0] / 50 or errs[1] < 1e-12


@pytest.mark.parametrize("ratio", [0.0, 2.0])
def test_direct_closed_form_agrees_at_small_u(ratio):
    p = HubbardParams(1000.0, ratio * 1000.0, 0.01)
    assert abs(exact_e_psi(p) - j_direct(p)) / p.u < 1e-3


@pytest.mark.parametrize("bias", [0.0, 0.2])
def test_superexchange_limit(bias):
    rel = []
    for u in (1e4, 1e5, 1e6):
        p = HubbardParams(100.0, bias * u, u)
        rel.append(abs(exact_e_psi(p) / j_superexchange(p) - 1))
    assert rel[0] > rel[1] > rel[2] and rel[2] < 1e-6


def test_sign_follows_interaction():
    p, q = HubbardParams(1000.0, 300.0, 200.0), HubbardParams(1000.0, 300.0, -200.0)
    assert exact_e_psi(p) < 0 < exact_e_psi(q)
    assert exact_e_psi(p) == pytest.approx(-exact_e_psi(q))


def test_log_sensitivities():
    eps = 1e-3
    sup = [exact_e_psi(HubbardParams(100.0 * f, 0.0, 1e5)) for f in (1, 1 + eps)]
    assert math.log(sup[1] / sup[0]) / math.log(1 + eps) == pytest.approx(2.0, abs=1e-3)
    direct = [exact_e_psi(HubbardParams(1000.0 * f, 0.0, 10.0)) for f in (1, 1 + eps)]
    assert abs(math.log(direct[1] / direct[0])) < 1e-9


def test_tracking_ambiguity_reports_location():
    with pytest.raises(TrackingError, match="u=1000"):
        exact_e_psi(HubbardParams(300.0, 400.0, 1000.0))


def test_vectorised_matches_scalar():
    t = np.array([100.0, 1000.0, 2000.0])
    d = np.array([-3000.0, 0.0, 500.0])
    many = exact_e_psi_many(t, d, 400.0)
    assert np.allclose(many, [exact_e_psi(HubbardParams(a, b, 400.0)) for a, b in zip(t, d)])


def test_exchange_curve_and_regime():
    c = exchange_curve(LinearBiasSweep(u=300.0))
    assert c.regime is Regime.DIRECT
    assert c.phase == pytest.approx(2 * math.pi * integrated_exchange(LinearBiasSweep(u=300.0)))
    assert exchange_curve(BlackmanBarrier()).regime is Regime.SUPEREXCHANGE


def test_exchange_curve_matches_path_tracking():
    s = LinearBiasSweep(u=500.0)
    assert exchange_curve(s, points=4097).phase == pytest.approx(dynamical_phase(s), abs=1e-6)


def test_calibrated_direct_gate_is_sqrt_swap():
    sweep = direct_sqrt_swap()
    assert exchange_curve(sweep).phase == pytest.approx(-math.pi / 2, abs=1e-8)
    report = run_gate(sweep, target_alpha=0.5)
    assert report.alpha == pytest.approx(0.5, abs=0.01)
    assert report.process_fidelity > 0.999


def test_calibrated_superexchange_gate_is_sqrt_swap():
    barrier = superexchange_sqrt_swap()
    # no geometric phase without a bias sweep, so the exchange phase alone gives pi/2
    assert abs(exchange_curve(barrier).phase) == pytest.approx(math.pi / 2, abs=1e-8)
    report = run_gate(barrier, target_alpha=0.5)
    assert report.process_fidelity > 0.999


def test_sensitivity_direct():
    res = sensitivity_scan(direct_sqrt_swap())
    assert abs(res.symmetric_variation - 4.4) <= 1.5


def test_sensitivity_superexchange():
    res = sensitivity_scan(superexchange_sqrt_swap())
    assert abs(res.symmetric_variation - 17.6) <= 3.0


def test_sensitivity_unit_factor_is_zero():
    res = sensitivity_scan(LinearBiasSweep(u=300.0), factors=(1.0,))
    assert res.variations[0] == 0.0


def test_superexchange_more_sensitive_than_direct():
    d = sensitivity_scan(direct_sqrt_swap()).coefficient
    s = sensitivity_scan(superexchange_sqrt_swap()).coefficient
    assert s > 2 * d


def tracked_e_psi(t, d, u, steps=256):
    # oracle: follow |s> from the staggered point by maximal-overlap continuation
    r = math.hypot(t, d)
    theta = 2 * math.atan2(t, -d)
    prev = np.array([0.0, 0.0, 1.0])
    for th in np.linspace(0.0, theta, steps):
        h = np.array([[u, 2 * (-r * math.cos(th / 2)), -2 * r * math.sin(th / 2)], [0, u, 0], [0, 0, 0]])
        h = np.triu(h) + np.triu(h, 1).T
        w, v = np.linalg.eigh(h)
        k = int(np.argmax(np.abs(prev @ v)))
        prev = v[:, k] * np.sign(prev @ v[:, k])
    return -w[k]


def test_level_selection_matches_continuation():
    rng = np.random.default_rng(3)
    t, d, u = rng.uniform(1, 3000, 200), rng.uniform(-5000, 5000, 200), rng.uniform(-8000, 8000, 200)
    fast = exact_e_psi_many(t, d, u)
    slow = [tracked_e_psi(*x) for x in zip(t, d, u)]
    assert np.allclose(fast, slow, rtol=1e-9, atol=1e-9)
