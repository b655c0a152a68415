"""Exchange energies of the singlet-sector level and their sensitivity to tunnelling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import PreconditionError, TrackingError
from .model import HubbardParams, singlet_blocks
from .schedules import BlackmanBarrier, LinearBiasSweep, RampSchedule

class Regime(enum.Enum):
    DIRECT = "Direct"
    SUPEREXCHANGE = "Superexchange"


def exact_e_psi_many(t, delta, u) -> np.ndarray:
    """Exchange energy E_t0 - E_n of the level connected to |s>, vectorised.

    Each (t, delta, u) is reached from the staggered point (0, -r, u) with
    r = sqrt(t^2 + delta^2) by rotating the mixing angle at fixed r and u.
    At that start |s> is an exact eigenstate at energy 0, between the doublons
    at u +- 2r.  The rotation has no true level crossing (the only decoupled
    level, at delta = 0, sits at u and never meets the other two while r > 0),
    so adiabatic continuation keeps the level's position in the sorted spectrum.
    """
    t, delta, u = np.broadcast_arrays(*(np.asarray(x, float) for x in (t, delta, u)))
    shape = t.shape
    t, delta, u = t.ravel(), delta.ravel(), u.ravel()
    out = np.zeros(t.shape)
    live = (u != 0) & (t != 0)
    if not np.any(live):
        return out.reshape(shape)
    tl, dl, ul = t[live], delta[live], u[live]
    r = np.hypot(tl, dl)
    degenerate = np.isclose(np.abs(ul), 2 * r, rtol=1e-12, atol=0.0)
    if np.any(degenerate):
        k = int(np.argmax(degenerate))
        raise TrackingError(
            f"|s> is degenerate with a doublon level at the staggered start (t={tl[k]}, delta={dl[k]}, u={ul[k]})"
        )
    # ascending order: |s> is the middle level for |u| < 2r, lowest for u > 2r, highest for u < -2r
    rank = np.where(np.abs(ul) < 2 * r, 1, np.where(ul > 0, 0, 2))
    evals = np.linalg.eigvalsh(singlet_blocks(tl, dl, ul))
    out[live] = -evals[np.arange(len(tl)), rank]
    return out.reshape(shape)


def exact_e_psi(p: HubbardParams) -> float:
    """Exchange energy of the singlet-connected level (positive when it lies below the triplets)."""
    return float(exact_e_psi_many(p.t, p.delta, p.u))


def j_direct(p: HubbardParams) -> float:
    """Direct-exchange closed form U / ((delta/t)^2 - 1)."""
    if p.t == 0:
        raise PreconditionError("j_direct: delta/t undefined at t = 0")
    den = (p.delta / p.t) ** 2 - 1
    if den == 0:
        raise PreconditionError("j_direct: singular denominator (delta/t)^2 - 1 = 0")
    return p.u / den


def j_direct_first_order(p: HubbardParams) -> float:
    """First-order exchange -U t^2 / (t^2 + delta^2) from the dark state's doublon weight."""
    r2 = p.t**2 + p.delta**2
    if r2 == 0:
        raise PreconditionError("j_direct_first_order: undefined at t = delta = 0")
    return -p.u * p.t**2 / r2


def j_superexchange(p: HubbardParams) -> float:
    """Superexchange 4 t^2 / (U (1 - (2 delta / U)^2))."""
    if p.u == 0:
        raise PreconditionError("j_superexchange: singular denominator, U = 0")
    den = p.u * (1 - (2 * p.delta / p.u) ** 2)
    if den == 0:
        raise PreconditionError("j_superexchange: singular denominator 1 - (2 delta/U)^2 = 0")
    return 4 * p.t**2 / den


@dataclass
class ExchangeCurve:
    taus: np.ndarray
    ratio: np.ndarray
    e_psi: np.ndarray
    regime: Regime
    phase: float

    def rows(self):
        return zip(self.taus, self.ratio, self.e_psi)


def infer_regime(schedule: RampSchedule) -> Regime:
    if isinstance(schedule, BlackmanBarrier):
        return Regime.SUPEREXCHANGE
    return Regime.DIRECT


def exchange_curve(schedule: RampSchedule, regime: Regime | None = None, points: int = 2049) -> ExchangeCurve:
    """Sample E_psi along the schedule and integrate the dynamical phase 2 pi * int E dtau."""
    if points % 2 == 0:
        points += 1
    taus = np.linspace(0.0, schedule.duration, points)
    t, d, u = schedule.arrays(taus)
    e = exact_e_psi_many(t, d, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t > 0, d / np.where(t > 0, t, 1.0), np.copysign(np.inf, d))
    phase = float(2 * np.pi * simpson(e, x=taus)) if schedule.duration > 0 else 0.0
    return ExchangeCurve(taus, ratio, e, regime or infer_regime(schedule), phase)


def integrated_exchange(schedule: RampSchedule, points: int = 2049) -> float:
    """int E_psi dtau in cycles (Hz * s)."""
    return exchange_curve(schedule, points=points).phase / (2 * np.pi)


@dataclass
class SensitivityResult:
    regime: Regime
    parameter: str
    factors: np.ndarray
    integrals: np.ndarray
    nominal: float
    variations: np.ndarray

    @property
    def max_variation(self) -> float:
        """Largest |variation| in percent."""
        return float(np.max(np.abs(self.variations)))

    @property
    def symmetric_variation(self) -> float:
        """Half the spread between the outermost factors, in percent.

        This is the linear response quoted as a +- figure.
        """
        lo, hi = int(np.argmin(self.factors)), int(np.argmax(self.factors))
        return float(abs(self.variations[hi] - self.variations[lo]) / 2)

    @property
    def coefficient(self) -> float:
        """Relative change of the exchange integral per relative change of the parameter."""
        span = float(np.max(self.factors) - np.min(self.factors))
        if span == 0:
            return 0.0
        return self.symmetric_variation / 100.0 / (span / 2)


def sensitivity_scan(
    schedule: RampSchedule,
    regime: Regime | None = None,
    factors=(0.9, 1.0, 1.1),
    points: int = 2049,
    parameter: str = "t",
) -> SensitivityResult:
    """Percentage change of int E_psi dtau when the whole t(tau) profile (or U) is scaled."""
    factors = np.asarray(factors, float)
    if parameter == "t":
        scale = schedule.scaled
    elif parameter == "u":
        def scale(f):
            return schedule.with_u(schedule.u * f)
    else:
        raise PreconditionError(f"unknown sensitivity parameter {parameter!r}")
    nominal = integrated_exchange(schedule, points)
    if nominal == 0:
        raise PreconditionError("nominal exchange integral vanishes; relative variation undefined")
    integrals = np.array([integrated_exchange(scale(f), points) for f in factors])
    return SensitivityResult(
        regime or infer_regime(schedule),
        parameter,
        factors,
        integrals,
        nominal,
        100.0 * (integrals - nominal) / nominal,
    )


def calibrate_barrier_duration(barrier: BlackmanBarrier, alpha: float = 0.5, points: int = 2049) -> BlackmanBarrier:
    """Set the pulse length so that the exchange phase 2 pi * int J dtau equals pi * alpha.

    The window shape is fixed, so the integral is proportional to the duration.
    """
    unit = integrated_exchange(barrier.with_duration(1.0), points)
    if unit == 0 or np.sign(unit) != np.sign(alpha):
        raise PreconditionError("barrier exchange has the wrong sign for the requested alpha")
    return barrier.with_duration(alpha / (2 * unit))


def calibrate_sweep_u(sweep: LinearBiasSweep, alpha: float = 0.5, points: int = 2049) -> LinearBiasSweep:
    """Find U such that the geometric pi plus the dynamical phase gives phi = pi * alpha.

    Searches the root with the smallest |U| on the side fixed by the sign of the
    required dynamical phase.
    """
    target = math.pi * (alpha - 1.0)
    target = math.remainder(target, 2 * math.pi)

    def residual(u, n=points):
        return exchange_curve(sweep.with_u(u), points=n).phase - target

    # bracket and locate the root on a coarse quadrature grid, then polish on the full one
    coarse = min(points, 257)
    sign = -np.sign(target) if target != 0 else 1.0
    r_max = sweep.t_max
    lo, hi = 0.0, sign * 0.05 * r_max
    f_lo, f_hi = residual(lo, coarse), residual(hi, coarse)
    while np.sign(f_hi) == np.sign(f_lo):
        lo, hi, f_lo = hi, hi * 1.5, f_hi
        if abs(hi) > 1.9 * min(sweep.t_max, sweep.delta_stagger):
            raise PreconditionError("no U reaches the requested alpha before the first level crossing")
        f_hi = residual(hi, coarse)
    guess = brentq(residual, lo, hi, args=(coarse,), xtol=1e-6 * r_max)
    width = 1e-3 * abs(guess)
    try:
        root = brentq(residual, guess - width, guess + width, xtol=1e-10 * r_max)
    except ValueError:
        root = brentq(residual, lo, hi, xtol=1e-10 * r_max)
    return sweep.with_u(root)


@lru_cache(maxsize=None)
def direct_sqrt_swap(duration: float = 750e-6) -> LinearBiasSweep:
    """Bias sweep with U calibrated to alpha = 1/2."""
    return calibrate_sweep_u(LinearBiasSweep(duration=duration), 0.5)


@lru_cache(maxsize=None)
def superexchange_sqrt_swap() -> BlackmanBarrier:
    """Zero-bias barrier pulse with its length calibrated to alpha = 1/2."""
    return calibrate_barrier_duration(BlackmanBarrier(), 0.5)
