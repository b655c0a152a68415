"""Emulated measurement chain: STO rotations, sinusoidal fits, decay fits and spin chirality."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.signal import lombscargle

from .errors import NumericalError, PreconditionError
from .evolve import wrap_phase
from .model import COMPUTATIONAL, BasisTag, StateVector, i_minus

NORM_TOL = 1e-10


def _require_normalised(psi: StateVector) -> None:
    if abs(psi.norm - 1.0) > NORM_TOL:
        raise PreconditionError(f"state is not normalised (norm {psi.norm:.12f})")


def state_fractions(psi: StateVector) -> dict:
    """Populations of |s>, |t0>, the doublons and the polarised triplets."""
    _require_normalised(psi)
    if psi.basis is BasisTag.SINGLET_ONLY3:
        a = np.abs(psi.amplitudes) ** 2
        return {"singlet": a[2], "triplet0": 0.0, "doublon": a[0] + a[1], "t_plus": 0.0, "t_minus": 0.0}
    if psi.basis not in (BasisTag.SITE_FERMIONIC6, BasisTag.SPIN_FERMIONIC6):
        raise PreconditionError("state fractions need a fermionic basis")
    a = np.abs(psi.to(BasisTag.SPIN_FERMIONIC6).amplitudes) ** 2
    return {
        "singlet": float(a[5]),
        "triplet0": float(a[1]),
        "doublon": float(a[3] + a[4]),
        "t_plus": float(a[0]),
        "t_minus": float(a[2]),
    }


@dataclass(frozen=True)
class StoConfig:
    splitting: float = 140.0
    durations: tuple = tuple(np.linspace(0.0, 2 / 140.0, 41))

    def __post_init__(self):
        if self.splitting <= 0:
            raise PreconditionError("STO splitting must be positive")
        object.__setattr__(self, "durations", tuple(float(x) for x in self.durations))

    @property
    def frequency(self) -> float:
        return self.splitting

    @property
    def period(self) -> float:
        return 1.0 / self.splitting


def remove_doublons(psi: StateVector) -> StateVector:
    """Project out doubly occupied sites and renormalise."""
    spin = psi.to(BasisTag.SPIN_FERMIONIC6).amplitudes.copy()
    spin[3:5] = 0.0
    norm = np.linalg.norm(spin)
    if norm == 0:
        raise PreconditionError("no singly occupied population left after doublon removal")
    return StateVector(spin / norm, BasisTag.SPIN_FERMIONIC6)


def apply_sto(psi: StateVector, config: StoConfig, duration: float) -> StateVector:
    """Rotate within span{|s>, |t0>} under the gradient splitting for ``duration``.

    The rotation sense is chosen so that a quarter period maps |s> to |i->.
    Polarised triplets are untouched.
    """
    spin = psi.to(BasisTag.SPIN_FERMIONIC6).amplitudes.copy()
    outside = float(np.sum(np.abs(spin[3:5]) ** 2))
    if outside > 1e-6:
        raise PreconditionError(f"state has {outside:.3e} population outside the s-t0 plane")
    phi = math.pi * config.splitting * duration
    c, s = math.cos(phi), 1j * math.sin(phi)
    a_s, a_t = spin[5], spin[1]
    spin[5], spin[1] = c * a_s + s * a_t, s * a_s + c * a_t
    return StateVector(spin, BasisTag.SPIN_FERMIONIC6).to(psi.basis)


@dataclass
class StoTrace:
    times: np.ndarray
    singlet: np.ndarray
    sigma: np.ndarray | None = None


def simulate_sto_trace(
    psi: StateVector,
    config: StoConfig,
    sigma: float | None = None,
    seed: int = 0,
    drop_doublons: bool = True,
) -> StoTrace:
    """Singlet fraction after an STO of each duration in the grid.

    sigma adds independent Gaussian measurement noise per point.
    """
    if drop_doublons:
        psi = remove_doublons(psi)
    times = np.asarray(config.durations, float)
    values = np.array([state_fractions(apply_sto(psi, config, d))["singlet"] for d in times])
    if sigma:
        values = values + np.random.default_rng(seed).normal(0.0, sigma, len(values))
        return StoTrace(times, values, np.full(len(values), float(sigma)))
    return StoTrace(times, values, None)


def sinusoid(T, amplitude, frequency, phase, offset):
    return amplitude * np.sin(2 * np.pi * frequency * T + phase) + offset


@dataclass
class FitResult:
    amplitude: float
    frequency: float
    phase: float
    offset: float
    errors: dict
    covariance: np.ndarray = field(repr=False)
    degenerate_phase: bool = False
    residual: float = 0.0


def _initial_guess(times, values, frequency):
    y0 = float(np.mean(values))
    resid = values - y0
    if frequency is None:
        span = times[-1] - times[0]
        df = 1.0 / (8.0 * span)
        nyq = 0.5 * (len(times) - 1) / span
        freqs = np.arange(df, nyq + df, df)
        power = lombscargle(times, resid, 2 * np.pi * freqs)
        frequency = float(freqs[int(np.argmax(power))])
    w = 2 * np.pi * frequency
    design = np.column_stack([np.sin(w * times), np.cos(w * times)])
    (a, b), *_ = np.linalg.lstsq(design, resid, rcond=None)
    return float(np.hypot(a, b)), frequency, float(math.atan2(b, a)), y0


def fit_sto(times, values, sigma=None, frequency: float | None = None, maxfev: int = 10000) -> FitResult:
    """Weighted least-squares fit of A sin(2 pi f T + phi) + y0.

    Starting values come from the periodogram peak (f), the mean (y0) and a
    linear quadrature fit at that frequency (A, phi).  With ``sigma`` given,
    parameter errors are absolute.
    """
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    if len(times) < 5 or len(times) != len(values):
        raise PreconditionError("need at least 5 samples")
    order = np.argsort(times)
    times, values = times[order], values[order]
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, float), values.shape)[order]
    a0, f0, p0, y0 = _initial_guess(times, values, frequency)
    scale = max(float(np.max(np.abs(values))), 1e-300)
    if a0 <= 1e-9 * scale:
        # no oscillation to speak of: the phase is meaningless
        var = float(np.var(values, ddof=1)) / len(values)
        errs = {"amplitude": float("nan"), "frequency": float("nan"), "phase": float("nan"), "offset": math.sqrt(var)}
        return FitResult(a0, f0, 0.0, y0, errs, np.full((4, 4), np.nan), True, float(np.sum((values - y0) ** 2)))
    try:
        with warnings.catch_warnings():
            # an exact fit leaves no residual to scale the covariance by
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                sinusoid,
                times,
                values,
                p0=[a0, f0, p0, y0],
                sigma=sigma,
                absolute_sigma=sigma is not None,
                maxfev=maxfev,
                xtol=1e-14,
                ftol=1e-14,
            )
    except RuntimeError as exc:
        resid = float(np.sum((sinusoid(times, a0, f0, p0, y0) - values) ** 2))
        raise NumericalError(f"sinusoid fit did not converge (residual {resid:.3e}): {exc}") from exc
    amp, freq, phase, off = popt
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    if freq < 0:
        freq, phase = -freq, math.pi - phase
    phase = wrap_phase(phase)
    span = times[-1] - times[0]
    if span * freq < 0.5:
        raise PreconditionError("samples span less than half an oscillation period")
    residual = float(np.sum((sinusoid(times, *popt) - values) ** 2))
    if not np.all(np.isfinite(pcov)):
        pcov = np.zeros((4, 4)) if residual <= 1e-24 * len(values) * scale**2 else np.full((4, 4), np.inf)
    errs = dict(zip(("amplitude", "frequency", "phase", "offset"), np.sqrt(np.abs(np.diag(pcov)))))
    degenerate = bool(amp <= 3 * errs["amplitude"])
    return FitResult(float(amp), float(freq), float(phase), float(off), errs, pcov, degenerate, residual)


@dataclass
class FidelityReport:
    n_e: float
    o_e: float
    f_raw: float
    f_surv: float
    f_corr: float
    errors: dict
    reliable: bool = True
    notes: list = field(default_factory=list)


def _fit_decay(n, y, sigma):
    """Fit y = A1 exp(-lam N); returns (A1, lam, err_lam, notes)."""
    notes = []
    if np.any(y <= 0):
        notes.append("non-positive values in decay data")
    if np.any(np.diff(y) > 0) and not np.allclose(y, y[0]):
        notes.append("decay data is not monotone")
    pos = y > 0
    if np.sum(pos) >= 2:
        slope, icpt = np.polyfit(n[pos], np.log(y[pos]), 1)
        guess = [math.exp(icpt), -slope]
    else:
        guess = [float(np.max(y)), 0.0]

    def model(x, a1, lam):
        return a1 * np.exp(-lam * x)

    with warnings.catch_warnings():
        # noise-free decays fit exactly and leave the covariance undefined
        warnings.simplefilter("ignore", OptimizeWarning)
        popt, pcov = curve_fit(model, n, y, p0=guess, sigma=sigma, absolute_sigma=sigma is not None, maxfev=10000)
    err = float(np.sqrt(abs(pcov[1, 1]))) if np.all(np.isfinite(pcov)) else float("nan")
    if abs(popt[1]) < 1e-12:
        # flat data: a rate at rounding level is no decay at all
        popt[1] = 0.0
    if popt[0] <= 0:
        notes.append("negative decay prefactor")
    if popt[1] < 0:
        notes.append("fitted decay rate is negative")
    return float(popt[0]), float(popt[1]), err, notes


def fidelity_from_decay(n_gates, amplitudes, offsets=None, sigma_amplitudes=None, sigma_offsets=None) -> FidelityReport:
    """Per-gate fidelities from exponential fits of STO amplitude and offset versus gate count."""
    n = np.asarray(n_gates, float)
    a = np.asarray(amplitudes, float)
    if len(n) < 3 or len(a) != len(n):
        raise PreconditionError("need amplitudes at >= 3 gate counts")
    _, lam, lam_err, notes = _fit_decay(n, a, sigma_amplitudes)
    if offsets is None:
        mu, mu_err = 0.0, 0.0
    else:
        o = np.asarray(offsets, float)
        if np.allclose(o, o[0], rtol=1e-12, atol=0.0):
            mu, mu_err = 0.0, 0.0
        else:
            _, mu, mu_err, more = _fit_decay(n, o, sigma_offsets)
            notes += [f"offset: {m}" for m in more]
    f_raw, f_surv = math.exp(-lam), math.exp(-mu)
    f_corr = f_raw / f_surv
    e_raw, e_surv = f_raw * lam_err, f_surv * mu_err
    e_corr = math.hypot(e_raw / f_surv, f_raw * e_surv / f_surv**2)
    reliable = not notes and all(0 < f <= 1 for f in (f_raw, f_surv))
    return FidelityReport(
        n_e=1 / lam if lam else math.inf,
        o_e=1 / mu if mu else math.inf,
        f_raw=f_raw,
        f_surv=f_surv,
        f_corr=f_corr,
        errors={"f_raw": e_raw, "f_surv": e_surv, "f_corr": e_corr},
        reliable=reliable,
        notes=notes,
    )


# Spin operators on one site in the (up, down) basis
_SX = np.array([[0, 1], [1, 0]], complex) / 2
_SY = np.array([[0, -1j], [1j, 0]], complex) / 2
# (S_R x S_L)^z on |sigma_L, sigma_R>; left spin is the first tensor factor
_CHIRALITY = np.kron(_SY, _SX) - np.kron(_SX, _SY)


def spin_chirality(psi: StateVector) -> float:
    """z-component of the vector spin chirality on the singly occupied sector.

    The cross product takes the right site first, which gives +1/2 on |i->.
    Doubly occupied components carry no spin and do not contribute.
    """
    _require_normalised(psi)
    site = psi.to(BasisTag.SITE_FERMIONIC6).amplitudes if psi.basis is not BasisTag.SITE_FERMIONIC6 else psi.amplitudes
    v = site[list(COMPUTATIONAL)]
    return float(np.real(np.vdot(v, _CHIRALITY @ v)))


def alpha_from_chirality(kappa: float, branch: int = 1) -> float:
    """Gate exponent +-arccos(-2 kappa)/pi; ``branch`` is the sign taken from U."""
    if abs(kappa) > 0.5 + 1e-12:
        raise PreconditionError(f"chirality {kappa} outside [-0.5, 0.5]")
    if branch not in (1, -1):
        raise PreconditionError("branch must be +1 or -1")
    return branch * math.acos(max(-1.0, min(1.0, -2 * kappa))) / math.pi


def computational_state(u_computational: np.ndarray, psi: StateVector | None = None) -> StateVector:
    """Apply a 4x4 computational-space gate to a state (default |i->) in the site basis.

    The result is renormalised, i.e. conditioned on no leakage out of the
    computational space.
    """
    psi = psi or i_minus(BasisTag.SITE_FERMIONIC6)
    site = psi.to(BasisTag.SITE_FERMIONIC6).amplitudes.copy()
    idx = list(COMPUTATIONAL)
    site[idx] = u_computational @ site[idx]
    norm = np.linalg.norm(site)
    if norm == 0:
        raise PreconditionError("gate annihilates the state")
    return StateVector(site / norm, BasisTag.SITE_FERMIONIC6)
