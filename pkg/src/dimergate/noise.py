"""Band-limited multiplicative tunnelling noise and Monte Carlo gate fidelities."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import PreconditionError
from .evolve import midpoints, propagate_singlet_batch
from .exchange import direct_sqrt_swap, sensitivity_scan, superexchange_sqrt_swap
from .schedules import RampSchedule

# tunnelling-equivalent rms errors (percent) of the lattice noise sources, and
# the interaction fluctuation that enters separately
TUNNELLING_LEVELS = {"V_X": 1.3, "V_Xint": 2.1, "V_Z": 0.2, "inhomogeneity": 1.0}
INTERACTION_LEVEL = 0.8
DEFAULT_CHI0 = math.sqrt(sum(v**2 for v in TUNNELLING_LEVELS.values())) / 100.0


@dataclass(frozen=True)
class NoiseModel:
    amplitude: float
    bandwidth: float = 2000.0
    seed: int = 0
    chi0: float = DEFAULT_CHI0
    filter: str = "zoh"

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise PreconditionError("noise bandwidth must be positive")
        if self.amplitude < 0:
            raise PreconditionError("noise amplitude must be non-negative")
        if self.filter not in ("zoh", "lowpass"):
            raise PreconditionError(f"unknown noise filter {self.filter!r}")

    @property
    def sample_rate(self) -> float:
        return 2.0 * self.bandwidth

    @property
    def effective_amplitude(self) -> float:
        """Injected amplitude combined in quadrature with the baseline floor."""
        return math.hypot(self.amplitude, self.chi0)

    def rng(self, trial: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, trial])


@dataclass(frozen=True)
class NoiseRealization:
    """Piecewise-constant factor xi on a grid of rate ``sample_rate`` shifted by ``offset``."""

    samples: np.ndarray
    sample_rate: float
    offset: float = 0.0
    upsample: int = 1

    def xi(self, tau) -> np.ndarray:
        rate = self.sample_rate * self.upsample
        idx = np.floor((np.asarray(tau, float) + self.offset) * rate).astype(int)
        return self.samples[np.clip(idx, 0, len(self.samples) - 1)]

    def factor(self, tau) -> np.ndarray:
        return 1.0 + self.xi(tau)

    __call__ = factor


def generate_noise(model: NoiseModel, duration: float, trial: int = 0) -> NoiseRealization:
    """Gaussian trace of rms ``model.amplitude`` held at 2x the bandwidth.

    The hold grid starts at a random offset so the trace phase relative to
    the gate is uniformly distributed.  Deterministic in (seed, trial).
    """
    if duration <= 0:
        raise PreconditionError("noise duration must be positive")
    rng = model.rng(trial)
    rate = model.sample_rate
    offset = float(rng.uniform(0.0, 1.0 / rate))
    if model.filter == "zoh":
        n = int(math.ceil((duration + offset) * rate)) + 1
        samples = model.amplitude * rng.standard_normal(n)
        return NoiseRealization(samples, rate, offset)
    # first-order low-pass at the bandwidth, run on a finer grid and
    # rescaled to the stationary rms
    up = 16
    fine = rate * up
    n = int(math.ceil((duration + offset) * fine)) + 1
    a = math.exp(-2 * math.pi * model.bandwidth / fine)
    warm = int(10 / (1 - a))
    white = rng.standard_normal(n + warm)
    filtered = lfilter([1 - a], [1, -a], white)[warm:]
    stationary = (1 - a) / math.sqrt(1 - a * a)
    return NoiseRealization(model.amplitude * filtered / stationary, rate, offset, upsample=up)


@dataclass
class NoisyFidelity:
    mean: float
    stderr: float
    per_trial: np.ndarray
    amplitudes: np.ndarray
    n_gates: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_gates": self.n_gates, "n_trials": len(self.per_trial)}


def sequence_arrays(schedule: RampSchedule, n_gates: int, steps: int):
    """Midpoint samples of n_gates back-and-forth gates, concatenated in time."""
    taus, dt = midpoints(schedule.duration, steps)
    forward = schedule.arrays(taus)
    try:
        backward = schedule.reversed().arrays(taus)
    except PreconditionError:
        backward = forward
    parts = [forward if k % 2 == 0 else backward for k in range(n_gates)]
    t = np.concatenate([p[0] for p in parts])
    d = np.concatenate([p[1] for p in parts])
    u = np.concatenate([p[2] for p in parts])
    clock = np.concatenate([taus + k * schedule.duration for k in range(n_gates)])
    return clock, t, d, u, dt


def _trial_block(schedule, model, n_gates, steps, trials, target_alpha):
    clock, t, d, u, dt = sequence_arrays(schedule, n_gates, steps)
    total = n_gates * schedule.duration
    if model.amplitude > 0:
        factors = np.stack([generate_noise(model, total, k).factor(clock) for k in trials])
    else:
        factors = np.ones((len(trials), len(clock)))
    tt = t[None, :] * factors
    dd = np.broadcast_to(d, tt.shape)
    uu = np.broadcast_to(u, tt.shape)
    psi = propagate_singlet_batch(tt, dd, uu, dt, np.array([0.0, 0.0, 1.0]))
    ideal = np.exp(1j * np.pi * target_alpha * n_gates)
    # overlap of the evolved |i-> with its ideal image; |t0> is inert
    return np.abs(1.0 + np.conj(ideal) * psi[:, 2]) / 2.0


def noisy_gate_fidelity(
    schedule: RampSchedule,
    model: NoiseModel,
    n_gates: int = 16,
    n_trials: int = 64,
    target_alpha: float = 1.0,
    steps: int = 1024,
    workers: int = 1,
    chunk: int = 16,
) -> NoisyFidelity:
    """Per-gate raw fidelity (A_N)^(1/N) averaged over independent noise trials."""
    if n_gates < 1 or n_trials < 1:
        raise PreconditionError("n_gates and n_trials must be >= 1")
    blocks = [list(range(i, min(i + chunk, n_trials))) for i in range(0, n_trials, chunk)]

    def run(block):
        return _trial_block(schedule, model, n_gates, steps, block, target_alpha)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    amps = np.concatenate(results)
    per_gate = np.clip(amps, 0.0, 1.0) ** (1.0 / n_gates)
    stderr = float(np.std(per_gate, ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    return NoisyFidelity(float(np.mean(per_gate)), stderr, per_gate, amps, n_gates)


@dataclass
class BudgetReport:
    tunnelling_total: float
    interaction: float
    exchange_error: float
    superexchange_error: float
    contributions: dict

    def as_dict(self) -> dict:
        return {
            "tunnelling_total_percent": self.tunnelling_total,
            "interaction_percent": self.interaction,
            "exchange_error_percent": self.exchange_error,
            "superexchange_error_percent": self.superexchange_error,
            "contributions": self.contributions,
        }


@dataclass(frozen=True)
class Sensitivities:
    """Relative exchange-integral response per relative parameter change."""

    exchange_t: float
    exchange_u: float
    superexchange_t: float
    superexchange_u: float


_DEFAULT_SENSITIVITIES: Sensitivities | None = None


def default_sensitivities() -> Sensitivities:
    global _DEFAULT_SENSITIVITIES
    if _DEFAULT_SENSITIVITIES is None:
        direct, barrier = direct_sqrt_swap(), superexchange_sqrt_swap()
        _DEFAULT_SENSITIVITIES = Sensitivities(
            exchange_t=sensitivity_scan(direct).coefficient,
            exchange_u=sensitivity_scan(direct, parameter="u").coefficient,
            superexchange_t=sensitivity_scan(barrier).coefficient,
            superexchange_u=sensitivity_scan(barrier, parameter="u").coefficient,
        )
    return _DEFAULT_SENSITIVITIES


def noise_budget_report(
    levels: dict | None = None,
    interaction: float | None = None,
    sensitivities: Sensitivities | None = None,
) -> BudgetReport:
    """Propagate rms noise levels (percent) to relative gate errors (percent).

    Tunnelling-equivalent sources add in quadrature; the total and the
    interaction noise are scaled by each protocol's sensitivity coefficients
    and combined in quadrature again.
    """
    levels = dict(TUNNELLING_LEVELS if levels is None else levels)
    eps_u = INTERACTION_LEVEL if interaction is None else interaction
    if any(v < 0 for v in levels.values()) or eps_u < 0:
        raise PreconditionError("noise levels must be non-negative")
    eps_t = math.sqrt(sum(v**2 for v in levels.values()))
    if eps_t == 0 and eps_u == 0:
        return BudgetReport(0.0, 0.0, 0.0, 0.0, {k: 0.0 for k in levels})
    s = sensitivities or default_sensitivities()
    exchange = math.hypot(s.exchange_t * eps_t, s.exchange_u * eps_u)
    superexchange = math.hypot(s.superexchange_t * eps_t, s.superexchange_u * eps_u)
    contributions = {
        k: {"exchange": s.exchange_t * v, "superexchange": s.superexchange_t * v} for k, v in levels.items()
    }
    contributions["U"] = {"exchange": s.exchange_u * eps_u, "superexchange": s.superexchange_u * eps_u}
    return BudgetReport(eps_t, eps_u, exchange, superexchange, contributions)
