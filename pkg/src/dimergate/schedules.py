"""Time-parametrised gate protocols mapping tau in [0, duration] to (t, delta, u)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .model import HubbardParams


class RampKind(enum.Enum):
    LINEAR_BIAS_SWEEP = "LinearBiasSweep"
    BLACKMAN_BARRIER = "BlackmanBarrier"
    PIECEWISE_TABLE = "PiecewiseTable"


def smoothstep(s):
    """Quintic ramp 0 -> 1 with vanishing first and second derivative at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)


def smoothstep_rate(s):
    s = np.clip(s, 0.0, 1.0)
    return 30 * s**2 * (1 - s) ** 2


def blackman(s):
    s = np.clip(s, 0.0, 1.0)
    return 0.42 - 0.5 * np.cos(2 * np.pi * s) + 0.08 * np.cos(4 * np.pi * s)


class RampSchedule:
    """Base protocol.  Subclasses implement ``_arrays`` on a normalised time axis."""

    kind: RampKind
    duration: float
    reverse: bool = False
    tunnelling_scale: float = 1.0
    modulation: Callable | None = None

    def _arrays(self, s: np.ndarray):  # pragma: no cover - abstract
        raise NotImplementedError

    def arrays(self, tau) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised (t, delta, u) at absolute times tau."""
        tau = np.asarray(tau, dtype=float)
        if self.duration > 0:
            s = tau / self.duration
        else:
            s = np.zeros_like(tau)
        if self.reverse:
            s = 1.0 - s
        t, d, u = self._arrays(np.clip(s, 0.0, 1.0))
        t = np.broadcast_to(t, tau.shape) * self.tunnelling_scale
        if self.modulation is not None:
            t = t * self.modulation(tau)
        d = np.broadcast_to(d, tau.shape)
        u = np.broadcast_to(u, tau.shape)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(d)) and np.all(np.isfinite(u))):
            raise PreconditionError("schedule produced a non-finite sample")
        return np.asarray(t, float), np.asarray(d, float), np.asarray(u, float)

    def sample(self, tau: float) -> HubbardParams:
        t, d, u = self.arrays(np.array([tau]))
        return HubbardParams(float(t[0]), float(d[0]), float(u[0]))

    @property
    def start(self) -> HubbardParams:
        return self.sample(0.0)

    @property
    def end(self) -> HubbardParams:
        return self.sample(self.duration)

    def reversed(self) -> RampSchedule:
        """The same path traversed backwards in time."""
        if self.modulation is not None:
            raise PreconditionError("reverse the schedule before attaching a modulation")
        return replace(self, reverse=not self.reverse)

    def scaled(self, factor: float) -> RampSchedule:
        """Multiply the tunnelling profile by a constant factor."""
        return replace(self, tunnelling_scale=self.tunnelling_scale * factor)

    def modulated(self, factor: Callable) -> RampSchedule:
        """Multiply t(tau) by factor(tau), e.g. a noise trace 1 + xi(tau)."""
        return replace(self, modulation=factor)

    def with_u(self, u: float) -> RampSchedule:
        return replace(self, u=u)

    def with_duration(self, duration: float) -> RampSchedule:
        return replace(self, duration=duration)


@dataclass(frozen=True)
class LinearBiasSweep(RampSchedule):
    """Bias sweep carrying the mixing angle from theta_start to theta_end at fixed u.

    The pair (t, delta) moves on the curve t = r sin(theta/2),
    delta = -r cos(theta/2), so cot(theta/2) = -delta/t holds identically.
    The radius r interpolates from the staggered bias ``delta_stagger`` at
    the endpoints to ``t_max`` in the dimerised configuration.

    ``profile`` sets theta(tau): "linear" is a constant-rate sweep, while the
    default "smooth" uses a quintic ramp that starts and stops with zero rate.
    """

    duration: float = 750e-6
    t_max: float = 3000.0
    delta_stagger: float = 4000.0
    u: float = 0.0
    theta_start: float = 0.0
    theta_end: float = 2 * math.pi
    profile: str = "smooth"
    reverse: bool = False
    tunnelling_scale: float = 1.0
    modulation: Callable | None = field(default=None, compare=False)
    kind: RampKind = field(default=RampKind.LINEAR_BIAS_SWEEP, init=False)

    def __post_init__(self):
        if self.duration < 0:
            raise PreconditionError("duration must be non-negative")
        if self.profile not in ("smooth", "linear"):
            raise PreconditionError(f"unknown sweep profile {self.profile!r}")
        if self.t_max <= 0 or self.delta_stagger <= 0:
            raise PreconditionError("t_max and delta_stagger must be positive")

    def theta(self, s):
        ramp = smoothstep(s) if self.profile == "smooth" else np.clip(s, 0.0, 1.0)
        return self.theta_start + (self.theta_end - self.theta_start) * ramp

    def theta_rate(self, tau):
        """d theta / d tau in rad/s (sign follows the traversal direction)."""
        if self.duration == 0:
            return np.zeros_like(np.asarray(tau, float))
        s = np.asarray(tau, float) / self.duration
        if self.reverse:
            s = 1.0 - s
        shape = smoothstep_rate(s) if self.profile == "smooth" else np.ones_like(s)
        sign = -1.0 if self.reverse else 1.0
        return sign * (self.theta_end - self.theta_start) * shape / self.duration

    def radius(self, theta):
        c2 = np.cos(theta / 2) ** 2
        return self.delta_stagger * c2 + self.t_max * (1 - c2)

    def _arrays(self, s):
        th = self.theta(s)
        r = self.radius(th)
        t = np.abs(r * np.sin(th / 2))
        d = -r * np.cos(th / 2)
        return t, d, np.full_like(th, self.u)


@dataclass(frozen=True)
class BlackmanBarrier(RampSchedule):
    """Zero-bias barrier pulse: t rises from t_min to t_max along a Blackman window."""

    duration: float = 750e-6
    t_min: float = 60.0
    t_max: float = 2200.0
    u: float = 9600.0
    reverse: bool = False
    tunnelling_scale: float = 1.0
    modulation: Callable | None = field(default=None, compare=False)
    kind: RampKind = field(default=RampKind.BLACKMAN_BARRIER, init=False)

    def __post_init__(self):
        if self.duration < 0:
            raise PreconditionError("duration must be non-negative")
        if not 0 <= self.t_min <= self.t_max:
            raise PreconditionError("need 0 <= t_min <= t_max")

    def _arrays(self, s):
        t = self.t_min + (self.t_max - self.t_min) * blackman(s)
        return t, np.zeros_like(s), np.full_like(s, self.u)


@dataclass(frozen=True)
class PiecewiseTable(RampSchedule):
    """Tabulated (t, delta) profile on a normalised time grid, linearly interpolated."""

    duration: float = 750e-6
    s_grid: tuple = (0.0, 1.0)
    t_values: tuple = (0.0, 0.0)
    delta_values: tuple = (0.0, 0.0)
    u: float = 0.0
    reverse: bool = False
    tunnelling_scale: float = 1.0
    modulation: Callable | None = field(default=None, compare=False)
    kind: RampKind = field(default=RampKind.PIECEWISE_TABLE, init=False)

    def __post_init__(self):
        n = len(self.s_grid)
        if n < 2 or len(self.t_values) != n or len(self.delta_values) != n:
            raise PreconditionError("table columns must have equal length >= 2")
        grid = np.asarray(self.s_grid, float)
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise PreconditionError("s_grid must increase strictly from 0 to 1")
        if np.any(np.asarray(self.t_values) < 0):
            raise PreconditionError("tabulated tunnelling must be non-negative")
        object.__setattr__(self, "s_grid", tuple(float(x) for x in self.s_grid))
        object.__setattr__(self, "t_values", tuple(float(x) for x in self.t_values))
        object.__setattr__(self, "delta_values", tuple(float(x) for x in self.delta_values))

    def _arrays(self, s):
        t = np.interp(s, self.s_grid, self.t_values)
        d = np.interp(s, self.s_grid, self.delta_values)
        return t, d, np.full_like(np.asarray(s, float), self.u)


def constant_schedule(p: HubbardParams, duration: float) -> PiecewiseTable:
    return PiecewiseTable(
        duration=duration,
        s_grid=(0.0, 1.0),
        t_values=(p.t, p.t),
        delta_values=(p.delta, p.delta),
        u=p.u,
    )
