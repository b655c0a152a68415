"""Chiral and time-reversal symmetry checks for the double-well Hamiltonian."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .evolve import DEFAULT_STEPS, dark_space_population
from .model import HermitianMatrix, fix_phases
from .schedules import RampSchedule


class SymmetryKind(enum.Enum):
    CHIRAL = "Chiral"
    TIME_REVERSAL = "TimeReversal"


@dataclass(frozen=True)
class SymmetryOperator:
    kind: SymmetryKind
    matrix: np.ndarray
    antiunitary: bool

    def apply(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        return self.matrix @ (np.conj(vec) if self.antiunitary else vec)

    def squared(self) -> np.ndarray:
        m = self.matrix
        return m @ np.conj(m) if self.antiunitary else m @ m


def chiral_operator(triplet_signs=(1, 1, 1)) -> SymmetryOperator:
    """Gamma on the spin basis (t+, t0, t-, D+, D-, s).

    The triplet signs are free since the triplet block vanishes.
    """
    if any(s not in (1, -1) for s in triplet_signs) or len(triplet_signs) != 3:
        raise PreconditionError("triplet signs must be three values of +-1")
    return SymmetryOperator(SymmetryKind.CHIRAL, np.diag([*triplet_signs, 1, -1, -1]).astype(float), False)


def time_reversal_operator() -> SymmetryOperator:
    """T = -(I_3 x sigma_z) K on the spin basis."""
    return SymmetryOperator(SymmetryKind.TIME_REVERSAL, -np.kron(np.eye(3), np.diag([1.0, -1.0])), True)


def _matrix(h) -> np.ndarray:
    return h.matrix if isinstance(h, HermitianMatrix) else np.asarray(h)


def check_chiral(h, gamma: SymmetryOperator | None = None) -> float:
    """max |Gamma H Gamma^-1 + H|; zero when H anticommutes with Gamma."""
    gamma = gamma or chiral_operator()
    m = _matrix(h)
    g = gamma.matrix
    if g.shape != m.shape:
        raise PreconditionError(f"dimension mismatch: operator {g.shape} vs hamiltonian {m.shape}")
    return float(np.max(np.abs(g @ m @ np.linalg.inv(g) + m), initial=0.0))


@dataclass(frozen=True)
class TimeReversalReport:
    symmetric: bool
    max_imag: float

    def __bool__(self) -> bool:
        return self.symmetric


def check_time_reversal(h, tol: float = 1e-12) -> TimeReversalReport:
    """Whether H is real symmetric, plus the largest imaginary part left in its
    phase-fixed eigenvectors."""
    m = _matrix(h)
    scale = max(float(np.max(np.abs(m), initial=0.0)), 1.0)
    real = bool(np.max(np.abs(np.imag(m)), initial=0.0) <= tol * scale)
    # a real matrix is diagonalised in real arithmetic so degenerate
    # subspaces come out with a real basis
    _, vecs = np.linalg.eigh(np.real(m) if real else m)
    vecs = fix_phases(vecs.astype(complex))
    return TimeReversalReport(real, float(np.max(np.abs(vecs.imag), initial=0.0)))


def zero_mode_count(h, tol: float | None = None) -> int:
    """Number of eigenvalues with |E| <= tol (default 1e-9 times the spectral radius)."""
    evals = np.linalg.eigvalsh(_matrix(h))
    if tol is None:
        tol = 1e-9 * float(np.max(np.abs(evals), initial=0.0))
    return int(np.sum(np.abs(evals) <= tol))


def dark_space_leakage(
    schedule: RampSchedule,
    noise: Callable | None = None,
    steps: int = DEFAULT_STEPS,
) -> float:
    """Peak population of the bright doublon |D+> while evolving |s> through ``schedule``.

    ``noise`` is an optional real factor tau -> f(tau) on t, which keeps the
    Hamiltonian real and therefore time-reversal symmetric.
    """
    if schedule.start.u != 0 or schedule.end.u != 0:
        raise PreconditionError("dark-space leakage is defined for u = 0")
    if noise is not None:
        schedule = schedule.modulated(noise)
    if schedule.duration == 0:
        return 0.0
    return float(np.max(dark_space_population(schedule, steps)))

