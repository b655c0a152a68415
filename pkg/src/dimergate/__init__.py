"""Simulation of geometric and exchange two-qubit gates on fermion pairs in optical double wells."""

from __future__ import annotations

from .errors import ConfigError, DimerGateError, NumericalError, PreconditionError, TrackingError
from .evolve import GateReport, Propagator, propagate, run_gate
from .model import BasisTag, HermitianMatrix, HubbardParams, StateVector
from .schedules import BlackmanBarrier, LinearBiasSweep, PiecewiseTable, RampSchedule

__all__ = [
    "BasisTag",
    "BlackmanBarrier",
    "ConfigError",
    "DimerGateError",
    "GateReport",
    "HermitianMatrix",
    "HubbardParams",
    "LinearBiasSweep",
    "NumericalError",
    "PiecewiseTable",
    "PreconditionError",
    "Propagator",
    "RampSchedule",
    "StateVector",
    "TrackingError",
    "propagate",
    "run_gate",
]
