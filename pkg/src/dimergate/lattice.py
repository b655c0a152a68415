"""Double-well tight-binding parameters from the optical superlattice potential."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.constants as const
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .errors import PreconditionError
from .schedules import PiecewiseTable

POTASSIUM40_MASS = 39.96399848 * const.atomic_mass
WAVELENGTH = 1064e-9
# E_rec = h^2 / (2 m lambda^2), expressed as a frequency (h = 1)
RECOIL_HZ = const.h / (2 * POTASSIUM40_MASS * WAVELENGTH**2)

DEFAULT_POINTS = 1024
DEFAULT_TWISTS = 8


@dataclass(frozen=True)
class LatticeDepths:
    """Beam depths in recoil units plus the phases of the superlattice potential.

    ``theta_beam`` offsets the short lattice as cos^2(kx + theta_beam/2). The
    default of pi puts the two sites of a dimer at kx = -pi/2 and +pi/2, so
    phi_sl = 0 is the dimerised point and phi_sl = +-pi/2 the staggered ones.
    """

    v_x: float
    v_xint: float
    v_y: float = 0.0
    v_z: float = 0.0
    imbalance: float = 1.0
    phi_sl: float = 0.0
    theta_beam: float = math.pi

    def __post_init__(self):
        if min(self.v_x, self.v_xint, self.v_y, self.v_z) < 0:
            raise PreconditionError("lattice depths must be non-negative")
        if not 0.0 <= self.imbalance <= 1.0:
            raise PreconditionError("imbalance must lie in [0, 1]")

    def at_phase(self, phi_sl: float) -> LatticeDepths:
        return replace(self, phi_sl=phi_sl)


# Depth sets used in the experiments, indexed by the figure they produced.
# Superexchange rows give the barrier depth at the minimum and maximum of the pulse.
LATTICE_PRESETS = {
    "fig2ab-dark-state": LatticeDepths(10.10, 1.00, 31.10, 29.54, 0.804),
    "fig2d-swap-sto": LatticeDepths(9.93, 0.99, 31.15, 30.10, 0.800),
    "fig3a-geometric-swap": LatticeDepths(9.97, 1.02, 31.07, 30.27, 0.800),
    "fig3b-geometric-swap-noise": LatticeDepths(9.99, 0.97, 31.23, 21.56, 0.758),
    "fig4c-alpha-calibration": LatticeDepths(9.96, 1.02, 31.09, 30.24, 0.800),
    "fig4d-sqrt-swap": LatticeDepths(10.02, 1.06, 31.04, 29.92, 0.800),
    "fig4d-sqrt-swap-dagger": LatticeDepths(9.97, 1.00, 31.08, 30.03, 0.800),
    "fig4d-superexchange-high": LatticeDepths(24.9, 0.97, 31.15, 21.70, 0.758),
    "fig4d-superexchange-low": LatticeDepths(9.89, 0.97, 31.15, 21.70, 0.758),
    "fig4e-noise-exchange": LatticeDepths(10.09, 1.03, 31.23, 21.47, 0.758),
    "fig4e-noise-superexchange-high": LatticeDepths(25.1, 1.01, 31.05, 21.50, 0.758),
    "fig4e-noise-superexchange-low": LatticeDepths(10.07, 1.01, 31.05, 21.50, 0.758),
}


def cell_grid(points: int = DEFAULT_POINTS) -> np.ndarray:
    """kx samples on one superlattice period [-pi, pi)."""
    return -math.pi + 2 * math.pi * np.arange(points) / points


def potential_slice(d: LatticeDepths, x) -> np.ndarray:
    """Potential along x (recoil units) at y = 0 on the cos(kz) = +1 branch.

    x is the dimensionless coordinate kx.  Constant y and z terms are dropped.
    """
    x = np.asarray(x, float)
    a = math.sqrt(d.v_xint * d.v_z)
    return (
        -d.v_x * np.cos(x + d.theta_beam / 2) ** 2
        - d.v_xint * np.cos(x) ** 2
        - a * np.cos(x + d.phi_sl)
        - d.imbalance * a * np.cos(x - d.phi_sl)
    )


def _bloch_hamiltonian(v: np.ndarray, twist: float):
    n = len(v)
    h = 2 * math.pi / n
    off = -1.0 / h**2
    ham = diags(
        [np.full(n - 1, off), v + 2.0 / h**2, np.full(n - 1, off)],
        [-1, 0, 1],
        shape=(n, n),
        dtype=complex,
        format="lil",
    )
    ham[0, n - 1] = off * np.exp(-1j * twist)
    ham[n - 1, 0] = off * np.exp(1j * twist)
    return ham.tocsc()


def twists(n: int = DEFAULT_TWISTS) -> np.ndarray:
    """Bloch phases across one period equivalent to an n-period periodic supercell."""
    return 2 * math.pi * np.arange(n) / n


def band_energies(d: LatticeDepths, n_bands: int = 3, points: int = DEFAULT_POINTS, n_twists: int = DEFAULT_TWISTS):
    """Lowest single-particle energies (recoil units) at each supercell momentum.

    Returns (energies (n_twists, n_bands), vectors (n_twists, points, n_bands), grid).
    """
    if points < 256:
        raise PreconditionError("need at least 256 points per period")
    x = cell_grid(points)
    v = potential_slice(d, x)
    shift = float(np.min(v)) - 1.0
    energies = np.empty((n_twists, n_bands))
    vectors = np.empty((n_twists, points, n_bands), complex)
    # fixed start vector: ARPACK otherwise draws a random one and results drift in the last digits
    start = np.ones(points, complex)
    for j, q in enumerate(twists(n_twists)):
        w, vec = eigsh(_bloch_hamiltonian(v, q), k=n_bands, sigma=shift, which="LM", v0=start)
        order = np.argsort(w)
        energies[j], vectors[j] = w[order], vec[:, order]
    return energies, vectors, x


@dataclass(frozen=True)
class TightBinding:
    delta: float
    t: float
    t_prime: float

    def as_row(self) -> tuple:
        return (self.delta, self.t, self.t_prime)


def _count_minima(v: np.ndarray) -> int:
    return int(np.sum((v < np.roll(v, 1)) & (v < np.roll(v, -1))))


def extract_tight_binding(
    d: LatticeDepths, points: int = DEFAULT_POINTS, n_twists: int = DEFAULT_TWISTS
) -> TightBinding:
    """Fit the two lowest bands to a dimer chain with bias delta, tunnelling t and t'.

    At every supercell momentum the two lowest Bloch states are rotated into
    left/right localised states by diagonalising the position operator within
    their span.  The projected Hamiltonian then reads [[-delta, -h_q], [-h_q, +delta]]
    with |h_q| = |t + t' e^{iq}|, so t and t' follow from q = 0 and q = pi.
    """
    if n_twists < 2 or n_twists % 2:
        raise PreconditionError("need an even number of supercell momenta to reach q = pi")
    x = cell_grid(points)
    if _count_minima(potential_slice(d, x)) != 2:
        raise PreconditionError("potential does not form a double well (need exactly two minima per period)")
    energies, vectors, x = band_energies(d, 3, points, n_twists)
    width = float(np.max(energies[:, 1]) - np.min(energies[:, 0]))
    gap = float(np.min(energies[:, 2]) - np.max(energies[:, 1]))
    if gap <= width:
        raise PreconditionError("not in two-level regime: third band overlaps the double-well manifold")
    deltas, hops = [], []
    for j in range(n_twists):
        vec = vectors[j, :, :2]
        pos = vec.conj().T @ (x[:, None] * vec)
        _, rot = np.linalg.eigh(pos)
        local = rot.conj().T @ np.diag(energies[j, :2]) @ rot
        deltas.append(float(np.real(local[1, 1] - local[0, 0])) / 2)
        hops.append(float(abs(local[0, 1])))
    hops = np.asarray(hops)
    h0, hpi = hops[0], hops[n_twists // 2]
    return TightBinding(
        delta=float(np.mean(deltas)) * RECOIL_HZ,
        t=float(h0 + hpi) / 2 * RECOIL_HZ,
        t_prime=float(h0 - hpi) / 2 * RECOIL_HZ,
    )


def scan_phase(d: LatticeDepths, phis, workers: int = 1, **kw) -> list[TightBinding]:
    """Tight-binding parameters at each superlattice phase, in input order."""
    phis = [float(p) for p in phis]

    def one(phi):
        return extract_tight_binding(d.at_phase(phi), **kw)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, phis))
    return [one(p) for p in phis]


def schedule_from_phase_ramp(
    d: LatticeDepths,
    ramp: tuple | Callable = (math.pi / 2, -math.pi / 2),
    samples: int = 65,
    duration: float = 750e-6,
    u: float = 0.0,
    workers: int = 1,
    **kw,
) -> PiecewiseTable:
    """Tabulate (t, delta)(tau) along a superlattice-phase ramp.

    ``ramp`` is either (phi_start, phi_end) for a linear ramp or a function
    of the normalised time s in [0, 1].
    """
    if samples < 2:
        raise PreconditionError("need at least 2 ramp samples")
    s = np.linspace(0.0, 1.0, samples)
    if callable(ramp):
        phis = np.array([float(ramp(x)) for x in s])
    else:
        start, end = ramp
        phis = start + (end - start) * s
    if np.any(np.abs(phis) > math.pi + 1e-12):
        raise PreconditionError("superlattice phase must stay within [-pi, pi]")
    tb = scan_phase(d, phis, workers=workers, **kw)
    return PiecewiseTable(
        duration=duration,
        s_grid=tuple(s),
        t_values=tuple(max(x.t, 0.0) for x in tb),
        delta_values=tuple(x.delta for x in tb),
        u=u,
    )
