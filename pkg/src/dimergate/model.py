"""Two-site Fermi-Hubbard dimer Hamiltonians, bases and exact spectra.

All energies are plain frequencies in Hz (h = 1), so a state of energy E
acquires the phase exp(-2j*pi*E*T) after a time T.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, TrackingError

SQ2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HubbardParams:
    """Instantaneous dimer parameters: tunnelling t >= 0, bias delta, interaction u (Hz)."""

    t: float
    delta: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        for name in ("t", "delta", "u"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise PreconditionError(f"{name} must be finite, got {value!r}")
        if self.t < 0:
            raise PreconditionError(f"tunnelling must be non-negative, got t={self.t}")


class BasisTag(enum.Enum):
    SITE_FERMIONIC6 = "SiteFermionic6"
    SPIN_FERMIONIC6 = "SpinFermionic6"
    SINGLET_ONLY3 = "SingletOnly3"
    BOSONIC_FOCK4 = "BosonicFock4"
    BOSONIC_SPIN4 = "BosonicSpin4"

    @property
    def labels(self) -> tuple[str, ...]:
        return BASIS_LABELS[self]

    @property
    def dim(self) -> int:
        return len(BASIS_LABELS[self])

    def index(self, label: str) -> int:
        return BASIS_LABELS[self].index(label)


# Site kets are written |left, right>; "ud" is a doubly occupied site.
BASIS_LABELS = {
    BasisTag.SITE_FERMIONIC6: ("uu", "ud,0", "u,d", "d,u", "0,ud", "dd"),
    BasisTag.SPIN_FERMIONIC6: ("t+", "t0", "t-", "D+", "D-", "s"),
    BasisTag.SINGLET_ONLY3: ("D+", "D-", "s"),
    BasisTag.BOSONIC_FOCK4: ("ud,0", "u,d", "d,u", "0,ud"),
    BasisTag.BOSONIC_SPIN4: ("t0", "D+", "D-", "s"),
}

# Columns are the spin-basis kets expanded in the site basis.
SPIN_FROM_SITE = np.array(
    [
        # t+   t0     t-   D+     D-     s
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],  # uu
        [0.0, 0.0, 0.0, 1 / SQ2, 1 / SQ2, 0.0],  # ud,0
        [0.0, 1 / SQ2, 0.0, 0.0, 0.0, 1 / SQ2],  # u,d
        [0.0, 1 / SQ2, 0.0, 0.0, 0.0, -1 / SQ2],  # d,u
        [0.0, 0.0, 0.0, 1 / SQ2, -1 / SQ2, 0.0],  # 0,ud
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],  # dd
    ]
)

BOSON_SPIN_FROM_FOCK = np.array(
    [
        # t0     D+       D-       s
        [0.0, 1 / SQ2, 1 / SQ2, 0.0],  # ud,0
        [1 / SQ2, 0.0, 0.0, 1 / SQ2],  # u,d
        [1 / SQ2, 0.0, 0.0, -1 / SQ2],  # d,u
        [0.0, 1 / SQ2, -1 / SQ2, 0.0],  # 0,ud
    ]
)

# Indices of the computational space {uu, u,d, d,u, dd} inside SiteFermionic6.
COMPUTATIONAL = (0, 2, 3, 5)


def _check_hermitian(matrix: np.ndarray, rtol: float = 1e-12) -> None:
    scale = max(float(np.max(np.abs(matrix), initial=0.0)), 1.0)
    defect = float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))
    if defect > rtol * scale:
        raise PreconditionError(f"matrix is not Hermitian (defect {defect:.3e})")


@dataclass(frozen=True)
class HermitianMatrix:
    matrix: np.ndarray
    basis: BasisTag

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise PreconditionError(f"shape {m.shape} does not match basis {self.basis.value}")
        _check_hermitian(m)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    basis: BasisTag

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.basis.dim,):
            raise PreconditionError(f"state of length {a.shape} does not match basis {self.basis.value}")
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.basis.index(label)])

    def to(self, basis: BasisTag) -> StateVector:
        """Re-express the state in another basis of the same Hilbert space."""
        return StateVector(change_basis_vector(self.amplitudes, self.basis, basis), basis)

    def overlap(self, other: StateVector) -> complex:
        other = other.to(self.basis) if other.basis is not self.basis else other
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def change_basis_vector(vec: np.ndarray, src: BasisTag, dst: BasisTag) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    if src is dst:
        return vec.copy()
    S, P, Q = BasisTag.SITE_FERMIONIC6, BasisTag.SPIN_FERMIONIC6, BasisTag.SINGLET_ONLY3
    if src is Q:
        vec, src = np.concatenate([np.zeros(3, complex), vec]), P
    if src is P and dst is S:
        return SPIN_FROM_SITE @ vec
    if src is S and dst in (P, Q):
        out = SPIN_FROM_SITE.T @ vec
        return out if dst is P else _project_singlet(out)
    if src is P and dst is Q:
        return _project_singlet(vec)
    if src is BasisTag.BOSONIC_SPIN4 and dst is BasisTag.BOSONIC_FOCK4:
        return BOSON_SPIN_FROM_FOCK @ vec
    if src is BasisTag.BOSONIC_FOCK4 and dst is BasisTag.BOSONIC_SPIN4:
        return BOSON_SPIN_FROM_FOCK.T @ vec
    raise PreconditionError(f"no basis change from {src.value} to {dst.value}")


def _project_singlet(spin6: np.ndarray) -> np.ndarray:
    leak = float(np.linalg.norm(spin6[:3]))
    if leak > 1e-10:
        raise PreconditionError(f"state has triplet weight {leak:.2e}; not representable in SingletOnly3")
    return spin6[3:].copy()


def basis_state(basis: BasisTag, label: str) -> StateVector:
    amps = np.zeros(basis.dim, complex)
    amps[basis.index(label)] = 1.0
    return StateVector(amps, basis)


def i_minus(basis: BasisTag = BasisTag.SPIN_FERMIONIC6) -> StateVector:
    """(|t0> - i|s>)/sqrt(2), the equatorial input state of the gate experiments."""
    amps = np.zeros(6, complex)
    amps[1], amps[5] = 1 / SQ2, -1j / SQ2
    return StateVector(amps, BasisTag.SPIN_FERMIONIC6).to(basis)


def i_plus(basis: BasisTag = BasisTag.SPIN_FERMIONIC6) -> StateVector:
    amps = np.zeros(6, complex)
    amps[1], amps[5] = 1 / SQ2, 1j / SQ2
    return StateVector(amps, BasisTag.SPIN_FERMIONIC6).to(basis)


# ---------------------------------------------------------------------------
# Hamiltonian builders.  The *_blocks helpers are vectorised over parameter
# arrays and return stacks of matrices; the public builders wrap one point.
# ---------------------------------------------------------------------------


def site_blocks(t, delta, u) -> np.ndarray:
    t, delta, u = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (t, delta, u)))
    h = np.zeros(t.shape + (6, 6))
    h[..., 1, 1] = u + 2 * delta
    h[..., 4, 4] = u - 2 * delta
    for a, b, sign in ((1, 2, -1), (1, 3, 1), (2, 4, -1), (3, 4, 1)):
        h[..., a, b] = sign * t
        h[..., b, a] = sign * t
    return h


def singlet_blocks(t, delta, u) -> np.ndarray:
    t, delta, u = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (t, delta, u)))
    h = np.zeros(t.shape + (3, 3))
    h[..., 0, 0] = u
    h[..., 1, 1] = u
    h[..., 0, 1] = h[..., 1, 0] = 2 * delta
    h[..., 0, 2] = h[..., 2, 0] = -2 * t
    return h


def build_h_full(p: HubbardParams) -> HermitianMatrix:
    return HermitianMatrix(site_blocks(p.t, p.delta, p.u), BasisTag.SITE_FERMIONIC6)


def build_h_singlet(p: HubbardParams) -> HermitianMatrix:
    return HermitianMatrix(singlet_blocks(p.t, p.delta, p.u), BasisTag.SINGLET_ONLY3)


def build_h_spin6(p: HubbardParams) -> HermitianMatrix:
    h = np.zeros((6, 6))
    h[3:, 3:] = singlet_blocks(p.t, p.delta, p.u)
    return HermitianMatrix(h, BasisTag.SPIN_FERMIONIC6)


def build_h_bosonic(p: HubbardParams, basis: BasisTag) -> HermitianMatrix:
    """Bosonic two-particle Hamiltonian in the reduced four-state basis.

    In the Fock basis every doublon couples to both singly occupied
    configurations with amplitude -t; in the spin basis this leaves |s>
    decoupled and couples |t0> to |D+> with -2t.
    """
    t, d, u = p.t, p.delta, p.u
    if basis is BasisTag.BOSONIC_FOCK4:
        h = np.array(
            [
                [u + 2 * d, -t, -t, 0.0],
                [-t, 0.0, 0.0, -t],
                [-t, 0.0, 0.0, -t],
                [0.0, -t, -t, u - 2 * d],
            ]
        )
    elif basis is BasisTag.BOSONIC_SPIN4:
        h = np.array(
            [
                [0.0, -2 * t, 0.0, 0.0],
                [-2 * t, u, 2 * d, 0.0],
                [0.0, 2 * d, u, 0.0],
                [0.0, 0.0, 0.0, 0.0],
            ]
        )
    else:
        raise PreconditionError(f"bosonic Hamiltonian needs a bosonic basis, got {basis.value}")
    return HermitianMatrix(h, basis)


# ---------------------------------------------------------------------------
# Dark state
# ---------------------------------------------------------------------------


def mixing_angle(p: HubbardParams) -> float:
    """Mixing angle in [0, 2pi] with cot(theta/2) = -delta/t.

    theta -> 0 for delta/t -> -inf, pi at delta = 0 and 2pi for delta/t -> +inf.
    """
    if p.t == 0 and p.delta == 0:
        raise PreconditionError("undefined mixing angle: t = delta = 0")
    return 2.0 * math.atan2(p.t, -p.delta)


def mixing_angles(t, delta) -> np.ndarray:
    """Vectorised mixing angle; callers guarantee t, delta not both zero."""
    return 2.0 * np.arctan2(np.asarray(t, float), -np.asarray(delta, float))


@dataclass(frozen=True)
class DarkState:
    theta: float
    vector: StateVector = field(repr=False)


def dark_vector(theta: float, basis: BasisTag = BasisTag.SPIN_FERMIONIC6) -> StateVector:
    """cos(theta/2)|s> - sin(theta/2)|D->, the zero mode of the singlet block at u = 0."""
    amps = np.zeros(6, complex)
    amps[5] = math.cos(theta / 2)
    amps[4] = -math.sin(theta / 2)
    return StateVector(amps, BasisTag.SPIN_FERMIONIC6).to(basis)


def bosonic_dark_vector(theta: float) -> StateVector:
    """cos(theta/2)|t0> - sin(theta/2)|D->, the bosonic zero mode of the triplet block at u = 0."""
    amps = np.zeros(4, complex)
    amps[0] = math.cos(theta / 2)
    amps[2] = -math.sin(theta / 2)
    return StateVector(amps, BasisTag.BOSONIC_SPIN4)


def dark_state(p: HubbardParams) -> DarkState:
    if p.u != 0:
        raise PreconditionError("dark state exact only at U=0")
    theta = mixing_angle(p)
    vec = dark_vector(theta)
    h = build_h_spin6(p).matrix
    residual = float(np.max(np.abs(h @ vec.amplitudes)))
    if residual > 1e-12 * max(np.linalg.norm(h, 2), 1.0):
        raise TrackingError(f"dark state residual {residual:.3e} exceeds tolerance")
    return DarkState(theta, vec)


# ---------------------------------------------------------------------------
# Spectra and eigenstate continuation
# ---------------------------------------------------------------------------


def fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column real and positive.

    Works on a single (d, k) matrix or a stack (..., d, k).
    """
    idx = np.argmax(np.abs(vecs), axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (np.abs(pivot) / pivot)


def spectrum(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors (columns)."""
    m = np.asarray(h)
    _check_hermitian(m)
    evals, evecs = np.linalg.eigh(m)
    return evals, fix_phases(evecs.astype(complex))


def track_state(hs: np.ndarray, start: np.ndarray, threshold: float = 0.5):
    """Follow one eigenstate through a stack of Hamiltonians by overlap continuation.

    hs has shape (n, d, d); start is the vector whose best-overlapping
    eigenvector at hs[0] seeds the track.  Returns (energies, vectors, gaps)
    where gaps is the separation of the tracked level from its neighbours.
    """
    evals, evecs = np.linalg.eigh(hs)
    n, d = evals.shape
    energies = np.empty(n)
    vectors = np.empty((n, d), dtype=evecs.dtype)
    gaps = np.full(n, np.inf)

    ov = np.abs(np.conj(start) @ evecs[0]) ** 2
    order = np.argsort(ov)[::-1]
    if d > 1 and ov[order[0]] < threshold:
        raise TrackingError(f"no eigenvector at step 0 dominates the start state (best {ov[order[0]]:.3f})")
    k = int(order[0])
    prev = evecs[0, :, k]
    for i in range(n):
        if i:
            ov = np.abs(np.conj(prev) @ evecs[i]) ** 2
            k = int(np.argmax(ov))
            if ov[k] < threshold:
                raise TrackingError(f"eigenstate continuation lost at step {i} (overlap {ov[k]:.3f})")
        vec = evecs[i, :, k]
        # keep a continuous gauge so that downstream overlap products are smooth
        if i:
            phase = np.vdot(prev, vec)
            vec = vec * (np.abs(phase) / phase) if phase != 0 else vec
        energies[i] = evals[i, k]
        vectors[i] = vec
        if d > 1:
            others = np.delete(evals[i], k)
            gaps[i] = float(np.min(np.abs(others - evals[i, k])))
        prev = vec
    return energies, vectors, gaps
