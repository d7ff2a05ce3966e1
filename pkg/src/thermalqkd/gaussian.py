"""
Covariance-matrix algebra for multimode Gaussian states.

Conventions
-----------
* Shot-noise units (SNU): the vacuum quadrature variance is 1.
* Interleaved quadrature ordering ``(x1, p1, x2, p2, ...)``.
* Entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import constants

#: tolerance below 1 allowed for symplectic eigenvalues before a state is unphysical
PHYSICAL_TOL = 1e-9
SYMMETRY_TOL = 1e-10

ModeRef = Union[int, str]


class InvalidVarianceError(ValueError):
    """Raised for a single-mode variance below the vacuum level."""


class LabelCollisionError(ValueError):
    """Raised when combining states whose mode labels overlap."""


class UnphysicalStateError(ValueError):
    """Raised when a covariance matrix violates the uncertainty relation."""


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with per-mode blocks ``[[0, 1], [-1, 0]]``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean (by default) Gaussian state of ``n_modes`` bosonic modes.

    ``cov`` is symmetrized on construction and both arrays are made read-only.
    """

    cov: np.ndarray
    disp: np.ndarray = None
    labels: tuple[str, ...] = None

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"covariance must be a square 2N x 2N matrix, got shape {cov.shape}")
        n = cov.shape[0] // 2
        cov = 0.5 * (cov + cov.T)
        disp = np.zeros(2 * n) if self.disp is None else np.array(self.disp, dtype=float).reshape(-1)
        if disp.shape != (2 * n,):
            raise ValueError(f"displacement must have length {2 * n}, got {disp.shape[0]}")
        labels = tuple(f"m{k}" for k in range(n)) if self.labels is None else tuple(self.labels)
        if len(labels) != n:
            raise ValueError(f"expected {n} labels, got {len(labels)}")
        if len(set(labels)) != n:
            raise LabelCollisionError(f"mode labels must be unique: {labels}")
        object.__setattr__(self, "cov", _readonly(cov))
        object.__setattr__(self, "disp", _readonly(disp))
        object.__setattr__(self, "labels", labels)

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def index(self, mode: ModeRef) -> int:
        if isinstance(mode, (int, np.integer)):
            if not 0 <= mode < self.n_modes:
                raise IndexError(f"mode index {mode} out of range for {self.n_modes} modes")
            return int(mode)
        try:
            return self.labels.index(mode)
        except ValueError:
            raise KeyError(f"no mode labelled {mode!r}; have {self.labels}") from None

    def block(self, mode_i: ModeRef, mode_j: ModeRef | None = None) -> np.ndarray:
        """2x2 covariance block between two modes (the local block if ``mode_j`` is omitted)."""
        i = self.index(mode_i)
        j = i if mode_j is None else self.index(mode_j)
        return self.cov[2 * i:2 * i + 2, 2 * j:2 * j + 2].copy()

    def relabel(self, labels: Sequence[str]) -> "GaussianState":
        return GaussianState(self.cov, self.disp, tuple(labels))


@dataclass(frozen=True)
class SymplecticTransform:
    """Linear quadrature map ``r -> S r`` acting on an ``N``-mode system."""

    matrix: np.ndarray
    acting_modes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(np.array(self.matrix, dtype=float)))
        object.__setattr__(self, "acting_modes", tuple(int(m) for m in self.acting_modes))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def symplectic_residual(self) -> float:
        omega = symplectic_form(self.n_modes)
        return float(np.max(np.abs(self.matrix @ omega @ self.matrix.T - omega)))

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        modes = tuple(sorted(set(self.acting_modes) | set(other.acting_modes)))
        return SymplecticTransform(self.matrix @ other.matrix, modes)


def make_thermal(variance: float, label: str = "m0") -> GaussianState:
    """Single-mode thermal state with covariance ``variance * I``.

    A variance of 1 is the vacuum; ``2*nbar + 1`` gives mean photon number ``nbar``.
    """
    if not np.isfinite(variance) or variance < 1.0 - PHYSICAL_TOL:
        raise InvalidVarianceError(f"thermal variance must be >= 1 SNU, got {variance}")
    return GaussianState(variance * np.eye(2), labels=(label,))


def thermal_variance(nbar: float, convention: str = "2n+1") -> float:
    """Quadrature variance (SNU) of a thermal mode with mean photon number ``nbar``.

    ``"2n+1"`` puts the vacuum at 1 SNU. ``"2n+2"`` is the alternative ``2(nbar + 1)``
    scaling, kept only for sensitivity checks.
    """
    if nbar < 0:
        raise InvalidVarianceError(f"mean photon number must be >= 0, got {nbar}")
    if convention == "2n+1":
        return 2.0 * nbar + 1.0
    if convention == "2n+2":
        return 2.0 * (nbar + 1.0)
    raise ValueError(f"unknown thermal variance convention {convention!r}; use '2n+1' or '2n+2'")


def bose_einstein_nbar(omega_angular: float, temperature: float) -> float:
    """Mean thermal photon number ``1 / (exp(hbar*omega / kB*T) - 1)``.

    ``omega_angular`` is in rad/s and ``temperature`` in kelvin.
    """
    if not omega_angular > 0 or not temperature > 0:
        raise ValueError("omega_angular and temperature must both be positive")
    x = constants.hbar * omega_angular / (constants.k * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def direct_sum(states: Iterable[GaussianState]) -> GaussianState:
    """Tensor product of uncorrelated states (block-diagonal covariance)."""
    states = list(states)
    if not states:
        raise ValueError("direct_sum needs at least one state")
    labels = tuple(lbl for s in states for lbl in s.labels)
    if len(set(labels)) != len(labels):
        raise LabelCollisionError(f"duplicate mode labels in direct sum: {labels}")
    dim = sum(2 * s.n_modes for s in states)
    cov = np.zeros((dim, dim))
    k = 0
    for s in states:
        d = 2 * s.n_modes
        cov[k:k + d, k:k + d] = s.cov
        k += d
    disp = np.concatenate([s.disp for s in states])
    return GaussianState(cov, disp, labels)


def beamsplitter(eta: float, mode_i: int, mode_j: int, n_modes: int) -> SymplecticTransform:
    """Beamsplitter of transmittance ``eta`` between ``mode_i`` and ``mode_j``.

    On the pair ``(i, j)`` the map is ``[[sqrt(eta) I, mu I], [-mu I, sqrt(eta) I]]``
    with ``mu = sqrt(1 - eta)``; all other modes are left untouched.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {eta}")
    if mode_i == mode_j:
        raise ValueError("beamsplitter needs two distinct modes")
    for m in (mode_i, mode_j):
        if not 0 <= m < n_modes:
            raise IndexError(f"mode index {m} out of range for {n_modes} modes")
    t, r = math.sqrt(eta), math.sqrt(1.0 - eta)
    s = np.eye(2 * n_modes)
    i, j = 2 * mode_i, 2 * mode_j
    s[i:i + 2, i:i + 2] = t * np.eye(2)
    s[j:j + 2, j:j + 2] = t * np.eye(2)
    s[i:i + 2, j:j + 2] = r * np.eye(2)
    s[j:j + 2, i:i + 2] = -r * np.eye(2)
    return SymplecticTransform(s, (mode_i, mode_j))


def apply(state: GaussianState, transform: SymplecticTransform) -> GaussianState:
    """Propagate ``state`` through ``transform``: ``cov -> S cov S^T``, ``disp -> S disp``."""
    s = transform.matrix
    if s.shape != state.cov.shape:
        raise ValueError(f"transform of shape {s.shape} cannot act on covariance of shape {state.cov.shape}")
    return GaussianState(s @ state.cov @ s.T, s @ state.disp, state.labels)


def reduce(state: GaussianState, modes: Sequence[ModeRef]) -> GaussianState:
    """Partial trace onto ``modes``, keeping the given order."""
    if isinstance(modes, (str, int, np.integer)):
        modes = [modes]
    idx = [state.index(m) for m in modes]
    if not idx:
        raise ValueError("cannot reduce onto an empty set of modes")
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated modes in reduction: {modes}")
    q = np.array([2 * k + c for k in idx for c in (0, 1)])
    return GaussianState(state.cov[np.ix_(q, q)], state.disp[q], tuple(state.labels[k] for k in idx))


def symplectic_eigenvalues(state: GaussianState | np.ndarray) -> np.ndarray:
    """Symplectic spectrum, descending, one value per mode."""
    cov = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise np.linalg.LinAlgError("non-finite covariance matrix")
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    # eigenvalues come in +/- pairs
    return np.sort(ev)[::-1][::2]


def _entropy_kernel(nu: float) -> float:
    if nu < 1.0 - PHYSICAL_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalue {nu} < 1")
    if nu - 1.0 <= PHYSICAL_TOL:
        return 0.0
    plus = (nu + 1.0) / 2.0
    minus = (nu - 1.0) / 2.0
    return plus * math.log2(plus) - minus * math.log2(minus)


def von_neumann_entropy(state: GaussianState | np.ndarray) -> float:
    """Von Neumann entropy in bits from the symplectic spectrum."""
    return float(sum(_entropy_kernel(nu) for nu in symplectic_eigenvalues(state)))


@dataclass(frozen=True)
class PhysicalityVerdict:
    ok: bool
    violation: float = 0.0
    min_eigenvalue: float = float("nan")

    def __bool__(self):
        return self.ok


def check_physical(state: GaussianState | np.ndarray) -> PhysicalityVerdict:
    """Uncertainty-relation check; never raises."""
    cov = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2 or not np.all(np.isfinite(cov)):
        return PhysicalityVerdict(False, float("inf"))
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    try:
        nu_min = float(symplectic_eigenvalues(cov)[-1])
    except np.linalg.LinAlgError:
        return PhysicalityVerdict(False, float("inf"))
    # positive-definiteness is not implied by the moduli of the spectrum alone
    pd = bool(np.all(np.linalg.eigvalsh(0.5 * (cov + cov.T)) > 0))
    violation = max(0.0, 1.0 - nu_min, asym if asym > SYMMETRY_TOL else 0.0)
    if not pd:
        violation = max(violation, 1.0)
    ok = pd and asym <= SYMMETRY_TOL and nu_min >= 1.0 - PHYSICAL_TOL
    return PhysicalityVerdict(ok, violation, nu_min)
