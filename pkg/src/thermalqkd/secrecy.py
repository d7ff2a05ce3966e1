"""Mutual information, conditional mutual information and Gaussian discord."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import (
    PHYSICAL_TOL,
    GaussianState,
    ModeRef,
    UnphysicalStateError,
    check_physical,
    reduce,
    von_neumann_entropy,
)
from .network import NetworkOutput, ProtocolParams

#: positivity threshold (bits) used by the secrecy verdict
SECRECY_TOL = 1e-6

QUADRATURE_ANGLES = {"x": 0.0, "p": math.pi / 2}


class SingularMeasurementError(ValueError):
    """The measured quadrature has (numerically) zero variance."""


def _modes(part) -> list:
    if isinstance(part, (str, int, np.integer)):
        return [part]
    return list(part)


def _disjoint(state: GaussianState, *parts) -> list[list[int]]:
    idx = [[state.index(m) for m in _modes(p)] for p in parts]
    flat = [i for p in idx for i in p]
    if any(not p for p in idx):
        raise ValueError("mode subsets must be non-empty")
    if len(set(flat)) != len(flat):
        raise ValueError(f"mode subsets overlap: {parts}")
    return idx


def _entropy(state: GaussianState, *parts: list[int]) -> float:
    return von_neumann_entropy(reduce(state, [i for p in parts for i in p]))


def mutual_information(state: GaussianState, part_a, part_b) -> float:
    """``I(A:B) = S(A) + S(B) - S(AB)`` in bits."""
    a, b = _disjoint(state, part_a, part_b)
    return _entropy(state, a) + _entropy(state, b) - _entropy(state, a, b)


def conditional_mutual_information(state: GaussianState, part_a, part_b, part_e) -> float:
    """``I(A:B|E) = S(AE) + S(BE) - S(E) - S(ABE)`` in bits."""
    a, b, e = _disjoint(state, part_a, part_b, part_e)
    return (
        _entropy(state, a, e)
        + _entropy(state, b, e)
        - _entropy(state, e)
        - _entropy(state, a, b, e)
    )


def _angle(quadrature) -> float:
    if isinstance(quadrature, str):
        try:
            return QUADRATURE_ANGLES[quadrature]
        except KeyError:
            raise ValueError(f"quadrature must be 'x', 'p' or an angle, got {quadrature!r}") from None
    return float(quadrature)


def conditional_cov_homodyne(
    state: GaussianState,
    measured_mode: ModeRef,
    target_modes: Sequence[ModeRef] | ModeRef,
    quadrature="x",
) -> np.ndarray:
    """Covariance of ``target_modes`` after homodyning one quadrature of ``measured_mode``.

    ``quadrature`` is ``'x'``, ``'p'`` or a rotation angle ``theta`` selecting
    ``cos(theta) x + sin(theta) p``.  The projector ``X = u u^T`` has rank one,
    so its pseudo-inverse only inverts the measured variance ``u^T A u``::

        B - C X (X A X)^+ X C^T = B - (C u)(C u)^T / (u^T A u)
    """
    m, t = _disjoint(state, measured_mode, target_modes)
    theta = _angle(quadrature)
    u = np.array([math.cos(theta), math.sin(theta)])
    a = reduce(state, m).cov
    tq = np.array([2 * k + c for k in t for c in (0, 1)])
    mq = np.array([2 * m[0], 2 * m[0] + 1])
    b = state.cov[np.ix_(tq, tq)]
    c = state.cov[np.ix_(tq, mq)]
    var = float(u @ a @ u)
    if var < 1e-12:
        raise SingularMeasurementError(f"measured quadrature variance {var:.3g} is singular")
    if var < 1.0 - PHYSICAL_TOL:
        raise UnphysicalStateError(f"measured quadrature variance {var:.12g} is below the vacuum level")
    cu = c @ u
    return b - np.outer(cu, cu) / var


def discord(
    state: GaussianState,
    measured: ModeRef,
    target: ModeRef,
    quadratures: Sequence = ("x", "p"),
) -> tuple[float, object]:
    """Homodyne Gaussian discord ``D(B|A)`` with A = ``measured`` and B = ``target``.

    Returns the discord in bits and the quadrature achieving the minimum
    conditional entropy.  Pass a fine grid of angles to ``quadratures`` for
    robustness studies.
    """
    a, b = _disjoint(state, measured, target)
    best, arg = math.inf, None
    for q in quadratures:
        s = von_neumann_entropy(conditional_cov_homodyne(state, a[0], b, q))
        if s < best:
            best, arg = s, q
    return _entropy(state, a) - _entropy(state, a, b) + best, arg


@dataclass(frozen=True)
class SecrecyReport:
    i_ab: float
    i_ab_given_e: float
    discord_b_given_a: float
    discord_argmin_quadrature: object
    physical: bool
    params: ProtocolParams | None = None


def secrecy_report(output: NetworkOutput) -> SecrecyReport:
    """Analytic secrecy figures for Alice ``a``, Bob ``b`` and Eve ``e``."""
    state = output.Gamma_out
    d, q = discord(state, "a", "b")
    return SecrecyReport(
        i_ab=mutual_information(state, "a", "b"),
        i_ab_given_e=conditional_mutual_information(state, "a", "b", "e"),
        discord_b_given_a=d,
        discord_argmin_quadrature=q,
        physical=check_physical(state).ok,
        params=output.params,
    )


def secrecy_verdict(report: SecrecyReport, tol: float = SECRECY_TOL) -> str:
    """``'secret'`` when both the CMI and the discord exceed ``tol``.

    ``'marginal'`` flags disagreement between the two criteria, which should be
    equivalent; ``'not-secret'`` means neither is positive.
    """
    cmi_pos = report.i_ab_given_e > tol
    discord_pos = report.discord_b_given_a > tol
    if cmi_pos and discord_pos:
        return "secret"
    if cmi_pos or discord_pos:
        return "marginal"
    return "not-secret"
