"""
Gaussian model of the central-broadcast network.

Mode chain::

    source s --+                       +-- eta3 (with thermal N3) --> Alice a, leak v
               |-- eta1 --> signal --eta2
    Eve e   ---+       \\               +-- eta4 (with thermal N4) --> Bob b,  leak v'
                        +--> Eve keeps the reflected port

The three-mode state after ``eta2`` is ordered ``(b, a, e)`` and the final
five-mode state ``(v, a, e, b, v')``.  ``appendix_gamma_out`` and
``appendix_Gamma_out`` give the same matrices from closed-form block
expressions and serve as independent oracles for ``build_network``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gaussian import (
    GaussianState,
    apply,
    beamsplitter,
    check_physical,
    direct_sum,
    make_thermal,
    reduce,
    thermal_variance,
)

THREE_MODE_LABELS = ("b", "a", "e")
FIVE_MODE_LABELS = ("v", "a", "e", "b", "v'")


class NetworkStageError(RuntimeError):
    """An intermediate state of the network failed the physicality check."""

    def __init__(self, stage: str, detail: str):
        super().__init__(f"unphysical state at stage {stage!r}: {detail}")
        self.stage = stage


@dataclass(frozen=True)
class ProtocolParams:
    """Dial settings of one protocol run.

    ``vs`` overrides the source variance derived from ``nbar``.  A coherent
    source has unit quadrature variance and a mean x-displacement of
    ``coherent_amplitude`` (default ``2*sqrt(nbar)``, i.e. the same mean
    photon number as the thermal source).
    """

    source_kind: str = "thermal"
    nbar: float = 1309.0
    vs: float | None = None
    ve: float = 1.0
    eta1: float = 0.5
    eta2: float = 0.5
    eta3: float = 0.2
    eta4: float = 0.2
    eps3: float = 0.01
    eps4: float = 0.01
    variance_convention: str = "2n+1"
    coherent_amplitude: float | None = None

    def __post_init__(self):
        if self.source_kind not in ("thermal", "coherent"):
            raise ValueError(f"source_kind must be 'thermal' or 'coherent', got {self.source_kind!r}")
        for name in ("eta1", "eta2", "eta3", "eta4"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("eps3", "eps4"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.eps3 > 0 and not 0.0 < self.eta3 < 1.0:
            raise ValueError("eta3 must lie in (0, 1) when eps3 > 0")
        if self.eps4 > 0 and not 0.0 < self.eta4 < 1.0:
            raise ValueError("eta4 must lie in (0, 1) when eps4 > 0")
        if self.ve < 1.0:
            raise ValueError(f"ve must be >= 1 SNU, got {self.ve}")
        if self.nbar < 0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if self.vs is not None and self.vs < 1.0:
            raise ValueError(f"vs must be >= 1 SNU, got {self.vs}")

    @property
    def source_variance(self) -> float:
        if self.source_kind == "coherent":
            return 1.0
        if self.vs is not None:
            return float(self.vs)
        return thermal_variance(self.nbar, self.variance_convention)

    @property
    def source_displacement(self) -> np.ndarray:
        if self.source_kind != "coherent":
            return np.zeros(2)
        amp = 2.0 * math.sqrt(self.nbar) if self.coherent_amplitude is None else self.coherent_amplitude
        return np.array([amp, 0.0])

    @property
    def n3(self) -> float:
        return _channel_variance(self.eta3, self.eps3)

    @property
    def n4(self) -> float:
        return _channel_variance(self.eta4, self.eps4)

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)


def thermal_channel_input_variance(eta: float, eps: float) -> float:
    """Environment variance ``N = eta*chi/(1 - eta)`` with ``chi = (1 - eta)/eta + eps``.

    Simplifies to ``1 + eta*eps/(1 - eta)``.  Undefined at ``eta`` in {0, 1}; the
    pure-loss limit should use ``N = 1`` directly.
    """
    if not 0.0 < eta < 1.0:
        raise ZeroDivisionError(
            f"channel variance undefined at eta={eta}; for a pure-loss channel use N = 1"
        )
    if eps < 0:
        raise ValueError(f"excess noise must be >= 0, got {eps}")
    chi = (1.0 - eta) / eta + eps
    return eta * chi / (1.0 - eta)


def _channel_variance(eta: float, eps: float) -> float:
    if eps == 0.0:
        return 1.0
    return thermal_channel_input_variance(eta, eps)


@dataclass(frozen=True)
class NetworkOutput:
    gamma_out: GaussianState  # (b, a, e) after eta2
    Gamma_out: GaussianState  # (v, a, e, b, v') after eta3, eta4
    params: ProtocolParams


def _checked(state: GaussianState, stage: str) -> GaussianState:
    verdict = check_physical(state)
    if not verdict.ok:
        raise NetworkStageError(stage, f"violation {verdict.violation:.3g}, min eigenvalue {verdict.min_eigenvalue:.12g}")
    return state


def build_network(params: ProtocolParams) -> NetworkOutput:
    """Propagate the source and Eve's mode through the four beamsplitters."""
    p = params
    src = make_thermal(p.source_variance, "s")
    src = GaussianState(src.cov, p.source_displacement, src.labels)
    state = _checked(direct_sum([src, make_thermal(p.ve, "e")]), "input")

    # Eve's cloner: port 0 carries the signal onwards, Eve keeps port 1
    state = apply(state, beamsplitter(p.eta1, 0, 1, 2)).relabel(("sig", "e"))
    state = _checked(state, "eta1")

    # Alice's splitter, vacuum on the first input: outputs (b, a)
    state = direct_sum([make_thermal(1.0, "vac"), state])
    state = apply(state, beamsplitter(p.eta2, 0, 1, 3)).relabel(THREE_MODE_LABELS)
    gamma_out = _checked(state, "eta2")

    # lossy thermal channels; modes are (v, b, a, e, v')
    state = direct_sum([make_thermal(p.n3, "v"), gamma_out, make_thermal(p.n4, "v'")])
    state = apply(state, beamsplitter(p.eta3, 0, 2, 5))
    state = _checked(state, "eta3")
    state = apply(state, beamsplitter(p.eta4, 1, 4, 5))
    state = _checked(state, "eta4")
    Gamma_out = reduce(state, FIVE_MODE_LABELS)
    return NetworkOutput(gamma_out, Gamma_out, params)


def _assemble(blocks: dict[tuple[str, str], np.ndarray], labels: tuple[str, ...]) -> np.ndarray:
    n = len(labels)
    cov = np.zeros((2 * n, 2 * n))
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels):
            if (li, lj) in blocks:
                b = blocks[li, lj]
            else:
                b = blocks[lj, li].T
            cov[2 * i:2 * i + 2, 2 * j:2 * j + 2] = b
    return cov


def _closed_form_after_eta2(p: ProtocolParams) -> dict[str, np.ndarray]:
    """Diagonal entries (x, p) of every 2x2 block after the second splitter."""
    vs = np.full(2, p.source_variance)
    ve = np.full(2, float(p.ve))
    eta1, eta2 = p.eta1, p.eta2
    mu1, mu2 = math.sqrt(1.0 - eta1), math.sqrt(1.0 - eta2)
    sig = eta1 * vs + mu1 ** 2 * ve
    return {
        "b": eta2 + mu2 ** 2 * sig,
        "a": mu2 ** 2 + eta2 * sig,
        "e": mu1 ** 2 * vs + eta1 * ve,
        "ea": -mu1 * math.sqrt(eta1) * math.sqrt(eta2) * (vs - ve),
        "eb": -mu1 * math.sqrt(eta1) * mu2 * (vs - ve),
        "ab": mu2 * math.sqrt(eta2) * (sig - 1.0),
    }


def appendix_gamma_out(params: ProtocolParams) -> GaussianState:
    """Closed-form three-mode covariance after the second splitter, ordered ``(b, a, e)``."""
    g = _closed_form_after_eta2(params)
    blocks = {
        ("b", "b"): np.diag(g["b"]),
        ("a", "a"): np.diag(g["a"]),
        ("e", "e"): np.diag(g["e"]),
        ("a", "b"): np.diag(g["ab"]),
        ("e", "b"): np.diag(g["eb"]),
        ("e", "a"): np.diag(g["ea"]),
    }
    return GaussianState(_assemble(blocks, THREE_MODE_LABELS), labels=THREE_MODE_LABELS)


def appendix_Gamma_out(params: ProtocolParams) -> GaussianState:
    """Closed-form five-mode covariance after both lossy channels, ordered ``(v, a, e, b, v')``."""
    p = params
    if not (0.0 < p.eta3 < 1.0 and 0.0 < p.eta4 < 1.0):
        raise ValueError("closed form needs eta3, eta4 in (0, 1)")
    g = _closed_form_after_eta2(p)
    xa2, xb2, xe2 = g["a"], g["b"], g["e"]
    xaxb, xaxe, xbxe = g["ab"], g["ea"], g["eb"]
    eta3, eta4 = p.eta3, p.eta4
    mu3, mu4 = math.sqrt(1.0 - eta3), math.sqrt(1.0 - eta4)
    n3, n4 = p.n3, p.n4
    s3, s4 = math.sqrt(eta3), math.sqrt(eta4)
    d = np.diag
    blocks = {
        ("e", "e"): d(xe2),
        ("a", "a"): d(mu3 ** 2 * n3 + eta3 * xa2),
        ("b", "b"): d(mu4 ** 2 * n4 + eta4 * xb2),
        ("v", "v"): d(eta3 * n3 + mu3 ** 2 * xa2),
        ("v'", "v'"): d(eta4 * n4 + mu4 ** 2 * xb2),
        ("e", "a"): d(s3 * xaxe),
        ("e", "b"): d(s4 * xbxe),
        ("a", "b"): d(s3 * s4 * xaxb),
        ("v", "v'"): d(-mu3 * mu4 * xaxb),
        ("v", "b"): d(mu3 * s4 * xaxb),
        ("a", "v'"): d(-s3 * mu4 * xaxb),
        ("v", "a"): d(mu3 * s3 * (xa2 - n3)),
        ("b", "v'"): d(mu4 * s4 * (n4 - xb2)),
        ("v", "e"): d(mu3 * xaxe),
        ("e", "v'"): d(-mu4 * xbxe),
    }
    return GaussianState(_assemble(blocks, FIVE_MODE_LABELS), labels=FIVE_MODE_LABELS)


def oracle_residual(output: NetworkOutput) -> float:
    """Largest entrywise gap between propagated and closed-form covariances."""
    r3 = np.max(np.abs(output.gamma_out.cov - appendix_gamma_out(output.params).cov))
    r5 = np.max(np.abs(output.Gamma_out.cov - appendix_Gamma_out(output.params).cov))
    return float(max(r3, r5))
