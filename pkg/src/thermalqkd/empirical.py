"""
Monte Carlo emulation of the measured data.

Quadratures are drawn from the protocol covariance, each party slices its
x-series into bits around the empirical mean, and secrecy is estimated from
plug-in Shannon entropies of the observed frequencies.  Intensity correlations
(g2) provide the thermality check.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .gaussian import GaussianState, check_physical

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SampleBatch:
    """``n_samples`` joint quadrature draws; ``data`` columns are ``(x1, p1, x2, p2, ...)``."""

    data: np.ndarray
    labels: tuple[str, ...]
    seed: int
    fingerprint: str

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    def _col(self, mode, offset: int) -> np.ndarray:
        i = self.labels.index(mode) if isinstance(mode, str) else int(mode)
        return self.data[:, 2 * i + offset]

    def x(self, mode) -> np.ndarray:
        return self._col(mode, 0)

    def p(self, mode) -> np.ndarray:
        return self._col(mode, 1)


@dataclass(frozen=True)
class BitStream:
    bits: np.ndarray
    origin: str = ""
    rule: str = "above-mean"

    def __len__(self):
        return len(self.bits)


def covariance_fingerprint(cov: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(cov, dtype=np.float64).tobytes()).hexdigest()[:16]


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit stream seed for grid point ``index``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def sample_quadratures(state: GaussianState | np.ndarray, n: int, seed: int) -> SampleBatch:
    """Draw ``n`` i.i.d. quadrature vectors from a Gaussian state (Cholesky factor, PCG64)."""
    if n < 1:
        raise ValueError("need at least one sample")
    if isinstance(state, GaussianState):
        cov, mean, labels = state.cov, state.disp, state.labels
    else:
        cov = np.asarray(state, dtype=float)
        mean = np.zeros(cov.shape[0])
        labels = tuple(f"m{k}" for k in range(cov.shape[0] // 2))
    verdict = check_physical(cov)
    if not verdict.ok:
        raise ValueError(f"cannot sample an unphysical covariance (violation {verdict.violation:.3g})")
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, cov.shape[0]))
    data = z @ chol.T + mean
    data.setflags(write=False)
    return SampleBatch(data, tuple(labels), int(seed), covariance_fingerprint(cov))


def sample_covariance_zscores(batch: SampleBatch, cov: np.ndarray) -> np.ndarray:
    """Standardized gaps between sample and generating covariance entries.

    The standard error of entry ``(i, j)`` is ``sqrt((S_ii S_jj + S_ij^2) / n)``
    (Gaussian fourth moments).
    """
    n = batch.n_samples
    centred = batch.data - batch.data.mean(axis=0)
    sample = centred.T @ centred / (n - 1)
    d = np.diag(cov)
    se = np.sqrt((np.outer(d, d) + cov ** 2) / n)
    return (sample - cov) / se


def slice_bits(series: np.ndarray, levels: int = 2, origin: str = "") -> BitStream:
    """Reduce a fluctuation series to symbols.

    With ``levels=2`` a sample strictly above the empirical mean is a 1, anything
    else (including exact ties) a 0.  More levels cut at empirical quantiles.
    """
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("cannot slice an empty series")
    if levels < 2:
        raise ValueError("need at least two levels")
    if levels == 2:
        return BitStream((series > series.mean()).astype(np.int8), origin, "above-mean")
    edges = np.quantile(series, np.arange(1, levels) / levels)
    return BitStream(np.searchsorted(edges, series, side="left").astype(np.int8), origin, f"quantile-{levels}")


def joint_counts(*symbols: np.ndarray) -> np.ndarray:
    """Contingency table of several aligned symbol arrays."""
    arrs = [np.asarray(getattr(s, "bits", s), dtype=np.int64) for s in symbols]
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise ValueError("symbol streams must have equal length")
    dims = tuple(int(a.max()) + 1 if a.size else 1 for a in arrs)
    code = np.ravel_multi_index(arrs, dims)
    return np.bincount(code, minlength=int(np.prod(dims))).reshape(dims)


def shannon_entropy(counts, miller_madow: bool = False) -> float:
    """Plug-in entropy (bits) of a count table; ``0 log 0 = 0``."""
    c = np.asarray(counts, dtype=float).ravel()
    total = c.sum()
    if total < 1:
        raise ValueError("need a total count of at least one")
    p = c[c > 0] / total
    h = float(-np.sum(p * np.log2(p)))
    if miller_madow:
        h += (p.size - 1) / (2.0 * total * LN2)
    return h


def empirical_cmi(bits_a, bits_b, bits_e, miller_madow: bool = False) -> float:
    """``H(AE) + H(BE) - H(E) - H(ABE)`` from observed frequencies."""
    joint = joint_counts(bits_a, bits_b, bits_e)
    h = lambda t: shannon_entropy(t, miller_madow)
    return h(joint.sum(axis=1)) + h(joint.sum(axis=0)) - h(joint.sum(axis=(0, 1))) - h(joint)


def empirical_cmi_se(bits_a, bits_b, bits_e) -> float:
    """Standard error of the plug-in CMI.

    First-order (delta-method) variance of the log-likelihood ratio plus the
    second-order chi-square spread ``2 df / (2 n ln 2)^2``, which dominates when
    the true CMI is zero.
    """
    joint = joint_counts(bits_a, bits_b, bits_e).astype(float)
    n = joint.sum()
    p_abe = joint / n
    p_ae = p_abe.sum(axis=1, keepdims=True)
    p_be = p_abe.sum(axis=0, keepdims=True)
    p_e = p_abe.sum(axis=(0, 1), keepdims=True)
    mask = p_abe > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log2(p_abe * p_e / (p_ae * p_be))
    llr = np.where(mask, llr, 0.0)
    cmi = np.sum(p_abe * llr)
    var1 = np.sum(p_abe * (llr - cmi) ** 2) / n
    ka, kb, ke = joint.shape
    df = (ka - 1) * (kb - 1) * ke
    var2 = 2.0 * df / (2.0 * n * LN2) ** 2
    return float(math.sqrt(var1 + var2))


def _bvn_cdf(h: float, k: float, rho: float) -> float:
    """``P(Z1 < h, Z2 < k)`` for standard normals with correlation ``rho``."""
    if 1.0 - abs(rho) < 1e-14:
        return float(special.ndtr(min(h, k))) if rho > 0 else float(max(0.0, special.ndtr(h) - special.ndtr(-k)))
    s = math.sqrt(1.0 - rho * rho)
    f = lambda z: math.exp(-0.5 * z * z) * special.ndtr((k - rho * z) / s)
    val, _ = integrate.quad(f, -np.inf, h, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val / math.sqrt(2.0 * math.pi)


def _positive_orthant(corr: np.ndarray) -> float:
    """``P(X0 > 0, X1 > 0, X2 > 0)`` by quadrature over ``X0``."""
    r01, r02, r12 = corr[0, 1], corr[0, 2], corr[1, 2]
    s1 = math.sqrt(max(1.0 - r01 * r01, 0.0))
    s2 = math.sqrt(max(1.0 - r02 * r02, 0.0))
    if s1 < 1e-12 or s2 < 1e-12:
        raise ValueError("orthant integral needs non-degenerate conditional variances")
    rho = (r12 - r01 * r02) / (s1 * s2)
    rho = min(1.0, max(-1.0, rho))
    # given X0 = t, (X1, X2) has means (r01 t, r02 t) and conditional correlation rho
    f = lambda t: math.exp(-0.5 * t * t) * _bvn_cdf(r01 * t / s1, r02 * t / s2, rho)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val / math.sqrt(2.0 * math.pi)


def sign_orthant_probabilities(cov3: np.ndarray) -> np.ndarray:
    """Probabilities of the 8 sign patterns of a zero-mean trivariate Gaussian.

    Entry ``[i, j, k]`` is ``P(1[x0 > 0] = i, 1[x1 > 0] = j, 1[x2 > 0] = k)``,
    each orthant integrated numerically.
    """
    cov3 = np.asarray(cov3, dtype=float)
    d = np.sqrt(np.diag(cov3))
    corr = cov3 / np.outer(d, d)
    out = np.empty((2, 2, 2))
    for bits in np.ndindex(2, 2, 2):
        if bits[0] == 0:
            continue
        sign = np.array([1.0 if b else -1.0 for b in bits])
        out[bits] = _positive_orthant(corr * np.outer(sign, sign))
        # zero-mean law is symmetric under x -> -x
        out[tuple(1 - b for b in bits)] = out[bits]
    return out


def sign_bit_cmi(cov3: np.ndarray) -> float:
    """Exact CMI (bits) between the sign bits of ``(A, B, E)`` given their covariance."""
    p = sign_orthant_probabilities(cov3)
    h = lambda t: float(-np.sum(t[t > 0] * np.log2(t[t > 0])))
    return h(p.sum(axis=1)) + h(p.sum(axis=0)) - h(p.sum(axis=(0, 1))) - h(p)


def _intensity(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != p.shape:
        raise ValueError("x and p series must have equal length")
    return 0.5 * (x * x + p * p)


def _ratio_se(columns: Sequence[np.ndarray], grad: np.ndarray) -> float:
    c = np.cov(np.vstack(columns))
    return float(math.sqrt(grad @ c @ grad / len(columns[0])))


def g2_auto(x, p) -> float:
    """Zero-delay ``<I^2>/<I>^2`` with intensity ``I = (x^2 + p^2)/2``."""
    i = _intensity(x, p)
    if i.size < 2:
        raise ValueError("need at least two samples")
    m1 = i.mean()
    if m1 == 0:
        raise ZeroDivisionError("zero mean intensity")
    return float(np.mean(i * i) / m1 ** 2)


def g2_auto_stats(x, p) -> tuple[float, float]:
    """``g2_auto`` and its delta-method standard error."""
    g2 = g2_auto(x, p)
    i = _intensity(x, p)
    if np.all(i == i[0]):
        return g2, 0.0
    i2 = i * i
    m1, m2 = i.mean(), i2.mean()
    grad = np.array([-2.0 * m2 / m1 ** 3, 1.0 / m1 ** 2])
    return g2, _ratio_se([i, i2], grad)


def g2_cross(xa, pa, xb, pb) -> float:
    """Cross-intensity correlation ``<I_A I_B>/(<I_A><I_B>)``."""
    ia, ib = _intensity(xa, pa), _intensity(xb, pb)
    if ia.shape != ib.shape:
        raise ValueError("series must have equal length")
    ma, mb = ia.mean(), ib.mean()
    if ma == 0 or mb == 0:
        raise ZeroDivisionError("zero mean intensity")
    return float(np.mean(ia * ib) / (ma * mb))


def g2_cross_stats(xa, pa, xb, pb) -> tuple[float, float]:
    g2 = g2_cross(xa, pa, xb, pb)
    ia, ib = _intensity(xa, pa), _intensity(xb, pb)
    ma, mb = ia.mean(), ib.mean()
    grad = np.array([1.0 / (ma * mb), -g2 / ma, -g2 / mb])
    return g2, _ratio_se([ia * ib, ia, ib], grad)


def g2_cross_gaussian(cov: np.ndarray, mode_a: int, mode_b: int) -> float:
    """Expected ``g2_cross`` of a zero-mean Gaussian state from its covariance (Isserlis)."""
    qa = [2 * mode_a, 2 * mode_a + 1]
    qb = [2 * mode_b, 2 * mode_b + 1]
    ma = 0.5 * (cov[qa[0], qa[0]] + cov[qa[1], qa[1]])
    mb = 0.5 * (cov[qb[0], qb[0]] + cov[qb[1], qb[1]])
    # Cov(u^2, w^2) = 2 Cov(u, w)^2 for jointly Gaussian zero-mean u, w
    cross = 0.25 * sum(2.0 * cov[i, j] ** 2 for i in qa for j in qb)
    return float(1.0 + cross / (ma * mb))


def thermality_verdict(g2: float, se: float, n_sigma: float = 5.0) -> bool:
    """Signal counts as thermal (bunched) when ``g2 > 1 + n_sigma * se``."""
    return bool(g2 > 1.0 + n_sigma * se)
