"""Acceptance criteria, one test each; a PASS/FAIL summary is printed at the end."""

import numpy as np
import pytest

from thermalqkd.empirical import (
    derive_seed,
    g2_auto_stats,
    g2_cross_stats,
    sample_quadratures,
)
from thermalqkd.gaussian import bose_einstein_nbar, reduce
from thermalqkd.network import ProtocolParams, build_network, oracle_residual
from thermalqkd.secrecy import (
    SECRECY_TOL,
    conditional_mutual_information,
    discord,
    mutual_information,
    secrecy_report,
    secrecy_verdict,
)
from thermalqkd.sweep import evaluate_point, parse_config, run_sweep

ETA1_GRID = np.linspace(0.02, 1.0, 50)
N_MC = 1_000_000


@pytest.fixture
def criterion(record_property):
    def mark(number, title):
        record_property("criterion", number)
        record_property("title", title)

    def measured(text):
        record_property("measured", text)

    mark.measured = measured
    return mark


def cmi_and_discord(p):
    s = build_network(p).Gamma_out
    return conditional_mutual_information(s, "a", "b", "e"), discord(s, "a", "b")[0]


def test_c01_photon_number(criterion):
    criterion(1, "Bose-Einstein nbar(3e10 rad/s, 300 K) = 1308.6 +/- 0.5")
    nbar = bose_einstein_nbar(3e10, 300.0)
    criterion.measured(f"nbar = {nbar:.4f}")
    assert abs(nbar - 1308.6) <= 0.5


def test_c02_appendix_oracle(criterion):
    criterion(2, "propagated vs closed-form covariances, 1e4 random draws, max residual < 1e-10")
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(10_000):
        p = ProtocolParams(
            source_kind="thermal" if rng.random() < 0.5 else "coherent",
            nbar=rng.uniform(0.0, 2000.0),
            ve=rng.uniform(1.0, 500.0),
            eta1=rng.uniform(0.0, 1.0),
            eta2=rng.uniform(0.0, 1.0),
            eta3=rng.uniform(0.0, 1.0),
            eta4=rng.uniform(0.0, 1.0),
            eps3=rng.uniform(0.0, 0.1),
            eps4=rng.uniform(0.0, 0.1),
        )
        worst = max(worst, oracle_residual(build_network(p)))
    criterion.measured(f"max residual = {worst:.3g}")
    assert worst < 1e-10


def test_c03_secrecy_positivity(criterion):
    criterion(3, "I(A:B|E) > 0 on the grid; D(B|A) > 1e-6 for eta1 >= 0.1 (Ve = 1, 50, 250)")
    min_cmi, min_d = np.inf, np.inf
    for ve in (1.0, 50.0, 250.0):
        for eta1 in ETA1_GRID:
            cmi, d = cmi_and_discord(ProtocolParams(eta1=eta1, ve=ve))
            min_cmi = min(min_cmi, cmi)
            if eta1 >= 0.1:
                min_d = min(min_d, d)
    criterion.measured(f"min CMI = {min_cmi:.3g}, min D(eta1>=0.1) = {min_d:.3g}")
    assert min_cmi > 0 and min_d > 1e-6


def test_c04_monotonicity(criterion):
    criterion(4, "CMI strictly increasing in eta1 at Ve = 1; D(Ve=250) > D(Ve=1) at eta1 = 0")
    cmi = np.array([cmi_and_discord(ProtocolParams(eta1=e, ve=1.0))[0] for e in ETA1_GRID])
    d_cold = cmi_and_discord(ProtocolParams(eta1=0.0, ve=1.0))[1]
    d_hot = cmi_and_discord(ProtocolParams(eta1=0.0, ve=250.0))[1]
    criterion.measured(f"min step = {np.min(np.diff(cmi)):.3g}, D = {d_cold:.3g} vs {d_hot:.3g}")
    assert np.all(np.diff(cmi) > 0) and d_hot > d_cold


def test_c05_eve_decoupling(criterion):
    criterion(5, "at eta1 = 1: |CMI - MI| < 1e-9 and e-{a,b} covariances < 1e-12")
    gap = cross = 0.0
    for ve in (1.0, 50.0, 250.0):
        s = build_network(ProtocolParams(eta1=1.0, ve=ve)).Gamma_out
        gap = max(gap, abs(conditional_mutual_information(s, "a", "b", "e") - mutual_information(s, "a", "b")))
        cross = max(cross, np.max(np.abs(s.block("e", "a"))), np.max(np.abs(s.block("e", "b"))))
    criterion.measured(f"|CMI-MI| = {gap:.3g}, max cross = {cross:.3g}")
    assert gap < 1e-9 and cross < 1e-12


def test_c06_coherent_flatness(criterion):
    criterion(6, "coherent source: analytic CMI spread < 1e-9; sampled spread < 3 SE at n = 1e6")
    analytic, sampled, ses = [], [], []
    for eta1 in ETA1_GRID:
        row = evaluate_point(ProtocolParams(source_kind="coherent", eta1=eta1), "both", N_MC, 0)
        analytic.append(row["i_ab_given_e"])
        sampled.append(row["cmi_empirical"])
        ses.append(row["cmi_empirical_se"])
    spread_a, spread_s = np.ptp(analytic), np.ptp(sampled)
    criterion.measured(f"analytic spread = {spread_a:.3g}, sampled spread = {spread_s:.3g}, SE = {min(ses):.3g}")
    assert spread_a < 1e-9 and spread_s < 3 * min(ses)


def test_c07_monte_carlo_consistency(criterion):
    criterion(7, "sampled CMI vs orthant oracle |z| < 3 and covariance |z| < 5, 10 points, n = 1e6")
    zs, covz = [], []
    for k, eta1 in enumerate(np.linspace(0.1, 1.0, 10)):
        row = evaluate_point(ProtocolParams(eta1=eta1), "both", N_MC, derive_seed(7, k))
        zs.append(row["cmi_z"])
        covz.append(row["cov_max_abs_z"])
    criterion.measured(f"max |cmi z| = {np.max(np.abs(zs)):.2f}, max |cov z| = {max(covz):.2f}")
    assert np.max(np.abs(zs)) < 3 and max(covz) < 5


def test_c08_thermality(criterion):
    criterion(8, "thermal g2 = 2.00 +/- 0.02; g2_cross > 1 + 5 SE at eta1 = 1; coherent g2 below thermal by >= 10 SE")

    def alice_bob(source):
        s = reduce(build_network(ProtocolParams(source_kind=source, eta1=1.0)).Gamma_out, ["a", "b"])
        return sample_quadratures(s, N_MC, 8 if source == "thermal" else 9)

    th, co = alice_bob("thermal"), alice_bob("coherent")
    g_th, se_th = g2_auto_stats(th.x("a"), th.p("a"))
    g_x, se_x = g2_cross_stats(th.x("a"), th.p("a"), th.x("b"), th.p("b"))
    g_co, se_co = g2_auto_stats(co.x("a"), co.p("a"))
    gap_sigma = (g_th - g_co) / np.hypot(se_th, se_co)
    criterion.measured(
        f"thermal {g_th:.4f}+/-{se_th:.4f}, cross {g_x:.4f}+/-{se_x:.4f}, coherent {g_co:.4f}, gap {gap_sigma:.0f} SE"
    )
    assert abs(g_th - 2.0) <= 0.02
    assert g_x > 1 + 5 * se_x
    assert gap_sigma >= 10


def test_c09_cmi_discord_agreement(criterion):
    criterion(9, "CMI > tol and D > tol agree on >= 99% of a 50 x 10 (eta1, Ve) grid")
    verdicts = []
    for ve in np.linspace(1.0, 250.0, 10):
        for eta1 in ETA1_GRID:
            p = ProtocolParams(eta1=eta1, ve=ve)
            verdicts.append((eta1, ve, secrecy_verdict(secrecy_report(build_network(p)), SECRECY_TOL)))
    marginal = [(e, v) for e, v, verdict in verdicts if verdict == "marginal"]
    agreement = 1 - len(marginal) / len(verdicts)
    criterion.measured(f"agreement = {agreement:.2%}, marginal points = {marginal}")
    assert agreement >= 0.99


def test_c10_reproducibility(criterion, tmp_path):
    criterion(10, "identical config and seed give byte-identical CSVs")
    flags = {"sweep": "eta1=0.1:1:10", "mode": "both", "samples": "20000", "seed": "12345",
             "seed-policy": "per-point"}
    first = run_sweep(parse_config(None, {**flags, "out": str(tmp_path / "a")}, env={}))
    second = run_sweep(parse_config(None, {**flags, "out": str(tmp_path / "b"), "jobs": "2"}, env={}))
    same = all(a.read_bytes() == b.read_bytes() for a, b in zip(first, second))
    criterion.measured(f"{len(first)} files compared")
    assert same
