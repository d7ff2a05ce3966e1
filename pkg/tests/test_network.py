import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermalqkd.gaussian import check_physical, reduce
from thermalqkd.network import (
    FIVE_MODE_LABELS,
    ProtocolParams,
    appendix_Gamma_out,
    appendix_gamma_out,
    build_network,
    oracle_residual,
    thermal_channel_input_variance,
)

open_unit = st.floats(0.01, 0.99)
unit = st.floats(0.0, 1.0)


@st.composite
def params(draw, source=None):
    return ProtocolParams(
        source_kind=source or draw(st.sampled_from(["thermal", "coherent"])),
        vs=draw(st.floats(1.0, 5000.0)),
        ve=draw(st.floats(1.0, 500.0)),
        eta1=draw(unit),
        eta2=draw(unit),
        eta3=draw(open_unit),
        eta4=draw(open_unit),
        eps3=draw(st.floats(0.0, 0.2)),
        eps4=draw(st.floats(0.0, 0.2)),
    )


def brute_force_chain(p: ProtocolParams) -> np.ndarray:
    """Independent propagation with explicit 10x10 quadrature maps in (s, e, vac, n3, n4) ordering."""
    t = lambda eta: (math.sqrt(eta), math.sqrt(1 - eta))
    cov = np.diag(np.repeat([p.source_variance, p.ve, 1.0, p.n3, p.n4], 2))

    def bs(eta, i, j):
        s, r = t(eta)
        m = np.eye(10)
        for q in (0, 1):
            a, b = 2 * i + q, 2 * j + q
            m[a, a] = m[b, b] = s
            m[a, b], m[b, a] = r, -r
        return m

    # slots: 0=s->signal->a, 1=e (Eve), 2=vac->b, 3=n3->v, 4=n4->v'
    for m in (bs(p.eta1, 0, 1), bs(p.eta2, 2, 0), bs(p.eta3, 3, 0), bs(p.eta4, 2, 4)):
        cov = m @ cov @ m.T
    order = [3, 0, 1, 2, 4]  # (v, a, e, b, v')
    q = [2 * k + c for k in order for c in (0, 1)]
    return cov[np.ix_(q, q)]


class TestChannelVariance:
    def test_noiseless(self):
        assert thermal_channel_input_variance(0.2, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_figure_parameters(self):
        # 0.2 * ((0.8 / 0.2) + 0.01) / 0.8 = 1 + 0.2 * 0.01 / 0.8
        assert thermal_channel_input_variance(0.2, 0.01) == pytest.approx(1.0025, abs=1e-14)

    def test_pole_at_unit_transmission(self):
        assert thermal_channel_input_variance(1 - 1e-9, 0.01) > 1e6
        with pytest.raises(ZeroDivisionError, match="pure-loss"):
            thermal_channel_input_variance(1.0, 0.01)
        with pytest.raises(ZeroDivisionError):
            thermal_channel_input_variance(0.0, 0.01)

    @given(open_unit, st.floats(0, 1))
    def test_simplified_form(self, eta, eps):
        assert thermal_channel_input_variance(eta, eps) == pytest.approx(1 + eta * eps / (1 - eta), rel=1e-12)


class TestParams:
    def test_defaults_match_figure(self):
        p = ProtocolParams()
        assert (p.eta2, p.eta3, p.eta4, p.eps3, p.eps4, p.ve) == (0.5, 0.2, 0.2, 0.01, 0.01, 1.0)
        assert p.source_variance == 2619.0

    def test_coherent_has_vacuum_variance(self):
        assert ProtocolParams(source_kind="coherent").source_variance == 1.0

    @pytest.mark.parametrize("bad", [{"eta1": 1.5}, {"ve": 0.5}, {"eps3": -1}, {"eta3": 1.0}, {"source_kind": "laser"}])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ProtocolParams(**bad)

    def test_pure_loss_at_unit_transmission(self):
        assert ProtocolParams(eta3=1.0, eps3=0.0).n3 == 1.0


class TestBuildNetwork:
    def test_eve_passes_through_at_full_transmission(self):
        out = build_network(ProtocolParams(eta1=1.0, ve=37.0))
        np.testing.assert_allclose(out.gamma_out.block("e"), 37.0 * np.eye(2), atol=1e-12)

    def test_vacuum_network(self):
        out = build_network(ProtocolParams(vs=1.0, ve=1.0, eta1=0.5, eta2=0.5, eps3=0, eps4=0))
        np.testing.assert_allclose(out.Gamma_out.cov, np.eye(10), atol=1e-12)
        np.testing.assert_allclose(out.gamma_out.cov, np.eye(6), atol=1e-12)

    def test_labels(self):
        out = build_network(ProtocolParams())
        assert out.gamma_out.labels == ("b", "a", "e")
        assert out.Gamma_out.labels == FIVE_MODE_LABELS

    def test_figure_sweep_states_are_physical(self):
        for ve in (1, 50, 250):
            for eta1 in np.linspace(0.0, 1.0, 51):
                out = build_network(ProtocolParams(eta1=eta1, ve=ve))
                assert check_physical(out.Gamma_out).ok
                assert check_physical(out.gamma_out).ok

    @settings(max_examples=300)
    @given(params())
    def test_matches_brute_force_chain(self, p):
        np.testing.assert_allclose(build_network(p).Gamma_out.cov, brute_force_chain(p), atol=1e-9, rtol=1e-12)

    def test_channels_commute(self):
        # applying eta4 before eta3 gives the same state (disjoint modes)
        p = ProtocolParams(eta1=0.7, ve=20)
        from thermalqkd.gaussian import apply, beamsplitter, direct_sum, make_thermal

        g = build_network(p).gamma_out
        s = direct_sum([make_thermal(p.n3, "v"), g, make_thermal(p.n4, "v'")])
        s = apply(apply(s, beamsplitter(p.eta4, 1, 4, 5)), beamsplitter(p.eta3, 0, 2, 5))
        np.testing.assert_allclose(reduce(s, FIVE_MODE_LABELS).cov, build_network(p).Gamma_out.cov, atol=1e-12)

    def test_coherent_displacement_is_carried(self):
        out = build_network(ProtocolParams(source_kind="coherent", eta1=1.0, eta2=1.0, eta3=0.5, eps3=0.0))
        d = 2 * math.sqrt(1309)
        np.testing.assert_allclose(out.Gamma_out.disp[2:4], [math.sqrt(0.5) * d, 0], rtol=1e-12)


class TestClosedForm:
    def test_eve_decoupled_at_unit_eta1(self):
        g = appendix_gamma_out(ProtocolParams(eta1=1.0, ve=50))
        assert np.all(g.block("e", "a") == 0) and np.all(g.block("e", "b") == 0)

    def test_equal_variances_decouple_eve(self):
        g = appendix_gamma_out(ProtocolParams(vs=40, ve=40, eta1=0.3))
        assert np.all(g.block("e", "a") == 0) and np.all(g.block("e", "b") == 0)

    def test_generic_point(self):
        p = ProtocolParams(eta1=0.7, eta2=0.5, vs=5, ve=2)
        np.testing.assert_allclose(appendix_gamma_out(p).cov, build_network(p).gamma_out.cov, atol=1e-14)
        np.testing.assert_allclose(appendix_Gamma_out(p).cov, build_network(p).Gamma_out.cov, atol=1e-12)

    def test_appendix_entries_by_hand(self):
        # eta1=0.7, eta2=0.5, vs=5, ve=2: signal variance 0.7*5 + 0.3*2 = 4.1
        g = appendix_gamma_out(ProtocolParams(eta1=0.7, eta2=0.5, vs=5, ve=2))
        assert g.block("a")[0, 0] == pytest.approx(0.5 + 0.5 * 4.1)
        assert g.block("b")[0, 0] == pytest.approx(0.5 + 0.5 * 4.1)
        assert g.block("e")[0, 0] == pytest.approx(0.3 * 5 + 0.7 * 2)
        assert g.block("a", "b")[0, 0] == pytest.approx(0.5 * 3.1)
        assert g.block("e", "a")[0, 0] == pytest.approx(-math.sqrt(0.3 * 0.7 * 0.5) * 3)

    def test_transparent_channel_limit(self):
        p = ProtocolParams(eta1=0.6, ve=9, eta3=1 - 1e-12, eta4=1 - 1e-12, eps3=0, eps4=0)
        big, small = appendix_Gamma_out(p), appendix_gamma_out(p)
        np.testing.assert_allclose(big.block("a"), small.block("a"), rtol=1e-9)
        # leaked correlation is mu * sqrt(eta) * (<X^2> - N) with mu = 1e-6
        va = small.block("a")[0, 0]
        assert big.block("v", "a")[0, 0] == pytest.approx(1e-6 * (va - 1), rel=1e-3)
        assert np.max(np.abs(big.block("v", "e"))) < 1e-6 * np.max(np.abs(small.block("a", "e"))) * 1.001

    def test_va_block_vanishes_when_noise_matches_signal(self):
        p0 = ProtocolParams(eta1=0.5, ve=1.0, vs=1.0, eps3=0.0)  # <X_a^2> = 1 = N3
        assert np.all(np.abs(appendix_Gamma_out(p0).block("v", "a")) < 1e-15)

    def test_closed_form_needs_open_channels(self):
        with pytest.raises(ValueError):
            appendix_Gamma_out(ProtocolParams(eta3=1.0, eps3=0.0))

    @settings(max_examples=500)
    @given(params())
    def test_oracle_equivalence(self, p):
        assert oracle_residual(build_network(p)) < 1e-10


class TestNetworkProperties:
    @given(params(source="thermal"))
    def test_eve_decoupling(self, p):
        out = build_network(p.with_(eta1=1.0))
        s = out.Gamma_out
        for m in ("a", "b", "v", "v'"):
            assert np.max(np.abs(s.block("e", m))) < 1e-12

    @given(params(source="thermal"))
    def test_splitter_conserves_photons(self, p):
        out = build_network(p)
        sig = p.eta1 * p.source_variance + (1 - p.eta1) * p.ve
        ab = reduce(out.gamma_out, ["a", "b"]).cov
        assert np.trace(ab) == pytest.approx(2 * (sig + 1), rel=1e-12)

    @given(params(source="thermal"))
    def test_pure_loss_never_adds_photons(self, p):
        p = p.with_(eps3=0.0, eps4=0.0)
        out = build_network(p)
        before = np.trace(reduce(out.gamma_out, ["a", "b"]).cov)
        after = np.trace(reduce(out.Gamma_out, ["a", "b"]).cov)
        assert after <= before * (1 + 1e-12)

    @given(params(source="thermal"))
    def test_alice_bob_mirror_symmetry(self, p):
        q = p.with_(eta2=1 - p.eta2, eta3=p.eta4, eta4=p.eta3, eps3=p.eps4, eps4=p.eps3)
        s, t = build_network(p).Gamma_out, build_network(q).Gamma_out
        np.testing.assert_allclose(s.block("a"), t.block("b"), rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(s.block("b"), t.block("a"), rtol=1e-9, atol=1e-9)
