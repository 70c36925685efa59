import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcddg import physics as ph


class TestMaterials:
    def test_ltgaas_values(self):
        m = ph.lt_gaas()
        assert m.eps_r == pytest.approx(13.26)
        assert m.doping == pytest.approx(1.3e22)       # 1.3e16 cm^-3
        assert m.n_i == pytest.approx(9e12)            # 9e6 cm^-3
        assert m.mu_e0 == pytest.approx(0.8)           # 8000 cm^2/V/s
        assert m.mu_h0 == pytest.approx(0.04)
        assert m.tau_e + m.tau_h == pytest.approx(0.7e-12)
        assert m.alpha_abs == pytest.approx(1e6)       # 1/um

    def test_validation(self):
        with pytest.raises(ph.PhysicsError):
            ph.Material(name="bad", eps_r=-1.0)
        with pytest.raises(ph.PhysicsError):
            ph.Material(name="bad", semiconductor=True, n_i=1e12, tau_e=1e-12,
                        tau_h=1e-12, mu_e0=0.1, mu_h0=0.1, v_sat_e=1e5,
                        v_sat_h=1e5, beta_e=5.0)

    def test_unknown_region(self):
        with pytest.raises(ph.PhysicsError, match="unknown material region"):
            ph.default_materials().region("unobtanium")

    def test_thermal_voltage(self):
        assert ph.thermal_voltage(300.0) == pytest.approx(0.02585, rel=1e-3)
        with pytest.raises(ph.PhysicsError):
            ph.thermal_voltage(-5.0)


class TestSRH:
    def test_known_value(self):
        # n_e = n_h = 1e12 cm^-3 >> n_1: R ~ dn^2/((tau_e+tau_h) dn) = dn/0.7ps
        m = ph.lt_gaas()
        r = ph.srh_recombination(1e18, 1e18, m)
        assert r == pytest.approx(1e18 / 0.7e-12, rel=1e-4)

    def test_equilibrium_is_zero(self):
        m = ph.lt_gaas()
        assert ph.srh_recombination(m.n_i, m.n_i, m) == pytest.approx(0.0, abs=1e-20)

    def test_sign_below_equilibrium(self):
        m = ph.lt_gaas()
        assert ph.srh_recombination(0.1 * m.n_i, 0.1 * m.n_i, m) < 0

    def test_auger_addition(self):
        m = ph.lt_gaas()
        n = 1e24
        base = ph.srh_recombination(n, n, m)
        full = ph.srh_recombination(n, n, m, include_auger=True)
        extra = (m.auger_ce + m.auger_ch) * n * (n * n - m.n_i ** 2)
        assert full - base == pytest.approx(extra, rel=1e-6)

    def test_nonfinite_rejected(self):
        with pytest.raises(ph.PhysicsError):
            ph.srh_recombination(np.nan, 1e18, ph.lt_gaas())

    @given(ne=st.floats(1e6, 1e26), nh=st.floats(1e6, 1e26))
    @settings(max_examples=60, deadline=None)
    def test_sign_matches_mass_action(self, ne, nh):
        m = ph.lt_gaas()
        r = ph.srh_recombination(ne, nh, m)
        assert np.sign(r) == np.sign(ne * nh - m.n_i ** 2) or r == 0


class TestMobility:
    def test_low_field_limit(self):
        m = ph.lt_gaas()
        assert ph.parallel_field_mobility(0.0, "e", m) == pytest.approx(m.mu_e0)

    def test_known_value_10kvcm(self):
        # 10 kV/cm: electron mobility drops to ~1.67e3 cm^2/V/s
        m = ph.lt_gaas()
        mu = ph.parallel_field_mobility(1e6, "e", m)
        assert mu == pytest.approx(0.167, rel=0.01)

    def test_velocity_saturates(self):
        m = ph.lt_gaas()
        e = 1e9
        v = ph.parallel_field_mobility(e, "e", m) * e
        assert v == pytest.approx(m.v_sat_e, rel=1e-3)

    def test_bad_carrier(self):
        with pytest.raises(ph.PhysicsError):
            ph.parallel_field_mobility(0.0, "x", ph.lt_gaas())

    @given(e=st.floats(0, 1e9))
    @settings(max_examples=60, deadline=None)
    def test_monotone_decreasing_and_bounded(self, e):
        m = ph.lt_gaas()
        mu = ph.parallel_field_mobility(e, "h", m)
        assert 0 < mu <= m.mu_h0
        assert mu * e <= m.v_sat_h * (1 + 1e-12)


class TestGeneration:
    def test_coefficient_value(self):
        # eta*alpha*lambda/(hc) at 800 nm with alpha = 1/um: 4.027e24 J^-1 m^-1...
        m = ph.lt_gaas()
        assert ph.generation_coefficient(m, 800e-9) == pytest.approx(4.027e24, rel=1e-3)

    def test_poynting_1d_and_2d(self):
        assert ph.poynting_magnitude([2.0], [3.0]) == pytest.approx(6.0)
        assert ph.poynting_magnitude([np.array(3.0), np.array(4.0)],
                                     [np.array(2.0)]) == pytest.approx(10.0)

    def test_zero_outside_semiconductor(self):
        g = ph.optical_generation([np.ones(4)], [np.ones(4)], ph.vacuum(), 800e-9)
        assert np.all(g == 0)

    def test_semiconductor_value(self):
        m = ph.lt_gaas()
        g = ph.optical_generation([np.array([2.0])], [np.array([5.0])], m, 800e-9)
        assert g[0] == pytest.approx(10.0 * ph.generation_coefficient(m, 800e-9))


class TestContacts:
    def test_intrinsic(self):
        ne, nh = ph.ohmic_contact_densities(0.0, 9e12)
        assert ne == pytest.approx(9e12)
        assert nh == pytest.approx(9e12)

    def test_strong_n_doping(self):
        ne, nh = ph.ohmic_contact_densities(1.3e22, 9e12)
        assert ne == pytest.approx(1.3e22, rel=1e-12)
        assert nh == pytest.approx(9e12 ** 2 / 1.3e22, rel=1e-9)

    def test_strong_p_doping_no_cancellation(self):
        ne, nh = ph.ohmic_contact_densities(-1.3e22, 9e12)
        assert nh == pytest.approx(1.3e22, rel=1e-12)
        assert ne == pytest.approx(9e12 ** 2 / 1.3e22, rel=1e-9)
        assert ne > 0

    @given(c=st.floats(-1e25, 1e25))
    @settings(max_examples=80, deadline=None)
    def test_neutrality_and_mass_action(self, c):
        ni = 9e12
        ne, nh = ph.ohmic_contact_densities(c, ni)
        assert ne > 0 and nh > 0
        assert float(ne * nh) == pytest.approx(ni * ni, rel=1e-6)
        assert float(ne - nh) == pytest.approx(c, rel=1e-6, abs=1e-3 * ni)


class TestDrude:
    def test_gold_parameters(self):
        g = ph.gold()
        assert g.drude.omega_p == pytest.approx(1.372e16, rel=1e-3)
        assert g.drude.gamma == pytest.approx(8.05e13, rel=1e-3)

    def test_permittivity_near_dc_is_metallic(self):
        g = ph.gold().drude
        eps = ph.drude_permittivity(g, 2 * np.pi * 1e12)
        assert eps.real < -1e3

    def test_no_drude_raises(self):
        with pytest.raises(ph.PhysicsError):
            ph.drude_coefficients(ph.vacuum())


class TestScaling:
    def test_round_trip(self):
        s = ph.scale_system(1e-6, 0.02585, 1.3e22, 0.02068)
        for kind, val in [("x", 3e-7), ("n", 5e21), ("phi", 1.0), ("d", 1e-3)]:
            assert s.unscale(s.scale(val, kind), kind) == pytest.approx(val)

    def test_derived_scales(self):
        s = ph.scale_system(1e-6, 0.025, 1e22, 0.02)
        assert s.mu == pytest.approx(0.02 / 0.025)
        assert s.e_field == pytest.approx(0.025 / 1e-6)
        assert s.r == pytest.approx(0.02 * 1e22 / 1e-12)
        assert s.time == pytest.approx(1e-12 / 0.02)

    def test_invalid(self):
        with pytest.raises(ph.PhysicsError):
            ph.scale_system(0.0, 0.025, 1e22, 0.02)


def test_einstein_relation():
    assert ph.einstein_diffusivity(0.8, 0.025852) == pytest.approx(0.0206816)
