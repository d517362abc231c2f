"""Closed-form model: frozen cross-checks, scaling laws, and error taxonomy."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

import photocool as pc
from photocool.constants import HBAR, KB

from conftest import at_drive


# ---------------------------------------------------------------------------
# hand-derived reference values (independent arithmetic, simple round inputs)
# ---------------------------------------------------------------------------

def test_pump_amplitude_reference_value():
    p = pc.SystemParams(
        cavity=pc.CavityParams(omega_c=1.772e15, L_c=1e-3, Gamma_c=1e9, alpha=1e8,
                               omega_p=1.772e15, P=1e-3),
        cantilever=pc.CantileverParams(omega_m=2.89e5, m=5e-12, Q_m=2200.0, tau=5e-4,
                                       chi=2e-5, L_m=220e-6, s=1.5e-11, kappa=150.0),
        environment=pc.EnvironmentParams(T=300.0),
    )
    assert pc.pump_amplitude_from_power(p) == pytest.approx(1156644947694.7761, rel=1e-12)
    # resonant intracavity photon number: E^2 / (Gamma_c^2/4)
    assert pc.cavity_photon_number(p) == pytest.approx(5351310.140111405, rel=1e-12)


def test_force_noise_reference_value():
    # N = chi hbar omega_c sqrt(alpha n_c0) at n_c0 = 5e6
    n = 2e-5 * HBAR * 1.772e15 * math.sqrt(1e8 * 5e6)
    assert n == pytest.approx(8.357086092764708e-17, rel=1e-12)


def test_radiation_pressure_occupation_reference_value(benchmark):
    # n_rp = (Delta^2 + Gamma_c^2/4) / (4 omega_m Delta) with round inputs
    p = replace(
        benchmark,
        cavity=replace(benchmark.cavity, Gamma_c=1e9, omega_p=benchmark.cavity.omega_c - 0.5e9),
        cantilever=replace(benchmark.cantilever, omega_m=2.89e5),
    )
    _, n_rp = pc.radiation_pressure_terms(p)
    assert n_rp == pytest.approx(865.0519031141869, rel=1e-12)


def test_photothermal_damping_rate_reference_value():
    g = pc.photothermal_damping_rate(1e-3, 5e-12, 2.89e5, 5e-4)
    assert g == pytest.approx(4.788985333732415, rel=1e-12)


def test_absorption_heating_reference_value(benchmark):
    # Delta T = P_abs L_m / (eps s kappa): 10 uW absorbed on the bundled lever
    m = benchmark.cantilever
    dT = 10e-6 * 220e-6 / (m.epsilon * m.s * m.kappa)
    assert dT == pytest.approx(0.488888888888889, rel=1e-12)
    # effective_temperature applies exactly that increment for alpha*n_c0*hbar*omega_c = 10 uW
    n_abs = 10e-6 / (benchmark.cavity.alpha * HBAR * benchmark.cavity.omega_c)
    t_bar = pc.effective_temperature(benchmark, n_abs)
    assert t_bar - benchmark.environment.T == pytest.approx(dT * 220e-6 / m.L_m, rel=1e-12)


def test_classical_bound_reference_value(benchmark):
    # 3 sqrt(3) k T / (hbar omega_m Q_m) at 300 K, 46 kHz, Q_m = 2200
    assert pc.classical_bound(benchmark) == pytest.approx(320959.2361809284, rel=1e-12)


# ---------------------------------------------------------------------------
# frozen full budgets for the bundled devices
# ---------------------------------------------------------------------------

BENCHMARK_BUDGET = {
    "E": 25086088419.88721,
    "n_c0": 1258.6236644207984,
    "grad_f": 0.0016642699999999998,
    "force_noise": 1.324799129501331e-18,
    "gamma_m": 131.37569278648226,
    "gamma_rp": 1.6642704700001325,
    "n_rp": 864.972516803779,
    "gamma_ph": 1439.5478105410252,
    "omega_m_tilde": 287583.3733907792,
    "n_ph": 5.0000014120309,
    "n_th": 136573445.50916505,
    "n_classical": 12463935.47238986,
    "n_noise": 6.0000016944370795,
    "n_tot": 11409499.651625222,
    "t_bar": 300.00114888921337,
    "stability_margin": 0.9900386456580557,
}

METZGER_BUDGET = {
    "n_c0": 106558.05225157582,
    "grad_f": 0.009263753939758321,
    "gamma_rp": 14.277105205067842,
    "n_rp": 108692.44646156288,
    "gamma_ph": 110.88959975019868,
    "omega_m_tilde": 280899.3675338931,
    "n_ph": 0.10869630378365652,
    "n_th": 139832169.2481061,
    "n_classical": 165665203.5014101,
    "n_noise": 13994.32904360156,
    "n_tot": 71614283.23768719,
    "t_bar": 300.02036460140204,
    "stability_margin": 0.9445525452417484,
}


@pytest.mark.parametrize("field,value", sorted(BENCHMARK_BUDGET.items()))
def test_benchmark_budget_frozen(benchmark, field, value):
    d = pc.occupation_budget(benchmark)
    assert getattr(d, field) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("field,value", sorted(METZGER_BUDGET.items()))
def test_metzger_budget_frozen(metzger, field, value):
    d = pc.occupation_budget(metzger)
    assert getattr(d, field) == pytest.approx(value, rel=1e-12)


def test_budget_as_dict_round_trip(benchmark):
    d = pc.occupation_budget(benchmark)
    out = d.as_dict()
    assert out["n_tot"] == d.n_tot
    assert out["dark"] is False


# ---------------------------------------------------------------------------
# structural identities and scaling laws (seeded random drives)
# ---------------------------------------------------------------------------

def test_budget_identities_over_random_drives(benchmark, p_unit):
    gen = np.random.Generator(np.random.Philox(101))
    for _ in range(50):
        u = float(gen.uniform(0.01, 0.9))
        sig = float(np.exp(gen.uniform(np.log(0.1), np.log(10.0))))
        p = at_drive(benchmark, u, p_unit)
        p = replace(p, cantilever=replace(p.cantilever, tau=sig / p.cantilever.omega_m))
        d = pc.occupation_budget(p)
        g_tot = d.gamma_m + d.gamma_rp + d.gamma_ph
        # rate-equation balance
        assert d.n_tot * g_tot == pytest.approx(
            d.gamma_m * d.n_th + d.gamma_rp * d.n_rp + d.gamma_ph * d.n_ph, rel=1e-12)
        # classical population is the thermal load referred to the feedback rate
        assert d.n_classical == pytest.approx(d.gamma_m * d.n_th / d.gamma_ph, rel=1e-12)
        # noise population is the backaction load referred to the feedback rate
        assert d.n_noise == pytest.approx(
            (d.gamma_rp * d.n_rp + d.gamma_ph * d.n_ph) / d.gamma_ph, rel=1e-12)
        # spring renormalization
        assert d.omega_m_tilde**2 == pytest.approx(
            p.cantilever.omega_m**2 * d.stability_margin, rel=1e-12)
        assert d.stability_margin == pytest.approx(1.0 - u, rel=1e-9)
        # occupations bracket the total
        lo = min(d.n_th, d.n_rp, d.n_ph)
        hi = max(d.n_th, d.n_rp, d.n_ph)
        assert lo <= d.n_tot <= hi


def test_force_gradient_linear_in_power(benchmark):
    g1, n1 = pc.force_gradient_and_noise(benchmark)
    p2 = replace(benchmark, cavity=replace(benchmark.cavity, P=3.0 * benchmark.cavity.P))
    g2, n2 = pc.force_gradient_and_noise(p2)
    assert g2 == pytest.approx(3.0 * g1, rel=1e-12)
    # force noise scales with sqrt(n_c0), i.e. sqrt(P)
    assert n2 == pytest.approx(math.sqrt(3.0) * n1, rel=1e-12)


def test_photon_number_peaks_on_resonance(benchmark):
    deltas = np.linspace(-2e9, 2e9, 41)
    vals = []
    for d in deltas:
        p = replace(benchmark, cavity=replace(benchmark.cavity,
                                              omega_p=benchmark.cavity.omega_c - float(d)))
        vals.append(pc.cavity_photon_number(p))
    assert np.argmax(vals) == 20  # Delta = 0 bin


def test_cavity_photon_number_displacement_shifts_resonance(benchmark):
    c = benchmark.cavity
    # moving the mirror by x detunes by omega_c x / L_c; pick x to cancel Delta
    x = c.L_c * benchmark.detuning / c.omega_c
    on_peak = pc.cavity_photon_number(benchmark, x)
    e2 = pc.pump_amplitude_from_power(benchmark) ** 2
    assert on_peak == pytest.approx(e2 / (c.Gamma_c**2 / 4), rel=1e-9)


def test_classical_population_minimum_at_two_thirds_and_sigma_one(benchmark, p_unit):
    wm = benchmark.cantilever.omega_m

    def n_c(u, sig):
        p = at_drive(benchmark, u, p_unit)
        p = replace(p, cantilever=replace(p.cantilever, tau=sig / wm))
        return pc.classical_population(p, use_effective_temperature=False)

    base = n_c(2.0 / 3.0, 1.0)
    assert base == pytest.approx(pc.classical_bound(benchmark), rel=1e-9)
    for du, ds in ((0.05, 0.0), (-0.05, 0.0), (0.0, 0.1), (0.0, -0.1)):
        assert n_c(2.0 / 3.0 + du, 1.0 + ds) > base


def test_effective_temperature_exceeds_bath(benchmark):
    d = pc.occupation_budget(benchmark)
    assert d.t_bar > benchmark.environment.T
    raw = pc.occupation_budget(benchmark, use_effective_temperature=False)
    assert raw.t_bar == benchmark.environment.T
    assert raw.n_th < d.n_th


def test_dark_device_reduces_to_thermal_state(benchmark):
    p = replace(benchmark, cavity=replace(benchmark.cavity, P=0.0))
    d = pc.occupation_budget(p)
    assert d.dark
    assert d.n_tot == d.n_th == pytest.approx(
        KB * 300.0 / (HBAR * benchmark.cantilever.omega_m), rel=1e-12)
    assert d.n_classical == d.n_th
    assert d.n_noise == 0.0
    assert d.stability_margin == 1.0


def test_linear_coefficients_match_budget(benchmark):
    d = pc.occupation_budget(benchmark)
    lc = pc.linear_coefficients(benchmark)
    assert lc.grad_f == pytest.approx(d.grad_f, rel=1e-12)
    assert lc.gamma_rp == pytest.approx(d.gamma_rp, rel=1e-12)
    assert lc.gamma_ph == pytest.approx(d.gamma_ph, rel=1e-12)
    assert lc.omega_m_tilde == pytest.approx(d.omega_m_tilde, rel=1e-12)
    assert lc.gamma_total == pytest.approx(d.gamma_m + d.gamma_rp + d.gamma_ph, rel=1e-12)
    # two-sided thermal force strength: 2 m Gamma_m k T_bar
    m = benchmark.cantilever
    assert lc.s_th == pytest.approx(2.0 * m.m * lc.gamma_m * KB * lc.t_bar, rel=1e-12)


# ---------------------------------------------------------------------------
# error taxonomy
# ---------------------------------------------------------------------------

def test_red_detuning_raises_heating_regime(benchmark):
    p = replace(benchmark, cavity=replace(benchmark.cavity,
                                          omega_p=benchmark.cavity.omega_c + 5e8))
    with pytest.raises(pc.HeatingRegimeError):
        pc.occupation_budget(p)


def test_overdriven_device_raises_instability(benchmark, p_unit):
    with pytest.raises(pc.InstabilityError):
        pc.occupation_budget(at_drive(benchmark, 1.4, p_unit))


def test_zero_detuning_radiation_pressure_is_degenerate(benchmark):
    p = replace(benchmark, cavity=replace(benchmark.cavity,
                                          omega_p=benchmark.cavity.omega_c))
    with pytest.raises(pc.DegenerateDetuningError):
        pc.radiation_pressure_terms(p)


def test_parameter_validation():
    with pytest.raises(pc.InvalidParameterError):
        pc.CavityParams(omega_c=1.77e15, L_c=1e-3, Gamma_c=1e9, alpha=2e9,  # alpha > Gamma_c
                        omega_p=1.77e15, P=1e-6)
    with pytest.raises(pc.InvalidParameterError):
        pc.CavityParams(omega_c=1.77e15, L_c=1e-3, Gamma_c=1e9, alpha=1e8,
                        omega_p=1.77e15, P=-1.0)
    with pytest.raises(pc.InvalidParameterError):
        pc.CantileverParams(omega_m=-1.0, m=1e-12, Q_m=100.0, tau=1e-6,
                            chi=1e-6, L_m=1e-4, s=1e-11, kappa=10.0)


def test_error_hierarchy():
    assert issubclass(pc.HeatingRegimeError, pc.PhotocoolError)
    assert issubclass(pc.InvalidParameterError, ValueError)
    assert issubclass(pc.ConfigValidationError, ValueError)
    assert issubclass(pc.DatasetParseError, ValueError)
