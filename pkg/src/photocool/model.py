"""Closed-form model of photothermal (bolometric) cantilever cooling.

A pump of power P drives a bad cavity (Gamma_c >> omega_m) whose back mirror
sits on a cantilever. Absorbed photons deflect the cantilever through a
delayed thermal response with memory time tau, producing a retarded force
whose in-phase part softens the spring and whose quadrature part damps the
mode. Photon-absorption shot noise rides on the same channel. All formulas
below are evaluated in the semiclassical, linearized regime about x = 0.

Conventions: angular frequencies and rates (rad/s), SI units throughout,
occupations are mean phonon numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import HBAR, KB
from .errors import (
    DegenerateDetuningError,
    HeatingRegimeError,
    InstabilityError,
    InvalidParameterError,
)
from .params import DerivedQuantities, SystemParams

__all__ = [
    "pump_amplitude_from_power",
    "cavity_photon_number",
    "force_gradient_and_noise",
    "radiation_pressure_terms",
    "photothermal_damping",
    "photothermal_damping_rate",
    "renormalized_frequency",
    "stability_margin",
    "effective_temperature",
    "classical_population",
    "noise_population",
    "rate_equation_total",
    "occupation_budget",
    "LinearCoefficients",
    "linear_coefficients",
]


def pump_amplitude_from_power(p: SystemParams) -> float:
    """Pump amplitude E = sqrt(Gamma_c * P / (4 hbar omega_p)), rad/s.

    Normalized so that the resonant intracavity photon number is
    n_c = 4 E^2 / Gamma_c^2 = P / (hbar omega_p Gamma_c).
    """
    c = p.cavity
    return math.sqrt(c.Gamma_c * c.P / (4.0 * HBAR * c.omega_p))


def cavity_photon_number(p: SystemParams, x: float = 0.0) -> float:
    """Steady-state intracavity photon number at mirror displacement x.

    n_c(x) = E^2 / ([omega_c (1 - x/L_c) - omega_p]^2 + Gamma_c^2/4).

    A positive x lengthens the cavity and lowers its resonance, so the
    detuning seen by the pump shifts by -omega_c x / L_c.
    """
    c = p.cavity
    if not abs(x) < c.L_c:
        raise InvalidParameterError(f"displacement |x| = {abs(x)!r} must be < L_c = {c.L_c!r}")
    e = pump_amplitude_from_power(p)
    delta_eff = c.omega_c * (1.0 - x / c.L_c) - c.omega_p
    return e * e / (delta_eff * delta_eff + 0.25 * c.Gamma_c * c.Gamma_c)


def _lorentzian(p: SystemParams) -> float:
    """Delta^2 + Gamma_c^2/4, (rad/s)^2."""
    d = p.detuning
    return d * d + 0.25 * p.cavity.Gamma_c ** 2


def _cooling_numerator(p: SystemParams) -> float:
    """2 omega_c Delta - Delta^2 - Gamma_c^2/4; positive in the cooling band."""
    d = p.detuning
    return 2.0 * p.cavity.omega_c * d - d * d - 0.25 * p.cavity.Gamma_c ** 2


def force_gradient_and_noise(p: SystemParams) -> tuple[float, float]:
    """Linearized deflection force: gradient and shot-noise coefficient.

    grad_f = (n_c(0) alpha chi hbar omega_c / L_c)
             * (2 omega_c Delta - Delta^2 - Gamma_c^2/4) / (Delta^2 + Gamma_c^2/4)
    N      = chi hbar omega_c sqrt(alpha n_c(0))

    Returns (grad_f, N) in (N/m, N*s^(1/2)). grad_f > 0 softens the spring
    and, through the delay, damps the mode; grad_f < 0 heats.
    """
    c, m = p.cavity, p.cantilever
    n_c0 = cavity_photon_number(p, 0.0)
    grad_f = (n_c0 * c.alpha * m.chi * HBAR * c.omega_c / c.L_c) * _cooling_numerator(p) / _lorentzian(p)
    noise = m.chi * HBAR * c.omega_c * math.sqrt(c.alpha * n_c0)
    return grad_f, noise


def radiation_pressure_terms(p: SystemParams) -> tuple[float, float]:
    """Radiation-pressure cooling rate and its equilibrium occupation.

    Gamma_rp = (4 n_c(0) hbar Gamma_c omega_c^2 / (m L_c^2))
               * Delta / (Delta^2 + Gamma_c^2/4)^2
    n_rp     = (Delta^2 + Gamma_c^2/4) / (4 omega_m Delta)

    In the bad-cavity limit n_rp >= Gamma_c / (4 omega_m) >> 1, so this
    channel never cools appreciably; it enters the budget as a noise floor.
    Raises DegenerateDetuningError at Delta = 0 where n_rp is undefined.
    """
    c, m = p.cavity, p.cantilever
    d = p.detuning
    if d == 0.0:
        raise DegenerateDetuningError("radiation-pressure occupation undefined at Delta = 0")
    lor = _lorentzian(p)
    n_c0 = cavity_photon_number(p, 0.0)
    gamma_rp = (4.0 * n_c0 * HBAR * c.Gamma_c * c.omega_c ** 2 / (m.m * c.L_c ** 2)) * d / (lor * lor)
    n_rp = lor / (4.0 * m.omega_m * d)
    return gamma_rp, n_rp


def photothermal_damping_rate(grad_f: float, mass: float, omega_m: float, tau: float) -> float:
    """Gamma_ph = tau grad_f / (m (1 + tau^2 omega_m^2)), rad/s.

    Pure formula variant; accepts tau = 0 (instantaneous response, no
    damping). Maximal over tau at omega_m tau = 1 for fixed grad_f.
    """
    return tau * grad_f / (mass * (1.0 + tau * tau * omega_m * omega_m))


def photothermal_damping(p: SystemParams, grad_f: float) -> float:
    """Photothermal damping rate for the device's tau, mass and omega_m."""
    c = p.cantilever
    return photothermal_damping_rate(grad_f, c.m, c.omega_m, c.tau)


def renormalized_frequency(p: SystemParams, grad_f: float) -> float:
    """Static spring softening: omega_m_tilde = sqrt(omega_m^2 - grad_f/m).

    Raises InstabilityError when grad_f >= m omega_m^2 (the zero-frequency
    part of the deflection force overcomes the restoring force).
    """
    c = p.cantilever
    w2 = c.omega_m ** 2 - grad_f / c.m
    if w2 <= 0.0:
        raise InstabilityError(
            f"grad_f = {grad_f!r} N/m reaches the static instability bound m*omega_m^2 = {c.m * c.omega_m**2!r} N/m"
        )
    return math.sqrt(w2)


def stability_margin(p: SystemParams, grad_f: float) -> float:
    """1 - grad_f / (m omega_m^2); positive iff statically stable."""
    c = p.cantilever
    return 1.0 - grad_f / (c.m * c.omega_m ** 2)


def effective_temperature(p: SystemParams, n_c0: float) -> float:
    """Mean cantilever temperature under absorbed light.

    T_bar = T + alpha n_c(0) hbar omega_c L_m / (epsilon s kappa)

    The absorbed optical power alpha n_c(0) hbar omega_c flows down the
    cantilever (length L_m, section s, conductivity kappa); epsilon is an
    order-unity factor for where along the beam the mode samples it.
    """
    c, m = p.cavity, p.cantilever
    absorbed = c.alpha * n_c0 * HBAR * c.omega_c
    return p.environment.T + absorbed * m.L_m / (m.epsilon * m.s * m.kappa)


def classical_population(p: SystemParams, *, use_effective_temperature: bool = True) -> float:
    """Weak-coupling classical phonon population.

    n_C = (k T_bar m omega_m^2) / (hbar omega_m_tilde Q_m grad_f)
          * (1 + omega_m^2 tau^2) / (omega_m tau)

    Equal to Gamma_m n_th / Gamma_ph: the residual thermal population when
    photothermal damping dominates. Diverges both as grad_f -> 0 and at the
    static instability, with a minimum of 3 sqrt(3) k T / (hbar omega_m Q_m)
    at grad_f = (2/3) m omega_m^2, omega_m tau = 1.
    """
    c = p.cantilever
    grad_f, _ = force_gradient_and_noise(p)
    if grad_f <= 0.0:
        raise HeatingRegimeError(f"grad_f = {grad_f!r} N/m <= 0: blue-detuned feedback heats the mode")
    w_t = renormalized_frequency(p, grad_f)
    t = effective_temperature(p, cavity_photon_number(p, 0.0)) if use_effective_temperature else p.environment.T
    s = c.omega_m * c.tau
    return (KB * t * c.m * c.omega_m ** 2) / (HBAR * w_t * c.Q_m * grad_f) * (1.0 + s * s) / s


def noise_population(p: SystemParams) -> tuple[float, float]:
    """Weak-coupling noise population, split into its two physical pieces.

    Returns (rp_term, shot_term) with n_N = rp_term + shot_term:

    rp_term   = (Gamma_c/alpha) (1/(chi omega_c L_c)) ((1+omega_m^2 tau^2)/(omega_m tau))
                * omega_c^2 / (2 omega_c Delta - Delta^2 - Gamma_c^2/4)
    shot_term = chi omega_c L_c (1/(2 omega_m tau))
                * (Delta^2 + Gamma_c^2/4) / (2 omega_c Delta - Delta^2 - Gamma_c^2/4)

    These are Gamma_rp n_rp / Gamma_ph and Gamma_ph n_ph / Gamma_ph = n_ph;
    both are independent of pump power.
    """
    c, m = p.cavity, p.cantilever
    num = _cooling_numerator(p)
    if num <= 0.0:
        raise HeatingRegimeError("noise population undefined outside the cooling band (grad_f <= 0)")
    s = m.omega_m * m.tau
    chi_scale = m.chi * c.omega_c * c.L_c
    rp_term = (c.Gamma_c / c.alpha) / chi_scale * (1.0 + s * s) / s * c.omega_c ** 2 / num
    shot_term = chi_scale / (2.0 * m.omega_m * m.tau) * _lorentzian(p) / num
    return rp_term, shot_term


def rate_equation_total(
    gamma_m: float, n_th: float, gamma_rp: float, n_rp: float, gamma_ph: float, n_ph: float
) -> float:
    """Steady state of the three-bath rate equation.

    n_tot = (Gamma_m n_th + Gamma_rp n_rp + Gamma_ph n_ph)
            / (Gamma_m + Gamma_rp + Gamma_ph)
    """
    return (gamma_m * n_th + gamma_rp * n_rp + gamma_ph * n_ph) / (gamma_m + gamma_rp + gamma_ph)


def occupation_budget(p: SystemParams, *, use_effective_temperature: bool = True) -> DerivedQuantities:
    """Evaluate the full closed-form budget for one operating point.

    With P = 0 the device is dark: all optical rates vanish and the budget
    reduces to the bare thermal population (n_classical = n_th, n_noise = 0).
    For P > 0, raises HeatingRegimeError if grad_f <= 0 and InstabilityError
    if grad_f >= m omega_m^2.

    The thermal occupation is n_th = k T_bar / (hbar omega_m_tilde); pass
    use_effective_temperature=False to use the bath temperature T instead of
    the absorption-heated mean temperature T_bar.
    """
    c, m = p.cavity, p.cantilever
    gamma_m = m.Gamma_m

    if c.P == 0.0:
        n_th = KB * p.environment.T / (HBAR * m.omega_m)
        return DerivedQuantities(
            E=0.0,
            n_c0=0.0,
            grad_f=0.0,
            force_noise=0.0,
            gamma_m=gamma_m,
            gamma_rp=0.0,
            n_rp=0.0,
            gamma_ph=0.0,
            omega_m_tilde=m.omega_m,
            n_ph=0.0,
            n_th=n_th,
            n_classical=n_th,
            n_noise=0.0,
            n_tot=n_th,
            t_bar=p.environment.T,
            stability_margin=1.0,
            dark=True,
        )

    e = pump_amplitude_from_power(p)
    n_c0 = cavity_photon_number(p, 0.0)
    grad_f, force_noise = force_gradient_and_noise(p)
    if grad_f <= 0.0:
        raise HeatingRegimeError(f"grad_f = {grad_f!r} N/m <= 0: feedback heats the mode")
    margin = stability_margin(p, grad_f)
    if margin <= 0.0:
        raise InstabilityError(f"stability margin {margin!r} <= 0 at P = {c.P!r} W")
    omega_t = renormalized_frequency(p, grad_f)
    gamma_rp, n_rp = radiation_pressure_terms(p)
    gamma_ph = photothermal_damping(p, grad_f)
    n_ph = force_noise ** 2 / (2.0 * HBAR * m.omega_m * m.tau * grad_f)
    t_bar = effective_temperature(p, n_c0) if use_effective_temperature else p.environment.T
    n_th = KB * t_bar / (HBAR * omega_t)
    rp_term, shot_term = noise_population(p)
    n_tot = rate_equation_total(gamma_m, n_th, gamma_rp, n_rp, gamma_ph, n_ph)
    return DerivedQuantities(
        E=e,
        n_c0=n_c0,
        grad_f=grad_f,
        force_noise=force_noise,
        gamma_m=gamma_m,
        gamma_rp=gamma_rp,
        n_rp=n_rp,
        gamma_ph=gamma_ph,
        omega_m_tilde=omega_t,
        n_ph=n_ph,
        n_th=n_th,
        n_classical=classical_population(p, use_effective_temperature=use_effective_temperature),
        n_noise=rp_term + shot_term,
        n_tot=n_tot,
        t_bar=t_bar,
        stability_margin=margin,
    )


@dataclass(frozen=True)
class LinearCoefficients:
    """Coefficients of the linearized Langevin model shared by the spectral
    and time-domain solvers. Force PSDs are two-sided white strengths."""

    grad_f: float  # N/m
    force_noise: float  # N*s^(1/2)
    gamma_m: float  # rad/s
    gamma_rp: float  # rad/s
    gamma_ph: float  # rad/s
    omega_m_tilde: float  # rad/s
    t_bar: float  # K
    s_th: float  # thermal force strength 2 m Gamma_m k T_bar, N^2 s
    s_rp: float  # rp force strength 2 m Gamma_rp hbar omega_m (n_rp + 1/2), N^2 s

    @property
    def gamma_total(self) -> float:
        return self.gamma_m + self.gamma_rp + self.gamma_ph


def linear_coefficients(p: SystemParams, *, use_effective_temperature: bool = True) -> LinearCoefficients:
    """Assemble the linearized-model coefficients for a stable operating point.

    The radiation-pressure force strength is calibrated so that this bath
    alone, acting against its own damping, equilibrates the mode at n_rp.
    Allowed for any grad_f below the instability bound, including grad_f <= 0
    (the time-domain solver probes the heating side); the dark point P = 0 is
    allowed as well, with all optical terms zero.
    """
    c, m = p.cavity, p.cantilever
    gamma_m = m.Gamma_m
    if c.P == 0.0:
        grad_f, force_noise, gamma_rp, n_rp, t_bar = 0.0, 0.0, 0.0, 0.0, p.environment.T
    else:
        grad_f, force_noise = force_gradient_and_noise(p)
        gamma_rp, n_rp = radiation_pressure_terms(p) if p.detuning != 0.0 else (0.0, 0.0)
        t_bar = (
            effective_temperature(p, cavity_photon_number(p, 0.0))
            if use_effective_temperature
            else p.environment.T
        )
    margin = stability_margin(p, grad_f)
    omega_t = renormalized_frequency(p, grad_f) if margin > 0.0 else m.omega_m
    s_th = 2.0 * m.m * gamma_m * KB * t_bar
    s_rp = 2.0 * m.m * gamma_rp * HBAR * m.omega_m * (n_rp + 0.5)
    return LinearCoefficients(
        grad_f=grad_f,
        force_noise=force_noise,
        gamma_m=gamma_m,
        gamma_rp=gamma_rp,
        gamma_ph=photothermal_damping(p, grad_f),
        omega_m_tilde=omega_t,
        t_bar=t_bar,
        s_th=s_th,
        s_rp=s_rp,
    )
