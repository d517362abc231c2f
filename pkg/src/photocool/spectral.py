"""Frequency-domain response and displacement noise spectra.

The linearized, delayed-feedback equation of motion gives the response
denominator

    D(w) = omega_m^2 - w^2 + i w (Gamma_m + Gamma_rp) - grad_f / (m (1 + i w tau))

and the one-sided displacement PSD of each white force source f is
S_x(w) = 2 S_f(w) / (m^2 |D(w)|^2) where S_f is the two-sided force
strength. Occupancies follow from the variance via

    <x^2> = (1/2pi) integral_0^inf S_total(w) dw,
    n = m omega_m_tilde <x^2> / hbar - 1/2.

This module is the quadrature oracle against which both the rate-equation
budget and the Monte-Carlo integrator are checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .config import params_digest
from .constants import HBAR
from .errors import GridTooCoarseError, InvalidParameterError, NegativeOccupancyError
from .model import LinearCoefficients, linear_coefficients
from .params import SystemParams

__all__ = [
    "Spectrum",
    "response_denominator",
    "displacement_psd",
    "occupancy_from_psd",
    "resonance_grid",
    "steady_state_occupancy",
    "write_spectrum_csv",
]


@dataclass
class Spectrum:
    """One-sided displacement PSD on an angular-frequency grid.

    freqs in rad/s, PSDs in m^2 s. For model spectra the per-source
    components are present and sum to S_total pointwise; measured (Welch)
    spectra carry S_total only and leave the components as None.
    """

    freqs: np.ndarray
    S_total: np.ndarray
    S_th: np.ndarray | None
    S_rp: np.ndarray | None
    S_shot: np.ndarray | None
    params_hash: str

    def __post_init__(self) -> None:
        if np.any(self.freqs <= 0.0) or np.any(np.diff(self.freqs) <= 0.0):
            raise InvalidParameterError("spectrum grid must be strictly increasing and positive")


def response_denominator(p: SystemParams, omega):
    """Complex response denominator D(omega); omega scalar or array, rad/s.

    D(0) equals omega_m_tilde^2 and D(-w) = conj(D(w)).
    """
    c = p.cantilever
    lc = linear_coefficients(p)
    w = np.asarray(omega, dtype=float)
    kernel = 1.0 / (1.0 + 1j * w * c.tau)
    d = c.omega_m**2 - w**2 + 1j * w * (lc.gamma_m + lc.gamma_rp) - (lc.grad_f / c.m) * kernel
    return d if d.shape else complex(d)


def _component_psds(p: SystemParams, lc: LinearCoefficients, freqs: np.ndarray):
    c = p.cantilever
    absd2 = np.abs(response_denominator(p, freqs)) ** 2
    scale = 2.0 / (c.m**2 * absd2)  # one-sided conversion of two-sided force strengths
    s_th = lc.s_th * scale
    s_rp = lc.s_rp * scale
    s_shot = (lc.force_noise**2 / (1.0 + (freqs * c.tau) ** 2)) * scale
    return s_th, s_rp, s_shot


def displacement_psd(p: SystemParams, freqs: np.ndarray) -> Spectrum:
    """Model displacement PSD with per-source decomposition.

    The grid must resolve the resonance: at least 20 points within one total
    linewidth of omega_m_tilde, otherwise GridTooCoarseError is raised.
    """
    freqs = np.asarray(freqs, dtype=float)
    lc = linear_coefficients(p)
    w0 = lc.omega_m_tilde
    width = max(lc.gamma_total, w0 * 1e-9)
    in_line = np.count_nonzero(np.abs(freqs - w0) <= 0.5 * width)
    if in_line < 20:
        raise GridTooCoarseError(
            f"only {in_line} grid points within one linewidth ({width!r} rad/s) of resonance; need >= 20"
        )
    s_th, s_rp, s_shot = _component_psds(p, lc, freqs)
    return Spectrum(
        freqs=freqs,
        S_total=s_th + s_rp + s_shot,
        S_th=s_th,
        S_rp=s_rp,
        S_shot=s_shot,
        params_hash=params_digest(p),
    )


def occupancy_from_psd(spec: Spectrum, p: SystemParams) -> float:
    """Phonon occupancy from the integrated one-sided PSD (trapezoid rule).

    Raises NegativeOccupancyError if the result falls below -1e-3, which
    signals an inconsistent spectrum rather than a physical state.
    """
    var = np.trapezoid(spec.S_total, spec.freqs) / (2.0 * np.pi)
    lc = linear_coefficients(p)
    n = p.cantilever.m * lc.omega_m_tilde * var / HBAR - 0.5
    if n < -1e-3:
        raise NegativeOccupancyError(f"integrated spectrum gives n = {n!r} < -1e-3")
    return n


def _resonance_location(p: SystemParams, lc: LinearCoefficients) -> float:
    """Numerical minimum of |D(w)|; the spectral peak for weak damping."""
    w_lo = 0.25 * min(lc.omega_m_tilde, p.cantilever.omega_m)
    w_hi = 1.75 * p.cantilever.omega_m
    res = minimize_scalar(
        lambda w: abs(response_denominator(p, float(w))), bounds=(w_lo, w_hi), method="bounded",
        options={"xatol": 1e-12 * w_hi},
    )
    return float(res.x)


def resonance_grid(
    p: SystemParams,
    *,
    n_core: int = 20_001,
    n_background: int = 4_001,
    span_linewidths: float = 50.0,
    lo_factor: float = 1e-3,
    hi_factor: float = 30.0,
) -> np.ndarray:
    """Frequency grid concentrated on the resonance.

    A linear core of n_core points covers +/- span_linewidths total
    linewidths around the |D| minimum; a log-spaced background covers
    [lo_factor, hi_factor] * omega_m_tilde to capture the Lorentzian tails,
    the shot-noise knee at 1/tau and the quasi-static plateau.
    """
    lc = linear_coefficients(p)
    w0 = _resonance_location(p, lc)
    width = max(lc.gamma_total, w0 * 1e-9)
    half = span_linewidths * width
    core = np.linspace(max(w0 - half, w0 * 1e-6), w0 + half, n_core)
    background = np.geomspace(lc.omega_m_tilde * lo_factor, lc.omega_m_tilde * hi_factor, n_background)
    freqs = np.unique(np.concatenate([core, background]))
    return freqs[freqs > 0.0]


def steady_state_occupancy(p: SystemParams, *, rtol: float = 1e-4, max_refine: int = 8) -> float:
    """Adaptive quadrature occupancy: refine the grid until n is stable.

    Doubles the core and background density until successive estimates agree
    to rtol (relative); raises GridTooCoarseError if max_refine doublings do
    not converge.
    """
    n_core, n_back = 20_001, 4_001
    prev = None
    for _ in range(max_refine):
        grid = resonance_grid(p, n_core=n_core, n_background=n_back)
        n = occupancy_from_psd(displacement_psd(p, grid), p)
        if prev is not None and abs(n - prev) <= rtol * max(abs(n), 1e-30):
            return n
        prev = n
        n_core = 2 * n_core - 1
        n_back = 2 * n_back - 1
    raise GridTooCoarseError(f"occupancy quadrature did not converge to rtol = {rtol!r}")


def write_spectrum_csv(spec: Spectrum, path: str) -> None:
    """CSV export: omega_rad_s, S_total and, when present, the components.

    The first line is a comment carrying the parameter hash so spectra can
    be traced back to the configuration that produced them.
    """
    have_parts = spec.S_th is not None
    cols = ["omega_rad_s", "S_total"] + (["S_th", "S_rp", "S_shot"] if have_parts else [])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# params_hash={spec.params_hash}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(spec.freqs.size):
            row = [spec.freqs[i], spec.S_total[i]]
            if have_parts:
                row += [spec.S_th[i], spec.S_rp[i], spec.S_shot[i]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
