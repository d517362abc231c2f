"""Parameter containers for the cavity-cantilever system.

All quantities are SI; every frequency and rate is angular (rad/s). The
containers are frozen dataclasses validated on construction, so any instance
that exists is internally consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameterError


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameterError(msg)


def _finite(x: float) -> bool:
    return x == x and abs(x) != float("inf")


@dataclass(frozen=True)
class CavityParams:
    """Optical cavity and pump.

    omega_c : bare cavity resonance, rad/s
    L_c     : cavity length, m
    Gamma_c : photon loss rate (linewidth), rad/s
    alpha   : absorption rate into the deformable mirror, rad/s
    omega_p : pump frequency, rad/s
    P       : pump input power, W
    """

    omega_c: float
    L_c: float
    Gamma_c: float
    alpha: float
    omega_p: float
    P: float

    def __post_init__(self) -> None:
        for name in ("omega_c", "L_c", "Gamma_c", "omega_p"):
            v = getattr(self, name)
            _require(_finite(v) and v > 0.0, f"cavity.{name} must be finite and > 0, got {v!r}")
        _require(_finite(self.P) and self.P >= 0.0, f"cavity.P must be finite and >= 0, got {self.P!r}")
        _require(
            _finite(self.alpha) and 0.0 < self.alpha <= self.Gamma_c,
            f"cavity.alpha must satisfy 0 < alpha <= Gamma_c, got {self.alpha!r}",
        )

    @property
    def detuning(self) -> float:
        """Pump-cavity detuning Delta = omega_c - omega_p, rad/s."""
        return self.omega_c - self.omega_p


@dataclass(frozen=True)
class CantileverParams:
    """Mechanical mode and photothermal response of the mirror.

    omega_m : mechanical angular frequency, rad/s
    m       : effective mass, kg
    Q_m     : mechanical quality factor
    tau     : photothermal (thermal diffusion) time constant, s
    chi     : deflection per absorbed power slope, s/m
    L_m     : cantilever length, m
    s       : conducting cross-section, m^2
    kappa   : thermal conductivity, W/(m K)
    epsilon : order-unity geometry factor for the mean temperature rise
    """

    omega_m: float
    m: float
    Q_m: float
    tau: float
    chi: float
    L_m: float
    s: float
    kappa: float
    epsilon: float = 2.0

    def __post_init__(self) -> None:
        for name in ("omega_m", "m", "Q_m", "tau", "chi", "L_m", "s", "kappa", "epsilon"):
            v = getattr(self, name)
            _require(_finite(v) and v > 0.0, f"cantilever.{name} must be finite and > 0, got {v!r}")

    @property
    def Gamma_m(self) -> float:
        """Intrinsic mechanical damping rate omega_m / Q_m, rad/s."""
        return self.omega_m / self.Q_m


@dataclass(frozen=True)
class EnvironmentParams:
    """Thermal bath."""

    T: float  # bath temperature, K

    def __post_init__(self) -> None:
        _require(_finite(self.T) and self.T > 0.0, f"environment.T must be finite and > 0, got {self.T!r}")


@dataclass(frozen=True)
class SystemParams:
    """Complete parameter set for one device and operating point."""

    cavity: CavityParams
    cantilever: CantileverParams
    environment: EnvironmentParams

    def __post_init__(self) -> None:
        _require(_finite(self.cavity.detuning), "detuning must be finite")

    @property
    def detuning(self) -> float:
        return self.cavity.detuning


@dataclass(frozen=True)
class DerivedQuantities:
    """Closed-form output of the occupation budget.

    Occupations are phonon numbers; rates are rad/s; E is the pump amplitude
    in rad/s; force_noise is the shot-force coefficient N in N*s^(1/2).
    """

    E: float
    n_c0: float
    grad_f: float  # photothermal force gradient, N/m
    force_noise: float
    gamma_m: float
    gamma_rp: float
    n_rp: float
    gamma_ph: float
    omega_m_tilde: float
    n_ph: float
    n_th: float
    n_classical: float  # weak-coupling classical population
    n_noise: float  # weak-coupling noise population (rp + shot)
    n_tot: float
    t_bar: float  # mean mirror temperature, K
    stability_margin: float
    dark: bool = field(default=False)  # True when P == 0 (no-light budget)

    def as_dict(self) -> dict[str, float | bool]:
        return {
            "E": self.E,
            "n_c0": self.n_c0,
            "grad_f": self.grad_f,
            "force_noise": self.force_noise,
            "gamma_m": self.gamma_m,
            "gamma_rp": self.gamma_rp,
            "n_rp": self.n_rp,
            "gamma_ph": self.gamma_ph,
            "omega_m_tilde": self.omega_m_tilde,
            "n_ph": self.n_ph,
            "n_th": self.n_th,
            "n_classical": self.n_classical,
            "n_noise": self.n_noise,
            "n_tot": self.n_tot,
            "t_bar": self.t_bar,
            "stability_margin": self.stability_margin,
            "dark": self.dark,
        }
