"""Optimization chain for the cooling budget.

The noise population separates into a dimensionless form in the feedback
parameter A = omega_m tau / (chi omega_c L_c):

    n_N(A) = [c1 A + c2 / A] / den
    c1  = (Gamma_c/alpha) ((1 + omega_m^2 tau^2) / (omega_m^2 tau^2)) Q_c^2
    c2  = (Delta_tilde^2 + 1/4) / 2
    den = 2 Q_c Delta_tilde - Delta_tilde^2 - 1/4

with Q_c = omega_c/Gamma_c and Delta_tilde = Delta/Gamma_c. The chain of
closed forms evaluated here: the minimizing A (c1 A = c2/A, i.e. the
radiation-pressure and shot contributions balance), the resulting floor
2 sqrt(c1 c2)/den, its large-Q_c limit, and the detuning-independent bound

    n_N >= sqrt((Gamma_c/alpha) (1 + omega_m^2 tau^2) / (2 omega_m^2 tau^2)),

which sets how far the scheme can cool regardless of cavity geometry. The
classical population has its own floor 3 sqrt(3) k T / (hbar omega_m Q_m),
reached at grad_f = (2/3) m omega_m^2 and omega_m tau = 1. joint_optimize
minimizes the composite population n_C + n_N over device knobs numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize

from .constants import HBAR, KB
from .errors import (
    HeatingRegimeError,
    InstabilityError,
    InvalidParameterError,
    NoFeasiblePointError,
)
from .model import classical_population, noise_population, occupation_budget
from .params import SystemParams

__all__ = [
    "OptInputs",
    "OptResult",
    "JointOptResult",
    "noise_terms_A",
    "noise_population_A",
    "optimal_A",
    "noise_floor",
    "noise_floor_large_qc",
    "noise_floor_bound",
    "noise_floor_result",
    "optimal_detuning",
    "classical_bound",
    "joint_optimize",
]


@dataclass(frozen=True)
class OptInputs:
    """Dimensionless inputs of the noise-population chain.

    gamma_c_over_alpha >= 1 because absorption is one part of the total
    cavity loss. delta_tilde may lie outside the cooling band; evaluation
    then raises HeatingRegimeError.
    """

    gamma_c_over_alpha: float
    omega_m_tau: float
    q_c: float
    delta_tilde: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma_c_over_alpha) and self.gamma_c_over_alpha >= 1.0):
            raise InvalidParameterError(
                f"Gamma_c/alpha must be >= 1, got {self.gamma_c_over_alpha!r}"
            )
        if not (self.omega_m_tau > 0.0 and math.isfinite(self.omega_m_tau)):
            raise InvalidParameterError(f"omega_m*tau must be > 0, got {self.omega_m_tau!r}")
        if not (self.q_c > 0.0 and math.isfinite(self.q_c)):
            raise InvalidParameterError(f"Q_c must be > 0, got {self.q_c!r}")
        if not math.isfinite(self.delta_tilde):
            raise InvalidParameterError(f"Delta_tilde must be finite, got {self.delta_tilde!r}")

    @classmethod
    def from_system(cls, p: SystemParams) -> OptInputs:
        c, m = p.cavity, p.cantilever
        return cls(
            gamma_c_over_alpha=c.Gamma_c / c.alpha,
            omega_m_tau=m.omega_m * m.tau,
            q_c=c.omega_c / c.Gamma_c,
            delta_tilde=p.detuning / c.Gamma_c,
        )


def _den(inp: OptInputs) -> float:
    den = 2.0 * inp.q_c * inp.delta_tilde - inp.delta_tilde**2 - 0.25
    if den <= 0.0:
        raise HeatingRegimeError(
            f"detuning Delta_tilde = {inp.delta_tilde!r} outside the cooling band for Q_c = {inp.q_c!r}"
        )
    return den


def _c1(inp: OptInputs) -> float:
    st2 = inp.omega_m_tau**2
    return inp.gamma_c_over_alpha * (1.0 + st2) / st2 * inp.q_c**2


def _c2(inp: OptInputs) -> float:
    return 0.5 * (inp.delta_tilde**2 + 0.25)


def noise_terms_A(inp: OptInputs, A):
    """(radiation-pressure term, shot term) of the noise population at A."""
    if not np.all(np.asarray(A) > 0.0):
        raise InvalidParameterError("feedback parameter A must be > 0")
    den = _den(inp)
    return _c1(inp) * A / den, _c2(inp) / (A * den)


def noise_population_A(inp: OptInputs, A):
    """Noise population at feedback parameter A; strictly convex in A."""
    rp, shot = noise_terms_A(inp, A)
    return rp + shot


def optimal_A(inp: OptInputs) -> float:
    """A that balances the two noise terms and minimizes n_N:

    A_opt = sqrt((Delta_tilde^2 + 1/4) (alpha / (2 Gamma_c Q_c^2))
                 (omega_m^2 tau^2 / (1 + omega_m^2 tau^2)))
    """
    return math.sqrt(_c2(inp) / _c1(inp))


def noise_floor(inp: OptInputs) -> float:
    """Minimum of n_N over A at fixed detuning and cavity:

    sqrt(2 (Gamma_c/alpha) (1 + omega_m^2 tau^2)/(omega_m^2 tau^2))
      * Q_c sqrt(Delta_tilde^2 + 1/4) / (2 Q_c Delta_tilde - Delta_tilde^2 - 1/4)
    """
    return 2.0 * math.sqrt(_c1(inp) * _c2(inp)) / _den(inp)


def noise_floor_large_qc(inp: OptInputs) -> float:
    """Q_c -> infinity limit of the floor at fixed Delta_tilde:

    sqrt((Gamma_c/alpha)(1 + omega_m^2 tau^2)/(2 omega_m^2 tau^2))
      * sqrt(1 + 1/(4 Delta_tilde^2))
    """
    if inp.delta_tilde <= 0.0:
        raise HeatingRegimeError("large-Q_c limit defined for Delta_tilde > 0 only")
    return noise_floor_bound(inp.gamma_c_over_alpha, inp.omega_m_tau) * math.sqrt(
        1.0 + 1.0 / (4.0 * inp.delta_tilde**2)
    )


def noise_floor_bound(gamma_c_over_alpha: float, omega_m_tau: float) -> float:
    """Detuning- and cavity-independent lower bound on the noise population:

    sqrt((Gamma_c/alpha) (1 + omega_m^2 tau^2) / (2 omega_m^2 tau^2)).

    Equals 1 for Gamma_c = alpha and omega_m tau = 1; approaches
    sqrt(Gamma_c/(2 alpha)) for omega_m tau >> 1, so occupations below one
    are reachable only for strongly absorbing mirrors and slow kernels.
    """
    if gamma_c_over_alpha < 1.0 or omega_m_tau <= 0.0:
        raise InvalidParameterError("need Gamma_c/alpha >= 1 and omega_m*tau > 0")
    st2 = omega_m_tau**2
    return math.sqrt(gamma_c_over_alpha * (1.0 + st2) / (2.0 * st2))


def optimal_detuning(q_c: float) -> float:
    """Detuning minimizing the floor at finite Q_c.

    Stationarity of sqrt(Delta_tilde^2 + 1/4)/den gives
    Delta_tilde^3 + Delta_tilde/4 = Q_c/2 (no closed form; solved
    numerically). Grows like (Q_c/2)^(1/3) for large Q_c.
    """
    if not (q_c > 0.0 and math.isfinite(q_c)):
        raise InvalidParameterError(f"Q_c must be > 0, got {q_c!r}")
    hi = (0.5 * q_c) ** (1.0 / 3.0) + 1.0
    return brentq(lambda d: d**3 + 0.25 * d - 0.5 * q_c, 0.0, hi, xtol=1e-15, rtol=1e-14)


def classical_bound(p: SystemParams) -> float:
    """Floor of the classical population, 3 sqrt(3) k T / (hbar omega_m Q_m).

    Attained at grad_f = (2/3) m omega_m^2 with omega_m tau = 1; any
    operating point of the device sits above it.
    """
    c = p.cantilever
    return 3.0 * math.sqrt(3.0) * KB * p.environment.T / (HBAR * c.omega_m * c.Q_m)


@dataclass(frozen=True)
class OptResult:
    """Noise floor of a device at its own detuning and cavity."""

    n_noise: float
    a_opt: float
    breakdown: tuple[float, float]  # (rp term, shot term) at a_opt
    floor_large_qc: float
    bound: float
    limit_flags: dict

    def as_dict(self) -> dict:
        return {
            "n_noise": self.n_noise,
            "a_opt": self.a_opt,
            "rp_term": self.breakdown[0],
            "shot_term": self.breakdown[1],
            "floor_large_qc": self.floor_large_qc,
            "bound": self.bound,
            "limit_flags": dict(self.limit_flags),
        }


def noise_floor_result(inp: OptInputs, rel_window: float = 0.05) -> OptResult:
    """Evaluate the full chain at the optimum A, with limit flags marking
    which closed-form limit the floor has effectively reached."""
    a = optimal_A(inp)
    breakdown = noise_terms_A(inp, a)
    floor = noise_floor(inp)
    lim = noise_floor_large_qc(inp)
    bound = noise_floor_bound(inp.gamma_c_over_alpha, inp.omega_m_tau)
    return OptResult(
        n_noise=floor,
        a_opt=a,
        breakdown=breakdown,
        floor_large_qc=lim,
        bound=bound,
        limit_flags={
            "large_qc": floor <= (1.0 + rel_window) * lim,
            "quantum_bound": floor <= (1.0 + rel_window) * bound,
        },
    )


_FREE_PARAMS = ("tau", "chi", "P", "delta")


def _default_bounds(p: SystemParams) -> dict[str, tuple[float, float]]:
    w_m = p.cantilever.omega_m
    c = p.cavity
    return {
        "tau": (1e-2 / w_m, 1e2 / w_m),
        "chi": (1e-8, 1e-3),
        "P": (1e-12, 1.0),
        "delta": (1e-3 * c.Gamma_c, c.omega_c),
    }


def _apply_free(p: SystemParams, names: tuple[str, ...], values) -> SystemParams:
    cav_kw, cant_kw = {}, {}
    for name, v in zip(names, values):
        if name == "tau":
            cant_kw["tau"] = float(v)
        elif name == "chi":
            cant_kw["chi"] = float(v)
        elif name == "P":
            cav_kw["P"] = float(v)
        elif name == "delta":
            cav_kw["omega_p"] = float(p.cavity.omega_c - v)
    out = p
    if cav_kw:
        out = replace(out, cavity=replace(out.cavity, **cav_kw))
    if cant_kw:
        out = replace(out, cantilever=replace(out.cantilever, **cant_kw))
    return out


@dataclass(frozen=True)
class JointOptResult:
    """Outcome of the numerical minimization of n_C + n_N."""

    params: SystemParams
    free: tuple[str, ...]
    values: dict[str, float]
    n_objective: float  # n_C + n_N at the optimum
    n_tot: float  # rate-equation total at the optimum
    n_classical: float
    n_noise: float
    classical_bound: float
    noise_bound: float
    classical_bound_active: bool
    noise_bound_active: bool
    n_evaluations: int
    restarts: int


def _composite_population(p: SystemParams) -> float:
    rp, shot = noise_population(p)
    return classical_population(p) + rp + shot


def joint_optimize(
    p: SystemParams,
    free: tuple[str, ...] = ("tau",),
    bounds: dict[str, tuple[float, float]] | None = None,
    *,
    seed: int = 0,
    restarts: int = 5,
    maxiter: int = 2000,
) -> JointOptResult:
    """Minimize the composite population n_C + n_N over the named knobs.

    Derivative-free (Nelder-Mead) in log-parameter space. Points where the
    model rejects the operating point (heating detuning, static instability,
    invalid parameters) take a penalty value that escalates tenfold on each
    restart; restarts begin from seeded random feasible draws inside the
    bounds. Ties in the objective break toward the lexicographically
    smallest parameter vector. Raises NoFeasiblePointError when no feasible
    starting point exists in the bounds.
    """
    free = tuple(free)
    if not free:
        raise InvalidParameterError("need at least one free parameter")
    for name in free:
        if name not in _FREE_PARAMS:
            raise InvalidParameterError(f"unknown free parameter {name!r}; choose from {_FREE_PARAMS}")
    if len(set(free)) != len(free):
        raise InvalidParameterError("duplicate free parameter")
    all_bounds = _default_bounds(p)
    if bounds:
        for name, b in bounds.items():
            if name not in _FREE_PARAMS:
                raise InvalidParameterError(f"bounds given for unknown parameter {name!r}")
            lo, hi = b
            if not (0.0 < lo < hi and math.isfinite(hi)):
                raise InvalidParameterError(f"bounds for {name!r} must satisfy 0 < lo < hi < inf")
            all_bounds[name] = (float(lo), float(hi))
    log_bounds = [(math.log(all_bounds[n][0]), math.log(all_bounds[n][1])) for n in free]

    n_evals = 0

    def evaluate(theta: np.ndarray) -> float | None:
        nonlocal n_evals
        n_evals += 1
        try:
            return _composite_population(_apply_free(p, free, np.exp(theta)))
        except (HeatingRegimeError, InstabilityError, InvalidParameterError):
            return None

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def random_start() -> np.ndarray | None:
        for _ in range(200):
            theta = np.array([rng.uniform(lo, hi) for lo, hi in log_bounds])
            if evaluate(theta) is not None:
                return theta
        return None

    starts: list[np.ndarray] = []
    current = np.array([math.log(getattr(p.cantilever, n, None) or _current_value(p, n)) for n in free])
    current = np.clip(current, [b[0] for b in log_bounds], [b[1] for b in log_bounds])
    if evaluate(current) is not None:
        starts.append(current)
    while len(starts) < restarts:
        s = random_start()
        if s is None:
            break
        starts.append(s)
    if not starts:
        raise NoFeasiblePointError("no feasible starting point found inside the bounds")

    candidates: list[tuple[float, tuple[float, ...], np.ndarray]] = []
    base_penalty = 1e3 * max(evaluate(s) or 1.0 for s in starts)
    for k, theta0 in enumerate(starts):
        penalty = base_penalty * 10.0**k

        def objective(theta: np.ndarray) -> float:
            overshoot = 0.0
            for t, (lo, hi) in zip(theta, log_bounds):
                overshoot += max(0.0, lo - t) + max(0.0, t - hi)
            if overshoot > 0.0:
                return penalty * (1.0 + overshoot)
            v = evaluate(theta)
            return penalty if v is None else v

        res = minimize(
            objective,
            theta0,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-12, "fatol": 1e-14, "adaptive": True},
        )
        theta_best = np.clip(res.x, [b[0] for b in log_bounds], [b[1] for b in log_bounds])
        v = evaluate(theta_best)
        if v is not None:
            candidates.append((v, tuple(np.exp(theta_best)), theta_best))
    if not candidates:
        raise NoFeasiblePointError("all optimization runs ended at infeasible points")

    best_val = min(c[0] for c in candidates)
    near = [c for c in candidates if c[0] <= best_val * (1.0 + 1e-9)]
    _, values_tuple, theta_opt = min(near, key=lambda c: c[1])

    p_opt = _apply_free(p, free, np.exp(theta_opt))
    budget = occupation_budget(p_opt)
    rp, shot = noise_population(p_opt)
    n_c = budget.n_classical
    n_n = rp + shot
    c_bound = classical_bound(p_opt)
    n_bound = noise_floor_bound(
        p_opt.cavity.Gamma_c / p_opt.cavity.alpha, p_opt.cantilever.omega_m * p_opt.cantilever.tau
    )
    return JointOptResult(
        params=p_opt,
        free=free,
        values={name: float(v) for name, v in zip(free, values_tuple)},
        n_objective=float(n_c + n_n),
        n_tot=float(budget.n_tot),
        n_classical=float(n_c),
        n_noise=float(n_n),
        classical_bound=float(c_bound),
        noise_bound=float(n_bound),
        classical_bound_active=bool(n_c <= 1.10 * c_bound),
        noise_bound_active=bool(n_n <= 1.10 * n_bound),
        n_evaluations=n_evals,
        restarts=len(starts),
    )


def _current_value(p: SystemParams, name: str) -> float:
    if name == "P":
        return p.cavity.P if p.cavity.P > 0 else 1e-6
    if name == "delta":
        return p.detuning if p.detuning > 0 else 1e-3 * p.cavity.Gamma_c
    raise InvalidParameterError(f"unknown parameter {name!r}")
