"""Estimation of the deformation coefficient from cooling curves.

A cooling run measures the cantilever mode temperature at several pump
powers. The model predicts T_eff(P) = n_tot(P) hbar omega_m_tilde(P) / k,
which couples the deformation coefficient chi (through the force gradient
and damping), the temperature-averaging parameter epsilon (through the
absorption-heated bath T_bar) and Gamma_c/alpha (through the noise floor).
The fit runs damped least squares on log-temperature residuals: measured
mode temperatures span orders of magnitude with roughly multiplicative
error, so log residuals weight the curve evenly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import HBAR, KB
from .errors import (
    DatasetParseError,
    FitDivergedError,
    HeatingRegimeError,
    InstabilityError,
    InvalidParameterError,
    UnderdeterminedFitError,
)
from .model import noise_population, occupation_budget
from .params import SystemParams

__all__ = [
    "Dataset",
    "FitResult",
    "predict_mode_temperature",
    "load_dataset",
    "fit",
]

_FREE_CHOICES = ("chi", "epsilon", "gamma_c_over_alpha")
_BOUNDS = {
    "chi": (1e-9, 1e-1),
    "epsilon": (1.0, 4.0),
    "gamma_c_over_alpha": (1.0, 1e6),
}


@dataclass(frozen=True)
class Dataset:
    """Temperature-vs-power measurements plus the device they describe.

    powers strictly increasing and positive; sigmas optional (unit weights
    when absent). The device carries the bath temperature and every
    parameter not being fitted.
    """

    powers: np.ndarray
    temperatures: np.ndarray
    sigmas: np.ndarray | None = None
    device: SystemParams | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        powers = np.asarray(self.powers, dtype=float)
        temps = np.asarray(self.temperatures, dtype=float)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "temperatures", temps)
        if powers.ndim != 1 or temps.shape != powers.shape:
            raise InvalidParameterError("powers and temperatures must be 1-D arrays of equal length")
        if len(powers) < 3:
            raise InvalidParameterError(f"need at least 3 rows, got {len(powers)}")
        if not np.all(powers > 0.0):
            raise InvalidParameterError("powers must be positive")
        if np.any(np.diff(powers) == 0.0):
            raise InvalidParameterError("duplicate abscissa: powers must be distinct")
        if not np.all(np.diff(powers) > 0.0):
            raise InvalidParameterError("powers must be strictly increasing")
        if not np.all(temps > 0.0):
            raise InvalidParameterError("temperatures must be positive")
        if self.sigmas is not None:
            sig = np.asarray(self.sigmas, dtype=float)
            object.__setattr__(self, "sigmas", sig)
            if sig.shape != powers.shape or not np.all(sig > 0.0):
                raise InvalidParameterError("sigmas must be positive and match the power grid")

    def __len__(self) -> int:
        return len(self.powers)


def predict_mode_temperature(p: SystemParams, power: float) -> float:
    """Mode temperature T_eff = n_tot hbar omega_m_tilde / k at pump power."""
    if power < 0.0:
        raise InvalidParameterError(f"power must be >= 0, got {power!r}")
    p_at = replace(p, cavity=replace(p.cavity, P=float(power)))
    b = occupation_budget(p_at)
    return b.n_tot * HBAR * b.omega_m_tilde / KB


def load_dataset(path: str, device: SystemParams | None = None, name: str = "") -> Dataset:
    """Read a cooling-curve CSV: header power_w,temperature_k[,sigma_k].

    '#' starts a comment; rows are sorted by power on load; duplicate powers
    and non-positive values are rejected with the offending line number.
    """
    rows: list[tuple[float, ...]] = []
    header: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [s.strip() for s in line.split(",")]
            if header is None:
                if parts == ["power_w", "temperature_k"] or parts == ["power_w", "temperature_k", "sigma_k"]:
                    header = parts
                    continue
                raise DatasetParseError(
                    f"{path}:{lineno}: expected header 'power_w,temperature_k[,sigma_k]', got {line!r}"
                )
            if len(parts) != len(header):
                raise DatasetParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
            try:
                values = tuple(float(s) for s in parts)
            except ValueError as exc:
                raise DatasetParseError(f"{path}:{lineno}: {exc}") from None
            if values[0] <= 0.0:
                raise DatasetParseError(f"{path}:{lineno}: power must be positive, got {values[0]!r}")
            if values[1] <= 0.0:
                raise DatasetParseError(f"{path}:{lineno}: temperature must be positive, got {values[1]!r}")
            if len(values) == 3 and values[2] <= 0.0:
                raise DatasetParseError(f"{path}:{lineno}: sigma must be positive, got {values[2]!r}")
            rows.append(values)
    if header is None:
        raise DatasetParseError(f"{path}: empty file, expected 'power_w,temperature_k[,sigma_k]' header")
    if len(rows) < 3:
        raise DatasetParseError(f"{path}: need at least 3 data rows, got {len(rows)}")
    rows.sort(key=lambda r: r[0])
    powers = np.array([r[0] for r in rows])
    if np.any(np.diff(powers) == 0.0):
        dup = powers[np.where(np.diff(powers) == 0.0)[0][0]]
        raise DatasetParseError(f"{path}: duplicate abscissa at power {dup!r} W")
    temps = np.array([r[1] for r in rows])
    sigmas = np.array([r[2] for r in rows]) if len(header) == 3 else None
    return Dataset(powers=powers, temperatures=temps, sigmas=sigmas, device=device, name=name or path)


@dataclass(frozen=True)
class FitResult:
    """Least-squares estimate with curvature-based uncertainties.

    covariance/correlation/stderr are in the internal log-parameter space
    mapped back to physical scale (stderr[k] = value[k] * log-space sigma).
    n_noise_implied is the power-independent noise population of the fitted
    device, quoted at the largest dataset power.
    """

    free: tuple[str, ...]
    values: dict[str, float]
    stderr: dict[str, float]
    covariance: np.ndarray
    correlation: np.ndarray
    residuals: np.ndarray  # T_model - T_data, K
    chi2_per_dof: float
    n_noise_implied: float
    n_iterations: int
    converged: bool
    weakly_identifiable: bool
    params: SystemParams

    @property
    def chi_hat(self) -> float:
        return self.values.get("chi", self.params.cantilever.chi)

    @property
    def epsilon_hat(self) -> float:
        return self.values.get("epsilon", self.params.cantilever.epsilon)


def _apply_fit_params(p: SystemParams, names: tuple[str, ...], values: np.ndarray) -> SystemParams:
    cav_kw, cant_kw = {}, {}
    for name, v in zip(names, values):
        if name == "chi":
            cant_kw["chi"] = float(v)
        elif name == "epsilon":
            cant_kw["epsilon"] = float(v)
        elif name == "gamma_c_over_alpha":
            cav_kw["alpha"] = p.cavity.Gamma_c / float(v)
    out = p
    if cav_kw:
        out = replace(out, cavity=replace(out.cavity, **cav_kw))
    if cant_kw:
        out = replace(out, cantilever=replace(out.cantilever, **cant_kw))
    return out


def fit(
    dataset: Dataset,
    free: tuple[str, ...] = ("chi",),
    device: SystemParams | None = None,
    *,
    start: dict[str, float] | None = None,
    max_iterations: int = 200,
    rel_step: float = 1e-6,
) -> FitResult:
    """Damped least squares on log mode-temperature residuals.

    free is a subset of (chi, epsilon, gamma_c_over_alpha); the starting
    point defaults to the device's current values (overridable via start).
    Weights are T_i/sigma_i (so squared log-residuals approximate the usual
    1/sigma^2-weighted temperature residuals); unit weights without sigmas.
    The Jacobian uses central differences with relative step rel_step.
    Raises UnderdeterminedFitError when rows <= free parameters and
    FitDivergedError when damping cannot find a descent direction or the
    iteration cap is hit without convergence.
    """
    p0 = device if device is not None else dataset.device
    if p0 is None:
        raise InvalidParameterError("no device: pass device= or use a Dataset with one attached")
    free = tuple(free)
    if not free or any(n not in _FREE_CHOICES for n in free) or len(set(free)) != len(free):
        raise InvalidParameterError(f"free must be a non-empty subset of {_FREE_CHOICES}, got {free!r}")
    n_rows = len(dataset)
    if n_rows <= len(free):
        raise UnderdeterminedFitError(f"{len(free)} free parameters need more than {n_rows} rows")

    log_t_obs = np.log(dataset.temperatures)
    weights = dataset.temperatures / dataset.sigmas if dataset.sigmas is not None else np.ones(n_rows)
    lo = np.log([_BOUNDS[n][0] for n in free])
    hi = np.log([_BOUNDS[n][1] for n in free])

    defaults = {
        "chi": p0.cantilever.chi,
        "epsilon": p0.cantilever.epsilon,
        "gamma_c_over_alpha": p0.cavity.Gamma_c / p0.cavity.alpha,
    }
    if start:
        defaults.update(start)
    theta = np.clip(np.log([defaults[n] for n in free]), lo, hi)

    def residuals_at(th: np.ndarray) -> np.ndarray | None:
        p_try = _apply_fit_params(p0, free, np.exp(th))
        out = np.empty(n_rows)
        for i, power in enumerate(dataset.powers):
            try:
                out[i] = math.log(predict_mode_temperature(p_try, power))
            except (HeatingRegimeError, InstabilityError, InvalidParameterError):
                return None
        return (out - log_t_obs) * weights

    r = residuals_at(theta)
    if r is None:
        raise FitDivergedError("model rejects the starting point (heating or unstable regime)")
    cost = float(r @ r)

    def jacobian(th: np.ndarray) -> np.ndarray:
        J = np.empty((n_rows, len(free)))
        for j in range(len(free)):
            h = rel_step * max(1.0, abs(th[j]))
            up, dn = th.copy(), th.copy()
            up[j] += h
            dn[j] -= h
            r_up, r_dn = residuals_at(up), residuals_at(dn)
            if r_up is None or r_dn is None:
                raise FitDivergedError("model rejects a Jacobian probe point")
            J[:, j] = (r_up - r_dn) / (2.0 * h)
        return J

    lam = 1e-3
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        J = jacobian(theta)
        g = J.T @ r
        # Coordinates pinned at a bound with the gradient pointing outward are
        # frozen for this iteration; otherwise the clipped step degrades the
        # step quality of the remaining coordinates.
        pinned = ((theta <= lo + 1e-12) & (g > 0)) | ((theta >= hi - 1e-12) & (g < 0))
        active = ~pinned
        if not np.any(active):
            converged = True
            break
        if float(np.max(np.abs(g[active]))) < 1e-12 * max(cost, 1.0):
            converged = True
            break
        g_act = g[active]
        h_act = (J.T @ J)[np.ix_(active, active)]
        stepped = False
        while lam < 1e15:
            damped = h_act + lam * np.diag(np.clip(np.diag(h_act), 1e-30, None))
            try:
                delta_act = np.linalg.solve(damped, -g_act)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            delta = np.zeros_like(theta)
            delta[active] = delta_act
            trial = np.clip(theta + delta, lo, hi)
            r_try = residuals_at(trial)
            if r_try is not None:
                cost_try = float(r_try @ r_try)
                if cost_try <= cost:
                    improvement = cost - cost_try
                    step = float(np.max(np.abs(trial - theta)))
                    theta, r, cost = trial, r_try, cost_try
                    lam = max(lam / 3.0, 1e-12)
                    stepped = True
                    if step < 1e-10 or improvement < 1e-12 * max(cost, 1.0):
                        converged = True
                    break
            lam *= 10.0
        if not stepped:
            # damping exhausted without descent: stationary point
            converged = True
        if converged:
            break
    if not converged:
        raise FitDivergedError(f"no convergence after {max_iterations} iterations (cost {cost!r})")

    J = jacobian(theta)
    dof = n_rows - len(free)
    chi2_per_dof = cost / dof
    try:
        cov_log = chi2_per_dof * np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov_log = np.full((len(free), len(free)), np.inf)
    sig_log = np.sqrt(np.clip(np.diag(cov_log), 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov_log / np.outer(sig_log, sig_log)
    np.fill_diagonal(corr, 1.0)
    weak = bool(len(free) > 1 and np.max(np.abs(corr - np.eye(len(free)))) > 0.95)

    values_phys = np.exp(theta)
    p_fit = _apply_fit_params(p0, free, values_phys)
    t_model = np.array([predict_mode_temperature(p_fit, power) for power in dataset.powers])
    rp_term, shot_term = noise_population(
        replace(p_fit, cavity=replace(p_fit.cavity, P=float(dataset.powers[-1])))
    )
    return FitResult(
        free=free,
        values={n: float(v) for n, v in zip(free, values_phys)},
        stderr={n: float(v * s) for n, v, s in zip(free, values_phys, sig_log)},
        covariance=cov_log,
        correlation=corr,
        residuals=t_model - dataset.temperatures,
        chi2_per_dof=chi2_per_dof,
        n_noise_implied=rp_term + shot_term,
        n_iterations=iteration,
        converged=converged,
        weakly_identifiable=weak,
        params=p_fit,
    )
