"""Time-domain Langevin integration of the delayed-feedback cooling model.

State per trajectory is (x, p, F_ph): position, momentum and the low-pass
filtered deflection force. The memory kernel h(t) = 1 - exp(-t/tau) acting on
dF_def/dt is realized exactly as the first-order filter

    tau dF_ph/dt = F_def - F_ph,

stepped with its exact exponential update (zero-order hold on F_def over one
step). Position and momentum advance with a semi-implicit (symplectic) Euler
step; white-noise forces enter the momentum with sqrt(dt) scaling and the
photon shot noise enters F_def, so it is low-pass filtered exactly like the
deterministic deflection force.

RNG: Philox (counter-based, numpy), one child stream per ensemble member,
split again into independent (thermal, shot, rp) substreams. Results are
bit-identical for a given seed and flag set, independent of chunking.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.signal import welch as _scipy_welch

from .config import canonical_json, params_digest, system_params_to_config
from .constants import HBAR, KB
from .errors import (
    InstabilityError,
    InvalidParameterError,
    NonstationaryTrajectoryError,
    SimulationAbortError,
    TooFewSegmentsError,
)
from .model import cavity_photon_number, linear_coefficients, pump_amplitude_from_power, stability_margin
from .params import SystemParams
from .spectral import Spectrum

__all__ = [
    "SimConfig",
    "Trajectory",
    "kernel_lowpass_step",
    "suggest_dt",
    "suggest_config",
    "simulate",
    "estimate_occupancy",
    "welch_psd",
    "shot_noise_counter",
    "poisson_window_counts",
    "write_trajectory",
    "read_trajectory",
]

_CHUNK = 1 << 16  # steps per noise chunk; results do not depend on this
_RECORDS_PER_PERIOD = 8.0
_RNG_ALGORITHM = "philox4x64"

_STATUS_OK = 0
_STATUS_INSTABILITY = 1
_STATUS_NAN = 2


@dataclass(frozen=True)
class SimConfig:
    """Integration setup.

    dt must resolve the fastest scale: dt <= min(2 pi / omega_m_tilde, tau,
    1/Gamma_total) / 50, and the post-burn-in span must cover at least
    100 relaxation times, 100/Gamma_total. Both are enforced when binding
    the config to a parameter set. The include_* switches disable individual
    stochastic drives (damping terms always stay on).
    """

    dt: float
    t_total: float
    t_burn_in: float = 0.0
    seed: int = 0
    nonlinear_cavity: bool = False
    ensemble: int = 1
    x0: float = 0.0
    p0: float = 0.0
    include_thermal: bool = True
    include_shot: bool = True
    include_rp: bool = True
    record_stride: int | None = None

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise InvalidParameterError(f"dt must be finite and > 0, got {self.dt!r}")
        if not (self.t_total > self.t_burn_in >= 0.0):
            raise InvalidParameterError("need t_total > t_burn_in >= 0")
        if not (isinstance(self.ensemble, int) and self.ensemble >= 1):
            raise InvalidParameterError(f"ensemble must be a positive integer, got {self.ensemble!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise InvalidParameterError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.record_stride is not None and (not isinstance(self.record_stride, int) or self.record_stride < 1):
            raise InvalidParameterError("record_stride must be a positive integer or None")


@dataclass
class Trajectory:
    """Recorded ensemble of trajectories.

    Arrays have shape (ensemble, n_samples); times is shared. Samples are
    recorded every `stride` integrator steps, including the initial state,
    and cover the burn-in (analysis routines drop it via config.t_burn_in).
    """

    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    f_ph: np.ndarray
    seed: int
    config: SimConfig
    params_hash: str
    meta: dict = field(default_factory=dict)
    instability_detected: bool = False


def kernel_lowpass_step(f_ph: float, f_def: float, dt: float, tau: float):
    """Exact one-step update of tau dF_ph/dt = F_def - F_ph with F_def held.

    Returns F_def + (F_ph - F_def) * exp(-dt/tau). Fixed point at
    F_ph = F_def; reproduces the step response 1 - exp(-t/tau) exactly.
    Accepts arrays for f_ph/f_def.
    """
    if not (tau > 0.0 and dt >= 0.0):
        raise InvalidParameterError("kernel step needs tau > 0 and dt >= 0")
    a = math.exp(-dt / tau)
    return f_def + (f_ph - f_def) * a


@njit(cache=True)
def _chunk_linear(
    state, n, dt, mass, w2, gamma0, grad_f, a, shot_amp, sig_th, sig_rp, sqdt,
    xi_th, xi_rp, xi_sh, rec_x, rec_p, rec_f, stride, step0, threshold,
):  # pragma: no cover - exercised via simulate()
    x = state[0]
    p = state[1]
    f = state[2]
    status = 0
    stop = -1
    for j in range(n):
        p += dt * (-mass * w2 * x - gamma0 * p + f) + sqdt * (sig_th * xi_th[j] + sig_rp * xi_rp[j])
        x += dt * p / mass
        f_def = grad_f * x + shot_amp * xi_sh[j]
        f = f_def + (f - f_def) * a
        k = step0 + j + 1
        if k % stride == 0:
            ri = k // stride
            rec_x[ri] = x
            rec_p[ri] = p
            rec_f[ri] = f
        if x != x:
            status = 2
            stop = k
            break
        if abs(x) > threshold:
            status = 1
            stop = k
            break
    state[0] = x
    state[1] = p
    state[2] = f
    return status, stop


@njit(cache=True)
def _chunk_nonlinear(
    state, n, dt, mass, w2, gamma0, a, shot_amp, sig_th, sig_rp, sqdt,
    chi_hwc, l_c, alpha, e2, omega_c, omega_p, g24,
    xi_th, xi_rp, xi_sh, rec_x, rec_p, rec_f, stride, step0, threshold,
):  # pragma: no cover - exercised via simulate()
    x = state[0]
    p = state[1]
    f = state[2]
    status = 0
    stop = -1
    for j in range(n):
        p += dt * (-mass * w2 * x - gamma0 * p + f) + sqdt * (sig_th * xi_th[j] + sig_rp * xi_rp[j])
        x += dt * p / mass
        geom = 1.0 - x / l_c
        d_eff = omega_c * geom - omega_p
        n_c = e2 / (d_eff * d_eff + g24)
        current = alpha * n_c + shot_amp * xi_sh[j]
        f_def = chi_hwc * geom * current
        f = f_def + (f - f_def) * a
        k = step0 + j + 1
        if k % stride == 0:
            ri = k // stride
            rec_x[ri] = x
            rec_p[ri] = p
            rec_f[ri] = f
        if x != x:
            status = 2
            stop = k
            break
        if abs(x) > threshold:
            status = 1
            stop = k
            break
    state[0] = x
    state[1] = p
    state[2] = f
    return status, stop


def _reference_scales(p: SystemParams, lc) -> tuple[float, float, float]:
    """(omega_ref, n_ref, x_threshold). Uses omega_m_tilde on the stable side
    and falls back to the bare omega_m past the static instability, where the
    renormalized frequency is undefined and only the order of magnitude of
    the runaway detector matters."""
    margin = stability_margin(p, lc.grad_f)
    w_ref = lc.omega_m_tilde if margin > 0.0 else p.cantilever.omega_m
    n_ref = KB * lc.t_bar / (HBAR * w_ref)
    thr = 1e3 * math.sqrt(HBAR * (2.0 * n_ref + 1.0) / (2.0 * p.cantilever.m * w_ref))
    return w_ref, n_ref, thr


def bind_config(p: SystemParams, cfg: SimConfig) -> dict:
    """Validate cfg against a parameter set; returns derived step constants."""
    c = p.cantilever
    lc = linear_coefficients(p)
    w_ref, _, threshold = _reference_scales(p, lc)
    gamma_tot = lc.gamma_total
    dt_max = min(2.0 * math.pi / w_ref, c.tau, 1.0 / gamma_tot if gamma_tot > 0 else math.inf) / 50.0
    if cfg.dt > dt_max:
        raise InvalidParameterError(f"dt = {cfg.dt!r} s exceeds resolution bound {dt_max!r} s")
    if cfg.t_total - cfg.t_burn_in < 100.0 / gamma_tot:
        raise InvalidParameterError(
            f"post-burn-in span {cfg.t_total - cfg.t_burn_in!r} s is below 100/Gamma_total = {100.0 / gamma_tot!r} s"
        )
    n_steps = int(round(cfg.t_total / cfg.dt))
    if cfg.record_stride is not None:
        stride = cfg.record_stride
    else:
        stride = max(1, int((2.0 * math.pi / w_ref) / (_RECORDS_PER_PERIOD * cfg.dt)))
    if cfg.nonlinear_cavity:
        threshold = min(threshold, 0.5 * p.cavity.L_c)
    return {"lc": lc, "n_steps": n_steps, "stride": stride, "threshold": threshold, "omega_ref": w_ref}


def _integrate_member(p: SystemParams, cfg: SimConfig, bound: dict, member_seq) -> tuple:
    c, cav = p.cantilever, p.cavity
    lc = bound["lc"]
    n_steps, stride, threshold = bound["n_steps"], bound["stride"], bound["threshold"]
    dt, sqdt = cfg.dt, math.sqrt(cfg.dt)
    a = math.exp(-dt / c.tau)
    gamma0 = lc.gamma_m + lc.gamma_rp
    sig_th = math.sqrt(lc.s_th) if cfg.include_thermal else 0.0
    sig_rp = math.sqrt(lc.s_rp) if cfg.include_rp else 0.0

    gen_th, gen_sh, gen_rp = (np.random.Generator(np.random.Philox(s)) for s in member_seq.spawn(3))
    zeros = np.zeros(_CHUNK)

    n_rec = n_steps // stride + 1
    rec_x = np.empty(n_rec)
    rec_p = np.empty(n_rec)
    rec_f = np.empty(n_rec)

    x0, p0 = cfg.x0, cfg.p0
    if cfg.nonlinear_cavity:
        e2 = pump_amplitude_from_power(p) ** 2
        chi_hwc = c.chi * HBAR * cav.omega_c
        sq_anc0 = math.sqrt(cav.alpha * cavity_photon_number(p, 0.0)) if cav.P > 0 else 0.0
        shot_amp = (sq_anc0 / sqdt) if cfg.include_shot else 0.0
        f0 = chi_hwc * (1.0 - x0 / cav.L_c) * cav.alpha * cavity_photon_number(p, x0)
    else:
        shot_amp = (lc.force_noise / sqdt) if cfg.include_shot else 0.0
        f0 = lc.grad_f * x0
    state = np.array([x0, p0, f0])
    rec_x[0], rec_p[0], rec_f[0] = x0, p0, f0

    status, stop = _STATUS_OK, -1
    step0 = 0
    while step0 < n_steps:
        n = min(_CHUNK, n_steps - step0)
        xi_th = gen_th.standard_normal(n) if cfg.include_thermal else zeros[:n]
        xi_sh = gen_sh.standard_normal(n) if cfg.include_shot else zeros[:n]
        xi_rp = gen_rp.standard_normal(n) if cfg.include_rp else zeros[:n]
        if cfg.nonlinear_cavity:
            status, stop = _chunk_nonlinear(
                state, n, dt, c.m, c.omega_m**2, gamma0, a, shot_amp, sig_th, sig_rp, sqdt,
                chi_hwc, cav.L_c, cav.alpha, e2, cav.omega_c, cav.omega_p, 0.25 * cav.Gamma_c**2,
                xi_th, xi_rp, xi_sh, rec_x, rec_p, rec_f, stride, step0, threshold,
            )
        else:
            status, stop = _chunk_linear(
                state, n, dt, c.m, c.omega_m**2, gamma0, lc.grad_f, a, shot_amp, sig_th, sig_rp, sqdt,
                xi_th, xi_rp, xi_sh, rec_x, rec_p, rec_f, stride, step0, threshold,
            )
        if status != _STATUS_OK:
            break
        step0 += n
    if status == _STATUS_NAN:
        raise SimulationAbortError(
            f"non-finite state at step {stop} (t = {stop * dt!r} s); dt may be too large for this regime"
        )
    n_valid = n_rec if status == _STATUS_OK else stop // stride + 1
    return rec_x, rec_p, rec_f, status, n_valid, stop


def suggest_dt(p: SystemParams) -> float:
    """Largest step satisfying the resolution rule for this parameter set."""
    lc = linear_coefficients(p)
    w_ref, _, _ = _reference_scales(p, lc)
    g = lc.gamma_total
    return min(2.0 * math.pi / w_ref, p.cantilever.tau, 1.0 / g if g > 0 else math.inf) / 50.0


def suggest_config(p: SystemParams, seed: int = 0, *, ensemble: int = 4, relax_times: float = 150.0) -> SimConfig:
    """A SimConfig meeting both resolution and duration invariants:
    step at the resolution bound, burn-in of 20 relaxation times, and a
    post-burn-in span of relax_times/Gamma_total (>= the required 100)."""
    if relax_times < 100.0:
        raise InvalidParameterError(f"relax_times must be >= 100, got {relax_times!r}")
    lc = linear_coefficients(p)
    g = lc.gamma_total
    burn = 20.0 / g
    return SimConfig(
        dt=suggest_dt(p),
        t_total=burn + relax_times / g,
        t_burn_in=burn,
        seed=seed,
        ensemble=ensemble,
    )


def _member_task(args: tuple) -> tuple:
    p, cfg, seq = args
    return _integrate_member(p, cfg, bind_config(p, cfg), seq)


def simulate(p: SystemParams, cfg: SimConfig, jobs: int = 1) -> Trajectory:
    """Integrate an ensemble of trajectories.

    Members use independent Philox substreams spawned from cfg.seed, so the
    ensemble decomposition (and any parallel execution over members, via
    jobs > 1) cannot change the numbers. If any member crosses the runaway
    threshold (|x| > 1e3 sqrt(hbar (2 n_ref + 1) / (2 m omega_ref))),
    integration of that member stops, the record is truncated to a common
    length and instability_detected is set.
    """
    bound = bind_config(p, cfg)
    root = np.random.SeedSequence(cfg.seed)
    members = root.spawn(cfg.ensemble)
    if jobs > 1 and cfg.ensemble > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, cfg.ensemble)) as ex:
            results = list(ex.map(_member_task, [(p, cfg, seq) for seq in members]))
    else:
        results = [_integrate_member(p, cfg, bound, seq) for seq in members]
    xs, ps, fs = [], [], []
    n_valid_min = None
    tripped = False
    stop_step = None
    for rx, rp_, rf, status, n_valid, stop in results:
        xs.append(rx)
        ps.append(rp_)
        fs.append(rf)
        if status == _STATUS_INSTABILITY:
            tripped = True
            stop_step = stop if stop_step is None else min(stop_step, stop)
        n_valid_min = n_valid if n_valid_min is None else min(n_valid_min, n_valid)
    if n_valid_min < 2:
        raise SimulationAbortError("runaway before the second recorded sample; nothing to analyse")
    stride, dt = bound["stride"], cfg.dt
    times = np.arange(n_valid_min) * (stride * dt)
    lc = bound["lc"]
    meta = {
        "rng": _RNG_ALGORITHM,
        "omega_m": p.cantilever.omega_m,
        "omega_m_tilde": lc.omega_m_tilde,
        "gamma_total": lc.gamma_total,
        "stride": stride,
        "dt": dt,
        "threshold": bound["threshold"],
        "stopped_at_s": None if stop_step is None else stop_step * dt,
    }
    return Trajectory(
        times=times,
        x=np.stack([v[:n_valid_min] for v in xs]),
        p=np.stack([v[:n_valid_min] for v in ps]),
        f_ph=np.stack([v[:n_valid_min] for v in fs]),
        seed=cfg.seed,
        config=cfg,
        params_hash=params_digest(p),
        meta=meta,
        instability_detected=tripped,
    )


def _post_burn(traj: Trajectory) -> np.ndarray:
    keep = traj.times >= traj.config.t_burn_in
    x = traj.x[:, keep]
    if x.shape[1] < 16:
        raise InvalidParameterError("too few post-burn-in samples")
    return x


def estimate_occupancy(traj: Trajectory, p: SystemParams) -> tuple[float, float]:
    """Occupancy estimate n_hat = m omega_m_tilde var(x) / hbar - 1/2.

    The standard error comes from blocking: second moments are averaged over
    blocks of duration 20/Gamma_total and the block-to-block scatter sets the
    error bar. A first-half/second-half comparison of the block series guards
    against unconverged burn-in (NonstationaryTrajectoryError beyond 3 sigma).
    """
    if traj.instability_detected:
        raise InstabilityError("trajectory flagged unstable; occupancy undefined")
    lc = linear_coefficients(p)
    x = _post_burn(traj)
    dt_s = float(traj.times[1] - traj.times[0])
    n_block = max(1, int(round(20.0 / (lc.gamma_total * dt_s))))
    n_members, n_samp = x.shape
    j_per = n_samp // n_block
    if j_per < 4:
        raise InvalidParameterError(
            f"only {j_per} blocks of 20/Gamma_total per member; trajectory too short for blocking"
        )
    mean = float(x.mean())
    m2 = (x - mean) ** 2
    trimmed = m2[:, : j_per * n_block].reshape(n_members, j_per, n_block)
    v = trimmed.mean(axis=2)  # (members, blocks) block second moments
    half = j_per // 2
    v1, v2 = v[:, :half].ravel(), v[:, half : 2 * half].ravel()
    se1 = v1.std(ddof=1) / math.sqrt(v1.size)
    se2 = v2.std(ddof=1) / math.sqrt(v2.size)
    if abs(v1.mean() - v2.mean()) > 3.0 * math.hypot(se1, se2):
        raise NonstationaryTrajectoryError(
            "first/second half block means differ by more than 3 sigma; increase t_burn_in"
        )
    v_all = v.ravel()
    var = float(v_all.mean())
    se_var = float(v_all.std(ddof=1) / math.sqrt(v_all.size))
    scale = p.cantilever.m * lc.omega_m_tilde / HBAR
    return scale * var - 0.5, scale * se_var


def welch_psd(traj: Trajectory, segments: int) -> Spectrum:
    """Averaged-periodogram PSD (Hann window, non-overlapping segments).

    Post-burn-in samples of every ensemble member are split into `segments`
    segments each; at least 8 segments of at least 50 mechanical periods are
    required. Density scaling on the angular-frequency axis, so
    (1/2pi) * integral S(omega) d omega recovers var(x).
    """
    if segments < 8:
        raise TooFewSegmentsError(f"need >= 8 segments, got {segments}")
    x = _post_burn(traj)
    dt_s = float(traj.times[1] - traj.times[0])
    nperseg = x.shape[1] // segments
    period = 2.0 * math.pi / traj.meta["omega_m"]
    if nperseg * dt_s < 50.0 * period:
        raise TooFewSegmentsError(
            f"segment span {nperseg * dt_s!r} s is below 50 mechanical periods ({50 * period!r} s)"
        )
    fs = 1.0 / dt_s
    f, pxx = _scipy_welch(
        x, fs=fs, window="hann", nperseg=nperseg, noverlap=0, detrend="constant",
        scaling="density", return_onesided=True, axis=-1,
    )
    # scipy's density is per Hz: var = integral Pxx df. With our convention
    # var = (1/2pi) integral S(omega) d omega and omega = 2 pi f, the two
    # 2 pi factors cancel: S(omega) = Pxx at f = omega / 2 pi.
    pxx_avg = pxx.mean(axis=0)
    return Spectrum(
        freqs=2.0 * math.pi * f[1:],
        S_total=pxx_avg[1:],
        S_th=None,
        S_rp=None,
        S_shot=None,
        params_hash=traj.params_hash,
    )


def poisson_window_counts(rate: float, window: float, seed: int, n_samples: int = 10_000) -> np.ndarray:
    """Sampled photon-absorption counts n_p = integral of I_c over a window."""
    if rate < 0.0 or window <= 0.0:
        raise InvalidParameterError("need rate >= 0 and window > 0")
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return gen.poisson(rate * window, n_samples)


def shot_noise_counter(
    p: SystemParams, window: float, seed: int, n_samples: int = 10_000, x: float = 0.0
) -> tuple[float, float]:
    """Ensemble mean and variance of absorbed-photon counts in a window.

    The window must be much shorter than the mechanical period (enforced as
    < period/10) so the mirror is effectively frozen; counts are then Poisson
    with mean alpha n_c(x) window and Fano factor 1.
    """
    period = 2.0 * math.pi / p.cantilever.omega_m
    if not window < 0.1 * period:
        raise InvalidParameterError(f"window {window!r} s must be < 0.1 mechanical period ({0.1 * period!r} s)")
    rate = p.cavity.alpha * cavity_photon_number(p, x)
    counts = poisson_window_counts(rate, window, seed, n_samples)
    return float(counts.mean()), float(counts.var(ddof=1))


_MAGIC = b"PTCL1"
_HEADER = struct.Struct("<5sBIQQd")  # magic, version, n_members, n_samples, stride, dt


def write_trajectory(traj: Trajectory, path: str, fmt: str = "binary") -> None:
    """Write a trajectory plus a JSON sidecar (path + '.json').

    binary: magic 'PTCL1', header, then little-endian float64 blocks: times,
    then per member x, p, f_ph. csv: long-format rows
    (time_s, member, x_m, p_kg_m_per_s, f_ph_n).
    """
    n_members, n_samples = traj.x.shape
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, 1, n_members, n_samples, traj.meta.get("stride", 1), traj.meta.get("dt", 0.0)))
            fh.write(np.ascontiguousarray(traj.times, dtype="<f8").tobytes())
            for i in range(n_members):
                for arr in (traj.x, traj.p, traj.f_ph):
                    fh.write(np.ascontiguousarray(arr[i], dtype="<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time_s,member,x_m,p_kg_m_per_s,f_ph_n\n")
            for i in range(n_members):
                for j in range(n_samples):
                    fh.write(
                        f"{float(traj.times[j])!r},{i},{float(traj.x[i, j])!r},"
                        f"{float(traj.p[i, j])!r},{float(traj.f_ph[i, j])!r}\n"
                    )
    else:
        raise InvalidParameterError(f"unknown trajectory format {fmt!r}")
    sidecar = {
        "format": fmt,
        "seed": traj.seed,
        "params_hash": traj.params_hash,
        "instability_detected": traj.instability_detected,
        "meta": traj.meta,
        "config": {
            "dt": traj.config.dt,
            "t_total": traj.config.t_total,
            "t_burn_in": traj.config.t_burn_in,
            "seed": traj.config.seed,
            "nonlinear_cavity": traj.config.nonlinear_cavity,
            "ensemble": traj.config.ensemble,
            "x0": traj.config.x0,
            "p0": traj.config.p0,
            "include_thermal": traj.config.include_thermal,
            "include_shot": traj.config.include_shot,
            "include_rp": traj.config.include_rp,
        },
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        fh.write(canonical_json(sidecar))


def read_trajectory(path: str) -> Trajectory:
    """Read a binary trajectory written by write_trajectory."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n_members, n_samples, stride, dt = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise InvalidParameterError(f"{path}: not a PTCL1 v1 trajectory file")
        def block() -> np.ndarray:
            return np.frombuffer(fh.read(8 * n_samples), dtype="<f8").copy()
        times = block()
        xs, ps, fs = [], [], []
        for _ in range(n_members):
            xs.append(block())
            ps.append(block())
            fs.append(block())
    with open(path + ".json", "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    cfg = SimConfig(**sidecar["config"])
    return Trajectory(
        times=times,
        x=np.stack(xs),
        p=np.stack(ps),
        f_ph=np.stack(fs),
        seed=sidecar["seed"],
        config=cfg,
        params_hash=sidecar["params_hash"],
        meta=sidecar["meta"],
        instability_detected=sidecar["instability_detected"],
    )
