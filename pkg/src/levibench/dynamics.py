"""Stochastic time-domain simulation of the levitated oscillator.

The oscillator is a linear SDE, so each time step applies the exact
damped-oscillator propagator to (x, v) and adds a Gaussian increment
with the exact conditional covariance

    Q(dt) = Sigma_inf - Phi(dt) Sigma_inf Phi(dt)^T,

where Sigma_inf is the stationary covariance of the white-noise-driven
oscillator.  This is unconditionally stable and free of discretization
drift, which matters here: gamma/omega0 can be ~1e-6, so naive
Euler-Maruyama would need absurd step counts over 1e5-1e6 s records.

Randomness comes from a counter-based, seedable generator (numpy's
Philox) with Gaussians produced by the generator's documented ziggurat
transform; a fixed draw order makes records bit-reproducible for a given
plan.  Slow resonance-frequency jitter is an Ornstein-Uhlenbeck process
held piecewise constant over each step.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numba import njit
from scipy import signal

from .constants import HBAR, K_B
from .model_core import NoiseBudget, OscillatorParams
from .optics import OpticalTrain, transmission_curve

_CHUNK = 1 << 20


@dataclass(frozen=True)
class JitterModel:
    """Slow wander of the resonance frequency (OU process)."""

    rms_domega0: float  # rad/s
    correlation_time_s: float

    def __post_init__(self):
        if self.rms_domega0 < 0:
            raise ValueError("jitter RMS must be nonnegative")
        if self.correlation_time_s <= 0:
            raise ValueError("jitter correlation time must be positive")


@dataclass(frozen=True)
class LinearChannel:
    """Displacement-to-voltage conversion V = xi * x + imprecision noise."""

    xi_v_per_m: float


@dataclass(frozen=True)
class NonlinearChannel:
    """Full readout chain V = gain * P_in * T(x_fib, x) + power shot noise."""

    train: OpticalTrain
    gain_v_per_w: float


@dataclass(frozen=True)
class SimulationPlan:
    osc: OscillatorParams
    budget: NoiseBudget
    sample_rate_hz: float
    duration_s: float
    seed: int = 0
    channel: Union[LinearChannel, NonlinearChannel, None] = None
    jitter: Optional[JitterModel] = None

    def __post_init__(self):
        f0 = self.osc.f0_hz
        if self.sample_rate_hz < 4.0 * f0:
            raise ValueError(
                f"sample rate {self.sample_rate_hz} Hz is too low for a "
                f"{f0} Hz resonance (need >= 4 f0)"
            )
        if self.sample_rate_hz < 20.0 * f0:
            warnings.warn(
                f"sample rate {self.sample_rate_hz} Hz is below 20 f0 = "
                f"{20*f0:.4g} Hz; the resonance is marginally resolved",
                UserWarning,
            )
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        osc = self.osc
        d = {
            "sphere": {
                "radius_m": osc.sphere.radius_m,
                "refractive_index": osc.sphere.refractive_index,
                "density_kg_m3": osc.sphere.density_kg_m3,
            },
            "oscillator": {
                "f0_hz": osc.f0_hz,
                "gamma_hz": osc.gamma / (2 * math.pi),
                "temp_env_k": osc.temp_env,
                "mode_angle_rad": osc.mode_angle,
            },
            "noise": {
                "s_xx_imp_m2_hz": self.budget.s_xx_imp,
                "s_ff_ba_n2_hz": self.budget.s_ff_ba,
            },
            "simulation": {
                "sample_rate_hz": self.sample_rate_hz,
                "duration_s": self.duration_s,
                "seed": self.seed,
            },
        }
        if isinstance(self.channel, LinearChannel):
            d["channel"] = {"type": "linear", "xi_v_m": self.channel.xi_v_per_m}
        elif isinstance(self.channel, NonlinearChannel):
            tr = self.channel.train
            d["channel"] = {
                "type": "nonlinear",
                "gain_v_w": self.channel.gain_v_per_w,
                "x_fib_m": tr.x_fib_m,
                "p_in_w": tr.p_in_w,
            }
        if self.jitter is not None:
            d["jitter"] = {
                "rms_domega0_rad_s": self.jitter.rms_domega0,
                "correlation_time_s": self.jitter.correlation_time_s,
            }
        return d

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass
class TimeSeriesRecord:
    """Uniformly sampled simulated or ingested detector data."""

    fs_hz: float
    samples: np.ndarray
    kind: str  # "displacement_m" or "voltage_v"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("record contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.fs_hz


def _phi_chol(omega0: float, gamma: float, dt: float, q_acc: float):
    """Exact one-step propagator and noise Cholesky factor.

    q_acc is the two-sided white acceleration-noise intensity
    S_FF_total / (2 m^2).  Returns (phi11, phi12, phi21, phi22,
    l11, l21, l22).
    """
    alpha = 0.5 * gamma
    disc = omega0 * omega0 - alpha * alpha
    z = disc * dt * dt
    if z > 1e-8:
        om = math.sqrt(disc)
        c = math.cos(om * dt)
        s = math.sin(om * dt) / om
    elif z < -1e-8:
        kp = math.sqrt(-disc)
        c = math.cosh(kp * dt)
        s = math.sinh(kp * dt) / kp
    else:
        c = 1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0
        s = dt * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0)
    e = math.exp(-alpha * dt)
    phi11 = e * (c + alpha * s)
    phi12 = e * s
    phi21 = -omega0 * omega0 * e * s
    phi22 = e * (c - alpha * s)
    if q_acc == 0.0:
        return phi11, phi12, phi21, phi22, 0.0, 0.0, 0.0
    if gamma == 0.0:
        raise ValueError("white-noise drive requires gamma > 0")
    xv = q_acc / (2.0 * gamma * omega0 * omega0)
    vv = q_acc / (2.0 * gamma)
    q11 = xv * (1.0 - phi11 * phi11) - vv * phi12 * phi12
    q12 = -(phi11 * phi21 * xv + phi12 * phi22 * vv)
    q22 = vv * (1.0 - phi22 * phi22) - xv * phi21 * phi21
    l11 = math.sqrt(q11) if q11 > 0.0 else 0.0
    l21 = q12 / l11 if l11 > 0.0 else 0.0
    rest = q22 - l21 * l21
    l22 = math.sqrt(rest) if rest > 0.0 else 0.0
    return phi11, phi12, phi21, phi22, l11, l21, l22


def one_step_covariance(omega0: float, gamma: float, dt: float, q_acc: float) -> np.ndarray:
    """Analytic conditional covariance of one propagator step."""
    p11, p12, p21, p22, l11, l21, l22 = _phi_chol(omega0, gamma, dt, q_acc)
    ll = np.array([[l11, 0.0], [l21, l22]])
    return ll @ ll.T


def propagator_matrix(omega0: float, gamma: float, dt: float) -> np.ndarray:
    p11, p12, p21, p22, *_ = _phi_chol(omega0, gamma, dt, 0.0)
    return np.array([[p11, p12], [p21, p22]])


def oscillator_step(state, dt: float, osc: OscillatorParams, total_force_psd: float, rng):
    """One exact-in-distribution update of (x, v).

    ``total_force_psd`` is the one-sided white force PSD in N^2/Hz
    (thermal plus back-action).  ``rng`` must be a numpy Generator; two
    standard normals are consumed per call when the noise is nonzero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, v = state
    q_acc = total_force_psd / (2.0 * osc.mass_kg**2)
    p11, p12, p21, p22, l11, l21, l22 = _phi_chol(osc.omega0, osc.gamma, dt, q_acc)
    if l11 == 0.0 and l22 == 0.0:
        return (p11 * x + p12 * v, p21 * x + p22 * v)
    n1, n2 = rng.standard_normal(2)
    xn = p11 * x + p12 * v + l11 * n1
    vn = p21 * x + p22 * v + l21 * n1 + l22 * n2
    return (xn, vn)


@njit(cache=True)
def _kernel_const(x, v, p11, p12, p21, p22, l11, l21, l22, normals, out):
    n = normals.shape[0]
    for i in range(n):
        xn = p11 * x + p12 * v + l11 * normals[i, 0]
        vn = p21 * x + p22 * v + l21 * normals[i, 0] + l22 * normals[i, 1]
        x = xn
        v = vn
        out[i] = x
    return x, v


@njit(cache=True)
def _kernel_jitter(x, v, omega0_arr, gamma, dt, q_acc, normals, out):
    alpha = 0.5 * gamma
    n = normals.shape[0]
    for i in range(n):
        w0 = omega0_arr[i]
        disc = w0 * w0 - alpha * alpha
        z = disc * dt * dt
        if z > 1e-8:
            om = math.sqrt(disc)
            c = math.cos(om * dt)
            s = math.sin(om * dt) / om
        elif z < -1e-8:
            kp = math.sqrt(-disc)
            c = math.cosh(kp * dt)
            s = math.sinh(kp * dt) / kp
        else:
            c = 1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0
            s = dt * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0)
        e = math.exp(-alpha * dt)
        p11 = e * (c + alpha * s)
        p12 = e * s
        p21 = -w0 * w0 * e * s
        p22 = e * (c - alpha * s)
        xv = q_acc / (2.0 * gamma * w0 * w0)
        vv = q_acc / (2.0 * gamma)
        q11 = xv * (1.0 - p11 * p11) - vv * p12 * p12
        q12 = -(p11 * p21 * xv + p12 * p22 * vv)
        q22 = vv * (1.0 - p22 * p22) - xv * p21 * p21
        l11 = math.sqrt(q11) if q11 > 0.0 else 0.0
        l21 = q12 / l11 if l11 > 0.0 else 0.0
        rest = q22 - l21 * l21
        l22 = math.sqrt(rest) if rest > 0.0 else 0.0
        xn = p11 * x + p12 * v + l11 * normals[i, 0]
        vn = p21 * x + p22 * v + l21 * normals[i, 0] + l22 * normals[i, 1]
        x = xn
        v = vn
        out[i] = x
    return x, v


def _rng_for(seed: int, stream: int):
    """Philox generator for one of the plan's documented substreams."""
    return np.random.Generator(np.random.Philox(key=(seed << 8) + stream))


def simulate(plan: SimulationPlan) -> TimeSeriesRecord:
    """Run the plan and return the displacement record.

    The initial state is drawn from the stationary distribution of the
    driven oscillator, so records are statistically stationary from the
    first sample.  Substream 0 of the seed drives the motion (two
    normals per step, plus one per step for jitter when present);
    substream 1 is reserved for detector noise.
    """
    osc = plan.osc
    fs = plan.sample_rate_hz
    dt = 1.0 / fs
    n = int(round(plan.duration_s * fs))
    s_ff_total = thermal_plus_backaction_psd(plan)
    q_acc = s_ff_total / (2.0 * osc.mass_kg**2)
    rng = _rng_for(plan.seed, 0)

    out = np.empty(n)
    # stationary start
    x = math.sqrt(q_acc / (2 * osc.gamma * osc.omega0**2)) * rng.standard_normal()
    v = math.sqrt(q_acc / (2 * osc.gamma)) * rng.standard_normal()

    if plan.jitter is None or plan.jitter.rms_domega0 == 0.0:
        p11, p12, p21, p22, l11, l21, l22 = _phi_chol(osc.omega0, osc.gamma, dt, q_acc)
        pos = 0
        while pos < n:
            m = min(_CHUNK, n - pos)
            normals = rng.standard_normal((m, 2))
            x, v = _kernel_const(
                x, v, p11, p12, p21, p22, l11, l21, l22, normals, out[pos : pos + m]
            )
            pos += m
    else:
        jit = plan.jitter
        a = math.exp(-dt / jit.correlation_time_s)
        drive = jit.rms_domega0 * math.sqrt(1.0 - a * a)
        delta = jit.rms_domega0 * rng.standard_normal()  # stationary start
        pos = 0
        while pos < n:
            m = min(_CHUNK, n - pos)
            normals = rng.standard_normal((m, 2))
            ou_in = drive * rng.standard_normal(m)
            deltas, zf = signal.lfilter([1.0], [1.0, -a], ou_in, zi=[a * delta])
            delta = deltas[-1]
            omega0_arr = osc.omega0 + deltas
            x, v = _kernel_jitter(
                x, v, omega0_arr, osc.gamma, dt, q_acc, normals, out[pos : pos + m]
            )
            pos += m

    meta = {
        "plan_hash": plan.content_hash(),
        "seed": plan.seed,
        "plan": plan.to_dict(),
    }
    return TimeSeriesRecord(fs_hz=fs, samples=out, kind="displacement_m", meta=meta)


def thermal_plus_backaction_psd(plan: SimulationPlan) -> float:
    """One-sided white force PSD driving the plan's oscillator [N^2/Hz]."""
    osc = plan.osc
    return 4.0 * osc.mass_kg * osc.gamma * K_B * osc.temp_env + plan.budget.s_ff_ba


def detector_voltage(x_record: TimeSeriesRecord, plan: SimulationPlan) -> TimeSeriesRecord:
    """Convert a displacement record to the detector voltage record.

    Linear channel: V = xi * x_meas + white noise of PSD xi^2 S_xx_imp.
    Nonlinear channel: V = gain * P_in * T(x_fib, x_meas) plus shot noise
    of the detected power.  The readout sees the mode projected onto the
    optical transverse axis, x_meas = x cos(mode_angle).
    """
    if plan.channel is None:
        raise ValueError("plan has no detector channel configured")
    if x_record.kind != "displacement_m":
        raise ValueError("detector_voltage expects a displacement record")
    fs = x_record.fs_hz
    rng = _rng_for(plan.seed, 1)
    x_meas = x_record.samples * math.cos(plan.osc.mode_angle)
    meta = dict(x_record.meta)

    if isinstance(plan.channel, LinearChannel):
        xi = plan.channel.xi_v_per_m
        v = xi * x_meas
        if plan.budget.s_xx_imp > 0.0:
            std = math.sqrt(xi**2 * plan.budget.s_xx_imp * fs / 2.0)
            v = v + std * rng.standard_normal(len(v))
        meta["xi_v_per_m"] = xi
    else:
        ch = plan.channel
        tr = ch.train
        r = tr.sphere.radius_m
        if np.max(np.abs(x_meas)) > 0.05 * r:
            warnings.warn(
                "displacement excursion beyond paraxial validity", UserWarning
            )
            meta["paraxial_warning"] = True
        t_coeff = transmission_curve(tr, tr.x_fib_m, x_meas)
        p_det = t_coeff * tr.p_in_w
        s_pp = 2.0 * HBAR * tr.laser_omega * p_det / tr.detector_qe
        p_noisy = p_det + np.sqrt(s_pp * fs / 2.0) * rng.standard_normal(len(p_det))
        v = ch.gain_v_per_w * p_noisy
        meta["gain_v_per_w"] = ch.gain_v_per_w
    return TimeSeriesRecord(fs_hz=fs, samples=v, kind="voltage_v", meta=meta)
