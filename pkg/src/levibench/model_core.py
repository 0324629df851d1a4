"""Oscillator and noise-budget formulas for the levitated microsphere.

The mechanical model is a damped harmonic oscillator driven by thermal and
back-action forces,

    m x'' + m gamma x' + m omega0^2 x = f_th(t) + f_ba(t),

with one-sided force PSDs ``S_FF_th = 4 m gamma k_B T`` and a readout
subject to the quantum relation ``S_xx_imp * S_FF_ba = hbar^2 / eta``.
All functions here are pure; angular frequencies are rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .constants import HBAR, K_B


class DegenerateBandError(ValueError):
    """Raised when an integration band does not cover the resonance."""


@dataclass(frozen=True)
class SphereParams:
    """Microsphere geometry and material.

    Mass is derived as (4/3) pi R^3 rho and exposed as an attribute.
    """

    radius_m: float
    refractive_index: float
    density_kg_m3: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError("sphere radius must be positive")
        if self.refractive_index <= 1:
            raise ValueError("refractive index must exceed 1")
        if self.density_kg_m3 <= 0:
            raise ValueError("density must be positive")

    @property
    def mass_kg(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius_m**3 * self.density_kg_m3


@dataclass(frozen=True)
class OscillatorParams:
    """Mechanical mode: resonance, dissipation and bath temperature.

    ``omega0`` and ``gamma`` are angular rates in rad/s.  ``mode_angle``
    is the angle between the mode axis and the plane normal to the
    optical axis; the readout sees ``x * cos(mode_angle)``.
    """

    sphere: SphereParams
    omega0: float
    gamma: float
    temp_env: float
    mode_angle: float = 0.0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.temp_env <= 0:
            raise ValueError("temp_env must be positive")

    @property
    def mass_kg(self) -> float:
        return self.sphere.mass_kg

    @property
    def quality_factor(self) -> float:
        return self.omega0 / self.gamma

    @property
    def f0_hz(self) -> float:
        return self.omega0 / (2.0 * math.pi)


@dataclass(frozen=True)
class NoiseBudget:
    """Readout and force noise PSDs entering the measurement model.

    s_xx_imp: displacement imprecision [m^2/Hz]
    s_ff_ba:  back-action force noise [N^2/Hz]
    s_ff_th:  thermal force noise [N^2/Hz]
    eta:      measurement efficiency, hbar^2 / (s_xx_imp * s_ff_ba) <= 1
    """

    s_xx_imp: float
    s_ff_ba: float
    s_ff_th: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("s_xx_imp", "s_ff_ba", "s_ff_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")


def susceptibility_sq(omega, osc: OscillatorParams):
    """|chi(omega)|^2 = 1 / [(omega0^2 - omega^2)^2 + gamma^2 omega^2].

    Accepts scalar or array ``omega`` (rad/s, >= 0); returns s^4.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be nonnegative")
    out = 1.0 / ((osc.omega0**2 - omega**2) ** 2 + (osc.gamma * omega) ** 2)
    return out if out.ndim else float(out)


def thermal_force_psd(osc: OscillatorParams, temp: float | None = None) -> float:
    """One-sided thermal force PSD, 4 m gamma k_B T [N^2/Hz].

    The matching acceleration noise is S_aa_th = S_FF_th / m^2.
    """
    if temp is None:
        temp = osc.temp_env
    if temp < 0:
        raise ValueError("temperature must be nonnegative")
    return 4.0 * osc.mass_kg * osc.gamma * K_B * temp


def acc_measurement_noise_psd(omega, budget: NoiseBudget, osc: OscillatorParams):
    """Measurement-related acceleration noise [( m/s^2 )^2 / Hz].

    S_aa_mea(omega) = S_xx_imp / |chi|^2 + S_FF_ba / m^2
    """
    chi2 = susceptibility_sq(omega, osc)
    return budget.s_xx_imp / chi2 + budget.s_ff_ba / osc.mass_kg**2


def sql_acc_noise(osc: OscillatorParams, eta: float = 1.0) -> float:
    """Standard-quantum-limit acceleration amplitude noise [(m/s^2)/sqrt(Hz)].

    Resonance minimum of the measurement noise over back-action strength
    under S_xx_imp * S_FF_ba = hbar^2 / eta:

        sqrt(2 hbar gamma omega0 / (sqrt(eta) m))
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    return math.sqrt(2.0 * HBAR * osc.gamma * osc.omega0 / (math.sqrt(eta) * osc.mass_kg))


def theoretical_effective_temperature(
    osc: OscillatorParams,
    budget: NoiseBudget,
    band_hz: float = math.inf,
    center_hz: float | None = None,
) -> float:
    """Effective temperature from the band-integrated displacement PSD [K].

    T_eff = (m omega0^2 / k_B) * integral over the band of
            (S_FF_th + S_FF_ba) |chi|^2 / m^2  df

    The band is ``band_hz`` wide, centered on the resonance unless
    ``center_hz`` is given.  With S_FF_ba = 0 and an unbounded band this
    reduces to the bath temperature (equipartition).  A band that does
    not contain the resonance raises :class:`DegenerateBandError`.
    """
    if band_hz <= 0:
        raise DegenerateBandError("band width must be positive")
    f0 = osc.f0_hz
    fc = f0 if center_hz is None else center_hz
    lo = max(fc - band_hz / 2.0, 0.0)
    hi = fc + band_hz / 2.0
    if not (lo < f0 < hi) and math.isfinite(band_hz):
        raise DegenerateBandError(
            f"band [{lo}, {hi}] Hz excludes the resonance at {f0} Hz"
        )
    s_ff = thermal_force_psd(osc) + budget.s_ff_ba
    m = osc.mass_kg

    def integrand(f):
        return s_ff * susceptibility_sq(2.0 * math.pi * f, osc) / m**2

    # the peak is gamma/2pi wide; split the interval so the adaptive rule
    # cannot step over it
    line_hz = osc.gamma / (2.0 * math.pi)
    marks = sorted(
        {f0 + k * line_hz for k in (-1e3, -1e2, -10, -1, -0.1, 0, 0.1, 1, 10, 1e2, 1e3)}
    )
    if math.isinf(hi):
        f_cut = max(10.0 * f0, f0 + 1e3 * line_hz)
        pts = [p for p in marks if lo < p < f_cut]
        part1, _ = integrate.quad(
            integrand, lo, f_cut, points=pts, epsrel=1e-11, limit=1000
        )
        part2, _ = integrate.quad(integrand, f_cut, np.inf, epsrel=1e-11, limit=200)
        total = part1 + part2
    else:
        pts = [p for p in marks if lo < p < hi]
        total, _ = integrate.quad(
            integrand, lo, hi, points=pts, epsrel=1e-11, limit=1000
        )
    return osc.mass_kg * osc.omega0**2 / K_B * total


def displacement_variance_kbt(osc: OscillatorParams, temp: float | None = None) -> float:
    """Equipartition displacement variance k_B T / (m omega0^2) [m^2]."""
    if temp is None:
        temp = osc.temp_env
    return K_B * temp / (osc.mass_kg * osc.omega0**2)
