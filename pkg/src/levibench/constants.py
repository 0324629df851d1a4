"""Physical constants (CODATA 2018) and the fixed PSD convention.

Every spectral quantity in this package follows one convention:

* one-sided power spectral densities,
* expressed per hertz of ordinary frequency f, with ``omega = 2*pi*f``
  substituted into formulas written in angular frequency,
* normalized so that ``integral_0^inf S(f) df`` equals the variance of
  the underlying signal.

Dissipation rates and resonance frequencies are carried in angular units
(rad/s) internally; configuration files use ordinary frequency (Hz).
"""

from dataclasses import dataclass

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
C_LIGHT = 299792458.0  # m/s
G_STANDARD = 9.80665  # m/s^2, used for every g-unit conversion


@dataclass(frozen=True)
class PsdConvention:
    """Documented constant set pinning the spectral convention."""

    sidedness: str = "one-sided"
    frequency_argument: str = "hz (omega = 2*pi*f substituted)"
    normalization: str = "integral of S(f) over f>=0 equals variance"
    g_standard_m_s2: float = G_STANDARD


PSD_CONVENTION = PsdConvention()
