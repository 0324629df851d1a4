"""Simulation and analysis toolkit for a lens-free optically read,
diamagnetically levitated microsphere accelerometer."""

__version__ = "0.1.0"

from .constants import G_STANDARD, HBAR, K_B, PSD_CONVENTION
from .dynamics import (
    JitterModel,
    LinearChannel,
    NonlinearChannel,
    SimulationPlan,
    TimeSeriesRecord,
    detector_voltage,
    oscillator_step,
    simulate,
)
from .model_core import (
    NoiseBudget,
    OscillatorParams,
    SphereParams,
    acc_measurement_noise_psd,
    sql_acc_noise,
    susceptibility_sq,
    theoretical_effective_temperature,
    thermal_force_psd,
)
from .optics import (
    GaussianBeamState,
    OpticalTrain,
    TransmissionSample,
    backaction_psd,
    ball_lens_matrix,
    beam_through_system,
    coupling_efficiency,
    imprecision_psd,
    optimize_detection,
    transmission,
)
from .sensing import (
    AminCurve,
    SensitivityReport,
    acceleration_sensitivity,
    amin_demodulate,
    amin_predict,
    amin_predict_curve,
)
from .spectral import (
    LorentzFit,
    SpectrumEstimate,
    calibrate_conversion,
    effective_temperature_estimate,
    lorentzian_fit,
    welch_psd,
)
