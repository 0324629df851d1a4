"""Paraxial Gaussian-beam model of the fiber / ball-lens / fiber readout.

The microsphere acts as a thick spherical lens between two single-mode
fibers.  The transmitted power fraction depends on the sphere's lateral
position, which is what the accelerometer reads out.  Everything here is
paraxial: ABCD matrices for the complex beam parameter, an augmented
(offset, tilt) ray for the beam centroid when the sphere sits off axis,
and closed-form Gaussian mode overlaps for the fiber coupling.

Shot noise enters twice: as imprecision (power fluctuations divided by
the power-displacement responsivity) and as back-action (randomness of
the per-photon transverse momentum kick the sphere receives).  The kick
model evaluates the paraxial deflection ``dtheta = C (x - dx) + (D-1) theta``
over the beam's ray distribution at the sphere entrance plane, so the
mean kick vanishes at the symmetric point while the RMS stays finite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import C_LIGHT, HBAR
from .model_core import OscillatorParams, SphereParams


class BlindDetectionPointError(ValueError):
    """Responsivity vanished: the detection point carries no signal."""


@dataclass(frozen=True)
class OpticalTrain:
    """Readout geometry: source fiber -> sphere -> detection fiber.

    Distances ``d_in`` / ``d_out`` run from each fiber tip to the sphere
    center.  ``x_fib`` is the lateral offset of the detection fiber.
    """

    sphere: SphereParams
    wavelength_m: float = 1.55e-6
    fiber_mode_field_radius_m: float = 5.2e-6
    d_in_m: float = 1.0e-3
    d_out_m: float = 1.0e-3
    x_fib_m: float = 0.0
    p_in_w: float = 1.0e-6
    detector_qe: float = 1.0

    def __post_init__(self):
        if self.wavelength_m <= 0 or self.fiber_mode_field_radius_m <= 0:
            raise ValueError("wavelength and mode field radius must be positive")
        if self.d_in_m < self.sphere.radius_m or self.d_out_m < self.sphere.radius_m:
            raise ValueError("fiber tips must sit outside the sphere")
        if not 0.0 < self.detector_qe <= 1.0:
            raise ValueError("detector_qe must lie in (0, 1]")
        if self.p_in_w < 0:
            raise ValueError("incident power must be nonnegative")

    @property
    def laser_omega(self) -> float:
        return 2.0 * math.pi * C_LIGHT / self.wavelength_m


@dataclass(frozen=True)
class GaussianBeamState:
    """Beam at the detection-fiber plane.

    ``waist_position`` is the axial coordinate of the waist measured from
    the detection plane along propagation (negative: waist lies before
    the plane).  Centroid fields may be arrays when evaluated for a batch
    of sphere displacements.
    """

    waist_radius: float
    waist_position: float
    centroid_offset: float | np.ndarray
    centroid_tilt: float | np.ndarray

    def q_for(self, wavelength_m: float) -> complex:
        """Complex beam parameter q at the detection plane."""
        zr = math.pi * self.waist_radius**2 / wavelength_m
        return complex(-self.waist_position, zr)


@dataclass(frozen=True)
class TransmissionSample:
    """Transmission coefficient and responsivity at one operating point."""

    x_fib_m: float
    dx_m: float
    t_coeff: float
    responsivity_per_m: float


@dataclass(frozen=True)
class BallLensMatrix:
    """Paraxial ray-transfer description of the sphere as a thick lens."""

    abcd: np.ndarray
    focal_length_m: float
    back_focal_distance_m: float
    principal_plane_from_entrance_m: float
    degenerate: bool = False


def ball_lens_matrix(n: float, radius_m: float) -> BallLensMatrix:
    """Entrance-surface to exit-surface matrix of a full ball lens.

    Product of refraction at the front surface, internal propagation over
    2R at index n, and refraction at the rear surface.  Both principal
    planes coincide at the sphere center; the effective focal length from
    the center is f = n R / (2 (n - 1)).
    """
    if radius_m <= 0:
        raise ValueError("radius must be positive")
    if n < 1:
        raise ValueError("refractive index below 1 is unsupported")
    surf1 = np.array([[1.0, 0.0], [(1.0 - n) / (n * radius_m), 1.0 / n]])
    inside = np.array([[1.0, 2.0 * radius_m], [0.0, 1.0]])
    surf2 = np.array([[1.0, 0.0], [-(n - 1.0) / radius_m, n]])
    m = surf2 @ inside @ surf1
    if n == 1.0:
        return BallLensMatrix(
            abcd=m,
            focal_length_m=math.inf,
            back_focal_distance_m=math.inf,
            principal_plane_from_entrance_m=radius_m,
            degenerate=True,
        )
    f = n * radius_m / (2.0 * (n - 1.0))
    return BallLensMatrix(
        abcd=m,
        focal_length_m=f,
        back_focal_distance_m=f - radius_m,
        principal_plane_from_entrance_m=radius_m,
    )


def _free(d: float) -> np.ndarray:
    return np.array([[1.0, d], [0.0, 1.0]])


def _system_matrix(train: OpticalTrain) -> tuple[np.ndarray, BallLensMatrix, float, float]:
    """(full matrix source-tip -> detection-tip, ball matrix, L_in, L_out)."""
    r = train.sphere.radius_m
    ball = ball_lens_matrix(train.sphere.refractive_index, r)
    l_in = train.d_in_m - r
    l_out = train.d_out_m - r
    full = _free(l_out) @ ball.abcd @ _free(l_in)
    return full, ball, l_in, l_out


def beam_through_system(train: OpticalTrain, dx) -> GaussianBeamState:
    """Propagate the source-fiber mode to the detection plane.

    The sphere displaced laterally by ``dx`` is modeled by shifting into
    the sphere frame, applying the centered ball matrix, and shifting
    back; only the beam centroid picks up the displacement (the complex
    beam parameter is displacement independent in the paraxial limit).
    ``dx`` may be an array.
    """
    dx = np.asarray(dx, dtype=float)
    full, ball, _, l_out = _system_matrix(train)
    a, b = full[0]
    c, d = full[1]
    wl = train.wavelength_m
    q0 = 1j * math.pi * train.fiber_mode_field_radius_m**2 / wl
    q_det = (a * q0 + b) / (c * q0 + d)
    zr = q_det.imag
    waist_radius = math.sqrt(wl * zr / math.pi)
    waist_position = -q_det.real

    ab, bb = ball.abcd[0]
    cb, db = ball.abcd[1]
    # offset ray exiting the displaced ball for an on-axis input ray
    off_ball = dx * (1.0 - ab)
    tilt_ball = -cb * dx
    offset = off_ball + l_out * tilt_ball
    tilt = tilt_ball
    if offset.ndim == 0:
        offset, tilt = float(offset), float(tilt)
    return GaussianBeamState(
        waist_radius=waist_radius,
        waist_position=waist_position,
        centroid_offset=offset,
        centroid_tilt=tilt,
    )


def _overlap_power_1d(g1: complex, g2: float, a, b, tilt, k: float):
    """|integral u1 u2*|^2 for normalized 1-D Gaussian modes.

    u1 has inverse-q parameter g1 = 2/w1^2 + i k / R1, centroid ``a`` and
    tilt ``tilt``; u2 is the (real, waist-at-plane) fiber mode g2 = 2/w2^2
    centered at ``b``.
    """
    p = 0.5 * (g1 + g2)
    s = g1 * a + g2 * b + 1j * k * tilt
    amp = math.sqrt(g1.real * g2) / abs(p)
    expo = s * s / (4.0 * p) - 0.5 * (g1 * a * a + g2 * b * b) - 1j * k * tilt * a
    return amp * np.exp(2.0 * np.real(expo))


def coupling_efficiency(beam: GaussianBeamState, train: OpticalTrain):
    """Power transmission into the detection-fiber mode.

    Closed-form overlap of the arriving beam with a fundamental Gaussian
    of radius ``fiber_mode_field_radius_m`` (waist at the tip) displaced
    laterally by ``x_fib_m``.  Separable in x and y: the y factor carries
    the pure mode mismatch, the x factor adds lateral offset and tilt.
    """
    wl = train.wavelength_m
    k = 2.0 * math.pi / wl
    q = beam.q_for(wl)
    g1 = 1j * k / q
    g2 = 2.0 / train.fiber_mode_field_radius_m**2
    t_y = _overlap_power_1d(g1, g2, 0.0, 0.0, 0.0, k)
    t_x = _overlap_power_1d(
        g1, g2, beam.centroid_offset, train.x_fib_m, beam.centroid_tilt, k
    )
    t = t_x * t_y
    return float(t) if np.ndim(t) == 0 else t


_FD_STEP = 1.0e-9  # m; sits below the few-nm thermal RMS of the sphere


def transmission(train: OpticalTrain, x_fib_m: float | None = None, dx_m: float = 0.0) -> TransmissionSample:
    """Transmission coefficient and its displacement responsivity.

    Responsivity d(T)/d(dx) uses a central difference with one Richardson
    extrapolation level (steps h and h/2).
    """
    if x_fib_m is None:
        x_fib_m = train.x_fib_m
    tr = train if x_fib_m == train.x_fib_m else replace(train, x_fib_m=x_fib_m)
    h = _FD_STEP
    pts = np.array([dx_m, dx_m + h, dx_m - h, dx_m + h / 2, dx_m - h / 2])
    t = coupling_efficiency(beam_through_system(tr, pts), tr)
    d_h = (t[1] - t[2]) / (2.0 * h)
    d_h2 = (t[3] - t[4]) / h
    deriv = (4.0 * d_h2 - d_h) / 3.0
    return TransmissionSample(
        x_fib_m=x_fib_m, dx_m=dx_m, t_coeff=float(t[0]), responsivity_per_m=float(deriv)
    )


def transmission_curve(train: OpticalTrain, x_fib_m, dx_m=0.0):
    """Vectorized T over arrays of fiber offsets and displacements."""
    x_fib_m = np.asarray(x_fib_m, dtype=float)
    dx_m = np.asarray(dx_m, dtype=float)
    beam = beam_through_system(train, dx_m)
    wl = train.wavelength_m
    k = 2.0 * math.pi / wl
    g1 = 1j * k / beam.q_for(wl)
    g2 = 2.0 / train.fiber_mode_field_radius_m**2
    t_y = _overlap_power_1d(g1, g2, 0.0, 0.0, 0.0, k)
    t_x = _overlap_power_1d(g1, g2, beam.centroid_offset, x_fib_m, beam.centroid_tilt, k)
    return t_x * t_y


def imprecision_psd(train: OpticalTrain, sample: TransmissionSample) -> float:
    """Shot-noise displacement imprecision S_xx_imp [m^2/Hz].

    Detected-power shot noise 2 hbar omega_L T P_in / qe divided by the
    squared power responsivity (P_in dT/dx)^2.
    """
    if sample.responsivity_per_m == 0.0:
        raise BlindDetectionPointError(
            "zero responsivity at this detection point (infinite imprecision)"
        )
    if train.p_in_w == 0.0:
        raise BlindDetectionPointError("zero incident power")
    num = 2.0 * HBAR * train.laser_omega * sample.t_coeff * train.p_in_w
    den = train.detector_qe * (train.p_in_w * sample.responsivity_per_m) ** 2
    if den == 0.0:
        raise BlindDetectionPointError(
            "responsivity underflow at this detection point"
        )
    return num / den


def _input_ray_covariance(train: OpticalTrain) -> tuple[float, float, float]:
    """( var_x, var_theta, cov ) of the beam rays at the sphere entrance."""
    k = 2.0 * math.pi / train.wavelength_m
    wf = train.fiber_mode_field_radius_m
    var_x0 = (wf / 2.0) ** 2
    var_t0 = 1.0 / (k * wf) ** 2
    l_in = train.d_in_m - train.sphere.radius_m
    var_x = var_x0 + l_in**2 * var_t0
    cov = l_in * var_t0
    return var_x, var_t0, cov


def photon_kick_rms(train: OpticalTrain, dx_m: float = 0.0) -> float:
    """RMS per-photon transverse momentum transfer, in units of hbar k_L.

    Deflection of a paraxial ray by the displaced ball lens is
    dtheta = C (x - dx) + (D - 1) theta; the RMS combines the mean
    centroid deflection with the spread over the beam's ray distribution.
    """
    _, ball, _, _ = _system_matrix(train)
    cb = ball.abcd[1, 0]
    db = ball.abcd[1, 1]
    var_x, var_t, cov = _input_ray_covariance(train)
    mean = -cb * dx_m
    var = cb**2 * var_x + (db - 1.0) ** 2 * var_t + 2.0 * cb * (db - 1.0) * cov
    return math.sqrt(mean**2 + var)


def backaction_psd(train: OpticalTrain, dx_m: float = 0.0) -> float:
    """Back-action force PSD S_FF_ba = 2 hbar omega_L P_in kappa^2 / c^2.

    kappa is the RMS per-photon transverse momentum transfer in units of
    hbar k_L (see :func:`photon_kick_rms`); arrivals are Poissonian, so
    the force noise is white.
    """
    kappa = photon_kick_rms(train, dx_m)
    return 2.0 * HBAR * train.laser_omega * train.p_in_w * kappa**2 / C_LIGHT**2


@dataclass(frozen=True)
class DetectionOptimum:
    """Result of the nested (x_fib, P_in) measurement-noise optimization."""

    x_fib_m: float
    p_in_w: float
    sqrt_saa_mea: float  # (m/s^2)/sqrt(Hz) at resonance
    eta: float
    boundary_hit: bool
    sweep_x_fib_m: np.ndarray = field(repr=False, default=None)
    sweep_sqrt_saa: np.ndarray = field(repr=False, default=None)
    sweep_p_opt_w: np.ndarray = field(repr=False, default=None)


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    it = 0
    while abs(b - a) > tol and it < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
        it += 1
    x = (a + b) / 2.0
    return x, fun(x)


def optimize_detection(
    train: OpticalTrain,
    osc: OscillatorParams,
    x_fib_grid=None,
    p_bounds_w: tuple[float, float] = (1e-12, 1e-1),
):
    """Minimize sqrt(S_aa_mea(omega0)) over fiber offset and laser power.

    For each grid offset the power is optimized by golden section on
    log10(P); the returned optimum carries the full sweep (the data behind
    the noise-versus-offset and optimal-power curves).  Symmetric optima
    at +-x_fib tie-break toward the positive side.
    """
    if x_fib_grid is None:
        beam0 = beam_through_system(train, 0.0)
        w_det = beam0.waist_radius * math.sqrt(
            1.0 + (beam0.waist_position / (math.pi * beam0.waist_radius**2 / train.wavelength_m)) ** 2
        )
        x_fib_grid = np.linspace(-3.0 * w_det, 3.0 * w_det, 121)
    x_fib_grid = np.asarray(x_fib_grid, dtype=float)

    proj = math.cos(osc.mode_angle)
    gw = osc.gamma * osc.omega0
    m = osc.mass_kg
    log_lo, log_hi = math.log10(p_bounds_w[0]), math.log10(p_bounds_w[1])

    sweep_noise = np.full(x_fib_grid.shape, np.inf)
    sweep_p = np.full(x_fib_grid.shape, np.nan)
    kappa0 = photon_kick_rms(train, 0.0)
    b_coef = 2.0 * HBAR * train.laser_omega * kappa0**2 / C_LIGHT**2  # S_ba / P_in

    for i, xf in enumerate(x_fib_grid):
        sample = transmission(train, xf, 0.0)
        resp = sample.responsivity_per_m * proj
        if resp == 0.0:
            continue
        # S_imp = a_coef / P_in
        a_coef = (
            2.0 * HBAR * train.laser_omega * sample.t_coeff
            / (train.detector_qe * resp**2)
        )

        def saa(logp):
            p = 10.0**logp
            return a_coef / p * gw**2 + b_coef * p / m**2

        logp_opt, val = _golden_min(saa, log_lo, log_hi)
        sweep_noise[i] = math.sqrt(val)
        sweep_p[i] = 10.0**logp_opt

    i_best = int(np.argmin(sweep_noise))
    # mirror-symmetric tie: prefer the positive offset
    mirrored = np.isclose(x_fib_grid, -x_fib_grid[i_best], rtol=0, atol=1e-15)
    if x_fib_grid[i_best] < 0 and mirrored.any():
        j = int(np.argmax(mirrored))
        if np.isclose(sweep_noise[j], sweep_noise[i_best], rtol=1e-9):
            i_best = j

    p_best = float(sweep_p[i_best])
    if math.isnan(p_best):
        raise BlindDetectionPointError("no responsive detection point on the grid")
    boundary = bool(
        abs(math.log10(p_best) - log_lo) < 1e-6
        or abs(math.log10(p_best) - log_hi) < 1e-6
    )
    if boundary:
        warnings.warn("power optimum hit the search boundary", RuntimeWarning)

    sample = transmission(train, float(x_fib_grid[i_best]), 0.0)
    tr_best = replace(train, x_fib_m=float(x_fib_grid[i_best]), p_in_w=float(p_best))
    proj_sample = TransmissionSample(
        sample.x_fib_m, sample.dx_m, sample.t_coeff, sample.responsivity_per_m * proj
    )
    s_imp = imprecision_psd(tr_best, proj_sample)
    s_ba = backaction_psd(tr_best, 0.0)
    eta = HBAR**2 / (s_imp * s_ba)
    return DetectionOptimum(
        x_fib_m=float(x_fib_grid[i_best]),
        p_in_w=float(p_best),
        sqrt_saa_mea=float(sweep_noise[i_best]),
        eta=float(eta),
        boundary_hit=boundary,
        sweep_x_fib_m=x_fib_grid,
        sweep_sqrt_saa=sweep_noise,
        sweep_p_opt_w=sweep_p,
    )


def sweep_radius(
    osc_template: OscillatorParams,
    train_template: OpticalTrain,
    radii_m,
    geometry_scale: float = 4.0,
):
    """Minimum measurement noise versus sphere radius.

    The fiber-to-center distances scale with the sphere
    (``d_in = d_out = geometry_scale * R``) so the sweep compares
    self-similar readouts rather than one fixed bench; sphere mass scales
    with R^3 at fixed density.  Returns (radii, sqrt_saa_mea, p_opt).
    """
    radii_m = np.asarray(radii_m, dtype=float)
    noise = np.empty_like(radii_m)
    p_opt = np.empty_like(radii_m)
    for i, r in enumerate(radii_m):
        sph = replace(osc_template.sphere, radius_m=float(r))
        osc = replace(osc_template, sphere=sph)
        train = replace(
            train_template,
            sphere=sph,
            d_in_m=geometry_scale * float(r),
            d_out_m=geometry_scale * float(r),
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            opt = optimize_detection(train, osc)
        noise[i] = opt.sqrt_saa_mea
        p_opt[i] = opt.p_in_w
    return radii_m, noise, p_opt
