"""Modified Butterworth-Van Dyke equivalent circuit and spectrum fitting.

Network topology: a series lead resistor Rs feeding the parallel
combination of the motional branch (Rm, Lm, Cm in series, the acoustic
mode) and the dielectric branch (R0, C0 in series).  The input admittance
is proportional to the current-induced magnetic Rabi field and the complex
voltage across Cm to the acoustic Rabi field, which is what ties the
circuit to the two measured spectra.

Component units follow the device scale: GHz, ohm, uH, fF, pF.  The
magnetic scaling A is in MHz/S and the acoustic scaling B in kHz/V with
the source voltage normalized to 1 V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import ConvergenceError, ValidationError

_TWO_PI = 2.0 * math.pi

#: JSON field names, in the canonical parameter order.
PARAM_JSON_KEYS = ("A_MHz_per_S", "B_kHz_per_V", "Rm_ohm", "Lm_uH",
                   "Cm_fF", "R0_ohm", "C0_pF", "Rs_ohm")

#: Direction in log-parameter space along which every model observable is
#: exactly invariant: scaling all impedances (and A with them) by a common
#: factor while dividing the capacitances by it changes neither Rabi-field
#: curve.  Fits therefore determine the parameter vector only up to this
#: gauge, which is the dominant entry of the reported covariance.
IMPEDANCE_SCALE_GAUGE = np.array([1.0, 0.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class MbvdParams:
    """Eight-parameter equivalent circuit, all entries positive."""

    a_mhz_per_s: float
    b_khz_per_v: float
    rm_ohm: float
    lm_uh: float
    cm_ff: float
    r0_ohm: float
    c0_pf: float
    rs_ohm: float

    def __post_init__(self):
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{f.name} must be positive and finite")

    @property
    def resonance_ghz(self) -> float:
        """Mechanical resonance 1/(2*pi*sqrt(Lm*Cm))."""
        lc = self.lm_uh * 1e-6 * self.cm_ff * 1e-15
        return 1.0 / (_TWO_PI * math.sqrt(lc)) / 1e9

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in dataclass_fields(self)])

    @classmethod
    def from_array(cls, values) -> "MbvdParams":
        return cls(*[float(v) for v in values])

    def to_dict(self) -> dict:
        return dict(zip(PARAM_JSON_KEYS, self.as_array().tolist()))

    @classmethod
    def from_dict(cls, data: dict) -> "MbvdParams":
        missing = [k for k in PARAM_JSON_KEYS if k not in data]
        if missing:
            raise ValidationError(f"missing circuit parameters: {missing}")
        return cls.from_array([data[k] for k in PARAM_JSON_KEYS])


@dataclass(frozen=True)
class ComplexSpectrum:
    """Rabi field versus drive frequency: amplitude and optional phase."""

    freq_ghz: np.ndarray
    amplitude_mhz: np.ndarray
    phase_rad: np.ndarray | None = None

    def __post_init__(self):
        freq = np.asarray(self.freq_ghz, dtype=float)
        amp = np.asarray(self.amplitude_mhz, dtype=float)
        if freq.ndim != 1 or freq.shape != amp.shape:
            raise ValidationError("frequency and amplitude must be equal-length 1d arrays")
        if freq.size > 1 and not np.all(np.diff(freq) > 0):
            raise ValidationError("frequency axis must be strictly increasing")
        if np.any(amp < 0):
            raise ValidationError("amplitudes must be non-negative")
        object.__setattr__(self, "freq_ghz", freq)
        object.__setattr__(self, "amplitude_mhz", amp)
        if self.phase_rad is not None:
            phase = np.asarray(self.phase_rad, dtype=float)
            if phase.shape != freq.shape:
                raise ValidationError("phase array length mismatch")
            object.__setattr__(self, "phase_rad", phase)

    def masked(self, f_min_ghz: float, f_max_ghz: float) -> "ComplexSpectrum":
        keep = (self.freq_ghz >= f_min_ghz) & (self.freq_ghz <= f_max_ghz)
        phase = self.phase_rad[keep] if self.phase_rad is not None else None
        return ComplexSpectrum(self.freq_ghz[keep], self.amplitude_mhz[keep], phase)


def _branch_impedances(params: MbvdParams, f_ghz):
    f = np.asarray(f_ghz, dtype=float)
    if np.any(f <= 0):
        raise ValidationError("frequency must be positive")
    w = _TWO_PI * f * 1e9
    zm = params.rm_ohm + 1j * (w * params.lm_uh * 1e-6
                               - 1.0 / (w * params.cm_ff * 1e-15))
    z0 = params.r0_ohm - 1j / (w * params.c0_pf * 1e-12)
    return w, zm, z0


def admittance(params: MbvdParams, f_ghz):
    """Complex input admittance (siemens) of the network at ``f_ghz``.

    Accepts scalars or arrays and broadcasts over frequency.
    """
    _, zm, z0 = _branch_impedances(params, f_ghz)
    z_parallel = zm * z0 / (zm + z0)
    return 1.0 / (params.rs_ohm + z_parallel)


def motional_voltage(params: MbvdParams, f_ghz, v_source: float = 1.0):
    """Complex voltage (volts) across the motional capacitor Cm.

    The source is referenced at the network input, ahead of Rs.  The
    magnitude peaks at the mechanical resonance and the phase sweeps by
    about 180 degrees across it.
    """
    w, zm, z0 = _branch_impedances(params, f_ghz)
    z_parallel = zm * z0 / (zm + z0)
    v_par = v_source * z_parallel / (params.rs_ohm + z_parallel)
    z_cm = -1j / (w * params.cm_ff * 1e-15)
    return v_par * z_cm / zm


def model_rabi_fields(params: MbvdParams, f_ghz):
    """Complex magnetic and acoustic Rabi phasors (MHz) predicted by the circuit.

    Returns ``(A*Y(f), 1e-3*B*V(f))`` so both carry the model's amplitude
    and phase information.
    """
    y = admittance(params, f_ghz)
    v = motional_voltage(params, f_ghz)
    return params.a_mhz_per_s * y, params.b_khz_per_v * 1e-3 * v


@dataclass(frozen=True)
class DerivedQuantities:
    f_r_ghz: float
    f_a_ghz: float
    q: float


def derived_quantities(params: MbvdParams,
                       f_max_ghz: float | None = None) -> DerivedQuantities:
    """Resonance, anti-resonance and quality factor of the circuit.

    f_r comes from the closed form, Q from 2*pi*f_r*Lm/Rm, and f_a is
    located numerically as the admittance-magnitude minimum above f_r.
    """
    f_r = params.resonance_ghz
    q = _TWO_PI * f_r * 1e9 * params.lm_uh * 1e-6 / params.rm_ohm
    # undamped anti-resonance estimate bounds the search window
    ratio = params.cm_ff / (params.c0_pf * 1e3)
    f_a_estimate = f_r * math.sqrt(1.0 + ratio)
    hi = f_max_ghz if f_max_ghz is not None else f_r + 3.0 * (f_a_estimate - f_r)
    lo = f_r * (1.0 + 1e-9)
    if hi <= lo:
        raise ConvergenceError("anti-resonance search window is empty")
    grid = np.linspace(lo, hi, 2001)
    mags = np.abs(admittance(params, grid))
    i_min = int(np.argmin(mags))
    if i_min in (0, grid.size - 1):
        raise ConvergenceError(
            "no admittance minimum found above the resonance; "
            "the anti-resonance may lie outside the window")
    result = minimize_scalar(lambda f: float(np.abs(admittance(params, f))),
                             bounds=(grid[i_min - 1], grid[i_min + 1]),
                             method="bounded")
    return DerivedQuantities(f_r_ghz=f_r, f_a_ghz=float(result.x), q=q)


@dataclass(frozen=True)
class MbvdFit:
    """Result of a joint fit of the magnetic and acoustic spectra."""

    params: MbvdParams
    covariance: np.ndarray
    residuals_magnetic_mhz: np.ndarray
    residuals_acoustic_mhz: np.ndarray
    rel_residual: float
    cost: float
    jacobian_rank: int
    condition: float
    degenerate: bool
    n_starts: int


def _model_amplitudes(theta_log: np.ndarray, f_b: np.ndarray,
                      f_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    params = MbvdParams.from_array(np.exp(theta_log))
    omega_b = params.a_mhz_per_s * np.abs(admittance(params, f_b))
    omega_s = params.b_khz_per_v * 1e-3 * np.abs(motional_voltage(params, f_s))
    return omega_b, omega_s


def _auto_starts(spec_b: ComplexSpectrum, spec_sigma: ComplexSpectrum,
                 n_starts: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(np.random.PCG64(seed))
    amp_s = spec_sigma.amplitude_mhz
    freq_s = spec_sigma.freq_ghz
    f_r0 = float(freq_s[np.argmax(amp_s)])
    fwhm = _half_max_width(freq_s, amp_s)
    if fwhm is None or fwhm <= 0:
        fwhm = (freq_s[-1] - freq_s[0]) / 10.0
    q0 = float(np.clip(f_r0 / fwhm, 50.0, 5e4))

    starts = []
    for k in range(n_starts):
        if k == 0:
            cm, c0, r0, rs = 0.2, 0.2, 50.0, 100.0
        else:
            cm = 10 ** rng.uniform(-1.5, 0.5)      # fF
            c0 = 10 ** rng.uniform(-1.5, 0.5)      # pF
            r0 = 10 ** rng.uniform(0.7, 2.7)       # ohm
            rs = 10 ** rng.uniform(0.7, 3.3)       # ohm
        w_r = _TWO_PI * f_r0 * 1e9
        lm = 1.0 / (w_r ** 2 * cm * 1e-15) / 1e-6  # uH
        rm = w_r * lm * 1e-6 / q0
        trial = MbvdParams(1.0, 1.0, rm, lm, cm, r0, c0, rs)
        y_peak = float(np.max(np.abs(admittance(trial, spec_b.freq_ghz))))
        v_peak = float(np.max(np.abs(motional_voltage(trial, freq_s))))
        a0 = max(np.max(spec_b.amplitude_mhz) / y_peak, 1e-12)
        b0 = max(np.max(amp_s) / (v_peak * 1e-3), 1e-12)
        starts.append(np.log([a0, b0, rm, lm, cm, r0, c0, rs]))
    return starts


def _half_max_width(freq: np.ndarray, amp: np.ndarray) -> float | None:
    peak = float(np.max(amp))
    base = float(np.min(amp))
    half = base + 0.5 * (peak - base)
    above = amp >= half
    if not np.any(above):
        return None
    idx = np.flatnonzero(above)
    return float(freq[idx[-1]] - freq[idx[0]])


def fit(spec_b: ComplexSpectrum, spec_sigma: ComplexSpectrum,
        init: MbvdParams | None = None, n_starts: int = 8, seed: int = 0,
        max_nfev: int = 2000, rel_residual_limit: float = 0.30) -> MbvdFit:
    """Jointly fit the circuit to the two amplitude spectra.

    Both observables share one parameter set, so the squared residuals of
    ``A*|Y|`` against the magnetic spectrum and ``B*|V|`` against the
    acoustic spectrum are minimized together with a bounded trust-region
    solver over log-parameters.  Without ``init``, eight heuristic starts
    seeded from the acoustic peak are tried and the best retained.

    The parameter vector is identifiable only up to the exact
    :data:`IMPEDANCE_SCALE_GAUGE` direction (and further correlations at
    finite noise); the returned covariance makes this visible.  The model
    curves themselves are well determined.

    Raises :class:`ConvergenceError` when no start converges or the best
    relative residual norm exceeds ``rel_residual_limit``.
    """
    if spec_b.freq_ghz.size < 20 or spec_sigma.freq_ghz.size < 20:
        raise ValidationError("need at least 20 samples per spectrum")
    lo = max(spec_b.freq_ghz[0], spec_sigma.freq_ghz[0])
    hi = min(spec_b.freq_ghz[-1], spec_sigma.freq_ghz[-1])
    if hi <= lo:
        raise ValidationError("spectra do not share a frequency window")

    f_b, y_b = spec_b.freq_ghz, spec_b.amplitude_mhz
    f_s, y_s = spec_sigma.freq_ghz, spec_sigma.amplitude_mhz
    scale_b = float(np.max(y_b)) or 1.0
    scale_s = float(np.max(y_s)) or 1.0

    def residual(theta_log):
        model_b, model_s = _model_amplitudes(theta_log, f_b, f_s)
        return np.concatenate([(model_b - y_b) / scale_b,
                               (model_s - y_s) / scale_s])

    if init is not None:
        start = init.as_array()
        # a start whose resonance misses the data window leaves the
        # optimizer on a gradient plateau; re-pin Lm to the observed peak
        if not f_s[0] <= init.resonance_ghz <= f_s[-1]:
            f_peak = float(f_s[np.argmax(y_s)])
            start = start.copy()
            start[3] = 1.0 / ((_TWO_PI * f_peak * 1e9) ** 2
                              * start[4] * 1e-15) / 1e-6
        starts = [np.log(start)]
    else:
        starts = _auto_starts(spec_b, spec_sigma, n_starts, seed)

    best = None
    for theta0 in starts:
        try:
            result = least_squares(residual, theta0, method="trf",
                                   bounds=(theta0 - 25.0, theta0 + 25.0),
                                   x_scale="jac", max_nfev=max_nfev)
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(result.x)):
            continue
        if best is None or result.cost < best.cost:
            best = result
    if best is None:
        raise ConvergenceError("all fit starts failed")

    params = MbvdParams.from_array(np.exp(best.x))
    model_b, model_s = _model_amplitudes(best.x, f_b, f_s)
    data_norm = math.sqrt(float(np.sum(y_b ** 2) + np.sum(y_s ** 2)))
    diff_norm = math.sqrt(float(np.sum((model_b - y_b) ** 2)
                                + np.sum((model_s - y_s) ** 2)))
    rel_residual = diff_norm / data_norm if data_norm > 0 else math.inf
    if rel_residual > rel_residual_limit:
        raise ConvergenceError(
            f"fit rejected: relative residual norm {rel_residual:.1%} exceeds "
            f"{rel_residual_limit:.0%}")

    jac = best.jac
    singular = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(singular > singular[0] * 1e-12)) if singular[0] > 0 else 0
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else math.inf
    dof = max(jac.shape[0] - jac.shape[1], 1)
    sigma2 = 2.0 * best.cost / dof
    cov_log = sigma2 * np.linalg.pinv(jac.T @ jac, rcond=1e-15)
    p = params.as_array()
    covariance = cov_log * np.outer(p, p)

    return MbvdFit(
        params=params,
        covariance=covariance,
        residuals_magnetic_mhz=model_b - y_b,
        residuals_acoustic_mhz=model_s - y_s,
        rel_residual=rel_residual,
        cost=float(best.cost),
        jacobian_rank=rank,
        condition=condition,
        degenerate=rank < jac.shape[1],
        n_starts=len(starts),
    )
