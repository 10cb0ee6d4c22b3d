"""Rabi spectrogram assembly, Fourier analysis and spectroscopy extraction.

A spectrogram is the m_s = 0 population (or normalized photoluminescence)
versus pulse duration tau (rows) and drive frequency f (columns).  The
simulator drives each member of a small ensemble placed between an
anti-node and a node of the acoustic standing wave, always on resonance
with the selected single-quantum transition, and averages the resulting
time traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from . import lindblad, spin
from .circuit import ComplexSpectrum, MbvdParams, model_rabi_fields
from .errors import ConvergenceError, ValidationError
from .util import parallel_map


@dataclass(frozen=True)
class EnsembleSpec:
    """Positions of the simulated defects along the standing wave.

    By default ``n_nv`` sites are spaced evenly from the anti-node (z = 0)
    to the node (z = lambda/4), endpoints included.  ``positions_um``
    overrides the placement.
    """

    wavelength_um: float
    n_nv: int = 6
    positions_um: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.wavelength_um <= 0:
            raise ValidationError("wavelength must be positive")
        if self.n_nv < 1:
            raise ValidationError("ensemble needs at least one defect")
        if self.positions_um is not None:
            quarter = self.wavelength_um / 4.0
            positions = tuple(float(z) for z in self.positions_um)
            if any(z < 0 or z > quarter + 1e-12 for z in positions):
                raise ValidationError("positions must lie in [0, lambda/4]")
            object.__setattr__(self, "positions_um", positions)
            object.__setattr__(self, "n_nv", len(positions))

    @property
    def positions(self) -> np.ndarray:
        if self.positions_um is not None:
            return np.array(self.positions_um)
        if self.n_nv == 1:
            return np.array([0.0])
        return np.linspace(0.0, self.wavelength_um / 4.0, self.n_nv)


@dataclass(frozen=True)
class RabiSpectrogram:
    """2d spin-population signal: pulse duration (rows) x drive frequency (columns)."""

    tau_us: np.ndarray
    freq_ghz: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau_us, dtype=float)
        freq = np.asarray(self.freq_ghz, dtype=float)
        sig = np.asarray(self.signal, dtype=float)
        if sig.shape != (tau.size, freq.size):
            raise ValidationError(
                f"signal shape {sig.shape} != (n_tau={tau.size}, n_freq={freq.size})")
        object.__setattr__(self, "tau_us", tau)
        object.__setattr__(self, "freq_ghz", freq)
        object.__setattr__(self, "signal", sig)


@dataclass(frozen=True)
class FourierMap:
    """Per-column magnitude spectrum: Rabi frequency (rows) x drive frequency."""

    rabi_mhz: np.ndarray
    freq_ghz: np.ndarray
    magnitude: np.ndarray


@dataclass(frozen=True)
class RabiEstimate:
    omega_mhz: float | None
    uncertainty_mhz: float | None
    method: str
    oscillating: bool
    note: str = ""


@dataclass(frozen=True)
class QFactorResult:
    q: float
    f_r_ghz: float
    fwhm_ghz: float


def _column_hamiltonians(args, dq_term):
    """Rotating-frame Hamiltonians (or callables) for one drive frequency."""
    (omega_b, omega_s2, z_positions, wavelength, ratios, e_plus, e_minus,
     f_ghz) = args
    members = []
    for z in z_positions:
        drive_plus = spin.compose_sq_rabi(omega_b, omega_s2, ratios, z,
                                          wavelength, +1)
        drive_minus = spin.compose_sq_rabi(omega_b, omega_s2, ratios, z,
                                           wavelength, -1)
        cos_kz = math.cos(2.0 * math.pi * z / wavelength)
        members.append(lindblad.rotating_frame_hamiltonian(
            e_plus, e_minus, abs(drive_plus), abs(drive_minus),
            abs(omega_s2 * cos_kz), f_ghz, dq_term=dq_term))
    return members


def _trace_columns(args):
    """Ensemble-averaged population traces for a chunk of columns."""
    column_args, dec, tau, dq_term = args
    n_z = len(column_args[0][2])
    if dq_term == "drop":
        hams = [h for col in column_args
                for h in _column_hamiltonians(col, dq_term)]
        try:
            populations = lindblad.evolve_many(
                lindblad.prepare_state("ground"), np.array(hams), dec, tau)
        except Exception as exc:
            raise ConvergenceError(
                f"evolution failed in columns starting at "
                f"f={column_args[0][7]:.6f} GHz: {exc}") from exc
        grouped = populations.reshape(tau.size, len(column_args), n_z)
        return list(grouped.mean(axis=2).T)
    traces = []
    rho0 = lindblad.prepare_state("ground")
    for col in column_args:
        acc = np.zeros(tau.size)
        for z, hamiltonian in zip(col[2], _column_hamiltonians(col, dq_term)):
            try:
                trace = lindblad.evolve(rho0, hamiltonian, dec, tau,
                                        method="rk4")
            except Exception as exc:
                raise ConvergenceError(
                    f"evolution failed at f={col[7]:.6f} GHz, "
                    f"z={z:.3f} um: {exc}") from exc
            acc += trace.population
        traces.append(acc / n_z)
    return traces


def simulate_spectrogram(circuit: MbvdParams, ratios: spin.CouplingRatios,
                         ensemble: EnsembleSpec, transition: str,
                         freq_ghz: np.ndarray, tau_us: np.ndarray,
                         dec: lindblad.DecoherenceParams | None = None,
                         constants: spin.SpinConstants = spin.DEFAULT_CONSTANTS,
                         dq_term: str = "drop",
                         n_workers: int = 1) -> RabiSpectrogram:
    """Simulate the dual-drive Rabi spectrogram for the ensemble.

    For every drive frequency the circuit model supplies the complex
    magnetic and acoustic Rabi phasors; at every defect position the local
    single-quantum drive is composed with the standing-wave factor
    cos(2*pi*z/lambda) and the density matrix evolved on resonance (the
    axial field is adjusted per column so the selected transition matches
    the drive).  Columns hold the ensemble-averaged m_s = 0 population.
    Fully deterministic: identical inputs give bit-identical output.
    """
    if transition not in ("plus", "minus"):
        raise ValidationError("transition must be 'plus' or 'minus'")
    freq = np.asarray(freq_ghz, dtype=float)
    tau = np.asarray(tau_us, dtype=float)
    if freq.size == 0 or tau.size == 0:
        raise ValidationError("frequency and tau grids must be non-empty")
    if dec is None:
        dec = lindblad.DecoherenceParams()

    positions = ensemble.positions
    columns = []
    for f in freq:
        omega_b, omega_s2 = model_rabi_fields(circuit, float(f))
        f_mhz = f * 1e3
        # on-resonance tracking: the axial field makes the driven
        # transition frequency equal to the drive at every column
        zeeman = f_mhz - constants.d_mhz if transition == "plus" \
            else constants.d_mhz - f_mhz
        e_plus = constants.d_mhz + zeeman
        e_minus = constants.d_mhz - zeeman
        columns.append((complex(omega_b), complex(omega_s2), positions,
                        ensemble.wavelength_um, ratios, e_plus, e_minus,
                        float(f)))

    n_chunks = 1 if n_workers <= 1 else min(4 * n_workers, len(columns))
    bounds = np.linspace(0, len(columns), n_chunks + 1).astype(int)
    chunks = [(columns[a:b], dec, tau, dq_term)
              for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    traces = [trace for chunk_traces in
              parallel_map(_trace_columns, chunks, n_workers)
              for trace in chunk_traces]
    signal = np.column_stack(traces)
    return RabiSpectrogram(tau_us=tau, freq_ghz=freq, signal=signal)


def fft_spectrum(spectrogram: RabiSpectrogram) -> FourierMap:
    """Column-wise magnitude FFT of a spectrogram.

    Each column is mean-subtracted before transforming and the DC bin is
    removed; no taper is applied.  Requires a uniform tau grid.
    """
    tau = spectrogram.tau_us
    if tau.size < 2:
        raise ValidationError("need at least two tau samples")
    steps = np.diff(tau)
    dt = steps[0]
    if np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ValidationError("tau grid must be uniform for the FFT")
    signal = spectrogram.signal - spectrogram.signal.mean(axis=0, keepdims=True)
    transformed = np.fft.rfft(signal, axis=0)
    rabi_mhz = np.fft.rfftfreq(tau.size, d=dt)[1:]
    return FourierMap(rabi_mhz=rabi_mhz, freq_ghz=spectrogram.freq_ghz,
                      magnitude=np.abs(transformed[1:]))


def resolvable_components(spectrogram: RabiSpectrogram, pad_factor: int = 4,
                          prominence: float = 0.10,
                          min_separation_mhz: float = 0.25) -> np.ndarray:
    """Number of resolvable Rabi components per spectrogram column.

    Columns are mean-subtracted, Hann-tapered (so rectangular-window
    sidelobes of slowly oscillating columns do not count as components)
    and transformed with ``pad_factor`` x zero-padding, which interpolates
    the spectrum without changing its true resolution.  Peaks count when
    they clear ``prominence`` of the column maximum and are at least
    ``min_separation_mhz`` apart.  The display-oriented
    :func:`fft_spectrum` stays untapered.
    """
    tau = spectrogram.tau_us
    dt = tau[1] - tau[0]
    centered = spectrogram.signal - spectrogram.signal.mean(axis=0, keepdims=True)
    centered = centered * np.hanning(tau.size)[:, None]
    n = tau.size * pad_factor
    magnitude = np.abs(np.fft.rfft(centered, n=n, axis=0))[1:]
    bins_apart = max(1, int(round(min_separation_mhz * n * dt)))
    counts = np.zeros(spectrogram.freq_ghz.size, dtype=int)
    for j in range(counts.size):
        column = magnitude[:, j]
        if column.max() <= 0:
            counts[j] = 0
            continue
        peaks, _ = find_peaks(column, prominence=prominence * column.max(),
                              distance=bins_apart)
        counts[j] = len(peaks)
    return counts


def _fft_peak(tau: np.ndarray, values: np.ndarray) -> RabiEstimate:
    dt = tau[1] - tau[0]
    centered = values - values.mean()
    magnitude = np.abs(np.fft.rfft(centered))[1:]
    freqs = np.fft.rfftfreq(tau.size, d=dt)[1:]
    df = freqs[1] - freqs[0] if freqs.size > 1 else freqs[0]
    if np.std(values) < 1e-12 or magnitude.max() <= 0:
        return RabiEstimate(None, None, "fft_peak", False, "flat trace")
    floor = np.median(magnitude)
    if magnitude.max() < 4.0 * floor:
        return RabiEstimate(None, None, "fft_peak", False,
                            "no peak above noise floor")
    i = int(np.argmax(magnitude))
    f_est = freqs[i]
    if 0 < i < magnitude.size - 1:
        y_m, y_0, y_p = magnitude[i - 1:i + 2]
        denominator = y_m - 2.0 * y_0 + y_p
        if denominator != 0:
            delta = 0.5 * (y_m - y_p) / denominator
            f_est = freqs[i] + float(np.clip(delta, -0.5, 0.5)) * df
    return RabiEstimate(float(f_est), float(df), "fft_peak", True)


def _damped_cos_fit(tau: np.ndarray, values: np.ndarray) -> RabiEstimate:
    seed = _fft_peak(tau, values)
    if not seed.oscillating:
        return RabiEstimate(None, None, "damped_cos_fit", False, seed.note)

    def model(t, offset, amp, f_mhz, phase, t_decay):
        return offset + amp * np.cos(2.0 * math.pi * f_mhz * t + phase) \
            * np.exp(-t / t_decay)

    span = tau[-1] - tau[0]
    p0 = [float(values.mean()), float(np.ptp(values)) / 2.0, seed.omega_mhz,
          0.0, span / 2.0]
    bounds = ([-np.inf, 0.0, 1e-6, -math.pi, 1e-3],
              [np.inf, np.inf, np.inf, math.pi, np.inf])
    try:
        popt, pcov = curve_fit(model, tau, values, p0=p0, bounds=bounds,
                               maxfev=5000)
    except (RuntimeError, ValueError):
        return RabiEstimate(seed.omega_mhz, seed.uncertainty_mhz,
                            "damped_cos_fit", True,
                            "fit did not converge; FFT estimate returned")
    residual_rms = float(np.sqrt(np.mean((model(tau, *popt) - values) ** 2)))
    note = ""
    if popt[1] > 0 and residual_rms > 0.2 * popt[1]:
        note = "poor fit: residual rms exceeds 20% of the amplitude"
    sigma = float(np.sqrt(pcov[2, 2])) if np.isfinite(pcov[2, 2]) else None
    return RabiEstimate(float(popt[2]), sigma, "damped_cos_fit", True, note)


def extract_rabi(trace: lindblad.TimeTrace | tuple[np.ndarray, np.ndarray],
                 method: str = "fft_peak") -> RabiEstimate:
    """Estimate the Rabi frequency of one time trace.

    ``fft_peak`` takes the largest Fourier component with quadratic
    interpolation around the peak bin; ``damped_cos_fit`` fits a decaying
    cosine.  A trace without a detectable oscillation yields an estimate
    flagged ``oscillating=False`` rather than a zero frequency.
    """
    if isinstance(trace, lindblad.TimeTrace):
        tau, values = trace.tau_us, trace.population
    else:
        tau = np.asarray(trace[0], dtype=float)
        values = np.asarray(trace[1], dtype=float)
    if tau.size < 8:
        raise ValidationError("need at least 8 samples to estimate a Rabi frequency")
    steps = np.diff(tau)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
        raise ValidationError("tau grid must be uniform")
    if method == "fft_peak":
        return _fft_peak(tau, values)
    if method == "damped_cos_fit":
        return _damped_cos_fit(tau, values)
    raise ValidationError(f"unknown method {method!r}")


def compute_beta(omega_lead_mhz: float, omega_resonator_mhz: float) -> float:
    """Lead-to-resonator magnetic-field scaling from off-resonance Rabi rates.

    Both inputs must be measured away from the mechanical resonance where
    the acoustic field is negligible.
    """
    if not np.isfinite(omega_lead_mhz) or omega_lead_mhz <= 0:
        raise ValidationError("lead-field Rabi frequency must be positive")
    if omega_lead_mhz < 1e-9 * max(1.0, abs(omega_resonator_mhz)):
        raise ValidationError("lead-field Rabi frequency is too close to zero")
    return omega_resonator_mhz / omega_lead_mhz


def q_from_linewidth(spec: ComplexSpectrum) -> QFactorResult:
    """Quality factor from a Lorentzian fit of a single-peaked spectrum."""
    freq, amp = spec.freq_ghz, spec.amplitude_mhz
    if freq.size < 8:
        raise ValidationError("spectrum too short for a linewidth fit")
    span = float(freq[-1] - freq[0])
    prominence = 0.35 * float(np.ptp(amp))
    if prominence <= 0:
        raise ConvergenceError("spectrum is flat; no resonance to fit")
    peaks, _ = find_peaks(amp, prominence=prominence)
    interior_max = 0 < int(np.argmax(amp)) < amp.size - 1
    if len(peaks) > 1:
        raise ConvergenceError(f"expected a single resonance, found {len(peaks)} peaks")
    if len(peaks) == 0 and not interior_max:
        raise ConvergenceError("no interior resonance peak found")

    def lorentzian(f, base, height, f0, hwhm):
        return base + height / (1.0 + ((f - f0) / hwhm) ** 2)

    f0_init = float(freq[np.argmax(amp)])
    hwhm_init = max(_initial_hwhm(freq, amp), span / freq.size)
    p0 = [float(amp.min()), float(np.ptp(amp)), f0_init, hwhm_init]
    try:
        popt, _ = curve_fit(lorentzian, freq, amp, p0=p0, maxfev=10000)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"Lorentzian fit failed: {exc}") from exc
    base, height, f0, hwhm = popt
    hwhm = abs(hwhm)
    if height <= 0 or not freq[0] <= f0 <= freq[-1] or hwhm > span:
        raise ConvergenceError("Lorentzian fit produced an unphysical line shape")
    residual = float(np.sqrt(np.mean((lorentzian(freq, *popt) - amp) ** 2)))
    if residual > 0.25 * height:
        raise ConvergenceError("Lorentzian fit residual too large; not a single line")
    fwhm = 2.0 * hwhm
    return QFactorResult(q=f0 / fwhm, f_r_ghz=float(f0), fwhm_ghz=float(fwhm))


def _initial_hwhm(freq: np.ndarray, amp: np.ndarray) -> float:
    peak = float(np.max(amp))
    base = float(np.min(amp))
    half = base + 0.5 * (peak - base)
    above = np.flatnonzero(amp >= half)
    if above.size == 0:
        return float(freq[-1] - freq[0]) / 10.0
    return 0.5 * float(freq[above[-1]] - freq[above[0]])


def normalize_columns(spectrogram: RabiSpectrogram) -> RabiSpectrogram:
    """Contrast-normalize each column to [0, 1].

    Used to bring measured photoluminescence onto the same footing as the
    simulated population before image comparison; columns without contrast
    map to 1 (full baseline brightness).
    """
    signal = spectrogram.signal.copy()
    lows = signal.min(axis=0)
    spans = signal.max(axis=0) - lows
    flat = spans < 1e-12
    spans[flat] = 1.0
    normalized = (signal - lows) / spans
    normalized[:, flat] = 1.0
    return RabiSpectrogram(tau_us=spectrogram.tau_us,
                           freq_ghz=spectrogram.freq_ghz, signal=normalized)
