"""Acceptance suite: one test per release criterion.

Each test prints a single ``ACCEPTANCE <n> PASS`` line once its assertions
hold, so ``pytest tests/test_acceptance.py -v -s`` gives a per-criterion
report.  Criterion 6 runs the full synthetic round trip through the CLI at
the default scan grid and is the slow one (a few minutes on one core).
"""

import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from nvacoustic import dataio
from nvacoustic.circuit import (ComplexSpectrum, MbvdParams, derived_quantities,
                                fit, model_rabi_fields)
from nvacoustic.cli import main
from nvacoustic.inference import SsimConfig, ssim
from nvacoustic.lindblad import DecoherenceParams, evolve, prepare_state
from nvacoustic.presets import MODES
from nvacoustic.spectro import (EnsembleSpec, q_from_linewidth,
                                resolvable_components, simulate_spectrogram)
from nvacoustic.spin import CouplingRatios
from nvacoustic.stress import (Uncertain, stress_to_strain_susceptibility,
                               table1_catalog)


def passed(number: int, message: str) -> None:
    print(f"\nACCEPTANCE {number} PASS - {message}")


def test_criterion_1_closed_form_resonance():
    params = MODES["3.132GHz"].circuit
    f_r = params.resonance_ghz
    assert f_r == pytest.approx(3.12, abs=5e-3)
    assert abs(f_r - 3.132) / 3.132 < 0.01
    passed(1, f"closed-form resonance f_r = {f_r:.4f} GHz, "
              "within 1% of the 3.132 GHz mode")


def test_criterion_2_strain_susceptibility_mapping():
    catalog = table1_catalog()
    theory = catalog.stress_row("udvarhelyi2018")
    reference = catalog.strain_row("udvarhelyi2018")
    mapped = stress_to_strain_susceptibility(theory)

    # primed pair: sign and value inside the cataloged uncertainties
    assert abs(mapped.lambda_b_prime.value - 0.65) <= 0.02
    assert abs(mapped.lambda_c_prime.value - (-0.707)) <= 0.018
    # unprimed pair: magnitudes within 1%, signs opposite (documented
    # convention discrepancy, reported rather than silently fixed)
    signs = []
    for name in ("lambda_b", "lambda_c"):
        ours = getattr(mapped, name).value
        ref = getattr(reference, name).value
        assert abs(abs(ours) - abs(ref)) / abs(ref) < 0.01
        signs.append(ours * ref < 0)
    # trace-channel pair: magnitudes inside combined quoted uncertainties
    for name in ("lambda_a1", "lambda_a2"):
        ours = getattr(mapped, name)
        ref = getattr(reference, name)
        assert abs(abs(ours.value) - abs(ref.value)) <= ours.err + ref.err
        signs.append(ours.value * ref.value < 0)
    passed(2, "strain mapping reproduces the primed couplings "
              f"({mapped.lambda_b_prime.value:+.3f}, "
              f"{mapped.lambda_c_prime.value:+.3f} GHz/strain) and the "
              f"unprimed magnitudes; sign discrepancy reported on "
              f"{sum(signs)} unprimed entries")


def test_criterion_3_lindblad_correctness(rng):
    start = time.perf_counter()
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = h[1, 0] = 0.5  # 1 MHz resonant drive
    rho0 = prepare_state("ground")

    pi_pulse = evolve(rho0, h, DecoherenceParams.no_decay(), np.array([0.5]))
    assert pi_pulse.population[0] < 1e-6

    tau = np.linspace(0.025, 4.0, 160)
    for method in ("expm", "rk4"):
        trace = evolve(rho0, h, DecoherenceParams(2.0), tau, method=method,
                       keep_states=True)
        states = trace.states
        assert np.max(np.abs(np.einsum("nii->n", states) - 1.0)) < 1e-9
        assert np.max(np.abs(states - states.conj().transpose(0, 2, 1))) < 1e-10
        assert np.linalg.eigvalsh(states).min() > -1e-9

    raw = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h_random = 0.5 * (raw + raw.conj().T)
    tau_u = np.linspace(0.1, 3.0, 30)
    oracle = np.array([
        (expm(-2j * math.pi * h_random * t) @ rho0
         @ expm(2j * math.pi * h_random * t))[1, 1].real for t in tau_u])
    for method in ("expm", "rk4"):
        trace = evolve(rho0, h_random, DecoherenceParams.no_decay(), tau_u,
                       method=method)
        assert np.max(np.abs(trace.population - oracle)) < 1e-8
    passed(3, "pi pulse empties the initial level, invariants hold at every "
              "sample, and the propagator matches the matrix-exponential "
              f"oracle ({time.perf_counter() - start:.2f} s)")


def test_criterion_4_q_extraction():
    f_r = 3.132
    fwhm = f_r / 1040.0
    freq = np.linspace(f_r - 8 * fwhm, f_r + 8 * fwhm, 481)
    amp = 0.1 + 2.0 / (1 + ((freq - f_r) / (fwhm / 2)) ** 2)
    result = q_from_linewidth(ComplexSpectrum(freq, amp))
    assert result.q == pytest.approx(1040.0, rel=0.01)
    passed(4, f"Lorentzian linewidth fit recovers Q = {result.q:.1f} "
              "(1040 within 1%)")


@pytest.mark.parametrize("mode_name", ["3.132GHz", "2.732GHz"])
def test_criterion_5_mbvd_round_trip(mode_name):
    start = time.perf_counter()
    mode = MODES[mode_name]
    truth = mode.circuit
    freq = mode.freq_window_ghz(41)
    gen = np.random.default_rng(np.random.PCG64(11))
    omega_b, omega_s = model_rabi_fields(truth, freq)
    spec_b = ComplexSpectrum(freq, np.abs(omega_b)
                             * (1 + 0.01 * gen.standard_normal(freq.size)))
    spec_s = ComplexSpectrum(freq, np.abs(omega_s)
                             * (1 + 0.01 * gen.standard_normal(freq.size)))
    result = fit(spec_b, spec_s)

    f_r_truth = derived_quantities(truth).f_r_ghz
    f_r_fit = derived_quantities(result.params).f_r_ghz
    assert abs(f_r_fit - f_r_truth) / f_r_truth < 1e-3

    dense = np.linspace(freq[0], freq[-1], 400)
    fit_curves = model_rabi_fields(result.params, dense)
    truth_curves = model_rabi_fields(truth, dense)
    for fitted, target in zip(fit_curves, truth_curves):
        amp_rms = (np.sqrt(np.mean((np.abs(fitted) - np.abs(target)) ** 2))
                   / np.sqrt(np.mean(np.abs(target) ** 2)))
        assert amp_rms < 0.01
        # phase SHAPE: constant offsets are unobservable in amplitude-only
        # fits and are absorbed downstream by the spatial phase parameter
        phase_fit = np.unwrap(np.angle(fitted))
        phase_true = np.unwrap(np.angle(target))
        delta = (phase_fit - phase_fit.mean()) - (phase_true - phase_true.mean())
        assert np.sqrt(np.mean(delta ** 2)) / np.ptp(phase_true) < 0.01

    # individual parameters only need to land within the reported
    # covariance (the documented gauge degeneracy dominates it)
    sigma = np.sqrt(np.diag(result.covariance))
    deviation = np.abs(result.params.as_array() - truth.as_array())
    assert np.all((deviation < 5 * sigma)
                  | (deviation < 0.5 * truth.as_array()))
    passed(5, f"{mode_name} spectra round trip: f_r error "
              f"{abs(f_r_fit - f_r_truth) / f_r_truth:.2e}, curves within 1% "
              f"({time.perf_counter() - start:.1f} s)")


def test_criterion_6_inference_round_trip(tmp_path):
    start = time.perf_counter()
    data_dir = tmp_path / "data"
    scan_dir = tmp_path / "scan"
    assert main(["synth", "--mode", "2.732GHz", "--alpha", "0.5", "--phi",
                 "10", "--noise", "0.02", "--seed", "42",
                 "--out-dir", str(data_dir)]) == 0
    assert main(["scan", "--mode", "2.732GHz", "--data",
                 str(data_dir / "spectrogram.csv"), "--out-dir",
                 str(scan_dir)]) == 0
    result = dataio.read_scan_result(scan_dir / "scan_result.json")
    report = dataio.read_json(scan_dir / "bprime_report.json")

    assert abs(result.peak.alpha - 0.5) <= result.uncertainty.d_alpha
    assert abs(result.peak.phi_deg - 10.0) <= result.uncertainty.d_phi_deg

    expected_b_prime = math.sqrt(2.0) * 0.5 * (-2.3)
    assert (abs(report["b_prime_MHz_per_GPa"] - expected_b_prime)
            <= report["b_prime_err_MHz_per_GPa"])
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    passed(6, "synthetic dataset at (alpha, phi) = (0.5, 10 deg) recovered at "
              f"({result.peak.alpha:.3f} +/- {result.uncertainty.d_alpha:.3f}, "
              f"{result.peak.phi_deg:.1f} +/- {result.uncertainty.d_phi_deg:.1f} deg), "
              f"b' = {report['b_prime_MHz_per_GPa']:.3f} +/- "
              f"{report['b_prime_err_MHz_per_GPa']:.3f} MHz/GPa "
              f"({elapsed:.0f} s at the default 31x37 grid)")


@pytest.mark.parametrize("mode_name,phi_deg", [("3.132GHz", -60.0),
                                               ("2.732GHz", 10.0)])
def test_criterion_7_spectrogram_dispersion(mode_name, phi_deg):
    start = time.perf_counter()
    mode = MODES[mode_name]
    freq = mode.freq_window_ghz(41)
    tau = np.linspace(0.0, 4.0, 81)
    ensemble = EnsembleSpec(wavelength_um=mode.wavelength_um)
    derived = derived_quantities(mode.circuit)
    near = np.abs(freq - derived.f_r_ghz) <= 3 * derived.f_r_ghz / derived.q

    dual = simulate_spectrogram(
        mode.circuit, CouplingRatios(0.5, 1.3, math.radians(phi_deg)),
        ensemble, mode.transition, freq, tau)
    dual_counts = resolvable_components(dual)
    assert dual_counts[near].max() >= 2

    magnetic = simulate_spectrogram(
        mode.circuit, CouplingRatios(0.0, 1.3, 0.0), ensemble,
        mode.transition, freq, tau)
    assert np.all(resolvable_components(magnetic) == 1)
    passed(7, f"{mode_name}: dual drive disperses into "
              f"{dual_counts[near].max()} resolvable components near "
              "resonance, magnetic-only drive into exactly 1 "
              f"({time.perf_counter() - start:.1f} s)")


def test_criterion_8_ssim_unit_checks(rng):
    toy = np.array([[120.0, 130, 140, 125],
                    [128, 135, 122, 131],
                    [119, 127, 133, 138],
                    [124, 129, 126, 132]])
    constant = np.full((4, 4), 128.0)

    def direct(a, b):  # single-window evaluation, written out independently
        c1 = (0.01 * 255.0) ** 2
        c2 = 9.0 * c1
        mu_a, mu_b = a.mean(), b.mean()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                / ((mu_a ** 2 + mu_b ** 2 + c1)
                   * (((a - mu_a) ** 2).mean() + ((b - mu_b) ** 2).mean() + c2)))

    for cfg in (SsimConfig(), SsimConfig(window="gaussian", window_size=3)):
        assert ssim(toy, toy, cfg) == 1.0
        image_a = rng.uniform(0, 255, (16, 16))
        image_b = rng.uniform(0, 255, (16, 16))
        assert ssim(image_a, image_b, cfg) == pytest.approx(
            ssim(image_b, image_a, cfg), abs=1e-15)
        assert -1.0 <= ssim(image_a, image_b, cfg) <= 1.0
        assert cfg.c1 == cfg.c2 / 9.0

    assert ssim(toy, constant) == pytest.approx(direct(toy, constant),
                                                abs=1e-12)
    assert ssim(toy, constant) == pytest.approx(0.6293508146371425, abs=1e-12)
    passed(8, "similarity index: identity, symmetry, boundedness, constant "
              "relation and the 4x4 hand example all verified")
