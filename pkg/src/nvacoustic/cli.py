"""Command-line pipeline.

Subcommands: ``synth`` (seeded synthetic dataset), ``fit-mbvd`` (equivalent
circuit from two Rabi-field spectra), ``simulate`` (ensemble spectrogram +
FFT), ``scan`` (SSIM grid search and susceptibility-ratio report),
``map-strain`` (stress-to-strain susceptibility mapping) and ``plot``
(render the manifest written by the other subcommands).

Settings resolve in order: built-in defaults, then mode preset, then the
--config JSON file, then NVAC_* environment variables (NVAC_OUT_DIR,
NVAC_SEED, NVAC_THREADS), then explicit flags.  Exit codes: 0 success,
2 validation failure, 3 convergence failure, 4 I/O failure.  All noise is
drawn from numpy's PCG64 generator so fixtures are reproducible across
platforms.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, inference, presets, spectro, spin, stress
from .circuit import ComplexSpectrum, MbvdParams, derived_quantities, fit, \
    model_rabi_fields
from .errors import ConvergenceError, ValidationError
from .lindblad import DecoherenceParams

_ENV_PREFIX = "NVAC_"


def _require_file(path: str | Path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _env(name: str, cast, fallback):
    raw = os.environ.get(_ENV_PREFIX + name)
    if raw is None:
        return fallback
    return cast(raw)


def _apply_config(ns: argparse.Namespace) -> None:
    """Fill unset flags from the --config JSON file, then the environment."""
    if getattr(ns, "config", None):
        config = dataio.read_json(_require_file(ns.config))
        if not isinstance(config, dict):
            raise ValidationError("--config must contain a JSON object")
        for key, value in config.items():
            attr = key.replace("-", "_")
            if not hasattr(ns, attr):
                raise ValidationError(f"unknown config key {key!r}")
            if getattr(ns, attr) is None:
                setattr(ns, attr, value)
    if ns.out_dir is None:
        ns.out_dir = _env("OUT_DIR", str, None)
    if getattr(ns, "seed", None) is None:
        ns.seed = _env("SEED", int, None)
    if getattr(ns, "threads", None) is None:
        ns.threads = _env("THREADS", int, None)


def _defaults(ns: argparse.Namespace, **pairs) -> None:
    for key, value in pairs.items():
        if getattr(ns, key, None) is None:
            setattr(ns, key, value)


def _resolve_mode(ns) -> presets.ModePreset:
    if ns.mode != "custom":
        preset = presets.get_mode(ns.mode)
        if getattr(ns, "beta", None) is not None:
            preset = presets.ModePreset(
                name=preset.name, transition=preset.transition,
                wavelength_um=preset.wavelength_um, circuit=preset.circuit,
                beta=ns.beta)
        return preset
    if ns.wavelength is None:
        raise ValidationError("custom mode requires --wavelength")
    if ns.f_min is None or ns.f_max is None:
        raise ValidationError("custom mode requires --f-min and --f-max")
    if ns.params is None:
        raise ValidationError("custom mode requires --params")
    return presets.ModePreset(
        name="custom",
        transition=ns.transition or "plus",
        wavelength_um=ns.wavelength,
        circuit=dataio.read_mbvd_params(_require_file(ns.params)),
        beta=ns.beta if ns.beta is not None else 1.3,
    )


def _grids(ns, mode: presets.ModePreset):
    if ns.f_min is not None and ns.f_max is not None:
        freq = np.linspace(ns.f_min, ns.f_max, ns.n_freq)
    else:
        freq = mode.freq_window_ghz(ns.n_freq)
    tau = np.linspace(0.0, ns.tau_max, ns.n_tau)
    return freq, tau


def _ensemble(ns, mode: presets.ModePreset) -> spectro.EnsembleSpec:
    wavelength = ns.wavelength if ns.wavelength is not None else mode.wavelength_um
    return spectro.EnsembleSpec(wavelength_um=wavelength, n_nv=ns.n_nv)


def _load_circuit(ns, mode: presets.ModePreset) -> MbvdParams:
    if ns.params is not None:
        return dataio.read_mbvd_params(_require_file(ns.params))
    return mode.circuit


def _spectrum_figure(fig_id: str, data_file: str, title: str) -> dict:
    return {"id": fig_id, "data": data_file, "kind": "spectrum",
            "xlabel": "drive frequency (GHz)", "ylabel": "Rabi field (MHz)",
            "title": title}


# --- synth ------------------------------------------------------------------

def cmd_synth(ns) -> int:
    _defaults(ns, seed=0, threads=1, out_dir=".", alpha=0.5, phi_deg=10.0,
              noise=0.02, n_freq=41, n_tau=81, tau_max=4.0, n_nv=6, t2=2.0)
    mode = _resolve_mode(ns)
    circuit = _load_circuit(ns, mode)
    freq, tau = _grids(ns, mode)
    ratios = spin.CouplingRatios(alpha=ns.alpha, beta=mode.beta,
                                 phi_rad=math.radians(ns.phi_deg))
    ensemble = _ensemble(ns, mode)

    rng = np.random.default_rng(np.random.PCG64(ns.seed))
    omega_b, omega_s2 = model_rabi_fields(circuit, freq)

    def noisy(values):
        if ns.noise == 0:
            return np.asarray(values, dtype=float)
        return np.maximum(values * (1.0 + ns.noise * rng.standard_normal(values.shape)), 0.0)

    lead = ComplexSpectrum(freq, noisy(np.abs(omega_b)))
    acoustic = ComplexSpectrum(freq, noisy(np.abs(omega_s2)))
    sg = spectro.simulate_spectrogram(circuit, ratios, ensemble,
                                      mode.transition, freq, tau,
                                      dec=DecoherenceParams(ns.t2),
                                      n_workers=ns.threads)
    sg = spectro.RabiSpectrogram(tau_us=sg.tau_us, freq_ghz=sg.freq_ghz,
                                 signal=noisy(sg.signal))

    out = Path(ns.out_dir)
    dataio.write_spectrum_csv(out / "lead_sq_spectrum.csv", lead)
    dataio.write_spectrum_csv(out / "dq_spectrum.csv", acoustic)
    dataio.write_spectrogram_csv(out / "spectrogram.csv", sg)
    dataio.write_json(out / "truth.json", {
        "mode": mode.name, "transition": mode.transition,
        "wavelength_um": ensemble.wavelength_um, "n_nv": ensemble.n_nv,
        "beta": mode.beta, "alpha": ns.alpha, "phi_deg": ns.phi_deg,
        "noise": ns.noise, "seed": ns.seed, "t2_us": ns.t2,
        "prng": "numpy PCG64", "circuit": circuit.to_dict(),
    })
    dataio.append_manifest(out / "plots.json", [
        _spectrum_figure("lead-sq-spectrum", "lead_sq_spectrum.csv",
                         "magnetic Rabi field at the leads"),
        _spectrum_figure("dq-spectrum", "dq_spectrum.csv",
                         "acoustic DQ Rabi field"),
        {"id": "synthetic-spectrogram", "data": "spectrogram.csv",
         "kind": "spectrogram", "xlabel": "drive frequency (GHz)",
         "ylabel": "pulse duration (us)", "title": "synthetic Rabi spectrogram"},
    ])
    print(f"synth: wrote dataset for mode {mode.name} "
          f"(alpha={ns.alpha}, phi={ns.phi_deg} deg, noise={ns.noise}, "
          f"seed={ns.seed}) to {out}")
    return 0


# --- fit-mbvd ---------------------------------------------------------------

def cmd_fit_mbvd(ns) -> int:
    _defaults(ns, seed=0, threads=1, out_dir=".", n_starts=8)
    lead = dataio.read_spectrum_csv(_require_file(ns.lead))
    acoustic = dataio.read_spectrum_csv(_require_file(ns.dq))

    if ns.window is not None:
        f_min, f_max = ns.window
    elif ns.mode is not None:
        window = presets.get_mode(ns.mode).freq_window_ghz(2)
        f_min, f_max = float(window[0]), float(window[-1])
    else:
        f_min = max(lead.freq_ghz[0], acoustic.freq_ghz[0])
        f_max = min(lead.freq_ghz[-1], acoustic.freq_ghz[-1])
    lead_w = lead.masked(f_min, f_max)
    acoustic_w = acoustic.masked(f_min, f_max)
    if lead_w.freq_ghz.size < 20 or acoustic_w.freq_ghz.size < 20:
        raise ValidationError(
            f"window [{f_min}, {f_max}] GHz leaves fewer than 20 samples per spectrum")
    i_peak = int(np.argmax(acoustic_w.amplitude_mhz))
    if i_peak in (0, acoustic_w.freq_ghz.size - 1):
        raise ValidationError(
            f"window [{f_min}, {f_max}] GHz excludes the acoustic resonance: "
            "the spectrum peak sits at the window edge; widen the window")

    init = dataio.read_mbvd_params(_require_file(ns.init)) if ns.init else None
    result = fit(lead_w, acoustic_w, init=init, n_starts=ns.n_starts,
                 seed=ns.seed)
    derived = derived_quantities(result.params)

    out = Path(ns.out_dir)
    dataio.write_mbvd_params(out / "mbvd_params.json", result.params)
    dataio.write_json(out / "fit_report.json", {
        "rel_residual": result.rel_residual,
        "cost": result.cost,
        "jacobian_rank": result.jacobian_rank,
        "condition": result.condition,
        "degenerate": result.degenerate,
        "n_starts": result.n_starts,
        "f_r_GHz": derived.f_r_ghz,
        "f_a_GHz": derived.f_a_ghz,
        "Q": derived.q,
        "window_GHz": [f_min, f_max],
        "covariance": result.covariance.tolist(),
        "parameter_order": list(result.params.to_dict()),
    })

    dense = np.linspace(f_min, f_max, 501)
    omega_b, omega_s2 = model_rabi_fields(result.params, dense)
    dataio.write_spectrum_csv(out / "model_magnetic_curve.csv", ComplexSpectrum(
        dense, np.abs(omega_b), np.unwrap(np.angle(omega_b))))
    dataio.write_spectrum_csv(out / "model_acoustic_curve.csv", ComplexSpectrum(
        dense, np.abs(omega_s2), np.unwrap(np.angle(omega_s2))))
    dataio.append_manifest(out / "plots.json", [
        {"id": "model-magnetic", "data": "model_magnetic_curve.csv",
         "kind": "curve", "xlabel": "drive frequency (GHz)",
         "ylabel": "Rabi field (MHz)", "title": "fitted magnetic field model"},
        {"id": "model-acoustic", "data": "model_acoustic_curve.csv",
         "kind": "curve", "xlabel": "drive frequency (GHz)",
         "ylabel": "Rabi field (MHz)", "title": "fitted acoustic field model"},
    ])

    print("fit-mbvd: converged with relative residual "
          f"{result.rel_residual:.2%} over [{f_min:.4f}, {f_max:.4f}] GHz")
    print(f"  f_r = {derived.f_r_ghz:.4f} GHz, f_a = {derived.f_a_ghz:.4f} GHz, "
          f"Q = {derived.q:.0f}")
    for key, value in result.params.to_dict().items():
        print(f"  {key} = {value:.6g}")
    if result.degenerate:
        print("  warning: rank-deficient Jacobian; parameters are strongly "
              "correlated (see covariance in fit_report.json)")
    return 0


# --- simulate ---------------------------------------------------------------

def cmd_simulate(ns) -> int:
    _defaults(ns, seed=0, threads=1, out_dir=".", alpha=0.0, phi_deg=0.0,
              n_freq=41, n_tau=81, tau_max=4.0, n_nv=6, t2=2.0)
    mode = _resolve_mode(ns)
    circuit = _load_circuit(ns, mode)
    freq, tau = _grids(ns, mode)
    ratios = spin.CouplingRatios(alpha=ns.alpha, beta=mode.beta,
                                 phi_rad=math.radians(ns.phi_deg))
    sg = spectro.simulate_spectrogram(circuit, ratios, _ensemble(ns, mode),
                                      mode.transition, freq, tau,
                                      dec=DecoherenceParams(ns.t2),
                                      n_workers=ns.threads)
    fmap = spectro.fft_spectrum(sg)

    out = Path(ns.out_dir)
    dataio.write_spectrogram_csv(out / "spectrogram.csv", sg)
    dataio.write_fft_csv(out / "fft.csv", fmap)
    dataio.append_manifest(out / "plots.json", [
        {"id": "simulated-spectrogram", "data": "spectrogram.csv",
         "kind": "spectrogram", "xlabel": "drive frequency (GHz)",
         "ylabel": "pulse duration (us)",
         "title": f"simulated spectrogram (alpha={ns.alpha}, phi={ns.phi_deg} deg)"},
        {"id": "simulated-fft", "data": "fft.csv", "kind": "fft",
         "xlabel": "drive frequency (GHz)", "ylabel": "Rabi frequency (MHz)",
         "title": "Fourier transform of the simulated spectrogram"},
    ])
    print(f"simulate: wrote spectrogram ({tau.size} tau x {freq.size} freq) "
          f"and FFT for mode {mode.name} at alpha={ns.alpha}, phi={ns.phi_deg} deg")
    return 0


# --- scan -------------------------------------------------------------------

def cmd_scan(ns) -> int:
    _defaults(ns, seed=0, threads=1, out_dir=".", n_alpha=31, n_phi=37,
              alpha_min=0.0, alpha_max=1.5, phi_min=-180.0, phi_max=180.0,
              b=-2.3, b_err=0.3, n_nv=6, t2=2.0, ssim_window="global")
    if ns.n_alpha < 2:
        raise ValidationError("scan needs an alpha grid of at least 2 points "
                              "to estimate the HWHM uncertainty")
    mode = _resolve_mode(ns)
    circuit = _load_circuit(ns, mode)
    data = dataio.read_spectrogram_csv(_require_file(ns.data))
    if not ns.no_normalize:
        data = spectro.normalize_columns(data)

    cfg = inference.SsimConfig(window=ns.ssim_window)
    result = inference.scan(
        data, circuit, _ensemble(ns, mode), mode.transition, beta=mode.beta,
        alpha_range=(ns.alpha_min, ns.alpha_max),
        phi_range_deg=(ns.phi_min, ns.phi_max),
        n_alpha=ns.n_alpha, n_phi=ns.n_phi, cfg=cfg,
        dec=DecoherenceParams(ns.t2), refine=not ns.no_refine,
        n_workers=ns.threads)

    failed_fraction = len(result.failures) / result.n_cells
    if failed_fraction > 0.05:
        raise ConvergenceError(
            f"{failed_fraction:.0%} of scan cells failed; aborting "
            f"(first failure: {result.failures[0]})")

    bprime = inference.extract_bprime(result.peak.alpha, ns.b,
                                      result.uncertainty.d_alpha, ns.b_err)
    out = Path(ns.out_dir)
    dataio.write_scan_result(out / "scan_result.json", result)
    dataio.write_json(out / "bprime_report.json", {
        "alpha": result.peak.alpha,
        "d_alpha": result.uncertainty.d_alpha,
        "phi_deg": result.peak.phi_deg,
        "d_phi_deg": result.uncertainty.d_phi_deg,
        "ssim_peak": result.peak.ssim,
        "b_MHz_per_GPa": ns.b,
        "b_err_MHz_per_GPa": ns.b_err,
        "b_prime_MHz_per_GPa": bprime.b_prime_mhz_per_gpa,
        "b_prime_err_MHz_per_GPa": bprime.uncertainty_mhz_per_gpa,
        "ratio_text": bprime.ratio_text,
        "n_failed_cells": len(result.failures),
    })
    dataio.append_manifest(out / "plots.json", [
        {"id": "ssim-heatmap", "data": "scan_result.json", "kind": "heatmap",
         "xlabel": "phi (deg)", "ylabel": "alpha",
         "title": "structural similarity over (alpha, phi)"},
    ])

    print(f"scan: peak SSIM {result.peak.ssim:.4f} at "
          f"alpha = {result.peak.alpha:.3f} +/- {result.uncertainty.d_alpha:.3f}"
          f"{' (one-sided)' if result.uncertainty.alpha_one_sided else ''}, "
          f"phi = {result.peak.phi_deg:.1f} +/- {result.uncertainty.d_phi_deg:.1f} deg"
          f"{' (one-sided)' if result.uncertainty.phi_one_sided else ''}")
    if result.failures:
        print(f"  {len(result.failures)} of {result.n_cells} cells failed and were excluded")
    print(f"  {bprime.ratio_text}")
    return 0


# --- map-strain -------------------------------------------------------------

def _uncertain_from_json(value) -> stress.Uncertain:
    if isinstance(value, (int, float)):
        return stress.Uncertain(float(value))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return stress.Uncertain(float(value[0]), float(value[1]))
    if isinstance(value, dict):
        return stress.Uncertain(float(value["value"]), float(value.get("err", 0.0)))
    raise ValidationError(f"cannot parse susceptibility entry {value!r}")


def _susceptibilities_from_json(data: dict) -> stress.SusceptibilitySet:
    known = {"a1", "a2", "b", "c", "b_prime", "c_prime"}
    unknown = set(data) - known - {"source"}
    if unknown:
        raise ValidationError(f"unknown susceptibility keys: {sorted(unknown)}")
    kwargs = {key: _uncertain_from_json(data[key]) for key in known if key in data}
    return stress.SusceptibilitySet(source=data.get("source", "user"), **kwargs)


def cmd_map_strain(ns) -> int:
    _defaults(ns, out_dir=".", seed=0, threads=1)
    catalog = stress.table1_catalog()
    if ns.susceptibilities is not None:
        data = dataio.read_json(_require_file(ns.susceptibilities))
        sus = _susceptibilities_from_json(data)
    elif ns.catalog_row is not None:
        try:
            sus = catalog.stress_row(ns.catalog_row)
        except KeyError:
            raise ValidationError(
                f"no catalog row tagged {ns.catalog_row!r}; available: "
                f"{[r.source for r in catalog.stress_rows]}") from None
    else:
        raise ValidationError("provide --susceptibilities FILE or --catalog-row TAG")

    mapped = stress.stress_to_strain_susceptibility(sus)
    try:
        reference = catalog.strain_row(sus.source)
    except KeyError:
        reference = None

    payload = {"source": sus.source}
    names = ("lambda_a1", "lambda_a2", "lambda_b", "lambda_c",
             "lambda_b_prime", "lambda_c_prime")
    print(f"map-strain: strain susceptibilities for {sus.source or 'user input'} "
          "(GHz/strain)")
    print(f"  {'coefficient':<16}{'mapped':>22}{'catalog':>22}")
    warned = False
    for name in names:
        value = getattr(mapped, name)
        if value is None:
            continue
        payload[name] = {"value": value.value, "err": value.err}
        catalog_value = getattr(reference, name) if reference else None
        catalog_text = f"{catalog_value}" if catalog_value else "-"
        print(f"  {name:<16}{str(value):>22}{catalog_text:>22}")
        if (catalog_value is not None
                and value.value * catalog_value.value < 0
                and abs(abs(value.value) - abs(catalog_value.value))
                <= 3 * (value.err + catalog_value.err)):
            print(f"    warning: {name} matches the catalog magnitude with "
                  "the opposite sign (known sign-convention discrepancy for "
                  "the unprimed rows)")
            warned = True
    if warned:
        payload["sign_convention_warning"] = True
    dataio.write_json(Path(ns.out_dir) / "strain_susceptibilities.json", payload)
    return 0


# --- plot -------------------------------------------------------------------

def _render_figure(fig, base: Path, out: Path, fmt: str) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    target = out / f"{fig['id']}.{fmt}"
    figure, ax = plt.subplots(figsize=(6, 4))
    kind = fig["kind"]
    if kind in ("spectrum", "curve"):
        spectrum = dataio.read_spectrum_csv(base / fig["data"])
        ax.plot(spectrum.freq_ghz, spectrum.amplitude_mhz, ".-", ms=3)
        if spectrum.phase_rad is not None:
            twin = ax.twinx()
            twin.plot(spectrum.freq_ghz, spectrum.phase_rad, "-", color="tab:orange")
            twin.set_ylabel("phase (rad)")
    elif kind == "spectrogram":
        sg = dataio.read_spectrogram_csv(base / fig["data"])
        mesh = ax.pcolormesh(sg.freq_ghz, sg.tau_us, sg.signal, shading="auto")
        figure.colorbar(mesh, ax=ax, label="population")
    elif kind == "fft":
        fmap = dataio.read_fft_csv(base / fig["data"])
        mesh = ax.pcolormesh(fmap.freq_ghz, fmap.rabi_mhz, fmap.magnitude,
                             shading="auto")
        figure.colorbar(mesh, ax=ax, label="|FFT|")
    elif kind == "heatmap":
        result = dataio.read_scan_result(base / fig["data"])
        mesh = ax.pcolormesh(result.phi_grid_deg, result.alpha_grid,
                             result.ssim_map, shading="auto")
        ax.plot(result.peak.phi_deg, result.peak.alpha, "o", mfc="none",
                mec="white", ms=12)
        figure.colorbar(mesh, ax=ax, label="SSIM")
    else:
        raise ValidationError(f"unknown figure kind {kind!r}")
    ax.set_xlabel(fig.get("xlabel", ""))
    ax.set_ylabel(fig.get("ylabel", ""))
    ax.set_title(fig.get("title", fig["id"]))
    figure.tight_layout()
    figure.savefig(target, dpi=150)
    plt.close(figure)
    return target


def cmd_plot(ns) -> int:
    _defaults(ns, out_dir=None, seed=0, threads=1)
    manifest_path = _require_file(ns.manifest)
    manifest = dataio.validate_manifest(manifest_path)
    base = manifest_path.parent
    out = Path(ns.out_dir) if ns.out_dir else base
    out.mkdir(parents=True, exist_ok=True)
    for fig in manifest.get("figures", []):
        target = _render_figure(fig, base, out, ns.format)
        print(f"plot: rendered {target}")
    return 0


# --- parser -----------------------------------------------------------------

def _add_common(sub, grids: bool = False) -> None:
    sub.add_argument("--config", help="JSON file with default settings")
    sub.add_argument("--out-dir", help="output directory (default: current)")
    sub.add_argument("--seed", type=int, help="PRNG seed (PCG64)")
    sub.add_argument("--threads", type=int, help="worker processes")
    if grids:
        sub.add_argument("--mode", default="3.132GHz",
                         choices=sorted(presets.MODES) + ["custom"])
        sub.add_argument("--wavelength", type=float,
                         help="acoustic wavelength in um (required for custom mode)")
        sub.add_argument("--n-nv", type=int, dest="n_nv")
        sub.add_argument("--f-min", type=float, dest="f_min")
        sub.add_argument("--f-max", type=float, dest="f_max")
        sub.add_argument("--n-freq", type=int, dest="n_freq")
        sub.add_argument("--n-tau", type=int, dest="n_tau")
        sub.add_argument("--tau-max", type=float, dest="tau_max")
        sub.add_argument("--t2", type=float, help="dephasing time in us")
        sub.add_argument("--transition", choices=("plus", "minus"),
                         help="driven transition (custom mode)")
        sub.add_argument("--beta", type=float,
                         help="lead-to-resonator field scaling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvacoustic",
        description="dual-field Rabi spectroscopy modeling and inference")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    _add_common(synth, grids=True)
    synth.add_argument("--params", help="truth circuit parameters (JSON)")
    synth.add_argument("--alpha", type=float)
    synth.add_argument("--phi", type=float, dest="phi_deg",
                       help="phase offset in degrees")
    synth.add_argument("--noise", type=float,
                       help="multiplicative Gaussian noise level")
    synth.set_defaults(func=cmd_synth)

    fitp = commands.add_parser("fit-mbvd", help="fit the equivalent circuit")
    _add_common(fitp)
    fitp.add_argument("--lead", required=True,
                      help="magnetic Rabi spectrum CSV (measured at the leads)")
    fitp.add_argument("--dq", required=True,
                      help="acoustic DQ Rabi spectrum CSV")
    fitp.add_argument("--mode", choices=sorted(presets.MODES),
                      help="use this mode's default fit window")
    fitp.add_argument("--window", nargs=2, type=float,
                      metavar=("FMIN", "FMAX"), help="fit window in GHz")
    fitp.add_argument("--init", help="initial parameters JSON")
    fitp.add_argument("--n-starts", type=int, dest="n_starts")
    fitp.set_defaults(func=cmd_fit_mbvd)

    sim = commands.add_parser("simulate", help="simulate a Rabi spectrogram")
    _add_common(sim, grids=True)
    sim.add_argument("--params", help="fitted circuit parameters (JSON)")
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--phi", type=float, dest="phi_deg")
    sim.set_defaults(func=cmd_simulate)

    scan = commands.add_parser("scan", help="SSIM grid search over (alpha, phi)")
    _add_common(scan, grids=True)
    scan.add_argument("--params", help="fitted circuit parameters (JSON)")
    scan.add_argument("--data", required=True, help="spectrogram CSV to match")
    scan.add_argument("--n-alpha", type=int, dest="n_alpha")
    scan.add_argument("--n-phi", type=int, dest="n_phi")
    scan.add_argument("--alpha-min", type=float, dest="alpha_min")
    scan.add_argument("--alpha-max", type=float, dest="alpha_max")
    scan.add_argument("--phi-min", type=float, dest="phi_min")
    scan.add_argument("--phi-max", type=float, dest="phi_max")
    scan.add_argument("--b", type=float,
                      help="DQ stress susceptibility in MHz/GPa")
    scan.add_argument("--b-err", type=float, dest="b_err")
    scan.add_argument("--ssim-window", choices=("global", "gaussian"),
                      dest="ssim_window")
    scan.add_argument("--no-normalize", action="store_true",
                      help="skip column normalization of the data")
    scan.add_argument("--no-refine", action="store_true",
                      help="skip the local half-spacing refinement pass")
    scan.set_defaults(func=cmd_scan)

    strain = commands.add_parser("map-strain",
                                 help="map stress to strain susceptibilities")
    _add_common(strain)
    strain.add_argument("--susceptibilities",
                        help="JSON file with stress susceptibilities (MHz/GPa)")
    strain.add_argument("--catalog-row", dest="catalog_row",
                        help="use a catalog row (e.g. udvarhelyi2018)")
    strain.set_defaults(func=cmd_map_strain)

    plot = commands.add_parser("plot", help="render figures from a manifest")
    _add_common(plot)
    plot.add_argument("--manifest", required=True)
    plot.add_argument("--format", choices=("png", "svg"), default="png")
    plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        _apply_config(ns)
        return ns.func(ns)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
