"""CSV and JSON artifact formats.

Tabular data uses CSV with unit-suffixed headers (``freq_GHz``,
``tau_us``, ``rabi_MHz``); structured parameters use JSON.  Floats are
written with Python's shortest round-trip representation so that
write -> read -> write is byte-identical, and every file is written
atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .circuit import ComplexSpectrum, MbvdParams
from .errors import ValidationError
from .inference import Refinement, ScanPeak, ScanResult, ScanUncertainty
from .spectro import FourierMap, RabiSpectrogram


def _fmt(value) -> str:
    return repr(float(value))


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, data) -> None:
    atomic_write_text(path, json.dumps(data, indent=2) + "\n")


def read_json(path: str | Path):
    with open(path) as handle:
        return json.load(handle)


def write_spectrum_csv(path: str | Path, spectrum: ComplexSpectrum) -> None:
    """Columns freq_GHz, rabi_MHz, plus phase_rad when phase is present."""
    lines = []
    if spectrum.phase_rad is None:
        lines.append("freq_GHz,rabi_MHz")
        for f, a in zip(spectrum.freq_ghz, spectrum.amplitude_mhz):
            lines.append(f"{_fmt(f)},{_fmt(a)}")
    else:
        lines.append("freq_GHz,rabi_MHz,phase_rad")
        for f, a, p in zip(spectrum.freq_ghz, spectrum.amplitude_mhz,
                           spectrum.phase_rad):
            lines.append(f"{_fmt(f)},{_fmt(a)},{_fmt(p)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_spectrum_csv(path: str | Path) -> ComplexSpectrum:
    rows = _read_csv_rows(path)
    header = rows[0]
    if header[:2] != ["freq_GHz", "rabi_MHz"]:
        raise ValidationError(
            f"{path}: expected header freq_GHz,rabi_MHz, got {','.join(header)}")
    has_phase = len(header) > 2 and header[2] == "phase_rad"
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    if body.ndim != 2 or body.shape[1] < 2:
        raise ValidationError(f"{path}: malformed spectrum body")
    phase = body[:, 2] if has_phase else None
    return ComplexSpectrum(freq_ghz=body[:, 0], amplitude_mhz=body[:, 1],
                           phase_rad=phase)


def _write_grid_csv(path, row_header: str, row_values, col_values, body) -> None:
    lines = [",".join([row_header] + [_fmt(c) for c in col_values])]
    for r, row in zip(row_values, body):
        lines.append(",".join([_fmt(r)] + [_fmt(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _read_csv_rows(path) -> list[list[str]]:
    with open(path) as handle:
        rows = [line.strip().split(",") for line in handle if line.strip()]
    if not rows:
        raise ValidationError(f"{path} is empty")
    return rows


def _read_grid_csv(path, row_header: str):
    rows = _read_csv_rows(path)
    if rows[0][0] != row_header:
        raise ValidationError(
            f"{path}: expected first header cell {row_header!r}, got {rows[0][0]!r}")
    cols = np.array([float(v) for v in rows[0][1:]])
    row_values = np.array([float(r[0]) for r in rows[1:]])
    body = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    if body.shape != (row_values.size, cols.size):
        raise ValidationError(f"{path}: ragged grid body")
    return row_values, cols, body


def write_spectrogram_csv(path: str | Path, sg: RabiSpectrogram) -> None:
    """First row: freq_GHz header; first column: tau_us; body: signal."""
    _write_grid_csv(path, "tau_us", sg.tau_us, sg.freq_ghz, sg.signal)


def read_spectrogram_csv(path: str | Path) -> RabiSpectrogram:
    tau, freq, body = _read_grid_csv(path, "tau_us")
    return RabiSpectrogram(tau_us=tau, freq_ghz=freq, signal=body)


def write_fft_csv(path: str | Path, fmap: FourierMap) -> None:
    """Same grid layout as the spectrogram with rabi_MHz rows."""
    _write_grid_csv(path, "rabi_MHz", fmap.rabi_mhz, fmap.freq_ghz,
                    fmap.magnitude)


def read_fft_csv(path: str | Path) -> FourierMap:
    rabi, freq, body = _read_grid_csv(path, "rabi_MHz")
    return FourierMap(rabi_mhz=rabi, freq_ghz=freq, magnitude=body)


def write_mbvd_params(path: str | Path, params: MbvdParams) -> None:
    write_json(path, params.to_dict())


def read_mbvd_params(path: str | Path) -> MbvdParams:
    return MbvdParams.from_dict(read_json(path))


def scan_result_to_dict(result: ScanResult) -> dict:
    data = {
        "alpha_grid": result.alpha_grid.tolist(),
        "phi_grid_deg": result.phi_grid_deg.tolist(),
        "ssim_map": result.ssim_map.tolist(),
        "peak": {"alpha": result.peak.alpha, "phi_deg": result.peak.phi_deg,
                 "ssim": result.peak.ssim},
        "uncertainty": {
            "d_alpha": result.uncertainty.d_alpha,
            "d_phi_deg": result.uncertainty.d_phi_deg,
            "alpha_one_sided": result.uncertainty.alpha_one_sided,
            "phi_one_sided": result.uncertainty.phi_one_sided,
        },
        "failures": [list(f) for f in result.failures],
    }
    if result.refinement is not None:
        data["refinement"] = {
            "alpha_grid": result.refinement.alpha_grid.tolist(),
            "phi_grid_deg": result.refinement.phi_grid_deg.tolist(),
            "ssim_map": result.refinement.ssim_map.tolist(),
        }
    return data


def scan_result_from_dict(data: dict) -> ScanResult:
    refinement = None
    if "refinement" in data:
        refinement = Refinement(
            alpha_grid=np.array(data["refinement"]["alpha_grid"]),
            phi_grid_deg=np.array(data["refinement"]["phi_grid_deg"]),
            ssim_map=np.array(data["refinement"]["ssim_map"]))
    return ScanResult(
        alpha_grid=np.array(data["alpha_grid"]),
        phi_grid_deg=np.array(data["phi_grid_deg"]),
        ssim_map=np.array(data["ssim_map"]),
        peak=ScanPeak(**data["peak"]),
        uncertainty=ScanUncertainty(**data["uncertainty"]),
        failures=tuple((int(i), int(j), str(msg))
                       for i, j, msg in data.get("failures", [])),
        refinement=refinement,
    )


def write_scan_result(path: str | Path, result: ScanResult) -> None:
    write_json(path, scan_result_to_dict(result))


def read_scan_result(path: str | Path) -> ScanResult:
    return scan_result_from_dict(read_json(path))


# --- plot manifest ---------------------------------------------------------

def append_manifest(path: str | Path, figures: list[dict]) -> None:
    """Merge figure entries (keyed by id) into a rendering manifest."""
    path = Path(path)
    manifest = {"figures": []}
    if path.exists():
        manifest = read_json(path)
    by_id = {fig["id"]: fig for fig in manifest.get("figures", [])}
    for fig in figures:
        by_id[fig["id"]] = fig
    write_json(path, {"figures": [by_id[k] for k in sorted(by_id)]})


def validate_manifest(path: str | Path) -> dict:
    """Check that every referenced data file exists and parses."""
    manifest = read_json(path)
    base = Path(path).parent
    readers = {
        "spectrum": read_spectrum_csv,
        "curve": read_spectrum_csv,
        "spectrogram": read_spectrogram_csv,
        "fft": read_fft_csv,
        "heatmap": read_json,
    }
    for fig in manifest.get("figures", []):
        kind = fig.get("kind")
        if kind not in readers:
            raise ValidationError(f"manifest figure {fig.get('id')}: unknown kind {kind!r}")
        data_path = base / fig["data"]
        if not data_path.exists():
            raise ValidationError(f"manifest figure {fig.get('id')}: missing data file {data_path}")
        readers[kind](data_path)
    return manifest
