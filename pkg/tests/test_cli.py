import json
import math

import numpy as np
import pytest

from nvacoustic import dataio
from nvacoustic.cli import main
from nvacoustic.spectro import resolvable_components


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "data"
    code = run("synth", "--mode", "2.732GHz", "--alpha", "0.5", "--phi", "10",
               "--noise", "0.02", "--seed", "3", "--out-dir", out,
               "--n-freq", "21", "--n-tau", "41")
    assert code == 0
    return out


def test_synth_outputs_and_determinism(tmp_path):
    first = tmp_path / "one"
    second = tmp_path / "two"
    third = tmp_path / "three"
    for out, seed in ((first, 7), (second, 7), (third, 8)):
        code = run("synth", "--mode", "3.132GHz", "--alpha", "0.4", "--phi",
                   "-60", "--noise", "0.02", "--seed", seed, "--out-dir", out,
                   "--n-freq", "11", "--n-tau", "21")
        assert code == 0
    for name in ("lead_sq_spectrum.csv", "dq_spectrum.csv", "spectrogram.csv",
                 "truth.json"):
        assert (first / name).exists()
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "spectrogram.csv").read_bytes() \
        != (third / "spectrogram.csv").read_bytes()
    truth = dataio.read_json(first / "truth.json")
    assert truth["prng"] == "numpy PCG64"
    assert truth["alpha"] == 0.4


def test_fit_mbvd_on_synthetic_data(synth_dir, tmp_path, capsys):
    out = tmp_path / "fit"
    code = run("fit-mbvd", "--lead", synth_dir / "lead_sq_spectrum.csv",
               "--dq", synth_dir / "dq_spectrum.csv", "--out-dir", out)
    assert code == 0
    report = dataio.read_json(out / "fit_report.json")
    params = dataio.read_mbvd_params(out / "mbvd_params.json")
    truth = dataio.read_json(synth_dir / "truth.json")
    f_r_truth = 1.0 / (2 * math.pi * math.sqrt(
        truth["circuit"]["Lm_uH"] * 1e-6 * truth["circuit"]["Cm_fF"] * 1e-15)) / 1e9
    assert report["f_r_GHz"] == pytest.approx(f_r_truth, rel=2e-3)
    assert params.resonance_ghz == pytest.approx(f_r_truth, rel=2e-3)
    curve = dataio.read_spectrum_csv(out / "model_acoustic_curve.csv")
    assert curve.phase_rad is not None
    manifest = dataio.validate_manifest(out / "plots.json")
    assert {f["id"] for f in manifest["figures"]} \
        == {"model-magnetic", "model-acoustic"}


def test_fit_mbvd_missing_file_exit_code(tmp_path, capsys):
    code = run("fit-mbvd", "--lead", tmp_path / "nope.csv", "--dq",
               tmp_path / "nope2.csv", "--out-dir", tmp_path)
    assert code == 4
    assert "nope.csv" in capsys.readouterr().err


def test_fit_mbvd_window_excluding_resonance(synth_dir, tmp_path, capsys):
    code = run("fit-mbvd", "--lead", synth_dir / "lead_sq_spectrum.csv",
               "--dq", synth_dir / "dq_spectrum.csv", "--out-dir", tmp_path,
               "--window", "2.7745", "2.8")
    assert code == 2
    err = capsys.readouterr().err
    assert "window" in err


def test_simulate_magnetic_only_single_ridge(tmp_path):
    out = tmp_path / "sim"
    code = run("simulate", "--mode", "2.732GHz", "--alpha", "0", "--phi", "0",
               "--out-dir", out, "--n-freq", "11", "--n-tau", "41")
    assert code == 0
    sg = dataio.read_spectrogram_csv(out / "spectrogram.csv")
    assert np.all(resolvable_components(sg) == 1)
    fmap = dataio.read_fft_csv(out / "fft.csv")
    assert fmap.magnitude.shape[1] == 11
    dataio.validate_manifest(out / "plots.json")


def test_simulate_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("simulate", "--mode", "2.732GHz", "--alpha", "0.5",
                   "--phi", "10", "--out-dir", out, "--n-freq", "7",
                   "--n-tau", "31") == 0
        outs.append((out / "spectrogram.csv").read_bytes())
    assert outs[0] == outs[1]


def test_scan_round_trip_and_report(synth_dir, tmp_path, capsys):
    out = tmp_path / "scan"
    code = run("scan", "--mode", "2.732GHz", "--data",
               synth_dir / "spectrogram.csv", "--out-dir", out,
               "--n-alpha", "9", "--n-phi", "9", "--alpha-min", "0.2",
               "--alpha-max", "0.8", "--phi-min", "-30", "--phi-max", "50",
               "--no-refine")
    assert code == 0
    result = dataio.read_scan_result(out / "scan_result.json")
    report = dataio.read_json(out / "bprime_report.json")
    assert abs(result.peak.alpha - 0.5) <= result.uncertainty.d_alpha
    assert abs(result.peak.phi_deg - 10.0) <= result.uncertainty.d_phi_deg
    assert report["b_prime_MHz_per_GPa"] == pytest.approx(
        math.sqrt(2) * result.peak.alpha * -2.3)
    stdout = capsys.readouterr().out
    assert "peak SSIM" in stdout
    assert "sqrt(2)" in stdout
    dataio.validate_manifest(out / "plots.json")


def test_scan_single_point_alpha_grid_refused(synth_dir, tmp_path, capsys):
    code = run("scan", "--mode", "2.732GHz", "--data",
               synth_dir / "spectrogram.csv", "--out-dir", tmp_path,
               "--n-alpha", "1")
    assert code == 2


def test_map_strain_catalog_row(tmp_path, capsys):
    code = run("map-strain", "--catalog-row", "udvarhelyi2018",
               "--out-dir", tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    assert "lambda_b_prime" in out
    assert "warning" in out  # unprimed sign-convention note
    payload = dataio.read_json(tmp_path / "strain_susceptibilities.json")
    assert payload["lambda_b_prime"]["value"] == pytest.approx(0.64836, abs=1e-4)
    assert payload["lambda_c_prime"]["value"] == pytest.approx(-0.70156, abs=1e-4)
    assert payload["sign_convention_warning"] is True


def test_map_strain_from_json_file(tmp_path):
    sus_file = tmp_path / "sus.json"
    sus_file.write_text(json.dumps(
        {"b_prime": [-0.12, 0.01], "c_prime": {"value": 0.66, "err": 0.01},
         "source": "user"}))
    code = run("map-strain", "--susceptibilities", sus_file,
               "--out-dir", tmp_path)
    assert code == 0
    payload = dataio.read_json(tmp_path / "strain_susceptibilities.json")
    assert payload["lambda_b_prime"]["value"] == pytest.approx(0.64836, abs=1e-4)
    assert "lambda_a1" not in payload


def test_map_strain_zero_set(tmp_path):
    sus_file = tmp_path / "zero.json"
    sus_file.write_text(json.dumps({"a1": 0.0, "a2": 0.0, "b": 0.0, "c": 0.0,
                                    "b_prime": 0.0, "c_prime": 0.0}))
    assert run("map-strain", "--susceptibilities", sus_file,
               "--out-dir", tmp_path) == 0
    payload = dataio.read_json(tmp_path / "strain_susceptibilities.json")
    for key, entry in payload.items():
        if key.startswith("lambda_"):
            assert entry["value"] == 0.0


def test_map_strain_requires_input(tmp_path, capsys):
    assert run("map-strain", "--out-dir", tmp_path) == 2


def test_plot_renders_manifest(synth_dir, tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "figs"
    code = run("plot", "--manifest", synth_dir / "plots.json", "--out-dir", out)
    assert code == 0
    rendered = sorted(p.name for p in out.iterdir())
    assert "dq-spectrum.png" in rendered
    assert "synthetic-spectrogram.png" in rendered
    assert all((out / name).stat().st_size > 0 for name in rendered)


def test_plot_missing_manifest_exit_code(tmp_path, capsys):
    assert run("plot", "--manifest", tmp_path / "none.json") == 4


def test_env_override_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("NVAC_OUT_DIR", str(target))
    code = run("simulate", "--mode", "2.732GHz", "--alpha", "0",
               "--n-freq", "5", "--n-tau", "21")
    assert code == 0
    assert (target / "spectrogram.csv").exists()


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "config.json"
    out = tmp_path / "from_config"
    config.write_text(json.dumps({"out_dir": str(out), "n_freq": 5,
                                  "n_tau": 21, "alpha": 0.0}))
    code = run("simulate", "--mode", "2.732GHz", "--config", config)
    assert code == 0
    sg = dataio.read_spectrogram_csv(out / "spectrogram.csv")
    assert sg.freq_ghz.size == 5
    assert sg.tau_us.size == 21


def test_config_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"definitely_not_a_setting": 1}))
    assert run("simulate", "--mode", "2.732GHz", "--config", config) == 2


def test_custom_mode_requires_explicit_geometry(synth_dir, tmp_path, capsys):
    code = run("simulate", "--mode", "custom", "--alpha", "0",
               "--out-dir", tmp_path)
    assert code == 2
    assert "wavelength" in capsys.readouterr().err
