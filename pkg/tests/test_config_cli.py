import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from beamspot import cli
from beamspot.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ALL_CONFIGS = sorted(CONFIGS.glob("*.toml"))
SUBCOMMANDS = ("directivity", "focusing", "psd", "validate", "im-directions")


def _minimal():
    return {
        "pa": {"coeffs": [[1, 1.0, 0.0], [3, -0.1, 0.0]]},
        "arrays": [{"position_m": [0.0, 0.0], "axis_deg": 0.0, "num_antennas": 8, "spacing_wavelengths": 0.5}],
        "users": [{"position_m": [30.0, 40.0], "power_lin": 1.0}],
    }


def _small_focusing(tmp_path) -> Path:
    text = (CONFIGS / "focusing_distributed_k2.toml").read_text()
    text = text.replace("width_m = 100.0\nheight_m = 100.0", "width_m = 6.0\nheight_m = 6.0\norigin_m = [27.0, 57.0]")
    path = tmp_path / "small.toml"
    path.write_text(text)
    return path


def _rows(text: str):
    return list(csv.reader(io.StringIO(text)))


# --- configuration --------------------------------------------------------------------------


def test_bundled_configs_are_complete():
    names = {p.stem for p in ALL_CONFIGS}
    for panel in ("a_k2_n32", "b_k2_n8", "c_k3_n32", "d_k3_n8"):
        assert f"directivity_{panel}" in names
    for layout in ("distributed", "central"):
        for k in (1, 2, 3):
            assert f"focusing_{layout}_k{k}" in names


@pytest.mark.parametrize("path", ALL_CONFIGS, ids=lambda p: p.stem)
def test_bundled_configs_build_scenarios(path):
    cfg = load_config(path)
    sc = cfg.scenario()
    assert sc.num_users == len(cfg.users)


def test_unknown_key_is_named():
    data = _minimal()
    data["arrays"][0]["spacing"] = 0.1
    with pytest.raises(ConfigError, match=r"arrays\.0\.spacing"):
        parse_config(data)
    data = _minimal()
    data["carrier"] = {"frequency": 1e9}
    with pytest.raises(ConfigError, match=r"carrier\.frequency"):
        parse_config(data)


def test_missing_key_is_named():
    data = _minimal()
    del data["arrays"][0]["num_antennas"]
    with pytest.raises(ConfigError, match=r"arrays\.0\.num_antennas"):
        parse_config(data)


def test_spacing_is_exclusive():
    data = _minimal()
    data["arrays"][0]["spacing_m"] = 0.15
    with pytest.raises(ConfigError, match="arrays.0"):
        parse_config(data)


def test_user_needs_position_or_angle():
    data = _minimal()
    data["users"] = [{"power_lin": 1.0}]
    with pytest.raises(ConfigError, match="users.0"):
        parse_config(data)


def test_angle_users_sit_at_the_requested_bearing():
    data = _minimal()
    data["arrays"][0]["axis_deg"] = 30.0
    data["users"] = [{"angle_deg": 60.0, "range_m": 50.0}]
    (x, y), = parse_config(data).user_positions()
    assert np.rad2deg(np.arctan2(y, x)) == pytest.approx(90.0)
    assert np.hypot(x, y) == pytest.approx(50.0)


def test_physically_invalid_values_are_config_errors():
    data = _minimal()
    data["arrays"][0]["num_antennas"] = 0
    with pytest.raises(ConfigError):
        parse_config(data).scenario()


def test_bad_toml_is_a_config_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[carrier\nfreq_hz = 1")
    with pytest.raises(ConfigError):
        load_config(path)


# --- help and exit codes --------------------------------------------------------------------


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_every_subcommand_has_help(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([command, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "--threads" in out and command in out


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "beamspot.cli", "im-directions", "--users", "135,60"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "4 directions" in proc.stdout


def test_config_error_exit_code_names_the_key(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text((CONFIGS / "directivity_a_k2_n32.toml").read_text() + "\n[extra]\nfoo = 1\n")
    assert cli.main(["directivity", str(path)]) == cli.EXIT_CONFIG
    assert "extra" in capsys.readouterr().err


def test_missing_config_is_an_io_error(tmp_path, capsys):
    assert cli.main(["psd", str(tmp_path / "nope.toml")]) == cli.EXIT_IO
    assert "nope.toml" in capsys.readouterr().err


def test_unwritable_output_is_an_io_error(tmp_path, capsys):
    code = cli.main(["focusing", str(_small_focusing(tmp_path)), "--out", str(tmp_path / "missing" / "map")])
    assert code == cli.EXIT_IO
    assert "missing" in capsys.readouterr().err


def test_directivity_rejects_multi_array_configs(capsys):
    assert cli.main(["directivity", str(CONFIGS / "focusing_distributed_k2.toml")]) == cli.EXIT_CONFIG
    assert "per array" in capsys.readouterr().err


def test_validation_failure_exit_code(tmp_path):
    text = (CONFIGS / "validate_k1_m1_n8.toml").read_text().replace("seed = 7", "seed = 7\nin_band_tol = 1e-9\nshoulder_tol = 1e-9")
    path = tmp_path / "strict.toml"
    path.write_text(text)
    out = tmp_path / "report.json"
    assert cli.main(["validate", str(path), "--samples", str(2**16), "--out", str(out)]) == cli.EXIT_VALIDATION
    report = json.loads(out.read_text())
    assert report["passed"] is False
    assert report["regions"]["in"]["failed_bins"]


def test_validation_success(tmp_path):
    out = tmp_path / "report.json"
    code = cli.main(["validate", str(CONFIGS / "validate_k1_m1_n8.toml"), "--samples", str(2**22), "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == cli.EXIT_OK and report["passed"] is True
    assert report["num_samples"] == 2**22 and report["seed"] == 7
    first = report["bins"][0]
    assert set(first) == {"freq_hz", "region", "analytic", "empirical", "stderr", "rel_error", "passed"}


def test_threads_fall_back_to_environment(monkeypatch):
    monkeypatch.delenv("BEAMSPOT_THREADS", raising=False)
    assert cli.resolve_threads(None) == 1
    monkeypatch.setenv("BEAMSPOT_THREADS", "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv("BEAMSPOT_THREADS", "many")
    with pytest.raises(ConfigError):
        cli.resolve_threads(None)


# --- outputs --------------------------------------------------------------------------------


def test_directivity_curves_peak_at_the_users(capsys):
    assert cli.main(["directivity", str(CONFIGS / "directivity_a_k2_n32.toml")]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["theta_deg", "signal", "signal_db", "distortion3", "distortion3_db"]
    data = np.array(rows[1:], dtype=float)
    theta, sig = data[:, 0], data[:, 1]
    local = (sig[1:-1] > sig[:-2]) & (sig[1:-1] > sig[2:])
    top = theta[1:-1][local][np.argsort(sig[1:-1][local])[-2:]]
    assert sorted(top) == pytest.approx([60.0, 135.0], abs=0.1)


def test_single_user_curves_have_the_same_shape(capsys):
    assert cli.main(["directivity", str(CONFIGS / "directivity_a_k2_n32.toml"), "--users", "100", "--step-deg", "1"]) == 0
    data = np.array(_rows(capsys.readouterr().out)[1:], dtype=float)
    np.testing.assert_allclose(data[:, 3], data[:, 1], rtol=1e-12)


def test_psd_columns(capsys):
    assert cli.main(["psd", str(CONFIGS / "validate_k2_m2_n4.toml"), "--full"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0][-2:] == ["total", "total_db"]
    data = np.array(rows[1:], dtype=float)
    np.testing.assert_allclose(data[:, 5], data[:, 1] + data[:, 3], rtol=1e-6, atol=1e-6 * data[:, 5].max())


def test_psd_needs_an_observer(capsys):
    assert cli.main(["psd", str(CONFIGS / "directivity_a_k2_n32.toml")]) == cli.EXIT_CONFIG
    assert cli.main(["psd", str(CONFIGS / "directivity_a_k2_n32.toml"), "--observer", "10,20"]) == 0


def test_focusing_writes_three_files(tmp_path, capsys):
    prefix = tmp_path / "map"
    assert cli.main(["focusing", str(_small_focusing(tmp_path)), "--out", str(prefix)]) == 0
    out = capsys.readouterr().out
    assert "distortion: uniformity" in out
    for ext in (".bspt", ".csv", ".json"):
        assert (tmp_path / f"map{ext}").exists()


def test_im_directions_table(capsys):
    assert cli.main(["im-directions", "--users", "135,60,150"]) == 0
    out = capsys.readouterr().out
    assert "12 directions" in out
    assert cli.main(["im-directions", "--users", "60,60", "--strict"]) == cli.EXIT_VALIDATION
    assert cli.main(["im-directions", str(CONFIGS / "directivity_c_k3_n32.toml")]) == 0
    assert cli.main(["im-directions"]) == cli.EXIT_CONFIG


def test_reruns_are_byte_identical(tmp_path):
    small = _small_focusing(tmp_path)
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert cli.main(["directivity", str(CONFIGS / "directivity_d_k3_n8.toml"), "--out", str(d / "dir.csv")]) == 0
        assert cli.main(["psd", str(CONFIGS / "validate_k3_m4_n8.toml"), "--out", str(d / "psd.csv")]) == 0
        assert cli.main(["focusing", str(small), "--out", str(d / "map"), "--threads", "2" if run == "b" else "1"]) == 0
        assert cli.main(["validate", str(CONFIGS / "validate_k2_m2_n4.toml"), "--samples", str(2**16), "--out", str(d / "v.json")]) in (0, 1)
    for name in ("dir.csv", "psd.csv", "map.bspt", "map.csv", "map.json", "v.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
