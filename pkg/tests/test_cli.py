import json
import os

import numpy as np
import pytest

from diractail import cli


BASE_TOML = """
[run]
mass = 1.0
tau_end = 8.0
output_every = 1.0
out_dir = "{out}"

[mode]
ell = 1
m = 0.5

[grid]
n = 128

[stepping]
cfl = 0.25
ko_eps = 0.1

[initial_data]
family = "gaussian_bump"
center = 6.0
width = 2.0

[observers]
radii = [10.0]

[diagnostics]
tail_window = [4.0, 8.0]
"""


def write_cfg(tmp_path, name="run.toml", text=None, out=None):
    out = out or str(tmp_path / "out")
    path = tmp_path / name
    path.write_text((text or BASE_TOML).format(out=out.replace("\\", "/")))
    return path


def test_load_and_resolve(tmp_path):
    cfg = cli.load_config(write_cfg(tmp_path))
    assert cfg.n == 128 and cfg.ell == 1 and cfg.family == "gaussian_bump"
    assert dict(cfg.family_params)["center"] == 6.0
    assert cfg.blend_outer == (20.0, 40.0)


def test_unknown_keys_rejected(tmp_path):
    bad = BASE_TOML + "\n[grid2]\nn = 1\n"
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, "bad.toml", bad))
    bad2 = BASE_TOML.replace("n = 128", "n = 128\nwhatever = 3")
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, "bad2.toml", bad2))


def test_missing_config_is_config_error(tmp_path):
    rc = cli.main(["run", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2


def test_run_is_deterministic(tmp_path):
    path = write_cfg(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli.main(["run", "--config", str(path), "--out", str(out1)]) == 0
    assert cli.main(["run", "--config", str(path), "--out", str(out2)]) == 0
    for name in ("series.csv", "diagnostics.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert json.loads((out1 / "summary.json").read_text()) == \
        json.loads((out2 / "summary.json").read_text())


def test_manifest_roundtrip_and_rerun(tmp_path):
    path = write_cfg(tmp_path)
    out1 = tmp_path / "m1"
    cli.main(["run", "--config", str(path), "--out", str(out1)])
    man = cli.RunManifest.load(out1 / "manifest.json")
    cfg_rt = cli.RunConfig.from_dict(man.config)
    assert cfg_rt == cli.load_config(path)
    # re-running from the manifest's embedded config reproduces outputs
    out2 = tmp_path / "m2"
    cli.main(["run", "--config", str(out1 / "manifest.json"), "--out", str(out2)])
    assert (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()


def test_series_csv_shape(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "shape"
    cli.main(["run", "--config", str(path), "--out", str(out)])
    lines = (out / "series.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header[0] == "tau"
    assert any(h.startswith("re_varphi@") for h in header)
    assert "re_Psi_minus@scri" in ",".join(header)
    assert len(lines) == 10  # tau = 0..8 inclusive plus header
    diag = (out / "diagnostics.csv").read_text().strip().split("\n")
    assert diag[0].split(",")[:5] == ["tau", "Q", "flux_horizon_cum",
                                      "flux_scri_cum", "balance"]


def test_chart_dump_command(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "cd"
    assert cli.main(["chart-dump", "--config", str(path), "--out", str(out)]) == 0
    assert (out / "chart.csv").exists()


def test_convergence_flags_preasymptotic(tmp_path):
    text = BASE_TOML.replace("n = 128", "n = 64").replace("tau_end = 8.0",
                                                          "tau_end = 4.0")
    cfg = cli.load_config(write_cfg(tmp_path, "conv.toml", text))
    rep = cli.convergence_report(cfg, levels=3)
    assert len(rep["levels"]) == 3 and rep["levels"][0] == 64
    assert "pre_asymptotic" in rep
    assert len(rep["tme_residual_ratio"]) == 2
    with pytest.raises(cli.ConfigError):
        cli.convergence_report(cfg, levels=2)


def test_timeintegral_command(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "ti"
    assert cli.main(["timeintegral", "--config", str(path), "--out", str(out)]) == 0
    rep = json.loads((out / "timeintegral.json").read_text())
    assert rep["integrability_residual"] < 1e-5
    assert rep["formula_vs_direct_rel"] < 1e-2


def test_sweep_matches_serial(tmp_path):
    p1 = write_cfg(tmp_path, "a.toml", out=str(tmp_path / "sa"))
    p2 = write_cfg(tmp_path, "b.toml",
                   BASE_TOML.replace("center = 6.0", "center = 7.0"),
                   out=str(tmp_path / "sb"))
    assert cli.main(["sweep", "--config", str(p1), str(p2), "--jobs", "2"]) == 0
    ser1 = (tmp_path / "sa" / "series.csv").read_bytes()
    # serial re-run of the same config lands in the same place bit-exactly
    out_re = tmp_path / "sa_re"
    cli.main(["run", "--config", str(p1), "--out", str(out_re)])
    assert ser1 == (out_re / "series.csv").read_bytes()
