import glob
import hashlib
import json
import os

import numpy as np
import pytest

from kickflow import PotentialField
from kickflow.cli import cmd_dump_potential, cmd_list, cmd_run, main
from kickflow.config import validate_config
from kickflow.errors import ConfigError


SMALL_RUN = {
    "experiments": ["zero_temperature_limit"],
    "potential": {"kind": "smoothed-shot-noise", "master_seed": 99},
    "grid": {"h": 0.06, "halfwidth": 5.0},
    "run": {"horizon": 7, "kappas": [0.4, 0.2], "seeds": 2},
    # a two-rung ladder can shrink the gap by at most its kappa ratio
    "tolerances": {"gap_shrink_min": 1.5},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def rows_bytes(outdir):
    files = sorted(glob.glob(os.path.join(outdir, "*.rows.csv")))
    assert files, f"no rows file in {outdir}"
    return b"".join(open(f, "rb").read() for f in files)


def test_validate_config_defaults_and_unknown_keys():
    cfg = validate_config({})
    assert cfg["experiments"] == ["all"]
    assert cfg["grid"]["h"] == 0.04
    assert cfg["run"]["seeds"] == 32
    assert cfg["tolerances"]["spearman_min"] == 0.8
    with pytest.raises(ConfigError, match="unknown key grid.spacing"):
        validate_config({"grid": {"spacing": 0.1}})
    with pytest.raises(ConfigError, match="unknown experiment"):
        validate_config({"experiments": ["warp"]})


def test_invalid_h_names_field(tmp_path, capsys):
    path = write_config(tmp_path, {"grid": {"h": -0.5}})
    code = cmd_run(path)
    assert code == 1
    assert "grid.h" in capsys.readouterr().err


def test_list_contains_experiments(capsys):
    assert cmd_list() == 0
    out = capsys.readouterr().out
    assert "zero_temperature_limit" in out
    assert "inviscid_limit" in out
    from kickflow.experiments import EXPERIMENTS
    assert f"{len(EXPERIMENTS)} experiments" in out
    names = [line.split(":")[0] for line in out.strip().splitlines()[:-1]]
    assert names == list(EXPERIMENTS)


def test_run_zero_potential_shape_exits_zero(tmp_path, capsys):
    doc = {
        "experiments": ["shape"],
        "potential": {"kind": "zero"},
        "grid": {"h": 0.05, "halfwidth": 5.0},
        "run": {"shape_n": 12, "velocities": [-0.5, 0.0, 0.5], "seeds": 2},
    }
    path = write_config(tmp_path, doc)
    outdir = str(tmp_path / "out")
    code = cmd_run(path, outdir=outdir)
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] shape:route_agreement" in out
    report = json.load(open(glob.glob(os.path.join(outdir, "*.report.json"))[0]))
    assert report["passed"] is True
    assert all(r["route_residual"] < 1e-12 for r in report["rows"])
    # defaults are materialized into the echoed config
    assert report["config"]["potential"]["level"] == 0.0


def test_rows_are_byte_identical_across_parallelism(tmp_path):
    path = write_config(tmp_path, SMALL_RUN)
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert cmd_run(path, outdir=out1, jobs=1) == 0
    assert cmd_run(path, outdir=out2, jobs=8) == 0
    assert rows_bytes(out1) == rows_bytes(out2)


def test_golden_rerun_reproduces_hash(tmp_path):
    path = write_config(tmp_path, SMALL_RUN)
    out1, out2 = str(tmp_path / "g1"), str(tmp_path / "g2")
    assert cmd_run(path, outdir=out1) == 0
    golden = hashlib.sha256(rows_bytes(out1)).hexdigest()
    assert cmd_run(path, outdir=out2) == 0
    assert hashlib.sha256(rows_bytes(out2)).hexdigest() == golden


def test_dump_potential_roundtrip(tmp_path, capsys):
    doc = {"potential": {"kind": "cosine-mixture", "master_seed": 77},
           "grid": {"h": 0.05, "halfwidth": 4.0},
           "run": {"horizon": 6}}
    path = write_config(tmp_path, doc)
    outdir = str(tmp_path / "dump")
    assert cmd_dump_potential(path, outdir=outdir) == 0
    dumped = capsys.readouterr().out.strip()
    payload = json.load(open(dumped))
    clone = PotentialField.from_json(open(dumped).read())
    from kickflow import PotentialSpec, sample_potential
    fresh = sample_potential(PotentialSpec(**payload["spec"]),
                             (0, 6), (clone.x_lo, clone.x_hi))
    xs = np.linspace(-3, 3, 50)
    for k in (0, 3, 6):
        assert np.array_equal(clone.eval(k, xs), fresh.eval(k, xs))


def test_zero_dump_has_empty_arrays(tmp_path, capsys):
    doc = {"potential": {"kind": "zero"}}
    path = write_config(tmp_path, doc)
    assert cmd_dump_potential(path, outdir=str(tmp_path / "d")) == 0
    dumped = capsys.readouterr().out.strip()
    payload = json.load(open(dumped))
    assert all(s["amps"] == [] for s in payload["slices"])


def test_env_seed_override(tmp_path, monkeypatch, capsys):
    doc = {"experiments": ["overlap"],
           "potential": {"kind": "cosine-mixture", "master_seed": 1},
           "grid": {"h": 0.08, "halfwidth": 5.0},
           "run": {"horizon": 6, "seeds": 1}}
    path = write_config(tmp_path, doc)
    monkeypatch.setenv("KICKFLOW_SEED", "4242")
    outdir = str(tmp_path / "env")
    assert cmd_run(path, outdir=outdir) == 0
    err = capsys.readouterr().err
    assert "KICKFLOW_SEED override" in err
    report = json.load(open(glob.glob(os.path.join(outdir, "*.report.json"))[0]))
    assert report["config"]["potential"]["master_seed"] == 4242


def test_main_subcommands(tmp_path, capsys):
    assert main(["list"]) == 0
    capsys.readouterr()
    bad = write_config(tmp_path, {"grid": {"h": 0}})
    assert main(["run", "-c", bad]) == 1
    missing = str(tmp_path / "nope.json")
    assert main(["run", "-c", missing]) == 1
