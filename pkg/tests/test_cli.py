import argparse
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from rfftrack.cli import DEFAULT_CONFIG, EXIT_CONFIG, EXIT_DATA, load_config, main
from rfftrack.density import read_grid_csv
from rfftrack.inference import load_fit_file
from rfftrack.rff_basis import PhaseRange, save_basis, sample_basis
from rfftrack.series import read_series_csv

from conftest import YEARS, make_fit, write_crime_fixture

CRIME_TYPES = ("INTERFERENCE WITH PUBLIC OFFICER", "WEAPONS VIOLATION", "PROSTITUTION", "NARCOTICS")


def small_config(tmp_path, **extra):
    cfg = {
        "synthetic": {"n_steps": 3, "n_points": 24},
        "mh": {"n_iterations": 300, "burn_in": 100, "thin": 5},
        "grid": {"resolution": 24},
    }
    for key, val in extra.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def _read(path):
    return list(csv.reader(Path(path).open()))


def test_gen_synthetic_default_counts_and_determinism(tmp_path):
    assert main(["gen-synthetic", "--out", str(tmp_path / "a")]) == 0
    assert main(["gen-synthetic", "--out", str(tmp_path / "b")]) == 0
    assert main(["gen-synthetic", "--out", str(tmp_path / "c"), "--seed", "3"]) == 0
    files = sorted((tmp_path / "a").glob("*.csv"))
    assert len(files) == 12
    for f in files:
        rows = _read(f)
        assert rows[0] == ["instance", "time", "x", "y"] and len(rows) == 10 * 200 + 1
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        other = tmp_path / "c" / f.name
        assert other.read_bytes() != f.read_bytes() and len(_read(other)) == len(rows)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert [e["label"] for e in manifest["series"]][:2] == ["Shift_1", "Shift_2"]
    assert len({e["seed"] for e in manifest["series"]}) == 12


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    root = tmp_path_factory.mktemp("fit")
    cfg = small_config(root)
    assert main(["gen-synthetic", "--config", str(cfg), "--out", str(root / "series")]) == 0
    series = sorted(str(p) for p in (root / "series").glob("*.csv"))
    assert main(["fit", "--config", str(cfg), "--out", str(root / "fits"), *series]) == 0
    return root, cfg


def test_fit_writes_one_file_per_series(fitted):
    root, _ = fitted
    fit_files = sorted((root / "fits").glob("*.fit.json"))
    assert len(fit_files) == 12
    assert (root / "fits" / "basis.json").is_file()
    weights = [f.weights for p in fit_files for f in load_fit_file(p)[1]]
    assert len(weights) == 12 * 3 and all(w.shape == (30,) for w in weights)


def test_fit_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["fit", "--out", str(tmp_path), str(missing)]) == EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_fit_workers_match_sequential(fitted, tmp_path):
    root, cfg = fitted
    src = str(root / "series" / "Converge_2.csv")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "seq"), src]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "par"), "--workers", "3", src]) == 0
    assert (tmp_path / "seq" / "Converge_2.fit.json").read_bytes() == (tmp_path / "par" / "Converge_2.fit.json").read_bytes()


def test_project_axes_and_sweep(fitted, tmp_path, capsys):
    root, cfg = fitted
    fits = sorted(str(p) for p in (root / "fits").glob("*.fit.json"))
    out = tmp_path / "proj"
    assert main(["project", "--config", str(cfg), "--out", str(out), "--axes", "3,5", "--axis-sweep", *fits]) == 0
    summary = json.loads(capsys.readouterr().out)
    rows = _read(out / "trajectory.csv")
    assert rows[0] == ["instance", "time", "pc3", "pc5"] and len(rows) == 37
    assert len(_read(out / "trajectory_Shift_1.csv")) == 4
    pgms = sorted((out / "sweep").glob("*.pgm"))
    assert len(pgms) == summary["sweep_grids"] > 0
    assert all(p.with_suffix(".csv").is_file() for p in pgms)
    assert {p.name.split("_")[0] for p in pgms} == {"pc3", "pc5"}


def test_project_default_axes(fitted, tmp_path):
    root, cfg = fitted
    fits = sorted(str(p) for p in (root / "fits").glob("*.fit.json"))
    assert main(["project", "--config", str(cfg), "--out", str(tmp_path), *fits]) == 0
    assert _read(tmp_path / "trajectory.csv")[0] == ["instance", "time", "pc1", "pc2"]


def test_project_axis_out_of_range(fitted, tmp_path):
    root, cfg = fitted
    fits = [str(root / "fits" / "Shift_1.fit.json")]
    assert main(["project", "--config", str(cfg), "--out", str(tmp_path), "--axes", "31", *fits]) == EXIT_CONFIG


def test_heatmap_contract(fitted, tmp_path, capsys):
    root, cfg = fitted
    fp = str(root / "fits" / "Converge_4.fit.json")
    assert main(["heatmap", "--config", str(cfg), "--out", str(tmp_path), fp, "--step", "1", "--step", "3"]) == 0
    assert set(json.loads(capsys.readouterr().out)["mode_counts"]) == {"1", "3"}
    xs, ys, values = read_grid_csv(tmp_path / "Converge_4_1.csv")
    assert values.shape == (24, 24)
    assert abs(values.sum() * (xs[1] - xs[0]) * (ys[1] - ys[0]) - 1) <= 1e-9
    assert (tmp_path / "Converge_4_3.pgm").read_bytes().startswith(b"P5\n24 24\n255\n")
    assert main(["heatmap", "--config", str(cfg), "--out", str(tmp_path), fp, "--step", "99"]) == EXIT_DATA


def test_heatmap_zero_weights_is_flat(tmp_path):
    basis = sample_basis(2, 30, 1.0, PhaseRange.TWO_PI, seed=1)
    save_basis(basis, tmp_path / "basis.json")
    doc = {
        "instance": "flat",
        "basis_file": "basis.json",
        "basis_ref": basis.basis_id,
        "steps": [make_fit(np.zeros(30), basis.basis_id).to_dict() | {"label": "1"}],
        "noise_box": [[-1, 1], [-1, 1]],
    }
    (tmp_path / "flat.fit.json").write_text(json.dumps(doc))
    assert main(["heatmap", "--out", str(tmp_path / "h"), "--grid-res", "16", str(tmp_path / "flat.fit.json")]) == 0
    raw = (tmp_path / "h" / "flat_1.pgm").read_bytes()
    pixels = raw[len(b"P5\n16 16\n255\n"):]
    assert len(pixels) == 256 and set(pixels) == {255}


def test_heatmap_rejects_foreign_basis(fitted, tmp_path):
    root, cfg = fitted
    other = save_basis(sample_basis(2, 30, 1.0, seed=99), tmp_path / "other.json")
    fp = str(root / "fits" / "Shift_1.fit.json")
    assert main(["heatmap", "--out", str(tmp_path), "--basis", str(other), fp]) == EXIT_DATA


def _ns(**kw):
    return argparse.Namespace(**kw)


def test_config_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 5, "mh": {"n_iterations": 111, "burn_in": 11}, "basis": {"k": 12}}))
    env = {"RFFTRACK_MH__N_ITERATIONS": "222", "RFFTRACK_BASIS__SIGMA": "0.5", "HOME": "/x"}
    cfg = load_config(_ns(config=str(path), k=20), environ=env)
    assert cfg["seed"] == 5
    assert cfg["mh"]["n_iterations"] == 222 and cfg["mh"]["burn_in"] == 11
    assert cfg["basis"]["k"] == 20 and cfg["basis"]["sigma"] == 0.5
    assert DEFAULT_CONFIG["mh"]["n_iterations"] == 20000  # defaults untouched


@pytest.mark.parametrize(
    "argv",
    [
        ["project", "--axes", "0,1", "x.fit.json"],
        ["project", "--axes", "a,b", "x.fit.json"],
        ["fit", "--sigma", "wide", "x.csv"],
        ["gen-synthetic", "--config", "/no/such/config.json"],
    ],
)
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_env_override_reaches_fit(tmp_path, monkeypatch):
    cfg = small_config(tmp_path)
    assert main(["gen-synthetic", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    monkeypatch.setenv("RFFTRACK_BASIS__K", "7")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "f"), str(tmp_path / "Shift_1.csv")]) == 0
    _, fits, _ = load_fit_file(tmp_path / "f" / "Shift_1.fit.json")
    assert fits[0].weights.shape == (7,)


def test_pipeline_manifest_is_deterministic(tmp_path):
    cfg = small_config(tmp_path)
    for name in ("r1", "r2"):
        assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    m1 = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "r2" / "manifest.json").read_text())
    assert m1["artifacts"] == m2["artifacts"]
    assert m1["seeds"] == m2["seeds"]
    listed = {a["path"] for a in m1["artifacts"]}
    on_disk = {p.relative_to(tmp_path / "r1").as_posix() for p in (tmp_path / "r1").rglob("*") if p.is_file()}
    assert on_disk - listed == {"manifest.json"}
    modes = json.loads((tmp_path / "r1" / "heatmaps" / "mode_counts.json").read_text())
    assert len(modes) == 12 and all(len(v) == 3 for v in modes.values())


def test_pipeline_crime(tmp_path):
    crime = write_crime_fixture(tmp_path / "crime.csv", per_year=200, types=CRIME_TYPES)
    cfg = small_config(tmp_path, source="crime", crime={"path": str(crime)})
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "run")]) == 0
    trajs = sorted((tmp_path / "run" / "trajectory").glob("trajectory_*.csv"))
    assert len(trajs) == 4
    assert all(len(_read(t)) == 8 for t in trajs)
    narc = read_series_csv(tmp_path / "run" / "series" / "Narcotics.csv")[0]
    assert narc.time_labels == [str(y) for y in YEARS] and len(narc.pooled()) == 1400
    assert json.loads((tmp_path / "run" / "manifest.json").read_text())["config"]["source"] == "crime"


def test_pipeline_crime_needs_path(tmp_path):
    cfg = small_config(tmp_path, source="crime")
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_pipeline_embeddings(tmp_path):
    rng = np.random.default_rng(0)
    words = {}
    for word in ("plane", "graft"):
        files = []
        for period in ("c1", "c2"):
            p = tmp_path / word / f"{period}.csv"
            p.parent.mkdir(exist_ok=True)
            np.savetxt(p, rng.standard_normal((25, 16)), delimiter=",")
            files.append(str(p))
        words[word] = files
    cfg = small_config(tmp_path, source="embeddings", embeddings={"words": words})
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "run")]) == 0
    for word in words:
        rows = _read(tmp_path / "run" / "trajectory" / f"trajectory_{word}.csv")
        assert [r[1] for r in rows[1:]] == ["c1", "c2"]


def test_ingest_commands(tmp_path, capsys):
    crime = write_crime_fixture(tmp_path / "crime.csv", per_year=200)
    assert main(["ingest-crime", str(crime), "--type", "NARCOTICS", "--out", str(tmp_path / "o"), "--norm-mode", "CenterScalePerAxis"]) == 0
    side = json.loads((tmp_path / "o" / "Narcotics.norm.json").read_text())
    assert side["mode"] == "CenterScalePerAxis" and side["skipped_rows"] == 0
    assert main(["ingest-crime", str(crime), "--type", "NARCOTICS", "--out", str(tmp_path / "o"), "--per-year", "500"]) == EXIT_DATA
    assert "2001" in capsys.readouterr().err
    assert main(["ingest-crime", str(crime), "--type", "NARCOTICS", "--out", str(tmp_path), "--years", "20x1"]) == EXIT_CONFIG
    rng = np.random.default_rng(1)
    mats = []
    for name in ("early", "late"):
        mats.append(tmp_path / f"{name}.csv")
        np.savetxt(mats[-1], rng.standard_normal((10, 5)), delimiter=",")
    assert main(["ingest-embeddings", *map(str, mats), "--label", "w", "--dim", "3", "--out", str(tmp_path / "e")]) == 0
    series = read_series_csv(tmp_path / "e" / "w.csv")[0]
    assert series.dim == 3 and series.time_labels == ["early", "late"]
    pca = json.loads((tmp_path / "e" / "w.pca.json").read_text())
    assert pca["input_dim"] == 5 and len(pca["explained_variance"]) == 3
