import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from twingrid.cli import main
from twingrid.experiment import ExperimentReport
from twingrid.pipeline import TIMINGS_FILE

from helpers import small_config


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != TIMINGS_FILE}


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--duration", "60", "--seed", "7", "--out", str(out), "--frames"]) == 0
    return out


def test_generate_outputs(generated):
    names = set(_files(generated))
    assert {"dataset_plain.csv", "dataset_dt.csv", "manifest.json", "frames.tmf"} <= names
    man = json.loads((generated / "manifest.json").read_text())
    assert man["seed"] == 7 and man["command"] == "generate"
    assert set(man["outputs"]) == names - {"manifest.json"}
    assert "timings" in json.loads((generated / TIMINGS_FILE).read_text())
    header = (generated / "dataset_dt.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 20 + 1


def test_generate_twice_is_byte_identical(generated, tmp_path):
    assert main(["generate", "--duration", "60", "--seed", "7", "--out", str(tmp_path), "--frames"]) == 0
    assert _files(tmp_path) == _files(generated)


def test_missing_bus_is_validation_error(tmp_path, capsys):
    cfg = small_config()
    cfg["devices"][0]["bus"] = 42
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    assert main(["generate", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "devices[0].bus" in capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 3


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--duration", "5", "--out", str(blocker / "sub")]) == 3


def test_user_config_yaml(tmp_path):
    import yaml

    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(small_config(duration=10.0)))
    assert main(["generate", "--config", str(p), "--out", str(tmp_path / "o"),
                 "--delimiter", ";", "--decimal-mark", ","]) == 0
    row = (tmp_path / "o" / "dataset_plain.csv").read_text().splitlines()[1]
    assert ";" in row


def _experiment(out, *extra):
    return main(["experiment", "--duration", "60", "--models", "rf", "--trees", "5", "--folds", "3",
                 "--out", str(out), *extra])


def test_experiment_rf_only_and_deterministic(tmp_path, capsys):
    assert _experiment(tmp_path / "a") == 0
    text = capsys.readouterr().out
    assert "RF" in text and "LSTM" not in text
    assert _experiment(tmp_path / "b") == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    rep = ExperimentReport.from_dict(json.loads((tmp_path / "a" / "report.json").read_text()))
    assert {(c.model, c.features) for c in rep.cells} == {("RF", "without_dt"), ("RF", "with_dt")}


def test_experiment_structured_from_files(generated, tmp_path, capsys):
    code = main(["experiment", "--plain", str(generated / "dataset_plain.csv"), "--dt",
                 str(generated / "dataset_dt.csv"), "--models", "lstm", "--stride", "1", "--folds", "3",
                 "--holdout", "0", "--format", "structured", "--out", str(tmp_path)])
    assert code == 0
    rep = ExperimentReport.from_dict(json.loads(capsys.readouterr().out))
    assert {c.model for c in rep.cells} == {"LSTM"}


def test_experiment_bad_options(tmp_path):
    assert _experiment(tmp_path, "--epochs", "5", "--models", "lstm") == 1
    assert _experiment(tmp_path, "--folds", "1") == 1


def test_inspect(generated, tmp_path, capsys):
    out = tmp_path / "eda"
    assert main(["inspect", str(generated / "dataset_dt.csv"), "--out", str(out), "--svg"]) == 0
    pearson = (out / "pearson.csv").read_text().splitlines()
    assert "label" not in pearson[0] and "t_ms" not in pearson[0]
    assert len(pearson) == 21
    root = ET.fromstring((out / "timeseries.svg").read_text())
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 20
    stats = (out / "stats.csv").read_text().splitlines()
    assert stats[0] == "feature,mean,median,variance,iqr,constant"


def test_inspect_flags_constant_channel(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("t_ms,a,b,label\n0,1,5,0\n100,2,5,1\n200,4,5,0\n")
    assert main(["inspect", str(p), "--out", str(tmp_path / "o"), "--columns", "a"]) == 0
    out = capsys.readouterr().out
    assert "b" in out and "[constant]" in out
    assert (tmp_path / "o" / "stats.csv").read_text().splitlines()[2].endswith(",1")
    assert main(["inspect", str(p), "--out", str(tmp_path / "o"), "--columns", "zzz"]) == 1


def test_inspect_bad_file(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\nx,y\n")
    assert main(["inspect", str(p), "--out", str(tmp_path / "o")]) == 1
