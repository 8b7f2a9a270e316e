import csv
import io

import pytest

from reusable_holdout.cli import EXIT_RESOURCE, EXIT_USAGE, main, read_manifest
from reusable_holdout.experiments import SERIES

SMALL = ["--n", "120", "--d", "40", "--k", "3", "--k", "10", "--reps", "3"]


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and "," not in line)


def test_experiment_csv_schema(tmp_path):
    path = tmp_path / "run.csv"
    code, _ = run(["experiment", *SMALL, "--out", str(path)])
    assert code == 0
    raw = path.read_bytes()
    assert raw.startswith(b"k,series,mean,std,reps\r\n")
    rows = list(csv.DictReader(io.StringIO(raw.decode(), newline="")))
    assert len(rows) == 2 * len(SERIES)
    assert [r["series"] for r in rows if r["k"] == "10"] == list(SERIES)
    for r in rows:
        assert 0 <= float(r["mean"]) <= 1 and float(r["std"]) >= 0 and r["reps"] == "3"


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["experiment", *SMALL, "--seed", "7", "--out", str(path)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, text = run(["experiment", *SMALL, "--seed", "7", "--out", "-"])
    assert text.encode() == a.read_bytes()


def test_manifest_replay(tmp_path):
    first = tmp_path / "first.csv"
    argv = ["experiment", *SMALL, "--mechanism", "thresholdout", "--tau", "0.02",
            "--budget", "5", "--noise", "laplace", "--signal", "biased:4:0.3", "--seed", "3"]
    assert run([*argv, "--out", str(first)])[0] == 0
    manifest = read_manifest(str(first) + ".manifest")
    assert manifest["mechanism"] == "thresholdout" and manifest["budget"] == "5"
    assert manifest["k"] == "3 10" and manifest["signal"] == "biased:4:0.3"
    assert {"version", "started", "finished"} <= manifest.keys()
    second = tmp_path / "second.csv"
    assert run(["experiment", "--from-manifest", str(first) + ".manifest", "--out", str(second)])[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_experiment_usage_errors(tmp_path):
    assert run(["experiment", *SMALL, "--budget", "4", "--out", "-"])[0] == EXIT_USAGE
    assert run(["experiment", "--k", "99", "--d", "10", "--out", "-"])[0] == EXIT_USAGE
    assert run(["experiment", "--signal", "loud", "--out", "-"])[0] == EXIT_USAGE
    assert run(["experiment", "--from-manifest", str(tmp_path / "missing"), "--out", "-"])[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "--mechanism", "cv"])
    assert exc.value.code == EXIT_USAGE


@pytest.mark.parametrize("argv, key, want", [
    (["mi-from-dp", "--eps", "0.693147", "--n", "10"], "k_bits", 10.0),
    (["mi-from-dl", "--range", "1024", "--beta", "0.0009765625"], "k_bits", 20.0),
    (["mi-compose", "--bound", "3,0.01", "--bound", "4,0.02"], "k_bits", 7.0),
    (["mi-compose", "--bound", "3,0.01", "--bound", "4,0.02"], "beta", 0.03),
    (["dp-compose-basic", "--param", "0.1,1e-6", "--param", "0.2,1e-6"], "epsilon", 0.3),
    (["dp-compose-advanced", "--eps", "0.1", "--m", "100", "--delta-prime", "1e-6"], "epsilon", 6.30823),
    (["mi-from-dp-iid", "--eps", "0.1", "--n", "100", "--beta", "0.01"], "k_bits", 3.06951),
    (["bad-event", "--k", "3", "--beta", "0.01", "--p", "0.001"], "probability", 0.018),
    (["mcdiarmid", "--c", "0.005", "--n", "200", "--alpha", "0.1"], "probability", 0.0183156),
    (["dp-gen", "--c", "0.0025", "--n", "400", "--tau", "0.1"], "failure_probability", 0.0497871),
])
def test_bounds(argv, key, want):
    code, text = run(["bounds", *argv])
    assert code == 0
    values = parse_kv(text)
    assert values["operation"] == argv[0]
    assert float(values[key]) == pytest.approx(want, rel=1e-5)
    assert len(values[key].replace(".", "").replace("e-", "").lstrip("0")) <= 6


def test_bounds_echo_and_errors():
    code, text = run(["bounds", "mi-from-dp", "--eps", "0.5", "--n", "3"])
    assert "eps=0.5" in text and "n=3" in text
    assert run(["bounds", "mi-from-dp-iid", "--eps", "0.1", "--n", "10", "--beta", "1.5"])[0] == EXIT_USAGE


def test_mm_demo_builtin():
    code, text = run(["mm-demo", "--domain-size", "2", "--m", "4", "--tau", "0.6"])
    assert code == 0
    values = parse_kv(text)
    assert int(values["hard_count"]) <= float(values["hard_bound"])
    assert "i,a_pub,a_priv,answer,hard" in text


def test_mm_demo_constant_and_file(tmp_path):
    code, text = run(["mm-demo", "--queries", "constant"])
    assert code == 0 and parse_kv(text)["hard_count"] == "0"
    suite = tmp_path / "queries.csv"
    suite.write_text("# x\n0,1\n1,0\n")
    code, text = run(["mm-demo", "--queries", str(suite), "--m", "2", "--tau", "0.6", "--n", "20", "--seed", "1"])
    assert code == 0 and text.count("\n") >= 5
    suite.write_text("0,1,1\n")
    assert run(["mm-demo", "--queries", str(suite)])[0] == EXIT_USAGE


def test_mm_demo_resource_error(capsys):
    assert run(["mm-demo", "--domain-size", "10", "--m", "1024", "--tau", "0.3"])[0] == EXIT_RESOURCE
    assert "t=1000" in capsys.readouterr().err
    assert run(["mm-demo", "--domain-size", "1"])[0] == EXIT_USAGE


def test_sparse_demo():
    values = parse_kv(run(["sparse-demo", "--m", "3", "--analyst", "zeros"])[1])
    assert values["transcript"] == "000" and values["exhausted"] == "no" and values["ones_consumed"] == "0"
    code, text = run(["sparse-demo", "--m", "3", "--budget", "2", "--analyst", "ones"])
    values = parse_kv(text)
    assert values["transcript"] == "11" and values["exhausted"] == "yes"
    table = [line.split(",") for line in text.splitlines() if line[:1].isdigit()]
    assert [int(row[1]) for row in table] == [1, 3, 7]
    code, text = run(["sparse-demo", "--m", "6", "--budget", "2", "--seed", "4"])
    assert code == 0 and set(parse_kv(text)["transcript"]) <= {"0", "1"}
    assert run(["sparse-demo", "--m", "6", "--budget", "2", "--seed", "4"])[1] == text
