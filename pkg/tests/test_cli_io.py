import csv
import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slecover import ParamError, TraceFormatError
from slecover.cli import parse_complex, parse_kappa, read_config, resolve, run_cli
from slecover.report import SCHEMAS, emit_report
from slecover.sle_sampler import SamplerConfig, sample_chordal
from slecover.traceio import read_header, read_trace, write_trace


def sampled(seed=1, kappa=8 / 3, n=200):
    return sample_chordal(SamplerConfig(kappa, 1.0 / n, 1.0, seed=seed))


# ------------------------------------------------------------------ trace files


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from([2.0, 8 / 3, 4.0, 6.0]))
def test_trace_round_trip_is_bit_exact(tmp_path_factory, seed, kappa):
    drv, tr = sampled(seed, kappa)
    path = tmp_path_factory.mktemp("rt") / "t.txt"
    write_trace(path, tr, seed=seed)
    d2, t2 = read_trace(path)
    assert d2 == drv and t2 == tr
    assert np.array_equal(t2.degenerate[1:], tr.degenerate[1:])


def test_trace_header_fields(tmp_path):
    drv, tr = sampled()
    path = tmp_path / "t.txt"
    write_trace(path, tr, seed=1, replica=3)
    head = read_header(path)
    assert head["version"] == "1" and head["replica"] == "3" and int(head["count"]) == drv.times.size
    assert float(head["kappa"]) * float(head["a"]) == 2.0


def test_truncated_trace_names_the_row(tmp_path):
    _, tr = sampled()
    path = tmp_path / "t.txt"
    write_trace(path, tr)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(TraceFormatError, match="truncated at row 196 of 201"):
        read_trace(path)


def test_cut_mid_row_names_the_row(tmp_path):
    _, tr = sampled()
    path = tmp_path / "t.txt"
    write_trace(path, tr)
    text = path.read_text()
    path.write_text(text[: text.rindex(" ")])
    with pytest.raises(TraceFormatError, match="row 200"):
        read_trace(path)


def test_corrupted_row(tmp_path):
    _, tr = sampled()
    path = tmp_path / "t.txt"
    write_trace(path, tr)
    lines = path.read_text().splitlines()
    i = next(j for j, s in enumerate(lines) if not s.startswith("#")) + 7
    lines[i] = lines[i].replace(" ", " x", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceFormatError, match="row 7"):
        read_trace(path)


@pytest.mark.parametrize("key,value,msg", [("version", "2", "version"), ("a", "0.5", "kappa\\*a")])
def test_bad_header(tmp_path, key, value, msg):
    _, tr = sampled()
    path = tmp_path / "t.txt"
    write_trace(path, tr)
    text = "\n".join(f"# {key}={value}" if s.startswith(f"# {key}=") else s for s in path.read_text().splitlines())
    path.write_text(text + "\n")
    with pytest.raises(TraceFormatError, match=msg):
        read_trace(path)


# --------------------------------------------------------------------- reports


def test_empty_report_has_header_only_and_no_svg(tmp_path):
    paths = emit_report([], "cover", tmp_path)
    assert sorted(os.path.basename(p) for p in paths) == ["cover.csv", "cover.schema.json"]
    assert (tmp_path / "cover.csv").read_text() == ",".join(c for c, _ in SCHEMAS["cover"]) + "\n"


def test_schema_matches_csv_header(tmp_path):
    rows = [{"epsilon": e, "replicas": 3, "mean_y1": 0.1, "mean_y2": 0.2, "mean_total": 0.3,
             "stderr_total": 0.01, "mean_big": 1.0, "stalled_segments": 0} for e in (0.5, 0.1, 0.02)]
    emit_report(rows, "cover", tmp_path)
    schema = json.loads((tmp_path / "cover.schema.json").read_text())
    with open(tmp_path / "cover.csv") as fh:
        header = next(csv.reader(fh))
    assert header == [c["name"] for c in schema["columns"]]
    svg = (tmp_path / "cover.svg").read_text()
    assert svg.count("<path") > 0


def test_dimension_svg_has_slope_annotation(tmp_path):
    rows = [{"kappa": 2.0, "scale": 2.0 ** -k, "count": 2 ** k, "slope": 1.0, "intercept": 0.0, "r2": 1.0,
             "expected": 1.25} for k in range(3, 7)]
    emit_report(rows, "dimension", tmp_path)
    assert "slope 1.000" in (tmp_path / "dimension.svg").read_text()


def test_report_rejects_missing_columns(tmp_path):
    with pytest.raises(ParamError):
        emit_report([{"t": 1.0}], "hcap", tmp_path)
    with pytest.raises(ParamError):
        emit_report([], "nope", tmp_path)


def test_floats_round_trip_through_csv(tmp_path):
    x = 0.1 + 0.2
    emit_report([{"t": x, "estimate": 1 / 3, "stderr": 1e-300, "expected": 0.75, "maps": 0.75}], "hcap", tmp_path)
    with open(tmp_path / "hcap.csv") as fh:
        row = list(csv.DictReader(fh))[0]
    assert float(row["t"]) == x and float(row["estimate"]) == 1 / 3 and float(row["stderr"]) == 1e-300


# ------------------------------------------------------------------ config


def test_parsers():
    assert parse_kappa("8/3") == 8 / 3
    assert parse_complex("0+1i") == 1j
    assert parse_complex("-0.5+2i") == complex(-0.5, 2)
    with pytest.raises(ParamError):
        parse_kappa("eight")


def test_precedence_defaults_config_env_flags(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nkappa = 8/3\ndt = 1e-3   # inline\nout = from_config\n")
    conf = read_config(cfg)
    p = resolve("sample", {"dt": "1e-2"}, conf, env={})
    assert p["kappa"] == 8 / 3 and p["dt"] == 1e-2 and p["out"] == "from_config" and p["t_max"] == 1.0
    p = resolve("sample", {}, conf, env={"SLECOVER_OUTPUT_DIR": "from_env"})
    assert p["out"] == "from_env"
    p = resolve("sample", {"out": "from_flag"}, conf, env={"SLECOVER_OUTPUT_DIR": "from_env"})
    assert p["out"] == "from_flag"


def test_unknown_and_bad_keys_are_named():
    with pytest.raises(ParamError, match="'colour'"):
        resolve("sample", {}, {"colour": "red"}, env={})
    with pytest.raises(ParamError, match="dt"):
        resolve("sample", {"kappa": "2", "dt": "fast"}, env={})
    with pytest.raises(ParamError, match="kappa"):
        resolve("sample", {}, env={})


# --------------------------------------------------------------------- CLI


def test_cli_sample_writes_traces_and_manifest(tmp_path):
    out = tmp_path / "o"
    rc = run_cli(["sample", "--kappa", "2", "--dt", "1e-3", "--t-max", "0.5", "--seed", "7", "--replicas", "4",
                  "--out", str(out)])
    assert rc == 0
    files = sorted(os.listdir(out))
    assert [f for f in files if f.startswith("trace_")] == [f"trace_{r:05d}.txt" for r in range(4)]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "sample" and manifest["params"]["seed"] == 7
    drv, _ = read_trace(out / "trace_00002.txt")
    assert drv == sample_chordal(SamplerConfig(2.0, 1e-3, 0.5, seed=7, replica=2))[0]


def test_cli_outputs_are_byte_identical(tmp_path):
    args = ["green-verify", "--kappa", "2", "--z", "0+1i", "--eps", "0.2,0.1", "--n", "300", "--seed", "3"]
    assert run_cli(args + ["--out", str(tmp_path / "a")]) == 0
    assert run_cli(args + ["--out", str(tmp_path / "b"), "--workers", "1"]) == 0
    for name in ("green.csv", "green.svg", "green.schema.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_worker_count_does_not_change_results(tmp_path):
    args = ["cover", "--kappa", "8/3", "--l", "2", "--m", "1", "--M", "3", "--eps", "1,0.1", "--replicas", "3",
            "--t-max", "4", "--seed", "2"]
    assert run_cli(args + ["--out", str(tmp_path / "a")]) == 0
    assert run_cli(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert (tmp_path / "a" / "cover.csv").read_bytes() == (tmp_path / "b" / "cover.csv").read_bytes()
    with open(tmp_path / "a" / "cover.csv") as fh:
        assert any(float(r["mean_total"]) > 0 for r in csv.DictReader(fh))


def test_cli_env_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SLECOVER_OUTPUT_DIR", str(tmp_path / "env"))
    assert run_cli(["hcap-check", "--kappa", "4", "--dt", "1e-2", "--walkers", "2000"]) == 0
    assert (tmp_path / "env" / "hcap.csv").exists()


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(["sample", "--kappa", "2", "--bogus", "1"]) == 2
    assert run_cli(["sample", "--kappa", "9", "--out", str(tmp_path)]) == 2
    assert "kappa" in capsys.readouterr().err
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kappa = 2\nnonsense = 1\n")
    assert run_cli(["sample", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    # a capacity horizon far too short for the flow to settle is an estimator failure
    rc = run_cli(["green-verify", "--kappa", "2", "--eps", "0.1", "--n", "50", "--t-max", "0.01",
                  "--out", str(tmp_path)])
    assert rc == 3
    assert "HORIZON" in capsys.readouterr().err
