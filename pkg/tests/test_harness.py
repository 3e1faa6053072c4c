import json
from pathlib import Path

import pytest

from lerwtorus.harness import ConfigError, ExperimentConfig, load_config, load_record, parse_config, run
from lerwtorus.harness.cli import main
from lerwtorus.harness.config import KINDS, THREADS_ENV
from lerwtorus.harness.report import render, report

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "lerw-torus-mean": "d = 3\nn_list = 4,6,8\nreplicas = 40\nband_slope_lo = 1\nband_slope_hi = 2.5\nband_r2_min = 0.9",
    "lerw-torus-tail": "d = 3\nn_list = 6\nreplicas = 400\nband_tail_r2 = 0.5\nband_lower = 100",
    "complete-graph-law": "n_list = 200\nreplicas = 3000\nband_tv = 0.2\nband_ks = 0.1",
    "alpha-laplacian": "alpha = 1,2\nn_list = 100,1000\nreplicas = 200\nband_alpha_tol = 0.2",
    "cut-times": "d = 3\nn_list = 8,10\nreplicas = 50",
    "f-property": "d = 5\nn_list = 8\nr = 1\nmax_i = 2\nreplicas = 40",
    "stopping-times": "d = 4\nn_list = 8\nr = 1\ncycles = 3\nreplicas = 30\nlambda_grid = 1,2",
    "appendix-checks": "d = 3\nn_list = 6\nr = 1\nstarts = 3\nreplicas = 10\nexit_dim = 2\n"
                       "exit_radii = 3,6\nexit_samples = 4000\nexit_chunk = 1000",
    "d4-correction": "d = 4\nn_list = 4,6\nreplicas = 20",
    "oracle-check": "replicas = 5000\nband_tv = 0.05",
}


def small_config(kind, tmp_path, seed=1, **overrides):
    text = f"experiment = {kind}\nseed = {seed}\nout = {tmp_path / (kind + '.jsonl')}\n" + SMALL[kind]
    cfg = parse_config(text)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg.validate()


# ---------------------------------------------------------------- config

def test_all_shipped_configs_validate():
    names = sorted(p.stem for p in CONFIGS.glob("*.conf"))
    assert names == sorted(KINDS)
    for path in CONFIGS.glob("*.conf"):
        cfg = load_config(path)
        assert cfg.experiment == path.stem


def test_parse_types_and_comments():
    cfg = parse_config("experiment = cut-times  # trailing\n# whole line\n\nn_list = 8, 12\n"
                       "replicas = 1e3\nr = 3/2, 2\nband_var_factor = 10\nalpha = 0.5,1\n")
    assert cfg.n_list == (8, 12) and cfg.replicas == 1000 and cfg.r == ("3/2", "2")
    assert cfg.bands == {"var_factor": 10.0} and cfg.alpha == (0.5, 1.0)


@pytest.mark.parametrize("text, message", [
    ("experiment = cut-times\nbogus = 1", "unknown key"),
    ("experiment = cut-times\nd = 3\nd = 4", "duplicate"),
    ("experiment = cut-times\nreplicas = 0", "replicas"),
    ("experiment = nope", "unknown experiment"),
    ("d = 3", "missing"),
    ("experiment = cut-times\nreplicas = 2.5", "bad value"),
    ("experiment = cut-times\nlambda_grid = 2,1", "increasing"),
    ("experiment = alpha-laplacian\nalpha = 0", "alpha"),
    ("experiment = stopping-times\nn_list = 16\nr = 4", "N/8"),
    ("experiment = d4-correction\nd = 5", "d = 4"),
    ("experiment = appendix-checks\nn_list = 6\nr = 4", "wraps"),
    ("experiment = cut-times\nseed = -1", "seed"),
    ("experiment = cut-times\njust words", "key = value"),
])
def test_parse_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_threads_from_env_and_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert parse_config("experiment = cut-times").threads == 3
    assert parse_config("experiment = cut-times\nthreads = 2").threads == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        parse_config("experiment = cut-times")
    monkeypatch.delenv(THREADS_ENV)
    path = tmp_path / "c.conf"
    path.write_text("experiment = cut-times\n")
    assert load_config(path, threads=4, out="x.jsonl").threads == 4
    with pytest.raises(ConfigError):
        load_config(path, nonsense=1)


def test_hash_ignores_threads_and_out():
    a = parse_config("experiment = cut-times\nthreads = 1\nout = a.jsonl")
    b = parse_config("experiment = cut-times\nthreads = 4\nout = b.jsonl")
    c = parse_config("experiment = cut-times\nseed = 1")
    assert a.hash() == b.hash() != c.hash()


# ---------------------------------------------------------------- run

@pytest.mark.parametrize("kind", KINDS)
def test_every_experiment_runs(kind, tmp_path):
    cfg = small_config(kind, tmp_path)
    record = run(cfg)
    assert record.complete and record.replicas
    assert "checks" in record.summary
    reloaded, _ = load_record(cfg.out)
    assert reloaded.summary == record.summary
    assert Path(cfg.out + ".summary.csv").exists()
    assert "started" in json.loads(Path(cfg.out + ".times.json").read_text())
    text = render(reloaded)
    assert f"experiment   {kind}" in text


def test_mean_summary_has_fit(tmp_path):
    record = run(small_config("lerw-torus-mean", tmp_path))
    fit = record.summary["fit"]
    assert set(fit) >= {"slope", "intercept", "stderr", "r_squared", "points"}
    assert fit["points"] == 3


def test_identical_configs_give_identical_records(tmp_path):
    a = small_config("lerw-torus-tail", tmp_path / "a")
    b = small_config("lerw-torus-tail", tmp_path / "b")
    run(a)
    run(b)
    assert Path(a.out).read_bytes() == Path(b.out).read_bytes()
    c = small_config("lerw-torus-tail", tmp_path / "c", seed=2)
    run(c)
    assert Path(a.out).read_bytes() != Path(c.out).read_bytes()


def test_thread_count_does_not_change_results(tmp_path):
    a = small_config("cut-times", tmp_path / "a")
    b = small_config("cut-times", tmp_path / "b", threads=3)
    run(a)
    run(b)
    assert Path(a.out).read_bytes() == Path(b.out).read_bytes()


def test_resume_equals_uninterrupted(tmp_path):
    full = small_config("lerw-torus-mean", tmp_path / "full")
    run(full)
    part = small_config("lerw-torus-mean", tmp_path / "part")
    first = run(part, stop_after=37)
    assert not first.complete and len(first.replicas) == 37
    assert "checkpoint" in json.loads(Path(part.out + ".times.json").read_text())
    second = run(part, threads=2)
    assert second.complete
    assert Path(part.out).read_bytes() == Path(full.out).read_bytes()
    # a complete record is left alone
    assert run(part).summary == second.summary


def test_resume_after_torn_line(tmp_path):
    full = small_config("cut-times", tmp_path / "full")
    run(full)
    part = small_config("cut-times", tmp_path / "part")
    run(part, stop_after=20)
    with open(part.out, "a") as fh:
        fh.write('{"record":"replica","index":20,"ta')
    with pytest.raises(OSError, match="byte offset"):
        load_record(part.out)
    record, good = load_record(part.out, strict=False)
    assert len(record.replicas) == 20 and good < Path(part.out).stat().st_size
    run(part)
    assert Path(part.out).read_bytes() == Path(full.out).read_bytes()


def test_hash_mismatch_refused(tmp_path):
    cfg = small_config("cut-times", tmp_path)
    run(cfg, stop_after=5)
    other = small_config("cut-times", tmp_path, seed=9)
    with pytest.raises(ConfigError, match="hash"):
        run(other)


# ---------------------------------------------------------------- report and CLI

def test_report_complete_graph_law(tmp_path, capsys):
    cfg = small_config("complete-graph-law", tmp_path)
    run(cfg)
    assert main(["report", cfg.out]) == 0
    out = capsys.readouterr().out
    assert "tv" in out and "ks" in out and "[checks]" in out


def test_report_empty_record(tmp_path, capsys):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert main(["report", str(path)]) == 0
    assert "(empty table)" in capsys.readouterr().out


def test_report_corrupt_record(tmp_path, capsys):
    cfg = small_config("cut-times", tmp_path)
    run(cfg)
    data = Path(cfg.out).read_bytes()
    lines = data.split(b"\n")
    offset = len(lines[0]) + 1 + len(lines[1]) + 1
    Path(cfg.out).write_bytes(data[:offset] + b"{not json}\n" + data[offset:])
    assert main(["report", cfg.out]) == 2
    assert f"byte offset {offset}" in capsys.readouterr().err


def test_report_svg_one_file_per_curve(tmp_path, capsys):
    cfg = small_config("lerw-torus-tail", tmp_path)
    record = run(cfg)
    text, files = report(cfg.out, tmp_path / "svg")
    from lerwtorus.harness.report import find_curves, find_fits
    assert len(files) == len(find_curves(record.summary)) + len(find_fits(record.summary)) > 0
    assert all(f.read_text().lstrip().startswith("<?xml") for f in files)
    assert main(["report", cfg.out, "--svg", str(tmp_path / "svg2")]) == 0
    assert len(list((tmp_path / "svg2").glob("*.svg"))) == len(files)


def test_cli_run_and_exit_codes(tmp_path, capsys):
    conf = tmp_path / "c.conf"
    conf.write_text("experiment = cut-times\nd = 3\nn_list = 8\nreplicas = 10\n")
    out = tmp_path / "r.jsonl"
    assert main(["run", str(conf), "--out", str(out), "--threads", "2"]) == 0
    assert out.exists()
    bad = tmp_path / "bad.conf"
    bad.write_text("experiment = cut-times\nreplicas = 0\n")
    assert main(["run", str(bad)]) == 1
    assert main(["run", str(tmp_path / "missing.conf")]) == 2
    assert main(["report", str(tmp_path / "missing.jsonl")]) == 2
    blocked = tmp_path / "file"
    blocked.write_text("")
    assert main(["run", str(conf), "--out", str(blocked / "r.jsonl")]) == 2


def test_cli_oracle_check(tmp_path, capsys):
    out = tmp_path / "o.jsonl"
    assert main(["oracle-check", "--samples", "20000", "--seed", "3", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "complete_graph_convention" in text and out.exists()


def test_explicit_config_object(tmp_path):
    cfg = ExperimentConfig("oracle-check", replicas=1000, out=str(tmp_path / "o.jsonl"))
    record = run(cfg.validate())
    assert record.summary["checks"]["complete_graph_convention"] is True
