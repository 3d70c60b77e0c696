import json

import pytest

from psdio.cli import run
from psdio.io import read_csv, read_jsonl

COVER = ["--coeffs", "1,1/2", "--beta", "4", "--s", "4.5", "--t", "5", "--gamma", "40",
         "--min-r", "5", "--max-r", "25"]


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    code, out, _ = call(capsys, "--version")
    assert code == 0 and "psdio" in out


def test_ps_gen_csv(capsys):
    code, out, _ = call(capsys, "ps", "gen", "--alpha", "3/2", "--n", "5", "--format", "csv")
    rows = read_csv(out)
    assert code == 0 and [int(r["value"]) for r in rows] == [1, 2, 5, 8, 11]


def test_ps_member(capsys):
    code, out, _ = call(capsys, "ps", "member", "--alpha", "3/2", "--m", "5,6")
    recs = read_jsonl(out)
    assert recs[0]["record"] == "config"
    assert [(r["m"], r["member"], r["n"]) for r in recs[1:]] == [(5, True, 3), (6, False, None)]


def test_search_has_no_fermat_solutions(capsys):
    code, out, _ = call(capsys, "dio", "search", "--alpha", "7/2", "--coeffs", "1,1", "-N", "1000",
                        "--non-trivial-only")
    assert code == 0 and len(read_jsonl(out)) == 1


def test_search_jobs_identical(capsys):
    base = ["dio", "search", "--alpha", "3/2", "--coeffs", "1/2,1/2", "-N", "300"]
    _, one, _ = call(capsys, *base)
    _, two, _ = call(capsys, *base, "--jobs", "2")
    assert one == two


def test_count(capsys):
    code, out, _ = call(capsys, "dio", "count", "--alpha", "3/2", "--x", "2,50")
    assert [r["count"] for r in read_jsonl(out)[1:]] == [0, 183]


def test_env_solve(capsys):
    code, out, _ = call(capsys, "env", "solve", "--b", "1,1", "--q", "3,4", "--r", "5",
                        "--beta", "3.5", "--s", "1.5", "--t", "3")
    rec = read_jsonl(out)[1]
    assert code == 0 and rec["case_tag"] == "Case1" and not rec["empty"]


def test_env_critical(capsys):
    code, out, _ = call(capsys, "env", "critical", "--b", "1,1", "--Q", "1/2,3/2")
    rec = read_jsonl(out)[1]
    assert abs(float(rec["u0"]["lo"]) - 0.48807713209387168) < 1e-13


def test_cover_build_echo_and_determinism(capsys):
    code, one, _ = call(capsys, "cover", "build", *COVER)
    _, two, _ = call(capsys, "cover", "build", *COVER, "--jobs", "2")
    assert code == 0 and one == two
    cfg = read_jsonl(one)[0]
    assert cfg["resolved"]["M"] == 5 and "min_r_report" in cfg and "threshold_reference" in cfg
    assert "jobs" not in cfg


def test_cover_dim_csv(capsys):
    code, out, err = call(capsys, "cover", "dim", *COVER, "--sigma-grid", "0.5,1")
    assert code == 0 and len(read_csv(out)) == 2
    assert json.loads(err.strip().splitlines()[-1])["record"] == "config"


def test_cover_verify(capsys):
    code, out, _ = call(capsys, "cover", "verify", "--coeffs", "1,1", "--beta", "1.05", "--s", "1.3",
                        "--t", "1.6", "--gamma", "3", "--min-r", "10", "--max-r", "100",
                        "--alpha", "3/2", "-N", "100")
    statuses = {r["status"] for r in read_jsonl(out)[1:]}
    assert code == 0 and "NotCovered" not in statuses


def test_cover_logsum(capsys):
    code, out, _ = call(capsys, "cover", "logsum", "--sigma", "0.5", "--r-max", "3", "--format", "csv")
    rows = read_csv(out)
    assert float(rows[0]["lhs"]) == pytest.approx(1.2011224087864498, rel=1e-15)


@pytest.mark.parametrize("argv", [
    ["ps", "gen", "--alpha", "2", "--n", "5"],
    ["cover", "build", "--coeffs", "1,1", "--beta", "5", "--s", "4.5", "--t", "5", "--gamma", "8", "--max-r", "9"],
    ["dio", "search", "--alpha", "3/2", "--coeffs", "1,0", "-N", "10"],
    ["ps", "gen", "--alpha", "3/2"],
])
def test_usage_errors(capsys, argv):
    assert call(capsys, *argv)[0] == 2


def test_precision_ceiling(capsys, monkeypatch):
    monkeypatch.setenv("PSD_MAX_PRECISION_BITS", "64")
    code, _, err = call(capsys, "ps", "gen", "--alpha", "3.1416", "--n", "30000")
    assert code == 3 and "precision" in err


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 3/2\nn = 4\n")
    code, out, _ = call(capsys, "--config", str(cfg), "ps", "gen")
    assert code == 0 and [r["value"] for r in read_jsonl(out)[1:]] == [1, 2, 5, 8]
    code, out, _ = call(capsys, "--config", str(cfg), "ps", "gen", "--n", "2")
    assert len(read_jsonl(out)) == 3


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 3/2\nn = 4\nbogus = 1\n")
    assert call(capsys, "--config", str(cfg), "ps", "gen")[0] == 2


def test_preset_exit_status(capsys):
    code, out, err = call(capsys, "preset", "ap-abundance")
    assert code == 0 and err.startswith("PASS")
    assert read_jsonl(out)[1]["record"] == "summary"
