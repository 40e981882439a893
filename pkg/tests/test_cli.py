import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from uncertal.cli import main

BLOBS_SECTION = """
[dataset blobs]
synthetic = true
per_class = 25
mean_pos = 2, 0
mean_neg = -2, 0
cov = 1, 0, 0, 1
seed = 4
"""


def write_config(tmp_path, body):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(body)
    return str(cfg)


def run_config(tmp_path, out_name="out", extra=(), trials=2, budget=3,
               strategies="random, uncertainty"):
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = blobs
strategies = {strategies}
trials = {trials}
budget = {budget}
lambda = 100
seed = 7
out = {tmp_path / out_name}
{BLOBS_SECTION}""")
    rc = main(["--config", cfg, *extra])
    return rc, tmp_path / out_name


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_row_count_and_exit_code(tmp_path):
    rc, out = run_config(tmp_path)
    assert rc == 0
    rows = read_rows(out / "curves.csv")
    assert rows[0] == ["dataset", "strategy", "trial", "step", "accuracy"]
    assert len(rows) - 1 == 2 * 2 * 4  # strategies x trials x (budget+1)


def test_reruns_byte_identical(tmp_path):
    rc1, out1 = run_config(tmp_path, "out1")
    rc2, out2 = run_config(tmp_path, "out2")
    assert rc1 == rc2 == 0
    assert (out1 / "curves.csv").read_bytes() == (out2 / "curves.csv").read_bytes()
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
    assert (out1 / "summary.txt").read_bytes() == (out2 / "summary.txt").read_bytes()


def test_summary_matches_recomputation_from_curves(tmp_path):
    rc, out = run_config(tmp_path)
    assert rc == 0
    rows = read_rows(out / "curves.csv")[1:]
    per_cell: dict[tuple[str, str, str], list[float]] = {}
    for ds, strat, trial, _step, acc in rows:
        per_cell.setdefault((ds, strat, trial), []).append(float(acc))
    mean_alc: dict[str, list[float]] = {}
    for (_ds, strat, _trial), accs in sorted(per_cell.items()):
        mean_alc.setdefault(strat, []).append(float(np.mean(accs)))
    summary = read_rows(out / "summary.csv")
    header = summary[0]
    blob_row = next(r for r in summary if r[0] == "blobs")
    for col, strat in enumerate(header[1:], start=1):
        assert float(blob_row[col]) == pytest.approx(
            float(np.mean(mean_alc[strat])), abs=1e-12)


def test_summary_structure(tmp_path):
    rc, out = run_config(tmp_path, strategies="ueer, eer", budget=2)
    assert rc == 0
    rows = read_rows(out / "summary.csv")
    labels = [r[0] for r in rows]
    assert labels[0] == "dataset"
    assert "Mean" in labels and "Average Rank" in labels
    assert any(r[0] == "win/tie/loss" and r[1] == "ueer vs eer" for r in rows)
    txt = (out / "summary.txt").read_text()
    assert "Average Rank" in txt and "win/tie/loss" in txt


def test_manifest_round_trip_reproduces_outputs(tmp_path):
    rc, out = run_config(tmp_path, "orig")
    assert rc == 0
    rc2 = main(["--config", str(out / "manifest.txt"),
                "--out", str(tmp_path / "redo")])
    assert rc2 == 0
    for name in ("curves.csv", "summary.csv", "summary.txt"):
        assert (out / name).read_bytes() == (tmp_path / "redo" / name).read_bytes()


def test_flags_override_config(tmp_path):
    rc, out = run_config(tmp_path, "flagged", extra=["--trials", "3"])
    assert rc == 0
    rows = read_rows(out / "curves.csv")
    assert len(rows) - 1 == 2 * 3 * 4


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[experiment]
datasets = blobs
strategies = random
typo_key = 3
""" + BLOBS_SECTION)
    assert main(["--config", cfg]) == 2
    assert "typo_key" in capsys.readouterr().err


def test_unknown_section_exits_2(tmp_path):
    cfg = write_config(tmp_path, "[mystery]\nx = 1\n")
    assert main(["--config", cfg]) == 2


def test_unknown_strategy_exits_2(tmp_path):
    rc, _ = run_config(tmp_path, strategies="random, sorcery")
    assert rc == 2


def test_missing_dataset_file_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[experiment]
datasets = ghost
strategies = random
""")
    assert main(["--config", cfg]) == 2
    assert "ghost" in capsys.readouterr().err


def test_invalid_dataset_content_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,1\n2,1\n3,1\n4,1\n")  # single class
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = bad
strategies = random
trials = 2
budget = 1
out = {tmp_path / "nope"}

[dataset bad]
path = {bad}
format = csv
""")
    assert main(["--config", cfg]) == 3
    assert "bad" in capsys.readouterr().err
    assert not (tmp_path / "nope").exists()  # nothing written on failure


def test_no_partial_outputs_on_failure(tmp_path):
    # trace on a non-2-D dataset fails after config validation; the out
    # directory must stay absent
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = wdbc
strategies = uncertainty
trials = 2
budget = 2
out = {tmp_path / "never"}
trace = true
""")
    assert main(["--config", cfg]) == 3
    assert not (tmp_path / "never").exists()


def test_trace_row_count_and_determinism(tmp_path):
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = blobs
strategies = uncertainty
trials = 2
budget = 10
seed = 3
out = {tmp_path / "t1"}
{BLOBS_SECTION}""")
    assert main(["--config", cfg, "--trace"]) == 0
    rows = read_rows(tmp_path / "t1" / "trace.csv")
    assert len(rows) - 1 == 10
    assert main(["--config", cfg, "--trace", "--out", str(tmp_path / "t2")]) == 0
    assert (tmp_path / "t1" / "trace.csv").read_bytes() == \
        (tmp_path / "t2" / "trace.csv").read_bytes()


def test_trace_uncertainty_is_per_step_argmin_of_score_dump(tmp_path):
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = blobs
strategies = uncertainty
trials = 2
budget = 8
seed = 11
out = {tmp_path / "audit"}
{BLOBS_SECTION}""")
    assert main(["--config", cfg, "--trace"]) == 0
    trace = read_rows(tmp_path / "audit" / "trace.csv")[1:]
    dump = read_rows(tmp_path / "audit" / "trace_scores.csv")[1:]
    by_step: dict[str, list[list[str]]] = {}
    for row in dump:
        by_step.setdefault(row[0], []).append(row)
    for step_row in trace:
        step, x1, x2, _lab, score = step_row
        cands = by_step[step]
        min_posterior = min(float(r[5]) for r in cands)
        assert float(score) == pytest.approx(min_posterior, abs=1e-15)
        chosen = [r for r in cands
                  if (float(r[2]), float(r[3])) == (float(x1), float(x2))]
        assert chosen and float(chosen[0][5]) == pytest.approx(min_posterior)


def test_trace_needs_single_dataset_and_strategy(tmp_path):
    rc, _ = run_config(tmp_path, extra=["--trace"])
    assert rc == 2  # two strategies configured


def test_trace_on_random_strategy(tmp_path):
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = blobs
strategies = random
trials = 2
budget = 5
out = {tmp_path / "rt"}
{BLOBS_SECTION}""")
    assert main(["--config", cfg, "--trace"]) == 0
    rows = read_rows(tmp_path / "rt" / "trace.csv")
    assert len(rows) - 1 == 5
    assert all(r[4] == "" for r in rows[1:])  # no selection score exists


def test_cli_module_entrypoint_and_thread_env(tmp_path):
    cfg = write_config(tmp_path, f"""
[experiment]
datasets = blobs
strategies = random, eer
trials = 2
budget = 3
seed = 2
out = {tmp_path / "envout"}
{BLOBS_SECTION}""")
    env = dict(os.environ)
    outs = {}
    for threads, name in (("1", "a"), ("0", "b")):
        env["UNCERTAL_THREADS"] = threads
        r = subprocess.run(
            [sys.executable, "-m", "uncertal", "--config", cfg,
             "--out", str(tmp_path / name)],
            env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs[name] = (tmp_path / name / "curves.csv").read_bytes()
    assert outs["a"] == outs["b"]


def test_help_mentions_all_flags(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for flag in ("--config", "--datasets", "--strategies", "--trials",
                 "--budget", "--lambda", "--seed", "--out", "--trace"):
        assert flag in text
