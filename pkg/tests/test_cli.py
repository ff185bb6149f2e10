from __future__ import annotations

import json

from goalact.cli import main


def _generate(tmp_path, capsys, category="khop", seed=1, k=2, count=2):
    out = tmp_path / "fixtures"
    code = main(["generate", "--seed", str(seed), "--k", str(k),
                 "--count", str(count), "--category", category,
                 "--out", str(out)])
    capsys.readouterr()
    assert code == 0
    return out


def test_generate_writes_deterministic_fixtures(tmp_path, capsys):
    first = _generate(tmp_path / "a", capsys, seed=1, k=3, count=5)
    second = _generate(tmp_path / "b", capsys, seed=1, k=3, count=5)
    first_tasks = sorted((first / "tasks").glob("*.json"))
    second_tasks = sorted((second / "tasks").glob("*.json"))
    assert len(first_tasks) == 5
    assert [p.name for p in first_tasks] == [p.name for p in second_tasks]
    for a, b in zip(first_tasks, second_tasks):
        assert a.read_bytes() == b.read_bytes()


def test_run_single_task_with_oracle(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=7, k=2, count=1)
    task_file = next((fixtures / "tasks").glob("*.json"))
    out_dir = tmp_path / "run"
    code = main(["run", "--task", str(task_file), "--method", "goalact",
                 "--backend", "scripted:oracle", "--out", str(out_dir)])
    captured = capsys.readouterr()
    assert code == 0
    assert "s=1.0000" in captured.out
    assert "termination=finish" in captured.out
    assert (out_dir / "trajectories.jsonl").exists()
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["backend"] == "scripted:oracle"
    assert manifest["methods"] == ["GoalAct"]


def test_suite_reports_one_row_per_method(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=3, k=1, count=2)
    out_dir = tmp_path / "suite"
    code = main(["suite", "--fixtures", str(fixtures),
                 "--methods", "goalact,react",
                 "--backend", "scripted:oracle", "--out", str(out_dir)])
    captured = capsys.readouterr()
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert [row["method"] for row in report["rows"]] == ["GoalAct", "ReAct"]
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "report.txt").exists()
    assert (out_dir / "trajectories" / "GoalAct.jsonl").exists()
    assert (out_dir / "trajectories" / "ReAct.jsonl").exists()
    assert "GoalAct" in captured.out


def test_replay_renders_byte_identically_without_backend_calls(tmp_path,
                                                               capsys):
    fixtures = _generate(tmp_path, capsys, seed=9, k=2, count=1)
    task_file = next((fixtures / "tasks").glob("*.json"))
    out_dir = tmp_path / "run"
    main(["run", "--task", str(task_file), "--out", str(out_dir)])
    capsys.readouterr()
    log = out_dir / "trajectories.jsonl"
    assert main(["replay", "--trajectory", str(log)]) == 0
    first = capsys.readouterr().out
    assert main(["replay", "--trajectory", str(log)]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "plan revisions" in first


def test_report_command_formats(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=3, k=1, count=1)
    out_dir = tmp_path / "suite"
    main(["suite", "--fixtures", str(fixtures), "--methods", "goalact",
          "--backend", "scripted:oracle", "--out", str(out_dir)])
    capsys.readouterr()
    assert main(["report", "--results", str(out_dir), "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "Method" in text and "ALL" in text
    assert main(["report", "--results", str(out_dir / "report.json"),
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["method"] == "GoalAct"


def test_bad_configuration_exits_two(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=3, k=1, count=1)
    task_file = next((fixtures / "tasks").glob("*.json"))
    code = main(["run", "--task", str(task_file),
                 "--backend", "scripted:/no/such/rules.jsonl"])
    assert code == 2
    code = main(["run", "--task", str(tmp_path / "missing-task.json")])
    assert code == 2
    code = main(["suite", "--fixtures", str(tmp_path / "nowhere"),
                 "--methods", "goalact", "--out", str(tmp_path / "x")])
    assert code == 2
    capsys.readouterr()


def test_unmatched_scripted_rules_exit_three(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=3, k=1, count=1)
    task_file = next((fixtures / "tasks").glob("*.json"))
    rules = tmp_path / "rules.jsonl"
    rules.write_text(json.dumps({"response": "x",
                                 "substrings": ["never-present-key"]}) + "\n")
    code = main(["run", "--task", str(task_file),
                 "--backend", f"scripted:{rules}"])
    capsys.readouterr()
    assert code == 3


def test_cassette_replay_backend_through_the_cli(tmp_path, capsys):
    from goalact.backends import CassetteRecorder
    from goalact.generator import load_fixture
    from goalact.oracle import oracle_backend
    from goalact.orchestrator import RunConfig, run_task

    fixtures = _generate(tmp_path, capsys, seed=11, k=2, count=1)
    task_file = next((fixtures / "tasks").glob("*.json"))
    task, env = load_fixture(task_file)
    cassette = tmp_path / "cassette.jsonl"
    recorded = run_task(task, env, RunConfig(method="GoalAct"),
                        CassetteRecorder(oracle_backend(task), cassette))
    assert recorded.termination_reason == "finish"

    code = main(["run", "--task", str(task_file), "--method", "goalact",
                 "--backend", f"replay:{cassette}"])
    captured = capsys.readouterr()
    assert code == 0
    assert "s=1.0000" in captured.out

    # A different task has no entries in this cassette: hard miss, exit 3.
    other = _generate(tmp_path / "other", capsys, seed=12, k=2, count=1)
    other_file = next((other / "tasks").glob("*.json"))
    code = main(["run", "--task", str(other_file),
                 "--backend", f"replay:{cassette}"])
    capsys.readouterr()
    assert code == 3


def test_suite_with_jobs_flag_matches_serial(tmp_path, capsys):
    fixtures = _generate(tmp_path, capsys, seed=5, k=1, count=3)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    main(["suite", "--fixtures", str(fixtures), "--methods", "goalact",
          "--backend", "scripted:oracle", "--out", str(serial)])
    main(["suite", "--fixtures", str(fixtures), "--methods", "goalact",
          "--backend", "scripted:oracle", "--out", str(parallel),
          "--jobs", "3"])
    capsys.readouterr()
    assert (serial / "report.json").read_bytes() == \
        (parallel / "report.json").read_bytes()
    assert (serial / "trajectories" / "GoalAct.jsonl").read_bytes() == \
        (parallel / "trajectories" / "GoalAct.jsonl").read_bytes()
