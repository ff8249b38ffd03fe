"""CLI wiring: stub gateways, config overrides, and end-to-end subcommands."""

from __future__ import annotations

import csv
import json

import pytest

from advswap.cli import main
from advswap.core import AttackRecord


@pytest.fixture
def workspace(tmp_path):
    lexicon = {
        "lexicon": {
            "fine": 2.0, "great": 2.0, "dreadful": -2.5, "lousy": -2.5,
        },
        "unk_token": "[UNK]",
    }
    (tmp_path / "victim.json").write_text(json.dumps(lexicon))
    (tmp_path / "synonyms.json").write_text(
        json.dumps({"fine": ["dreadful"], "great": ["lousy"]})
    )
    (tmp_path / "dataset.csv").write_text(
        "text,label\n"
        '"the movie was fine and the cast kept the story moving along nicely",pos\n'
        '"the show was great and the crew held the pacing steady for everyone there",pos\n'
        '"a dreadful slog from start to finish with nothing worth recalling at all",pos\n'
    )
    (tmp_path / "descriptor.json").write_text(
        json.dumps(
            {
                "name": "toy",
                "format": "csv",
                "text_field": "text",
                "label_field": "label",
                "label_mapping": {"neg": 0, "pos": 1},
                "num_classes": 2,
            }
        )
    )
    return tmp_path


def base_args(ws, out):
    return [
        "attack",
        "--dataset", str(ws / "dataset.csv"),
        "--descriptor", str(ws / "descriptor.json"),
        "--victim", f"stub:{ws / 'victim.json'}",
        "--llm-url", f"stub:{ws / 'synonyms.json'}",
        "--provider", "llm",
        "--out", str(out),
    ]


def test_attack_subcommand_writes_records(workspace, capsys):
    out = workspace / "records.jsonl"
    assert main(base_args(workspace, out)) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    records = [AttackRecord.from_json(l) for l in lines]
    outcomes = {r.sample_id: r.outcome for r in records}
    assert outcomes["toy-0"] == "success"
    assert outcomes["toy-1"] == "success"
    assert outcomes["toy-2"] == "skipped_already_misclassified"
    assert "success" in capsys.readouterr().out


def test_attack_flag_aliases_override_config(workspace):
    out = workspace / "records.jsonl"
    args = base_args(workspace, out) + ["--theta", "0.2", "--k", "3", "--seed", "9"]
    assert main(args) == 0
    # the config snapshot is not persisted by attack; rerun through experiment
    # to check overrides land in the report
    report_args = [
        "experiment",
        "--dataset", str(workspace / "dataset.csv"),
        "--descriptor", str(workspace / "descriptor.json"),
        "--victim", f"stub:{workspace / 'victim.json'}",
        "--llm-url", f"stub:{workspace / 'synonyms.json'}",
        "--sample-count", "3",
        "--out-dir", str(workspace / "runs"),
        "--theta", "0.2",
        "--k", "3",
    ]
    assert main(report_args) == 0
    report_file = next((workspace / "runs").glob("report-*.json"))
    config = json.loads(report_file.read_text())["config"]
    assert config["theta_max_mod_rate"] == 0.2
    assert config["k_synonyms"] == 3


def test_config_file_plus_cli_override(workspace):
    (workspace / "config.json").write_text(json.dumps({"k_synonyms": 4}))
    out = workspace / "records.jsonl"
    args = base_args(workspace, out) + ["--config", str(workspace / "config.json")]
    assert main(args) == 0


def test_grid_k_subcommand(workspace):
    args = [
        "grid-k",
        "--dataset", str(workspace / "dataset.csv"),
        "--descriptor", str(workspace / "descriptor.json"),
        "--victim", f"stub:{workspace / 'victim.json'}",
        "--llm-url", f"stub:{workspace / 'synonyms.json'}",
        "--k-values", "1,5",
        "--subsample", "3",
        "--out", str(workspace / "grid.csv"),
    ]
    assert main(args) == 0
    with open(workspace / "grid.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "accuracy", "success_rate"]
    assert len(rows) == 3


def test_judge_subcommand_with_stub(workspace, tmp_path):
    # build two record files via the attack subcommand, then judge them
    out_a = workspace / "a.jsonl"
    out_b = workspace / "b.jsonl"
    assert main(base_args(workspace, out_a)) == 0
    synonyms_b = workspace / "synonyms_b.json"
    synonyms_b.write_text(json.dumps({"fine": ["lousy"], "great": ["dreadful"]}))
    args_b = base_args(workspace, out_b)
    args_b[args_b.index(f"stub:{workspace / 'synonyms.json'}")] = f"stub:{synonyms_b}"
    assert main(args_b) == 0

    judge_reply = tmp_path / "judge.json"
    judge_reply.write_text(json.dumps({}))  # DictionaryLLM with no entries
    args = [
        "judge",
        "--records", f"sysa={out_a}", f"sysb={out_b}",
        "--llm-url", f"stub:{judge_reply}",
        "--out", str(tmp_path / "judgments.jsonl"),
    ]
    assert main(args) == 0
    lines = (tmp_path / "judgments.jsonl").read_text().splitlines()
    assert len(lines) == 6  # 2 shared samples x 3 dimensions
    assert all(json.loads(l)["rater"] == "llm_judge" for l in lines)
