import csv
import io
import json
import shutil

import pytest

from stvrla.ballots import load_election
from stvrla.report import (
    INSTANCE_COLUMNS,
    BatchSummaryRow,
    Settings,
    audit_election,
    canonical_json,
    instances_csv,
    run_batch,
    summarize,
    summary_csv,
    write_batch,
)
from stvrla.risk import AsnParams

from conftest import CORPUS, DATA


def test_table1_report_matches_golden():
    _, plan, report = audit_election(load_election(CORPUS / "table1.txt"), Settings())
    assert plan.kind == "Full"
    assert sorted(report["verified_winners"]) == ["A", "C", "E"]
    assert canonical_json(report) == (DATA / "table1_audit.json").read_text(encoding="utf-8")


def test_report_fields(table1):
    _, plan, report = audit_election(table1, Settings())
    assert report["quota"] == 308
    assert report["winners"] == ["C", "E", "A"]
    assert report["first_round_winners"] == ["C", "E"]
    assert report["asn"] == max(a["asn"] for a in report["assertions"])
    assert len(report["assertions"]) == len(plan.assertions)
    assert all(a["margin"] > 0 for a in report["assertions"])


def test_parameter_echo_defaults(table1):
    echo = Settings().echo()
    assert echo["risk_limit"] == 0.05
    assert echo["error_rate"] == 0.002
    assert echo["reps"] == 20
    assert echo["delta"] == "0.005"
    assert set(echo) >= {"seed", "max_asn", "precision"}


def test_echo_reproduces_report(table1):
    settings = Settings(params=AsnParams(seed=7), precision=4)
    _, _, first = audit_election(table1, settings)
    e = first["parameters"]
    again = Settings(
        params=AsnParams(
            seed=e["seed"], risk_limit=e["risk_limit"], error_rate=e["error_rate"],
            reps=e["reps"], max_sample=e["max_asn"], alpha_d=e["alpha_d"], alpha_eps=e["alpha_eps"],
        ),
        precision=e["precision"],
    )
    assert canonical_json(audit_election(table1, again)[2]) == canonical_json(first)


def test_canonical_json_is_sorted_and_stable():
    text = canonical_json({"b": 1, "a": [1, 2]})
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")
    assert json.loads(text) == {"a": [1, 2], "b": 1}


def rows(spec):
    return [
        {"instance": f"i{k}", "seats": s, "winners": s, "winners_verified": v, "asn": a, "strategy": "x", "kind": "k"}
        for k, (s, v, a) in enumerate(spec)
    ]


def test_summary_arithmetic():
    data = rows([(3, 3, 100), (3, 3, 300), (3, 1, 50), (3, 0, None), (4, 2, 10)])
    summary = summarize(data)
    assert [(r.seats, r.winners_verified) for r in summary] == [(3, 0), (3, 1), (3, 3), (4, 2)]
    for seats in (3, 4):
        group = [r for r in summary if r.seats == seats]
        assert sum(r.instance_count for r in group) == sum(1 for d in data if d["seats"] == seats)
    full = summary[2]
    assert full == BatchSummaryRow(3, 3, 2, 50.0, 200.0, 100, 300)
    assert summary[0].asn_avg is None
    for r in summary:
        if r.asn_avg is not None:
            assert r.asn_min <= r.asn_avg <= r.asn_max


def test_csv_columns():
    text = instances_csv(rows([(3, 2, 99)]))
    reader = csv.DictReader(io.StringIO(text))
    assert reader.fieldnames == INSTANCE_COLUMNS
    assert next(reader)["asn"] == "99"
    head = summary_csv([]).strip()
    assert head == "seats,winners_verified,instance_count,instance_pct,asn_avg,asn_min,asn_max"


@pytest.fixture
def small_dir(tmp_path):
    shutil.copy(CORPUS / "table1.txt", tmp_path / "table1.txt")
    (tmp_path / "tiny.txt").write_text("candidates: A,B,C\nseats: 1\n700 : A\n200 : B,C\n100 : C\n")
    (tmp_path / "broken.txt").write_text("candidates: A,B\nseats: 1\n3 : Z\n")
    (tmp_path / "notes.md").write_text("ignored")
    return tmp_path


def test_batch_counts_failures_and_continues(small_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    results = run_batch(small_dir, Settings())
    assert [r["instance"] for r in results] == ["broken", "table1", "tiny"]
    written = write_batch(results, out)
    assert [f["instance"] for f in written["failures"]] == ["broken"]
    assert (out / "failures.csv").exists()
    assert sorted(p.name for p in (out / "plans").iterdir()) == ["table1.json", "tiny.json"]
    lines = (out / "instances.csv").read_text().splitlines()
    assert len(lines) == 3
    assert sum(r.instance_count for r in written["summary"]) == 2


def test_empty_batch(tmp_path):
    written = write_batch(run_batch(tmp_path, Settings()), tmp_path / "out")
    assert written["summary"] == []
    assert (tmp_path / "out" / "summary.csv").read_text().count("\n") == 1
