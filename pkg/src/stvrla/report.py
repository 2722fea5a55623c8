"""Plan reports, canonical JSON, and batch summaries."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Optional

from .ballots import Election, format_decimal, load_election
from .planner import DEFAULT_DELTA, AuditPlan, Pricer, plan_audit
from .risk import AsnParams
from .tabulate import DEFAULT_PRECISION, TabulationOutcome, tabulate

log = logging.getLogger(__name__)

ELECTION_SUFFIXES = {".txt", ".stv", ".json", ".blt"}
INSTANCE_COLUMNS = ["instance", "seats", "winners", "winners_verified", "asn", "strategy", "kind"]


@dataclass(frozen=True)
class Settings:
    """Everything needed to reproduce a plan, echoed into every report."""

    params: AsnParams = AsnParams()
    delta: Decimal = DEFAULT_DELTA
    precision: int = DEFAULT_PRECISION
    seats: Optional[int] = None

    def echo(self) -> dict:
        p = self.params
        return {
            "seed": p.seed,
            "risk_limit": p.risk_limit,
            "error_rate": p.error_rate,
            "reps": p.reps,
            "max_asn": p.max_sample,
            "alpha_d": p.alpha_d,
            "alpha_eps": p.alpha_eps,
            "delta": format_decimal(self.delta),
            "precision": self.precision,
        }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _round6(x) -> float:
    d = Decimal(x.numerator) / Decimal(x.denominator)
    return float(d.quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN))


def plan_report(
    election: Election,
    outcome: TabulationOutcome,
    plan: AuditPlan,
    pricer: Pricer,
    settings: Settings,
) -> dict:
    names = election.names
    assertions = []
    for a in plan.assertions:
        priced = pricer(a)
        entry = a.to_dict(election)
        entry["margin"] = _round6(priced.margin)
        entry["asn"] = priced.asn.value
        assertions.append(entry)
    return {
        "election": election.name,
        "ballots": election.total_ballots,
        "seats": election.seats,
        "quota": election.quota,
        "winners": names(outcome.winners),
        "first_round_winners": names(w for w in outcome.winners if w in outcome.first_round_winners),
        "reported_transfer_values": {
            election.name_of(c): format_decimal(v)
            for c, v in sorted(outcome.reported_transfer_values.items())
        },
        "tie_occurred": outcome.tie_occurred,
        "strategy": plan.strategy,
        "kind": plan.kind,
        "verified_winners": names(w for w in outcome.winners if w in plan.verified_winners),
        "asn": plan.asn.value,
        "assertions": assertions,
        "parameters": settings.echo(),
    }


def audit_election(election: Election, settings: Settings) -> tuple:
    """Tabulate and plan one election; returns (outcome, plan, report dict)."""
    outcome = tabulate(election, settings.precision)
    pricer = Pricer(election, settings.params)
    plan = plan_audit(election, outcome, settings.params, settings.delta, pricer)
    return outcome, plan, plan_report(election, outcome, plan, pricer, settings)


@dataclass(frozen=True)
class BatchSummaryRow:
    seats: int
    winners_verified: int
    instance_count: int
    instance_pct: float
    asn_avg: Optional[float]
    asn_min: Optional[int]
    asn_max: Optional[int]


def summarize(instances: list) -> list:
    """Group per-instance rows by (seats, winners verified), in the style of a results table."""
    totals: dict = defaultdict(int)
    groups: dict = defaultdict(list)
    for row in instances:
        totals[row["seats"]] += 1
        groups[(row["seats"], row["winners_verified"])].append(row)
    out = []
    for (seats, verified), rows in sorted(groups.items()):
        asns = [r["asn"] for r in rows if verified > 0 and r["asn"] is not None]
        out.append(
            BatchSummaryRow(
                seats=seats,
                winners_verified=verified,
                instance_count=len(rows),
                instance_pct=round(100 * len(rows) / totals[seats], 1),
                asn_avg=round(sum(asns) / len(asns), 1) if asns else None,
                asn_min=min(asns) if asns else None,
                asn_max=max(asns) if asns else None,
            )
        )
    return out


def _csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row.get(k) is None else row[k] for k in columns})
    return buf.getvalue()


def instances_csv(instances: list) -> str:
    return _csv(instances, INSTANCE_COLUMNS)


def summary_csv(summary: list) -> str:
    rows = [asdict(r) for r in summary]
    columns = list(BatchSummaryRow.__dataclass_fields__)
    return _csv(rows, columns)


def election_files(directory) -> list:
    return sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in ELECTION_SUFFIXES
    )


def run_instance(path, settings: Settings) -> dict:
    """Plan one election file. Never raises: failures come back as an ``error`` entry."""
    path = Path(path)
    try:
        election = load_election(path, settings.seats)
        outcome, plan, report = audit_election(election, settings)
    except Exception as e:  # noqa: BLE001 - batch must survive any bad file
        log.warning("%s: %s", path.name, e)
        return {"instance": path.stem, "error": f"{type(e).__name__}: {e}"}
    row = {
        "instance": path.stem,
        "seats": election.seats,
        "winners": len(outcome.winners),
        "winners_verified": len(plan.verified_winners),
        "asn": plan.asn.value if plan.verified_winners else None,
        "strategy": plan.strategy,
        "kind": plan.kind,
    }
    return {"instance": path.stem, "row": row, "report": report}


def run_batch(directory, settings: Settings, jobs: int = 1) -> list:
    """Plan every election file in ``directory``; results in sorted file order."""
    files = election_files(directory)
    if jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_instance, files, [settings] * len(files)))
    return [run_instance(f, settings) for f in files]


def write_batch(results: list, out_dir, summary_path=None) -> dict:
    out_dir = Path(out_dir)
    plans = out_dir / "plans"
    plans.mkdir(parents=True, exist_ok=True)
    rows = []
    failures = []
    for r in results:
        if "error" in r:
            failures.append(r)
            continue
        rows.append(r["row"])
        (plans / f"{r['instance']}.json").write_text(canonical_json(r["report"]), encoding="utf-8")
    summary = summarize(rows)
    (out_dir / "instances.csv").write_text(instances_csv(rows), encoding="utf-8")
    summary_file = Path(summary_path) if summary_path else out_dir / "summary.csv"
    summary_file.parent.mkdir(parents=True, exist_ok=True)
    summary_file.write_text(summary_csv(summary), encoding="utf-8")
    if failures:
        (out_dir / "failures.csv").write_text(_csv(failures, ["instance", "error"]), encoding="utf-8")
    return {"rows": rows, "summary": summary, "failures": failures}
