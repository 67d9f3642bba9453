"""Scoring and aggregation for section-id retrieval.

Precision is the share of answered ids that are correct, recall the
share of required ids that were answered, F1 their harmonic mean (zero
when both are zero). Aggregation reports arithmetic means with
population standard deviations per subpart and overall.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyInput, EmptyTruth
from .sections import SectionId, parse_section_id

logger = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f1")


@dataclass
class QuestionRecord:
    question: str
    truth: set[SectionId]
    subpart: str

    def __post_init__(self):
        if not self.truth:
            raise EmptyTruth(f"question {self.question!r} has no ground truth")


@dataclass
class ScoreRow:
    precision: float
    recall: float
    f1: float
    answered: set[SectionId]
    truth: set[SectionId]


def _canonicalize(ids) -> set[SectionId]:
    out = set()
    for value in ids:
        if isinstance(value, SectionId):
            out.add(parse_section_id(value.canonical_text))
        else:
            out.add(parse_section_id(str(value)))
    return out


def score(answered, truth) -> ScoreRow:
    """Precision/recall/F1 of answered section ids against the truth set.

    Ids are re-canonicalized before comparison; an empty answer scores
    0/0/0 by convention.
    """
    truth_set = _canonicalize(truth)
    if not truth_set:
        raise EmptyTruth("truth set is empty")
    answered_set = _canonicalize(answered)
    if not answered_set:
        return ScoreRow(0.0, 0.0, 0.0, answered_set, truth_set)
    correct = len(answered_set & truth_set)
    precision = correct / len(answered_set)
    recall = correct / len(truth_set)
    if precision + recall == 0:
        f1 = 0.0
    elif precision == recall:
        f1 = precision  # harmonic mean of equals, computed exactly
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ScoreRow(precision, recall, f1, answered_set, truth_set)


def _mean_sd(values: list[float]) -> tuple[float, float]:
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(variance)


def aggregate(rows: list[tuple[str, ScoreRow]]) -> dict:
    """Per-subpart and overall mean plus population SD for each metric."""
    if not rows:
        raise EmptyInput("no score rows to aggregate")
    groups: dict[str, list[ScoreRow]] = {}
    for subpart, row in rows:
        groups.setdefault(subpart, []).append(row)

    def stats(score_rows: list[ScoreRow]) -> dict:
        out = {"n": len(score_rows)}
        for metric in METRICS:
            mean, sd = _mean_sd([getattr(r, metric) for r in score_rows])
            out[metric] = {"mean": mean, "sd": sd}
        return out

    return {
        "subparts": {name: stats(group)
                     for name, group in sorted(groups.items())},
        "overall": stats([row for _, row in rows]),
        "sd_kind": "population",
    }


def _cell(entry: dict) -> str:
    return f"{entry['mean'] * 100:.1f}% ({entry['sd']:.3f})"


def render_markdown(report: dict) -> str:
    """Report layout: one row per subpart plus overall, each metric as
    mean with SD in parentheses."""
    lines = [
        "| Subpart | n | P | R | F1 |",
        "| --- | --- | --- | --- | --- |",
    ]
    for name, stats in report["subparts"].items():
        lines.append(
            f"| {name} | {stats['n']} | {_cell(stats['precision'])} "
            f"| {_cell(stats['recall'])} | {_cell(stats['f1'])} |")
    overall = report["overall"]
    lines.append(
        f"| Overall | {overall['n']} | {_cell(overall['precision'])} "
        f"| {_cell(overall['recall'])} | {_cell(overall['f1'])} |")
    lines.append("")
    lines.append(f"Standard deviations are {report['sd_kind']}.")
    return "\n".join(lines) + "\n"


def load_questions(path: str | Path) -> list[QuestionRecord]:
    """Question-set CSV: question, truth_ids (semicolon-separated), subpart."""
    records: list[QuestionRecord] = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"question", "truth_ids", "subpart"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(
                f"question CSV must have columns {sorted(required)}, "
                f"got {reader.fieldnames}")
        for line_number, row in enumerate(reader, start=2):
            truth = {
                parse_section_id(part)
                for part in row["truth_ids"].split(";") if part.strip()
            }
            if not truth:
                raise EmptyTruth(f"line {line_number}: no truth ids")
            records.append(QuestionRecord(row["question"].strip(), truth,
                                          row["subpart"].strip()))
    if not records:
        raise EmptyInput(f"no questions in {path}")
    return records


@dataclass
class EvalRow:
    index: int
    question: str
    subpart: str
    truth: set[SectionId]
    answered: set[SectionId]
    precision: float
    recall: float
    f1: float
    failed: bool = False
    error: str | None = None
    trace: dict | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "question": self.question,
            "subpart": self.subpart,
            "truth": sorted(s.canonical_text for s in self.truth),
            "answered": sorted(s.canonical_text for s in self.answered),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "failed": self.failed,
            "error": self.error,
            "trace": self.trace,
        }


@dataclass
class EvalResult:
    rows: list[EvalRow]
    report: dict

    def markdown(self) -> str:
        return render_markdown(self.report)


def run_eval(questions: list[QuestionRecord], engine,
             out_dir: str | Path | None = None) -> EvalResult:
    """Answer every question, score the cited section ids, aggregate.

    Engine failures score 0/0/0 and are flagged; the run always
    completes. With ``out_dir`` set, writes report.md, report.json,
    per-question log JSONL (with full traces), and a raw CSV for
    external statistics tooling.
    """
    if not questions:
        raise EmptyInput("empty question list")
    rows: list[EvalRow] = []
    for index, record in enumerate(questions):
        try:
            answer = engine.answer_question(record.question)
            answered = {ref.section_id for ref in answer.references}
            scored = score(answered, record.truth)
            rows.append(EvalRow(
                index, record.question, record.subpart, scored.truth,
                scored.answered, scored.precision, scored.recall, scored.f1,
                trace=answer.trace.to_dict()))
        except Exception as exc:
            logger.error("question %d failed: %s", index, exc)
            rows.append(EvalRow(
                index, record.question, record.subpart, record.truth, set(),
                0.0, 0.0, 0.0, failed=True, error=str(exc)))
    report = aggregate([(row.subpart, ScoreRow(
        row.precision, row.recall, row.f1, row.answered, row.truth))
        for row in rows])
    report["failed_questions"] = [row.index for row in rows if row.failed]
    result = EvalResult(rows, report)
    if out_dir is not None:
        _write_outputs(result, Path(out_dir))
    return result


def _write_outputs(result: EvalResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text(result.markdown(), encoding="utf-8")
    (out_dir / "report.json").write_text(
        json.dumps(result.report, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    with (out_dir / "questions.jsonl").open("w", encoding="utf-8") as handle:
        for row in result.rows:
            handle.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")
    with (out_dir / "per_question.csv").open("w", newline="",
                                             encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "subpart", "precision", "recall", "f1",
                         "failed"])
        for row in result.rows:
            writer.writerow([row.index, row.subpart, row.precision,
                             row.recall, row.f1, int(row.failed)])
