"""Reading human survey microdata and model generation logs.

Human responses arrive as wide CSV (one row per respondent, one column
per question id, plus ``respondent_id`` and ``weight`` columns).
Model generations arrive as append-only NDJSON logs written by the
sampler; every record keeps the raw generation verbatim so the cleaning
rules can be re-applied later without re-querying any model.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IngestError, WrongScaleKindError
from .model import (
    Catalog,
    QuestionSpec,
    ResponseRecord,
    ScaleKind,
    SimulatedSample,
    SubgroupSpec,
)

log = logging.getLogger(__name__)

RESPONDENT_COLUMN = "respondent_id"
WEIGHT_COLUMN = "weight"


# ---------------------------------------------------------------------------
# Human responses (wide CSV)
# ---------------------------------------------------------------------------


def _parse_cell(text: str, question: QuestionSpec) -> int | None:
    """Map one CSV cell to a canonical response value, or NonResponse.

    Blank cells, non-numeric content and values outside the question's
    canonical support (which is where surveys park their "don't know" /
    "no answer" codes) all become NonResponse.
    """
    text = text.strip()
    if not text:
        return None
    try:
        value = int(text)
    except ValueError:
        try:
            fractional = float(text)
        except ValueError:
            return None
        if not fractional.is_integer():
            return None
        value = int(fractional)
    return value if value in question.values else None


def parse_human_responses(path: str | Path, catalog: Catalog) -> list[ResponseRecord]:
    """Load a wide CSV of human answers into per-(respondent, question) records.

    Every known question column yields one record per row; cells that do
    not parse to an in-support integer become NonResponse records. The
    ``demographics`` mapping attached to each record covers the question
    ids referenced by the catalog's subgroup filters and is shared by all
    records of the same respondent.
    """
    questions = catalog.question_index()
    filter_qids = {cl.question for s in catalog.subgroups for cl in s.filter}
    records: list[ResponseRecord] = []
    seen_ids: set[str] = set()

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if RESPONDENT_COLUMN not in header:
            raise IngestError(f"{path}: missing {RESPONDENT_COLUMN!r} column")
        if WEIGHT_COLUMN not in header:
            raise IngestError(f"{path}: missing {WEIGHT_COLUMN!r} column")
        rid_col = header.index(RESPONDENT_COLUMN)
        weight_col = header.index(WEIGHT_COLUMN)
        question_cols = [
            (i, questions[name]) for i, name in enumerate(header) if name in questions
        ]
        unknown = [
            name
            for i, name in enumerate(header)
            if name not in questions and i not in (rid_col, weight_col)
        ]
        if unknown:
            log.warning("%s: ignoring %d unknown columns: %s", path, len(unknown), unknown[:5])

        for row_index, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"{path}: row {row_index} has {len(row)} fields, expected {len(header)}"
                )
            rid = row[rid_col].strip()
            if not rid:
                raise IngestError(f"{path}: empty respondent_id at row {row_index}")
            if rid in seen_ids:
                raise IngestError(
                    f"{path}: duplicate respondent_id {rid!r} at row {row_index}"
                )
            seen_ids.add(rid)
            try:
                weight = float(row[weight_col])
            except ValueError:
                raise IngestError(
                    f"{path}: unreadable weight {row[weight_col]!r} at row {row_index}"
                ) from None
            if weight < 0:
                raise IngestError(f"{path}: negative weight at row {row_index}")
            if weight == 0:
                raise IngestError(f"{path}: zero weight at row {row_index}")

            answers = {q.id: _parse_cell(row[i], q) for i, q in question_cols}
            demographics = {
                qid: val
                for qid, val in answers.items()
                if qid in filter_qids and val is not None
            }
            for i, q in question_cols:
                records.append(
                    ResponseRecord(
                        respondent_id=rid,
                        question_id=q.id,
                        response_value=answers[q.id],
                        weight=weight,
                        demographics=demographics,
                    )
                )
    return records


def assign_subgroups(
    records: Sequence[ResponseRecord], subgroups: Iterable[SubgroupSpec]
) -> frozenset[str]:
    """Subgroup ids whose every filter clause accepts this respondent.

    ``records`` must all belong to a single respondent; membership is a
    pure function of the shared demographics mapping, so a respondent can
    land in several subgroups (one per dimension, typically) or none.
    """
    if not records:
        raise ValueError("assign_subgroups needs at least one record")
    rid = records[0].respondent_id
    if any(r.respondent_id != rid for r in records):
        raise ValueError("assign_subgroups got records from multiple respondents")
    demographics = records[0].demographics
    return frozenset(s.id for s in subgroups if s.matches(demographics))


# ---------------------------------------------------------------------------
# Generation cleaning
# ---------------------------------------------------------------------------

_PAIR_RE = re.compile(r"^(-?\d+)\s*:\s*(.+)$", re.DOTALL)
_BARE_INT_RE = re.compile(r"^(-?\d+)\s*[.:)\]]?$")
_MARKUP_CHARS = "\"'`*_~#>|[](){}"


def _first_content_line(raw: str) -> str:
    for line in raw.splitlines():
        line = line.strip()
        if line:
            return line
    return ""


def _strip_markup(line: str) -> str:
    line = line.strip(_MARKUP_CHARS + " \t")
    if line[:2] in ("- ", "+ "):
        line = line[2:].lstrip()
    return line.rstrip(" .,;!")


def _squash(text: str) -> str:
    return " ".join(text.casefold().split())


def presented_options(
    question: QuestionSpec, flipped: bool = False
) -> tuple[tuple[int, str], ...]:
    """(value, label) pairs in the order shown to the model.

    A flipped presentation keeps the ascending values but reverses the
    label assignment, so value 1 carries the label that canonically
    belongs to the maximum value. Only ordinal scales may be flipped.
    """
    pairs = [(opt.value, opt.label) for opt in question.responses]
    if not flipped:
        return tuple(pairs)
    if question.scale is not ScaleKind.ORDINAL:
        raise WrongScaleKindError(
            f"question {question.id!r} is nominal and cannot be flipped"
        )
    labels = [label for _, label in pairs]
    return tuple((value, label) for (value, _), label in zip(pairs, labels[::-1]))


@lru_cache(maxsize=4096)
def _matcher(question: QuestionSpec, flipped: bool):
    pairs = presented_options(question, flipped)
    by_value = {v: _squash(label) for v, label in pairs}
    exact_label: dict[str, int | None] = {}
    for v, label in pairs:
        key = _squash(label)
        exact_label[key] = None if key in exact_label else v
    return by_value, exact_label, tuple(sorted(by_value))


def clean_generation(
    raw_text: str, question: QuestionSpec, flipped: bool = False
) -> int | None:
    """Map a raw generation onto the presented scale; ``None`` means Invalid.

    The rules are applied to the first non-empty line, stripped of
    surrounding whitespace and light markup, in fixed precedence order:

    1. exact ``"N: Label"`` where N and the label agree with one
       presented option,
    2. a bare in-range integer (optionally with trailing punctuation),
    3. exact label text match (case-insensitive, whitespace collapsed),
    4. a unique presented label appearing as a substring of the line.

    Anything ambiguous, out of range or unmatched is Invalid. The result
    is a *presented* value: for flipped presentations the caller still
    has to map it back with :func:`unflip_response`.
    """
    line = _strip_markup(_first_content_line(raw_text))
    if not line:
        return None
    by_value, exact_label, _ = _matcher(question, flipped)

    pair = _PAIR_RE.match(line)
    if pair:
        value = int(pair.group(1))
        if value in by_value and _squash(pair.group(2)) == by_value[value]:
            return value

    bare = _BARE_INT_RE.match(line)
    if bare:
        value = int(bare.group(1))
        return value if value in by_value else None

    squashed = _squash(line)
    if squashed in exact_label:
        return exact_label[squashed]

    hits = [v for v, label in by_value.items() if label in squashed]
    if len(hits) == 1:
        return hits[0]
    return None


def unflip_response(value: int, question: QuestionSpec, flipped: bool) -> int:
    """Map a presented-scale value back to the canonical scale.

    Unflipped presentations are the identity. A flipped presentation
    keeps the ascending values but pairs them with the labels in
    reverse, so the value at position ``i`` answered the label that
    canonically lives at position ``n - 1 - i``: reflecting the index
    undoes the flip. The reflection is its own inverse, and on evenly
    spaced scales it coincides with ``min + max - v``. Nominal scales
    are never flipped; claiming otherwise is an error.
    """
    if value not in question.values:
        raise ValueError(
            f"{value} is not on the presented scale of question {question.id!r}"
        )
    if not flipped:
        return value
    if question.scale is not ScaleKind.ORDINAL:
        raise WrongScaleKindError(
            f"question {question.id!r} is nominal and cannot have been flipped"
        )
    values = question.values
    return values[len(values) - 1 - values.index(value)]


# ---------------------------------------------------------------------------
# Simulation logs (NDJSON)
# ---------------------------------------------------------------------------

STATUS_OK = "ok"
STATUS_TRANSPORT_FAILURE = "transport_failure"


@dataclass(frozen=True, slots=True)
class RawGenerationLog:
    """One NDJSON log record exactly as the sampler wrote it."""

    model_id: str
    question_id: str
    raw_text: str
    flipped: bool
    temperature: float
    status: str = STATUS_OK
    attempt: int = 1
    sample_index: int | None = None
    timestamp: str | None = None


@dataclass
class ParsedLog:
    """Samples plus bookkeeping from one pass over a simulation log."""

    samples: list[SimulatedSample] = field(default_factory=list)
    transport_failures: int = 0
    malformed_lines: int = 0
    total_lines: int = 0


_REQUIRED_LOG_KEYS = ("model_id", "question_id", "flipped", "temperature")


def _log_record_from_line(line: str) -> RawGenerationLog | None:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict):
        return None
    if any(k not in payload for k in _REQUIRED_LOG_KEYS):
        return None
    status = payload.get("status", STATUS_OK)
    if status not in (STATUS_OK, STATUS_TRANSPORT_FAILURE):
        return None
    raw_text = payload.get("raw_text")
    if status == STATUS_OK and not isinstance(raw_text, str):
        return None
    if not isinstance(payload["flipped"], bool):
        return None
    try:
        return RawGenerationLog(
            model_id=str(payload["model_id"]),
            question_id=str(payload["question_id"]),
            raw_text=raw_text if isinstance(raw_text, str) else "",
            flipped=payload["flipped"],
            temperature=float(payload["temperature"]),
            status=status,
            attempt=int(payload.get("attempt", 1)),
            sample_index=payload.get("sample_index"),
            timestamp=payload.get("timestamp"),
        )
    except (TypeError, ValueError):
        return None


def parse_simulation_log(path: str | Path, catalog: Catalog) -> ParsedLog:
    """Read an NDJSON generation log, clean every generation, unflip ordinals.

    Malformed lines are skipped and counted (a crash mid-append must not
    poison the whole log); an unknown question id is a fatal error
    because it means the log belongs to a different catalog. Transport
    failures are counted but never become samples, so they can never
    enter a response distribution.
    """
    questions = catalog.question_index()
    result = ParsedLog()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            result.total_lines += 1
            rec = _log_record_from_line(line)
            if rec is None:
                result.malformed_lines += 1
                continue
            question = questions.get(rec.question_id)
            if question is None:
                raise IngestError(
                    f"{path}: log references unknown question {rec.question_id!r}"
                )
            if rec.status == STATUS_TRANSPORT_FAILURE:
                result.transport_failures += 1
                continue
            if rec.flipped and question.scale is not ScaleKind.ORDINAL:
                result.malformed_lines += 1
                continue
            presented = clean_generation(rec.raw_text, question, rec.flipped)
            cleaned = (
                None
                if presented is None
                else unflip_response(presented, question, rec.flipped)
            )
            result.samples.append(
                SimulatedSample(
                    model_id=rec.model_id,
                    question_id=rec.question_id,
                    raw_text=rec.raw_text,
                    flipped=rec.flipped,
                    cleaned_value=cleaned,
                    temperature=rec.temperature,
                    seed_info="" if rec.sample_index is None else f"index={rec.sample_index}",
                )
            )
    if result.malformed_lines:
        log.warning("%s: skipped %d malformed lines", path, result.malformed_lines)
    return result
