"""Shared fixtures: a small opinion-survey catalog and a hand-built panel."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from repsuite import (
    Catalog,
    FilterClause,
    QuestionSpec,
    ResponseDistribution,
    ResponseOption,
    ResponseRecord,
    ScaleKind,
    SimulatedSample,
    SubgroupSpec,
)

AGREE_LABELS = ["Agree strongly", "Agree", "Disagree", "Strongly disagree"]


def ordinal_question(qid, n_options, topic="general", start=1, text=None):
    return QuestionSpec(
        id=qid,
        text=text or f"How strongly do you feel about statement {qid}?",
        topic=topic,
        scale=ScaleKind.ORDINAL,
        responses=tuple(
            ResponseOption(value=start + i, label=f"Level {start + i}")
            for i in range(n_options)
        ),
    )


def agree_question(qid="Q_TRUST", topic="community"):
    return QuestionSpec(
        id=qid,
        text="Most people can be trusted.",
        topic=topic,
        scale=ScaleKind.ORDINAL,
        responses=tuple(
            ResponseOption(value=i + 1, label=label)
            for i, label in enumerate(AGREE_LABELS)
        ),
    )


def color_question(qid="Q_COLOR"):
    return QuestionSpec(
        id=qid,
        text="Which colour do you prefer?",
        topic="identity",
        scale=ScaleKind.NOMINAL,
        responses=(
            ResponseOption(value=1, label="Red"),
            ResponseOption(value=2, label="Green"),
            ResponseOption(value=3, label="Blue"),
        ),
    )


@pytest.fixture()
def catalog():
    questions = (
        ordinal_question("Q_IDEOLOGY", 10, topic="politics",
                         text="Where would you place yourself on a left-right scale?"),
        agree_question("Q_TRUST", topic="community"),
        ordinal_question("Q_SAT", 5, topic="wellbeing",
                         text="How satisfied are you with your life?"),
        color_question("Q_COLOR"),
    )
    subgroups = (
        SubgroupSpec(
            id="left", dimension="ideology",
            filter=(FilterClause(question="Q_IDEOLOGY", max_value=3),),
        ),
        SubgroupSpec(
            id="right", dimension="ideology",
            filter=(FilterClause(question="Q_IDEOLOGY", min_value=8),),
        ),
        SubgroupSpec(
            id="red", dimension="colour",
            filter=(FilterClause(question="Q_COLOR", values=(1,)),),
        ),
        SubgroupSpec(
            id="blue", dimension="colour",
            filter=(FilterClause(question="Q_COLOR", values=(3,)),),
        ),
    )
    return Catalog(questions=questions, subgroups=subgroups)


def make_records(respondent_id, weight, answers):
    """All of one respondent's records; ``answers`` maps qid -> value/None."""
    demographics = {
        qid: v for qid, v in answers.items()
        if qid in ("Q_IDEOLOGY", "Q_COLOR") and v is not None
    }
    return [
        ResponseRecord(
            respondent_id=respondent_id,
            question_id=qid,
            response_value=value,
            weight=weight,
            demographics=demographics,
        )
        for qid, value in answers.items()
    ]


@pytest.fixture()
def records():
    """Eight respondents: four left-leaning, four right-leaning."""
    rows = [
        ("r1", 1.0, {"Q_IDEOLOGY": 1, "Q_TRUST": 1, "Q_SAT": 2, "Q_COLOR": 1}),
        ("r2", 2.0, {"Q_IDEOLOGY": 2, "Q_TRUST": 2, "Q_SAT": 3, "Q_COLOR": 1}),
        ("r3", 1.0, {"Q_IDEOLOGY": 3, "Q_TRUST": 2, "Q_SAT": 2, "Q_COLOR": 3}),
        ("r4", 0.5, {"Q_IDEOLOGY": 1, "Q_TRUST": 1, "Q_SAT": None, "Q_COLOR": 3}),
        ("r5", 1.0, {"Q_IDEOLOGY": 9, "Q_TRUST": 3, "Q_SAT": 4, "Q_COLOR": 1}),
        ("r6", 2.0, {"Q_IDEOLOGY": 10, "Q_TRUST": 4, "Q_SAT": 5, "Q_COLOR": 3}),
        ("r7", 1.0, {"Q_IDEOLOGY": 8, "Q_TRUST": 4, "Q_SAT": 4, "Q_COLOR": 2}),
        ("r8", 1.5, {"Q_IDEOLOGY": 9, "Q_TRUST": 3, "Q_SAT": None, "Q_COLOR": 1}),
    ]
    out = []
    for rid, weight, answers in rows:
        out.extend(make_records(rid, weight, answers))
    return out


def make_dist(question, mass, n_effective=100.0):
    return ResponseDistribution(
        question_id=question.id,
        support=question.values,
        mass=tuple(mass),
        n_effective=n_effective,
    )


def make_samples(model_id, question_id, values, temperature=0.9):
    """Simulated samples from cleaned values; ``None`` entries are Invalid."""
    return [
        SimulatedSample(
            model_id=model_id,
            question_id=question_id,
            raw_text="" if v is None else str(v),
            flipped=False,
            cleaned_value=v,
            temperature=temperature,
            seed_info=f"index={i}",
        )
        for i, v in enumerate(values)
    ]
