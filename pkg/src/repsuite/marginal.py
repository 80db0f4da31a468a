"""Marginal (per-question) distribution comparison metrics.

Ordinal questions use the normalized 1-Wasserstein distance: the sum of
absolute CDF differences across support gaps, divided by the scale
diameter so the result lands in ``[0, 1]`` and is comparable across
scales of different width. Nominal questions use total variation, which
coincides with optimal transport under a 0/1 ground cost. Aggregates
over questions are plain unweighted means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateScaleError,
    NoComparableQuestionsError,
    SupportMismatchError,
    WrongScaleKindError,
)
from .model import (
    Catalog,
    QuestionSpec,
    ResponseDistribution,
    ScaleKind,
    SimulatedSample,
)


def _check_support(
    p: ResponseDistribution, q: ResponseDistribution, question: QuestionSpec | None
) -> None:
    if p.support != q.support:
        raise SupportMismatchError(
            f"supports differ: {p.question_id!r} {p.support} vs "
            f"{q.question_id!r} {q.support}"
        )
    if question is not None and p.support != question.values:
        raise SupportMismatchError(
            f"distribution support {p.support} does not match the canonical "
            f"support of question {question.id!r}"
        )


def wasserstein_normalized(
    p: ResponseDistribution, q: ResponseDistribution, question: QuestionSpec
) -> float:
    """Normalized 1-Wasserstein distance between two ordinal pmfs.

    With support values v_1 < ... < v_k and CDFs F_p, F_q this is

        sum_j |F_p(v_j) - F_q(v_j)| * (v_{j+1} - v_j) / (v_k - v_1)

    which equals the minimum-cost transport under cost |v - v'| scaled by
    the diameter, hence lies in [0, 1] with 0 iff the pmfs are equal and
    1 iff all mass sits on opposite endpoints.
    """
    if question.scale is not ScaleKind.ORDINAL:
        raise WrongScaleKindError(
            f"question {question.id!r} is nominal; Wasserstein needs an ordinal scale"
        )
    if question.diameter <= 0:
        raise DegenerateScaleError(
            f"question {question.id!r} has zero scale diameter"
        )
    _check_support(p, q, question)
    values = np.asarray(p.support, dtype=float)
    cdf_gap = np.cumsum(np.asarray(p.mass) - np.asarray(q.mass))
    work = float(np.sum(np.abs(cdf_gap[:-1]) * np.diff(values)))
    return work / question.diameter


def total_variation(p: ResponseDistribution, q: ResponseDistribution) -> float:
    """Total variation distance, half the L1 gap between the pmfs.

    Equals the minimum mass that must be moved under a 0/1 ground cost,
    so it is the natural transport distance for nominal scales.
    """
    _check_support(p, q, None)
    return 0.5 * float(np.abs(np.asarray(p.mass) - np.asarray(q.mass)).sum())


def per_question_distance(
    p: ResponseDistribution, q: ResponseDistribution, question: QuestionSpec
) -> float:
    """Scale-appropriate distance: Wasserstein for ordinal, TV for nominal."""
    if question.scale is ScaleKind.ORDINAL:
        return wasserstein_normalized(p, q, question)
    _check_support(p, q, question)
    return total_variation(p, q)


@dataclass(frozen=True)
class QuestionAverage:
    """An unweighted mean over questions, plus how many entered it."""

    value: float
    question_count: int


def mean_dissimilarity(
    model_dists: Mapping[str, ResponseDistribution],
    truth_dists: Mapping[str, ResponseDistribution],
    catalog: Catalog,
) -> QuestionAverage:
    """Mean per-question distance over the questions both sides cover.

    The question order does not matter; only the intersection of
    question ids with a distribution on both sides contributes.
    """
    questions = catalog.question_index()
    shared = [qid for qid in model_dists if qid in truth_dists and qid in questions]
    if not shared:
        raise NoComparableQuestionsError(
            "model and truth distributions share no questions"
        )
    total = 0.0
    for qid in shared:
        total += per_question_distance(
            model_dists[qid], truth_dists[qid], questions[qid]
        )
    return QuestionAverage(value=total / len(shared), question_count=len(shared))


def normalized_variance(dist: ResponseDistribution, question: QuestionSpec) -> float:
    """Population variance of the pmf divided by the squared scale diameter.

    Bounded by 0.25, attained by an equal-mass split over the two scale
    endpoints; invariant under affine relabelings of the support.
    """
    if question.scale is not ScaleKind.ORDINAL:
        raise WrongScaleKindError(
            f"question {question.id!r} is nominal; variance needs an ordinal scale"
        )
    if question.diameter <= 0:
        raise DegenerateScaleError(f"question {question.id!r} has zero scale diameter")
    if dist.support != question.values:
        raise SupportMismatchError(
            f"distribution support does not match question {question.id!r}"
        )
    values = np.asarray(dist.support, dtype=float)
    mass = np.asarray(dist.mass)
    mean = float(mass @ values)
    var = float(mass @ (values - mean) ** 2)
    return var / question.diameter**2


def mean_variance(
    dists: Mapping[str, ResponseDistribution], catalog: Catalog
) -> QuestionAverage:
    """Mean normalized variance over the ordinal questions present."""
    questions = catalog.question_index()
    ordinal = [
        qid
        for qid in dists
        if qid in questions
        and questions[qid].scale is ScaleKind.ORDINAL
        and questions[qid].diameter > 0
    ]
    if not ordinal:
        raise NoComparableQuestionsError("no ordinal questions with distributions")
    total = sum(normalized_variance(dists[qid], questions[qid]) for qid in ordinal)
    return QuestionAverage(value=total / len(ordinal), question_count=len(ordinal))


def modal_collapse_questions(
    dists: Mapping[str, ResponseDistribution],
) -> tuple[str, ...]:
    """Question ids whose distribution is a point mass."""
    return tuple(qid for qid, d in dists.items() if d.is_point_mass())


def modal_collapse_count(dists: Mapping[str, ResponseDistribution]) -> int:
    """How many of a model's distributions collapsed onto a single option."""
    return len(modal_collapse_questions(dists))


@dataclass(frozen=True)
class InvalidRates:
    """Share of Invalid generations, per question and pooled."""

    overall: float
    by_question: dict[str, float]
    total_samples: int
    invalid_samples: int


def invalid_rate(samples: Iterable[SimulatedSample]) -> InvalidRates:
    """Fraction of samples whose cleaned value is Invalid.

    Transport failures never appear here by construction: they are not
    samples. An empty sample list yields a zero overall rate with zero
    totals, which callers should treat as "nothing to report".
    """
    totals: dict[str, int] = {}
    invalids: dict[str, int] = {}
    for s in samples:
        totals[s.question_id] = totals.get(s.question_id, 0) + 1
        if s.cleaned_value is None:
            invalids[s.question_id] = invalids.get(s.question_id, 0) + 1
    total = sum(totals.values())
    invalid = sum(invalids.values())
    return InvalidRates(
        overall=(invalid / total) if total else 0.0,
        by_question={
            qid: invalids.get(qid, 0) / n for qid, n in totals.items()
        },
        total_samples=total,
        invalid_samples=invalid,
    )
