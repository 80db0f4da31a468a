"""Building response distributions from records and samples.

The human side is a survey-weighted tally: NonResponse stays out of both
the numerator and the denominator. The model side is an unweighted tally
over valid samples. :class:`ResponsePanel` is a columnar view of the
same records used wherever per-respondent resampling has to be fast
(split-half calibration, bulk evaluation).
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyDistributionError, IngestError
from .model import (
    Catalog,
    Level,
    MeanMatrix,
    QuestionSpec,
    ResponseDistribution,
    ResponseRecord,
    ScaleKind,
    SimulatedSample,
    SubgroupSpec,
    parse_model_id,
)

log = logging.getLogger(__name__)


def _tally_to_distribution(
    question: QuestionSpec, counts: Mapping[int, float], what: str
) -> ResponseDistribution:
    if not counts:
        raise EmptyDistributionError(
            f"question {question.id!r}: no valid {what} to tally"
        )
    return ResponseDistribution.from_weighted_counts(question, counts)


def ground_truth_distribution(
    records: Iterable[ResponseRecord],
    subgroup: SubgroupSpec,
    question: QuestionSpec,
) -> ResponseDistribution:
    """Survey-weighted pmf of a subgroup's answers to one question.

    Each respondent contributes its weight to the mass of its answer;
    NonResponse records and respondents outside the subgroup contribute
    nothing at all, so masses always renormalize over actual answers.
    """
    counts: dict[int, float] = {}
    for rec in records:
        if rec.question_id != question.id or rec.response_value is None:
            continue
        if not subgroup.matches(rec.demographics):
            continue
        counts[rec.response_value] = counts.get(rec.response_value, 0.0) + rec.weight
    return _tally_to_distribution(question, counts, f"answers in {subgroup.id!r}")


def simulated_distribution(
    samples: Sequence[SimulatedSample], question: QuestionSpec
) -> ResponseDistribution:
    """Unweighted pmf over the valid samples of one (model, question) cell.

    Invalid samples are excluded from numerator and denominator alike,
    mirroring how NonResponse is handled on the human side.
    """
    counts: dict[int, float] = {}
    model_ids = set()
    for s in samples:
        if s.question_id != question.id:
            raise ValueError(
                f"sample for {s.question_id!r} passed to distribution of {question.id!r}"
            )
        model_ids.add(s.model_id)
        if s.cleaned_value is None:
            continue
        counts[s.cleaned_value] = counts.get(s.cleaned_value, 0.0) + 1.0
    if len(model_ids) > 1:
        raise ValueError(
            f"samples from several models {sorted(model_ids)} in one distribution"
        )
    return _tally_to_distribution(question, counts, "samples")


def aggregate_by_dimension(
    items: Sequence[ResponseRecord] | Sequence[SimulatedSample],
    subgroups: Iterable[SubgroupSpec],
    dimension: str,
    question: QuestionSpec,
) -> ResponseDistribution:
    """Pool raw responses across all subgroups of one dimension, then tally.

    Pooling happens *before* normalization: human respondents keep their
    weights, model samples keep unit weight, so the pooled pmf equals the
    n-effective-proportional mixture of the per-subgroup pmfs when the
    subgroups are disjoint.
    """
    dim_subgroups = [s for s in subgroups if s.dimension == dimension]
    if not dim_subgroups:
        raise ValueError(f"no subgroups in dimension {dimension!r}")
    dim_ids = {s.id for s in dim_subgroups}
    counts: dict[int, float] = {}
    for item in items:
        if item.question_id != question.id:
            continue
        if isinstance(item, ResponseRecord):
            if item.response_value is None:
                continue
            if not any(s.matches(item.demographics) for s in dim_subgroups):
                continue
            counts[item.response_value] = (
                counts.get(item.response_value, 0.0) + item.weight
            )
        elif isinstance(item, SimulatedSample):
            if item.cleaned_value is None:
                continue
            if parse_model_id(item.model_id)[1] not in dim_ids:
                continue
            counts[item.cleaned_value] = counts.get(item.cleaned_value, 0.0) + 1.0
        else:
            raise TypeError(f"cannot aggregate {type(item).__name__} items")
    return _tally_to_distribution(question, counts, f"responses in dimension {dimension!r}")


def aggregate_by_topic(means: MeanMatrix, catalog: Catalog) -> MeanMatrix:
    """Collapse question-level normalized means into topic-level means.

    Each (subgroup, topic) entry is the unweighted arithmetic mean of the
    subgroup's present question means within the topic; topics without
    any ordinal question in the matrix are dropped.
    """
    if means.level is not Level.QUESTION:
        raise ValueError("aggregate_by_topic expects a question-level mean matrix")
    col_pos = {qid: i for i, qid in enumerate(means.col_ids)}
    topic_cols: dict[str, list[int]] = {}
    for q in catalog.ordinal_questions():
        if q.id in col_pos:
            topic_cols.setdefault(q.topic, []).append(col_pos[q.id])
    if not topic_cols:
        raise ValueError("no topics with ordinal questions present in the matrix")
    topics = tuple(topic_cols)
    out = np.full((len(means.row_ids), len(topics)), np.nan)
    for j, topic in enumerate(topics):
        block = means.values[:, topic_cols[topic]]
        present = np.isfinite(block)
        with np.errstate(invalid="ignore"):
            sums = np.where(present, block, 0.0).sum(axis=1)
            counts = present.sum(axis=1)
            out[:, j] = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return MeanMatrix(row_ids=means.row_ids, col_ids=topics, values=out, level=Level.TOPIC)


def write_distributions_csv(
    target: str | Path | IO[str], dists: Iterable[ResponseDistribution]
) -> None:
    """Export distributions as long-format CSV for plotting."""

    def _write(fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow(["question_id", "value", "mass", "n_effective"])
        for d in dists:
            for value, mass in zip(d.support, d.mass):
                writer.writerow([d.question_id, value, repr(mass), repr(d.n_effective)])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(target)


class ResponsePanel:
    """Columnar respondent-by-question view of a record set.

    Values are stored as float64 with NaN for NonResponse; normalized
    copies of the ordinal columns are cached because the mean matrix and
    split-half calibration recompute weighted means thousands of times.
    """

    def __init__(
        self,
        catalog: Catalog,
        respondent_ids: tuple[str, ...],
        values: np.ndarray,
        weights: np.ndarray,
        membership: dict[str, np.ndarray],
    ) -> None:
        self.catalog = catalog
        self.respondent_ids = respondent_ids
        self.values = values
        self.weights = weights
        self.membership = membership
        self.question_ids = tuple(q.id for q in catalog.questions)
        self._col = {qid: i for i, qid in enumerate(self.question_ids)}
        ordinal = catalog.ordinal_questions()
        self.ordinal_question_ids = tuple(q.id for q in ordinal)
        self._ordinal_cols = np.array([self._col[q.id] for q in ordinal], dtype=int)
        mins = np.array([q.min_value for q in ordinal], dtype=float)
        diams = np.array([q.diameter for q in ordinal], dtype=float)
        if len(ordinal):
            self.norm_values = (values[:, self._ordinal_cols] - mins) / diams
        else:
            self.norm_values = np.empty((len(respondent_ids), 0))

    @classmethod
    def from_records(
        cls,
        records: Iterable[ResponseRecord],
        catalog: Catalog,
        subgroups: Sequence[SubgroupSpec] | None = None,
    ) -> "ResponsePanel":
        subgroups = catalog.subgroups if subgroups is None else tuple(subgroups)
        qcol = {q.id: i for i, q in enumerate(catalog.questions)}
        rows: dict[str, int] = {}
        weights: list[float] = []
        demographics: list[Mapping[str, int]] = []
        cells: list[tuple[int, int, float]] = []
        for rec in records:
            col = qcol.get(rec.question_id)
            if col is None:
                raise IngestError(
                    f"record references unknown question {rec.question_id!r}"
                )
            row = rows.get(rec.respondent_id)
            if row is None:
                row = len(rows)
                rows[rec.respondent_id] = row
                weights.append(rec.weight)
                demographics.append(rec.demographics)
            elif rec.weight != weights[row]:
                raise IngestError(
                    f"respondent {rec.respondent_id!r} appears with two weights"
                )
            if rec.response_value is not None:
                cells.append((row, col, float(rec.response_value)))
        n = len(rows)
        values = np.full((n, len(catalog.questions)), np.nan)
        if cells:
            arr = np.array(cells)
            values[arr[:, 0].astype(int), arr[:, 1].astype(int)] = arr[:, 2]
        membership: dict[str, list[int]] = {s.id: [] for s in subgroups}
        for row, demo in enumerate(demographics):
            for s in subgroups:
                if s.matches(demo):
                    membership[s.id].append(row)
        return cls(
            catalog=catalog,
            respondent_ids=tuple(rows),
            values=values,
            weights=np.array(weights, dtype=float),
            membership={
                sid: np.array(idx, dtype=int) for sid, idx in membership.items()
            },
        )

    @property
    def n_respondents(self) -> int:
        return len(self.respondent_ids)

    def subgroup_rows(self, subgroup_id: str) -> np.ndarray:
        return self.membership[subgroup_id]

    def distribution(self, subgroup_id: str, question_id: str) -> ResponseDistribution:
        """Weighted pmf for one (subgroup, question) cell; matches
        :func:`ground_truth_distribution` on the same records."""
        rows = self.membership[subgroup_id]
        return self._distribution_over_rows(rows, question_id, f"subgroup {subgroup_id!r}")

    def dimension_distribution(self, dimension: str, question_id: str) -> ResponseDistribution:
        """Weighted pmf pooled over every subgroup of one dimension."""
        rows_list = [
            self.membership[s.id]
            for s in self.catalog.subgroups
            if s.dimension == dimension
        ]
        if not rows_list:
            raise ValueError(f"no subgroups in dimension {dimension!r}")
        rows = np.unique(np.concatenate(rows_list)) if rows_list else np.array([], int)
        return self._distribution_over_rows(rows, question_id, f"dimension {dimension!r}")

    def _distribution_over_rows(
        self, rows: np.ndarray, question_id: str, what: str
    ) -> ResponseDistribution:
        question = self.catalog.question_index()[question_id]
        col = self.values[rows, self._col[question_id]]
        valid = np.isfinite(col)
        if not valid.any():
            raise EmptyDistributionError(
                f"question {question_id!r}: no valid answers in {what}"
            )
        vals = col[valid].astype(int)
        w = self.weights[rows][valid]
        uniq, inv = np.unique(vals, return_inverse=True)
        sums = np.bincount(inv, weights=w)
        counts = {int(v): float(s) for v, s in zip(uniq, sums)}
        return ResponseDistribution.from_weighted_counts(question, counts)

    def weighted_normalized_means(self, rows: np.ndarray) -> np.ndarray:
        """Weighted mean of the normalized ordinal answers over a row subset.

        Returns one entry per ordinal question, NaN where the subset has
        no valid answers. This is exactly the mean-matrix cell formula,
        expressed respondent-wise instead of pmf-wise.
        """
        nv = self.norm_values[rows]
        w = self.weights[rows][:, None]
        present = np.isfinite(nv)
        num = (np.where(present, nv, 0.0) * w).sum(axis=0)
        den = (present * w).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / den, np.nan)

    def subgroup_mean_matrix(self, subgroup_ids: Sequence[str]) -> MeanMatrix:
        """Question-level mean matrix for the given subgroups, panel-side."""
        rows = np.vstack(
            [self.weighted_normalized_means(self.membership[sid]) for sid in subgroup_ids]
        )
        return MeanMatrix(
            row_ids=tuple(subgroup_ids),
            col_ids=self.ordinal_question_ids,
            values=rows,
            level=Level.QUESTION,
        )
