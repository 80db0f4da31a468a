"""Calibration bounds for structure similarity.

Raw similarity numbers are hard to read without context, so two
empirical reference points bracket them:

* a *permutation null* (lower bound): independently permuting each
  mean-matrix column destroys any cross-question structure, and the mean
  similarity of the rebuilt matrices against the observed one says what
  "no alignment" looks like;
* a *split-half ceiling* (upper bound): splitting respondents into
  random halves within each subgroup and comparing the two resulting
  structures says how much agreement the data's own sampling noise
  allows.

Every iteration draws from its own seeded stream, so results are
bitwise identical no matter how many workers execute the loop or in
which order the iterations run.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .distributions import ResponsePanel, aggregate_by_topic
from .errors import InsufficientRowsError
from .model import Catalog, Level, MeanMatrix, ResponseRecord, SubgroupSpec
from .structure import correlation_matrix, structure_similarity

log = logging.getLogger(__name__)


def seeded_rng(seed: int, stream: str) -> np.random.Generator:
    """A generator keyed by (seed, stream label), stable across platforms.

    The label is folded in through SHA-256, so streams like ``perm/17``
    are independent of each other and of execution order.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    digest = hashlib.sha256(stream.encode("utf-8")).digest()
    words = struct.unpack("<8L", digest)
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, *words]))


class BoundEstimate(BaseModel):
    """Mean and per-iteration trace of one calibration bound.

    ``values`` holds one entry per iteration in iteration order; ``None``
    marks an iteration whose similarity was undefined (constant upper
    triangle). The mean averages the defined entries.
    """

    model_config = ConfigDict(frozen=True)

    metric: Literal["rho", "rmse"]
    level: Level
    bound: Literal["lower", "upper"]
    iterations: int
    seed: int
    mean: float | None
    values: tuple[float | None, ...]

    @model_validator(mode="after")
    def _check(self) -> "BoundEstimate":
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if len(self.values) != self.iterations:
            raise ValueError(
                f"{len(self.values)} trace values for {self.iterations} iterations"
            )
        defined = [v for v in self.values if v is not None]
        if any(not np.isfinite(v) for v in defined):
            raise ValueError("trace values must be finite or None")
        if defined:
            expected = float(np.mean(defined))
            if self.mean is None or abs(self.mean - expected) > 1e-9:
                raise ValueError("mean does not equal the average of the trace")
        elif self.mean is not None:
            raise ValueError("mean must be None when every iteration is undefined")
        return self

    @classmethod
    def from_values(
        cls,
        metric: Literal["rho", "rmse"],
        level: Level,
        bound: Literal["lower", "upper"],
        seed: int,
        values: Sequence[float | None],
    ) -> "BoundEstimate":
        defined = [v for v in values if v is not None]
        return cls(
            metric=metric,
            level=level,
            bound=bound,
            iterations=len(values),
            seed=seed,
            mean=float(np.mean(defined)) if defined else None,
            values=tuple(values),
        )


def _run_iterations(
    fn: Callable[[int], tuple[float | None, float]],
    iterations: int,
    workers: int,
) -> tuple[list[float | None], list[float]]:
    """Run independent iterations, optionally on a thread pool.

    Results are collected by iteration index, so the outcome cannot
    depend on scheduling.
    """
    if workers <= 1:
        results = [fn(b) for b in range(iterations)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, range(iterations)))
    rhos = [r for r, _ in results]
    rmses = [e for _, e in results]
    return rhos, rmses


def permutation_null(
    means: MeanMatrix,
    iterations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> tuple[BoundEstimate, BoundEstimate]:
    """Similarity floor: observed structure vs column-permuted copies.

    Each iteration permutes every column of the mean matrix
    independently (its own stream, ``perm/<b>``), rebuilds the
    correlation matrix and compares it against the unpermuted one.
    Returns the (rho, rmse) bound estimates with full traces.
    """
    observed = correlation_matrix(means)
    values = np.asarray(means.values)
    n_rows = values.shape[0]

    def one(b: int) -> tuple[float | None, float]:
        rng = seeded_rng(seed, f"perm/{b}")
        shuffled = np.empty_like(values)
        for j in range(values.shape[1]):
            shuffled[:, j] = values[rng.permutation(n_rows), j]
        permuted = MeanMatrix(
            row_ids=means.row_ids,
            col_ids=means.col_ids,
            values=shuffled,
            level=means.level,
        )
        comp = structure_similarity(correlation_matrix(permuted), observed)
        return comp.rho, comp.rmse

    rhos, rmses = _run_iterations(one, iterations, workers)
    return (
        BoundEstimate.from_values("rho", means.level, "lower", seed, rhos),
        BoundEstimate.from_values("rmse", means.level, "lower", seed, rmses),
    )


def split_half(
    records: Iterable[ResponseRecord] | ResponsePanel,
    catalog: Catalog,
    subgroups: Sequence[SubgroupSpec] | None = None,
    iterations: int = 1000,
    seed: int = 0,
    level: Level = Level.QUESTION,
    workers: int = 1,
) -> tuple[BoundEstimate, BoundEstimate]:
    """Similarity ceiling from random half-samples of the human data.

    Each iteration splits every subgroup's respondents into two random
    halves (an odd respondent goes to the first half), builds one mean
    matrix per half (halves keep the respondents' weights), and compares
    the two correlation structures. Subgroups with fewer than two
    respondents are excluded with a warning; running out of subgroups is
    fatal.
    """
    if isinstance(records, ResponsePanel):
        panel = records
    else:
        panel = ResponsePanel.from_records(records, catalog, subgroups)
    allowed = None if subgroups is None else {s.id for s in subgroups}
    subgroup_ids = sorted(
        sid for sid in panel.membership if allowed is None or sid in allowed
    )
    retained: list[str] = []
    for sid in subgroup_ids:
        if len(panel.membership[sid]) >= 2:
            retained.append(sid)
        else:
            log.warning(
                "split_half: excluding subgroup %r with %d respondents",
                sid,
                len(panel.membership[sid]),
            )
    if len(retained) < 3:
        raise InsufficientRowsError(
            f"split_half needs at least 3 subgroups with 2+ respondents, "
            f"got {len(retained)}"
        )
    members = {sid: panel.membership[sid] for sid in retained}
    col_ids = panel.ordinal_question_ids

    def one(b: int) -> tuple[float | None, float]:
        rng = seeded_rng(seed, f"split/{b}")
        rows_a = np.empty((len(retained), len(col_ids)))
        rows_b = np.empty_like(rows_a)
        for i, sid in enumerate(retained):
            idx = members[sid]
            perm = idx[rng.permutation(len(idx))]
            cut = (len(idx) + 1) // 2
            rows_a[i] = panel.weighted_normalized_means(perm[:cut])
            rows_b[i] = panel.weighted_normalized_means(perm[cut:])
        half_a = MeanMatrix(tuple(retained), col_ids, rows_a, Level.QUESTION)
        half_b = MeanMatrix(tuple(retained), col_ids, rows_b, Level.QUESTION)
        if level is Level.TOPIC:
            half_a = aggregate_by_topic(half_a, catalog)
            half_b = aggregate_by_topic(half_b, catalog)
        comp = structure_similarity(
            correlation_matrix(half_a), correlation_matrix(half_b)
        )
        return comp.rho, comp.rmse

    rhos, rmses = _run_iterations(one, iterations, workers)
    return (
        BoundEstimate.from_values("rho", level, "upper", seed, rhos),
        BoundEstimate.from_values("rmse", level, "upper", seed, rmses),
    )
