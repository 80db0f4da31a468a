"""Correlation-structure comparison across subgroups.

The mean matrix holds each subgroup's normalized mean answer per ordinal
question. Correlating its columns across subgroup rows yields a
question-by-question correlation matrix whose upper triangle is the
structural fingerprint being compared: Pearson correlation between the
true and simulated fingerprints measures alignment, RMSE measures
absolute disagreement.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateStructureError,
    InsufficientRowsError,
    SupportMismatchError,
)
from .model import (
    Catalog,
    CorrelationArtifacts,
    Level,
    MeanMatrix,
    ResponseDistribution,
    StructureComparison,
)
from .distributions import aggregate_by_topic

from typing import Mapping

MIN_OVERLAP = 3


def normalized_mean(dist: ResponseDistribution, min_value: int, diameter: int) -> float:
    """Mean of the pmf after rescaling the support onto [0, 1]."""
    values = (np.asarray(dist.support, dtype=float) - min_value) / diameter
    return float(np.asarray(dist.mass) @ values)


def mean_matrix(
    dists: Mapping[tuple[str, str], ResponseDistribution],
    catalog: Catalog,
    level: Level = Level.QUESTION,
) -> MeanMatrix:
    """Assemble the subgroup-by-question matrix of normalized means.

    Rows are the subgroup ids appearing in ``dists`` (sorted, so the
    true and simulated sides align whenever they cover the same
    subgroups); columns are the catalog's usable ordinal questions that
    have at least one distribution. Cells without a distribution stay
    NaN and are handled by pairwise deletion downstream.
    """
    subgroup_ids = sorted({sid for sid, _ in dists})
    if len(subgroup_ids) < 2:
        raise InsufficientRowsError(
            f"mean matrix needs at least 2 subgroups, got {len(subgroup_ids)}"
        )
    present_qids = {qid for _, qid in dists}
    questions = [q for q in catalog.ordinal_questions() if q.id in present_qids]
    if not questions:
        raise DegenerateStructureError("no ordinal questions with distributions")
    values = np.full((len(subgroup_ids), len(questions)), np.nan)
    for i, sid in enumerate(subgroup_ids):
        for j, q in enumerate(questions):
            dist = dists.get((sid, q.id))
            if dist is None:
                continue
            if dist.support != q.values:
                raise SupportMismatchError(
                    f"distribution for ({sid!r}, {q.id!r}) does not share the "
                    "question's canonical support"
                )
            values[i, j] = normalized_mean(dist, q.min_value, q.diameter)
    matrix = MeanMatrix(
        row_ids=tuple(subgroup_ids),
        col_ids=tuple(q.id for q in questions),
        values=values,
        level=Level.QUESTION,
    )
    if level is Level.TOPIC:
        return aggregate_by_topic(matrix, catalog)
    return matrix


def upper_triangle(matrix: np.ndarray | CorrelationArtifacts) -> np.ndarray:
    """Off-diagonal upper-triangle entries in row-major order."""
    mat = matrix.matrix if isinstance(matrix, CorrelationArtifacts) else np.asarray(matrix)
    iu = np.triu_indices(mat.shape[0], k=1)
    return mat[iu].copy()


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Pearson correlation, or None when either vector is constant."""
    xm = x - x.mean()
    ym = y - y.mean()
    den = float(np.sqrt((xm @ xm) * (ym @ ym)))
    if den == 0.0:
        return None
    return float(np.clip((xm @ ym) / den, -1.0, 1.0))


def _pairwise_corr(values: np.ndarray) -> np.ndarray:
    """Column correlations under pairwise deletion of missing rows.

    Assumes every pair has already been screened for enough overlap and
    non-degenerate variance on the overlap.
    """
    k = values.shape[1]
    out = np.eye(k)
    present = np.isfinite(values)
    for i in range(k):
        for j in range(i + 1, k):
            both = present[:, i] & present[:, j]
            r = _pearson(values[both, i], values[both, j])
            out[i, j] = out[j, i] = r if r is not None else np.nan
    return out


def _complete_corr(values: np.ndarray) -> np.ndarray:
    """Fast path for fully observed matrices: one centered matmul."""
    centered = values - values.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    out = (centered.T @ centered) / np.outer(norms, norms)
    # BLAS does not promise bitwise-symmetric products; enforce it.
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return np.clip(out, -1.0, 1.0)


def correlation_matrix(means: MeanMatrix) -> CorrelationArtifacts:
    """Correlate mean-matrix columns across subgroup rows.

    Missing cells are handled by pairwise deletion. Columns that cannot
    support a correlation at all are dropped and reported: fewer than
    ``MIN_OVERLAP`` present rows, zero variance over the present rows,
    and (iteratively) columns whose pairings keep violating the overlap
    or variance requirement. Fewer than two surviving columns is a
    degenerate structure.
    """
    if len(means.row_ids) < MIN_OVERLAP:
        raise InsufficientRowsError(
            f"correlation needs at least {MIN_OVERLAP} subgroup rows, "
            f"got {len(means.row_ids)}"
        )
    values = np.asarray(means.values, dtype=float)
    col_ids = list(means.col_ids)
    present = np.isfinite(values)
    dropped: list[str] = []

    keep: list[int] = []
    for j in range(values.shape[1]):
        col = values[present[:, j], j]
        if col.size < MIN_OVERLAP or np.ptp(col) == 0.0:
            dropped.append(col_ids[j])
        else:
            keep.append(j)

    def _bad_pair_counts(cols: list[int]) -> np.ndarray:
        counts = np.zeros(len(cols), dtype=int)
        for a in range(len(cols)):
            for b in range(a + 1, len(cols)):
                i, j = cols[a], cols[b]
                both = present[:, i] & present[:, j]
                n = int(both.sum())
                bad = n < MIN_OVERLAP or (
                    np.ptp(values[both, i]) == 0.0 or np.ptp(values[both, j]) == 0.0
                )
                if bad:
                    counts[a] += 1
                    counts[b] += 1
        return counts

    complete = bool(present[:, keep].all()) if keep else True
    if not complete:
        # Iteratively drop the most conflicted column until every pair works.
        while len(keep) >= 2:
            counts = _bad_pair_counts(keep)
            if not counts.any():
                break
            order = sorted(
                range(len(keep)),
                key=lambda a: (
                    counts[a],
                    (~present[:, keep[a]]).sum(),
                    col_ids[keep[a]],
                ),
            )
            worst = order[-1]
            dropped.append(col_ids[keep[worst]])
            del keep[worst]

    if len(keep) < 2:
        raise DegenerateStructureError(
            f"only {len(keep)} usable columns remain (dropped {len(dropped)})"
        )

    sub = values[:, keep]
    if complete:
        matrix = _complete_corr(sub)
    else:
        matrix = _pairwise_corr(sub)
    retained = tuple(col_ids[j] for j in keep)
    return CorrelationArtifacts(
        column_ids=retained,
        matrix=matrix,
        dropped_columns=tuple(dropped),
        upper=upper_triangle(matrix),
    )


def structure_similarity(
    true_corr: CorrelationArtifacts, sim_corr: CorrelationArtifacts
) -> StructureComparison:
    """Compare two correlation structures over their shared columns.

    Both upper triangles are re-extracted from the submatrices indexed
    by the ordered intersection of retained column ids, so the entries
    pair up one-to-one. ``rho`` is None when either triangle is constant
    (correlation undefined); the RMSE is always reported.
    """
    sim_pos = {cid: i for i, cid in enumerate(sim_corr.column_ids)}
    common = [cid for cid in true_corr.column_ids if cid in sim_pos]
    if len(common) < 2:
        raise DegenerateStructureError(
            f"correlation structures share only {len(common)} columns"
        )
    t_idx = np.array([true_corr.column_ids.index(cid) for cid in common])
    s_idx = np.array([sim_pos[cid] for cid in common])
    u_true = upper_triangle(true_corr.matrix[np.ix_(t_idx, t_idx)])
    u_sim = upper_triangle(sim_corr.matrix[np.ix_(s_idx, s_idx)])
    rho = None
    if np.ptp(u_true) > 0.0 and np.ptp(u_sim) > 0.0:
        rho = _pearson(u_true, u_sim)
    rmse = float(np.sqrt(np.mean((u_true - u_sim) ** 2)))
    return StructureComparison(rho=rho, rmse=rmse, n_pairs=len(u_true))
