"""Evaluation orchestration and the versioned report document.

``evaluate_run`` ties the whole pipeline together: ingest catalog, human
data and generation logs, compute marginal metrics per model, compare
correlation structures per steering method at question and topic level,
and optionally calibrate the similarity numbers between a permutation
floor and a split-half ceiling. The resulting :class:`EvalReport` is the
single source of truth: every CSV sidecar is rendered from it, and it
validates against the JSON schema published by the service.

Section-level domain failures (say, no comparable ordinal questions for
one method) are reported in ``errors`` without aborting the remaining
sections. Given identical inputs and seed, the report is identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .calibration import BoundEstimate, permutation_null, split_half
from .distributions import (
    ResponsePanel,
    aggregate_by_dimension,
    simulated_distribution,
)
from .errors import (
    EmptyDistributionError,
    IngestError,
    NoComparableQuestionsError,
    RepsuiteError,
)
from .ingestion import parse_human_responses, parse_simulation_log
from .marginal import (
    invalid_rate,
    mean_dissimilarity,
    mean_variance,
    modal_collapse_questions,
    per_question_distance,
)
from .model import (
    Catalog,
    CorrelationArtifacts,
    Level,
    MeanMatrix,
    ResponseDistribution,
    ScaleKind,
    SimulatedSample,
    load_catalog,
    parse_model_id,
    validate_catalog,
)
from .structure import correlation_matrix, mean_matrix, structure_similarity

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "repsuite-report/1"


# ---------------------------------------------------------------------------
# Report document models
# ---------------------------------------------------------------------------


class Provenance(BaseModel):
    schema_version: str = REPORT_SCHEMA_VERSION
    package_version: str = __version__
    config_hash: str
    catalog_path: str
    human_path: str
    logs_path: str | None = None
    level: Literal["question", "topic"] = "question"
    seed: int | None = None
    bounds_iterations: int | None = None
    workers: int = 1


class ReportCounts(BaseModel):
    questions: int
    ordinal_questions: int
    subgroups: int
    dimensions: int
    human_respondents: int
    human_records: int
    models: int
    methods: int
    samples_total: int
    samples_valid: int
    samples_invalid: int
    transport_failures: int
    malformed_log_lines: int


class DistanceRow(BaseModel):
    model_id: str
    subgroup_id: str
    question_id: str
    metric: Literal["wasserstein", "total_variation"]
    value: float = Field(ge=0.0, le=1.0 + 1e-12)
    n_true: float
    n_sim: float


class SubgroupDissimilarity(BaseModel):
    model_id: str
    subgroup_id: str
    value: float = Field(ge=0.0, le=1.0 + 1e-12)
    question_count: int


class DimensionDissimilarity(BaseModel):
    method: str
    dimension: str
    value: float = Field(ge=0.0, le=1.0 + 1e-12)
    question_count: int


class TopicDissimilarity(BaseModel):
    model_id: str
    subgroup_id: str
    topic: str
    value: float = Field(ge=0.0, le=1.0 + 1e-12)
    question_count: int


class VarianceRow(BaseModel):
    source: str  # "human" or a model id
    subgroup_id: str | None
    value: float = Field(ge=0.0, le=0.25 + 1e-12)
    question_count: int


class InvalidRateReport(BaseModel):
    model_id: str
    overall: float = Field(ge=0.0, le=1.0)
    total_samples: int
    invalid_samples: int
    by_question: dict[str, float]


class ModalCollapseReport(BaseModel):
    model_id: str
    count: int
    question_ids: list[str]


class MarginalSection(BaseModel):
    per_question: list[DistanceRow]
    dissimilarity_by_subgroup: list[SubgroupDissimilarity]
    dissimilarity_by_dimension: list[DimensionDissimilarity]
    dissimilarity_by_topic: list[TopicDissimilarity]
    mean_variance: list[VarianceRow]
    invalid_rates: list[InvalidRateReport]
    modal_collapse: list[ModalCollapseReport]


class MatrixPayload(BaseModel):
    column_ids: list[str]
    values: list[list[float | None]]

    @classmethod
    def from_artifacts(cls, artifacts: CorrelationArtifacts) -> "MatrixPayload":
        vals = [
            [None if not np.isfinite(x) else float(x) for x in row]
            for row in artifacts.matrix
        ]
        return cls(column_ids=list(artifacts.column_ids), values=vals)


class StructureModelMetrics(BaseModel):
    rho: float | None
    rmse: float
    n_pairs: int
    n_columns: int
    n_subgroups: int
    dropped_columns: list[str]


class BoundSummary(BaseModel):
    rho: float | None
    rmse: float | None


class PositionPair(BaseModel):
    """Where a model sits inside the calibration band, 0 = floor, 1 = ceiling."""

    rho: float | None
    rmse: float | None


class StructureLevelSection(BaseModel):
    models: dict[str, StructureModelMetrics]
    lower: BoundSummary | None = None
    upper: BoundSummary | None = None
    position: dict[str, PositionPair] = {}
    true_matrix: MatrixPayload | None = None
    sim_matrices: dict[str, MatrixPayload] = {}
    true_dropped_columns: list[str] = []


class StructureSection(BaseModel):
    question: StructureLevelSection | None = None
    topic: StructureLevelSection | None = None


class BoundsLevelSection(BaseModel):
    lower_rho: BoundEstimate
    lower_rmse: BoundEstimate
    upper_rho: BoundEstimate
    upper_rmse: BoundEstimate


class BoundsSection(BaseModel):
    question: BoundsLevelSection | None = None
    topic: BoundsLevelSection | None = None


class ReportError(BaseModel):
    section: str
    error: str
    message: str


class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    provenance: Provenance
    counts: ReportCounts
    marginal: MarginalSection
    structure: StructureSection
    bounds: BoundsSection | None = None
    errors: list[ReportError] = []


def report_json_schema() -> dict:
    """The published JSON schema every report validates against."""
    return EvalReport.model_json_schema()


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _hash_inputs(paths: Iterable[str | Path | None], options: Mapping) -> str:
    digest = hashlib.sha256()
    for p in paths:
        if p is None:
            digest.update(b"\x00absent\x00")
            continue
        digest.update(b"\x00file\x00")
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    digest.update(json.dumps(options, sort_keys=True, default=str).encode())
    return digest.hexdigest()


def _metric_name(scale: ScaleKind) -> Literal["wasserstein", "total_variation"]:
    return "wasserstein" if scale is ScaleKind.ORDINAL else "total_variation"


class _Run:
    """Mutable working state for one evaluation."""

    def __init__(self, catalog: Catalog, panel: ResponsePanel):
        self.catalog = catalog
        self.panel = panel
        self.questions = catalog.question_index()
        self.errors: list[ReportError] = []
        self._truth: dict[tuple[str, str], ResponseDistribution | None] = {}

    def note(self, section: str, exc: Exception) -> None:
        self.errors.append(
            ReportError(section=section, error=type(exc).__name__, message=str(exc))
        )

    def truth_dist(self, sid: str, qid: str) -> ResponseDistribution | None:
        key = (sid, qid)
        if key not in self._truth:
            try:
                self._truth[key] = self.panel.distribution(sid, qid)
            except EmptyDistributionError:
                self._truth[key] = None
        return self._truth[key]

    def truth_dists_for(self, sid: str) -> dict[str, ResponseDistribution]:
        out = {}
        for q in self.catalog.questions:
            d = self.truth_dist(sid, q.id)
            if d is not None:
                out[q.id] = d
        return out


def _marginal_section(
    run: _Run,
    samples_by_model: Mapping[str, list[SimulatedSample]],
    cells: Mapping[tuple[str, str], ResponseDistribution],
) -> MarginalSection:
    catalog = run.catalog
    subgroup_ids = [s.id for s in catalog.subgroups]
    per_question: list[DistanceRow] = []
    by_subgroup: list[SubgroupDissimilarity] = []
    by_dimension: list[DimensionDissimilarity] = []
    by_topic: list[TopicDissimilarity] = []
    variances: list[VarianceRow] = []
    invalid_rows: list[InvalidRateReport] = []
    collapse_rows: list[ModalCollapseReport] = []

    # Human-side variance per subgroup.
    for sid in subgroup_ids:
        truth = run.truth_dists_for(sid)
        try:
            mv = mean_variance(truth, catalog)
        except NoComparableQuestionsError as exc:
            run.note(f"marginal/variance/human/{sid}", exc)
            continue
        variances.append(
            VarianceRow(
                source="human", subgroup_id=sid,
                value=mv.value, question_count=mv.question_count,
            )
        )

    for model_id in sorted(samples_by_model):
        samples = samples_by_model[model_id]
        _, target = parse_model_id(model_id)
        sim_dists = {
            qid: dist
            for (mid, qid), dist in cells.items()
            if mid == model_id
        }
        rates = invalid_rate(samples)
        invalid_rows.append(
            InvalidRateReport(
                model_id=model_id,
                overall=rates.overall,
                total_samples=rates.total_samples,
                invalid_samples=rates.invalid_samples,
                by_question=rates.by_question,
            )
        )
        collapsed = modal_collapse_questions(sim_dists)
        collapse_rows.append(
            ModalCollapseReport(
                model_id=model_id, count=len(collapsed), question_ids=list(collapsed)
            )
        )
        try:
            mv = mean_variance(sim_dists, catalog)
            variances.append(
                VarianceRow(
                    source=model_id, subgroup_id=target,
                    value=mv.value, question_count=mv.question_count,
                )
            )
        except NoComparableQuestionsError as exc:
            run.note(f"marginal/variance/{model_id}", exc)

        compare_against = [target] if target in set(subgroup_ids) else (
            subgroup_ids if target is None else []
        )
        if target is not None and target not in set(subgroup_ids):
            run.note(
                f"marginal/{model_id}",
                IngestError(f"model targets unknown subgroup {target!r}"),
            )
        for sid in compare_against:
            truth = run.truth_dists_for(sid)
            shared = [qid for qid in sim_dists if qid in truth]
            topic_acc: dict[str, list[float]] = {}
            for qid in shared:
                q = run.questions[qid]
                value = per_question_distance(sim_dists[qid], truth[qid], q)
                per_question.append(
                    DistanceRow(
                        model_id=model_id,
                        subgroup_id=sid,
                        question_id=qid,
                        metric=_metric_name(q.scale),
                        value=value,
                        n_true=truth[qid].n_effective,
                        n_sim=sim_dists[qid].n_effective,
                    )
                )
                topic_acc.setdefault(q.topic, []).append(value)
            try:
                md = mean_dissimilarity(sim_dists, truth, catalog)
                by_subgroup.append(
                    SubgroupDissimilarity(
                        model_id=model_id, subgroup_id=sid,
                        value=md.value, question_count=md.question_count,
                    )
                )
            except NoComparableQuestionsError as exc:
                run.note(f"marginal/{model_id}/{sid}", exc)
            for topic in sorted(topic_acc):
                vals = topic_acc[topic]
                by_topic.append(
                    TopicDissimilarity(
                        model_id=model_id, subgroup_id=sid, topic=topic,
                        value=float(np.mean(vals)), question_count=len(vals),
                    )
                )

    # Pooled comparison per (method, dimension).
    methods: dict[str, list[str]] = {}
    for model_id in samples_by_model:
        method, target = parse_model_id(model_id)
        if target is not None:
            methods.setdefault(method, []).append(model_id)
    for method in sorted(methods):
        method_samples: list[SimulatedSample] = []
        for mid in methods[method]:
            method_samples.extend(samples_by_model[mid])
        covered = {parse_model_id(mid)[1] for mid in methods[method]}
        for dimension in run.catalog.dimensions():
            dim_sids = {
                s.id for s in catalog.subgroups if s.dimension == dimension
            }
            if not (dim_sids & covered):
                continue
            distances: list[float] = []
            for q in catalog.questions:
                try:
                    pooled_sim = aggregate_by_dimension(
                        method_samples, catalog.subgroups, dimension, q
                    )
                    pooled_truth = run.panel.dimension_distribution(dimension, q.id)
                except (EmptyDistributionError, ValueError):
                    continue
                distances.append(per_question_distance(pooled_sim, pooled_truth, q))
            if distances:
                by_dimension.append(
                    DimensionDissimilarity(
                        method=method, dimension=dimension,
                        value=float(np.mean(distances)), question_count=len(distances),
                    )
                )

    return MarginalSection(
        per_question=per_question,
        dissimilarity_by_subgroup=by_subgroup,
        dissimilarity_by_dimension=by_dimension,
        dissimilarity_by_topic=by_topic,
        mean_variance=variances,
        invalid_rates=invalid_rows,
        modal_collapse=collapse_rows,
    )


def _structure_level(
    run: _Run,
    level: Level,
    cells: Mapping[tuple[str, str], ResponseDistribution],
    methods: Mapping[str, dict[str, str]],
) -> StructureLevelSection | None:
    catalog = run.catalog
    truth_sids = [
        s.id
        for s in catalog.subgroups
        if any(run.truth_dist(s.id, q.id) is not None for q in catalog.ordinal_questions())
    ]
    section = StructureLevelSection(models={})
    try:
        truth_cells_all = {
            (sid, q.id): d
            for sid in truth_sids
            for q in catalog.ordinal_questions()
            if (d := run.truth_dist(sid, q.id)) is not None
        }
        base_true = correlation_matrix(mean_matrix(truth_cells_all, catalog, level))
        section = section.model_copy(
            update={
                "true_matrix": MatrixPayload.from_artifacts(base_true),
                "true_dropped_columns": list(base_true.dropped_columns),
            }
        )
    except RepsuiteError as exc:
        run.note(f"structure/{level.value}/true", exc)
        return None

    models: dict[str, StructureModelMetrics] = {}
    sim_matrices: dict[str, MatrixPayload] = {}
    for method in sorted(methods):
        targets = methods[method]
        common = sorted(set(targets) & set(truth_sids))
        try:
            sim_cells = {
                (sid, q.id): cells[(targets[sid], q.id)]
                for sid in common
                for q in catalog.ordinal_questions()
                if (targets[sid], q.id) in cells
            }
            sim_means = mean_matrix(sim_cells, catalog, level)
            truth_cells = {
                (sid, q.id): d
                for sid in common
                for q in catalog.ordinal_questions()
                if (d := run.truth_dist(sid, q.id)) is not None
            }
            true_means = mean_matrix(truth_cells, catalog, level)
            true_corr = correlation_matrix(true_means)
            sim_corr = correlation_matrix(sim_means)
            comp = structure_similarity(true_corr, sim_corr)
        except RepsuiteError as exc:
            run.note(f"structure/{level.value}/{method}", exc)
            continue
        models[method] = StructureModelMetrics(
            rho=comp.rho,
            rmse=comp.rmse,
            n_pairs=comp.n_pairs,
            n_columns=len(sim_corr.column_ids),
            n_subgroups=len(common),
            dropped_columns=list(sim_corr.dropped_columns),
        )
        sim_matrices[method] = MatrixPayload.from_artifacts(sim_corr)
    return section.model_copy(update={"models": models, "sim_matrices": sim_matrices})


def _position(
    value: float | None, floor: float | None, ceiling: float | None
) -> float | None:
    if value is None or floor is None or ceiling is None:
        return None
    span = ceiling - floor
    if abs(span) < 1e-12:
        return None
    return (value - floor) / span


def _attach_bounds(
    section: StructureLevelSection, bounds: BoundsLevelSection
) -> StructureLevelSection:
    lower = BoundSummary(rho=bounds.lower_rho.mean, rmse=bounds.lower_rmse.mean)
    upper = BoundSummary(rho=bounds.upper_rho.mean, rmse=bounds.upper_rmse.mean)
    position = {
        method: PositionPair(
            rho=_position(m.rho, lower.rho, upper.rho),
            rmse=_position(m.rmse, lower.rmse, upper.rmse),
        )
        for method, m in section.models.items()
    }
    return section.model_copy(
        update={"lower": lower, "upper": upper, "position": position}
    )


def compute_bounds(
    panel: ResponsePanel,
    catalog: Catalog,
    level: Level,
    iterations: int,
    seed: int,
    workers: int = 1,
) -> BoundsLevelSection:
    """Permutation floor and split-half ceiling for one level."""
    truth_sids = [
        s.id for s in catalog.subgroups if len(panel.membership.get(s.id, ())) > 0
    ]
    cells = {}
    for sid in truth_sids:
        for q in catalog.ordinal_questions():
            try:
                cells[(sid, q.id)] = panel.distribution(sid, q.id)
            except EmptyDistributionError:
                continue
    means = mean_matrix(cells, catalog, level)
    lower_rho, lower_rmse = permutation_null(means, iterations, seed, workers)
    upper_rho, upper_rmse = split_half(
        panel, catalog, iterations=iterations, seed=seed, level=level, workers=workers
    )
    return BoundsLevelSection(
        lower_rho=lower_rho,
        lower_rmse=lower_rmse,
        upper_rho=upper_rho,
        upper_rmse=upper_rmse,
    )


def evaluate_run(
    catalog_path: str | Path,
    human_path: str | Path,
    logs_path: str | Path,
    level: Level = Level.QUESTION,
    bounds_iterations: int | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> EvalReport:
    """Run the full evaluation and assemble the report.

    ``level`` controls which level the CSV sidecars export; the report
    itself always carries both question- and topic-level structure
    sections. Bounds are computed only when ``bounds_iterations`` is
    given, and then a seed is mandatory (there is no wall-clock default
    anywhere: equal inputs and seed give byte-identical reports).
    """
    if bounds_iterations is not None and seed is None:
        raise ValueError("bounds need an explicit seed")
    catalog = load_catalog(catalog_path)
    violations = validate_catalog(catalog)
    if violations:
        raise IngestError(
            f"catalog {catalog_path} is invalid: " + "; ".join(violations)
        )
    records = parse_human_responses(human_path, catalog)
    if not records:
        raise IngestError(f"{human_path}: no usable records")
    panel = ResponsePanel.from_records(records, catalog)
    parsed = parse_simulation_log(logs_path, catalog)

    samples_by_model: dict[str, list[SimulatedSample]] = {}
    by_cell: dict[tuple[str, str], list[SimulatedSample]] = {}
    for s in parsed.samples:
        samples_by_model.setdefault(s.model_id, []).append(s)
        by_cell.setdefault((s.model_id, s.question_id), []).append(s)

    run = _Run(catalog, panel)
    questions = catalog.question_index()
    cells: dict[tuple[str, str], ResponseDistribution] = {}
    for (model_id, qid), cell_samples in by_cell.items():
        try:
            cells[(model_id, qid)] = simulated_distribution(
                cell_samples, questions[qid]
            )
        except EmptyDistributionError:
            continue

    marginal = _marginal_section(run, samples_by_model, cells)

    methods: dict[str, dict[str, str]] = {}
    for model_id in sorted(samples_by_model):
        method, target = parse_model_id(model_id)
        if target is not None and target in catalog.subgroup_index():
            methods.setdefault(method, {})[target] = model_id

    structure = StructureSection(
        question=_structure_level(run, Level.QUESTION, cells, methods),
        topic=_structure_level(run, Level.TOPIC, cells, methods),
    )

    bounds: BoundsSection | None = None
    if bounds_iterations is not None:
        assert seed is not None
        level_sections: dict[str, BoundsLevelSection | None] = {}
        for lv in (Level.QUESTION, Level.TOPIC):
            try:
                level_sections[lv.value] = compute_bounds(
                    panel, catalog, lv, bounds_iterations, seed, workers
                )
            except RepsuiteError as exc:
                run.note(f"bounds/{lv.value}", exc)
                level_sections[lv.value] = None
        bounds = BoundsSection(
            question=level_sections["question"], topic=level_sections["topic"]
        )
        updates: dict[str, StructureLevelSection | None] = {}
        for lv in (Level.QUESTION, Level.TOPIC):
            sec = getattr(structure, lv.value)
            bsec = getattr(bounds, lv.value)
            if sec is not None and bsec is not None:
                updates[lv.value] = _attach_bounds(sec, bsec)
        if updates:
            structure = structure.model_copy(update=updates)

    n_valid = sum(1 for s in parsed.samples if s.cleaned_value is not None)
    counts = ReportCounts(
        questions=len(catalog.questions),
        ordinal_questions=len(catalog.ordinal_questions()),
        subgroups=len(catalog.subgroups),
        dimensions=len(catalog.dimensions()),
        human_respondents=panel.n_respondents,
        human_records=len(records),
        models=len(samples_by_model),
        methods=len(methods),
        samples_total=len(parsed.samples),
        samples_valid=n_valid,
        samples_invalid=len(parsed.samples) - n_valid,
        transport_failures=parsed.transport_failures,
        malformed_log_lines=parsed.malformed_lines,
    )
    options = {
        "level": level.value,
        "bounds_iterations": bounds_iterations,
        "seed": seed,
    }
    provenance = Provenance(
        config_hash=_hash_inputs([catalog_path, human_path, logs_path], options),
        catalog_path=str(catalog_path),
        human_path=str(human_path),
        logs_path=str(logs_path),
        level=level.value,
        seed=seed,
        bounds_iterations=bounds_iterations,
        workers=workers,
    )
    return EvalReport(
        provenance=provenance,
        counts=counts,
        marginal=marginal,
        structure=structure,
        bounds=bounds,
        errors=run.errors,
    )


# ---------------------------------------------------------------------------
# CSV sidecars
# ---------------------------------------------------------------------------


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _matrix_csv(payload: MatrixPayload) -> str:
    header = ["", *payload.column_ids]
    rows = [
        [cid, *row] for cid, row in zip(payload.column_ids, payload.values)
    ]
    return _render_csv(header, rows)


def report_csv_sidecars(report: EvalReport) -> dict[str, str]:
    """Render every CSV sidecar from the report document.

    Every number in the sidecars also appears in the report JSON. The
    correlation matrices are exported at the level selected at run time;
    with several steering methods present, each method also gets its own
    ``corr_sim.<method>.csv``.
    """
    out: dict[str, str] = {}
    out["distances.csv"] = _render_csv(
        ["model_id", "subgroup_id", "question_id", "metric", "value", "n_true", "n_sim"],
        (
            [r.model_id, r.subgroup_id, r.question_id, r.metric, r.value, r.n_true, r.n_sim]
            for r in report.marginal.per_question
        ),
    )
    out["variances.csv"] = _render_csv(
        ["source", "subgroup_id", "value", "question_count"],
        (
            [r.source, r.subgroup_id, r.value, r.question_count]
            for r in report.marginal.mean_variance
        ),
    )
    level = report.provenance.level
    section = getattr(report.structure, level)
    if section is not None and section.true_matrix is not None:
        out["corr_true.csv"] = _matrix_csv(section.true_matrix)
        names = sorted(section.sim_matrices)
        if names:
            out["corr_sim.csv"] = _matrix_csv(section.sim_matrices[names[0]])
        if len(names) > 1:
            for name in names:
                out[f"corr_sim.{name}.csv"] = _matrix_csv(section.sim_matrices[name])
    if report.bounds is not None:
        rows = []
        for lv in ("question", "topic"):
            bsec = getattr(report.bounds, lv)
            if bsec is None:
                continue
            for bound, rho_est, rmse_est in (
                ("lower", bsec.lower_rho, bsec.lower_rmse),
                ("upper", bsec.upper_rho, bsec.upper_rmse),
            ):
                for i, (rho, rmse) in enumerate(zip(rho_est.values, rmse_est.values)):
                    rows.append([lv, bound, i, rho, rmse])
        out["bounds_trace.csv"] = _render_csv(
            ["level", "bound", "iteration", "rho", "rmse"], rows
        )
    return out


def write_report_files(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json plus all sidecars into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    report_path = out / "report.json"
    report_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    paths["report.json"] = report_path
    for name, text in report_csv_sidecars(report).items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths[name] = p
    return paths
