"""Synthetic population oracle.

Generates survey populations with a known latent factor structure so the
whole pipeline can be exercised against ground truth: each respondent
draws a latent vector around its subgroup's mean, every question scores
``loading . latent + noise`` and is discretized onto its ordinal scale
by fixed equal-width thresholds. Because everything is Gaussian, the
exact (infinite-sample) mean matrix is available in closed form.

The perfect model sampler draws i.i.d. responses from the true weighted
pmf of a (subgroup, question) cell: as the sample count grows, its
dissimilarity against the truth must vanish. The brute-force transport
solver is an independent oracle for the analytic distance formulas and
is intentionally restricted to tiny supports.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import optimize, stats

from .calibration import seeded_rng
from .distributions import ResponsePanel, ground_truth_distribution
from .errors import OracleScaleExceededError
from .model import (
    Catalog,
    FilterClause,
    Level,
    MeanMatrix,
    QuestionSpec,
    ResponseDistribution,
    ResponseOption,
    ResponseRecord,
    ScaleKind,
    SimulatedSample,
    SubgroupSpec,
    dump_catalog,
)

GROUP_QUESTION_ID = "QSUB"
THRESHOLD_SPAN = 2.0
ORACLE_MAX_SUPPORT = 8


class SynthConfig(BaseModel):
    """Complete description of a synthetic population.

    ``loadings`` has one row per question, ``subgroup_means`` one row per
    subgroup, both with ``latent_dim`` columns. ``scale_sizes`` gives the
    number of ordinal options per question (a single int broadcasts).
    """

    model_config = ConfigDict(frozen=True)

    n_subgroups: int
    n_respondents: int
    questions_per_topic: dict[str, int]
    latent_dim: int
    loadings: tuple[tuple[float, ...], ...]
    subgroup_means: tuple[tuple[float, ...], ...]
    noise_scale: float = 1.0
    scale_sizes: tuple[int, ...] = (5,)
    seed: int = 0

    @property
    def n_questions(self) -> int:
        return sum(self.questions_per_topic.values())

    @model_validator(mode="before")
    @classmethod
    def _broadcast_scales(cls, data):
        if isinstance(data, dict):
            sizes = data.get("scale_sizes", (5,))
            if isinstance(sizes, int):
                sizes = (sizes,)
            sizes = tuple(sizes)
            topics = data.get("questions_per_topic") or {}
            try:
                nq = sum(topics.values())
            except AttributeError:
                nq = 0
            if len(sizes) == 1 and nq > 1:
                sizes = sizes * nq
            data["scale_sizes"] = sizes
        return data

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        if self.n_subgroups < 1 or self.n_respondents < 1:
            raise ValueError("need at least one subgroup and one respondent")
        if not self.questions_per_topic or any(
            n < 1 for n in self.questions_per_topic.values()
        ):
            raise ValueError("every topic needs at least one question")
        nq = self.n_questions
        if len(self.loadings) != nq:
            raise ValueError(f"{len(self.loadings)} loading rows for {nq} questions")
        if any(len(row) != self.latent_dim for row in self.loadings):
            raise ValueError("loading rows must have latent_dim entries")
        if len(self.subgroup_means) != self.n_subgroups:
            raise ValueError("subgroup_means must have one row per subgroup")
        if any(len(row) != self.latent_dim for row in self.subgroup_means):
            raise ValueError("subgroup mean rows must have latent_dim entries")
        if len(self.scale_sizes) != nq:
            raise ValueError(f"{len(self.scale_sizes)} scale sizes for {nq} questions")
        if any(s < 2 for s in self.scale_sizes):
            raise ValueError("every ordinal scale needs at least 2 options")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        return self

    @classmethod
    def generate(
        cls,
        n_subgroups: int = 10,
        n_respondents: int = 1000,
        questions_per_topic: Mapping[str, int] | None = None,
        latent_dim: int = 3,
        scale_size: int = 5,
        noise_scale: float = 1.0,
        subgroup_spread: float = 1.0,
        seed: int = 0,
    ) -> "SynthConfig":
        """Draw loadings and subgroup means from the seed and assemble a config."""
        if questions_per_topic is None:
            questions_per_topic = {"topic-a": 7, "topic-b": 7, "topic-c": 6}
        nq = sum(questions_per_topic.values())
        rng = seeded_rng(seed, "config")
        loadings = rng.normal(0.0, 1.0, size=(nq, latent_dim))
        means = rng.normal(0.0, subgroup_spread, size=(n_subgroups, latent_dim))
        return cls(
            n_subgroups=n_subgroups,
            n_respondents=n_respondents,
            questions_per_topic=dict(questions_per_topic),
            latent_dim=latent_dim,
            loadings=tuple(tuple(float(x) for x in row) for row in loadings),
            subgroup_means=tuple(tuple(float(x) for x in row) for row in means),
            noise_scale=noise_scale,
            scale_sizes=(scale_size,),
            seed=seed,
        )


def _thresholds(n_options: int) -> np.ndarray:
    """Equal-width cut points, symmetric about zero over the fixed span."""
    return (2.0 * np.arange(1, n_options) / n_options - 1.0) * THRESHOLD_SPAN


def _subgroup_id(index: int, total: int) -> str:
    width = max(2, len(str(total - 1)))
    return f"g{index:0{width}d}"


def _question_id(index: int, total: int) -> str:
    width = max(3, len(str(total)))
    return f"Q{index + 1:0{width}d}"


def synth_catalog(config: SynthConfig) -> tuple[Catalog, tuple[QuestionSpec, ...]]:
    """Catalog for a synthetic population: evaluation questions plus the
    nominal group question that subgroup filters reference."""
    nq = config.n_questions
    questions: list[QuestionSpec] = []
    index = 0
    for topic, count in config.questions_per_topic.items():
        for _ in range(count):
            size = config.scale_sizes[index]
            questions.append(
                QuestionSpec(
                    id=_question_id(index, nq),
                    text=f"Synthetic statement {index + 1}: how much do you agree?",
                    topic=topic,
                    scale=ScaleKind.ORDINAL,
                    responses=tuple(
                        ResponseOption(value=v, label=f"Level {v}")
                        for v in range(1, size + 1)
                    ),
                )
            )
            index += 1
    subgroup_ids = [_subgroup_id(i, config.n_subgroups) for i in range(config.n_subgroups)]
    group_question = QuestionSpec(
        id=GROUP_QUESTION_ID,
        text="Synthetic subgroup marker.",
        topic="demographics",
        scale=ScaleKind.NOMINAL,
        responses=tuple(
            ResponseOption(value=i, label=sid) for i, sid in enumerate(subgroup_ids)
        ),
        admits_nonresponse=False,
    )
    subgroups = tuple(
        SubgroupSpec(
            id=sid,
            dimension="synthetic",
            filter=(FilterClause(question=GROUP_QUESTION_ID, values=(i,)),),
        )
        for i, sid in enumerate(subgroup_ids)
    )
    catalog = Catalog(questions=tuple(questions) + (group_question,), subgroups=subgroups)
    return catalog, tuple(questions)


@dataclass(frozen=True)
class SyntheticPopulation:
    """A generated population with its exact expected mean matrix."""

    config: SynthConfig
    catalog: Catalog
    subgroups: tuple[SubgroupSpec, ...]
    records: list[ResponseRecord]
    expected_means: MeanMatrix


def generate_population(config: SynthConfig) -> SyntheticPopulation:
    """Sample the latent-factor population described by ``config``.

    Respondent latents are ``N(subgroup mean, I)``; question scores are
    ``loading . latent + noise_scale * N(0, 1)``, discretized by fixed
    equal-width thresholds. Generation runs per subgroup on independent
    seeded streams, so it parallelizes without changing the draw. All
    record weights are 1. The returned ``expected_means`` is the exact
    normalized mean matrix implied by the Gaussian model.
    """
    catalog, questions = synth_catalog(config)
    loadings = np.asarray(config.loadings, dtype=float)
    subgroup_means = np.asarray(config.subgroup_means, dtype=float)
    nq = config.n_questions
    thresholds = [_thresholds(s) for s in config.scale_sizes]

    records: list[ResponseRecord] = []
    for s_index in range(config.n_subgroups):
        sid = _subgroup_id(s_index, config.n_subgroups)
        rng = seeded_rng(config.seed, f"population/{sid}")
        latents = subgroup_means[s_index] + rng.standard_normal(
            (config.n_respondents, config.latent_dim)
        )
        scores = latents @ loadings.T
        if config.noise_scale > 0:
            scores = scores + config.noise_scale * rng.standard_normal(scores.shape)
        demographics = {GROUP_QUESTION_ID: s_index}
        columns = [
            1 + np.digitize(scores[:, j], thresholds[j]) for j in range(nq)
        ]
        for i in range(config.n_respondents):
            rid = f"{sid}-r{i:05d}"
            for j, q in enumerate(questions):
                records.append(
                    ResponseRecord(
                        respondent_id=rid,
                        question_id=q.id,
                        response_value=int(columns[j][i]),
                        weight=1.0,
                        demographics=demographics,
                    )
                )
            records.append(
                ResponseRecord(
                    respondent_id=rid,
                    question_id=GROUP_QUESTION_ID,
                    response_value=s_index,
                    weight=1.0,
                    demographics=demographics,
                )
            )

    expected = np.empty((config.n_subgroups, nq))
    for j in range(nq):
        lam = loadings[j]
        sd = float(np.sqrt(lam @ lam + config.noise_scale**2))
        centers = subgroup_means @ lam
        size = config.scale_sizes[j]
        if sd == 0.0:
            # Deterministic scores: the expected index is the bin count below.
            idx = np.array(
                [float(np.digitize(c, thresholds[j])) for c in centers]
            )
        else:
            z = (thresholds[j][None, :] - centers[:, None]) / sd
            idx = stats.norm.sf(z).sum(axis=1)
        expected[:, j] = idx / (size - 1)
    expected_means = MeanMatrix(
        row_ids=tuple(_subgroup_id(i, config.n_subgroups) for i in range(config.n_subgroups)),
        col_ids=tuple(q.id for q in questions),
        values=expected,
        level=Level.QUESTION,
    )
    return SyntheticPopulation(
        config=config,
        catalog=catalog,
        subgroups=catalog.subgroups,
        records=records,
        expected_means=expected_means,
    )


def samples_from_distribution(
    dist: ResponseDistribution,
    question: QuestionSpec,
    model_id: str,
    n_samples: int,
    seed: int,
) -> list[SimulatedSample]:
    """Draw i.i.d. samples from a pmf, rendered as canonical generations."""
    rng = seeded_rng(seed, f"draw/{model_id}/{question.id}")
    picks = rng.choice(len(dist.support), size=n_samples, p=np.asarray(dist.mass))
    labels = {v: question.label_of(v) for v in dist.support}
    out = []
    for k in picks:
        value = dist.support[int(k)]
        out.append(
            SimulatedSample(
                model_id=model_id,
                question_id=question.id,
                raw_text=f"{value}: {labels[value]}",
                flipped=False,
                cleaned_value=value,
                temperature=0.0,
                seed_info=f"seed={seed}",
            )
        )
    return out


def perfect_model_sampler(
    records: Iterable[ResponseRecord],
    subgroup: SubgroupSpec,
    question: QuestionSpec,
    n_samples: int,
    seed: int,
) -> list[SimulatedSample]:
    """Samples from an oracle model that answers exactly like the subgroup.

    Draws i.i.d. from the subgroup's true weighted pmf under the model id
    ``perfect:<subgroup>``; with growing ``n_samples`` every marginal
    metric against the truth must converge to its ideal value.
    """
    dist = ground_truth_distribution(records, subgroup, question)
    return samples_from_distribution(
        dist, question, f"perfect:{subgroup.id}", n_samples, seed
    )


def brute_force_transport(
    p: ResponseDistribution, q: ResponseDistribution, cost: np.ndarray
) -> float:
    """Exact minimum-cost transport between two pmfs on a shared support.

    Solves the transport linear program directly; a test-side oracle for
    the closed-form distances, deliberately capped at tiny supports.
    """
    if p.support != q.support:
        raise ValueError("transport oracle needs a shared support")
    k = len(p.support)
    if k > ORACLE_MAX_SUPPORT:
        raise OracleScaleExceededError(
            f"support size {k} exceeds the oracle cap of {ORACLE_MAX_SUPPORT}"
        )
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (k, k):
        raise ValueError(f"cost matrix shape {cost.shape} != ({k}, {k})")
    # Row and column marginal constraints; the last one is redundant.
    a_eq = np.zeros((2 * k - 1, k * k))
    b_eq = np.zeros(2 * k - 1)
    for i in range(k):
        a_eq[i, i * k : (i + 1) * k] = 1.0
        b_eq[i] = p.mass[i]
    for j in range(k - 1):
        a_eq[k + j, j::k] = 1.0
        b_eq[k + j] = q.mass[j]
    res = optimize.linprog(
        cost.ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        # The closed forms are exact; the oracle must not be the noisy side.
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# File emission (the same formats ingestion consumes)
# ---------------------------------------------------------------------------


def write_population_files(population: SyntheticPopulation, out_dir: str | Path) -> dict[str, Path]:
    """Write catalog.json and human.csv for a synthetic population."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog_path = out / "catalog.json"
    human_path = out / "human.csv"
    dump_catalog(population.catalog, catalog_path)

    question_ids = [q.id for q in population.catalog.questions]
    by_respondent: dict[str, dict[str, int]] = {}
    weights: dict[str, float] = {}
    for rec in population.records:
        row = by_respondent.setdefault(rec.respondent_id, {})
        weights[rec.respondent_id] = rec.weight
        if rec.response_value is not None:
            row[rec.question_id] = rec.response_value
    with open(human_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["respondent_id", "weight", *question_ids])
        for rid, row in by_respondent.items():
            writer.writerow(
                [rid, repr(weights[rid])]
                + [row.get(qid, "") for qid in question_ids]
            )
    return {"catalog": catalog_path, "human": human_path}


def column_permutations(
    subgroup_ids: Sequence[str], question_ids: Sequence[str], seed: int
) -> dict[str, dict[str, str]]:
    """Per-question permutations of the subgroup assignment.

    ``result[qid][subgroup]`` names the subgroup whose true distribution
    the (deliberately misaligned) permuted model answers from.
    """
    out: dict[str, dict[str, str]] = {}
    ids = list(subgroup_ids)
    for qid in question_ids:
        perm = seeded_rng(seed, f"colperm/{qid}").permutation(len(ids))
        out[qid] = {ids[i]: ids[int(perm[i])] for i in range(len(ids))}
    return out


def write_simulation_log(
    population: SyntheticPopulation,
    path: str | Path,
    methods: Sequence[str] = ("perfect", "permuted"),
    samples_per_question: int = 500,
    seed: int = 0,
) -> int:
    """Write NDJSON generation logs for synthetic reference models.

    ``perfect`` answers from each subgroup's own true pmf; ``permuted``
    answers from a per-question column permutation of the subgroups, the
    canonical structure-free model. Returns the number of records written.
    """
    panel = ResponsePanel.from_records(
        population.records, population.catalog, population.subgroups
    )
    eval_questions = [
        q for q in population.catalog.questions if q.id != GROUP_QUESTION_ID
    ]
    subgroup_ids = [s.id for s in population.subgroups]
    perms = column_permutations(
        subgroup_ids, [q.id for q in eval_questions], seed
    )
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        for method in methods:
            for sid in subgroup_ids:
                model_id = f"{method}:{sid}"
                for q in eval_questions:
                    if method == "perfect":
                        source = sid
                    elif method == "permuted":
                        source = perms[q.id][sid]
                    else:
                        raise ValueError(f"unknown synthetic method {method!r}")
                    dist = panel.distribution(source, q.id)
                    samples = samples_from_distribution(
                        dist, q, model_id, samples_per_question, seed
                    )
                    for index, s in enumerate(samples):
                        fh.write(
                            json.dumps(
                                {
                                    "model_id": s.model_id,
                                    "question_id": s.question_id,
                                    "sample_index": index,
                                    "raw_text": s.raw_text,
                                    "flipped": s.flipped,
                                    "temperature": s.temperature,
                                    "attempt": 1,
                                    "status": "ok",
                                }
                            )
                            + "\n"
                        )
                        written += 1
    return written
