"""Core domain types and the catalog interchange format.

A *catalog* bundles the question specifications and the subgroup
definitions for one evaluation run. Catalogs are interchanged as JSON
documents carrying the schema version ``repsuite-catalog/1``.

Conventions used throughout the package:

* ``None`` in :attr:`ResponseRecord.response_value` means the respondent
  gave no usable answer (NonResponse). It is never part of a support.
* ``None`` in :attr:`SimulatedSample.cleaned_value` means the generation
  could not be mapped onto the presented scale (Invalid). Transport
  failures never become samples at all; they are tracked separately by
  the sampler and the log parser.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import CatalogError

CATALOG_SCHEMA_VERSION = "repsuite-catalog/1"


class ScaleKind(str, Enum):
    """Measurement level of a question's response scale."""

    ORDINAL = "ordinal"
    NOMINAL = "nominal"


class Level(str, Enum):
    """Granularity at which structure metrics are computed."""

    QUESTION = "question"
    TOPIC = "topic"


class ResponseOption(BaseModel):
    """One admissible answer: an integer code plus its display label."""

    model_config = ConfigDict(frozen=True)

    value: int
    label: str


class QuestionSpec(BaseModel):
    """Immutable description of a single survey question.

    ``responses`` is the canonical, ordered list of admissible options.
    For ordinal scales the values must be strictly increasing; the scale
    diameter ``max - min`` is the normalizer for all distance and
    variance computations on that question.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    text: str
    topic: str
    scale: ScaleKind
    responses: tuple[ResponseOption, ...]
    admits_nonresponse: bool = True

    @model_validator(mode="after")
    def _check(self) -> "QuestionSpec":
        if not self.id:
            raise ValueError("question id must be non-empty")
        if not self.responses:
            raise ValueError(f"question {self.id!r} has an empty response list")
        values = [opt.value for opt in self.responses]
        if len(set(values)) != len(values):
            raise ValueError(f"question {self.id!r} has duplicate response values")
        if self.scale is ScaleKind.ORDINAL and values != sorted(values):
            raise ValueError(
                f"ordinal question {self.id!r} must list strictly increasing values"
            )
        return self

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(opt.value for opt in self.responses)

    @property
    def min_value(self) -> int:
        return min(self.values)

    @property
    def max_value(self) -> int:
        return max(self.values)

    @property
    def diameter(self) -> int:
        """Scale width ``max - min``; zero for single-option scales."""
        return self.max_value - self.min_value

    def label_of(self, value: int) -> str:
        for opt in self.responses:
            if opt.value == value:
                return opt.label
        raise KeyError(f"{value} is not a response value of question {self.id!r}")


class FilterClause(BaseModel):
    """One condition over a demographic answer; clauses are ANDed."""

    model_config = ConfigDict(frozen=True)

    question: str
    values: tuple[int, ...] | None = None
    min_value: int | None = None
    max_value: int | None = None

    @model_validator(mode="after")
    def _check(self) -> "FilterClause":
        if self.values is None and self.min_value is None and self.max_value is None:
            raise ValueError(
                f"filter on {self.question!r} needs a value set or a numeric range"
            )
        return self

    def matches(self, answer: int | None) -> bool:
        if answer is None:
            return False
        if self.values is not None and answer not in self.values:
            return False
        if self.min_value is not None and answer < self.min_value:
            return False
        if self.max_value is not None and answer > self.max_value:
            return False
        return True


class SubgroupSpec(BaseModel):
    """A subpopulation defined by demographic filter clauses.

    ``dimension`` names the axis the subgroup belongs to (for the
    standard survey grid: political, geographic, gender, age); pooled
    per-dimension aggregates combine all subgroups sharing a dimension.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    dimension: str
    filter: tuple[FilterClause, ...]

    @model_validator(mode="after")
    def _check(self) -> "SubgroupSpec":
        if not self.id:
            raise ValueError("subgroup id must be non-empty")
        if not self.dimension:
            raise ValueError(f"subgroup {self.id!r} has an empty dimension")
        if not self.filter:
            raise ValueError(f"subgroup {self.id!r} has no filter clauses")
        return self

    def matches(self, demographics: Mapping[str, int]) -> bool:
        """True when every clause accepts this respondent's answers."""
        return all(cl.matches(demographics.get(cl.question)) for cl in self.filter)


class Catalog(BaseModel):
    """Questions plus subgroups, the unit of interchange for one study."""

    model_config = ConfigDict(frozen=True)

    version: str = CATALOG_SCHEMA_VERSION
    questions: tuple[QuestionSpec, ...]
    subgroups: tuple[SubgroupSpec, ...]

    def question_index(self) -> dict[str, QuestionSpec]:
        return {q.id: q for q in self.questions}

    def subgroup_index(self) -> dict[str, SubgroupSpec]:
        return {s.id: s for s in self.subgroups}

    def ordinal_questions(self) -> tuple[QuestionSpec, ...]:
        """Ordinal questions with a usable (positive-diameter) scale."""
        return tuple(
            q
            for q in self.questions
            if q.scale is ScaleKind.ORDINAL and q.diameter > 0
        )

    def dimensions(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.subgroups:
            seen.setdefault(s.dimension, None)
        return tuple(seen)


def validate_catalog(catalog: Catalog) -> list[str]:
    """Collect consistency violations; an empty list means the catalog is valid.

    Checks beyond what the types enforce at construction time:
    duplicate question/subgroup ids, subgroup filters referencing unknown
    questions, and degenerate ordinal scales (single option, so the
    diameter is zero and normalized metrics are undefined).
    """
    violations: list[str] = []
    seen_q: set[str] = set()
    for q in catalog.questions:
        if q.id in seen_q:
            violations.append(f"duplicate id {q.id}")
        seen_q.add(q.id)
        if q.scale is ScaleKind.ORDINAL and q.diameter <= 0:
            violations.append(f"degenerate ordinal scale: {q.id}")
    seen_s: set[str] = set()
    for s in catalog.subgroups:
        if s.id in seen_s:
            violations.append(f"duplicate id {s.id}")
        seen_s.add(s.id)
        for clause in s.filter:
            if clause.question not in seen_q:
                violations.append(
                    f"dangling reference: subgroup {s.id!r} filters on "
                    f"unknown question {clause.question!r}"
                )
    return violations


def load_catalog(path: str | Path) -> Catalog:
    """Read a catalog JSON document, enforcing the schema version."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise CatalogError(f"{path}: top level must be a JSON object")
    version = payload.get("version")
    if version != CATALOG_SCHEMA_VERSION:
        raise CatalogError(
            f"{path}: unsupported catalog version {version!r}, "
            f"expected {CATALOG_SCHEMA_VERSION!r}"
        )
    try:
        return Catalog.model_validate(payload)
    except ValueError as exc:
        raise CatalogError(f"{path}: {exc}") from exc


def dump_catalog(catalog: Catalog, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(catalog.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8"
    )


@dataclass(frozen=True, slots=True)
class ResponseRecord:
    """One human respondent's answer to one question.

    ``demographics`` maps question ids to this respondent's answers for
    the questions referenced by subgroup filters; records of the same
    respondent share one mapping. ``response_value`` of ``None`` records
    a NonResponse, which is excluded from both the numerator and the
    denominator of every weighted tally.
    """

    respondent_id: str
    question_id: str
    response_value: int | None
    weight: float
    demographics: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError(
                f"respondent {self.respondent_id!r}: weight must be positive, "
                f"got {self.weight}"
            )

    def to_dict(self) -> dict:
        return {
            "respondent_id": self.respondent_id,
            "question_id": self.question_id,
            "response_value": self.response_value,
            "weight": self.weight,
            "demographics": dict(self.demographics),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ResponseRecord":
        return cls(
            respondent_id=payload["respondent_id"],
            question_id=payload["question_id"],
            response_value=payload["response_value"],
            weight=payload["weight"],
            demographics=dict(payload.get("demographics", {})),
        )


@dataclass(frozen=True, slots=True)
class SimulatedSample:
    """One model generation for one question, after cleaning.

    ``cleaned_value`` is expressed on the canonical scale (flipped
    presentations are already mapped back); ``None`` marks an Invalid
    generation. ``raw_text`` keeps the original generation verbatim so
    cleaning can be re-run with a newer rule set.
    """

    model_id: str
    question_id: str
    raw_text: str
    flipped: bool
    cleaned_value: int | None
    temperature: float
    seed_info: str = ""

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "question_id": self.question_id,
            "raw_text": self.raw_text,
            "flipped": self.flipped,
            "cleaned_value": self.cleaned_value,
            "temperature": self.temperature,
            "seed_info": self.seed_info,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "SimulatedSample":
        return cls(
            model_id=payload["model_id"],
            question_id=payload["question_id"],
            raw_text=payload["raw_text"],
            flipped=payload["flipped"],
            cleaned_value=payload["cleaned_value"],
            temperature=payload["temperature"],
            seed_info=payload.get("seed_info", ""),
        )


def parse_model_id(model_id: str) -> tuple[str, str | None]:
    """Split a model id into (method, target subgroup).

    Subgroup-steered runs use ids of the form ``method:subgroup``
    (for example ``persona:liberal``). Ids without a colon, such as
    ``baseline``, are unsteered and carry no target subgroup.
    """
    if ":" in model_id:
        method, subgroup = model_id.split(":", 1)
        return method, subgroup
    return model_id, None


class ResponseDistribution(BaseModel):
    """A pmf over one question's canonical support.

    ``n_effective`` is the total weight (human side) or valid sample
    count (model side) behind the estimate. Masses are non-negative and
    sum to one.
    """

    model_config = ConfigDict(frozen=True)

    question_id: str
    support: tuple[int, ...]
    mass: tuple[float, ...]
    n_effective: float

    @model_validator(mode="after")
    def _check(self) -> "ResponseDistribution":
        if not self.support:
            raise ValueError(f"{self.question_id!r}: empty support")
        if len(set(self.support)) != len(self.support):
            raise ValueError(f"{self.question_id!r}: duplicate support values")
        if len(self.mass) != len(self.support):
            raise ValueError(f"{self.question_id!r}: mass and support lengths differ")
        if any(m < 0 for m in self.mass):
            raise ValueError(f"{self.question_id!r}: negative mass")
        total = sum(self.mass)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{self.question_id!r}: masses sum to {total}, not 1")
        if not self.n_effective > 0:
            raise ValueError(f"{self.question_id!r}: n_effective must be positive")
        return self

    @classmethod
    def from_weighted_counts(
        cls,
        question: QuestionSpec,
        counts: Mapping[int, float],
        n_effective: float | None = None,
    ) -> "ResponseDistribution":
        """Normalize a value -> total-weight tally over the canonical support."""
        unknown = set(counts) - set(question.values)
        if unknown:
            raise ValueError(
                f"{question.id!r}: tallied values {sorted(unknown)} are outside "
                "the canonical support"
            )
        total = float(sum(counts.values()))
        if total <= 0:
            raise ValueError(f"{question.id!r}: tally has no positive weight")
        mass = tuple(float(counts.get(v, 0.0)) / total for v in question.values)
        return cls(
            question_id=question.id,
            support=question.values,
            mass=mass,
            n_effective=float(total if n_effective is None else n_effective),
        )

    def mass_of(self, value: int) -> float:
        return self.mass[self.support.index(value)]

    def is_point_mass(self) -> bool:
        """True when exactly one support value carries positive mass."""
        return sum(1 for m in self.mass if m > 0.0) == 1


@dataclass(frozen=True, eq=False)
class MeanMatrix:
    """Normalized mean responses: subgroups on rows, questions or topics on columns.

    Entries live in ``[0, 1]`` (each question's mean is rescaled by its
    scale minimum and diameter); missing cells are ``NaN``.
    """

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    values: np.ndarray
    level: Level = Level.QUESTION

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError(
                f"mean matrix shape {arr.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.col_ids)} cols"
            )
        finite = arr[np.isfinite(arr)]
        if finite.size and (finite.min() < -1e-9 or finite.max() > 1 + 1e-9):
            raise ValueError("mean matrix entries must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MeanMatrix):
            return NotImplemented
        return (
            self.row_ids == other.row_ids
            and self.col_ids == other.col_ids
            and self.level == other.level
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def to_dict(self) -> dict:
        vals = [
            [None if not np.isfinite(x) else float(x) for x in row]
            for row in self.values
        ]
        return {
            "row_ids": list(self.row_ids),
            "col_ids": list(self.col_ids),
            "level": self.level.value,
            "values": vals,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "MeanMatrix":
        raw = payload["values"]
        arr = np.array(
            [[np.nan if x is None else float(x) for x in row] for row in raw],
            dtype=float,
        ).reshape(len(payload["row_ids"]), len(payload["col_ids"]))
        return cls(
            row_ids=tuple(payload["row_ids"]),
            col_ids=tuple(payload["col_ids"]),
            values=arr,
            level=Level(payload.get("level", "question")),
        )


@dataclass(frozen=True)
class StructureComparison:
    """Similarity between two correlation structures over aligned columns.

    ``rho`` is ``None`` when either upper-triangle vector is constant,
    which leaves the Pearson correlation undefined; the RMSE is always
    available.
    """

    rho: float | None
    rmse: float
    n_pairs: int


@dataclass(frozen=True, eq=False)
class CorrelationArtifacts:
    """A correlation matrix plus the bookkeeping needed to compare two of them."""

    column_ids: tuple[str, ...]
    matrix: np.ndarray
    dropped_columns: tuple[str, ...]
    upper: np.ndarray
    comparison: StructureComparison | None = None

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=float)
        k = len(self.column_ids)
        if mat.shape != (k, k):
            raise ValueError(f"correlation matrix shape {mat.shape} != ({k}, {k})")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        up = np.asarray(self.upper, dtype=float).copy()
        up.setflags(write=False)
        object.__setattr__(self, "upper", up)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorrelationArtifacts):
            return NotImplemented
        return (
            self.column_ids == other.column_ids
            and self.dropped_columns == other.dropped_columns
            and np.array_equal(self.matrix, other.matrix, equal_nan=True)
            and np.array_equal(self.upper, other.upper, equal_nan=True)
            and self.comparison == other.comparison
        )

    def to_dict(self) -> dict:
        return {
            "column_ids": list(self.column_ids),
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "dropped_columns": list(self.dropped_columns),
            "upper": [float(x) for x in self.upper],
            "comparison": None
            if self.comparison is None
            else {
                "rho": self.comparison.rho,
                "rmse": self.comparison.rmse,
                "n_pairs": self.comparison.n_pairs,
            },
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "CorrelationArtifacts":
        comp = payload.get("comparison")
        return cls(
            column_ids=tuple(payload["column_ids"]),
            matrix=np.array(payload["matrix"], dtype=float).reshape(
                len(payload["column_ids"]), len(payload["column_ids"])
            ),
            dropped_columns=tuple(payload["dropped_columns"]),
            upper=np.array(payload["upper"], dtype=float),
            comparison=None
            if comp is None
            else StructureComparison(
                rho=comp["rho"], rmse=comp["rmse"], n_pairs=comp["n_pairs"]
            ),
        )
