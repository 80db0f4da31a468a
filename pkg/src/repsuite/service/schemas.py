"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..report import BoundsLevelSection
from ..sampler import (
    DEFAULT_FLIP_FRACTION,
    DEFAULT_SAMPLES_PER_QUESTION,
    DEFAULT_TEMPERATURE,
)


class ErrorDetail(BaseModel):
    kind: Literal["domain", "io", "transport", "internal"]
    error: str
    message: str


class ValidateRequest(BaseModel):
    catalog_path: str


class ValidateResponse(BaseModel):
    ok: bool
    questions: int
    subgroups: int
    violations: list[str]


class SynthRequest(BaseModel):
    out_dir: str
    seed: int = 0
    n_subgroups: int = Field(default=10, ge=2)
    n_respondents: int = Field(default=1000, ge=2)
    latent_dim: int = Field(default=3, ge=1)
    scale_size: int = Field(default=5, ge=2)
    noise_scale: float = Field(default=1.0, ge=0.0)
    samples_per_question: int = Field(default=DEFAULT_SAMPLES_PER_QUESTION, ge=1)
    methods: list[str] = ["perfect", "permuted"]


class SynthResponse(BaseModel):
    catalog_path: str
    human_path: str
    logs_path: str
    questions: int
    subgroups: int
    respondents: int
    log_records: int


class TaskSpec(BaseModel):
    model_id: str
    persona: str | None = None


class SimulateRequest(BaseModel):
    catalog_path: str
    out_path: str
    endpoint_url: str
    model_name: str
    tasks: list[TaskSpec] = Field(min_length=1)
    auth_env: str = "REPSUITE_API_TOKEN"
    temperature: float = DEFAULT_TEMPERATURE
    samples_per_question: int = Field(default=DEFAULT_SAMPLES_PER_QUESTION, ge=1)
    flip_fraction: float = Field(default=DEFAULT_FLIP_FRACTION, ge=0.0, le=1.0)
    max_in_flight: int = Field(default=4, ge=1)
    timeout: float = Field(default=60.0, gt=0.0)
    seed: int = Field(default=0, ge=0)
    resume: bool = True


class SimulateResponse(BaseModel):
    out_path: str
    pairs_total: int
    pairs_skipped: int
    records_written: int
    ok_records: int
    transport_failures: int
    flipped_records: int


class EvaluateRequest(BaseModel):
    catalog_path: str
    human_path: str
    logs_path: str
    level: Literal["question", "topic"] = "question"
    bounds_iterations: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1)


class BoundsRequest(BaseModel):
    catalog_path: str
    human_path: str
    level: Literal["question", "topic"] = "question"
    iterations: int = Field(default=1000, ge=1)
    seed: int = Field(ge=0)
    workers: int = Field(default=1, ge=1)


class BoundsResponse(BaseModel):
    level: Literal["question", "topic"]
    iterations: int
    seed: int
    bounds: BoundsLevelSection
