"""Querying chat-completion endpoints for simulated survey responses.

One sample is one HTTP request: no batching, so every generation is an
independent draw at the configured temperature. Generations are stored
verbatim in append-only NDJSON logs together with their presentation
metadata (flipped or not, temperature, attempt count), which makes
cleaning reproducible and runs resumable after a crash.

Scale-order flipping mitigates position bias: a seeded per-(model,
question) stream assigns each sample index a flipped or canonical
presentation up front, so the assignment is independent of request
completion order and stable across resumed runs.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Mapping, Sequence

import httpx
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .calibration import seeded_rng
from .errors import SimulationError
from .ingestion import RawGenerationLog, STATUS_OK, STATUS_TRANSPORT_FAILURE
from .model import Catalog, QuestionSpec, ScaleKind

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.9
DEFAULT_SAMPLES_PER_QUESTION = 500
DEFAULT_FLIP_FRACTION = 0.5

SYSTEM_PROMPT = (
    "You are taking part in a survey on personal values and will be asked a "
    "range of multiple choice questions.\n"
    "Each question will have the following format:\n"
    "\n"
    '"\n'
    "Q33: For each of the following statements I read out, can you tell me how "
    "much you agree with each. Do you agree strongly, agree, disagree, or "
    "disagree strongly? - Carrot cake is tastier than chocolate cake\n"
    "Available responses:\n"
    "1: Agree strongly\n"
    "2: Agree\n"
    "3: Disagree\n"
    "4: Strongly disagree\n"
    '"\n'
    "\n"
    "For each question, just select a single answer from the set of available "
    "responses. Please copy the answer exactly as written in the 'Available "
    "responses' list above. Do not change spelling or capitalisation.\n"
    "For example:\n"
    "4: Agree strongly"
)

PERSONA_TEMPLATE = (
    "Please answer all questions as if you {description}. Make sure your "
    "responses align as closely as possible to the responses that someone "
    "from this demographic is likely to give."
)


def persona_paragraph(description: str) -> str:
    """Render the steering paragraph for a persona description such as
    ``"are a person with a conservative or politically right-wing view of
    the world"``."""
    return PERSONA_TEMPLATE.format(description=description)


class SamplerConfig(BaseModel):
    """Endpoint, sampling and retry settings for one simulation run."""

    model_config = ConfigDict(frozen=True)

    endpoint_url: str
    model_name: str
    temperature: float = DEFAULT_TEMPERATURE
    samples_per_question: int = DEFAULT_SAMPLES_PER_QUESTION
    flip_fraction: float = DEFAULT_FLIP_FRACTION
    max_tokens: int = 32
    max_in_flight: int = 4
    max_attempts: int = 5
    backoff_base: float = 0.5
    timeout: float = 60.0
    auth_env: str | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "SamplerConfig":
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be non-empty")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ValueError("flip_fraction must lie in [0, 1]")
        if self.samples_per_question < 1:
            raise ValueError("samples_per_question must be >= 1")
        if self.max_in_flight < 1 or self.max_attempts < 1:
            raise ValueError("max_in_flight and max_attempts must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        return self


class ModelTask(BaseModel):
    """One simulated model: its log identity and optional persona steering."""

    model_config = ConfigDict(frozen=True)

    model_id: str
    persona: str | None = None


def build_prompt(
    question: QuestionSpec, persona: str | None, flipped: bool
) -> list[dict[str, str]]:
    """Chat messages for one request.

    The system message carries the fixed survey instructions, plus the
    persona paragraph when steering is on. The user message presents the
    question and its options; a flipped presentation lists the same
    ascending values with the label order reversed (only ordinal scales
    may be flipped). Construction is deterministic.
    """
    from .ingestion import presented_options

    system = SYSTEM_PROMPT
    if persona:
        system = system + "\n\n" + persona_paragraph(persona)
    options = presented_options(question, flipped)
    lines = "\n".join(f"{value}: {label}" for value, label in options)
    user = f"{question.id}: {question.text}\nAvailable responses:\n{lines}"
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


def flip_flags(
    seed: int, model_id: str, question: QuestionSpec, count: int, flip_fraction: float
) -> np.ndarray:
    """Per-sample-index flip assignment for one (model, question) pair.

    Index ``i`` always gets the same flag for a given seed, regardless of
    how many samples are drawn or in which order requests finish, so
    resumed runs continue the same assignment. Nominal scales never flip.
    """
    if question.scale is not ScaleKind.ORDINAL or question.diameter == 0:
        return np.zeros(count, dtype=bool)
    rng = seeded_rng(seed, f"flip/{model_id}/{question.id}")
    return rng.random(count) < flip_fraction


class _TransientFailure(Exception):
    """Retriable transport problem (network error, 429, 5xx, bad body)."""


def _auth_headers(config: SamplerConfig) -> dict[str, str]:
    if not config.auth_env:
        return {}
    token = os.environ.get(config.auth_env, "")
    if not token:
        raise SimulationError(
            f"auth environment variable {config.auth_env!r} is not set"
        )
    return {"Authorization": f"Bearer {token}"}


def _post_once(
    client: httpx.Client, config: SamplerConfig, headers: Mapping[str, str],
    messages: list[dict[str, str]],
) -> str:
    payload = {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "n": 1,
    }
    try:
        response = client.post(config.endpoint_url, json=payload, headers=dict(headers))
    except httpx.HTTPError as exc:
        raise _TransientFailure(f"network error: {exc}") from exc
    if response.status_code in (408, 429) or response.status_code >= 500:
        retry_after = response.headers.get("retry-after")
        raise _TransientFailure(
            f"status {response.status_code}"
            + (f" (retry-after {retry_after})" if retry_after else "")
        )
    if response.status_code != 200:
        raise SimulationError(
            f"endpoint rejected the request with status {response.status_code}: "
            f"{response.text[:200]}"
        )
    try:
        body = response.json()
        content = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise _TransientFailure(f"unparseable response body: {exc}") from exc
    if not isinstance(content, str):
        raise _TransientFailure("response content is not text")
    return content


def _sample_one(
    client: httpx.Client,
    config: SamplerConfig,
    headers: Mapping[str, str],
    task: ModelTask,
    question: QuestionSpec,
    sample_index: int,
    flipped: bool,
) -> RawGenerationLog:
    """Run one sample to completion: retries with exponential backoff,
    ending in either an OK record or a TransportFailure record."""
    messages = build_prompt(question, task.persona, flipped)
    last_error = ""
    for attempt in range(1, config.max_attempts + 1):
        try:
            text = _post_once(client, config, headers, messages)
        except _TransientFailure as exc:
            last_error = str(exc)
            if attempt < config.max_attempts:
                time.sleep(config.backoff_base * 2 ** (attempt - 1))
            continue
        return RawGenerationLog(
            model_id=task.model_id,
            question_id=question.id,
            raw_text=text,
            flipped=flipped,
            temperature=config.temperature,
            status=STATUS_OK,
            attempt=attempt,
            sample_index=sample_index,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
    log.warning(
        "giving up on %s/%s sample %d after %d attempts: %s",
        task.model_id, question.id, sample_index, config.max_attempts, last_error,
    )
    return RawGenerationLog(
        model_id=task.model_id,
        question_id=question.id,
        raw_text="",
        flipped=flipped,
        temperature=config.temperature,
        status=STATUS_TRANSPORT_FAILURE,
        attempt=config.max_attempts,
        sample_index=sample_index,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def sample_question(
    config: SamplerConfig,
    task: ModelTask,
    question: QuestionSpec,
    n_samples: int | None = None,
    start_index: int = 0,
    client: httpx.Client | None = None,
    transport: httpx.BaseTransport | None = None,
) -> list[RawGenerationLog]:
    """Draw samples for one (model, question) pair with bounded concurrency.

    Returns records ordered by sample index. ``start_index`` shifts the
    index range so resumed runs extend the earlier flip assignment
    instead of restarting it.
    """
    n = config.samples_per_question if n_samples is None else n_samples
    headers = _auth_headers(config)
    flags = flip_flags(
        config.seed, task.model_id, question, start_index + n, config.flip_fraction
    )[start_index:]
    own_client = client is None
    if own_client:
        client = httpx.Client(transport=transport, timeout=config.timeout)
    try:
        records: list[RawGenerationLog | None] = [None] * n
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            futures = {
                pool.submit(
                    _sample_one, client, config, headers, task, question,
                    start_index + i, bool(flags[i]),
                ): i
                for i in range(n)
            }
            for fut in as_completed(futures):
                records[futures[fut]] = fut.result()
        return [r for r in records if r is not None]
    finally:
        if own_client:
            client.close()


@dataclass
class SimulationSummary:
    """Counts from one (possibly resumed) simulation run."""

    pairs_total: int = 0
    pairs_skipped: int = 0
    records_written: int = 0
    ok_records: int = 0
    transport_failures: int = 0
    flipped_records: int = 0


def _existing_progress(path: Path) -> dict[tuple[str, str], dict[str, int]]:
    """Scan an existing log for per-pair OK counts and the largest index."""
    progress: dict[tuple[str, str], dict[str, int]] = {}
    if not path.exists():
        return progress
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["model_id"]), str(rec["question_id"]))
                status = rec.get("status", STATUS_OK)
                index = int(rec.get("sample_index", -1))
            except (ValueError, KeyError, TypeError):
                continue
            slot = progress.setdefault(key, {"ok": 0, "max_index": -1})
            if status == STATUS_OK:
                slot["ok"] += 1
            slot["max_index"] = max(slot["max_index"], index)
    return progress


def _log_line(rec: RawGenerationLog) -> str:
    return json.dumps(
        {
            "model_id": rec.model_id,
            "question_id": rec.question_id,
            "sample_index": rec.sample_index,
            "raw_text": rec.raw_text,
            "flipped": rec.flipped,
            "temperature": rec.temperature,
            "attempt": rec.attempt,
            "status": rec.status,
            "timestamp": rec.timestamp,
        }
    )


def run_simulation(
    config: SamplerConfig,
    catalog: Catalog,
    tasks: Sequence[ModelTask],
    out_path: str | Path,
    resume: bool = True,
    transport: httpx.BaseTransport | None = None,
) -> SimulationSummary:
    """Sample every (model, question) pair into an append-only NDJSON log.

    With ``resume`` on, pairs that already hold enough OK records are
    skipped and partially sampled pairs only draw the remainder, with
    sample indices continuing past the largest already logged. Appends
    go through a single writer, one line per record, flushed as they
    complete.
    """
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _auth_headers(config)  # fail fast on missing credentials
    progress = _existing_progress(path) if resume else {}
    summary = SimulationSummary()
    with httpx.Client(transport=transport, timeout=config.timeout) as client, open(
        path, "a", encoding="utf-8"
    ) as fh:
        for task in tasks:
            for question in catalog.questions:
                summary.pairs_total += 1
                done = progress.get((task.model_id, question.id), {"ok": 0, "max_index": -1})
                todo = config.samples_per_question - done["ok"]
                if todo <= 0:
                    summary.pairs_skipped += 1
                    continue
                start = done["max_index"] + 1
                records = sample_question(
                    config, task, question,
                    n_samples=todo, start_index=start, client=client,
                )
                for rec in records:
                    fh.write(_log_line(rec) + "\n")
                    summary.records_written += 1
                    if rec.status == STATUS_OK:
                        summary.ok_records += 1
                        if rec.flipped:
                            summary.flipped_records += 1
                    else:
                        summary.transport_failures += 1
                fh.flush()
    return summary
