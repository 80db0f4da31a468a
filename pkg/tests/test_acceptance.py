"""Acceptance gate: the nine guarantees this package ships under.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail
line per criterion:

1. Closed-form distances match an exact LP transport oracle (1e-9).
2. Metric axioms hold at scale; variance is bounded and relabel-proof.
3. Weighted ground-truth tallies match a brute-force oracle (1e-12).
4. Correlations match an independent Pearson implementation (1e-12),
   with exactly symmetric unit-diagonal output.
5. The full pipeline recovers a known population's structure: a perfect
   model scores near the ceiling, a column-permuted one near the floor.
6. Calibration bounds behave (null centered on zero, split-half near
   one) and are bitwise reproducible across worker counts.
7. Flipped-scale presentation round-trips to canonical exactly.
8. Degenerate inputs are rejected with typed errors, never crashes.
9. The CLI report carries the model/model/lower/upper band layout and
   validates against the published schema.
"""

import dataclasses
import json
import time
from types import SimpleNamespace

import httpx
import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from repsuite import (
    Catalog,
    EvalReport,
    FilterClause,
    Level,
    MeanMatrix,
    ModelTask,
    QuestionSpec,
    ResponseDistribution,
    ResponseOption,
    ResponsePanel,
    ResponseRecord,
    SamplerConfig,
    ScaleKind,
    SubgroupSpec,
    SynthConfig,
    brute_force_transport,
    column_permutations,
    correlation_matrix,
    evaluate_run,
    generate_population,
    ground_truth_distribution,
    mean_dissimilarity,
    mean_matrix,
    modal_collapse_count,
    normalized_variance,
    parse_simulation_log,
    permutation_null,
    report_json_schema,
    run_simulation,
    samples_from_distribution,
    simulated_distribution,
    split_half,
    structure_similarity,
    total_variation,
    wasserstein_normalized,
)
from repsuite.cli import main as cli_main
from repsuite.errors import (
    DegenerateStructureError,
    EmptyDistributionError,
    RepsuiteError,
)

from oracles import corr_matrix_reference, random_pmf, weighted_pmf


def make_question(values, qid="Q", scale=ScaleKind.ORDINAL):
    return QuestionSpec(
        id=qid,
        text="Synthetic acceptance prompt.",
        topic="general",
        scale=scale,
        responses=tuple(
            ResponseOption(value=int(v), label=f"Choice number {v}") for v in values
        ),
    )


def make_dist(support, mass, qid="Q"):
    return ResponseDistribution(
        question_id=qid, support=tuple(int(v) for v in support),
        mass=tuple(float(m) for m in mass), n_effective=100.0,
    )


def random_support(rng, size):
    start = int(rng.integers(-3, 5))
    gaps = rng.integers(1, 4, size=size - 1)
    return tuple(int(v) for v in np.concatenate([[start], start + np.cumsum(gaps)]))


# ---------------------------------------------------------------------------
# 1. Transport-oracle equivalence
# ---------------------------------------------------------------------------


def test_1_distances_match_exact_transport_oracle():
    rng = np.random.default_rng(0)
    t0 = time.monotonic()
    for _ in range(1000):
        size = int(rng.integers(2, 7))
        support = random_support(rng, size)
        question = make_question(support)
        p = make_dist(support, random_pmf(rng, size))
        q = make_dist(support, random_pmf(rng, size))

        values = np.asarray(support, dtype=float)
        move_cost = np.abs(values[:, None] - values[None, :])
        lp_w = brute_force_transport(p, q, move_cost) / question.diameter
        assert abs(lp_w - wasserstein_normalized(p, q, question)) <= 1e-9

        unit_cost = 1.0 - np.eye(size)
        lp_tv = brute_force_transport(p, q, unit_cost)
        assert abs(lp_tv - total_variation(p, q)) <= 1e-9
    assert time.monotonic() - t0 < 10.0


# ---------------------------------------------------------------------------
# 2. Metric axioms and variance bounds
# ---------------------------------------------------------------------------


def test_2_metric_axioms_hold_at_scale():
    rng = np.random.default_rng(1)
    pool = []
    for _ in range(60):
        size = int(rng.integers(2, 10))
        support = random_support(rng, size)
        shift = int(rng.integers(-5, 6))
        stretch = int(rng.integers(1, 4))
        relabeled = tuple(shift + stretch * v for v in support)
        pool.append((make_question(support), make_question(relabeled)))

    t0 = time.monotonic()
    for _ in range(10_000):
        question, relabeled_q = pool[int(rng.integers(len(pool)))]
        support = question.values
        p = make_dist(support, random_pmf(rng, len(support)))
        q = make_dist(support, random_pmf(rng, len(support)))

        for metric in (
            lambda a, b: wasserstein_normalized(a, b, question),
            total_variation,
        ):
            d_pq = metric(p, q)
            assert abs(d_pq - metric(q, p)) <= 1e-12  # symmetry
            assert metric(p, p) <= 1e-12  # identity
            assert -1e-12 <= d_pq <= 1.0 + 1e-12  # bounds

        var = normalized_variance(p, question)
        assert 0.0 <= var <= 0.25 + 1e-12
        relabeled_p = make_dist(relabeled_q.values, p.mass)
        assert abs(var - normalized_variance(relabeled_p, relabeled_q)) <= 1e-12
    assert time.monotonic() - t0 < 10.0


# ---------------------------------------------------------------------------
# 3. Weighted-distribution correctness
# ---------------------------------------------------------------------------


def test_3_weighted_tally_matches_brute_force():
    rng = np.random.default_rng(2)
    marker = make_question((0, 1), qid="QD", scale=ScaleKind.NOMINAL)
    subgroup = SubgroupSpec(
        id="members", dimension="d",
        filter=(FilterClause(question="QD", values=(1,)),),
    )
    for _ in range(1000):
        size = int(rng.integers(2, 7))
        support = random_support(rng, size)
        question = make_question(support)
        records = []
        expected_pairs = []
        for i in range(int(rng.integers(5, 40))):
            weight = float(rng.uniform(0.1, 5.0))
            member = int(rng.random() < 0.7)
            value = (
                None if rng.random() < 0.15
                else int(support[int(rng.integers(size))])
            )
            demographics = {"QD": member}
            records.append(ResponseRecord(
                respondent_id=f"r{i}", question_id="Q", response_value=value,
                weight=weight, demographics=demographics,
            ))
            if member and value is not None:
                expected_pairs.append((value, weight))

        if not expected_pairs:
            with pytest.raises(EmptyDistributionError):
                ground_truth_distribution(records, subgroup, question)
            continue

        expected = weighted_pmf(expected_pairs, support)
        dist = ground_truth_distribution(records, subgroup, question)
        assert dist.support == support
        assert np.max(np.abs(np.asarray(dist.mass) - expected)) <= 1e-12

        factor = float(rng.uniform(0.25, 40.0))
        rescaled = [
            dataclasses.replace(r, weight=r.weight * factor) for r in records
        ]
        redist = ground_truth_distribution(rescaled, subgroup, question)
        assert np.max(np.abs(np.asarray(redist.mass) - np.asarray(dist.mass))) <= 1e-12


# ---------------------------------------------------------------------------
# 4. Correlation pipeline oracle
# ---------------------------------------------------------------------------


def test_4_correlations_match_independent_pearson():
    rng = np.random.default_rng(3)
    for _ in range(25):
        values = rng.uniform(0.0, 1.0, size=(10, 50))
        means = MeanMatrix(
            row_ids=tuple(f"g{i:02d}" for i in range(10)),
            col_ids=tuple(f"Q{j:02d}" for j in range(50)),
            values=values,
            level=Level.QUESTION,
        )
        artifacts = correlation_matrix(means)
        assert artifacts.column_ids == means.col_ids
        reference = corr_matrix_reference(values)
        assert np.max(np.abs(artifacts.matrix - reference)) <= 1e-12
        matrix = artifacts.matrix
        assert np.array_equal(matrix, matrix.T)  # exactly symmetric
        assert all(matrix[i, i] == 1.0 for i in range(matrix.shape[0]))


# ---------------------------------------------------------------------------
# 5 & 6. End-to-end recovery on a large known population, bound behavior
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def known_population():
    """10 subgroups x 10,000 respondents x 40 questions, 3 latent factors."""
    t0 = time.monotonic()
    config = SynthConfig.generate(
        n_subgroups=10,
        n_respondents=10_000,
        questions_per_topic={"topic-a": 14, "topic-b": 13, "topic-c": 13},
        latent_dim=3,
        seed=0,
    )
    population = generate_population(config)
    catalog = population.catalog
    panel = ResponsePanel.from_records(population.records, catalog)
    questions = catalog.ordinal_questions()
    subgroup_ids = [s.id for s in catalog.subgroups]
    truth_cells = {
        (sid, q.id): panel.distribution(sid, q.id)
        for sid in subgroup_ids
        for q in questions
    }
    truth_means = mean_matrix(truth_cells, catalog)
    return SimpleNamespace(
        catalog=catalog,
        panel=panel,
        questions=questions,
        subgroup_ids=subgroup_ids,
        truth_cells=truth_cells,
        truth_means=truth_means,
        truth_corr=correlation_matrix(truth_means),
        build_seconds=time.monotonic() - t0,
    )


@pytest.fixture(scope="module")
def calibration_band(known_population):
    t0 = time.monotonic()
    floor_rho, floor_rmse = permutation_null(
        known_population.truth_means, iterations=1000, seed=0, workers=1
    )
    ceiling_rho, ceiling_rmse = split_half(
        known_population.panel, known_population.catalog,
        iterations=200, seed=0, workers=1,
    )
    return SimpleNamespace(
        floor_rho=floor_rho,
        floor_rmse=floor_rmse,
        ceiling_rho=ceiling_rho,
        ceiling_rmse=ceiling_rmse,
        build_seconds=time.monotonic() - t0,
    )


def test_5_pipeline_recovers_known_structure(known_population, calibration_band):
    run = known_population
    t0 = time.monotonic()

    # A perfect model draws 5,000 answers per question from each
    # subgroup's true pmf; its marginal dissimilarity must be tiny and
    # its structural correlation must reach the split-half ceiling.
    question_index = {q.id: q for q in run.questions}
    sim_cells = {}
    dissimilarities = []
    for sid in run.subgroup_ids:
        model_dists = {}
        for qid, question in question_index.items():
            samples = samples_from_distribution(
                run.truth_cells[(sid, qid)], question,
                f"perfect:{sid}", 5000, seed=11,
            )
            model_dists[qid] = simulated_distribution(samples, question)
        truth_dists = {qid: run.truth_cells[(sid, qid)] for qid in question_index}
        dissimilarities.append(
            mean_dissimilarity(model_dists, truth_dists, run.catalog).value
        )
        for qid, dist in model_dists.items():
            sim_cells[(sid, qid)] = dist

    dissimilarity = float(np.mean(dissimilarities))
    assert dissimilarity < 0.03

    sim_corr = correlation_matrix(mean_matrix(sim_cells, run.catalog))
    perfect = structure_similarity(run.truth_corr, sim_corr)
    ceiling = calibration_band.ceiling_rho.mean
    assert ceiling - 0.05 <= perfect.rho <= 1.0

    # A column-permuted model answers each question from a shuffled
    # subgroup; its correlation must land at the permutation-null floor.
    perms = column_permutations(run.subgroup_ids, list(question_index), seed=17)
    permuted_cells = {
        (sid, qid): run.truth_cells[(perms[qid][sid], qid)]
        for sid in run.subgroup_ids
        for qid in question_index
    }
    permuted_corr = correlation_matrix(mean_matrix(permuted_cells, run.catalog))
    permuted = structure_similarity(run.truth_corr, permuted_corr)
    floor = calibration_band.floor_rho.mean
    assert abs(permuted.rho - floor) <= 0.05

    elapsed = time.monotonic() - t0
    assert elapsed + run.build_seconds + calibration_band.build_seconds < 120.0


def test_6_bounds_center_and_reproduce(known_population, calibration_band):
    run = known_population
    band = calibration_band
    t0 = time.monotonic()

    assert -0.05 <= band.floor_rho.mean <= 0.05
    assert band.ceiling_rho.mean >= 0.95
    assert band.floor_rho.iterations == 1000
    assert band.ceiling_rho.iterations == 200

    # bitwise reproducibility across worker counts
    refloor = permutation_null(run.truth_means, iterations=1000, seed=0, workers=4)
    assert refloor == (band.floor_rho, band.floor_rmse)
    receiling = split_half(
        run.panel, run.catalog, iterations=200, seed=0, workers=3
    )
    assert receiling == (band.ceiling_rho, band.ceiling_rmse)

    elapsed = time.monotonic() - t0
    assert elapsed + band.build_seconds < 180.0


# ---------------------------------------------------------------------------
# 7. Flip round-trip
# ---------------------------------------------------------------------------


def label_keyed_stub():
    """Deterministic endpoint that picks answers by label, not position.

    The k-th request for a question answers the k-th label in sorted
    label order, quoting whatever value that label is presented under.
    A presentation-independent endpoint like this must yield identical
    canonical distributions whether or not the scale order is flipped.
    """
    counters: dict[str, int] = {}

    def handler(request):
        payload = json.loads(request.content)
        user = payload["messages"][-1]["content"]
        qid = user.split(":", 1)[0]
        pairs = []
        for line in user.split("Available responses:\n", 1)[1].splitlines():
            value, label = line.split(": ", 1)
            pairs.append((int(value), label))
        k = counters.get(qid, 0)
        counters[qid] = k + 1
        label = sorted(label for _, label in pairs)[k % len(pairs)]
        value = next(v for v, l in pairs if l == label)
        return httpx.Response(
            200, json={"choices": [{"message": {"content": f"{value}: {label}"}}]}
        )

    return handler


def test_7_flip_round_trip_is_exact(tmp_path):
    questions = (
        make_question(range(1, 11), qid="Q_WIDE"),
        make_question(range(1, 5), qid="Q_AGREE"),
        make_question(range(0, 3), qid="Q_ZERO"),
        make_question((1, 2, 4, 8), qid="Q_GAPPED"),
        make_question((1, 2, 3), qid="Q_NOMINAL", scale=ScaleKind.NOMINAL),
    )
    catalog = Catalog(questions=questions, subgroups=())
    logs = {}
    for name, fraction in (("canonical", 0.0), ("flipped", 1.0)):
        config = SamplerConfig(
            endpoint_url="https://example.test/v1/chat/completions",
            model_name="stub",
            samples_per_question=120,
            flip_fraction=fraction,
            max_in_flight=1,
            backoff_base=0.0,
            seed=5,
        )
        path = tmp_path / f"{name}.ndjson"
        run_simulation(
            config, catalog, [ModelTask(model_id="stub:all")], path,
            transport=httpx.MockTransport(label_keyed_stub()),
        )
        logs[name] = parse_simulation_log(path, catalog)

    for question in questions:
        canonical = [
            s.cleaned_value for s in logs["canonical"].samples
            if s.question_id == question.id
        ]
        unflipped = [
            s.cleaned_value for s in logs["flipped"].samples
            if s.question_id == question.id
        ]
        assert canonical == unflipped  # exact, sample by sample
        if question.scale is ScaleKind.ORDINAL:
            flipped_samples = [
                s for s in logs["flipped"].samples if s.question_id == question.id
            ]
            assert all(s.flipped for s in flipped_samples)
        dist_canonical = simulated_distribution(
            [s for s in logs["canonical"].samples if s.question_id == question.id],
            question,
        )
        dist_flipped = simulated_distribution(
            [s for s in logs["flipped"].samples if s.question_id == question.id],
            question,
        )
        assert dist_canonical == dist_flipped


# ---------------------------------------------------------------------------
# 8. Degenerate-input handling
# ---------------------------------------------------------------------------


def fuzz_catalog(rng):
    questions = []
    n_questions = int(rng.integers(1, 6))
    for j in range(n_questions):
        size = int(rng.integers(1, 6))  # size 1 = degenerate on purpose
        scale = ScaleKind.NOMINAL if rng.random() < 0.3 else ScaleKind.ORDINAL
        questions.append(make_question(
            random_support(rng, size) if size > 1 else (1,),
            qid=f"Q{j}", scale=scale,
        ))
    subgroups = []
    for i in range(int(rng.integers(0, 4))):
        target = f"Q{int(rng.integers(0, n_questions + 1))}"  # may dangle
        question = next((q for q in questions if q.id == target), None)
        values = (
            (int(rng.choice(question.values)),)
            if question is not None and rng.random() < 0.8
            else (99,)
        )
        subgroups.append(SubgroupSpec(
            id=f"s{i}", dimension=rng.choice(["d1", "d2"]),
            filter=(FilterClause(question=target, values=values),),
        ))
    return Catalog(questions=tuple(questions), subgroups=tuple(subgroups))


def fuzz_human_csv(rng, catalog, path):
    qids = [q.id for q in catalog.questions]
    header = ["respondent_id", "weight", *qids]
    if rng.random() < 0.2:
        header.append("junk_column")
    lines = [",".join(header)]
    for i in range(int(rng.integers(0, 12))):
        rid = f"r{i}" if rng.random() < 0.9 else "r0"  # sometimes duplicated
        weight = rng.choice(["1.0", "2.5", "0", "-1", "x"], p=[0.6, 0.2, 0.1, 0.05, 0.05])
        cells = [rid, str(weight)]
        for q in catalog.questions:
            roll = rng.random()
            if roll < 0.2:
                cells.append("")
            elif roll < 0.3:
                cells.append("banana")
            else:
                cells.append(str(int(rng.choice(q.values))))
        while len(cells) < len(header):
            cells.append("")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def fuzz_log(rng, catalog, path):
    texts = ["2: Choice number 2", "Choice number 2", "2", "garbage", ""]
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(int(rng.integers(0, 40))):
            question = catalog.questions[int(rng.integers(len(catalog.questions)))]
            model = rng.choice(["m:s0", "m:s1", "m:nosuch", "plain"])
            fh.write(json.dumps({
                "model_id": str(model),
                "question_id": question.id if rng.random() < 0.9 else "Q_UNKNOWN",
                "sample_index": i,
                "raw_text": str(rng.choice(texts)),
                "flipped": bool(rng.random() < 0.3),
                "temperature": 0.9,
                "attempt": 1,
                "status": "ok" if rng.random() < 0.9 else "transport_failure",
            }) + "\n")


def test_8_degenerate_inputs_never_crash(tmp_path):
    # point-mass detection
    point = make_dist((1, 2, 3), (0.0, 1.0, 0.0), qid="A")
    spread = make_dist((1, 2, 3), (0.2, 0.5, 0.3), qid="B")
    assert modal_collapse_count({"A": point, "B": spread}) == 1

    # empty distributions carry a typed error
    question = make_question((1, 2, 3))
    marker = make_question((0, 1), qid="QD", scale=ScaleKind.NOMINAL)
    subgroup = SubgroupSpec(
        id="s", dimension="d", filter=(FilterClause(question="QD", values=(1,)),),
    )
    outsider = ResponseRecord(
        respondent_id="r0", question_id="Q", response_value=2,
        weight=1.0, demographics={"QD": 0},
    )
    with pytest.raises(EmptyDistributionError):
        ground_truth_distribution([outsider], subgroup, question)

    # structure without usable ordinal columns carries a typed error
    nominal_catalog = Catalog(
        questions=(make_question((1, 2), qid="QN", scale=ScaleKind.NOMINAL), marker),
        subgroups=(subgroup,),
    )
    nominal_dist = make_dist((1, 2), (0.5, 0.5), qid="QN")
    with pytest.raises(DegenerateStructureError):
        mean_matrix({("s1", "QN"): nominal_dist, ("s2", "QN"): nominal_dist},
                    nominal_catalog)

    # constant upper triangles yield a missing correlation, not a crash
    rng = np.random.default_rng(4)
    two_cols = MeanMatrix(
        row_ids=("g0", "g1", "g2", "g3"),
        col_ids=("QA", "QB"),
        values=rng.uniform(0.2, 0.8, size=(4, 2)),
        level=Level.QUESTION,
    )
    comparison = structure_similarity(
        correlation_matrix(two_cols), correlation_matrix(two_cols)
    )
    assert comparison.rho is None
    assert comparison.rmse == 0.0
    assert comparison.n_pairs == 1

    # schema-valid fuzzed inputs either evaluate or fail with typed errors
    from repsuite import dump_catalog

    rng = np.random.default_rng(5)
    outcomes = {"report": 0, "rejected": 0}
    for trial in range(40):
        catalog = fuzz_catalog(rng)
        catalog_path = tmp_path / f"catalog{trial}.json"
        dump_catalog(catalog, catalog_path)
        human_path = tmp_path / f"human{trial}.csv"
        fuzz_human_csv(rng, catalog, human_path)
        logs_path = tmp_path / f"logs{trial}.ndjson"
        fuzz_log(rng, catalog, logs_path)
        try:
            report = evaluate_run(catalog_path, human_path, logs_path)
        except RepsuiteError:
            outcomes["rejected"] += 1
        else:
            assert isinstance(report, EvalReport)
            outcomes["report"] += 1
    assert outcomes["report"] > 0 and outcomes["rejected"] > 0


# ---------------------------------------------------------------------------
# 9. Report fidelity
# ---------------------------------------------------------------------------


def test_9_report_carries_band_layout_and_schema(tmp_path):
    runner = CliRunner()
    data_dir = tmp_path / "data"
    result = runner.invoke(cli_main, [
        "synth", "--out", str(data_dir), "--seed", "5", "--subgroups", "6",
        "--respondents", "150", "--samples", "120",
    ])
    assert result.exit_code == 0, result.output
    report_dir = tmp_path / "report"
    result = runner.invoke(cli_main, [
        "evaluate",
        "--catalog", str(data_dir / "catalog.json"),
        "--human", str(data_dir / "human.csv"),
        "--logs", str(data_dir / "logs.ndjson"),
        "--out", str(report_dir),
        "--bounds", "25", "--seed", "3",
    ])
    assert result.exit_code == 0, result.output

    document = json.loads((report_dir / "report.json").read_text(encoding="utf-8"))
    jsonschema.validate(instance=document, schema=report_json_schema())

    section = document["structure"]["question"]
    # four-column band layout: one column per model, then Lower and Upper
    models = sorted(section["models"])
    assert models == ["perfect", "permuted"]
    assert section["lower"]["rho"] is not None
    assert section["upper"]["rho"] is not None
    assert set(section["position"]) == set(models)
    for name in models:
        metrics = section["models"][name]
        assert {"rho", "rmse", "n_pairs"} <= set(metrics)
    band = (section["lower"]["rho"], section["upper"]["rho"])
    assert band[0] < band[1]
    assert section["models"]["perfect"]["rho"] > section["models"]["permuted"]["rho"]
    for sidecar in ("distances.csv", "variances.csv", "corr_true.csv",
                    "corr_sim.csv", "bounds_trace.csv"):
        assert (report_dir / sidecar).exists(), sidecar
