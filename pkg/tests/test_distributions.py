"""Weighted tallies, pooling, topic aggregation, and the columnar panel."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repsuite import (
    Catalog,
    EmptyDistributionError,
    FilterClause,
    IngestError,
    Level,
    MeanMatrix,
    ResponsePanel,
    ResponseRecord,
    SubgroupSpec,
    aggregate_by_dimension,
    aggregate_by_topic,
    ground_truth_distribution,
    simulated_distribution,
    write_distributions_csv,
)

from conftest import make_dist, make_records, make_samples, ordinal_question

from oracles import weighted_pmf


class TestGroundTruthDistribution:
    def test_weighted_tally(self, catalog, records):
        left = catalog.subgroup_index()["left"]
        q = catalog.question_index()["Q_TRUST"]
        dist = ground_truth_distribution(records, left, q)
        # left answers on Q_TRUST: r1=1 (w1), r2=2 (w2), r3=2 (w1), r4=1 (w0.5)
        assert dist.support == (1, 2, 3, 4)
        assert dist.mass == pytest.approx((1.5 / 4.5, 3.0 / 4.5, 0.0, 0.0), abs=1e-12)
        assert dist.n_effective == pytest.approx(4.5)

    def test_two_answers_one_respondent_double_weight(self, catalog):
        # Answers [1, 1, 2] with weights [1, 1, 2] put equal mass on 1 and 2.
        q = catalog.question_index()["Q_TRUST"]
        sub = catalog.subgroup_index()["left"]
        recs = []
        for rid, w, v in [("a", 1.0, 1), ("b", 1.0, 1), ("c", 2.0, 2)]:
            recs.extend(make_records(rid, w, {"Q_IDEOLOGY": 1, "Q_TRUST": v}))
        dist = ground_truth_distribution(recs, sub, q)
        assert dist.mass == (0.5, 0.5, 0.0, 0.0)

    def test_nonresponse_excluded_from_both_sides(self, catalog, records):
        right = catalog.subgroup_index()["right"]
        q = catalog.question_index()["Q_SAT"]
        dist = ground_truth_distribution(records, right, q)
        # r8 (weight 1.5) answered None on Q_SAT: drops out entirely.
        assert dist.n_effective == pytest.approx(4.0)
        assert dist.mass == pytest.approx((0, 0, 0, 0.5, 0.5))

    def test_empty_subgroup_raises(self, catalog, records):
        q = catalog.question_index()["Q_TRUST"]
        ghost = SubgroupSpec(
            id="ghost", dimension="ideology",
            filter=(FilterClause(question="Q_IDEOLOGY", values=(5,)),),
        )
        with pytest.raises(EmptyDistributionError):
            ground_truth_distribution(records, ghost, q)

    def test_weight_rescaling_invariance(self, catalog, records):
        left = catalog.subgroup_index()["left"]
        q = catalog.question_index()["Q_TRUST"]
        scaled = [
            ResponseRecord(
                respondent_id=r.respondent_id, question_id=r.question_id,
                response_value=r.response_value, weight=r.weight * 17.0,
                demographics=r.demographics,
            )
            for r in records
        ]
        base = ground_truth_distribution(records, left, q)
        after = ground_truth_distribution(scaled, left, q)
        assert after.mass == pytest.approx(base.mass, abs=1e-15)

    @settings(max_examples=40)
    @given(st.data())
    def test_matches_brute_force_tally(self, data):
        q = ordinal_question("Q_SAT", 5, topic="wellbeing")
        sub = SubgroupSpec(
            id="left", dimension="ideology",
            filter=(FilterClause(question="Q_IDEOLOGY", max_value=3),),
        )
        n = data.draw(st.integers(min_value=1, max_value=30))
        pairs = []
        recs = []
        for i in range(n):
            value = data.draw(st.sampled_from(q.values))
            weight = data.draw(
                st.floats(min_value=0.01, max_value=50, allow_nan=False)
            )
            pairs.append((value, weight))
            recs.extend(
                make_records(f"r{i}", weight, {"Q_IDEOLOGY": 1, "Q_SAT": value})
            )
        dist = ground_truth_distribution(recs, sub, q)
        assert dist.mass == pytest.approx(
            weighted_pmf(pairs, q.values), abs=1e-12
        )


class TestSimulatedDistribution:
    def test_uniform_tally_skips_invalid(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        samples = make_samples("persona:left", "Q_TRUST", [2, 2, 4, None, None])
        dist = simulated_distribution(samples, q)
        assert dist.mass == pytest.approx((0.0, 2 / 3, 0.0, 1 / 3))
        assert dist.n_effective == 3.0

    def test_all_invalid_raises(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        samples = make_samples("persona:left", "Q_TRUST", [None, None])
        with pytest.raises(EmptyDistributionError):
            simulated_distribution(samples, q)

    def test_rejects_wrong_question(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        samples = make_samples("persona:left", "Q_SAT", [2])
        with pytest.raises(ValueError, match="Q_SAT"):
            simulated_distribution(samples, q)

    def test_rejects_mixed_models(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        samples = make_samples("a:left", "Q_TRUST", [2]) + make_samples(
            "b:left", "Q_TRUST", [2]
        )
        with pytest.raises(ValueError, match="model"):
            simulated_distribution(samples, q)


class TestAggregateByDimension:
    def test_pools_raw_weighted_responses(self, catalog):
        # left: one answer 1 with weight 1; right: one answer 2 with weight 3.
        # Pooling at the response level gives 0.25/0.75, NOT the 0.5/0.5 a
        # mean-of-distributions would produce.
        q = catalog.question_index()["Q_TRUST"]
        recs = make_records("a", 1.0, {"Q_IDEOLOGY": 1, "Q_TRUST": 1})
        recs += make_records("b", 3.0, {"Q_IDEOLOGY": 9, "Q_TRUST": 2})
        dist = aggregate_by_dimension(recs, catalog.subgroups, "ideology", q)
        assert dist.mass == (0.25, 0.75, 0.0, 0.0)

    def test_respondent_in_dimension_counted_once(self, catalog):
        # Both clauses live on the same dimension; a respondent matching one
        # subgroup contributes once, and matching none contributes nothing.
        q = catalog.question_index()["Q_TRUST"]
        recs = make_records("a", 1.0, {"Q_IDEOLOGY": 5, "Q_TRUST": 1})  # neither
        recs += make_records("b", 1.0, {"Q_IDEOLOGY": 2, "Q_TRUST": 2})  # left
        dist = aggregate_by_dimension(recs, catalog.subgroups, "ideology", q)
        assert dist.mass == (0.0, 1.0, 0.0, 0.0)

    def test_pools_samples_by_model_target(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        samples = make_samples("persona:left", "Q_TRUST", [1, 1])
        samples += make_samples("persona:right", "Q_TRUST", [2, 2])
        samples += make_samples("persona:red", "Q_TRUST", [4, 4])  # other dim
        dist = aggregate_by_dimension(samples, catalog.subgroups, "ideology", q)
        assert dist.mass == (0.5, 0.5, 0.0, 0.0)

    def test_unknown_dimension(self, catalog):
        q = catalog.question_index()["Q_TRUST"]
        with pytest.raises(ValueError, match="dimension"):
            aggregate_by_dimension([], catalog.subgroups, "astrology", q)


class TestAggregateByTopic:
    def test_unweighted_mean_of_question_means(self, catalog):
        # Q_TRUST (community) alone; Q_IDEOLOGY (politics) alone;
        # wellbeing from Q_SAT. Rows: two subgroups.
        m = MeanMatrix(
            row_ids=("left", "right"),
            col_ids=("Q_IDEOLOGY", "Q_TRUST", "Q_SAT"),
            values=np.array([[0.2, 0.6, 0.4], [0.8, 0.2, np.nan]]),
            level=Level.QUESTION,
        )
        topics = aggregate_by_topic(m, catalog)
        assert topics.level is Level.TOPIC
        assert topics.col_ids == ("politics", "community", "wellbeing")
        assert topics.values[0] == pytest.approx([0.2, 0.6, 0.4])
        assert topics.values[1][0] == pytest.approx(0.8)
        assert np.isnan(topics.values[1][2])  # no data for wellbeing

    def test_two_questions_same_topic_average(self):
        qa = ordinal_question("A1", 5, topic="alpha")
        qb = ordinal_question("A2", 5, topic="alpha")
        cat = Catalog(
            questions=(qa, qb),
            subgroups=(
                SubgroupSpec(id="s1", dimension="d",
                             filter=(FilterClause(question="A1", values=(1,)),)),
            ),
        )
        m = MeanMatrix(
            row_ids=("s1", "s2"), col_ids=("A1", "A2"),
            values=np.array([[0.2, 0.6], [0.5, 0.5]]),
            level=Level.QUESTION,
        )
        topics = aggregate_by_topic(m, cat)
        assert topics.col_ids == ("alpha",)
        assert topics.values[0, 0] == pytest.approx(0.4)
        assert topics.values[1, 0] == pytest.approx(0.5)


class TestResponsePanel:
    def test_matches_record_level_distribution(self, catalog, records):
        panel = ResponsePanel.from_records(records, catalog)
        for sid in ("left", "right"):
            sub = catalog.subgroup_index()[sid]
            for qid in ("Q_TRUST", "Q_SAT", "Q_IDEOLOGY", "Q_COLOR"):
                q = catalog.question_index()[qid]
                direct = ground_truth_distribution(records, sub, q)
                assert panel.distribution(sid, qid) == direct

    def test_dimension_distribution_matches_record_level(self, catalog, records):
        panel = ResponsePanel.from_records(records, catalog)
        q = catalog.question_index()["Q_TRUST"]
        direct = aggregate_by_dimension(records, catalog.subgroups, "ideology", q)
        assert panel.dimension_distribution("ideology", "Q_TRUST") == direct

    def test_membership(self, catalog, records):
        panel = ResponsePanel.from_records(records, catalog)
        assert panel.n_respondents == 8
        assert len(panel.subgroup_rows("left")) == 4
        assert len(panel.subgroup_rows("right")) == 4
        assert len(panel.subgroup_rows("red")) == 4

    def test_mean_matrix_cell_formula(self, catalog, records):
        panel = ResponsePanel.from_records(records, catalog)
        means = panel.subgroup_mean_matrix(["left", "right"])
        q = catalog.question_index()["Q_TRUST"]
        left_rows = [("r1", 1.0, 1), ("r2", 2.0, 2), ("r3", 1.0, 2), ("r4", 0.5, 1)]
        expected = sum(w * (v - q.min_value) for _, w, v in left_rows) / (
            sum(w for _, w, _ in left_rows) * q.diameter
        )
        col = means.col_ids.index("Q_TRUST")
        row = means.row_ids.index("left")
        assert means.values[row, col] == pytest.approx(expected, abs=1e-12)

    def test_unknown_question_rejected(self, catalog):
        recs = [
            ResponseRecord(
                respondent_id="x", question_id="Q_NOPE",
                response_value=1, weight=1.0,
            )
        ]
        with pytest.raises(IngestError, match="Q_NOPE"):
            ResponsePanel.from_records(recs, catalog)

    def test_conflicting_weights_rejected(self, catalog):
        recs = [
            ResponseRecord(respondent_id="x", question_id="Q_TRUST",
                           response_value=1, weight=1.0),
            ResponseRecord(respondent_id="x", question_id="Q_SAT",
                           response_value=1, weight=2.0),
        ]
        with pytest.raises(IngestError, match="weight"):
            ResponsePanel.from_records(recs, catalog)

    def test_mixture_identity(self, catalog, records):
        # The pooled pmf is the n_effective-weighted mixture of the
        # member-subgroup pmfs when subgroups partition the dimension.
        panel = ResponsePanel.from_records(records, catalog)
        pooled = panel.dimension_distribution("ideology", "Q_TRUST")
        left = panel.distribution("left", "Q_TRUST")
        right = panel.distribution("right", "Q_TRUST")
        total = left.n_effective + right.n_effective
        mix = [
            (left.n_effective * ml + right.n_effective * mr) / total
            for ml, mr in zip(left.mass, right.mass)
        ]
        assert pooled.mass == pytest.approx(mix, abs=1e-12)


class TestWriteDistributionsCsv:
    def test_long_format(self, catalog, tmp_path):
        q = catalog.question_index()["Q_TRUST"]
        dist = make_dist(q, [0.5, 0.5, 0.0, 0.0], n_effective=4.0)
        out = tmp_path / "d.csv"
        write_distributions_csv(out, [dist])
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "question_id,value,mass,n_effective"
        assert lines[1] == "Q_TRUST,1,0.5,4.0"
        assert len(lines) == 5
