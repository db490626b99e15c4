import json
import random
from dataclasses import replace

import pytest

from beliefsim import (
    Direction,
    DriftEvent,
    ErrorModel,
    FeatureVector,
    GroundTruthSchedule,
    Proposition,
    Rule,
    RuleKind,
    Scenario,
    Topology,
    Trace,
    TraceRecord,
    ValidationError,
    build,
    build_intersection_scenario,
    compute_metrics,
    lattices_by_step,
    run,
    trace_from_jsonl,
    trace_to_jsonl,
)
from beliefsim.rules import MAJORITY, MOST_EXPERT

from support import make_schema, random_population, simple_scenario

S = Direction.SMALLER_IS_BETTER


class TestRun:
    def test_noiseless_scenario_is_perfectly_accurate(self):
        schema, agents = random_population(random.Random(3), 5, 2)
        scenario = simple_scenario(
            schema,
            agents,
            {a: 0.0 for a, _ in agents},
            rules=(MOST_EXPERT, MAJORITY, Rule(RuleKind.SUBGROUP_EXPERT, 2, True)),
            steps=4,
            trials=25,
        )
        _, metrics = run(scenario)
        for rule_metrics in metrics.rules.values():
            assert rule_metrics.accuracy == 1.0
            assert rule_metrics.tie_rate == 0.0

    def test_reruns_are_byte_identical(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=50)
        trace_a, metrics_a = run(scenario)
        trace_b, metrics_b = run(scenario)
        assert trace_to_jsonl(trace_a) == trace_to_jsonl(trace_b)
        assert metrics_a == metrics_b

    def test_jobs_do_not_change_output(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=40)
        trace_a, _ = run(scenario, jobs=1)
        trace_b, _ = run(scenario, jobs=4)
        assert trace_to_jsonl(trace_a) == trace_to_jsonl(trace_b)

    def test_different_seeds_have_overlapping_cis(self):
        scenario = build_intersection_scenario()
        base = replace(scenario, trials=3000)
        other = replace(base, seed=4242)
        _, m_a = run(base)
        _, m_b = run(other)
        for name in m_a.rules:
            a, b = m_a.rules[name], m_b.rules[name]
            assert a.ci_low <= b.ci_high and b.ci_low <= a.ci_high

    def test_invalid_scenario_rejected_before_running(self):
        schema = make_schema((S,))
        scenario = simple_scenario(
            schema, (("a", FeatureVector((1,))),), {"a": 0.1}, steps=0
        )
        with pytest.raises(ValidationError):
            run(scenario)

    def test_record_count_and_shape(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=5)
        trace, _ = run(scenario)
        assert len(trace.records) == 5 * scenario.steps * len(scenario.rules)
        record = trace.records[0]
        assert set(record.raw) == {"pedestrian"}
        assert set(record.raw["pedestrian"]) == {"s1", "s2", "s3", "s4"}

    def test_multiple_propositions_have_independent_streams(self):
        schema = make_schema((S,))
        agents = (("a", FeatureVector((1,))), ("b", FeatureVector((2,))))
        two_props = Scenario(
            schema=schema,
            agents=agents,
            propositions=(Proposition("p1"), Proposition("p2")),
            ground_truth={
                "p1": GroundTruthSchedule.constant("p1", True),
                "p2": GroundTruthSchedule.constant("p2", False),
            },
            error_model=ErrorModel.fixed({"a": 0.5, "b": 0.5}),
            topology=Topology.full_broadcast(),
            rules=(MAJORITY,),
            steps=1,
            trials=200,
            seed=5,
        )
        trace, metrics = run(two_props)
        raw_p1 = [r.raw["p1"]["a"] for r in trace.records]
        raw_p2 = [r.raw["p2"]["a"] for r in trace.records]
        assert raw_p1 != raw_p2  # distinct proposition streams
        assert metrics.rules["majority"].outcomes == 200 * 2 * 2  # trials x props x agents


class TestGroundTruthDynamics:
    def test_truth_flip_mid_run_tracks_schedule(self):
        schema = make_schema((S,))
        agents = (("a", FeatureVector((1,))),)
        scenario = Scenario(
            schema=schema,
            agents=agents,
            propositions=(Proposition("p"),),
            ground_truth={"p": GroundTruthSchedule("p", ((0, True), (2, False)))},
            error_model=ErrorModel.fixed({"a": 0.0}),
            topology=Topology.full_broadcast(),
            rules=(MAJORITY,),
            steps=4,
            trials=1,
            seed=0,
        )
        trace, metrics = run(scenario)
        observed = [r.raw["p"]["a"] for r in trace.records]
        assert observed == [True, True, False, False]
        assert metrics.rules["majority"].accuracy == 1.0


class TestDrift:
    def drift_scenario(self, k=3, steps=6):
        schema = make_schema((S, S))
        agents = (
            ("s1", FeatureVector((1, 1))),
            ("s2", FeatureVector((3, 2))),
            ("s3", FeatureVector((2, 3))),
            ("s4", FeatureVector((4, 4))),
        )
        drift = (
            DriftEvent("s1", "f0", k, value=4.0),
            DriftEvent("s1", "f1", k, value=3.0),
        )
        return simple_scenario(
            schema,
            agents,
            {a: 0.0 for a, _ in agents},
            rules=(MOST_EXPERT,),
            steps=steps,
            trials=1,
            drift=drift,
        )

    def test_lattice_matches_rebuild_at_every_step(self):
        scenario = self.drift_scenario()
        lattices = lattices_by_step(scenario)
        values = {a: list(v.values) for a, v in scenario.agents}
        for step, lattice in enumerate(lattices):
            for event in scenario.drift:
                if event.step == step:
                    idx = scenario.schema.index_of(event.feature)
                    values[event.agent][idx] = event.value
            rebuilt = build(
                scenario.schema,
                tuple((a, FeatureVector(tuple(v))) for a, v in values.items()),
            )
            assert lattice == rebuilt
            assert lattice.digest() == rebuilt.digest()

    def test_contributors_flip_exactly_at_drift_step(self):
        k = 3
        scenario = self.drift_scenario(k=k)
        trace, _ = run(scenario)
        for record in trace.records:
            contributors = record.contributors["p"]["s4"]
            if record.step < k:
                assert contributors == ("s1",)
            else:
                assert contributors == ("s2", "s3")

    def test_delta_drift_accumulates(self):
        schema = make_schema((S,))
        agents = (("a", FeatureVector((1.0,))), ("b", FeatureVector((5.0,))))
        drift = (
            DriftEvent("a", "f0", 1, delta=3.0),
            DriftEvent("a", "f0", 2, delta=3.0),
        )
        scenario = simple_scenario(
            schema, agents, {"a": 0.0, "b": 0.0}, steps=3, trials=1, drift=drift
        )
        lattices = lattices_by_step(scenario)
        assert lattices[0].quality_of("a") == FeatureVector((1.0,))
        assert lattices[1].quality_of("a") == FeatureVector((4.0,))
        assert lattices[2].quality_of("a") == FeatureVector((7.0,))

    def test_drift_to_non_finite_rejected(self):
        schema = make_schema((S,))
        agents = (("a", FeatureVector((1.0,))),)
        scenario = simple_scenario(
            schema,
            agents,
            {"a": 0.0},
            steps=2,
            trials=1,
            drift=(DriftEvent("a", "f0", 1, delta=float(10**308) * 10),),
        )
        with pytest.raises(ValidationError):
            run(scenario)

    def test_drift_event_needs_exactly_one_mode(self):
        with pytest.raises(ValidationError):
            DriftEvent("a", "f0", 0)
        with pytest.raises(ValidationError):
            DriftEvent("a", "f0", 0, delta=1.0, value=2.0)


class TestMetrics:
    def _tiny_trace(self, wrong_at=None):
        """1 trial x 2 steps x 1 rule over 4 agents: 8 receiver outcomes."""
        wrong_at = wrong_at or set()
        agents = ["a", "b", "c", "d"]
        records = []
        for step in range(2):
            propagated = {
                a: not (step, a) in wrong_at for a in agents
            }
            records.append(
                TraceRecord(
                    trial=0,
                    step=step,
                    rule="majority",
                    lattice_digest="x",
                    raw={"p": {a: True for a in agents}},
                    propagated={"p": propagated},
                    contributors={"p": {a: tuple(agents) for a in agents}},
                    tie_broken={"p": {a: False for a in agents}},
                )
            )
        return Trace(tuple(records))

    def _tiny_scenario(self):
        schema = make_schema((S,))
        agents = tuple((a, FeatureVector((float(i),))) for i, a in enumerate("abcd"))
        return simple_scenario(
            schema, agents, {a: 0.0 for a, _ in agents}, rules=(MAJORITY,), steps=2, trials=1
        )

    def test_all_correct_trace(self):
        metrics = compute_metrics(self._tiny_trace(), self._tiny_scenario())
        assert metrics.rules["majority"].accuracy == 1.0
        assert metrics.rules["majority"].tie_rate == 0.0

    def test_one_wrong_of_eight_is_0875(self):
        metrics = compute_metrics(
            self._tiny_trace(wrong_at={(1, "c")}), self._tiny_scenario()
        )
        assert metrics.rules["majority"].accuracy == 0.875

    def test_trial_reordering_is_inert(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=30)
        trace, metrics = run(scenario)
        reordered = Trace(tuple(reversed(trace.records)))
        assert compute_metrics(reordered, scenario) == metrics

    def test_incomplete_trace_rejected(self):
        scenario = self._tiny_scenario()
        truncated = Trace(self._tiny_trace().records[:1])
        with pytest.raises(ValidationError):
            compute_metrics(truncated, scenario)

    def test_metrics_recomputed_from_persisted_trace_match(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=25)
        trace, metrics = run(scenario)
        reloaded = trace_from_jsonl(trace_to_jsonl(trace))
        assert compute_metrics(reloaded, scenario) == metrics

    def test_raw_accuracy_of_noiseless_agent_is_one(self):
        schema = make_schema((S, S))
        agents = (
            ("good", FeatureVector((1, 1))),
            ("bad", FeatureVector((2, 2))),
            ("ugly", FeatureVector((3, 3))),
        )
        scenario = simple_scenario(
            schema,
            agents,
            {"good": 0.0, "bad": 0.5, "ugly": 0.5},
            rules=(MAJORITY,),
            trials=300,
        )
        _, metrics = run(scenario)
        assert metrics.agent_accuracy["good"] == 1.0
        assert metrics.agent_accuracy["bad"] < 1.0

    def test_csv_shape(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=5)
        _, metrics = run(scenario)
        lines = metrics.to_csv().strip().splitlines()
        assert lines[0] == "rule,accuracy,ci_low,ci_high,tie_rate,trials,steps"
        assert len(lines) == 1 + len(scenario.rules)
        for line in lines[1:]:
            assert line.endswith(",5,3")

    def test_contradiction_rate_counts_pairs(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=40)
        _, metrics = run(scenario)
        assert set(metrics.contradiction_rates) == {
            "most-expert|majority",
            "most-expert|subgroup:d=1",
            "majority|subgroup:d=1",
        }
        # s1 is the unique frontier, so most-expert and subgroup:d=1 coincide
        assert metrics.contradiction_rates["most-expert|subgroup:d=1"] == 0.0


class TestIntersectionScenario:
    def test_shipped_structure(self):
        scenario = build_intersection_scenario()
        lattice = build(scenario.schema, scenario.agents)
        assert lattice.experts_of("s4") == {"s1", "s2", "s3"}
        assert scenario.propositions[0].id == "pedestrian"
        assert scenario.ground_truth["pedestrian"].value_at(0) is True

    def test_most_expert_contributors_are_s1(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=3)
        trace, _ = run(scenario)
        for record in trace.records:
            if record.rule == "most-expert":
                for contributors in record.contributors["pedestrian"].values():
                    assert contributors == ("s1",)


class TestTraceSerialization:
    def test_roundtrip_preserves_records(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=4)
        trace, _ = run(scenario)
        text = trace_to_jsonl(trace)
        assert trace_to_jsonl(trace_from_jsonl(text)) == text

    def test_records_are_single_json_lines(self):
        scenario = build_intersection_scenario()
        scenario = replace(scenario, trials=2)
        trace, _ = run(scenario)
        for line in trace_to_jsonl(trace).strip().splitlines():
            record = json.loads(line)
            assert list(record) == [
                "trial",
                "step",
                "rule",
                "lattice_digest",
                "raw",
                "propagated",
                "contributors",
                "tie_broken",
            ]
