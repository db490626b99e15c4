"""Shared builders and independent oracles for the test suite.

The brute-force functions here deliberately avoid the lattice's cached
relation: reachability is recomputed by walking cover edges and the
dominance matrix by direct pairwise comparison, so they can serve as
oracles for the lattice implementation.
"""

from __future__ import annotations

import random

from beliefsim import (
    Belief,
    BeliefProfile,
    Comparison,
    Direction,
    ErrorModel,
    Feature,
    FeatureSchema,
    FeatureVector,
    GroundTruthSchedule,
    Proposition,
    Scenario,
    Topology,
    compare,
)
from beliefsim.rules import MAJORITY, MOST_EXPERT


def make_schema(directions, unit=""):
    return FeatureSchema(
        tuple(
            Feature(f"f{i}", direction, unit)
            for i, direction in enumerate(directions)
        )
    )


def random_population(rng: random.Random, n: int, d: int, lo=0, hi=6):
    """Random agents on a small integer grid so dominance chains are common."""
    directions = tuple(
        rng.choice((Direction.SMALLER_IS_BETTER, Direction.LARGER_IS_BETTER))
        for _ in range(d)
    )
    schema = make_schema(directions)
    agents = tuple(
        (f"a{i:03d}", FeatureVector(tuple(float(rng.randint(lo, hi)) for _ in range(d))))
        for i in range(n)
    )
    return schema, agents


def brute_dominates(schema, agents):
    """Pairwise O(n^2) dominance matrix: id -> set of ids it dominates."""
    result = {agent_id: set() for agent_id, _ in agents}
    for u_id, u in agents:
        for v_id, v in agents:
            if u_id != v_id and compare(u, v, schema) is Comparison.DOMINATES:
                result[u_id].add(v_id)
    return result


def reachable_real(lattice):
    """Reachability over cover edges restricted to real nodes, by DFS."""
    succ = {}
    real = set(lattice.real_ids)
    for u, v in lattice.cover_edges:
        if u in real and v in real:
            succ.setdefault(u, set()).add(v)
    result = {}
    for start in real:
        seen = set()
        stack = list(succ.get(start, ()))
        while stack:
            node = stack.pop()
            if node not in seen:
                seen.add(node)
                stack.extend(succ.get(node, ()))
        result[start] = seen
    return result


def make_profile(values: dict[str, bool], proposition="p", step=0) -> BeliefProfile:
    return BeliefProfile(
        step,
        proposition,
        {a: Belief(a, proposition, v) for a, v in values.items()},
    )


def simple_scenario(
    schema,
    agents,
    probabilities,
    rules=(MOST_EXPERT, MAJORITY),
    steps=1,
    trials=100,
    seed=0,
    topology=None,
    truth=True,
    drift=(),
    name="test",
) -> Scenario:
    return Scenario(
        schema=schema,
        agents=tuple(agents),
        propositions=(Proposition("p", "test proposition"),),
        ground_truth={"p": GroundTruthSchedule.constant("p", truth)},
        error_model=ErrorModel.fixed(probabilities),
        topology=topology or Topology.full_broadcast(),
        rules=tuple(rules),
        steps=steps,
        trials=trials,
        seed=seed,
        drift=tuple(drift),
        name=name,
    )
