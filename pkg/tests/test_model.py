import json

import pytest
from hypothesis import given, settings, strategies as st

from multislot_gd.fixtures import random_instance
from multislot_gd.model import (
    Contract, Edge, ProblemInstance, SupplyNode, compute_target_ratios, load_instance,
    save_instance, validate_instance,
)


def make(edges=(("s1", "c1", 0.5),), supplies=(("s1", 10.0, 2.0),), contracts=(("c1", 5.0),)):
    return ProblemInstance(
        tuple(SupplyNode(i, s, pv) for i, s, pv in supplies),
        tuple(Contract(j, d) for j, d in contracts),
        tuple(Edge(i, j, c) for i, j, c in edges),
    )


def test_valid_single_edge_passes():
    report = validate_instance(make())
    assert report.ok
    assert report.errors == []


def test_empty_eligibility_fails():
    report = validate_instance(make(edges=()))
    assert not report.ok
    assert any("empty eligibility set" in e and "c1" in e for e in report.errors)


def test_interest_out_of_range_fails():
    report = validate_instance(make(edges=(("s1", "c1", 1.5),)))
    assert not report.ok
    assert any("interest out of range" in e for e in report.errors)


@pytest.mark.parametrize(
    "inst, fragment",
    [
        (make(supplies=(("s1", 10.0, 2.0), ("s1", 3.0, 1.0))), "duplicate supply id"),
        (make(contracts=(("c1", 5.0), ("c1", 2.0)), edges=(("s1", "c1", 0.5),)), "duplicate contract id"),
        (make(edges=(("s1", "c1", 0.5), ("s9", "c1", 0.5))), "dangling edge"),
        (make(edges=(("s1", "c1", 0.5), ("s1", "c1", 0.2))), "duplicate edge"),
        (make(supplies=(("s1", -1.0, 2.0),)), "capacity"),
        (make(supplies=(("s1", 10.0, -2.0),)), "pv_cap"),
        (make(contracts=(("c1", 0.0),)), "demand must be positive"),
        (make(supplies=(("s1", 0.0, 0.0),)), "zero total capacity"),
    ],
)
def test_violations_reported_not_raised(inst, fragment):
    report = validate_instance(inst)
    assert not report.ok
    assert any(fragment in e for e in report.errors), report.errors


def test_bad_smoothness_and_interest_weight():
    inst = ProblemInstance(
        (SupplyNode("s1", 10, 10),),
        (Contract("c1", 5, smoothness=0.0, interest_weight=-1.0),),
        (Edge("s1", "c1", 0.1),),
    )
    errors = validate_instance(inst).errors
    assert any("smoothness" in e for e in errors)
    assert any("interest_weight" in e for e in errors)


def test_target_ratio_examples():
    inst = make(supplies=(("a", 60.0, 60.0), ("b", 40.0, 40.0)), contracts=(("c1", 50.0),),
                edges=(("a", "c1", 0.1), ("b", "c1", 0.1)))
    assert compute_target_ratios(inst) == {"c1": 0.5}
    inst = make(supplies=(("a", 100.0, 1.0),), contracts=(("c1", 100.0),), edges=(("a", "c1", 0.0),))
    assert compute_target_ratios(inst) == {"c1": 1.0}


def test_over_demand_is_a_warning():
    inst = make(supplies=(("a", 10.0, 10.0), ("b", 10.0, 10.0)), contracts=(("c1", 30.0),),
                edges=(("a", "c1", 0.1), ("b", "c1", 0.1)))
    assert compute_target_ratios(inst)["c1"] == 1.5
    report = validate_instance(inst)
    assert report.ok
    assert any("over-demanded" in w for w in report.warnings)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 1000.0))
def test_target_ratios_scale_covariant(seed, scale):
    inst = random_instance(seed)
    scaled = ProblemInstance(
        tuple(SupplyNode(n.id, n.capacity * scale, n.pv_cap, n.slot_id) for n in inst.supplies),
        tuple(Contract(c.id, c.demand * scale, c.priority, c.smoothness, c.interest_weight)
              for c in inst.contracts),
        inst.edges,
    )
    base, other = compute_target_ratios(inst), compute_target_ratios(scaled)
    assert base.keys() == other.keys()
    for k in base:
        assert other[k] == pytest.approx(base[k], rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_validation_idempotent(seed):
    inst = random_instance(seed)
    assert validate_instance(inst) == validate_instance(inst)


def test_arrays_theta_matches_direct_formula(three_by_two):
    A = three_by_two.arrays
    theta = compute_target_ratios(three_by_two)
    assert list(A.theta) == [theta["c1"], theta["c2"]]


def test_json_round_trip(tmp_path, three_by_two):
    path = tmp_path / "inst.json"
    save_instance(three_by_two, path)
    assert load_instance(path) == three_by_two
    doc = json.loads(path.read_text())
    assert set(doc) == {"supplies", "contracts", "edges"}
    assert set(doc["supplies"][0]) == {"id", "capacity", "pv_cap", "slot_id"}


def test_malformed_document_raises_value_error():
    with pytest.raises(ValueError):
        ProblemInstance.from_dict({"supplies": [], "contracts": [{"id": "c"}], "edges": []})
