"""Network construction, exact inference queries, and their invariants."""

import itertools
import math

import numpy as np
import pytest

from shapcredit import (
    Cpt,
    Network,
    Variable,
    condition,
    forward_sample,
    intervene,
    joint_marginal,
    joint_probability,
    load_network,
    pin_marginal,
    topological_order,
)
from shapcredit.errors import (
    CycleDetected,
    InvalidCpt,
    TooLarge,
    UnboundVariable,
    UnknownVariable,
    ZeroProbabilityEvidence,
)

from oracles import conditional, joint_table, random_raw_net, raw_to_network_dict


def single_node_net(p1=0.3):
    return Network(
        [Variable("A", (0, 1))],
        [Cpt("A", (), {(): (1 - p1, p1)})],
    )


# --- topological order ---


def test_topological_order_fig4(fig4):
    order = topological_order(fig4)
    assert order == ("Smoker", "Cancer", "XRay", "Dyspnoea", "Model", "Loss")


def test_topological_order_single_node():
    assert topological_order(single_node_net()) == ("A",)


def test_cycle_detected():
    with pytest.raises(CycleDetected):
        Network(
            [Variable("A", (0, 1)), Variable("B", (0, 1))],
            [
                Cpt("A", ("B",), {(0,): (0.5, 0.5), (1,): (0.5, 0.5)}),
                Cpt("B", ("A",), {(0,): (0.5, 0.5), (1,): (0.5, 0.5)}),
            ],
        )


# --- joint probability ---


def test_joint_probability_fig4_smoker_cancer(fig4):
    # P(S=1, C=1) = 0.3 * 0.032, marginalized by summing the joint.
    mass = 0.0
    for combo in itertools.product(*[range(2)] * 6):
        full = dict(zip(("Smoker", "Cancer", "XRay", "Dyspnoea", "Model", "Loss"), combo))
        if full["Smoker"] == 1 and full["Cancer"] == 1:
            mass += joint_probability(fig4, full)
    assert mass == pytest.approx(0.3 * 0.032, abs=1e-12)


def test_joint_probability_single_node():
    assert joint_probability(single_node_net(0.3), {"A": 1}) == pytest.approx(0.3)


def test_joint_probability_requires_full_binding(fig4):
    with pytest.raises(UnboundVariable):
        joint_probability(fig4, {"Smoker": 1})


def test_joint_matches_exhaustive_table_random_nets():
    rng = np.random.default_rng(7)
    for _ in range(10):
        spec = random_raw_net(rng, 4)
        net = load_network(raw_to_network_dict(spec))
        table = joint_table(spec)
        names = [n["name"] for n in spec]
        for combo, expected in table.items():
            got = joint_probability(net, dict(zip(names, combo)))
            assert got == pytest.approx(expected, abs=1e-12)


def test_joint_sums_to_one_random_nets():
    rng = np.random.default_rng(11)
    for _ in range(10):
        spec = random_raw_net(rng, 5)
        net = load_network(raw_to_network_dict(spec))
        names = [n["name"] for n in spec]
        total = 0.0
        for combo in itertools.product(*[range(2)] * 5):
            p = joint_probability(net, dict(zip(names, combo)))
            assert p >= 0.0
            total += p
        assert total == pytest.approx(1.0, abs=1e-9)


# --- condition ---


def test_condition_model_given_xray(fig4):
    dist = condition(fig4, {"XRay": 1}, "Model")
    assert dist.weights[1] == pytest.approx(0.0415, abs=5e-5)


def test_condition_on_all_parents_returns_cpt_row(fig4):
    dist = condition(fig4, {"Smoker": 1}, "Cancer")
    assert dist.weights == pytest.approx((0.968, 0.032), abs=1e-12)


def test_condition_empty_evidence_is_marginal(fig4):
    dist = condition(fig4, {}, "Cancer")
    assert dist.weights[1] == pytest.approx(0.3 * 0.032 + 0.7 * 0.003, abs=1e-12)


def test_condition_matches_bayes_oracle_random_chains():
    rng = np.random.default_rng(3)
    for _ in range(15):
        spec = random_raw_net(rng, 3)
        net = load_network(raw_to_network_dict(spec))
        table = joint_table(spec)
        names = [n["name"] for n in spec]
        evidence = {names[0]: int(rng.integers(2))}
        query = names[-1]
        expected = conditional(spec, table, evidence, query)
        got = condition(net, evidence, query)
        assert list(got.weights) == pytest.approx(expected, abs=1e-12)


def test_condition_zero_probability_evidence():
    net = Network(
        [Variable("A", (0, 1)), Variable("B", (0, 1))],
        [
            Cpt("A", (), {(): (1.0, 0.0)}),
            Cpt("B", ("A",), {(0,): (0.5, 0.5), (1,): (0.5, 0.5)}),
        ],
    )
    with pytest.raises(ZeroProbabilityEvidence):
        condition(net, {"A": 1}, "B")


def test_condition_state_cap():
    variables = [Variable(f"V{i}", (0, 1)) for i in range(8)]
    cpts = [Cpt(v.name, (), {(): (0.5, 0.5)}) for v in variables]
    net = Network(variables, cpts)
    with pytest.raises(TooLarge):
        condition(net, {}, "V0", max_states=16)


# --- intervene ---


def test_intervene_do_cancer_fig4(fig4):
    mutilated = intervene(fig4, {"Cancer": 1})
    dist = condition(mutilated, {}, "Model")
    # With cancer forced, the model output tracks the smoker prior.
    assert dist.weights[1] == pytest.approx(0.3, abs=1e-12)


def test_intervene_empty_is_identity(fig4):
    same = intervene(fig4, {})
    for v in fig4.variables:
        assert same.cpts[v.name].table == fig4.cpts[v.name].table


def test_intervene_on_root_equals_conditioning():
    rng = np.random.default_rng(5)
    for _ in range(10):
        spec = random_raw_net(rng, 4)
        net = load_network(raw_to_network_dict(spec))
        root = spec[0]["name"]   # first node never has parents
        query = spec[-1]["name"]
        if query == root:
            continue
        do_dist = condition(intervene(net, {root: 1}), {}, query)
        cond_dist = condition(net, {root: 1}, query)
        assert list(do_dist.weights) == pytest.approx(list(cond_dist.weights), abs=1e-12)


def test_intervene_does_not_touch_nondescendants(fig5):
    mutilated = intervene(fig5, {"Cancer": 1})
    before = condition(fig5, {}, "Smoker")
    after = condition(mutilated, {}, "Smoker")
    assert list(after.weights) == pytest.approx(list(before.weights), abs=1e-12)


def test_dseparation_do_xray_does_not_move_model_fig5(fig5):
    base = condition(fig5, {}, "Model").weights[1]
    after = condition(intervene(fig5, {"XRay": 1}), {}, "Model").weights[1]
    assert after == pytest.approx(base, abs=1e-12)


def test_intervene_unknown_variable(fig4):
    with pytest.raises(UnknownVariable):
        intervene(fig4, {"Nope": 0})


# --- pin_marginal ---


def test_pin_smoker_fig4(fig4):
    dist = pin_marginal(fig4, {"Smoker": 1}, "Model")
    # g(1, C) with C on its marginal: E = P(C=1) = 0.0117
    assert dist.weights[1] == pytest.approx(0.0117, abs=1e-12)


def test_pin_all_features_is_point_mass(fig4, smoking_point):
    pinned = {k: smoking_point[k] for k in ("Smoker", "Cancer", "XRay")}
    dist = pin_marginal(fig4, pinned, "Model")
    assert dist.weights == pytest.approx((0.0, 1.0), abs=1e-12)


def test_pin_matches_bruteforce_oracle(fig4):
    # Pin Cancer=1: enumerate the joint of the unpinned features and read the
    # model table g(S, 1) = S directly.
    dist = pin_marginal(fig4, {"Cancer": 1}, "Model")
    assert dist.weights[1] == pytest.approx(0.3, abs=1e-12)
    # pin XRay alone: model never reads it, so the law equals the marginal
    base = condition(fig4, {}, "Model")
    pinned = pin_marginal(fig4, {"XRay": 1}, "Model")
    assert list(pinned.weights) == pytest.approx(list(base.weights), abs=1e-12)


def test_pin_equals_explicit_duplicate_network(fig4):
    # Build the duplicate construction explicitly on (Smoker, Cancer):
    # copies are identity children of the originals, the function node reads
    # the copies, and pinning is a do() on the copies.
    identity = {(0,): (1.0, 0.0), (1,): (0.0, 1.0)}
    and_table = {
        (0, 0): (1.0, 0.0),
        (0, 1): (1.0, 0.0),
        (1, 0): (1.0, 0.0),
        (1, 1): (0.0, 1.0),
    }
    dup = Network(
        [
            Variable("Smoker", (0, 1)),
            Variable("Cancer", (0, 1)),
            Variable("SmokerCopy", (0, 1)),
            Variable("CancerCopy", (0, 1)),
            Variable("Out", (0, 1)),
        ],
        [
            Cpt("Smoker", (), {(): (0.7, 0.3)}),
            Cpt("Cancer", ("Smoker",), {(0,): (0.997, 0.003), (1,): (0.968, 0.032)}),
            Cpt("SmokerCopy", ("Smoker",), identity),
            Cpt("CancerCopy", ("Cancer",), identity),
            Cpt("Out", ("SmokerCopy", "CancerCopy"), and_table),
        ],
    )
    for pin_vars in [{}, {"Smoker": 1}, {"Cancer": 1}, {"Smoker": 1, "Cancer": 1}]:
        expected = condition(
            intervene(dup, {k + "Copy": v for k, v in pin_vars.items()}), {}, "Out"
        )
        got = pin_marginal(fig4, pin_vars, "Model")
        assert list(got.weights) == pytest.approx(list(expected.weights), abs=1e-12)


# --- forward_sample ---


def test_forward_sample_frequency(fig4):
    samples = forward_sample(fig4, 100_000, seed=123)
    freq = sum(s["Smoker"] for s in samples) / len(samples)
    assert abs(freq - 0.3) < 0.01


def test_forward_sample_deterministic_net():
    net = Network(
        [Variable("A", (0, 1)), Variable("B", (0, 1))],
        [
            Cpt("A", (), {(): (0.0, 1.0)}),
            Cpt("B", ("A",), {(0,): (1.0, 0.0), (1,): (0.0, 1.0)}),
        ],
    )
    assert forward_sample(net, 1, seed=0) == [{"A": 1, "B": 1}]


def test_forward_sample_seed_reproducible(fig4):
    a = forward_sample(fig4, 50, seed=9)
    b = forward_sample(fig4, 50, seed=9)
    assert a == b


def test_forward_sample_respects_model_determinism(fig4):
    for s in forward_sample(fig4, 200, seed=4):
        assert s["Model"] == (s["Smoker"] & s["Cancer"])
        assert s["Loss"] == (s["Model"] ^ s["Dyspnoea"])


# --- validation and serialization ---


def test_cpt_row_sum_validation():
    with pytest.raises(InvalidCpt):
        Network([Variable("A", (0, 1))], [Cpt("A", (), {(): (0.6, 0.5)})])


def test_cpt_row_renormalized_when_close():
    net = Network([Variable("A", (0, 1))], [Cpt("A", (), {(): (0.7, 0.3 + 2e-7)})])
    assert math.fsum(net.cpts["A"].row(())) == pytest.approx(1.0, abs=1e-12)


def test_missing_cpt_row_rejected():
    with pytest.raises(InvalidCpt):
        Network(
            [Variable("A", (0, 1)), Variable("B", (0, 1))],
            [
                Cpt("A", (), {(): (0.5, 0.5)}),
                Cpt("B", ("A",), {(0,): (0.5, 0.5)}),
            ],
        )


def test_edges_must_match_cpts():
    with pytest.raises(InvalidCpt):
        Network(
            [Variable("A", (0, 1)), Variable("B", (0, 1))],
            [Cpt("A", (), {(): (0.5, 0.5)}), Cpt("B", (), {(): (0.5, 0.5)})],
            edges=[("A", "B")],
        )


def test_json_round_trip(fig4, tmp_path):
    import json

    path = tmp_path / "net.json"
    path.write_text(json.dumps(fig4.to_dict()))
    again = load_network(str(path))
    assert topological_order(again) == topological_order(fig4)
    for v in fig4.variables:
        assert again.cpts[v.name].table == fig4.cpts[v.name].table


def test_joint_marginal_matches_oracle(fig4):
    got = joint_marginal(fig4, ["Smoker", "Cancer"])
    assert got[(1, 1)] == pytest.approx(0.0096, abs=1e-12)
    assert got[(0, 1)] == pytest.approx(0.0021, abs=1e-12)
    assert math.fsum(got.values()) == pytest.approx(1.0, abs=1e-12)
