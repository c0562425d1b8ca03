from fractions import Fraction

import pytest

from ertkit.corpus import ENTRIES, coupon_closed_form
from ertkit.kernel import INF, State, XReal
from ertkit.mdp import (
    MdpConfig,
    NodeCapExceeded,
    build_mdp,
    cross_check,
    expected_reward,
    mdp_to_dot,
    qualitative_check,
    recompute_rewards,
)
from ertkit.parser import parse_program, parse_rt
from ertkit.transformer import expected_runtime


def build(src, sigma=None, f="0", node_cap=200_000):
    return build_mdp(parse_program(src), sigma or State(), parse_rt(f), node_cap)


def test_empty_program_has_three_distinct_nodes():
    # the run visits exec-empty, the terminal configuration, and the sink;
    # re-entering the sink is a self-loop, not a fourth node
    m = build("empty")
    assert m.node_count == 3
    kinds = sorted(n.kind for n in m.nodes)
    assert kinds == ["exec", "sink", "term"]


def test_every_action_row_is_a_distribution():
    m = build("if (1/2*<true> + 1/2*<false>) { x := 0 } else { x :~ unif[1 .. 3] }")
    for rows in m.transitions:
        assert rows, "every node needs at least one action"
        for action, row in rows.items():
            assert sum(p for p, _ in row) == 1
            assert all(p > 0 for p, _ in row)


def test_markov_chain_exactly_when_no_choice():
    assert build("skip; x :~ unif[0 .. 5]").is_markov_chain()
    m = build("{ skip } [] { skip; skip }")
    assert not m.is_markov_chain()
    widths = sorted(len(rows) for rows in m.transitions)
    assert widths[-1] == 2


def test_tick_rewards_sit_on_the_charging_statements():
    m = build("skip", f="0")
    by_kind = {n.kind: r for n, r in zip(m.nodes, m.rewards)}
    assert by_kind["exec"] == XReal(1)
    assert by_kind["sink"] == XReal(0)
    assert by_kind["term"] == XReal(0)


def test_terminal_node_collects_the_runtime():
    m = build("x := 2", f="10 * x")
    term = [i for i, n in enumerate(m.nodes) if n.kind == "term"]
    assert len(term) == 1
    assert m.rewards[term[0]] == XReal(20)
    assert expected_reward(m).value == XReal(21)


def test_halt_bypasses_the_runtime_collection():
    m = build("skip; halt", f="100")
    assert expected_reward(m).value == XReal(1)
    plain = build("skip", f="100")
    assert expected_reward(plain).value == XReal(101)


def test_reward_audit_matches():
    m = build(ENTRIES["trunc"].source(), f="3/2")
    assert recompute_rewards(m) == m.rewards


def test_truncated_coin_value():
    m = build(ENTRIES["trunc"].source())
    analysis = expected_reward(m)
    assert analysis.method == "ExactLinearSolve"
    assert analysis.value == XReal(Fraction(5, 2))


def test_geometric_loop_value_is_exact_in_the_model():
    entry = ENTRIES["geo"]
    m = build_mdp(entry.program(), State({"c": 1}), parse_rt("0"), 10_000)
    analysis = expected_reward(m)
    assert analysis.method == "ExactLinearSolve"
    assert analysis.value == XReal(5)
    m0 = build_mdp(entry.program(), State({"c": 0}), parse_rt("0"), 10_000)
    assert expected_reward(m0).value == XReal(1)


def test_coupon_values_match_the_closed_form():
    for n in (2, 3):
        entry = ENTRIES["coupon"]
        m = build_mdp(entry.program(N=n), entry.initial_state(), parse_rt("0"), 10_000)
        analysis = expected_reward(m)
        assert analysis.method == "ExactLinearSolve"
        assert analysis.value == XReal(coupon_closed_form(n))
    assert coupon_closed_form(2) == 16
    assert coupon_closed_form(3) == 25


def test_nondeterminism_takes_the_worst_branch():
    src = "{ skip } [] { skip; skip; skip }"
    m = build(src)
    analysis = expected_reward(m)
    assert analysis.method == "SchedulerEnumeration"
    assert analysis.schedulers == 2
    assert analysis.value == XReal(3)
    assert analysis.value == expected_runtime(parse_program(src)).value


def test_qualitative_detects_sink_avoidance():
    m = build("while (true) { skip }")
    q = qualitative_check(m)
    assert q.kind == "SomeSchedulerAvoids"
    assert q.witness
    analysis = expected_reward(m)
    assert analysis.value == INF
    assert analysis.method == "Qualitative"


def test_qualitative_all_reach_on_terminating_programs():
    m = build("x := 3; while (x > 0) { x := x - 1 }", State({"x": 0}))
    assert qualitative_check(m).kind == "AllSchedulersReachSink"


def test_infinite_reward_on_a_reachable_node():
    m = build("x := 0; skip", f="[x = 0] * inf", sigma=State({"x": 1}))
    analysis = expected_reward(m)
    assert analysis.method == "InfiniteReward"
    assert analysis.value == INF


def test_node_cap_is_enforced():
    with pytest.raises(NodeCapExceeded):
        build("while (x > 0) { x := x + 1 }", State({"x": 1}), node_cap=50)


def test_cross_check_exact_on_loop_free_programs():
    report = cross_check(parse_program(ENTRIES["trunc"].source()))
    assert report.status == "pass"
    assert report.detail == "exact equality"
    assert report.bounded_at is None
    assert report.ert_value == report.mdp_value == XReal(Fraction(5, 2))


def test_cross_check_lower_bound_against_exact_model():
    report = cross_check(parse_program(ENTRIES["geo"].source()), sigma=State({"c": 1}))
    assert report.status == "pass"
    assert report.ert_kind == "lower"
    assert report.mdp_value == XReal(5)
    assert report.ert_value <= report.mdp_value


def test_cross_check_falls_back_to_the_bounded_program():
    walk = parse_program("while (x > 0) { x :~ 1/2*<x - 1> + 1/2*<x + 1> }")
    report = cross_check(
        walk,
        sigma=State({"x": 1}),
        cfg=MdpConfig(node_cap=500),
        fallback_unroll=8,
    )
    assert report.bounded_at == 8
    assert report.status == "pass"
    assert report.detail == "exact equality"


def test_dot_export_mentions_every_node():
    m = build("skip; skip")
    dot = mdp_to_dot(m)
    assert dot.startswith("digraph")
    for i in range(m.node_count):
        assert f"n{i} " in dot or f"n{i} [" in dot
    assert "->" in dot
