"""Tests for the policy language: parsing, evaluation and server selection."""

import numpy as np
import pytest

from cluster_model import PowerState
from errors import ConfigError, PolicyEvaluationError, PolicySyntaxError, UnknownIdentifierError
from policy_dsl import (
    POLICY_LIBRARY, BinOp, DSpace, IntLit, NdResolution, Neg, Operator, Terminal, Var,
    design_parameters, evaluate, parse_policy, pretty_print, score_servers, select_server,
    tokenize,
)

SHORTEST_QUEUE = "-queueSize"
QUEUE_THRESHOLD_5 = "-queueSize - 5 * (1 - stateOn)"


def _value(text, snap=None, rng=None):
    return evaluate(parse_policy(text), snap, rng or np.random.default_rng(0))


# ====================================================================== #
# region           WORKED EXAMPLE EVALUATIONS                             #
# ====================================================================== #

# Policy values per request (columns) for servers 0..3, before selection,
# and the server the worked example picks.
SHORTEST_QUEUE_COLUMNS = [
    ((0, 0, 0, 0), 3),
    ((0, 0, 0, -1), 1),
    ((0, -1, 0, -1), 2),
    ((0, -1, -1, -1), 0),
    ((-1, -1, -1, -1), 1),
    ((-1, -2, -1, -1), 2),
    ((-1, -2, -2, -1), 3),
]

THRESHOLD_COLUMNS = [
    ((-5, -5, -5, -5), 1),
    ((-5, -1, -5, -5), 1),
    ((-5, -2, -5, -5), 1),
    ((-5, -3, -5, -5), 1),
    ((-5, -4, -5, -5), 1),
    ((-5, -5, -5, -5), 2),
    ((-5, -5, -1, -5), 2),
    ((-5, -5, -2, -5), 2),
]


def _replay_columns(text, columns, make_snapshots):
    """Drive the worked-example selections through a queue model and check every cell."""
    expr = parse_policy(text)
    queues = [0, 0, 0, 0]
    for expected, example_pick in columns:
        states = [PowerState.ON if q > 0 else PowerState.SLEEP for q in queues]
        snaps = make_snapshots(list(zip(queues, states)))
        values = [evaluate(expr, s, None) for s in snaps]
        assert values == [float(v) for v in expected]

        best = max(values)
        argmax = {i for i, v in enumerate(values) if v == best}
        assert example_pick in argmax
        assert select_server(expr, snaps, NdResolution.FIXED_ORDER, None) in argmax
        assert select_server(expr, snaps, NdResolution.RANDOM_FRACTION,
                             np.random.default_rng(11)) in argmax
        queues[example_pick] += 1


def test_shortest_queue_example_table(make_snapshots):
    _replay_columns(SHORTEST_QUEUE, SHORTEST_QUEUE_COLUMNS, make_snapshots)


def test_queue_threshold_example_table(make_snapshots):
    _replay_columns(QUEUE_THRESHOLD_5, THRESHOLD_COLUMNS, make_snapshots)


def test_threshold_policy_with_design_parameter_matches_literal(make_snapshots):
    snaps = make_snapshots([(0, "Sleep"), (3, "On"), (7, "On"), (0, "Wakeup")], params={"q": 5})
    literal = parse_policy(QUEUE_THRESHOLD_5)
    generic = parse_policy(POLICY_LIBRARY["P_q"])
    assert [evaluate(literal, s, None) for s in snaps] == [evaluate(generic, s, None) for s in snaps]
    assert [evaluate(generic, s, None) for s in snaps] == [-5.0, -3.0, -7.0, -5.0]


@pytest.mark.parametrize("column, expected", [
    ((0.61, 0.46, 0.70, 0.76), 3),
    ((0.78, 0.09, 0.12, 0.39), 0),
    ((0.05, 0.22, 0.93, 0.51), 2),
    # largest draw (0.79) is server 1's
    ((0.68, 0.79, 0.15, 0.66), 1),
])
def test_random_resolution_picks_largest_draw(column, expected, make_snapshots, scripted_draws):
    snaps = make_snapshots([(0, "On")] * 4)
    draws = scripted_draws(column)
    assert select_server(parse_policy("0"), snaps, NdResolution.RANDOM_FRACTION, draws) == expected
    assert draws.calls == 4


def test_fixed_order_resolution_on_equal_values(make_snapshots):
    snaps = make_snapshots([(0, "On")] * 4)
    expr = parse_policy("0")
    scores = score_servers(expr, snaps, NdResolution.FIXED_ORDER, None)
    assert [s.resolved for s in scores] == [0.0, 0.25, 0.5, 0.75]
    for _ in range(4):
        assert select_server(expr, snaps, NdResolution.FIXED_ORDER, None) == 3

# endregion


# ====================================================================== #
# region           SELECTION                                              #
# ====================================================================== #

def test_fixed_order_takes_highest_id_among_integer_ties(make_snapshots):
    snaps = make_snapshots([(1, "On"), (0, "On"), (0, "On"), (2, "On")])
    assert select_server(parse_policy(SHORTEST_QUEUE), snaps, NdResolution.FIXED_ORDER, None) == 2


def test_residual_tie_goes_to_lowest_id(make_snapshots, scripted_draws):
    snaps = make_snapshots([(0, "On")] * 3)
    draws = scripted_draws([0.5, 0.5, 0.5])
    assert select_server(parse_policy("0"), snaps, NdResolution.RANDOM_FRACTION, draws) == 0


def test_draw_order_is_leaves_then_fraction_per_server(make_snapshots, scripted_draws):
    snaps = make_snapshots([(0, "On"), (0, "On")])
    draws = scripted_draws([0.1, 0.2, 0.3, 0.4])
    scores = score_servers(parse_policy("random"), snaps, NdResolution.RANDOM_FRACTION, draws)
    assert [s.base for s in scores] == [0.1, 0.3]
    assert scores[0].resolved == pytest.approx(0.3)
    assert scores[1].resolved == pytest.approx(0.7)


def test_single_server_is_still_scored(make_snapshots, scripted_draws):
    snaps = make_snapshots([(3, "Sleep")])
    draws = scripted_draws([0.4, 0.9])
    assert select_server(parse_policy("random"), snaps, NdResolution.RANDOM_FRACTION, draws) == 0
    assert draws.calls == 2


def test_single_server_propagates_evaluation_errors(make_snapshots):
    snaps = make_snapshots([(3, "Sleep")])
    with pytest.raises(PolicyEvaluationError):
        select_server(parse_policy("1 / 0"), snaps, NdResolution.FIXED_ORDER, None)


def test_selection_is_deterministic_for_a_seed(make_snapshots):
    snaps = make_snapshots([(1, "On"), (0, "Sleep"), (1, "On"), (0, "Sleep")])
    expr = parse_policy("random * 3 - queueSize")
    picks_a = [select_server(expr, snaps, NdResolution.RANDOM_FRACTION, rng)
               for rng in [np.random.default_rng(5)] for _ in range(20)]
    picks_b = [select_server(expr, snaps, NdResolution.RANDOM_FRACTION, rng)
               for rng in [np.random.default_rng(5)] for _ in range(20)]
    assert picks_a == picks_b


def test_snapshots_must_cover_every_id(make_snapshots):
    snaps = make_snapshots([(0, "On"), (0, "On"), (0, "On")])
    with pytest.raises(ConfigError):
        score_servers(parse_policy("0"), snaps[:1] + snaps[2:], NdResolution.FIXED_ORDER, None)

# endregion


# ====================================================================== #
# region           PARSING & ARITHMETIC                                   #
# ====================================================================== #

@pytest.mark.parametrize("text, expected", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("10 - 4 - 3", 3.0),
    ("8 / 4 / 2", 1.0),
    ("-2 * 3", -6.0),
    ("7 mod 3", 1.0),
    ("-7 mod 3", -1.0),
    ("7 mod -3", 1.0),
    ("1 / 4", 0.25),
    ("--3", 3.0),
])
def test_arithmetic(text, expected, make_snapshots):
    snap = make_snapshots([(0, "On")])[0]
    assert _value(text, snap) == expected


def test_terminals_read_the_snapshot(make_snapshots):
    snap = make_snapshots([(0, "Sleep"), (4, "Suspend"), (0, "On")])[1]
    assert _value("ID", snap) == 1.0
    assert _value("id", snap) == 1.0
    assert _value("numServers", snap) == 3.0
    assert _value("queueSize", snap) == 4.0
    assert _value("stateSuspend + 2 * stateOn + 4 * stateSleep", snap) == 1.0
    assert _value("powerOn + powerSleep", snap) == 214.0
    assert _value("timeWakeup + timeSuspend + timeOutTime", snap) == 30.0


def test_parse_builds_expected_tree():
    expr = parse_policy('-queueSize - dspace("q") * (1 - stateOn)')
    assert expr == BinOp(
        Operator.SUB,
        Neg(Var(Terminal.QUEUE_SIZE)),
        BinOp(Operator.MUL, DSpace("q"), BinOp(Operator.SUB, IntLit(1), Var(Terminal.STATE_ON))),
    )
    assert design_parameters(expr) == ["q"]


def test_comments_and_newlines_are_ignored():
    text = "# shortest queue first\n-queueSize   # per server\n"
    assert parse_policy(text) == parse_policy("-queueSize")


@pytest.mark.parametrize("text", [
    "queueSize - (ID - numServers)",
    "-(queueSize + 1) * 2",
    "queueSize mod 3 * 2",
    "2 * (3 mod queueSize)",
    "--queueSize",
    '-queueSize - dspace("q") * (1 - stateOn)',
    "(random + ID) / numServers",
    "1 - 2 + 3",
    "1 - (2 + 3)",
])
def test_pretty_print_round_trips(text):
    expr = parse_policy(text)
    assert parse_policy(pretty_print(expr)) == expr


@pytest.mark.parametrize("name", ['a"b', "a'b", "q"])
def test_dspace_names_with_quotes_round_trip(name):
    expr = DSpace(name)
    assert parse_policy(pretty_print(expr)) == expr


def test_pretty_print_drops_redundant_brackets():
    assert pretty_print(parse_policy("((queueSize)) + (1 * 2)")) == "queueSize + 1 * 2"


def test_tokenizer_positions():
    tokens = tokenize("1 +\n  foo")
    assert [(t.kind, t.line, t.column) for t in tokens] == [
        ("NUMBER", 1, 1), ("OP", 1, 3), ("NAME", 2, 3), ("EOF", 2, 6)]

# endregion


# ====================================================================== #
# region           ERRORS & PURITY                                        #
# ====================================================================== #

def test_missing_operand_reports_position():
    with pytest.raises(PolicySyntaxError) as info:
        parse_policy("1 +")
    assert (info.value.line, info.value.column) == (1, 4)


def test_unknown_identifier_reports_position():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_policy("queueSize +\n  foo")
    assert (info.value.line, info.value.column) == (2, 3)
    assert "foo" in str(info.value)


@pytest.mark.parametrize("text", [
    "1.5", "(1 + 2", "1 2", "dspace(q)", 'dspace("")', "queueSize $ 2", "",
    "queueSize + ²", "٣ + 1", "9" * 400,
])
def test_malformed_policies_are_rejected(text):
    with pytest.raises(PolicySyntaxError):
        parse_policy(text)


def test_non_ascii_digit_reports_position():
    with pytest.raises(PolicySyntaxError) as info:
        parse_policy("queueSize + ²")
    assert (info.value.line, info.value.column) == (1, 13)


def test_oversized_literal_reports_its_column():
    with pytest.raises(PolicySyntaxError) as info:
        parse_policy("queueSize - " + "9" * 400)
    assert (info.value.line, info.value.column) == (1, 13)
    assert "too large" in str(info.value)


def test_largest_finite_literal_still_evaluates(make_snapshots):
    snap = make_snapshots([(0, "On")])[0]
    assert _value("1" + "0" * 300, snap) == 1e300


@pytest.mark.parametrize("text", ["5 / (queueSize - queueSize)", "5 mod 0"])
def test_division_by_zero_is_an_evaluation_error(text, make_snapshots):
    snap = make_snapshots([(2, "On")])[0]
    with pytest.raises(PolicyEvaluationError):
        _value(text, snap)


def test_undefined_design_parameter(make_snapshots):
    snap = make_snapshots([(0, "On")], params={"q": 5})[0]
    with pytest.raises(ConfigError):
        _value('dspace("r")', snap)


def test_evaluation_is_pure(make_snapshots):
    snap = make_snapshots([(3, "On"), (1, "Sleep")])[1]
    before = (snap.queue_size, snap.power_state, dict(snap.design_params))
    expr = parse_policy(QUEUE_THRESHOLD_5)
    assert evaluate(expr, snap, None) == evaluate(expr, snap, None)
    assert (snap.queue_size, snap.power_state, dict(snap.design_params)) == before

# endregion
