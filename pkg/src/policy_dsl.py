"""
GreenLB - Load-Balancer Policy Language

Tokenizer, precedence-climbing parser, pretty-printer and evaluator for
policy expressions, plus the argmax server selection with
non-determinism resolution.

A policy is one arithmetic expression evaluated once per server; the
request goes to the server with the highest value.
"""

import math
import operator
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, NamedTuple, Protocol

import numpy as np

from cluster_model import PowerState
from errors import (
    ConfigError, PolicyEvaluationError, PolicySyntaxError,
    UnknownIdentifierError,
)


# ====================================================================== #
# region           VOCABULARY                                             #
# ====================================================================== #

class Terminal(Enum):
    """Leaf identifiers, spelled exactly as in policy text."""
    ID = "ID"
    NUM_SERVERS = "numServers"
    QUEUE_SIZE = "queueSize"
    STATE_ON = "stateOn"
    STATE_SLEEP = "stateSleep"
    STATE_SUSPEND = "stateSuspend"
    STATE_WAKEUP = "stateWakeup"
    POWER_ON = "powerOn"
    POWER_SLEEP = "powerSleep"
    POWER_SUSPEND = "powerSuspend"
    POWER_WAKEUP = "powerWakeup"
    TIME_WAKEUP = "timeWakeup"
    TIME_SUSPEND = "timeSuspend"
    TIME_OUT_TIME = "timeOutTime"
    RANDOM = "random"


class Operator(Enum):
    """Binary operators with their binding power (higher binds tighter)."""
    ADD = ("+", 1, operator.add)
    SUB = ("-", 1, operator.sub)
    MUL = ("*", 2, operator.mul)
    DIV = ("/", 2, None)
    MOD = ("mod", 2, None)

    def __init__(self, symbol, precedence, func):
        self.symbol = symbol
        self.precedence = precedence
        self.func = func


class NdResolution(Enum):
    """How equal policy values are made unique before the argmax."""
    RANDOM_FRACTION = "random"
    FIXED_ORDER = "fixed_order"

    @classmethod
    def parse(cls, text):
        """Map config spelling (``random`` / ``fixed_order``) to a member."""
        try:
            return cls(str(text))
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ConfigError(f"nd must be one of {names}, got {text!r}") from None


_TERMINALS = {t.value: t for t in Terminal}
_TERMINALS["id"] = Terminal.ID
_OPERATORS = {op.symbol: op for op in Operator}

POLICY_LIBRARY = {
    "P_q": '-queueSize - dspace("q") * (1 - stateOn)',
    "P_0": "-queueSize",
    "shortest_queue": "-queueSize",
    "random": "random",
}
"""dict[str, str]: Named policies available as ``policy: {name: ...}``."""

# endregion


# ====================================================================== #
# region           SNAPSHOTS                                              #
# ====================================================================== #

class RandomStream(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True, slots=True)
class ServerSnapshot:
    """What the policy may observe about one server at decision time."""
    id: int
    num_servers: int
    queue_size: int
    power_state: PowerState
    power_on: float
    power_sleep: float
    power_suspend: float
    power_wakeup: float
    time_wakeup: float
    time_suspend: float
    timeout_time: float
    design_params: Mapping[str, float] = field(
        default_factory=lambda: MappingProxyType({}))

    def validate(self):
        """Raise ``ConfigError`` when a field is out of range."""
        if self.num_servers < 1:
            raise ConfigError(f"num_servers must be positive, got {self.num_servers}")
        if not 0 <= self.id < self.num_servers:
            raise ConfigError(f"server id {self.id} outside 0..{self.num_servers - 1}")
        if self.queue_size < 0:
            raise ConfigError(f"server {self.id}: negative queue size")
        if not isinstance(self.power_state, PowerState):
            raise ConfigError(f"server {self.id}: unknown power state {self.power_state!r}")
        for name in ("power_on", "power_sleep", "power_suspend", "power_wakeup",
                     "time_wakeup", "time_suspend", "timeout_time"):
            if getattr(self, name) < 0:
                raise ConfigError(f"server {self.id}: {name} must be non-negative")
        return self


_LEAF_READERS = {
    Terminal.ID: lambda s: s.id,
    Terminal.NUM_SERVERS: lambda s: s.num_servers,
    Terminal.QUEUE_SIZE: lambda s: s.queue_size,
    Terminal.STATE_ON: lambda s: s.power_state is PowerState.ON,
    Terminal.STATE_SLEEP: lambda s: s.power_state is PowerState.SLEEP,
    Terminal.STATE_SUSPEND: lambda s: s.power_state is PowerState.SUSPEND,
    Terminal.STATE_WAKEUP: lambda s: s.power_state is PowerState.WAKEUP,
    Terminal.POWER_ON: lambda s: s.power_on,
    Terminal.POWER_SLEEP: lambda s: s.power_sleep,
    Terminal.POWER_SUSPEND: lambda s: s.power_suspend,
    Terminal.POWER_WAKEUP: lambda s: s.power_wakeup,
    Terminal.TIME_WAKEUP: lambda s: s.time_wakeup,
    Terminal.TIME_SUSPEND: lambda s: s.time_suspend,
    Terminal.TIME_OUT_TIME: lambda s: s.timeout_time,
}

# endregion


# ====================================================================== #
# region           SYNTAX TREE                                            #
# ====================================================================== #

@dataclass(frozen=True)
class Var:
    """A terminal such as ``queueSize`` or ``random``."""
    terminal: Terminal

    def evaluate(self, snap, rng):
        if self.terminal is Terminal.RANDOM:
            return float(rng.random())
        return float(_LEAF_READERS[self.terminal](snap))

    def to_text(self):
        return self.terminal.value


@dataclass(frozen=True)
class IntLit:
    value: int

    def evaluate(self, snap, rng):
        return float(self.value)

    def to_text(self):
        return str(self.value)


@dataclass(frozen=True)
class DSpace:
    """A design-dependent constant, looked up by name per run."""
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("dspace name must be non-empty")

    def evaluate(self, snap, rng):
        try:
            return float(snap.design_params[self.name])
        except KeyError:
            raise ConfigError(f'dspace("{self.name}") has no value in the design parameters') from None

    def to_text(self):
        quote = "'" if '"' in self.name else '"'
        return f"dspace({quote}{self.name}{quote})"


@dataclass(frozen=True)
class Neg:
    operand: object

    def evaluate(self, snap, rng):
        return -self.operand.evaluate(snap, rng)

    def to_text(self):
        inner = self.operand.to_text()
        if isinstance(self.operand, BinOp):
            return f"-({inner})"
        return f"-{inner}"


@dataclass(frozen=True)
class BinOp:
    op: Operator
    left: object
    right: object

    def evaluate(self, snap, rng):
        lhs = self.left.evaluate(snap, rng)
        rhs = self.right.evaluate(snap, rng)
        if self.op is Operator.DIV or self.op is Operator.MOD:
            if rhs == 0:
                raise PolicyEvaluationError(
                    f"{self.op.symbol} by zero in '{self.to_text()}' for server {snap.id}")
            return lhs / rhs if self.op is Operator.DIV else math.fmod(lhs, rhs)
        return self.op.func(lhs, rhs)

    def to_text(self):
        left = self.left.to_text()
        right = self.right.to_text()
        # left-associative: equal precedence needs brackets on the right only
        if isinstance(self.left, BinOp) and self.left.op.precedence < self.op.precedence:
            left = f"({left})"
        if isinstance(self.right, BinOp) and self.right.op.precedence <= self.op.precedence:
            right = f"({right})"
        return f"{left} {self.op.symbol} {right}"


PolicyExpr = Var | IntLit | DSpace | Neg | BinOp

# endregion


# ====================================================================== #
# region           TOKENIZER                                              #
# ====================================================================== #

_DIGITS = frozenset("0123456789")


class Token(NamedTuple):
    kind: str        # NUMBER, NAME, STRING, OP, LPAREN, RPAREN, EOF
    text: str
    line: int
    column: int


def tokenize(source):
    """Split policy text into tokens, dropping whitespace and ``#`` comments.

    Parameters
    ----------
    source : str
        Policy text.

    Returns
    -------
    list[Token]
        Tokens in order, terminated by an ``EOF`` token.
    """
    tokens = []
    idx, line, col = 0, 1, 1
    n = len(source)

    while idx < n:
        c = source[idx]
        if c == "\n":
            idx, line, col = idx + 1, line + 1, 1
            continue
        if c.isspace():
            idx, col = idx + 1, col + 1
            continue
        if c == "#":
            while idx < n and source[idx] != "\n":
                idx += 1
            continue
        start_col = col
        if c in _DIGITS:
            end = idx
            while end < n and source[end] in _DIGITS:
                end += 1
            if end < n and source[end] == ".":
                raise PolicySyntaxError("only integer literals are allowed", line, col + end - idx)
            tokens.append(Token("NUMBER", source[idx:end], line, start_col))
            col += end - idx
            idx = end
            continue
        if c.isalpha() or c == "_":
            end = idx
            while end < n and (source[end].isalnum() or source[end] == "_"):
                end += 1
            word = source[idx:end]
            kind = "OP" if word == "mod" else "NAME"
            tokens.append(Token(kind, word, line, start_col))
            col += end - idx
            idx = end
            continue
        if c in "\"'":
            end = source.find(c, idx + 1)
            if end < 0 or "\n" in source[idx:end]:
                raise PolicySyntaxError("unterminated string", line, col)
            tokens.append(Token("STRING", source[idx + 1:end], line, start_col))
            col += end + 1 - idx
            idx = end + 1
            continue
        if c in "+-*/":
            tokens.append(Token("OP", c, line, start_col))
        elif c == "(":
            tokens.append(Token("LPAREN", c, line, start_col))
        elif c == ")":
            tokens.append(Token("RPAREN", c, line, start_col))
        else:
            raise PolicySyntaxError(f"unexpected character {c!r}", line, col)
        idx, col = idx + 1, col + 1

    tokens.append(Token("EOF", "", line, col))
    return tokens

# endregion


# ====================================================================== #
# region           PARSER                                                 #
# ====================================================================== #

class _Parser:
    """Precedence climbing over a token list.

    Unary minus binds tighter than ``*``, ``/`` and ``mod``, which bind
    tighter than ``+`` and ``-``. All binary operators are left-associative.
    """

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.advance()
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise PolicySyntaxError(f"expected {what}, found {found!r}", tok.line, tok.column)
        return tok

    def parse(self):
        expr = self.expression(1)
        tok = self.peek()
        if tok.kind != "EOF":
            raise PolicySyntaxError(f"unexpected {tok.text!r} after expression", tok.line, tok.column)
        return expr

    def expression(self, min_prec):
        left = self.unary()
        while True:
            tok = self.peek()
            op = _OPERATORS.get(tok.text) if tok.kind == "OP" else None
            if op is None or op.precedence < min_prec:
                return left
            self.advance()
            right = self.expression(op.precedence + 1)
            left = BinOp(op, left, right)

    def unary(self):
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        tok = self.advance()
        if tok.kind == "NUMBER":
            value = int(tok.text)
            try:
                float(value)
            except OverflowError:
                raise PolicySyntaxError("integer literal too large", tok.line, tok.column) from None
            return IntLit(value)
        if tok.kind == "LPAREN":
            inner = self.expression(1)
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind == "NAME":
            if tok.text == "dspace":
                self.expect("LPAREN", "'(' after dspace")
                name = self.expect("STRING", "a quoted design-space name")
                if not name.text:
                    raise PolicySyntaxError("dspace name must be non-empty", name.line, name.column)
                self.expect("RPAREN", "')'")
                return DSpace(name.text)
            if tok.text in _TERMINALS:
                return Var(_TERMINALS[tok.text])
            raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
        found = tok.text or "end of input"
        raise PolicySyntaxError(f"expected a value, found {found!r}", tok.line, tok.column)


def parse_policy(text):
    """Parse policy text into a syntax tree.

    Parameters
    ----------
    text : str
        One expression; ``#`` starts a comment that runs to end of line.

    Returns
    -------
    PolicyExpr

    Raises
    ------
    PolicySyntaxError
        Malformed text, with 1-based line and column.
    UnknownIdentifierError
        A name that is neither a terminal nor ``dspace``.
    """
    return _Parser(tokenize(text)).parse()


def pretty_print(expr):
    """Render ``expr`` with minimal brackets; parsing the result gives ``expr`` back."""
    return expr.to_text()


def read_policy_file(path):
    """Return the UTF-8 text of a policy file."""
    return Path(path).read_text(encoding="utf-8")


def design_parameters(expr):
    """Return the sorted dspace names an expression refers to."""
    names = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, DSpace):
            names.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
    return sorted(names)

# endregion


# ====================================================================== #
# region           EVALUATION & SELECTION                                 #
# ====================================================================== #

class ServerScore(NamedTuple):
    server: int
    base: float
    resolved: float


def evaluate(expr, snap, rng):
    """Evaluate ``expr`` for one server.

    Parameters
    ----------
    expr : PolicyExpr
    snap : ServerSnapshot
    rng : RandomStream
        Consumed once per ``random`` leaf.

    Returns
    -------
    float

    Raises
    ------
    PolicyEvaluationError
        Division or ``mod`` by zero.
    ConfigError
        ``dspace`` name missing from ``snap.design_params``.
    """
    return expr.evaluate(snap, rng)


def score_servers(expr, snaps, nd, rng):
    """Evaluate every server and add its resolution fraction.

    Servers are visited in ascending id, so draws come off ``rng`` in a
    fixed order: the ``random`` leaves of server 0, its fraction (when
    resolving randomly), then server 1, and so on.

    Returns
    -------
    list[ServerScore]
        Indexed by server id.
    """
    ordered = sorted(snaps, key=operator.attrgetter("id"))
    if not ordered or any(s.id != i for i, s in enumerate(ordered)):
        raise ConfigError("snapshots must cover server ids 0..n-1 exactly once")
    scores = []
    for snap in ordered:
        base = expr.evaluate(snap, rng)
        if nd is NdResolution.RANDOM_FRACTION:
            fraction = float(rng.random())
        else:
            fraction = snap.id / snap.num_servers
        scores.append(ServerScore(snap.id, base, base + fraction))
    return scores


def select_server(expr, snaps, nd, rng):
    """Pick the server with the highest resolved policy value.

    Exact ties that survive resolution go to the lowest id. A lone server
    is still scored, so evaluation errors surface even when it must win.

    Returns
    -------
    int
        The chosen server id.
    """
    scores = score_servers(expr, snaps, nd, rng)
    return int(np.argmax([s.resolved for s in scores]))

# endregion
