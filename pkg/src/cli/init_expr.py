import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import orjson
from pyparsing import (
    Forward,
    Keyword,
    Literal,
    ParseBaseException,
    Regex,
    StringEnd,
    Suppress,
    ZeroOrMore,
    one_of,
)

from src.errors import InitExprError, MuDPError
from src.grid.periodic import PeriodicFunction, from_fourier, grid_points

logger = logging.getLogger(__name__)

# sin/cos arguments a x + b need a / (2 pi) within this distance of an integer.
FREQUENCY_TOL = 1e-9


# Parse tree


@dataclass(frozen=True)
class Num:
    value: float
    position: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.full_like(x, self.value)


@dataclass(frozen=True)
class Var:
    position: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return x


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    position: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return -self.operand.evaluate(x)


@dataclass(frozen=True)
class Func:
    name: str
    argument: "Node"
    position: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        fn = np.sin if self.name == "sin" else np.cos
        return fn(self.argument.evaluate(x))


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    position: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        a, b = self.left.evaluate(x), self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        return a * b


Node = Union[Num, Var, Neg, Func, BinOp]


def _fold(s, loc, tokens):
    """Left-associative fold of operand (op operand)* into BinOp nodes at loc."""
    node = tokens[0]
    for i in range(1, len(tokens), 2):
        node = BinOp(tokens[i], node, tokens[i + 1], loc)
    return node


def _grammar():
    expr = Forward()
    factor = Forward()

    number = Regex(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
    number.set_parse_action(lambda s, loc, t: Num(float(t[0]), loc))
    var = Keyword("x").set_parse_action(lambda s, loc, t: Var(loc))
    pi = Keyword("pi").set_parse_action(lambda s, loc, t: Num(math.pi, loc))
    lpar, rpar = Suppress("("), Suppress(")")

    call = (Keyword("sin") | Keyword("cos")) + lpar + expr + rpar
    call.set_parse_action(lambda s, loc, t: Func(t[0], t[1], loc))
    negation = Suppress(Literal("-")) + factor
    negation.set_parse_action(lambda s, loc, t: Neg(t[0], loc))

    factor <<= number | var | pi | call | (lpar + expr + rpar) | negation
    term = factor + ZeroOrMore(Literal("*") + factor)
    term.set_parse_action(_fold)
    expr <<= term + ZeroOrMore(one_of("+ -") + term)
    expr.set_parse_action(_fold)
    return expr + StringEnd()


GRAMMAR = _grammar()


# Periodicity classification


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Affine:
    """a x + b with a != 0."""

    a: float
    b: float


@dataclass(frozen=True)
class Periodic:
    pass


Kind = Union[Const, Affine, Periodic]


def _affine(a: float, b: float) -> Kind:
    return Const(b) if a == 0 else Affine(a, b)


def _coeffs(kind: Kind) -> Tuple[float, float]:
    return (0.0, kind.value) if isinstance(kind, Const) else (kind.a, kind.b)


def classify(node: Node) -> Kind:
    """
    Decides whether a tree is a constant, an affine function of x or a
    1-periodic function, rejecting every construction that is none of these.
    """
    kind = _classify(node)
    if not isinstance(kind, Periodic) and not all(map(math.isfinite, _coeffs(kind))):
        raise InitExprError("constant out of range", node.position)
    return kind


def _classify(node: Node) -> Kind:
    if isinstance(node, Num):
        if not math.isfinite(node.value):
            raise InitExprError("number out of range", node.position)
        return Const(node.value)
    if isinstance(node, Var):
        return Affine(1.0, 0.0)
    if isinstance(node, Neg):
        inner = classify(node.operand)
        if isinstance(inner, Periodic):
            return inner
        a, b = _coeffs(inner)
        return _affine(-a, -b)
    if isinstance(node, Func):
        return _classify_call(node)
    return _classify_binop(node)


def _classify_call(node: Func) -> Kind:
    arg = classify(node.argument)
    if isinstance(arg, Const):
        fn = math.sin if node.name == "sin" else math.cos
        try:
            return Const(fn(arg.value))
        except (ValueError, OverflowError) as e:
            raise InitExprError(
                f"{node.name} of a non-finite constant", node.argument.position
            ) from e
    if isinstance(arg, Periodic):
        raise InitExprError(
            f"argument of {node.name} must be affine in x", node.argument.position
        )
    frequency = arg.a / (2 * math.pi)
    if abs(frequency - round(frequency)) > FREQUENCY_TOL:
        raise InitExprError(
            f"{node.name} with x-coefficient {arg.a:.6g} is not 1-periodic "
            f"(frequency {frequency:.6g} is not an integer)",
            node.argument.position,
        )
    return Periodic()


def _classify_binop(node: BinOp) -> Kind:
    left, right = classify(node.left), classify(node.right)
    if node.op in "+-":
        sign = 1.0 if node.op == "+" else -1.0
        if isinstance(left, Periodic) or isinstance(right, Periodic):
            for side, kind in ((node.left, left), (node.right, right)):
                if isinstance(kind, Affine):
                    raise InitExprError(
                        "non-periodic: linear term in x outside sin/cos", side.position
                    )
            return Periodic()
        (la, lb), (ra, rb) = _coeffs(left), _coeffs(right)
        return _affine(la + sign * ra, lb + sign * rb)

    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value * right.value)
    if isinstance(left, Const) or isinstance(right, Const):
        c, other = (left, right) if isinstance(left, Const) else (right, left)
        if isinstance(other, Periodic):
            return other if c.value != 0 else Const(0.0)
        return _affine(c.value * other.a, c.value * other.b)
    if isinstance(left, Periodic) and isinstance(right, Periodic):
        return Periodic()
    raise InitExprError(
        "non-periodic: product involving a bare x outside sin/cos", node.position
    )


# Public interface


@dataclass(frozen=True)
class InitExpr:
    """A validated initial-data expression."""

    source: str
    tree: Node
    kind: Kind

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.tree.evaluate(x), x.shape).astype(float)

    def sample(self, n: int) -> PeriodicFunction:
        return PeriodicFunction(self.evaluate(grid_points(n)))


def parse_init(source: str) -> InitExpr:
    """
    Parses and validates an initial-data expression.

    Raises:
        InitExprError: on a syntax error or a construction that is not
            1-periodic; the error carries the offending position.
    """
    try:
        tree = GRAMMAR.parse_string(source, parse_all=True)[0]
    except ParseBaseException as e:
        element = getattr(e, "parser_element", None)
        expected = [str(element)] if element is not None else []
        raise InitExprError(f"syntax error: {e.msg}", e.loc, expected) from e
    except RecursionError as e:
        raise InitExprError("expression nested too deeply", 0) from e

    try:
        kind = classify(tree)
    except RecursionError as e:
        raise InitExprError("expression nested too deeply", 0) from e
    if isinstance(kind, Affine):
        raise InitExprError("non-periodic: bare x outside sin/cos", tree.position)
    logger.debug(f"Parsed initial data '{source}' as {type(kind).__name__}")
    return InitExpr(source=source, tree=tree, kind=kind)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def load_fourier(path: Union[str, Path]) -> List[Tuple[int, float, float]]:
    """Reads a JSON list of [k, cos-coefficient, sin-coefficient] triples."""
    try:
        data = orjson.loads(Path(path).read_bytes())
    except (OSError, orjson.JSONDecodeError) as e:
        raise MuDPError(f"Cannot read Fourier data from {path}: {e}") from e
    if not isinstance(data, list):
        raise MuDPError(f"{path}: expected a JSON list of [k, a, b] triples")

    terms = []
    for i, entry in enumerate(data):
        if not isinstance(entry, list) or len(entry) != 3:
            raise MuDPError(f"{path}: entry {i} is not a [k, a, b] triple")
        k, a, b = entry
        if isinstance(k, bool) or not isinstance(k, int) or k < 0:
            raise MuDPError(f"{path}: entry {i} has invalid wavenumber {k!r}")
        if not all(_is_number(c) for c in (a, b)):
            raise MuDPError(
                f"{path}: entry {i} has non-numeric coefficients {a!r}, {b!r}"
            )
        terms.append((k, float(a), float(b)))
    return terms


def initial_data(
    n: int, init: Union[str, None] = None, fourier: Union[str, Path, None] = None
) -> PeriodicFunction:
    """u0 from exactly one of an expression or a Fourier file."""
    if (init is None) == (fourier is None):
        raise MuDPError("Provide exactly one of --init or --fourier")
    if init is not None:
        return parse_init(init).sample(n)
    terms = load_fourier(fourier)
    if any(k > n // 2 for k, _, _ in terms):
        raise MuDPError(f"Fourier data has modes above the Nyquist mode n/2 = {n // 2}")
    return from_fourier(n, terms)
