"""Runtime scalar expressions: parsing, evaluation, rendering.

Grammar (whitespace-insensitive, ASCII):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" number)?
    base   := number | ident | ident "(" expr ")" | "(" expr ")" | "-" factor
    ident  := function name (sin cos exp log sqrt abs) or variable (x1..xm, t)

Precedence is ``^`` over unary minus over ``* /`` over ``+ -``, so
``-x1^2`` is ``-(x1^2)``.  ``^`` is non-associative and its exponent must
be a numeric literal; chains need parentheses.  Evaluation works over
plain floats, numpy arrays, and jets alike, so evaluating over jets yields
the full truncated Taylor expansion of the expression.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExprError
from .jet import apply_elem, jpow

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Neg",
    "Fun",
    "BinOp",
    "Pow",
    "parse",
    "evaluate",
    "render",
    "substitute",
    "node_count",
    "variables",
    "FUNCTION_NAMES",
]

FUNCTION_NAMES = ("sin", "cos", "exp", "log", "sqrt", "abs")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Fun:
    name: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float


Expr = Const | Var | Neg | Fun | BinOp | Pow


# -- tokenizer ----------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM IDENT OP LP RP END
    text: str
    pos: int


_OPS = set("+-*/^")


def _tokenize(src: str) -> list[_Token]:
    toks: list[_Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c in _OPS:
            toks.append(_Token("OP", c, i))
            i += 1
            continue
        if c == "(":
            toks.append(_Token("LP", c, i))
            i += 1
            continue
        if c == ")":
            toks.append(_Token("RP", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ExprError(f"malformed number {text!r}", i) from None
            toks.append(_Token("NUM", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Token("IDENT", src[i:j], i))
            i = j
            continue
        raise ExprError(f"unexpected character {c!r}", i)
    toks.append(_Token("END", "", n))
    return toks


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Token], dim: int, allow_time: bool):
        self.toks = toks
        self.pos = 0
        self.dim = dim
        self.allow_time = allow_time

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def advance(self) -> _Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExprError(f"expected {what}", tok.pos)
        return self.advance()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        node = self.parse_base()
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "^":
            self.advance()
            num = self.expect("NUM", "a numeric literal exponent")
            node = Pow(node, float(num.text))
            nxt = self.peek()
            if nxt.kind == "OP" and nxt.text == "^":
                raise ExprError("chained '^' needs parentheses", nxt.pos)
        return node

    def parse_base(self) -> Expr:
        tok = self.advance()
        if tok.kind == "NUM":
            return Const(float(tok.text))
        if tok.kind == "OP" and tok.text == "-":
            return Neg(self.parse_factor())
        if tok.kind == "LP":
            inner = self.parse_expr()
            self.expect("RP", "')'")
            return inner
        if tok.kind == "IDENT":
            if self.peek().kind == "LP":
                if tok.text not in FUNCTION_NAMES:
                    raise ExprError(f"unknown function {tok.text!r}", tok.pos)
                self.advance()
                inner = self.parse_expr()
                self.expect("RP", "')'")
                return Fun(tok.text, inner)
            return Var(self._check_var(tok))
        raise ExprError("expected a number, variable, function call, or '('", tok.pos)

    def _check_var(self, tok: _Token) -> str:
        name = tok.text
        if name == "t":
            if not self.allow_time:
                raise ExprError("variable 't' not allowed here", tok.pos)
            return name
        if name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
            if 1 <= idx <= self.dim:
                return f"x{idx}"
            raise ExprError(
                f"unknown identifier {name!r} (dimension is {self.dim})", tok.pos
            )
        raise ExprError(f"unknown identifier {name!r}", tok.pos)


def parse(src: str, dim: int, allow_time: bool = False) -> Expr:
    """Parse a source string; raises ExprError with a byte offset on failure."""
    parser = _Parser(_tokenize(src), dim, allow_time)
    node = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "END":
        raise ExprError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return node


# -- evaluation ----------------------------------------------------------------


def evaluate(e: Expr, env: dict):
    """Bottom-up evaluation over whatever ring the env values live in."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ExprError(f"no value bound for variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Fun):
        return apply_elem(e.name, evaluate(e.arg, env))
    if isinstance(e, Pow):
        return jpow(evaluate(e.base, env), e.exponent)
    if isinstance(e, BinOp):
        left = evaluate(e.left, env)
        right = evaluate(e.right, env)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return left / right
    raise TypeError(f"not an expression node: {e!r}")


# -- utilities -----------------------------------------------------------------


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 if e.op in "+-" else 2
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def render(e: Expr) -> str:
    """Deterministic source form; parse(render(e)) is structurally e."""
    if isinstance(e, Const):
        if e.value < 0:
            return f"(0 - {_fmt_number(-e.value)})"
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = render(e.arg)
        if _prec(e.arg) < 3 or isinstance(e.arg, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Fun):
        return f"{e.name}({render(e.arg)})"
    if isinstance(e, Pow):
        base = render(e.base)
        if _prec(e.base) <= 4:
            base = f"({base})"
        return f"{base}^{_fmt_number(e.exponent)}"
    if isinstance(e, BinOp):
        lhs, rhs = render(e.left), render(e.right)
        mine = _prec(e)
        if _prec(e.left) < mine:
            lhs = f"({lhs})"
        # right operand parenthesized at equal precedence: - and / are left-associative
        if _prec(e.right) <= mine:
            rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}"
    raise TypeError(f"not an expression node: {e!r}")


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by expressions (used to compose maps symbolically)."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Fun):
        return Fun(e.name, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    raise TypeError(f"not an expression node: {e!r}")


def node_count(e: Expr) -> int:
    if isinstance(e, (Const, Var)):
        return 1
    if isinstance(e, (Neg, Fun)):
        return 1 + node_count(e.arg)
    if isinstance(e, Pow):
        return 1 + node_count(e.base)
    if isinstance(e, BinOp):
        return 1 + node_count(e.left) + node_count(e.right)
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> set[str]:
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Neg, Fun)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    raise TypeError(f"not an expression node: {e!r}")
