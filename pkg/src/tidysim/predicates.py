"""Evaluation programs: a small s-expression language of binary tests.

A program is a `(score ...)` clause holding one or more scored expressions
and an optional `(harm ...)` clause that gates the whole score.  Example::

    (score (within_m b1 (0 0 0.9) 0.15)
           (on b1 t1))
    (harm (all (unmoved d1) (unmoved d2)))

Atoms query a world state through the relation functions of
:mod:`tidysim.scene`; combinators are `all`, `any`, and unary `not`.
Comments run from ``;`` to end of line.

Numbers are canonicalized to at most 9 significant digits when an AST is
built, so parse -> print -> parse is the identity on every program.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .geom import Box, box_iou, rotation_angle, translation_distance
from .scene import (
    DEFAULT_CONTACT_EPS,
    ToleranceSpec,
    WorldState,
    is_inside,
    is_on,
    open_fraction,
)

__all__ = [
    "Atom",
    "Combinator",
    "BoxLiteral",
    "PredicateProgram",
    "PdlError",
    "ParseError",
    "ArityError",
    "UnknownAtomError",
    "atom",
    "all_of",
    "any_of",
    "not_of",
    "parse",
    "print_program",
    "print_expr",
    "evaluate",
    "referenced_ids",
    "HARM_TOLERANCE",
]

# Default leniency for deciding a protected object "has not been moved".
HARM_TOLERANCE = ToleranceSpec(translation=0.05, rotation=0.1, open=0.05)


class PdlError(Exception):
    """Base for program language errors."""


class ParseError(PdlError):
    def __init__(self, message: str, line: int, col: int, expected: str | None = None):
        loc = f"line {line}, column {col}"
        full = f"{message} at {loc}" + (f" (expected {expected})" if expected else "")
        super().__init__(full)
        self.line = line
        self.col = col
        self.expected = expected


class ArityError(PdlError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{message} at line {line}, column {col}"
        super().__init__(message)
        self.line = line
        self.col = col


class UnknownAtomError(PdlError):
    def __init__(self, name: str, line: int | None = None, col: int | None = None):
        message = f"unknown atom name: {name!r}"
        if line is not None:
            message = f"{message} at line {line}, column {col}"
        super().__init__(message)
        self.name = name
        self.line = line
        self.col = col


def _canon(x: float) -> float:
    """Clamp a number to 9 significant digits; a fixpoint of print+parse."""
    return float(f"{float(x):.9g}")


@dataclass(frozen=True)
class BoxLiteral:
    """Axis-aligned region literal: center and half extents."""

    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(_canon(v) for v in self.center))
        he = tuple(_canon(v) for v in self.half_extents)
        if not all(v > 0 for v in he):
            raise ValueError(f"box half extents must be positive: {he}")
        object.__setattr__(self, "half_extents", he)

    def to_box(self) -> Box:
        return Box.axis_aligned(np.array(self.center), np.array(self.half_extents))


# name -> argument shape; "id" object reference, "num" scalar, "point"
# 3-tuple, "box" BoxLiteral
_ATOM_SIGNATURES: dict[str, tuple[str, ...]] = {
    "within_m": ("id", "point", "num"),
    "iou_gt": ("id", "box", "num"),
    "on": ("id", "id"),
    "inside": ("id", "id"),
    "open_between": ("id", "num", "num"),
    "in_region": ("id", "box"),
    "unmoved": ("id",),
    "rel_within_m": ("id", "id", "num"),
}
# Positional indices of arguments that must be strictly positive thresholds.
_POSITIVE_ARGS = {"within_m": (2,), "iou_gt": (2,), "rel_within_m": (2,)}


@dataclass(frozen=True)
class Atom:
    name: str
    args: tuple

    def __post_init__(self):
        sig = _ATOM_SIGNATURES.get(self.name)
        if sig is None:
            raise UnknownAtomError(self.name)
        if len(self.args) != len(sig):
            raise ArityError(
                f"atom {self.name!r} takes {len(sig)} argument(s), got {len(self.args)}"
            )
        canon = []
        for i, (kind, arg) in enumerate(zip(sig, self.args)):
            if kind == "id":
                if not isinstance(arg, str):
                    raise ArityError(f"atom {self.name!r} argument {i + 1} must be an object id")
                canon.append(arg)
            elif kind == "num":
                if isinstance(arg, bool) or not isinstance(arg, (int, float)):
                    raise ArityError(f"atom {self.name!r} argument {i + 1} must be a number")
                canon.append(_canon(arg))
            elif kind == "point":
                if not (isinstance(arg, tuple) and len(arg) == 3):
                    raise ArityError(f"atom {self.name!r} argument {i + 1} must be a 3-point")
                canon.append(tuple(_canon(v) for v in arg))
            else:
                if not isinstance(arg, BoxLiteral):
                    raise ArityError(f"atom {self.name!r} argument {i + 1} must be a box literal")
                canon.append(arg)
        for i in _POSITIVE_ARGS.get(self.name, ()):
            if not canon[i] > 0:
                raise ValueError(f"atom {self.name!r} threshold must be positive, got {canon[i]}")
        if self.name == "open_between" and canon[1] > canon[2]:
            raise ValueError(f"open_between bounds out of order: {canon[1]} > {canon[2]}")
        object.__setattr__(self, "args", tuple(canon))


@dataclass(frozen=True)
class Combinator:
    op: str  # "all" | "any" | "not"
    operands: tuple

    def __post_init__(self):
        if self.op not in ("all", "any", "not"):
            raise ValueError(f"unknown combinator {self.op!r}")
        if self.op == "not" and len(self.operands) != 1:
            raise ArityError("not takes exactly one operand")
        for e in self.operands:
            if not isinstance(e, (Atom, Combinator)):
                raise TypeError(f"combinator operand must be an expression, got {type(e)}")
        object.__setattr__(self, "operands", tuple(self.operands))


PredExpr = Atom | Combinator


def atom(name: str, *args) -> Atom:
    return Atom(name, tuple(args))


def all_of(*exprs: PredExpr) -> Combinator:
    return Combinator("all", tuple(exprs))


def any_of(*exprs: PredExpr) -> Combinator:
    return Combinator("any", tuple(exprs))


def not_of(expr: PredExpr) -> Combinator:
    return Combinator("not", (expr,))


@dataclass(frozen=True)
class PredicateProgram:
    scored: tuple
    harm: PredExpr | None = None

    def __post_init__(self):
        if not self.scored:
            raise ValueError("program needs at least one scored expression")
        object.__setattr__(self, "scored", tuple(self.scored))


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # "(" | ")" | "symbol" | "number"
    text: str
    line: int
    col: int


_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_SYMBOL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(_Token(c, c, line, col))
            i += 1
            col += 1
        else:
            m = _NUMBER_RE.match(text, i)
            if m and (c.isdigit() or c in "+-." ):
                tokens.append(_Token("number", m.group(), line, col))
                col += m.end() - i
                i = m.end()
                continue
            m = _SYMBOL_RE.match(text, i)
            if m:
                tokens.append(_Token("symbol", m.group(), line, col))
                col += m.end() - i
                i = m.end()
                continue
            raise ParseError(f"unexpected character {c!r}", line, col)
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, expected: str) -> _Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col + len(last.text), expected)
        self.pos += 1
        return tok

    def _expect(self, kind: str) -> _Token:
        tok = self._next(f"'{kind}'")
        if tok.kind != kind:
            raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col, f"'{kind}'")
        return tok

    def _expect_symbol(self, text: str) -> _Token:
        tok = self._next(f"'{text}'")
        if tok.kind != "symbol" or tok.text != text:
            raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col, f"'{text}'")
        return tok

    def parse_program(self) -> PredicateProgram:
        self._expect("(")
        self._expect_symbol("score")
        scored = [self.parse_expr()]
        while True:
            tok = self._peek()
            if tok is None:
                raise ParseError("unexpected end of input", *_end_pos(self.tokens), "expression or ')'")
            if tok.kind == ")":
                self.pos += 1
                break
            scored.append(self.parse_expr())
        harm = None
        if self._peek() is not None:
            self._expect("(")
            self._expect_symbol("harm")
            harm = self.parse_expr()
            self._expect(")")
        trailing = self._peek()
        if trailing is not None:
            raise ParseError(
                f"unexpected token {trailing.text!r} after program", trailing.line, trailing.col, "end of input"
            )
        return PredicateProgram(tuple(scored), harm)

    def parse_expr(self) -> PredExpr:
        self._expect("(")
        head = self._next("combinator or atom name")
        if head.kind != "symbol":
            raise ParseError(
                f"unexpected token {head.text!r}", head.line, head.col, "combinator or atom name"
            )
        if head.text in ("all", "any", "not"):
            operands = []
            while True:
                tok = self._peek()
                if tok is None:
                    raise ParseError("unexpected end of input", *_end_pos(self.tokens), "expression or ')'")
                if tok.kind == ")":
                    self.pos += 1
                    break
                operands.append(self.parse_expr())
            if not operands:
                raise ParseError(
                    f"combinator {head.text!r} needs at least one operand", head.line, head.col, "expression"
                )
            if head.text == "not" and len(operands) != 1:
                raise ArityError("not takes exactly one operand", head.line, head.col)
            return Combinator(head.text, tuple(operands))
        if head.text not in _ATOM_SIGNATURES:
            raise UnknownAtomError(head.text, head.line, head.col)
        args = []
        while True:
            tok = self._peek()
            if tok is None:
                raise ParseError("unexpected end of input", *_end_pos(self.tokens), "argument or ')'")
            if tok.kind == ")":
                self.pos += 1
                break
            args.append(self._parse_arg())
        try:
            return Atom(head.text, tuple(args))
        except ArityError as e:
            raise ArityError(str(e), head.line, head.col) from None
        except ValueError as e:
            raise ParseError(str(e), head.line, head.col) from None

    def _parse_arg(self):
        tok = self._next("argument")
        if tok.kind == "symbol":
            return tok.text
        if tok.kind == "number":
            return float(tok.text)
        if tok.kind == "(":
            inner = self._peek()
            if inner is not None and inner.kind == "symbol" and inner.text == "box":
                self.pos += 1
                center = self._parse_point()
                he = self._parse_point()
                self._expect(")")
                try:
                    return BoxLiteral(center, he)
                except ValueError as e:
                    raise ParseError(str(e), tok.line, tok.col) from None
            return self._finish_point()
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col, "argument")

    def _parse_point(self) -> tuple:
        self._expect("(")
        return self._finish_point()

    def _finish_point(self) -> tuple:
        values = []
        for _ in range(3):
            tok = self._next("number")
            if tok.kind != "number":
                raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col, "number")
            values.append(float(tok.text))
        self._expect(")")
        return tuple(values)


def _end_pos(tokens: list[_Token]) -> tuple[int, int]:
    if not tokens:
        return 1, 1
    last = tokens[-1]
    return last.line, last.col + len(last.text)


def parse(text: str) -> PredicateProgram:
    """Parse program text; errors carry line and column."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty program", 1, 1, "'('")
    return _Parser(tokens).parse_program()


# ---------------------------------------------------------------------------
# Printer


def _format_num(x: float) -> str:
    return f"{x:.9g}"


def _format_expr(e: PredExpr) -> str:
    if isinstance(e, Combinator):
        return "(" + " ".join([e.op] + [_format_expr(o) for o in e.operands]) + ")"
    parts = [e.name]
    for arg in e.args:
        if isinstance(arg, str):
            parts.append(arg)
        elif isinstance(arg, BoxLiteral):
            c = " ".join(_format_num(v) for v in arg.center)
            h = " ".join(_format_num(v) for v in arg.half_extents)
            parts.append(f"(box ({c}) ({h}))")
        elif isinstance(arg, tuple):
            parts.append("(" + " ".join(_format_num(v) for v in arg) + ")")
        else:
            parts.append(_format_num(arg))
    return "(" + " ".join(parts) + ")"


def print_expr(e: PredExpr) -> str:
    """Canonical text of a single expression (one scored clause)."""
    return _format_expr(e)


def print_program(program: PredicateProgram) -> str:
    """Canonical text form; `parse(print_program(p)) == p` exactly."""
    text = "(score " + " ".join(_format_expr(e) for e in program.scored) + ")"
    if program.harm is not None:
        text += "\n(harm " + _format_expr(program.harm) + ")"
    return text


# ---------------------------------------------------------------------------
# Evaluator


def referenced_ids(program: PredicateProgram) -> set[str]:
    ids: set[str] = set()

    def walk(e: PredExpr):
        if isinstance(e, Combinator):
            for o in e.operands:
                walk(o)
            return
        for kind, arg in zip(_ATOM_SIGNATURES[e.name], e.args):
            if kind == "id":
                ids.add(arg)

    for e in program.scored:
        walk(e)
    if program.harm is not None:
        walk(program.harm)
    return ids


def _unmoved(oid: str, s0: WorldState, s: WorldState, tol: ToleranceSpec) -> bool:
    if oid not in s.specs and s.static_box(oid) is not None:
        return True  # fixtures never move
    st0 = s0.get_state(oid)
    st1 = s.get_state(oid)
    if translation_distance(st0.pose, st1.pose) > tol.translation:
        return False
    if rotation_angle(st0.pose, st1.pose) > tol.rotation:
        return False
    if st0.joint_position is not None and st1.joint_position is not None:
        lo, hi = s0.get_spec(oid).articulation.limits
        if abs(st1.joint_position - st0.joint_position) / (hi - lo) > tol.open:
            return False
    return True


def _eval_expr(
    e: PredExpr,
    s0: WorldState,
    s: WorldState,
    harm_tol: ToleranceSpec,
    contact_eps: float,
) -> bool:
    if isinstance(e, Combinator):
        results = (_eval_expr(o, s0, s, harm_tol, contact_eps) for o in e.operands)
        if e.op == "all":
            return all(results)
        if e.op == "any":
            return any(results)
        return not next(results)
    name, args = e.name, e.args
    if name == "within_m":
        oid, point, r = args
        d = np.linalg.norm(s.world_box(oid).center_pose.translation - np.array(point))
        return bool(d <= r)
    if name == "iou_gt":
        oid, box_lit, t = args
        return box_iou(s.world_box(oid), box_lit.to_box()) > t
    if name == "on":
        return is_on(args[0], args[1], s, contact_eps)
    if name == "inside":
        return is_inside(args[0], args[1], s)
    if name == "open_between":
        oid, lo, hi = args
        return bool(lo <= open_fraction(oid, s) <= hi)
    if name == "in_region":
        oid, box_lit = args
        center = s.world_box(oid).center_pose.translation
        return bool(box_lit.to_box().contains(center))
    if name == "unmoved":
        return _unmoved(args[0], s0, s, harm_tol)
    if name == "rel_within_m":
        a, b, r = args
        d = float(
            np.linalg.norm(
                s.world_box(a).center_pose.translation - s.world_box(b).center_pose.translation
            )
        )
        return bool(d <= r)
    raise UnknownAtomError(name)


def evaluate(
    program: PredicateProgram,
    s0: WorldState,
    s: WorldState,
    s_star: WorldState | None = None,
    *,
    harm_tol: ToleranceSpec = HARM_TOLERANCE,
    contact_eps: float = DEFAULT_CONTACT_EPS,
) -> tuple[list[bool], bool]:
    """Run every scored test against `s` and the harm clause against (s0, s).

    Returns one verdict per scored expression plus the harm verdict (true
    when no harm clause is present).  Pure: no state is modified.  `s_star`
    is accepted for forward compatibility; no current atom consults it.
    """
    del s_star
    verdicts = [_eval_expr(e, s0, s, harm_tol, contact_eps) for e in program.scored]
    harm_pass = (
        True
        if program.harm is None
        else _eval_expr(program.harm, s0, s, harm_tol, contact_eps)
    )
    return verdicts, harm_pass
