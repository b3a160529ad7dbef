"""The measure expression language: a small DAX-flavored subset.

Grammar (standard precedence, left associative):

    expr    := term (('+'|'-') term)*
    term    := unary (('*'|'/') unary)*
    unary   := '-'? primary
    primary := number | '[' measure name ']' | FUNC '(' args ')' | '(' expr ')'
    FUNC    := SUM | COUNT | DISTINCTCOUNT | MIN | MAX | AVERAGE | DIVIDE | CALCULATE

Aggregate arguments are column references, bare (``Profit``) or qualified
(``fact[Profit]``); CALCULATE takes comparison filters (``Profit < 0``,
``Market = "APAC"``). Measure names in square brackets may contain spaces
and punctuation; column identifiers may not.

Evaluation is vectorized: every node evaluates to one float per group
plus a parallel "empty" flag that carries MIN/MAX/AVERAGE-over-nothing
through arithmetic instead of fabricating a number.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    CycleDetected,
    EmptyAggregation,
    MeasureSyntaxError,
    QueryError,
    UnknownFunction,
    UnknownMeasure,
)
from .star import (
    ColumnPredicate,
    FilterContext,
    InSet,
    Range,
    StarSchema,
    intersect,
    resolve_rows,
)

AGG_FUNCS = ("SUM", "COUNT", "DISTINCTCOUNT", "MIN", "MAX", "AVERAGE")
ALL_FUNCS = AGG_FUNCS + ("DIVIDE", "CALCULATE")
CALC_OPS = ("=", "<", "<=", ">", ">=")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class NumberLiteral:
    value: float


@dataclass(frozen=True)
class ColumnAgg:
    func: str
    table: str | None
    column: str


@dataclass(frozen=True)
class MeasureRef:
    name: str


@dataclass(frozen=True)
class Divide:
    numerator: "MeasureExpr"
    denominator: "MeasureExpr"
    alternate: "MeasureExpr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * /
    left: "MeasureExpr"
    right: "MeasureExpr"


@dataclass(frozen=True)
class CalcFilter:
    table: str | None
    column: str
    op: str  # one of CALC_OPS
    value: float | str


@dataclass(frozen=True)
class Calculate:
    inner: "MeasureExpr"
    filters: tuple[CalcFilter, ...]


MeasureExpr = Union[NumberLiteral, ColumnAgg, MeasureRef, Divide, Binary, Calculate]


# ---------------------------------------------------------------------------
# Lexer

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | bracket | string | punct | end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "()+-*/,=":
            tokens.append(_Token("punct", c, i))
            i += 1
            continue
        if c in "<>":
            if i + 1 < n and source[i + 1] == "=":
                tokens.append(_Token("punct", c + "=", i))
                i += 2
            else:
                tokens.append(_Token("punct", c, i))
                i += 1
            continue
        if c == "[":
            j = source.find("]", i + 1)
            if j < 0:
                raise MeasureSyntaxError(i, "closing ']'", "end of input")
            name = source[i + 1 : j].strip()
            if not name:
                raise MeasureSyntaxError(i, "a name inside brackets", "']'")
            tokens.append(_Token("bracket", name, i))
            i = j + 1
            continue
        if c == '"':
            j = source.find('"', i + 1)
            if j < 0:
                raise MeasureSyntaxError(i, "closing '\"'", "end of input")
            tokens.append(_Token("string", source[i + 1 : j], i))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(_Token("number", source[i:j], i))
            i = j
            continue
        if c in _IDENT_START:
            j = i
            while j < n and source[j] in _IDENT_CONT:
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        raise MeasureSyntaxError(i, "a token", repr(c))
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == text:
            return self.advance()
        raise MeasureSyntaxError(tok.pos, repr(text), repr(tok.text) if tok.text else "end of input")

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def parse(self) -> MeasureExpr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise MeasureSyntaxError(tok.pos, "end of input", repr(tok.text))
        return expr

    def expr(self) -> MeasureExpr:
        node = self.term()
        while self.at_punct("+") or self.at_punct("-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> MeasureExpr:
        node = self.unary()
        while self.at_punct("*") or self.at_punct("/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> MeasureExpr:
        if self.at_punct("-"):
            self.advance()
            node = self.primary()
            if isinstance(node, NumberLiteral):
                return NumberLiteral(-node.value)
            return Binary("-", NumberLiteral(0.0), node)
        return self.primary()

    def primary(self) -> MeasureExpr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return NumberLiteral(float(tok.text))
        if tok.kind == "bracket":
            self.advance()
            return MeasureRef(tok.text)
        if self.at_punct("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            if self.at_punct("("):
                return self.call(tok)
            raise MeasureSyntaxError(
                tok.pos, "a function call (bare columns are only valid inside aggregates)", repr(tok.text)
            )
        raise MeasureSyntaxError(tok.pos, "a number, [measure], function call, or '('", repr(tok.text) or "end of input")

    def call(self, name_tok: _Token) -> MeasureExpr:
        func = name_tok.text.upper()
        if func not in ALL_FUNCS:
            raise UnknownFunction(name_tok.text)
        self.expect("(")
        if func in AGG_FUNCS:
            table, column = self.column_ref()
            self.expect(")")
            return ColumnAgg(func, table, column)
        if func == "DIVIDE":
            num = self.expr()
            self.expect(",")
            den = self.expr()
            self.expect(",")
            alt = self.expr()
            self.expect(")")
            return Divide(num, den, alt)
        # CALCULATE
        inner = self.expr()
        filters = []
        while self.at_punct(","):
            self.advance()
            filters.append(self.calc_filter())
        self.expect(")")
        if not filters:
            tok = self.peek()
            raise MeasureSyntaxError(tok.pos, "at least one filter in CALCULATE", repr(tok.text))
        return Calculate(inner, tuple(filters))

    def column_ref(self) -> tuple[str | None, str]:
        tok = self.peek()
        if tok.kind != "ident":
            raise MeasureSyntaxError(tok.pos, "a column reference", repr(tok.text) or "end of input")
        self.advance()
        nxt = self.peek()
        if nxt.kind == "bracket":
            self.advance()
            return tok.text, nxt.text
        return None, tok.text

    def calc_filter(self) -> CalcFilter:
        table, column = self.column_ref()
        tok = self.peek()
        if not (tok.kind == "punct" and tok.text in CALC_OPS):
            raise MeasureSyntaxError(tok.pos, "one of " + ", ".join(CALC_OPS), repr(tok.text))
        op = self.advance().text
        val = self.peek()
        if val.kind == "number":
            self.advance()
            return CalcFilter(table, column, op, float(val.text))
        if val.kind == "string":
            self.advance()
            return CalcFilter(table, column, op, val.text)
        if val.kind == "punct" and val.text == "-":
            self.advance()
            num = self.peek()
            if num.kind == "number":
                self.advance()
                return CalcFilter(table, column, op, -float(num.text))
            raise MeasureSyntaxError(num.pos, "a number", repr(num.text))
        raise MeasureSyntaxError(val.pos, "a number or string literal", repr(val.text))


def parse(source: str) -> MeasureExpr:
    """Parse measure source text to its AST."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printer (canonical form; parse(print_expr(e)) is structurally e)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _format_column(table: str | None, column: str) -> str:
    return f"{table}[{column}]" if table else column


def _format_filter_value(value) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    return _format_number(value)


def print_expr(expr: MeasureExpr) -> str:
    """Render an AST back to canonical source text (round-trip safe)."""
    if isinstance(expr, NumberLiteral):
        return _format_number(expr.value)
    if isinstance(expr, MeasureRef):
        return f"[{expr.name}]"
    if isinstance(expr, ColumnAgg):
        return f"{expr.func}({_format_column(expr.table, expr.column)})"
    if isinstance(expr, Divide):
        parts = (print_expr(expr.numerator), print_expr(expr.denominator), print_expr(expr.alternate))
        return "DIVIDE({}, {}, {})".format(*parts)
    if isinstance(expr, Calculate):
        filters = ", ".join(
            f"{_format_column(f.table, f.column)} {f.op} {_format_filter_value(f.value)}" for f in expr.filters
        )
        return f"CALCULATE({print_expr(expr.inner)}, {filters})"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        left = print_expr(expr.left)
        if isinstance(expr.left, Binary) and _PRECEDENCE[expr.left.op] < prec:
            left = f"({left})"
        right = print_expr(expr.right)
        if isinstance(expr.right, Binary) and _PRECEDENCE[expr.right.op] <= prec:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not a measure expression: {expr!r}")


# ---------------------------------------------------------------------------
# Catalog


class MeasureCatalog:
    """Ordered, cycle-free registry of named measures."""

    def __init__(self):
        self._entries: dict[str, tuple[str, MeasureExpr]] = {}

    def register(self, name: str, source: str) -> MeasureExpr:
        if name in self._entries:
            raise ValueError(f"measure already registered: [{name}]")
        expr = parse(source)
        for ref in _measure_refs(expr):
            if ref not in self._entries and ref != name:
                raise UnknownMeasure(ref)
        self._entries[name] = (source, expr)
        self._check_acyclic(name)
        return expr

    def _check_acyclic(self, start: str) -> None:
        path: list[str] = []

        def visit(name: str) -> None:
            if name in path:
                raise CycleDetected(path[path.index(name) :] + [name])
            entry = self._entries.get(name)
            if entry is None:
                return
            path.append(name)
            for ref in _measure_refs(entry[1]):
                visit(ref)
            path.pop()

        visit(start)

    def expr(self, name: str) -> MeasureExpr:
        try:
            return self._entries[name][1]
        except KeyError:
            raise UnknownMeasure(name) from None

    def source(self, name: str) -> str:
        try:
            return self._entries[name][0]
        except KeyError:
            raise UnknownMeasure(name) from None

    def names(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return [(name, source) for name, (source, _) in self._entries.items()]

    def subset(self, names) -> "MeasureCatalog":
        sub = MeasureCatalog()
        for name in names:
            sub.register(name, self.source(name))
        return sub


def _measure_refs(expr: MeasureExpr):
    if isinstance(expr, MeasureRef):
        yield expr.name
    elif isinstance(expr, Divide):
        yield from _measure_refs(expr.numerator)
        yield from _measure_refs(expr.denominator)
        yield from _measure_refs(expr.alternate)
    elif isinstance(expr, Binary):
        yield from _measure_refs(expr.left)
        yield from _measure_refs(expr.right)
    elif isinstance(expr, Calculate):
        yield from _measure_refs(expr.inner)


BUILTIN_MEASURES: tuple[tuple[str, str], ...] = (
    ("Total Sales", "SUM(Sales)"),
    ("Total Profit", "SUM(Profit)"),
    ("Total Orders", "DISTINCTCOUNT(OrderID)"),
    ("Profit Margin %", "DIVIDE(SUM(Profit), SUM(Sales), 0)"),
    ("Avg Profit per Order", "DIVIDE([Total Profit], [Total Orders], 0)"),
    ("Shipping Subsidy", "SUM(ShippingCost) - SUM(ShippingPayment)"),
    ("Total Loss", "CALCULATE(SUM(Profit), Profit < 0)"),
)

#: measure names available in each bundled dashboard version
VERSION_MEASURES = {
    "v1": ("Total Sales", "Total Orders"),
    "v2": ("Total Sales", "Total Profit", "Total Orders", "Profit Margin %", "Avg Profit per Order"),
    "v3": ("Total Sales", "Total Profit", "Total Orders", "Profit Margin %", "Avg Profit per Order"),
    "v4": tuple(name for name, _ in BUILTIN_MEASURES),
}


def register_builtin_catalog() -> MeasureCatalog:
    """The full (version 4) seven-measure catalog."""
    catalog = MeasureCatalog()
    for name, source in BUILTIN_MEASURES:
        catalog.register(name, source)
    return catalog


def version_catalog(version: str) -> MeasureCatalog:
    """The measure subset available in one dashboard version (v1..v4)."""
    try:
        names = VERSION_MEASURES[version]
    except KeyError:
        raise ValueError(f"unknown version: {version!r} (expected v1..v4)") from None
    return register_builtin_catalog().subset(names)


# ---------------------------------------------------------------------------
# Evaluator


class _EvalState:
    __slots__ = ("schema", "ctx", "mask", "group_codes", "n_groups", "catalog", "visiting")

    def __init__(self, schema, ctx, mask, group_codes, n_groups, catalog):
        self.schema = schema
        self.ctx = ctx
        self.mask = mask
        self.group_codes = group_codes  # int64 per fact row, or None for scalar
        self.n_groups = n_groups
        self.catalog = catalog
        self.visiting: list[str] = []


def _calc_filter_context(filters: tuple[CalcFilter, ...]) -> FilterContext:
    preds = []
    for f in filters:
        if f.op == "=":
            op = InSet(frozenset([f.value]))
        elif f.op == "<":
            op = Range(hi=f.value, hi_inclusive=False)
        elif f.op == "<=":
            op = Range(hi=f.value, hi_inclusive=True)
        elif f.op == ">":
            op = Range(lo=f.value, lo_inclusive=False)
        else:
            op = Range(lo=f.value, lo_inclusive=True)
        preds.append(ColumnPredicate(f.table, f.column, op))
    return FilterContext.of(preds)


def _aggregate(state: _EvalState, agg: ColumnAgg, mask: np.ndarray):
    schema: StarSchema = state.schema
    col, storage = schema.fact_values(agg.table, agg.column)
    valid = mask & ~col.missing_mask() if col.missing_mask().any() else mask
    n = state.n_groups
    if state.group_codes is None:
        codes = np.zeros(int(valid.sum()), dtype=np.int64)
    else:
        codes = state.group_codes[valid]
    counts = np.bincount(codes, minlength=n).astype(np.float64)
    empty = counts == 0

    if agg.func == "COUNT":
        return counts, np.zeros(n, dtype=bool)
    if agg.func == "DISTINCTCOUNT":
        sel = storage[valid]
        if len(sel) == 0:
            return np.zeros(n), np.zeros(n, dtype=bool)
        _, val_codes = np.unique(sel, return_inverse=True)
        pair = codes * np.int64(val_codes.max() + 1) + val_codes
        uniq = np.unique(pair)
        out = np.bincount((uniq // np.int64(val_codes.max() + 1)).astype(np.int64), minlength=n)
        return out.astype(np.float64), np.zeros(n, dtype=bool)

    if col.is_dictionary:
        raise QueryError(f"{agg.func} needs a numeric column, {agg.column} is {col.kind}")
    sel_vals = storage[valid].astype(np.float64)
    if agg.func == "SUM":
        return np.bincount(codes, weights=sel_vals, minlength=n), np.zeros(n, dtype=bool)
    if agg.func == "AVERAGE":
        sums = np.bincount(codes, weights=sel_vals, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(empty, np.nan, sums / np.where(empty, 1.0, counts))
        return vals, empty
    # MIN / MAX
    init = np.inf if agg.func == "MIN" else -np.inf
    out = np.full(n, init, dtype=np.float64)
    if len(sel_vals):
        if agg.func == "MIN":
            np.minimum.at(out, codes, sel_vals)
        else:
            np.maximum.at(out, codes, sel_vals)
    return out, empty


def _eval(state: _EvalState, expr: MeasureExpr, mask: np.ndarray):
    n = state.n_groups
    if isinstance(expr, NumberLiteral):
        return np.full(n, float(expr.value)), np.zeros(n, dtype=bool)
    if isinstance(expr, ColumnAgg):
        return _aggregate(state, expr, mask)
    if isinstance(expr, MeasureRef):
        if expr.name in state.visiting:
            raise CycleDetected(state.visiting + [expr.name])
        if state.catalog is None or expr.name not in state.catalog:
            raise UnknownMeasure(expr.name)
        state.visiting.append(expr.name)
        try:
            return _eval(state, state.catalog.expr(expr.name), mask)
        finally:
            state.visiting.pop()
    if isinstance(expr, Divide):
        num, num_empty = _eval(state, expr.numerator, mask)
        den, den_empty = _eval(state, expr.denominator, mask)
        alt, alt_empty = _eval(state, expr.alternate, mask)
        zero = den == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(zero, alt, np.divide(num, np.where(zero, 1.0, den)))
        empty = den_empty | np.where(zero, alt_empty, num_empty)
        return vals, empty
    if isinstance(expr, Binary):
        left, left_empty = _eval(state, expr.left, mask)
        right, right_empty = _eval(state, expr.right, mask)
        with np.errstate(invalid="ignore", divide="ignore"):
            if expr.op == "+":
                vals = left + right
            elif expr.op == "-":
                vals = left - right
            elif expr.op == "*":
                vals = left * right
            else:
                vals = left / right
        return vals, left_empty | right_empty
    if isinstance(expr, Calculate):
        fc = _calc_filter_context(expr.filters)
        sub = mask & resolve_rows(state.schema, fc)
        return _eval(state, expr.inner, sub)
    raise TypeError(f"not a measure expression: {expr!r}")


def evaluate_grouped(
    expr: MeasureExpr,
    schema: StarSchema,
    mask: np.ndarray,
    group_codes: np.ndarray | None,
    n_groups: int,
    catalog: MeasureCatalog | None = None,
):
    """Evaluate per group; returns (values, empty flags), both length n_groups."""
    state = _EvalState(schema, None, mask, group_codes, n_groups, catalog)
    return _eval(state, expr, mask)


def evaluate(
    expr: MeasureExpr,
    schema: StarSchema,
    ctx: FilterContext | None = None,
    catalog: MeasureCatalog | None = None,
) -> float:
    """Evaluate a measure to a scalar under a filter context.

    Raises EmptyAggregation when the expression hinges on MIN/MAX/AVERAGE
    over an empty selection.
    """
    ctx = ctx if ctx is not None else FilterContext()
    mask = resolve_rows(schema, ctx)
    vals, empty = evaluate_grouped(expr, schema, mask, None, 1, catalog)
    if empty[0]:
        name = expr.func if isinstance(expr, ColumnAgg) else "aggregate"
        column = expr.column if isinstance(expr, ColumnAgg) else "?"
        raise EmptyAggregation(name, column)
    return float(vals[0])


def evaluate_measure(
    name: str,
    schema: StarSchema,
    ctx: FilterContext | None = None,
    catalog: MeasureCatalog | None = None,
) -> float:
    """Evaluate a cataloged measure by name."""
    if catalog is None or name not in catalog:
        raise UnknownMeasure(name)
    return evaluate(catalog.expr(name), schema, ctx, catalog)
