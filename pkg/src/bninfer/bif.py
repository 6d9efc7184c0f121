"""Parser, validator and canonical serializer for discrete BIF network files.

Supports the common BIF 0.15 subset used by the public benchmark networks:
``network`` header, ``variable { type discrete [n] { ... }; }`` declarations,
and ``probability ( child | parents )`` blocks with either per-parent-tuple
rows or the root ``table`` form. ``//`` and ``/* */`` comments are stripped;
``property`` entries are parsed and ignored.

All failures raise :class:`BifError` carrying a line/column position where
one is available; no input crashes the parser.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import Network

ROW_SUM_TOL = 1e-6

_PUNCT = set("{}()[]|,;")


class BifError(Exception):
    """Structured parse/validation error with optional source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class BifVariable:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class BifProbability:
    """One CPT block. Rows are stored in canonical row-major order over the
    parent values in declared order, so two blocks with the same content
    compare equal regardless of source row order."""

    child: str
    parents: tuple[str, ...]
    rows: tuple[tuple[tuple[str, ...], tuple[float, ...]], ...]


@dataclass(frozen=True)
class BifDocument:
    network_name: str
    variables: tuple[BifVariable, ...]
    probability_blocks: tuple[BifProbability, ...]


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise BifError("unterminated /* comment", line, col)
            skipped = source[i : end + 2]
            line += skipped.count("\n")
            col = len(skipped) - skipped.rfind("\n") if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, line, col))
            i += 1
            col += 1
            continue
        if ch == '"':
            end = source.find('"', i + 1)
            if end < 0:
                raise BifError("unterminated string", line, col)
            tokens.append(_Token(source[i + 1 : end], line, col))
            col += end + 1 - i
            i = end + 1
            continue
        start = i
        while i < n and not source[i].isspace() and source[i] not in _PUNCT and source[i] != '"':
            i += 1
        tokens.append(_Token(source[start:i], line, col))
        col += i - start
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, what: str = "token") -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise BifError(
                f"unexpected end of input, expected {what}",
                last.line if last else 1,
                last.col if last else 1,
            )
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next(repr(text))
        if tok.text != text:
            raise BifError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def fail(self, message: str) -> BifError:
        tok = self.peek() or (self.tokens[-1] if self.tokens else None)
        return BifError(message, tok.line if tok else 1, tok.col if tok else 1)

    def skip_property(self) -> None:
        # property payload is free-form metadata; consume through ';'
        while True:
            tok = self.next("';' ending property")
            if tok.text == ";":
                return

    def number(self) -> float:
        tok = self.next("number")
        try:
            return float(tok.text)
        except ValueError:
            raise BifError(f"expected a number, found {tok.text!r}", tok.line, tok.col) from None

    def number_list(self) -> tuple[float, ...]:
        values = [self.number()]
        while True:
            tok = self.next("',' or ';'")
            if tok.text == ";":
                return tuple(values)
            if tok.text != ",":
                raise BifError(f"expected ',' or ';', found {tok.text!r}", tok.line, tok.col)
            values.append(self.number())


def parse_bif(source: str) -> BifDocument:
    """Parse BIF text into a validated :class:`BifDocument`.

    Whitespace and comment layout never affect the result. Raises
    :class:`BifError` on syntax errors, duplicate or undeclared variables,
    row count or probability vector length mismatches, and rows that do not
    sum to 1 within 1e-6.
    """
    try:
        p = _Parser(_tokenize(source))
    except BifError:
        raise
    p.expect("network")
    name_parts = []
    while True:
        tok = p.next("network name or '{'")
        if tok.text == "{":
            break
        name_parts.append(tok.text)
    network_name = " ".join(name_parts)
    depth = 1
    while depth:
        tok = p.next("'}' closing network block")
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1

    variables: list[BifVariable] = []
    by_name: dict[str, BifVariable] = {}
    blocks: list[BifProbability] = []
    seen_children: set[str] = set()
    while p.peek() is not None:
        tok = p.next("'variable' or 'probability'")
        if tok.text == "variable":
            var = _parse_variable(p)
            if var.name in by_name:
                raise BifError(f"duplicate variable {var.name!r}", tok.line, tok.col)
            by_name[var.name] = var
            variables.append(var)
        elif tok.text == "probability":
            block = _parse_probability(p, by_name)
            if block.child in seen_children:
                raise BifError(
                    f"duplicate probability block for {block.child!r}", tok.line, tok.col
                )
            seen_children.add(block.child)
            blocks.append(block)
        elif tok.text == "property":
            p.skip_property()
        else:
            raise BifError(
                f"expected 'variable' or 'probability', found {tok.text!r}",
                tok.line,
                tok.col,
            )
    return BifDocument(network_name, tuple(variables), tuple(blocks))


def _parse_variable(p: _Parser) -> BifVariable:
    name_tok = p.next("variable name")
    p.expect("{")
    values: tuple[str, ...] | None = None
    while True:
        tok = p.next("variable body")
        if tok.text == "}":
            break
        if tok.text == "property":
            p.skip_property()
            continue
        if tok.text != "type":
            raise BifError(f"expected 'type', found {tok.text!r}", tok.line, tok.col)
        kind = p.next("'discrete'")
        if kind.text != "discrete":
            raise BifError(f"unsupported variable type {kind.text!r}", kind.line, kind.col)
        p.expect("[")
        count_tok = p.next("value count")
        try:
            declared = int(count_tok.text)
        except ValueError:
            raise BifError(
                f"expected an integer value count, found {count_tok.text!r}",
                count_tok.line,
                count_tok.col,
            ) from None
        p.expect("]")
        p.expect("{")
        labels = []
        while True:
            tok = p.next("value label")
            if tok.text == "}":
                break
            if tok.text == ",":
                continue
            labels.append(tok.text)
        p.expect(";")
        if declared != len(labels):
            raise BifError(
                f"variable {name_tok.text!r} declares {declared} values but lists "
                f"{len(labels)}",
                count_tok.line,
                count_tok.col,
            )
        if len(set(labels)) != len(labels):
            raise BifError(
                f"variable {name_tok.text!r} has duplicate value labels",
                name_tok.line,
                name_tok.col,
            )
        if declared < 1:
            raise BifError(
                f"variable {name_tok.text!r} must have at least one value",
                count_tok.line,
                count_tok.col,
            )
        values = tuple(labels)
    if values is None:
        raise BifError(
            f"variable {name_tok.text!r} has no type declaration",
            name_tok.line,
            name_tok.col,
        )
    return BifVariable(name_tok.text, values)


def _parse_probability(p: _Parser, by_name: dict[str, BifVariable]) -> BifProbability:
    open_tok = p.expect("(")
    child_tok = p.next("child variable name")
    if child_tok.text not in by_name:
        raise BifError(
            f"undeclared variable {child_tok.text!r} in probability block",
            child_tok.line,
            child_tok.col,
        )
    child = by_name[child_tok.text]
    parents: list[BifVariable] = []
    tok = p.next("'|' or ')'")
    if tok.text == "|":
        while True:
            par_tok = p.next("parent variable name")
            if par_tok.text not in by_name:
                raise BifError(
                    f"undeclared variable {par_tok.text!r} in probability block",
                    par_tok.line,
                    par_tok.col,
                )
            parents.append(by_name[par_tok.text])
            tok = p.next("',' or ')'")
            if tok.text == ")":
                break
            if tok.text != ",":
                raise BifError(f"expected ',' or ')', found {tok.text!r}", tok.line, tok.col)
    elif tok.text != ")":
        raise BifError(f"expected '|' or ')', found {tok.text!r}", tok.line, tok.col)

    p.expect("{")
    rows: dict[tuple[str, ...], tuple[float, ...]] = {}
    while True:
        tok = p.next("probability row or '}'")
        if tok.text == "}":
            break
        if tok.text == "property":
            p.skip_property()
            continue
        if tok.text == "table":
            if parents:
                raise BifError(
                    f"'table' form requires a parentless block ({child.name!r} has "
                    f"{len(parents)} parents)",
                    tok.line,
                    tok.col,
                )
            if () in rows:
                raise BifError(f"duplicate table for {child.name!r}", tok.line, tok.col)
            rows[()] = p.number_list()
            continue
        if tok.text != "(":
            raise BifError(
                f"expected '(', 'table' or 'property', found {tok.text!r}",
                tok.line,
                tok.col,
            )
        if not parents:
            raise BifError(
                f"tuple row in parentless block for {child.name!r}", tok.line, tok.col
            )
        key = []
        while True:
            val_tok = p.next("parent value label")
            if val_tok.text == ")":
                break
            if val_tok.text == ",":
                continue
            key.append(val_tok.text)
        if len(key) != len(parents):
            raise BifError(
                f"row for {child.name!r} lists {len(key)} parent values, expected "
                f"{len(parents)}",
                tok.line,
                tok.col,
            )
        for label, parent in zip(key, parents):
            if label not in parent.values:
                raise BifError(
                    f"{label!r} is not a value of parent {parent.name!r}",
                    tok.line,
                    tok.col,
                )
        key_t = tuple(key)
        if key_t in rows:
            raise BifError(
                f"duplicate row {key_t} for {child.name!r}", tok.line, tok.col
            )
        rows[key_t] = p.number_list()

    expected_rows = int(np.prod([len(par.values) for par in parents], dtype=np.int64))
    if len(rows) != expected_rows:
        raise BifError(
            f"block for {child.name!r} has {len(rows)} rows, expected {expected_rows}",
            open_tok.line,
            open_tok.col,
        )
    canonical = []
    for combo in itertools.product(*(par.values for par in parents)):
        if combo not in rows:
            raise BifError(
                f"block for {child.name!r} is missing row {combo}",
                open_tok.line,
                open_tok.col,
            )
        probs = rows[combo]
        if len(probs) != len(child.values):
            raise BifError(
                f"row {combo} for {child.name!r} has {len(probs)} probabilities, "
                f"expected {len(child.values)}",
                open_tok.line,
                open_tok.col,
            )
        if any(q < 0 for q in probs):
            raise BifError(
                f"row {combo} for {child.name!r} has a negative probability",
                open_tok.line,
                open_tok.col,
            )
        if abs(sum(probs) - 1.0) > ROW_SUM_TOL:
            raise BifError(
                f"row {combo} for {child.name!r} sums to {sum(probs):.8f}, not 1",
                open_tok.line,
                open_tok.col,
            )
        canonical.append((combo, probs))
    return BifProbability(
        child.name, tuple(par.name for par in parents), tuple(canonical)
    )


def _format_probability(value: float) -> str:
    return f"{value:.6g}"


def serialize_bif(doc: BifDocument) -> str:
    """Canonical text form: declared order, canonical row order, 6 significant
    digits. Serialization is deterministic and idempotent under reparse."""
    out = [f"network {doc.network_name} {{", "}"]
    for var in doc.variables:
        out.append(f"variable {var.name} {{")
        out.append(
            f"  type discrete [ {len(var.values)} ] {{ {', '.join(var.values)} }};"
        )
        out.append("}")
    for block in doc.probability_blocks:
        if block.parents:
            out.append(
                f"probability ( {block.child} | {', '.join(block.parents)} ) {{"
            )
            for combo, probs in block.rows:
                row = ", ".join(_format_probability(q) for q in probs)
                out.append(f"  ({', '.join(combo)}) {row};")
        else:
            out.append(f"probability ( {block.child} ) {{")
            row = ", ".join(_format_probability(q) for q in block.rows[0][1])
            out.append(f"  table {row};")
        out.append("}")
    return "\n".join(out) + "\n"


def to_network(doc: BifDocument) -> Network:
    """Build the immutable network model from a parsed document.

    Raises :class:`BifError` if a variable lacks a probability block or the
    implied parent graph has a cycle.
    """
    index = {var.name: i for i, var in enumerate(doc.variables)}
    blocks = {block.child: block for block in doc.probability_blocks}
    parents: list[tuple[int, ...]] = []
    cpts: list[np.ndarray] = []
    for var in doc.variables:
        block = blocks.get(var.name)
        if block is None:
            raise BifError(f"variable {var.name!r} is missing a probability block")
        parents.append(tuple(index[name] for name in block.parents))
        cpts.append(np.array([probs for _, probs in block.rows], dtype=np.float64))
    for name in blocks:
        if name not in index:
            raise BifError(f"probability block for undeclared variable {name!r}")
    try:
        return Network.build(
            doc.network_name,
            [(var.name, var.values) for var in doc.variables],
            parents,
            cpts,
        )
    except ValueError as exc:
        raise BifError(str(exc)) from exc


def load_network(path: str | Path) -> Network:
    """Parse a .bif file from disk and build the network model."""
    text = Path(path).read_text(encoding="utf-8")
    return to_network(parse_bif(text))


def free_parameter_count(net: Network) -> int:
    """Independent CPT entries: sum over variables of
    (cardinality - 1) * number of parent configurations."""
    return int(
        sum((net.cards[i] - 1) * net.cpts[i].shape[0] for i in range(net.n_variables))
    )
