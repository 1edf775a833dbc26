"""Modal formula language: atoms, connectives, parser and canonical printer.

Concrete syntax::

    ~   negation            &    conjunction        |   disjunction
    ->  material cond.      []-> counterfactual     =>  strict conditional

Binding strength, tightest first: ``~ & | -> []-> =>``.  ``->`` is
right-associative; ``[]->`` and ``=>`` take one operator per level and need
parentheses to nest.  Atoms are a region name followed by a measurement
number (``R1``, a choice) and optionally an outcome sign (``R1-``).
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterator, Protocol, Sequence

CHOICE = "choice"
OUTCOME = "outcome"


class FormulaSyntaxError(SyntaxError):
    """Malformed formula text."""

    def __init__(self, message: str, text: str, position: int, expected: Sequence[str] = ()):
        self.text_source = text
        self.position = position
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at position {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownAtom(ValueError):
    """Atom names a region or measurement the setup does not declare."""


class SetupLike(Protocol):
    regions: tuple[str, ...]
    outcomes: tuple[str, ...]

    def n_measurements(self, region: str) -> int: ...


class Formula:
    """Base class for formula nodes; nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)

    def atoms(self) -> Iterator[Atom]:
        yield from _atoms(self)

    def regions(self) -> frozenset[str]:
        return frozenset(a.region for a in self.atoms())

    def is_rudimentary(self) -> bool:
        return not any(isinstance(n, (StrictCond, Counterfactual)) for n in walk(self))


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    kind: str
    region: str
    measurement: int
    sign: str | None = None

    def __post_init__(self):
        if self.kind not in (CHOICE, OUTCOME):
            raise ValueError(f"bad atom kind {self.kind!r}")
        if (self.kind == OUTCOME) != (self.sign is not None):
            raise ValueError("outcome atoms carry a sign, choice atoms do not")
        if self.measurement < 1:
            raise ValueError("measurement index is 1-based")

    @property
    def name(self) -> str:
        return f"{self.region}{self.measurement}{self.sign or ''}"

    @property
    def is_choice(self) -> bool:
        return self.kind == CHOICE

    def choice(self) -> Atom:
        """The choice atom this atom presupposes."""
        return Atom(CHOICE, self.region, self.measurement)


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class MaterialCond(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Counterfactual(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class StrictCond(Formula):
    left: Formula
    right: Formula


BINARY = (And, Or, MaterialCond, Counterfactual, StrictCond)


def choice(region: str, measurement: int) -> Atom:
    return Atom(CHOICE, region, measurement)


def outcome(region: str, measurement: int, sign: str) -> Atom:
    return Atom(OUTCOME, region, measurement, sign)


def conj(*parts: Formula) -> Formula:
    """Right-associated conjunction of one or more formulas."""
    if not parts:
        raise ValueError("empty conjunction")
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = And(p, result)
    return result


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested conjunctions into a list of conjuncts, left to right."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from walk(f.arg)
    elif isinstance(f, BINARY):
        yield from walk(f.left)
        yield from walk(f.right)


def _atoms(f: Formula) -> Iterator[Atom]:
    for node in walk(f):
        if isinstance(node, Atom):
            yield node


def depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    if isinstance(f, Not):
        return 1 + depth(f.arg)
    return 1 + max(depth(f.left), depth(f.right))


# -- printing ---------------------------------------------------------------

# larger binds tighter
_PREC = {StrictCond: 1, Counterfactual: 2, MaterialCond: 3, Or: 4, And: 5}
_SYMBOL = {StrictCond: "=>", Counterfactual: "[]->", MaterialCond: "->", Or: "|", And: "&"}
_UNARY_PREC = 6


def _prec(f: Formula) -> int:
    if isinstance(f, (Atom, Not)):
        return _UNARY_PREC
    return _PREC[type(f)]


def to_text(f: Formula) -> str:
    """Canonical text with the fewest parentheses that still round-trip."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        inner = to_text(f.arg)
        return "~" + (inner if _prec(f.arg) == _UNARY_PREC else f"({inner})")
    op = type(f)
    p = _PREC[op]
    left, right = to_text(f.left), to_text(f.right)
    lp, rp = _prec(f.left), _prec(f.right)
    if op in (And, Or, MaterialCond):
        # right-associative chains
        if lp <= p:
            left = f"({left})"
        if rp < p:
            right = f"({right})"
    else:
        if lp <= p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
    return f"{left} {_SYMBOL[op]} {right}"


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<op>\[\]->|=>|->|~|&|\||\(|\))|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)(?P<sign>[+-](?!>))?)"
)
_ATOM_NAME = re.compile(r"^([A-Za-z_]+?)(\d+)$")


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str  # "op", "atom" or "end"
    value: str
    pos: int
    sign: str | None = None


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    while True:
        while i < len(text) and text[i].isspace():
            i += 1
        if i >= len(text):
            break
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise FormulaSyntaxError(f"unexpected character {text[i]!r}", text, i,
                                     ["atom", "~", "("])
        start = m.start("op") if m.group("op") else m.start("ident")
        if m.group("op"):
            toks.append(_Tok("op", m.group("op"), start))
        else:
            toks.append(_Tok("atom", m.group("ident"), start, m.group("sign")))
        i = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def _make_atom(tok: _Tok, setup: SetupLike | None) -> Atom:
    name = tok.value
    candidates: list[tuple[str, int]] = []
    if setup is not None:
        for region in setup.regions:
            rest = name[len(region):]
            if name.startswith(region) and rest.isdigit():
                candidates.append((region, int(rest)))
    else:
        m = _ATOM_NAME.match(name)
        if m:
            candidates.append((m.group(1), int(m.group(2))))
    if not candidates:
        raise UnknownAtom(f"{name!r} does not name a declared region/measurement")
    region, index = candidates[0]
    if index < 1:
        raise UnknownAtom(f"{name!r}: measurement numbers start at 1")
    if setup is not None:
        if index > setup.n_measurements(region):
            raise UnknownAtom(f"{name!r}: region {region} has {setup.n_measurements(region)} measurements")
        if tok.sign is not None and tok.sign not in setup.outcomes:
            raise UnknownAtom(f"{name}{tok.sign}: outcome {tok.sign!r} not declared")
    if tok.sign is None:
        return Atom(CHOICE, region, index)
    return Atom(OUTCOME, region, index, tok.sign)


class _Parser:
    def __init__(self, text: str, setup: SetupLike | None):
        self.text = text
        self.setup = setup
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.value == op:
            self.i += 1
            return True
        return False

    def fail(self, expected: Sequence[str]):
        tok = self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.value)
        raise FormulaSyntaxError(f"unexpected {what}", self.text, tok.pos, expected)

    def parse(self) -> Formula:
        f = self.strict()
        if self.tok.kind != "end":
            self.fail(["=>", "[]->", "->", "|", "&", "end of input"])
        return f

    def strict(self) -> Formula:
        left = self.cf()
        if self.accept("=>"):
            return StrictCond(left, self.cf())
        return left

    def cf(self) -> Formula:
        left = self.cond()
        if self.accept("[]->"):
            return Counterfactual(left, self.cond())
        return left

    def cond(self) -> Formula:
        left = self.disj()
        if self.accept("->"):
            return MaterialCond(left, self.cond())
        return left

    def disj(self) -> Formula:
        parts = [self.conj()]
        while self.accept("|"):
            parts.append(self.conj())
        result = parts[-1]
        for p in reversed(parts[:-1]):
            result = Or(p, result)
        return result

    def conj(self) -> Formula:
        parts = [self.unary()]
        while self.accept("&"):
            parts.append(self.unary())
        return conj(*parts)

    def unary(self) -> Formula:
        if self.accept("~"):
            return Not(self.unary())
        if self.accept("("):
            f = self.strict()
            if not self.accept(")"):
                self.fail([")", "=>", "[]->", "->", "|", "&"])
            return f
        if self.tok.kind == "atom":
            tok = self.tok
            self.i += 1
            return _make_atom(tok, self.setup)
        self.fail(["atom", "~", "("])


def parse(text: str, setup: SetupLike | None = None) -> Formula:
    """Parse formula text.  With a setup, atoms are checked against it."""
    return _Parser(text, setup).parse()


# -- proof-line validation ----------------------------------------------------

def validate_proof_line(f: Formula) -> list[str]:
    """Violations of the proof-line shape; an empty list means the line is fine."""
    problems: list[str] = []
    stricts = [n for n in walk(f) if isinstance(n, StrictCond)]
    if len(stricts) > 1:
        problems.append(f"{len(stricts)} strict conditionals; at most one is allowed")
    if stricts and not isinstance(f, StrictCond):
        problems.append("strict conditional is not at the top level")
    elif isinstance(f, StrictCond):
        for side in (f.left, f.right):
            if any(isinstance(n, StrictCond) for n in walk(side)):
                problems.append("nested strict conditional")
                break
    for n in walk(f):
        if isinstance(n, Counterfactual):
            if not (isinstance(n.left, Atom) and n.left.is_choice):
                problems.append(f"counterfactual antecedent {to_text(n.left)!r} is not a single choice atom")
    return problems


# -- random generation --------------------------------------------------------

def random_formula(rng: random.Random, atoms: Sequence[Atom], max_depth: int, *,
                   modal: bool = False, choices: Sequence[Atom] = ()) -> Formula:
    """Random rudimentary formula (or with counterfactuals when ``modal``).

    Counterfactual antecedents are drawn from ``choices``.
    """
    if max_depth <= 0 or rng.random() < 0.25:
        return rng.choice(atoms)
    ops: list[type] = [Not, And, Or, MaterialCond]
    if modal and choices:
        ops.append(Counterfactual)
    op = rng.choice(ops)
    sub = lambda: random_formula(rng, atoms, max_depth - 1, modal=modal, choices=choices)
    if op is Not:
        return Not(sub())
    if op is Counterfactual:
        return Counterfactual(rng.choice(choices), sub())
    return op(sub(), sub())
