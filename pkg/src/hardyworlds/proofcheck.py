"""Replay of the 14-line nonlocality proof and the accessibility constraint search.

Each line carries a justification.  Lines justified by a quantum prediction,
a LOC1 lemma or the exportation rule (2.1) are checked semantically in the model; LOC2 cannot
be checked semantically and is reported as an injected assumption (FLAG).

The final contradiction is mechanized as a finite search: a candidate picks,
for every physical world where R2 is performed, a nonempty set of R1-worlds
it could counterfactually lead to (free choice).  Constraints read off lines
6/7, 11 and 14 restrict those sets.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from . import quantum
from .experiment import CapacityError, World, WorldSet, localized_outside
from .formula import (
    Atom,
    Counterfactual,
    Formula,
    MaterialCond,
    StrictCond,
    choice,
    conj,
    conjuncts,
    parse,
    to_text,
    validate_proof_line,
)
from .report import FAIL, FLAG, PASS, SAT, UNSAT, Verdict
from .semantics import (
    Model,
    SideConditionViolated,
    accessible_worlds,
    check_eq_2_1,
    extension,
    holds,
    loc1c_line,
    loc1d_instance,
    loc1e_instance,
    loc1f_instance,
    truth_at,
)

DEFAULT_MAX_CANDIDATES = 1_000_000

KINDS = ("LOC1c", "LOC1d", "LOC1e", "LOC1f", "QM", "From", "Eq2_1", "LOGIC", "LOC2")


class BadIndex(IndexError):
    pass


class ShapeMismatch(ValueError):
    pass


class ScriptError(ValueError):
    pass


class SearchIncomplete(CapacityError):
    pass


@dataclass(frozen=True)
class Justification:
    kind: str
    refs: tuple[int, ...] = ()
    prediction: str | None = None
    with_eq2_1: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScriptError(f"unknown justification {self.kind!r}")
        if (self.kind == "QM") != (self.prediction is not None):
            raise ScriptError("QM justifications (and only those) cite a prediction")
        if self.prediction is not None and self.prediction not in quantum.PREDICTIONS_BY_TAG:
            raise ScriptError(f"unknown prediction {self.prediction!r}")

    @property
    def tag(self) -> str:
        if self.kind == "QM":
            base = f"QM({self.prediction})"
        elif self.kind == "From":
            base = "From(" + ",".join(map(str, self.refs)) + ")"
        else:
            base = self.kind
        return base + (",Eq2_1" if self.with_eq2_1 else "")


_TAG = re.compile(r"^(?:QM\((?P<qm>[\d.]+)\)|(?P<bare>\d\.\d)|From\((?P<refs>[\d,\s]+)\)|(?P<kind>\w+))$")


def parse_justification(text: str) -> Justification:
    """Parse tags such as ``LOC1c``, ``QM(3.1)``, ``3.1``, ``From(1,2,3)``, ``LOC1e,Eq2_1``."""
    parts = [p.strip() for p in re.split(r",(?![^(]*\))", text) if p.strip()]
    with_eq = False
    if len(parts) == 2 and parts[1] in ("Eq2_1", "2.1", "(2.1)"):
        with_eq = True
        parts = parts[:1]
    if len(parts) != 1:
        raise ScriptError(f"cannot parse justification {text!r}")
    m = _TAG.match(parts[0])
    if not m:
        raise ScriptError(f"cannot parse justification {text!r}")
    if m.group("qm") or m.group("bare"):
        return Justification("QM", prediction=m.group("qm") or m.group("bare"), with_eq2_1=with_eq)
    if m.group("refs"):
        refs = tuple(int(x) for x in m.group("refs").replace(" ", "").split(",") if x)
        return Justification("From", refs=refs, with_eq2_1=with_eq)
    kind = m.group("kind")
    if kind in ("Eq2_1",):
        return Justification("Eq2_1")
    return Justification(kind, with_eq2_1=with_eq)


@dataclass(frozen=True)
class ProofLine:
    number: int
    formula: Formula
    justification: Justification

    @property
    def text(self) -> str:
        return to_text(self.formula)


@dataclass(frozen=True)
class ProofScript:
    lines: tuple[ProofLine, ...]

    def __post_init__(self):
        for k, line in enumerate(self.lines, start=1):
            if line.number != k:
                raise ScriptError(f"line {k} is numbered {line.number}")
            problems = validate_proof_line(line.formula)
            if problems:
                raise ScriptError(f"line {k}: " + "; ".join(problems))
            for r in line.justification.refs:
                if not 1 <= r < k:
                    raise ScriptError(f"line {k} cites line {r}, which is not earlier")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, str]], setup=None) -> ProofScript:
        lines = []
        for k, (text, tag) in enumerate(pairs, start=1):
            lines.append(ProofLine(k, parse(text, setup), parse_justification(tag)))
        return cls(tuple(lines))

    def line(self, number: int) -> ProofLine:
        if not 1 <= number <= len(self.lines):
            raise BadIndex(f"no line {number}; the script has {len(self.lines)} lines")
        return self.lines[number - 1]

    def replace(self, number: int, *, formula: Formula | None = None,
                justification: Justification | None = None) -> ProofScript:
        old = self.line(number)
        new = ProofLine(number, formula or old.formula, justification or old.justification)
        return ProofScript(self.lines[:number - 1] + (new,) + self.lines[number:])


BUILTIN_PAIRS = (
    ("(L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+))", "LOC1c"),
    ("(L2 & R2 & R2+) => (L2 & R2 & L2+)", "QM(3.1)"),
    ("(L2 & R1 & L2+) => (L2 & R1 & R1-)", "QM(3.2)"),
    ("(L2 & R2 & R2+) => (R1 []-> (L2 & R1 & R1-))", "From(1,2,3)"),
    ("L2 => ((R2 & R2+) -> (R1 []-> R1 & R1-))", "LOC1e,Eq2_1"),
    ("L1 => ((R2 & R2+) -> (R1 []-> R1 & R1-))", "LOC2"),
    ("(L1 & R2) => (R2+ -> (R1 []-> R1 & R1-))", "LOGIC"),
    ("(L1 & R2) => (L1- -> R2+)", "QM(3.3)"),
    ("(L1 & R2) => (L1- -> (R1 []-> R1 & R1-))", "From(7,8)"),
    ("(L1 & R2 & L1-) => (R1 []-> R1 & R1-)", "Eq2_1"),
    ("(L1 & R2) => (R1 []-> (L1- -> R1 & R1-))", "LOC1d"),
    ("L1 => (R1 -> ~(L1- -> R1 & R1-))", "QM(3.4)"),
    ("L1 => (R1 []-> ~(L1- -> R1 & R1-))", "LOC1f"),
    ("(L1 & R2) => (R1 []-> ~(L1- -> (R1 & R1-)))", "LOGIC"),
)

BUILTIN_SCRIPT = ProofScript.from_pairs(BUILTIN_PAIRS)

REQUIRED_PASS = (1, 2, 3, 4, 5, 8, 10, 11)
REQUIRED_FLAG = (6,)
CONTESTED = (12,)


@dataclass(frozen=True)
class LineVerdict:
    number: int
    status: str
    detail: str = ""
    witness: World | None = None

    def verdict(self, m: Model) -> Verdict:
        detail = self.detail
        if self.witness is not None:
            detail += f" witness={m.describe(self.witness)}"
        return Verdict(f"proof.line{self.number}", self.status, detail.strip())


# -- helpers -------------------------------------------------------------------

def _same_conjuncts(a: Formula, b: Formula) -> bool:
    return set(conjuncts(a)) == set(conjuncts(b))


def _violation(m: Model, f: Formula) -> World | None:
    """First physical world falsifying the strict conditional ``f`` (None if it holds)."""
    if isinstance(f, StrictCond):
        bad = extension(m, f.left) - extension(m, f.right)
    else:
        bad = m.phys - extension(m, f)
    for k in bad:
        return m.worlds[k]
    return None


def uncurry(f: Formula) -> tuple[Formula, tuple[Formula, Formula, Formula]] | None:
    """A => (B -> C)  becomes  (A & B) => C; returns the new formula and (A, B, C)."""
    if isinstance(f, StrictCond) and isinstance(f.right, MaterialCond):
        a, b, c = f.left, f.right.left, f.right.right
        return StrictCond(conj(*conjuncts(a), *conjuncts(b)), c), (a, b, c)
    return None


def _premise(script: ProofScript, line: ProofLine) -> ProofLine:
    if line.number == 1:
        raise ScriptError(f"line 1 justified by {line.justification.kind} has no premise")
    return script.line(line.number - 1)


# -- per-justification checks ---------------------------------------------------------

def _check_qm(m: Model, line: ProofLine) -> LineVerdict:
    pred = quantum.PREDICTIONS_BY_TAG[line.justification.prediction]
    pred_f = parse(pred.text, m.setup)
    f = line.formula
    if not holds(m, pred_f):
        witness = _violation(m, pred_f) if pred.kind == "zero" else None
        return LineVerdict(line.number, FAIL, f"prediction ({pred.tag}) fails in this model", witness)
    if pred.kind == "zero":
        # model-independent: every logical world violating the line violates the prediction
        if not (isinstance(f, StrictCond) and f.left.is_rudimentary() and f.right.is_rudimentary()):
            return LineVerdict(line.number, FAIL, "a QM line must be a rudimentary strict conditional")
        line_bad = {w for w in m.worlds if truth_at(m, w, f.left) and not truth_at(m, w, f.right)}
        pred_bad = {w for w in m.worlds if truth_at(m, w, pred_f.left) and not truth_at(m, w, pred_f.right)}
        if not line_bad <= pred_bad:
            w = min(line_bad - pred_bad, key=m.index.__getitem__)
            return LineVerdict(line.number, FAIL, f"does not follow from ({pred.tag})", w)
    witness = _violation(m, f)
    if witness is not None:
        return LineVerdict(line.number, FAIL, f"false under plain extension semantics ({pred.tag} holds)", witness)
    return LineVerdict(line.number, PASS, f"({pred.tag}) holds and entails the line")


def _check_loc1c(m: Model, line: ProofLine) -> LineVerdict:
    f = line.formula
    if not (isinstance(f, StrictCond) and isinstance(f.right, Counterfactual)):
        return LineVerdict(line.number, FAIL, "LOC1c needs the shape X => [C []-> Y]")
    c = f.right.left
    antecedent = set(conjuncts(f.left))
    for part in conjuncts(f.right.right):
        if part == c:
            continue
        if part not in antecedent or not localized_outside(part.regions(), c.region, m.causal):
            return LineVerdict(line.number, FAIL,
                               f"{to_text(part)} is neither {c.name} nor an antecedent fact outside V+({c.region})")
    if not loc1c_line(m, f):
        return LineVerdict(line.number, FAIL, "LOC1c instance false in model", _violation(m, f))
    return LineVerdict(line.number, PASS, "LOC1c instance; (A.9) and (A.10) agree")


def _eq2_1_normalize(m: Model, f: Formula) -> tuple[Formula, str | None]:
    """Uncurry ``f`` once via (2.1), checking the two forms agree in the model."""
    u = uncurry(f)
    if u is None:
        return f, "line is not of the form A => (B -> C)"
    g, (a, b, c) = u
    if not check_eq_2_1(m, a, b, c):
        return g, "(2.1) forms disagree"
    return g, None


def _check_loc1e(m: Model, premise: ProofLine, line: ProofLine) -> LineVerdict:
    f = line.formula
    if line.justification.with_eq2_1:
        f, err = _eq2_1_normalize(m, f)
        if err:
            return LineVerdict(line.number, FAIL, err)
    p = premise.formula
    shapes = all(isinstance(x, StrictCond) and isinstance(x.right, Counterfactual) for x in (p, f))
    if not shapes or p.right.left != f.right.left or not _same_conjuncts(p.left, f.left):
        return LineVerdict(line.number, FAIL, f"not a LOC1e rewrite of line {premise.number}")
    c = p.right.left
    full = conjuncts(p.right.right)
    kept = set(conjuncts(f.right.right))
    b_parts = [x for x in full if x not in kept]
    antecedent = conjuncts(p.left)
    if not b_parts or not kept <= set(full) or not set(b_parts) <= set(antecedent):
        return LineVerdict(line.number, FAIL, f"not a LOC1e rewrite of line {premise.number}")
    a_parts = [x for x in antecedent if x not in b_parts]
    if not a_parts:
        return LineVerdict(line.number, FAIL, "LOC1e needs a nonempty remaining antecedent")
    b, a = conj(*b_parts), conj(*a_parts)
    try:
        ok = loc1e_instance(m, a, b, c, f.right.right)
    except SideConditionViolated as e:
        return LineVerdict(line.number, FAIL, str(e))
    if not ok:
        return LineVerdict(line.number, FAIL, "LOC1e instance fails in model")
    note = " via (2.1)" if line.justification.with_eq2_1 else ""
    return LineVerdict(line.number, PASS, f"LOC1e with B={to_text(b)} from line {premise.number}{note}")


def _check_eq2_1(m: Model, premise: ProofLine, line: ProofLine) -> LineVerdict:
    for src, dst in ((premise.formula, line.formula), (line.formula, premise.formula)):
        u = uncurry(src)
        if u is None:
            continue
        g, (a, b, c) = u
        if isinstance(dst, StrictCond) and _same_conjuncts(g.left, dst.left) and g.right == dst.right:
            if check_eq_2_1(m, a, b, c):
                return LineVerdict(line.number, PASS, f"(2.1) rewrite of line {premise.number}")
            return LineVerdict(line.number, FAIL, "(2.1) forms disagree in model")
    return LineVerdict(line.number, FAIL, f"not a (2.1) rewrite of line {premise.number}")


def _split_loc1d(x: Formula):
    """[A => (C []-> (B -> D))] -> (A, C, B, D) or None."""
    if (isinstance(x, StrictCond) and isinstance(x.right, Counterfactual)
            and isinstance(x.right.right, MaterialCond)):
        return x.left, x.right.left, x.right.right.left, x.right.right.right
    return None


def _check_loc1d(m: Model, premise: ProofLine, line: ProofLine) -> LineVerdict:
    for curried, flat in ((line.formula, premise.formula), (premise.formula, line.formula)):
        parts = _split_loc1d(curried)
        if parts is None or not (isinstance(flat, StrictCond) and isinstance(flat.right, Counterfactual)):
            continue
        a, c, b, d = parts
        if flat.right.left != c or flat.right.right != d:
            continue
        if set(conjuncts(flat.left)) != set(conjuncts(a)) | set(conjuncts(b)):
            continue
        try:
            ok = loc1d_instance(m, a, b, c, d)
        except SideConditionViolated as e:
            return LineVerdict(line.number, FAIL, str(e))
        if not ok:
            return LineVerdict(line.number, FAIL, "LOC1d instance fails in model")
        return LineVerdict(line.number, PASS, f"LOC1d with B={to_text(b)} from line {premise.number}")
    return LineVerdict(line.number, FAIL, f"not a LOC1d rewrite of line {premise.number}")


def _check_loc1f(m: Model, premise: ProofLine, line: ProofLine) -> LineVerdict:
    p, f = premise.formula, line.formula
    shape = (isinstance(p, StrictCond) and isinstance(p.right, MaterialCond)
             and isinstance(f, StrictCond) and isinstance(f.right, Counterfactual)
             and p.left == f.left and p.right.left == f.right.left and p.right.right == f.right.right)
    if not shape:
        return LineVerdict(line.number, FAIL, f"not a LOC1f step from line {premise.number}")
    b, c, d = f.left, f.right.left, f.right.right
    try:
        ok = loc1f_instance(m, b, c, d)
    except SideConditionViolated as e:
        return LineVerdict(line.number, FAIL, str(e))
    if not ok:
        return LineVerdict(line.number, FAIL, "(A.17) holds but (A.18) fails", _violation(m, f))
    note = "" if holds(m, p) else f"; vacuous, line {premise.number} is false in model"
    return LineVerdict(line.number, PASS, f"LOC1f: (A.17) entails (A.18){note}")


def _check_entailment(m: Model, premises: Sequence[ProofLine], line: ProofLine) -> LineVerdict:
    failing = [p.number for p in premises if not holds(m, p.formula)]
    if failing:
        return LineVerdict(line.number, PASS,
                           "vacuous: premise line(s) " + ",".join(map(str, failing)) + " false in model")
    witness = _violation(m, line.formula)
    if witness is not None:
        return LineVerdict(line.number, FAIL, "premises hold but the line does not", witness)
    refs = ",".join(str(p.number) for p in premises)
    return LineVerdict(line.number, PASS, f"entailed by line(s) {refs}")


def _check_loc2(m: Model, premise: ProofLine, line: ProofLine) -> LineVerdict:
    try:
        expected = loc2_transform(premise.formula)
    except ShapeMismatch as e:
        return LineVerdict(line.number, FAIL, f"LOC2 premise: {e}")
    if expected != line.formula:
        return LineVerdict(line.number, FAIL, f"line is not the LOC2 image of line {premise.number}")
    return LineVerdict(line.number, FLAG, "assumption-injected")


def check_line(m: Model, script: ProofScript, idx: int) -> LineVerdict:
    line = script.line(idx)
    j = line.justification
    if j.kind == "QM":
        return _check_qm(m, line)
    if j.kind == "LOC1c":
        return _check_loc1c(m, line)
    if j.kind == "From":
        return _check_entailment(m, [script.line(r) for r in j.refs], line)
    premise = _premise(script, line)
    if j.kind == "LOGIC":
        return _check_entailment(m, [premise], line)
    if j.kind == "LOC1e":
        return _check_loc1e(m, premise, line)
    if j.kind == "Eq2_1":
        return _check_eq2_1(m, premise, line)
    if j.kind == "LOC1d":
        return _check_loc1d(m, premise, line)
    if j.kind == "LOC1f":
        return _check_loc1f(m, premise, line)
    return _check_loc2(m, premise, line)


# -- LOC2 --------------------------------------------------------------------------

def loc2_transform(f: Formula, from_measurement: int = 2, to_measurement: int = 1) -> Formula:
    """Replace the far-side choice antecedent of a line-5-shaped formula.

    ``X2 => [Y -> (C []-> D)]`` becomes ``X1 => [Y -> (C []-> D)]`` where X is
    a region other than C's.
    """
    if not (isinstance(f, StrictCond) and isinstance(f.left, Atom) and f.left.is_choice
            and isinstance(f.right, MaterialCond) and isinstance(f.right.right, Counterfactual)):
        raise ShapeMismatch("expected X => [Y -> (C []-> D)] with X a choice atom")
    far = f.left
    if far.measurement != from_measurement:
        raise ShapeMismatch(f"antecedent {far.name} is not measurement {from_measurement}")
    if f.right.right.left.region == far.region:
        raise ShapeMismatch("antecedent choice and counterfactual choice share a region")
    return StrictCond(choice(far.region, to_measurement), f.right)


def line5_constraint_forced(m: Model) -> bool:
    """Every L2 & R2 & R2+ world can only counterfactually reach R1 & R1- worlds."""
    start = extension(m, m.parse("L2 & R2 & R2+"))
    target = extension(m, m.parse("R1 & R1-"))
    r1 = choice("R", 1)
    return all(accessible_worlds(m, w, r1) <= target for w in start)


# -- accessibility candidates -----------------------------------------------------------

@dataclass(frozen=True)
class AccessibilityCandidate:
    index: int
    successors: tuple[tuple[int, WorldSet], ...]  # (R2-world index, nonempty successor set)

    def of(self, w: int) -> WorldSet:
        for k, s in self.successors:
            if k == w:
                return s
        raise KeyError(w)


@dataclass(frozen=True)
class CandidateSpace:
    domain: tuple[int, ...]  # R2-worlds
    options: tuple[tuple[WorldSet, ...], ...]  # nonempty subsets of each accessible set

    @property
    def size(self) -> int:
        n = 1
        for opts in self.options:
            n *= len(opts)
        return n

    def candidate(self, index: int) -> AccessibilityCandidate:
        """Decode a candidate index (mixed radix, last world fastest)."""
        if not 0 <= index < self.size:
            raise IndexError(index)
        picks = []
        rest = index
        for opts in reversed(self.options):
            rest, r = divmod(rest, len(opts))
            picks.append(opts[r])
        return AccessibilityCandidate(index, tuple(zip(self.domain, reversed(picks))))


def _subsets(s: WorldSet) -> tuple[WorldSet, ...]:
    members = list(s)
    out = []
    for mask in range(1, 1 << len(members)):
        out.append(WorldSet.of((members[i] for i in range(len(members)) if mask >> i & 1), s.size))
    return tuple(out)


def candidate_space(m: Model, switch_to: Atom | None = None, switch_from: Atom | None = None) -> CandidateSpace:
    switch_to = switch_to or choice("R", 1)
    switch_from = switch_from or choice("R", 2)
    domain = tuple(k for k in extension(m, switch_from))
    options = tuple(_subsets(accessible_worlds(m, k, switch_to)) for k in domain)
    return CandidateSpace(domain, options)


def enumerate_candidates(m: Model, max_candidates: int = DEFAULT_MAX_CANDIDATES) -> Iterator[AccessibilityCandidate]:
    space = candidate_space(m)
    if space.size > max_candidates:
        raise CapacityError(f"{space.size} candidates exceed the bound {max_candidates}")
    for i in range(space.size):
        yield space.candidate(i)


# -- constraints and search -----------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """For worlds in ``domain``: every R1-successor must satisfy ``allowed``."""

    id: str
    domain: str
    allowed: str
    source: str


CONSTRAINTS = {
    "C-LOC2": Constraint("C-LOC2", "R2 & R2+", "R1 & R1-", "lines 6-7 (LOC2)"),
    "C-11": Constraint("C-11", "L1 & R2", "L1- -> R1 & R1-", "line 11 / (A.22)"),
    "C-14": Constraint("C-14", "L1 & R2", "~(L1- -> R1 & R1-)", "line 14 / (A.23)"),
}
NONEMPTY = "nonempty"


@dataclass(frozen=True)
class Violation:
    candidate: int
    world: int
    constraint: str
    successor: int


@dataclass
class SearchResult:
    constraints: tuple[str, ...]
    status: str  # SAT or UNSAT
    searched: int
    space_size: int
    satisfying: AccessibilityCandidate | None = None
    witness_world: int | None = None
    conflicting: tuple[str, str] | None = None
    log: list[Violation] = field(default_factory=list)
    note: str = ""

    @property
    def complete(self) -> bool:
        return self.searched == self.space_size


UnsatCertificate = SearchResult


class _Compiled:
    def __init__(self, m: Model, ids: Sequence[str]):
        self.ids = tuple(ids)
        self.items = []
        for cid in ids:
            c = CONSTRAINTS[cid]
            self.items.append((cid, extension(m, m.parse(c.domain)), extension(m, m.parse(c.allowed))))

    def violation(self, cand: AccessibilityCandidate, first: int | None = None) -> Violation | None:
        order = list(cand.successors)
        if first is not None:
            order.sort(key=lambda ws: ws[0] != first)
        for w, succ in order:
            for cid, dom, allowed in self.items:
                if w in dom:
                    bad = succ - allowed
                    if not bad.is_empty():
                        return Violation(cand.index, w, cid, next(iter(bad)))
        return None

    def allowed_at(self, w: int, ids: Sequence[str], acc: WorldSet) -> WorldSet:
        s = acc
        for cid, dom, allowed in self.items:
            if cid in ids and w in dom:
                s = s & allowed
        return s


def search(m: Model, ids: Sequence[str], max_candidates: int = DEFAULT_MAX_CANDIDATES) -> SearchResult:
    """Exhaustively test every accessibility candidate against the constraints ``ids``."""
    space = candidate_space(m)
    if space.size > max_candidates:
        raise SearchIncomplete(f"{space.size} candidates exceed the bound {max_candidates}")
    comp = _Compiled(m, ids)

    # locate the world where the constraints clash; per-world sets decide it directly
    witness, conflicting, note = None, None, ""
    r1 = choice("R", 1)
    for w in space.domain:
        acc = accessible_worlds(m, w, r1)
        if not comp.allowed_at(w, ids, acc).is_empty():
            continue
        singles = [cid for cid in ids if comp.allowed_at(w, [cid], acc).is_empty()]
        if singles:
            if witness is None:
                witness, conflicting = w, (singles[0], NONEMPTY)
                note = f"{singles[0]} alone forces an empty successor set at {m.describe(w)}"
            continue
        pair = next(p for p in itertools.combinations(ids, 2) if comp.allowed_at(w, p, acc).is_empty())
        witness, conflicting, note = w, pair, ""
        break

    result = SearchResult(tuple(ids), SAT, 0, space.size, witness_world=witness, conflicting=conflicting, note=note)
    for i in range(space.size):
        cand = space.candidate(i)
        result.searched += 1
        v = comp.violation(cand, first=witness)
        if v is None:
            if result.satisfying is None:
                result.satisfying = cand
        else:
            result.log.append(v)
    if result.satisfying is None:
        result.status = UNSAT
    else:
        result.witness_world = result.conflicting = None
        result.note = ""
    return result


def recheck(m: Model, result: SearchResult, candidate_index: int) -> Violation | None:
    """Recompute the violation of one candidate from scratch."""
    space = candidate_space(m)
    return _Compiled(m, result.constraints).violation(space.candidate(candidate_index), first=result.witness_world)


@dataclass
class ContradictionReport:
    predictions_ok: bool
    unsat_11_14: SearchResult
    unsat_loc2_14: SearchResult
    sat_loc2_11: SearchResult

    def verdicts(self, m: Model) -> list[Verdict]:
        out = []
        for check, res in (("search.C-11+C-14", self.unsat_11_14),
                           ("search.C-LOC2+C-14", self.unsat_loc2_14),
                           ("search.C-LOC2+C-11", self.sat_loc2_11)):
            out.append(Verdict(check, res.status, describe_result(m, res)))
        return out


def describe_result(m: Model, res: SearchResult) -> str:
    parts = [f"searched={res.searched}/{res.space_size}"]
    if res.status == UNSAT:
        if res.witness_world is not None:
            parts.append(f"witness={m.describe(res.witness_world)}")
        if res.conflicting:
            parts.append("conflict=" + "+".join(res.conflicting))
        parts.append(f"violations={len(res.log)}")
        if res.note:
            parts.append("note=" + res.note.replace(" ", "_"))
    elif res.satisfying is not None:
        mapping = ";".join(
            f"{m.describe(w)}->{{{','.join(m.describe(v) for v in s)}}}" for w, s in res.satisfying.successors)
        parts.append(f"candidate={res.satisfying.index}")
        parts.append(f"map={mapping}")
    return " ".join(parts)


def verify_contradiction(m: Model, max_candidates: int = DEFAULT_MAX_CANDIDATES) -> ContradictionReport:
    preds_ok = all(v.ok for v in quantum.verify_predictions(m.setup, m.table))
    return ContradictionReport(
        preds_ok,
        search(m, ("C-11", "C-14"), max_candidates),
        search(m, ("C-LOC2", "C-14"), max_candidates),
        search(m, ("C-LOC2", "C-11"), max_candidates),
    )


# -- set readings of line 12 ---------------------------------------------------------

def check_appendix_line12(m: Model, script: ProofScript | None = None) -> list[Verdict]:
    ext = lambda text: extension(m, m.parse(text))
    base = ext("L1") & ext("R1")
    a21 = base & ext("L1-") & (m.phys - ext("R1-"))
    a20 = base & (m.phys - ext("R1-")) & ext("L1-")
    a19 = base & (ext("R1-") | (m.phys - ext("L1-")))
    out = [
        Verdict.of("A.21", not a21.is_empty(), f"|L1 & R1 & L1- & ~R1-|={len(a21)} (equivalent to 3.4)"),
        Verdict.of("A.20", not a20.is_empty(), f"|L1 & R1 & ~R1- & L1-|={len(a20)}"),
    ]
    if a19.is_empty():
        out.append(Verdict("A.19", PASS, "L1 & R1 & (R1- | ~L1-) is empty"))
    else:
        first = m.describe(next(iter(a19)))
        out.append(Verdict("A.19", FAIL, f"L1 & R1 & (R1- | ~L1-) has {len(a19)} worlds witness={first}"))
    if script is not None and len(script.lines) >= 12:
        lv = check_line(m, script, 12)
        out.append(Verdict("A.19.crossref", FLAG, f"line12-plain={lv.status}; A.19 and line 12 are (2.1)-equivalent"))
    return out


# -- whole-script replay ----------------------------------------------------------------

THEOREM_REPLAYED = "THEOREM-REPLAYED"
NOT_REPLAYED = "NOT-REPLAYED"


@dataclass
class ScriptReport:
    lines: list[LineVerdict]
    appendix: list[Verdict]
    contradiction: ContradictionReport
    status: str

    def verdicts(self, m: Model) -> list[Verdict]:
        out = [lv.verdict(m) for lv in self.lines]
        out.extend(self.appendix)
        out.extend(self.contradiction.verdicts(m))
        return out


def run_script(m: Model, script: ProofScript = BUILTIN_SCRIPT,
               max_candidates: int = DEFAULT_MAX_CANDIDATES) -> ScriptReport:
    lines = [check_line(m, script, k) for k in range(1, len(script.lines) + 1)]
    appendix = check_appendix_line12(m, script)
    contradiction = verify_contradiction(m, max_candidates)
    by_number = {lv.number: lv for lv in lines}
    replayed = (
        all(n in by_number and by_number[n].status == PASS for n in REQUIRED_PASS)
        and all(n in by_number and by_number[n].status == FLAG for n in REQUIRED_FLAG)
        and contradiction.unsat_11_14.status == UNSAT
    )
    return ScriptReport(lines, appendix, contradiction, THEOREM_REPLAYED if replayed else NOT_REPLAYED)
