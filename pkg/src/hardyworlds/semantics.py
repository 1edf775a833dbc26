"""Possible-worlds semantics over the physically possible worlds of a model.

Extensions are bitmasks over the enumerated logical worlds (see
:class:`~hardyworlds.experiment.WorldSet`); every extension is a subset of
the physical worlds.  A strict conditional is a statement about the whole
model, so inside an extension it is either every physical world or none.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable

from . import quantum
from .experiment import (
    HARDY_CAUSAL,
    HARDY_SETUP,
    CausalStructure,
    Setup,
    World,
    WorldSet,
    agrees_outside_cone,
    atom_truth,
    conflict_region,
    enumerate_logical_worlds,
    localized_outside,
)
from .formula import (
    And,
    Atom,
    Counterfactual,
    Formula,
    MaterialCond,
    Not,
    Or,
    StrictCond,
    choice,
    parse,
    random_formula,
    to_text,
    walk,
)
from .report import Verdict


class NotRudimentary(ValueError):
    pass


class SideConditionViolated(ValueError):
    """A lemma's condition B is not localized outside the forward cone of C."""


@dataclass
class Model:
    setup: Setup
    causal: CausalStructure
    table: quantum.JointTable
    worlds: list[World] = field(init=False)
    phys: WorldSet = field(init=False)
    # the state and bases behind ``table``, when the model came from one
    source: quantum.HardyModel | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.causal.regions) != tuple(self.setup.regions):
            raise ValueError("causal structure and setup disagree on regions")
        self.worlds = enumerate_logical_worlds(self.setup)
        self.index = {w: k for k, w in enumerate(self.worlds)}
        self.phys = quantum.physically_possible_worlds(self.setup, self.table, self.worlds)
        self._ext_cache: dict[Formula, WorldSet] = {}
        self._acc_cache: dict[tuple[int, Atom], WorldSet] = {}
        self._atom_cache: dict[Atom, WorldSet] = {}
        # caches for the independent set-form route
        self._truth_cache: dict[Formula, frozenset[int]] = {}
        self._vset_cache: dict[tuple[int, Atom], tuple[int, ...]] = {}

    @classmethod
    def hardy(cls, mode: str = "preset-optimal", **kwargs) -> Model:
        qm = quantum.build_hardy_model(mode, **kwargs)
        return cls(HARDY_SETUP, HARDY_CAUSAL, qm.table(), source=qm)

    @classmethod
    def from_quantum(cls, qm: quantum.HardyModel, causal: CausalStructure | None = None) -> Model:
        causal = causal or CausalStructure.all_spacelike(qm.setup.regions)
        return cls(qm.setup, causal, qm.table(), source=qm)

    @classmethod
    def from_table(cls, table: quantum.JointTable, causal: CausalStructure | None = None) -> Model:
        if causal is None:
            causal = CausalStructure.all_spacelike(table.setup.regions)
        return cls(table.setup, causal, table)

    # -- helpers -------------------------------------------------------------

    def world_index(self, w: World | int) -> int:
        return w if isinstance(w, int) else self.index[w]

    def world_set(self, worlds: Iterable[World]) -> WorldSet:
        return WorldSet.of((self.index[w] for w in worlds), len(self.worlds))

    def members(self, s: WorldSet) -> list[World]:
        return [self.worlds[k] for k in s]

    def describe(self, w: World | int) -> str:
        if isinstance(w, int):
            w = self.worlds[w]
        return self.setup.describe(w)

    def parse(self, text: str) -> Formula:
        return parse(text, self.setup)

    def choice_atoms(self) -> list[Atom]:
        return [choice(r, m) for r in self.setup.regions for m in range(1, self.setup.n_measurements(r) + 1)]

    def outcome_atoms(self, region: str | None = None) -> list[Atom]:
        regions = self.setup.regions if region is None else (region,)
        return [Atom("outcome", r, m, s) for r in regions
                for m in range(1, self.setup.n_measurements(r) + 1) for s in self.setup.outcomes]

    def atom_set(self, a: Atom) -> WorldSet:
        s = self._atom_cache.get(a)
        if s is None:
            s = WorldSet.of((k for k in self.phys if atom_truth(self.setup, self.worlds[k], a)), len(self.worlds))
            self._atom_cache[a] = s
        return s


def _require_phys(m: Model, w: World | int) -> int:
    k = m.world_index(w)
    if k not in m.phys:
        raise ValueError(f"{m.describe(k)} is not a physically possible world")
    return k


def truth_at(m: Model, w: World | int, f: Formula) -> bool:
    """Classical truth of a rudimentary formula at one world."""
    world = m.worlds[w] if isinstance(w, int) else w
    if isinstance(f, Atom):
        return atom_truth(m.setup, world, f)
    if isinstance(f, Not):
        return not truth_at(m, world, f.arg)
    if isinstance(f, And):
        return truth_at(m, world, f.left) and truth_at(m, world, f.right)
    if isinstance(f, Or):
        return truth_at(m, world, f.left) or truth_at(m, world, f.right)
    if isinstance(f, MaterialCond):
        return (not truth_at(m, world, f.left)) or truth_at(m, world, f.right)
    raise NotRudimentary(f"{to_text(f)!r} contains a strict conditional or counterfactual")


def accessible_worlds(m: Model, w: World | int, c: Atom) -> WorldSet:
    """Physical worlds where ``c`` holds that agree with ``w`` outside the cone of the conflict."""
    k = _require_phys(m, w)
    key = (k, c)
    acc = m._acc_cache.get(key)
    if acc is None:
        world = m.worlds[k]
        source = conflict_region(m.setup, world, c)
        acc = WorldSet.of(
            (v for v in m.phys
             if atom_truth(m.setup, m.worlds[v], c)
             and agrees_outside_cone(m.setup, m.worlds[v], world, source, m.causal)),
            len(m.worlds))
        m._acc_cache[key] = acc
    return acc


def _cf_antecedent(f: Counterfactual) -> Atom:
    if not (isinstance(f.left, Atom) and f.left.is_choice):
        raise ValueError(f"counterfactual antecedent {to_text(f.left)!r} must be a single choice atom")
    return f.left


def extension(m: Model, f: Formula) -> WorldSet:
    cached = m._ext_cache.get(f)
    if cached is not None:
        return cached
    if isinstance(f, Atom):
        result = m.atom_set(f)
    elif isinstance(f, Not):
        result = m.phys - extension(m, f.arg)
    elif isinstance(f, And):
        result = extension(m, f.left) & extension(m, f.right)
    elif isinstance(f, Or):
        result = extension(m, f.left) | extension(m, f.right)
    elif isinstance(f, MaterialCond):
        result = (m.phys - extension(m, f.left)) | extension(m, f.right)
    elif isinstance(f, Counterfactual):
        c = _cf_antecedent(f)
        d = extension(m, f.right)
        result = WorldSet.of((k for k in m.phys if accessible_worlds(m, k, c) <= d), len(m.worlds))
    elif isinstance(f, StrictCond):
        result = m.phys if _strict(m, f.left, f.right) else WorldSet.empty(len(m.worlds))
    else:
        raise TypeError(f"not a formula: {f!r}")
    m._ext_cache[f] = result
    return result


def _strict(m: Model, a: Formula, b: Formula) -> bool:
    ea, eb = extension(m, a), extension(m, b)
    subset = ea <= eb
    disjoint = (ea & (m.phys - eb)).is_empty()
    assert subset == disjoint, "subset and empty-intersection forms of => disagree"
    return subset


def holds_strict(m: Model, a: Formula, b: Formula) -> bool:
    """A => B: {A} is contained in {B}, cross-checked against {A} & {~B} being empty."""
    return _strict(m, a, b)


def holds(m: Model, f: Formula) -> bool:
    """True when ``f`` is true at every physically possible world."""
    return extension(m, f) == m.phys


def eval_counterfactual(m: Model, w: World | int, c: Atom, d: Formula) -> bool:
    """C []-> D at ``w``: D holds at every accessible world (vacuously true if none)."""
    acc = accessible_worlds(m, w, c)
    if d.is_rudimentary():
        return all(truth_at(m, v, d) for v in acc)
    return acc <= extension(m, d)


def check_eq_2_1(m: Model, a: Formula, b: Formula, c: Formula) -> bool:
    """[A => (B -> C)] and [(A & B) => C] have the same truth value."""
    for f in (a, b, c):
        if any(isinstance(n, StrictCond) for n in walk(f)):
            raise ValueError("(2.1) operands must not contain a strict conditional")
    lhs = holds_strict(m, a, MaterialCond(b, c))
    rhs = holds_strict(m, And(a, b), c)
    set_form = (extension(m, a) & extension(m, b) & (m.phys - extension(m, c))).is_empty()
    return lhs == rhs == set_form


# -- set-theoretic forms, computed directly from the world relation -------------------
#
# These recompute {W : {V : V = W outside V+(C/W)} & {V : C} <= S} without going
# through accessible_worlds or extension(), so the lemma checks below compare
# two independent routes.

def _v_set(m: Model, w: int, c: Atom) -> tuple[int, ...]:
    vs = m._vset_cache.get((w, c))
    if vs is None:
        world = m.worlds[w]
        source = None if atom_truth(m.setup, world, c) else c.region
        vs = tuple(v for v in m.phys
                   if agrees_outside_cone(m.setup, m.worlds[v], world, source, m.causal)
                   and atom_truth(m.setup, m.worlds[v], c))
        m._vset_cache[(w, c)] = vs
    return vs


def _truth_set(m: Model, f: Formula) -> frozenset[int]:
    ts = m._truth_cache.get(f)
    if ts is None:
        ts = frozenset(k for k in m.phys if truth_at(m, k, f))
        m._truth_cache[f] = ts
    return ts


def cf_set_form(m: Model, c: Atom, target: frozenset[int]) -> frozenset[int]:
    return frozenset(w for w in m.phys if all(v in target for v in _v_set(m, w, c)))


def _phys_set(m: Model) -> frozenset[int]:
    return frozenset(m.phys)


# -- LOC1 lemmas -------------------------------------------------------------------

def _check_side_condition(m: Model, b: Formula, c: Atom):
    if not localized_outside(b.regions(), c.region, m.causal):
        raise SideConditionViolated(
            f"{to_text(b)!r} is not localized outside the forward cone of {c.region}")


def loc1c_instance(m: Model, b: Formula, e: Formula, c: Atom) -> bool:
    """(B & E) => [C []-> (B & C)] with B outside V+(C), by formula semantics and by (A.10)."""
    _check_side_condition(m, b, c)
    by_formula = holds_strict(m, And(b, e), Counterfactual(c, And(b, c)))
    lhs = _truth_set(m, And(b, e))
    by_sets = lhs <= cf_set_form(m, c, _truth_set(m, And(b, c)))
    return by_formula and by_sets


def loc1c_line(m: Model, f: Formula) -> bool:
    """A given LOC1c-shaped line X => [C []-> Y], by (A.9) semantics and the (A.10) set form."""
    if not (isinstance(f, StrictCond) and isinstance(f.right, Counterfactual)):
        raise ValueError("not of the form X => [C []-> Y]")
    c = _cf_antecedent(f.right)
    by_formula = holds(m, f)
    by_sets = _truth_set(m, f.left) <= cf_set_form(m, c, _truth_set(m, f.right.right))
    if by_formula != by_sets:
        raise AssertionError("(A.9) and (A.10) disagree")
    return by_formula


def loc1d_instance(m: Model, a: Formula, b: Formula, c: Atom, d: Formula) -> bool:
    """(A.11) sides and the set forms (A.12), (A.13), (A.14) all agree."""
    _check_side_condition(m, b, c)
    lhs = holds_strict(m, And(a, b), Counterfactual(c, d))
    rhs = holds_strict(m, a, Counterfactual(c, MaterialCond(b, d)))
    sa, sb, sd = _truth_set(m, a), _truth_set(m, b), _truth_set(m, d)
    not_b = _phys_set(m) - sb
    a12 = (sa & sb) <= cf_set_form(m, c, sd)
    a13 = sa <= cf_set_form(m, c, sd | not_b)
    a14 = (sa & sb) <= cf_set_form(m, c, sd | not_b)
    return lhs == rhs == a12 == a13 == a14


def loc1e_instance(m: Model, a: Formula, b: Formula, c: Atom, d: Formula) -> bool:
    """LOC1e sides agree and match the (A.15) set form."""
    _check_side_condition(m, b, c)
    lhs = holds_strict(m, And(a, b), Counterfactual(c, And(b, d)))
    rhs = holds_strict(m, And(a, b), Counterfactual(c, d))
    sa, sb, sd = _truth_set(m, a), _truth_set(m, b), _truth_set(m, d)
    a15 = (sa & sb) <= cf_set_form(m, c, sd & sb)
    return lhs == rhs == a15


def loc1f_instance(m: Model, b: Formula, c: Atom, d: Formula) -> bool:
    """(A.17) entails (A.18), and the (A.16) formula agrees with the set forms."""
    _check_side_condition(m, b, c)
    lhs = holds_strict(m, b, MaterialCond(c, d))
    rhs = holds_strict(m, b, Counterfactual(c, d))
    sb, sd = _truth_set(m, b), _truth_set(m, d)
    a17 = sb <= (sd | (_phys_set(m) - _truth_set(m, c)))
    a18 = sb <= cf_set_form(m, c, sd)
    return lhs == a17 and rhs == a18 and ((not a17) or a18)


@dataclass(frozen=True)
class FormulaPool:
    """Formulas used to instantiate lemma schemas; ``local`` maps region -> formulas over it."""

    general: tuple[Formula, ...]
    local: dict

    @classmethod
    def default(cls, m: Model) -> FormulaPool:
        general: list[Formula] = []
        for r in m.setup.regions:
            general.extend(choice(r, k) for k in range(1, m.setup.n_measurements(r) + 1))
        general.extend(m.outcome_atoms())
        r0, r1 = m.setup.regions[0], m.setup.regions[-1]
        o0, o1 = m.outcome_atoms(r0), m.outcome_atoms(r1)
        general.extend([
            Not(o0[0]), And(o0[0], o1[1]), Or(o0[1], o1[0]), MaterialCond(o0[1], o1[0]),
            Not(MaterialCond(o0[1], And(choice(r1, 1), o1[1]))),
        ])
        local = {}
        for r in m.setup.regions:
            atoms = m.outcome_atoms(r)
            chs = [choice(r, k) for k in range(1, m.setup.n_measurements(r) + 1)]
            local[r] = tuple(chs + atoms + [Not(atoms[0]), Or(atoms[0], atoms[-1]), And(chs[0], Not(atoms[1]))])
        return cls(tuple(general), local)

    def outside(self, m: Model, c: Atom) -> list[Formula]:
        return [f for r, fs in self.local.items() if r not in m.causal.cone(c.region) for f in fs]


def verify_loc1_lemmas(m: Model, pool: FormulaPool | None = None, *, hardy_instances: bool = True,
                       rng: random.Random | None = None, loc1f_random: int = 200) -> list[Verdict]:
    """LOC1c-f over the pool (B always localized outside the cone of C)."""
    pool = pool or FormulaPool.default(m)
    rng = rng or random.Random(0)
    chs = m.choice_atoms()
    verdicts: list[Verdict] = []

    def sweep(name: str, checks: Iterable[tuple[str, bool]]):
        total = failed = 0
        first = ""
        for label, ok in checks:
            total += 1
            if not ok:
                failed += 1
                first = first or label
        detail = f"{total - failed}/{total} instances"
        if failed:
            detail += f"; first failure {first}"
        verdicts.append(Verdict.of(name, failed == 0 and total > 0, detail))

    if hardy_instances and m.setup == HARDY_SETUP:
        r1 = choice("R", 1)
        p = m.parse
        sweep("LOC1c.hardy", [("A.9", loc1c_line(m, p("L2 & R2 & L2+ => R1 []-> L2 & R1 & L2+")))])
        sweep("LOC1d.hardy", [("line10->11", loc1d_instance(m, p("L1 & R2"), p("L1-"), r1, p("R1 & R1-")))])
        sweep("LOC1e.hardy", [("line4->5", loc1e_instance(m, p("R2 & R2+"), p("L2"), r1, p("R1 & R1-")))])
        sweep("LOC1f.hardy", [("line12->13", loc1f_instance(m, p("L1"), r1, p("~(L1- -> R1 & R1-)")))])

    sweep("LOC1c", ((f"B={to_text(b)} E={to_text(e)} C={c.name}", loc1c_instance(m, b, e, c))
                    for c in chs for b in pool.outside(m, c) for e in pool.general))
    sweep("LOC1d", ((f"A={to_text(a)} B={to_text(b)} C={c.name} D={to_text(d)}", loc1d_instance(m, a, b, c, d))
                    for c in chs for b in pool.outside(m, c) for a in pool.general[::2] for d in pool.general[1::2]))
    sweep("LOC1e", ((f"A={to_text(a)} B={to_text(b)} C={c.name} D={to_text(d)}", loc1e_instance(m, a, b, c, d))
                    for c in chs for b in pool.outside(m, c) for a in pool.general[::2] for d in pool.general[1::2]))
    sweep("LOC1f", ((f"B={to_text(b)} C={c.name} D={to_text(d)}", loc1f_instance(m, b, c, d))
                    for c in chs for b in pool.outside(m, c) for d in pool.general))

    atoms = m.choice_atoms() + m.outcome_atoms()
    if m.setup == HARDY_SETUP:
        b, c = choice("L", 1), choice("R", 1)
        ds = [random_formula(rng, atoms, 3) for _ in range(loc1f_random)]
        sweep("LOC1f.random", ((f"D={to_text(d)}", loc1f_instance(m, b, c, d)) for d in ds))
    return verdicts


# -- set identities (A.1)-(A.8) and the exportation rule (2.1) --------------------------

def random_rudimentary(m: Model, rng: random.Random, max_depth: int = 3) -> Formula:
    return random_formula(rng, m.choice_atoms() + m.outcome_atoms(), max_depth)


def verify_appendix_identities(m: Model, rng: random.Random, count: int = 200) -> list[Verdict]:
    """Pairwise set identities over random rudimentary and modal formulas."""
    atoms = m.choice_atoms() + m.outcome_atoms()
    chs = m.choice_atoms()
    a1 = a3 = a4 = a7 = 0
    for _ in range(count):
        a = random_formula(rng, atoms, 3)
        b = random_formula(rng, atoms, 3)
        ea, eb = extension(m, a), extension(m, b)
        # (A.1) vs (A.2): holds_strict asserts internally; recompute here from plain sets
        a1 += (_truth_set(m, a) <= _truth_set(m, b)) == (not (_truth_set(m, a) & (_phys_set(m) - _truth_set(m, b))))
        # (A.3): per-world material conditional
        imp = MaterialCond(a, b)
        a3 += all(truth_at(m, k, imp) == ((not truth_at(m, k, a)) or truth_at(m, k, b)) for k in m.phys)
        # (A.4): extension of the conditional as a union
        a4 += extension(m, imp) == ((m.phys - ea) | eb)
        # (A.7) vs (A.8): per-world quantification against the set form
        c = rng.choice(chs)
        d = random_formula(rng, atoms, 3, modal=True, choices=chs)
        per_world = {k for k in m.phys if eval_counterfactual(m, k, c, d)}
        a7 += per_world == set(extension(m, Counterfactual(c, d))) == cf_set_form(m, c, frozenset(extension(m, d)))
    return [
        Verdict.of("A.1=A.2", a1 == count, f"{a1}/{count}"),
        Verdict.of("A.3", a3 == count, f"{a3}/{count}"),
        Verdict.of("A.4", a4 == count, f"{a4}/{count}"),
        Verdict.of("A.7=A.8", a7 == count, f"{a7}/{count}"),
    ]


def verify_eq_2_1(m: Model, rng: random.Random, count: int = 1000) -> Verdict:
    agree = sum(check_eq_2_1(m, random_rudimentary(m, rng), random_rudimentary(m, rng), random_rudimentary(m, rng))
                for _ in range(count))
    return Verdict.of("2.1", agree == count, f"{agree}/{count} random triples (A.5=A.6)")


def verify_vacuity(m: Model, rng: random.Random, count: int = 100) -> Verdict:
    """Statement (2.2) with A = ~B is true whatever C is."""
    ok = 0
    for _ in range(count):
        b = random_rudimentary(m, rng)
        c = random_rudimentary(m, rng)
        ok += holds_strict(m, Not(b), MaterialCond(b, c)) and check_eq_2_1(m, Not(b), b, c)
    return Verdict.of("2.2-vacuity", ok == count, f"{ok}/{count} random C")
