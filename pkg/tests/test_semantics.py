import random

import numpy as np
import pytest

from hardyworlds import quantum as q
from hardyworlds.experiment import HARDY_SETUP
from hardyworlds.formula import Counterfactual, MaterialCond, Not, choice, random_formula
from hardyworlds.proofcheck import BUILTIN_SCRIPT
from hardyworlds.semantics import (
    Model,
    NotRudimentary,
    SideConditionViolated,
    accessible_worlds,
    check_eq_2_1,
    eval_counterfactual,
    extension,
    holds,
    holds_strict,
    loc1d_instance,
    loc1f_instance,
    truth_at,
    verify_appendix_identities,
    verify_eq_2_1,
    verify_loc1_lemmas,
    verify_vacuity,
)

W = HARDY_SETUP.world
R1, R2 = choice("R", 1), choice("R", 2)


@pytest.fixture(scope="module")
def m():
    return Model.hardy()


def names(m, s):
    return {m.describe(k) for k in s}


def test_physical_worlds(m):
    assert len(m.worlds) == 16 and len(m.phys) == 13
    excluded = {m.describe(k) for k in range(16) if k not in m.phys}
    assert excluded == {"(L2,-,R2,+)", "(L2,+,R1,+)", "(L1,-,R2,-)"}


def test_truth_at(m):
    p = m.parse
    assert truth_at(m, W("L2+", "R2+"), p("L2 & R2 & L2+"))
    assert all(truth_at(m, k, p("R1 -> R1")) for k in m.phys)
    assert truth_at(m, W("L1+", "R2-"), p("L1- -> R2+"))
    with pytest.raises(NotRudimentary):
        truth_at(m, W("L1+", "R2-"), p("R1 []-> R1-"))


def test_extension(m):
    p = m.parse
    assert len(extension(m, p("L2"))) == 6
    f = p("L1- | R2")
    assert extension(m, Not(f)) == m.phys - extension(m, f)
    l1r2 = extension(m, p("L1 & R2"))
    assert l1r2 <= extension(m, p("L1- -> R2+"))


def test_holds_strict(m):
    p = m.parse
    assert holds_strict(m, p("L2 & R2 & R2+"), p("L2 & R2 & L2+"))
    assert not holds_strict(m, p("L1 & R1 & L1-"), p("R1-"))
    rng = random.Random(0)
    atoms = m.choice_atoms() + m.outcome_atoms()
    for _ in range(50):
        a = random_formula(rng, atoms, 3)
        assert holds_strict(m, a, a)


def test_accessible_worlds(m):
    assert names(m, accessible_worlds(m, W("L2+", "R2+"), R1)) == {"(L2,+,R1,-)"}
    w = W("L1+", "R1+")
    assert names(m, accessible_worlds(m, w, R1)) == {"(L1,+,R1,+)"}
    assert names(m, accessible_worlds(m, W("L1-", "R2+"), R1)) == {"(L1,-,R1,+)", "(L1,-,R1,-)"}
    with pytest.raises(ValueError):
        accessible_worlds(m, W("L2-", "R2+"), R1)


def test_eval_counterfactual(m):
    p = m.parse
    w = W("L2+", "R2+")
    assert eval_counterfactual(m, w, R1, p("L2 & R1 & L2+"))
    assert eval_counterfactual(m, w, R1, p("R1 & R1-"))
    assert not eval_counterfactual(m, W("L1-", "R2+"), R1, p("R1-"))


def test_counterfactual_identity_and_monotonicity(m):
    rng = random.Random(2)
    atoms = m.choice_atoms() + m.outcome_atoms()
    for _ in range(200):
        d1 = random_formula(rng, atoms, 3)
        d2 = random_formula(rng, atoms, 3)
        c = rng.choice(m.choice_atoms())
        for k in m.phys:
            if truth_at(m, k, c):
                assert eval_counterfactual(m, k, c, d1) == truth_at(m, k, d1)
        if extension(m, d1) <= extension(m, d2):
            assert extension(m, Counterfactual(c, d1)) <= extension(m, Counterfactual(c, d2))


def test_eq_2_1(m):
    p = m.parse
    a = p("R2+")
    assert check_eq_2_1(m, Not(a), a, p("L1-"))
    assert holds_strict(m, Not(a), MaterialCond(a, p("L1-")))
    assert check_eq_2_1(m, a, a, a)
    assert verify_eq_2_1(m, random.Random(0), 1000).ok
    assert verify_vacuity(m, random.Random(0), 100).ok


def test_loc1_lemmas_all_pass(m):
    verdicts = verify_loc1_lemmas(m)
    assert verdicts and all(v.status == "PASS" for v in verdicts), [v for v in verdicts if not v.ok]
    checks = {v.check for v in verdicts}
    assert {"LOC1c", "LOC1d", "LOC1e", "LOC1f", "LOC1f.random"} <= checks


def test_side_condition(m):
    p = m.parse
    with pytest.raises(SideConditionViolated):
        loc1d_instance(m, p("L1"), p("R2+"), R1, p("R1-"))
    rng = random.Random(4)
    atoms = m.choice_atoms() + m.outcome_atoms()
    for _ in range(200):
        assert loc1f_instance(m, p("L1"), R1, random_formula(rng, atoms, 3))


def test_appendix_identities(m):
    assert all(v.ok for v in verify_appendix_identities(m, random.Random(0), 200))


def test_proof_lines_as_whole_formulas(m):
    truth = {line.number: holds(m, line.formula) for line in BUILTIN_SCRIPT.lines}
    assert [n for n, t in truth.items() if t] == [1, 2, 3, 4, 5, 8]
    # lines 10 and 11 are false as stand-alone formulas: from (L1,-,R2,+) the
    # accessible world (L1,-,R1,+) has R1+
    assert not truth[10] and not truth[11]


def test_lemmas_hold_in_perturbed_models():
    base = q.preset_optimal().table()
    rng = np.random.default_rng(3)
    for _ in range(5):
        model = Model.from_table(q.perturbed_table(base, rng))
        assert all(v.ok for v in verify_loc1_lemmas(model, loc1f_random=20))
