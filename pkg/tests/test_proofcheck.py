import random

import numpy as np
import pytest

from hardyworlds import proofcheck as pc
from hardyworlds import quantum as q
from hardyworlds.experiment import HARDY_SETUP, CapacityError, Setup
from hardyworlds.formula import parse
from hardyworlds.semantics import Model, holds_strict

W = HARDY_SETUP.world


@pytest.fixture(scope="module")
def m():
    return Model.hardy()


@pytest.fixture(scope="module")
def report(m):
    return pc.run_script(m)


def statuses(rep):
    return {lv.number: lv.status for lv in rep.lines}


def test_builtin_script_shape():
    assert len(pc.BUILTIN_SCRIPT.lines) == 14
    assert pc.BUILTIN_SCRIPT.line(1).text == "L2 & R2 & L2+ => R1 []-> L2 & R1 & L2+"
    assert pc.BUILTIN_SCRIPT.line(5).justification.with_eq2_1
    assert pc.BUILTIN_SCRIPT.line(4).justification.refs == (1, 2, 3)


def test_line_verdicts(report):
    st = statuses(report)
    for n in (1, 2, 3, 4, 5, 8, 10, 11):
        assert st[n] == "PASS", n
    assert st[6] == "FLAG"
    assert report.lines[5].detail == "assumption-injected"
    assert st[12] == "FAIL"
    assert report.status == pc.THEOREM_REPLAYED


def test_line12_witness(m, report):
    lv = report.lines[11]
    assert m.describe(lv.witness) in {"(L1,+,R1,+)", "(L1,-,R1,-)"}


def test_bad_index(m):
    with pytest.raises(pc.BadIndex):
        pc.check_line(m, pc.BUILTIN_SCRIPT, 15)
    with pytest.raises(pc.BadIndex):
        pc.check_line(m, pc.BUILTIN_SCRIPT, 0)


def test_wrong_prediction_cited(m):
    script = pc.BUILTIN_SCRIPT.replace(2, justification=pc.parse_justification("QM(3.3)"))
    assert pc.check_line(m, script, 2).status == "FAIL"
    assert pc.run_script(m, script).status == pc.NOT_REPLAYED


def test_uniform_table_fails_qm_lines():
    m = Model.from_table(q.JointTable.uniform())
    rep = pc.run_script(m)
    st = statuses(rep)
    assert st[2] == st[3] == st[8] == "FAIL"
    assert rep.status == pc.NOT_REPLAYED


def test_justification_parsing():
    assert pc.parse_justification("QM(3.1)") == pc.Justification("QM", prediction="3.1")
    assert pc.parse_justification("3.2").prediction == "3.2"
    assert pc.parse_justification("From(1, 2,3)").refs == (1, 2, 3)
    j = pc.parse_justification("LOC1e, Eq2_1")
    assert j.kind == "LOC1e" and j.with_eq2_1
    for bad in ("QM(9.9)", "Magic", "LOC1c, LOC1d, LOC2"):
        with pytest.raises(pc.ScriptError):
            pc.parse_justification(bad)


def test_script_invariants():
    with pytest.raises(pc.ScriptError):
        pc.ProofScript.from_pairs([("L1 => R1", "From(1)")])
    with pytest.raises(pc.ScriptError):
        pc.ProofScript.from_pairs([("L1 => (R1 => R2)", "LOGIC")])


def test_loc2_transform():
    line5, line6 = pc.BUILTIN_SCRIPT.line(5).formula, pc.BUILTIN_SCRIPT.line(6).formula
    assert pc.loc2_transform(line5) == line6
    with pytest.raises(pc.ShapeMismatch):
        pc.loc2_transform(line6)
    swapped = parse("R2 => ((L2 & L2+) -> (L1 []-> L1 & L1-))")
    assert pc.loc2_transform(swapped) == parse("R1 => ((L2 & L2+) -> (L1 []-> L1 & L1-))")
    with pytest.raises(pc.ShapeMismatch):
        pc.loc2_transform(parse("L2 & R2 => R1 []-> R1-"))


def test_loc2_mismatch_fails(m):
    script = pc.BUILTIN_SCRIPT.replace(6, formula=parse("L1 => ((R2 & R2-) -> (R1 []-> R1 & R1-))"))
    assert pc.check_line(m, script, 6).status == "FAIL"


def test_line5_constraint(m):
    assert pc.line5_constraint_forced(m)
    lifted = m.table.with_entries({W("L2+", "R1+"): 0.05})
    assert not pc.line5_constraint_forced(Model.from_table(lifted))
    none = m.table.with_entries({W("L2+", "R2+"): 0.0})
    assert pc.line5_constraint_forced(Model.from_table(none))


def test_line5_implied_by_first_two_zeros():
    base = q.preset_optimal().table()
    rng = np.random.default_rng(11)
    for _ in range(50):
        t = q.perturbed_table(base, rng)
        t = t.with_entries({W("L2-", "R2+"): 0.0, W("L2+", "R1+"): 0.0})
        model = Model.from_table(t)
        p = model.parse
        assert holds_strict(model, p("L2 & R2 & R2+"), p("L2 & R2 & L2+"))
        assert holds_strict(model, p("L2 & R1 & L2+"), p("L2 & R1 & R1-"))
        assert pc.line5_constraint_forced(model)


def _oracle_candidate_count(m):
    # brute force: R1-worlds sharing the L choice and outcome, per physical R2-world
    total = 1
    for k in m.phys:
        w = m.worlds[k]
        if w.choices[1] != 1:
            continue
        n = sum(1 for j in m.phys if m.worlds[j].choices == (w.choices[0], 0)
                and m.worlds[j].outcomes[0] == w.outcomes[0])
        total *= 2 ** n - 1
    return total


def test_candidate_count(m):
    cands = list(pc.enumerate_candidates(m))
    assert len(cands) == _oracle_candidate_count(m) == 81
    assert len(pc.candidate_space(m).domain) == 6
    assert all(not s.is_empty() for c in cands for _, s in c.successors)
    assert [c.index for c in cands] == list(range(81))
    with pytest.raises(CapacityError):
        list(pc.enumerate_candidates(m, max_candidates=80))


def test_small_candidate_spaces():
    setup = Setup(("L", "R"), {"L": 1, "R": 2})
    probs = np.zeros((1, 2, 2, 2))
    probs[0, 0] = [[0.5, 0.5], [0.0, 0.0]]
    probs[0, 1] = [[1.0, 0.0], [0.0, 0.0]]
    m = Model.from_table(q.JointTable(setup, probs))
    assert len(list(pc.enumerate_candidates(m))) == 3
    setup1 = Setup(("L", "R"), {"L": 1, "R": 1})
    m1 = Model.from_table(q.JointTable.uniform(setup1))
    cands = list(pc.enumerate_candidates(m1))
    assert len(cands) == 1 and cands[0].successors == ()


def test_unsat_certificates(m):
    rep = pc.verify_contradiction(m)
    cert = rep.unsat_11_14
    assert cert.status == "UNSAT"
    assert cert.searched == cert.space_size == 81
    assert m.describe(cert.witness_world) == "(L1,-,R2,+)"
    assert set(cert.conflicting) == {"C-11", "C-14"}
    assert sorted(v.candidate for v in cert.log) == list(range(81))
    assert all(v.world == cert.witness_world for v in cert.log)
    assert rep.unsat_loc2_14.status == "UNSAT"
    assert rep.unsat_loc2_14.complete


def test_certificate_soundness(m):
    cert = pc.search(m, ("C-11", "C-14"))
    by_index = {v.candidate: v for v in cert.log}
    rng = random.Random(0)
    for i in rng.choices(range(cert.space_size), k=100):
        assert pc.recheck(m, cert, i) == by_index[i]


def test_sat_candidate(m):
    res = pc.verify_contradiction(m).sat_loc2_11
    assert res.status == "SAT" and res.complete
    cand = res.satisfying
    r1minus = {k for k in m.phys if m.describe(k).endswith("R1,-)")}
    l1m_r2p = [k for k, _ in cand.successors if m.describe(k) == "(L1,-,R2,+)"]
    assert l1m_r2p
    for k in l1m_r2p:
        assert set(cand.of(k)) <= r1minus
    assert {m.describe(v) for v in cand.of(m.index[W("L1-", "R2+")])} == {"(L1,-,R1,-)"}


def test_search_capacity(m):
    with pytest.raises(pc.SearchIncomplete):
        pc.verify_contradiction(m, max_candidates=10)


def test_paradox_zeroed_model(m):
    zeroed = Model.from_table(m.table.with_entries({W("L1-", "R1+"): 0.0}))
    res = pc.search(zeroed, ("C-11", "C-14"))
    # C-14 cannot be met with a nonempty successor set anywhere in L1 & R2
    assert res.status == "UNSAT"
    assert res.conflicting == ("C-14", pc.NONEMPTY)
    assert "empty" in res.note
    assert pc.search(zeroed, ("C-LOC2", "C-11")).status == "SAT"


def test_appendix_line12(m):
    v = {x.check: x for x in pc.check_appendix_line12(m, pc.BUILTIN_SCRIPT)}
    assert v["A.21"].status == "PASS"
    assert v["A.20"].status == "PASS"
    assert v["A.19"].status == "FAIL"
    assert "(L1,+,R1,+)" in v["A.19"].detail or "(L1,-,R1,-)" in v["A.19"].detail
    assert v["A.19.crossref"].status == "FLAG"


def test_replay_is_deterministic(m):
    a = [v.machine_line() for v in pc.run_script(m).verdicts(m)]
    b = [v.machine_line() for v in pc.run_script(Model.hardy()).verdicts(m)]
    assert a == b
