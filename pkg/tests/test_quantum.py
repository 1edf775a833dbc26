import math
import time

import numpy as np
import pytest

from hardyworlds import quantum as q
from hardyworlds.experiment import HARDY_SETUP, Setup
from oracles import maximize_paradox, oracle_paradox

W = HARDY_SETUP.world


@pytest.fixture(scope="module")
def preset():
    return q.preset_optimal()


def test_oracle_reproduces_optimum():
    best, _ = maximize_paradox()
    assert best == pytest.approx((5 * math.sqrt(5) - 11) / 2, abs=1e-6)
    # the preset angles realize the same value under the oracle
    a = q.OPTIMAL_ANGLE
    assert float(oracle_paradox([a, 0.0, a, 0.0])) == pytest.approx(q.OPTIMAL_PARADOX, abs=1e-12)
    assert math.sin(a) ** 2 == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)


def test_preset_paradox_probability(preset):
    assert preset.paradox_probability() == pytest.approx((5 * math.sqrt(5) - 11) / 2, abs=1e-4)
    assert preset.paradox_probability() == pytest.approx(0.0902, abs=1e-4)


def test_preset_joint_table_oracle(preset):
    t = preset.table()
    expected = {
        (0, 0): [0.1459, 0.6180, 0.0902, 0.1459],
        (0, 1): [0.1459, 0.6180, 0.2361, 0.0],
        (1, 0): [0.0, 0.6180, 0.2361, 0.1459],
        (1, 1): [0.3820, 0.2361, 0.0, 0.3820],
    }
    for (i, j), row in expected.items():
        assert t.probs[i, j].reshape(-1) == pytest.approx(row, abs=1e-4)


def test_solve_meets_constraints():
    start = time.perf_counter()
    model = q.build_hardy_model("solve", seed=0)
    elapsed = time.perf_counter() - start
    t = model.table()
    assert all(v.ok for v in q.verify_predictions(HARDY_SETUP, t))
    assert int(np.sum(t.probs <= t.null_tolerance)) == 3
    assert q.hardy_constraint_problems(HARDY_SETUP, t) == []
    assert elapsed < 5


def test_born_probability_basics(preset):
    assert q.born_probability(preset.state, q.identity()) == pytest.approx(1.0, abs=1e-12)
    v = np.array(preset.state.amplitudes)
    P = q.Projector(np.eye(4) - np.outer(v, v.conj()))
    assert q.born_probability(preset.state, P) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(q.DimensionError):
        q.born_probability(preset.state, q.identity(2))


def test_born_on_paradox_event(preset):
    m = preset.measurements
    joint = q.Projector(m.projector("L", 1, 1).matrix @ m.projector("R", 1, 0).matrix)
    assert q.born_probability(preset.state, joint) == pytest.approx(0.0902, abs=1e-4)


def test_reduce(preset):
    rho = preset.state.density()
    yes, no = q.reduce(rho, q.identity())
    assert np.allclose(yes, rho) and np.allclose(no, 0)
    yes, no = q.reduce(rho, q.Projector(np.zeros((4, 4))))
    assert np.allclose(yes, 0) and np.allclose(no, rho)
    P = preset.measurements.projector("R", 2, 0)
    yes, no = q.reduce(rho, P)
    p = q.born_probability(preset.state, P)
    assert np.trace(yes).real == pytest.approx(p, abs=1e-12)
    assert np.trace(no).real == pytest.approx(1 - p, abs=1e-12)


def test_projectors_valid(preset):
    m = preset.measurements
    for region in ("L", "R"):
        for k in (1, 2):
            plus, minus = m.projector(region, k, 0).matrix, m.projector(region, k, 1).matrix
            assert np.allclose(plus + minus, np.eye(4), atol=1e-12)
            assert np.allclose(plus @ minus, 0, atol=1e-12)
    with pytest.raises(ValueError):
        q.Projector(np.array([[1, 1], [0, 0]]))
    with pytest.raises(q.DimensionError):
        q.Projector(np.zeros((2, 3)))


def test_microcausality_and_no_signaling(preset):
    m = preset.measurements
    lefts, rights = m.all_projectors("L"), m.all_projectors("R")
    assert len(lefts) * len(rights) == 16
    for (_, P1), (_, P2) in [(a, b) for a in lefts for b in rights]:
        assert q.commutator_norm(P1, P2) <= 1e-12
        assert q.verify_no_signaling(preset.state, P1, P2) <= 1e-12
        assert q.verify_no_signaling(preset.state, P2, P1) <= 1e-12
    P1 = m.projector("L", 1, 0)
    assert q.verify_no_signaling(preset.state, P1, q.identity()) == 0.0
    assert q.commutator_norm(P1, P1) == 0.0


def test_same_region_projectors_do_not_commute(preset):
    m = preset.measurements
    P1, P2 = m.projector("R", 1, 0), m.projector("R", 2, 0)
    assert q.commutator_norm(P1, P2) > 0.01
    with pytest.raises(q.PreconditionViolated) as info:
        q.verify_no_signaling(preset.state, P1, P2)
    assert info.value.deviation > 1e-12


def test_physically_possible_worlds(preset):
    phys = q.physically_possible_worlds(HARDY_SETUP, preset.table())
    assert len(phys) == 13
    assert len(q.physically_possible_worlds(HARDY_SETUP, q.JointTable.uniform())) == 16
    probs = np.full((2, 2, 2, 2), 0.25)
    probs[0, 0] = [[1.0, 0.0], [0.0, 0.0]]
    table = q.JointTable(HARDY_SETUP, probs)
    phys = q.physically_possible_worlds(HARDY_SETUP, table)
    # worlds of the (L1, R1) row are indices 0, 1, 4, 5
    assert {0, 1, 4, 5} & set(phys) == {0}
    assert len(phys) == 13


def test_product_states_are_rejected():
    # For a product state the three zeros and the paradox entry cannot coexist:
    # (3.4) forces alpha1(-) > 0, then (3.3) gives beta2(-) = 0, (3.1) alpha2(-) = 0,
    # (3.2) beta1(+) = 0, contradicting (3.4).
    rng = np.random.default_rng(5)
    angles = {("L", 1): q.OPTIMAL_ANGLE, ("L", 2): 0.0, ("R", 1): q.OPTIMAL_ANGLE, ("R", 2): 0.0}
    for _ in range(20):
        a, b = rng.normal(size=2), rng.normal(size=2)
        psi = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        with pytest.raises(q.ConfigInvalid):
            q.build_hardy_model("from-config", amplitudes=psi, angles=angles)
    # basis-aligned product states fail at least one prediction as well
    for left, right in [(("L", 2, 0), ("R", 2, 0)), (("L", 1, 1), ("R", 2, 0)), (("L", 2, 0), ("R", 1, 1))]:
        a = q.local_basis(angles[left[:2]])[left[2]]
        b = q.local_basis(angles[right[:2]])[right[2]]
        model = q.model_from_parameters(np.kron(a, b), angles, validate=False)
        assert any(not v.ok for v in q.verify_predictions(HARDY_SETUP, model.table()))


def test_verify_predictions_failures(preset):
    t = preset.table()
    assert [v.status for v in q.verify_predictions(HARDY_SETUP, t)] == ["PASS"] * 5
    zeroed = t.with_entries({W("L1-", "R1+"): 0.0})
    assert {v.check: v.status for v in q.verify_predictions(HARDY_SETUP, zeroed)}["3.4"] == "FAIL"
    short = t.with_entries({W("L1+", "R1+"): t.p(W("L1+", "R1+")) - 0.1}, renormalize=False)
    assert {v.check: v.status for v in q.verify_predictions(HARDY_SETUP, short)}["3.5"] == "FAIL"


def test_table_rows_sum_to_one(preset):
    assert np.allclose(preset.table().row_sums(), 1.0, atol=1e-12)


def test_table_shape_checked():
    with pytest.raises(q.DimensionError):
        q.JointTable(HARDY_SETUP, np.zeros((2, 2, 2)))
    setup = Setup(("L", "R"), {"L": 1, "R": 2})
    assert q.JointTable.uniform(setup).probs.shape == (1, 2, 2, 2)


def test_serialization_round_trip(preset):
    amps = [float(repr(float(x.real))) for x in preset.state.amplitudes]
    angles = {k: float(repr(v)) for k, v in preset.measurements.angles.items()}
    again = q.build_hardy_model("from-config", amplitudes=amps, angles=angles)
    assert np.max(np.abs(again.table().probs - preset.table().probs)) <= 1e-12
    assert all(v.ok for v in q.verify_predictions(HARDY_SETUP, again.table()))


def test_state_norm_checked():
    with pytest.raises(ValueError):
        q.StateVector(np.array([1.0, 1.0, 0, 0]))
    assert q.StateVector.normalized([1, 1, 0, 0]).amplitudes[0] == pytest.approx(2 ** -0.5)
