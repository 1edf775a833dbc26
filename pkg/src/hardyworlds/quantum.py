"""Two-qubit quantum backend: Born rule, reduction, microcausality, Hardy models.

Each region holds one two-level system.  Measurement ``k`` in a region is a
real orthonormal basis at angle ``theta``::

    |+> = ( cos theta, sin theta)      |-> = (-sin theta, cos theta)

embedded as ``P (x) I`` for the first region and ``I (x) P`` for the second.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize

from .experiment import HARDY_SETUP, Setup, World, WorldSet, enumerate_logical_worlds
from .report import Verdict

log = logging.getLogger(__name__)

NULL_TOLERANCE = 1e-9
NUMERIC_TOLERANCE = 1e-12

# sin^2(theta) = (sqrt(5) - 1) / 2 for the first measurement on both sides, the
# second measurement left in the computational basis.  tests/test_quantum.py
# re-derives this optimum by brute-force search.
OPTIMAL_ANGLE = 0.9045568943023814
OPTIMAL_PARADOX = (5 * math.sqrt(5) - 11) / 2


class DimensionError(ValueError):
    pass


class PreconditionViolated(ValueError):
    """Operators that the no-signaling identity needs to commute do not."""

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


class SolveFailure(RuntimeError):
    pass


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    tolerance: float = NUMERIC_TOLERANCE

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > self.tolerance:
            raise ValueError(f"state norm {float(norm):.15g} is not 1 (normalize the amplitudes)")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> StateVector:
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector")
        return cls(amps / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray
    tolerance: float = NUMERIC_TOLERANCE

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"projector must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > self.tolerance:
            raise ValueError("projector is not Hermitian")
        if np.max(np.abs(m @ m - m)) > self.tolerance:
            raise ValueError("projector is not idempotent")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> Projector:
        return Projector(np.eye(self.dim) - self.matrix)


def identity(dim: int = 4) -> Projector:
    return Projector(np.eye(dim))


def local_basis(theta: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c, s]), np.array([-s, c])


def embed(local: np.ndarray, position: int) -> np.ndarray:
    """Tensor a 2x2 operator into slot ``position`` (0 or 1) of the two-qubit space."""
    eye = np.eye(2)
    return np.kron(local, eye) if position == 0 else np.kron(eye, local)


@dataclass(frozen=True)
class MeasurementModel:
    """Basis angle per (region, measurement) and the embedded outcome projectors."""

    setup: Setup
    angles: Mapping[tuple[str, int], float]
    projectors: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.setup.regions) != 2 or len(self.setup.outcomes) != 2:
            raise DimensionError("the quantum backend handles two regions with two outcomes each")
        projs = {}
        for pos, region in enumerate(self.setup.regions):
            for m in range(1, self.setup.n_measurements(region) + 1):
                theta = self.angles[(region, m)]
                plus, minus = local_basis(theta)
                projs[(region, m)] = (
                    Projector(embed(np.outer(plus, plus), pos)),
                    Projector(embed(np.outer(minus, minus), pos)),
                )
        object.__setattr__(self, "angles", dict(self.angles))
        object.__setattr__(self, "projectors", projs)

    def projector(self, region: str, measurement: int, outcome: int) -> Projector:
        return self.projectors[(region, measurement)][outcome]

    def local_projector(self, region: str, measurement: int, outcome: int) -> np.ndarray:
        plus, minus = local_basis(self.angles[(region, measurement)])
        v = (plus, minus)[outcome]
        return np.outer(v, v)

    def all_projectors(self, region: str) -> list[tuple[str, Projector]]:
        out = []
        for m in range(1, self.setup.n_measurements(region) + 1):
            for o, sign in enumerate(self.setup.outcomes):
                out.append((f"{region}{m}{sign}", self.projector(region, m, o)))
        return out


def _as_density(S) -> np.ndarray:
    if isinstance(S, StateVector):
        return S.density()
    S = np.asarray(S, dtype=complex)
    if S.ndim == 1:
        return np.outer(S, S.conj())
    return S


def _check_dims(*mats: np.ndarray):
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def born_probability(S, P: Projector) -> float:
    """Trace(P S) / Trace(S)."""
    rho = _as_density(S)
    _check_dims(rho, P.matrix)
    return float(np.real(np.trace(P.matrix @ rho) / np.trace(rho)))


def reduce(S, P: Projector) -> tuple[np.ndarray, np.ndarray]:
    """Split a density operator into the ``P`` and ``1 - P`` branches."""
    rho = _as_density(S)
    _check_dims(rho, P.matrix)
    q = np.eye(P.dim) - P.matrix
    return P.matrix @ rho @ P.matrix, q @ rho @ q


def commutator_norm(Q1: Projector, Q2: Projector) -> float:
    _check_dims(Q1.matrix, Q2.matrix)
    return float(np.max(np.abs(Q1.matrix @ Q2.matrix - Q2.matrix @ Q1.matrix)))


def verify_no_signaling(S, P1: Projector, P2: Projector, *, check_precondition: bool = True,
                        tolerance: float = NUMERIC_TOLERANCE) -> float:
    """|Trace P1 [P2 S P2 + (1-P2) S (1-P2)] - Trace P1 S|.

    Raises PreconditionViolated (carrying the deviation) when P1 and P2 fail
    to commute, unless ``check_precondition`` is off.
    """
    rho = _as_density(S)
    _check_dims(rho, P1.matrix, P2.matrix)
    yes, no = reduce(rho, P2)
    deviation = float(abs(np.trace(P1.matrix @ (yes + no)) - np.trace(P1.matrix @ rho)))
    if check_precondition and commutator_norm(P1, P2) > tolerance:
        raise PreconditionViolated(
            f"projectors do not commute; deviation {deviation:.3e}", deviation)
    return deviation


# -- joint probabilities ---------------------------------------------------------

@dataclass(frozen=True)
class JointTable:
    """p[c_0, .., c_{n-1}, o_0, .., o_{n-1}]: outcome probabilities per choice tuple."""

    setup: Setup
    probs: np.ndarray
    null_tolerance: float = NULL_TOLERANCE

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        shape = tuple(self.setup.n_measurements(r) for r in self.setup.regions) + \
            (len(self.setup.outcomes),) * len(self.setup.regions)
        if p.shape != shape:
            raise DimensionError(f"table shape {p.shape} does not match setup {shape}")
        if np.any(p < -NUMERIC_TOLERANCE):
            raise ValueError("negative probability in joint table")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def p(self, w: World) -> float:
        return float(self.probs[w.choices + w.outcomes])

    def row_sums(self) -> np.ndarray:
        n = len(self.setup.regions)
        return self.probs.sum(axis=tuple(range(n, 2 * n)))

    def conditional(self, choices: tuple[int, ...], outcomes: tuple[int, ...]) -> float:
        row = self.probs[choices]
        total = row.sum()
        return float(row[outcomes] / total) if total > 0 else 0.0

    def with_entries(self, updates: Mapping[World, float], renormalize: bool = True) -> JointTable:
        """Copy with some entries replaced; affected rows are rescaled to sum to 1."""
        p = np.array(self.probs)
        rows = set()
        for w, value in updates.items():
            p[w.choices + w.outcomes] = value
            rows.add(w.choices)
        if renormalize:
            for c in rows:
                p[c] = p[c] / p[c].sum()
        return JointTable(self.setup, p, self.null_tolerance)

    @classmethod
    def uniform(cls, setup: Setup = HARDY_SETUP, null_tolerance: float = NULL_TOLERANCE) -> JointTable:
        shape = tuple(setup.n_measurements(r) for r in setup.regions) + \
            (len(setup.outcomes),) * len(setup.regions)
        n_out = len(setup.outcomes) ** len(setup.regions)
        return cls(setup, np.full(shape, 1.0 / n_out), null_tolerance)


def joint_table(S, M: MeasurementModel, null_tolerance: float = NULL_TOLERANCE) -> JointTable:
    setup = M.setup
    rho = _as_density(S)
    (a, b) = setup.regions
    shape = (setup.n_measurements(a), setup.n_measurements(b), 2, 2)
    p = np.zeros(shape)
    for i, j, s, t in itertools.product(range(shape[0]), range(shape[1]), range(2), range(2)):
        joint = M.projector(a, i + 1, s).matrix @ M.projector(b, j + 1, t).matrix
        p[i, j, s, t] = float(np.real(np.trace(joint @ rho) / np.trace(rho)))
    # round-off can leave -1e-17 on a null entry
    p[p < 0] = 0.0
    return JointTable(setup, p, null_tolerance)


def physically_possible_worlds(setup: Setup, table: JointTable, worlds: list[World] | None = None) -> WorldSet:
    if worlds is None:
        worlds = enumerate_logical_worlds(setup)
    return WorldSet.of((k for k, w in enumerate(worlds) if table.p(w) > table.null_tolerance), len(worlds))


# -- the four Hardy predictions ---------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    tag: str
    text: str
    event: tuple[str, str]  # outcome atoms, left region first
    kind: str  # "zero" or "positive"


HARDY_PREDICTIONS = (
    Prediction("3.1", "L2 & R2 & R2+ => L2 & R2 & L2+", ("L2-", "R2+"), "zero"),
    Prediction("3.2", "L2 & R1 & L2+ => L2 & R1 & R1-", ("L2+", "R1+"), "zero"),
    Prediction("3.3", "L1 & R2 & L1- => L1 & R2 & R2+", ("L1-", "R2-"), "zero"),
    Prediction("3.4", "~(L1 & R1 & L1- => R1-)", ("L1-", "R1+"), "positive"),
)
PREDICTIONS_BY_TAG = {p.tag: p for p in HARDY_PREDICTIONS}


def prediction_probability(setup: Setup, table: JointTable, pred: Prediction) -> float:
    """Conditional probability of the prediction's event given its choices."""
    w = setup.world(*pred.event)
    return table.conditional(w.choices, w.outcomes)


def verify_predictions(setup: Setup, table: JointTable,
                       tolerance: float = NUMERIC_TOLERANCE) -> list[Verdict]:
    """Verdicts for 3.1-3.4 plus detector completeness (row sums), in that order."""
    verdicts = []
    for pred in HARDY_PREDICTIONS:
        p = prediction_probability(setup, table, pred)
        if pred.kind == "zero":
            ok = p <= table.null_tolerance
            detail = f"p({pred.event[0]},{pred.event[1]})={p:.3e} must be null (tolerance {table.null_tolerance:g})"
        else:
            ok = p > table.null_tolerance
            detail = f"p({pred.event[0]},{pred.event[1]})={p:.6f} must exceed {table.null_tolerance:g}"
        verdicts.append(Verdict.of(pred.tag, ok, detail))
    sums = table.row_sums()
    dev = float(np.max(np.abs(sums - 1.0)))
    verdicts.append(Verdict.of("3.5", dev <= tolerance, f"max |row sum - 1| = {dev:.3e}"))
    return verdicts


# -- Hardy model construction ----------------------------------------------------

@dataclass(frozen=True)
class HardyModel:
    state: StateVector
    measurements: MeasurementModel
    null_tolerance: float = NULL_TOLERANCE

    @property
    def setup(self) -> Setup:
        return self.measurements.setup

    def table(self) -> JointTable:
        return joint_table(self.state, self.measurements, self.null_tolerance)

    def paradox_probability(self) -> float:
        return prediction_probability(self.setup, self.table(), PREDICTIONS_BY_TAG["3.4"])


def hardy_constraint_problems(setup: Setup, table: JointTable) -> list[str]:
    """Reasons the table fails to be a Hardy table; empty when it is one."""
    problems = [f"prediction {v.check} fails: {v.detail}" for v in verify_predictions(setup, table) if not v.ok]
    zero_worlds = {setup.world(*p.event) for p in HARDY_PREDICTIONS if p.kind == "zero"}
    for w in enumerate_logical_worlds(setup):
        if w not in zero_worlds and table.p(w) <= table.null_tolerance:
            problems.append(f"joint {setup.describe(w)} has null probability")
    return problems


def _angles(l1: float, l2: float, r1: float, r2: float) -> dict[tuple[str, int], float]:
    return {("L", 1): l1, ("L", 2): l2, ("R", 1): r1, ("R", 2): r2}


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    # first non-negligible component made real positive; deterministic under round-off
    k = int(np.flatnonzero(np.abs(v) > 1e-6)[0])
    return v * (abs(v[k]) / v[k])


def hardy_state_for(angles: Mapping[tuple[str, int], float]) -> StateVector:
    """Unit vector orthogonal to the three null joints (3.1)-(3.3) for these bases."""
    rows = []
    for pred in HARDY_PREDICTIONS:
        if pred.kind != "zero":
            continue
        vecs = []
        for atom in pred.event:
            region, m, sign = atom[0], int(atom[1]), atom[2]
            plus, minus = local_basis(angles[(region, m)])
            vecs.append(plus if sign == "+" else minus)
        rows.append(np.kron(vecs[0], vecs[1]))
    _, _, vh = np.linalg.svd(np.array(rows))
    return StateVector.normalized(_canonical_phase(vh[-1].conj().astype(complex)))


def preset_optimal(null_tolerance: float = NULL_TOLERANCE) -> HardyModel:
    angles = _angles(OPTIMAL_ANGLE, 0.0, OPTIMAL_ANGLE, 0.0)
    return HardyModel(hardy_state_for(angles), MeasurementModel(HARDY_SETUP, angles), null_tolerance)


def _paradox_for(x: np.ndarray) -> float:
    angles = _angles(*x)
    psi = hardy_state_for(angles).amplitudes
    l1m = local_basis(angles[("L", 1)])[1]
    r1p = local_basis(angles[("R", 1)])[0]
    return float(abs(np.kron(l1m, r1p) @ psi) ** 2)


def solve_hardy(seed: int = 0, starts: int = 8, null_tolerance: float = NULL_TOLERANCE) -> HardyModel:
    """Search basis angles maximizing the paradox probability under the three null constraints."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(starts):
        x0 = rng.uniform(0, math.pi, size=4)
        res = optimize.minimize(lambda x: -_paradox_for(x), x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        angles = _angles(*res.x)
        model = HardyModel(hardy_state_for(angles), MeasurementModel(HARDY_SETUP, angles), null_tolerance)
        if hardy_constraint_problems(HARDY_SETUP, model.table()):
            continue
        if best is None or -res.fun > best[0]:
            best = (-res.fun, model)
    if best is None:
        raise SolveFailure(f"no start out of {starts} met the Hardy constraints")
    log.debug("solve: paradox probability %.12f", best[0])
    return best[1]


def model_from_parameters(amplitudes, angles: Mapping[tuple[str, int], float],
                          null_tolerance: float = NULL_TOLERANCE, *, validate: bool = True) -> HardyModel:
    """Explicit state and basis angles.

    With ``validate`` (the default) raises ConfigInvalid unless they form a
    Hardy model; without it any normalized state is accepted, so that
    non-Hardy models can be fed through the checks.
    """
    try:
        state = StateVector(np.asarray(amplitudes, dtype=complex))
        measurements = MeasurementModel(HARDY_SETUP, angles)
    except (ValueError, KeyError) as e:
        raise ConfigInvalid(str(e)) from None
    model = HardyModel(state, measurements, null_tolerance)
    if not validate:
        return model
    problems = hardy_constraint_problems(HARDY_SETUP, model.table())
    if problems:
        raise ConfigInvalid("; ".join(problems))
    return model


def build_hardy_model(mode: str = "preset-optimal", *, seed: int = 0, amplitudes=None, angles=None,
                      null_tolerance: float = NULL_TOLERANCE, validate: bool = True) -> HardyModel:
    if mode == "preset-optimal":
        return preset_optimal(null_tolerance)
    if mode == "solve":
        return solve_hardy(seed, null_tolerance=null_tolerance)
    if mode == "from-config":
        if amplitudes is None or angles is None:
            raise ConfigInvalid("from-config needs amplitudes and basis angles")
        return model_from_parameters(amplitudes, angles, null_tolerance, validate=validate)
    raise ValueError(f"unknown mode {mode!r}")


def perturbed_table(base: JointTable, rng, lift_probability: float = 0.5) -> JointTable:
    """Random multiplicative noise on every entry; each Hardy zero is lifted with
    ``lift_probability``.  Rows are renormalized; no-signaling is not preserved."""
    p = np.array(base.probs) * rng.uniform(0.5, 1.5, size=base.probs.shape)
    for pred in HARDY_PREDICTIONS:
        if pred.kind == "zero" and rng.random() < lift_probability:
            w = base.setup.world(*pred.event)
            p[w.choices + w.outcomes] = rng.uniform(0.01, 0.2)
    n = len(base.setup.regions)
    p = p / p.sum(axis=tuple(range(n, 2 * n)), keepdims=True)
    return JointTable(base.setup, p, base.null_tolerance)
