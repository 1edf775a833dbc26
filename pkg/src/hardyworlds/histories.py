"""Consistent-histories replay of the Hardy argument.

The branch tree is ordered in time: the L choice and outcome first, then the
R choice, then the R outcome.  Choices are classical branch labels weighted
by a :class:`ChoicePolicy`; outcomes carry Born weights from the joint table.

Leaf positivity is decided on the table entry p(i,j,s,t), not on the policy
weighted leaf weight, so that verdicts do not depend on the policy.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .experiment import World
from .formula import Atom, Formula, parse
from .quantum import DimensionError
from .semantics import Model, truth_at

CONTRADICTION_REPRODUCED = "CONTRADICTION-REPRODUCED"
NOT_REPRODUCED = "NOT-REPRODUCED"


class EmptyStart(ValueError):
    """No positive-weight leaf satisfies the start predicate."""


@dataclass(frozen=True)
class ChoicePolicy:
    """Probability of each measurement choice, per region."""

    weights: Mapping[str, tuple[float, ...]]

    def __post_init__(self):
        w = {r: tuple(float(x) for x in ps) for r, ps in self.weights.items()}
        for r, ps in w.items():
            if any(p < 0 for p in ps) or abs(sum(ps) - 1.0) > 1e-12:
                raise ValueError(f"choice probabilities for {r} must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, setup) -> ChoicePolicy:
        return cls({r: (1.0 / setup.n_measurements(r),) * setup.n_measurements(r) for r in setup.regions})

    @classmethod
    def random(cls, setup, rng: random.Random) -> ChoicePolicy:
        """Random policy with full support."""
        weights = {}
        for r in setup.regions:
            raw = [rng.uniform(0.05, 1.0) for _ in range(setup.n_measurements(r))]
            total = sum(raw)
            ps = [x / total for x in raw]
            ps[-1] = 1.0 - sum(ps[:-1])
            weights[r] = tuple(ps)
        return cls(weights)

    def p(self, region: str, measurement: int) -> float:
        return self.weights[region][measurement - 1]


@dataclass(frozen=True)
class Leaf:
    labels: tuple[str, ...]  # e.g. ("L1+", "R2", "R2-")
    world: World
    weight: float
    prob: float  # joint table entry for this branch's choices


@dataclass
class BranchTree:
    model: Model
    policy: ChoicePolicy
    levels: list[dict[tuple[str, ...], float]]
    leaves: list[Leaf]

    def positive(self, leaf: Leaf) -> bool:
        return leaf.prob > self.model.table.null_tolerance

    def select(self, predicate: Formula | str) -> list[Leaf]:
        """Positive leaves whose world satisfies a rudimentary formula."""
        f = parse(predicate, self.model.setup) if isinstance(predicate, str) else predicate
        return [lf for lf in self.leaves if self.positive(lf) and truth_at(self.model, lf.world, f)]

    def total_weight(self) -> float:
        return sum(lf.weight for lf in self.leaves)

    def to_text(self) -> str:
        lines = []
        for key in _tree_order(self.levels):
            lines.append("  " * (len(key) - 1) + f"{key[-1]}  {self.levels[len(key) - 1][key]:.6f}")
        return "\n".join(lines)

    def leaf_table(self) -> list[tuple[str, float]]:
        return [("/".join(lf.labels), lf.weight) for lf in self.leaves]


def _tree_order(levels):
    def walk(prefix, depth):
        for key in levels[depth]:
            if key[:-1] == prefix:
                yield key
                if depth + 1 < len(levels):
                    yield from walk(key, depth + 1)
    return list(walk((), 0))


def build_family(m: Model, policy: ChoicePolicy | None = None) -> BranchTree:
    """Branch tree: 4 nodes (L choice and outcome), 8 (R choice), 16 leaves (R outcome)."""
    setup = m.setup
    if len(setup.regions) != 2:
        raise ValueError("the branch tree is defined for two regions")
    policy = policy or ChoicePolicy.uniform(setup)
    a, b = setup.regions
    na, nb = setup.n_measurements(a), setup.n_measurements(b)
    outs = setup.outcomes
    probs = m.table.probs
    level1: dict[tuple[str, ...], float] = {}
    level2: dict[tuple[str, ...], float] = {}
    level3: dict[tuple[str, ...], float] = {}
    leaves = []
    for i, s in itertools.product(range(na), range(len(outs))):
        k1 = (f"{a}{i + 1}{outs[s]}",)
        pa = policy.p(a, i + 1)
        level1[k1] = pa * sum(policy.p(b, j + 1) * float(probs[i, j, s].sum()) for j in range(nb))
        for j in range(nb):
            pb = policy.p(b, j + 1)
            k2 = k1 + (f"{b}{j + 1}",)
            level2[k2] = pa * pb * float(probs[i, j, s].sum())
            for t in range(len(outs)):
                k3 = k2 + (f"{b}{j + 1}{outs[t]}",)
                p = float(probs[i, j, s, t])
                level3[k3] = pa * pb * p
                leaves.append(Leaf(k3, World((i, j), (s, t)), pa * pb * p, p))
    return BranchTree(m, policy, [level1, level2, level3], leaves)


# -- path tracing ---------------------------------------------------------------------

def trace_pivot_path(tree: BranchTree, start: Formula | str, pivot: str, alternative: str) -> list[Leaf]:
    """Leaves reached by backing up from each start leaf to just before the
    ``pivot`` region's choice and descending the ``alternative`` branch."""
    setup = tree.model.setup
    alt = parse(alternative, setup)
    if not (isinstance(alt, Atom) and alt.is_choice and alt.region == pivot):
        raise ValueError(f"{alternative!r} is not a choice in region {pivot}")
    starts = tree.select(start)
    if not starts:
        raise EmptyStart(f"no positive-weight leaf satisfies {start}")
    k = setup.region_index(pivot)
    reached = []
    for lf in starts:
        for cand in tree.leaves:
            if cand in reached or not tree.positive(cand):
                continue
            same_prefix = (cand.world.choices[:k] == lf.world.choices[:k]
                           and cand.world.outcomes[:k] == lf.world.outcomes[:k])
            if same_prefix and cand.world.choices[k] == alt.measurement - 1:
                reached.append(cand)
    return sorted(reached, key=tree.leaves.index)


@dataclass
class Line5Result:
    path_forced: bool  # every reachable R1 leaf is R1-
    start_forced: bool  # L2 & R2 & R2+ leaves all have L2+
    start: list[Leaf]
    reached: list[Leaf]
    vacuous: bool = False

    def __bool__(self):
        return self.path_forced


def verify_histories_line5(tree: BranchTree) -> Line5Result:
    start_text = "L2 & R2 & R2+"
    try:
        reached = trace_pivot_path(tree, start_text, "R", "R1")
    except EmptyStart:
        return Line5Result(True, True, [], [], vacuous=True)
    setup = tree.model.setup
    r1m = parse("R1-", setup)
    l2p = parse("L2+", setup)
    start = tree.select(start_text)
    return Line5Result(
        path_forced=all(truth_at(tree.model, lf.world, r1m) for lf in reached),
        start_forced=all(truth_at(tree.model, lf.world, l2p) for lf in start),
        start=start,
        reached=reached,
    )


@dataclass
class Report54:
    verdict: str
    start_nonempty: bool
    start_forced_r2plus: bool
    r1plus_leaves: list[Leaf] = field(default_factory=list)
    r1plus_weight: float = 0.0
    r1plus_conditional: float = 0.0

    def summary(self) -> str:
        return (f"start-nonempty={self.start_nonempty} start-in-R2+={self.start_forced_r2plus} "
                f"R1+weight={self.r1plus_weight:.6f} R1+conditional={self.r1plus_conditional:.6f}")


def verify_5_4_contradiction(tree: BranchTree) -> Report54:
    m = tree.model
    start_text = "L1 & R2 & L1-"
    start = tree.select(start_text)
    if not start:
        return Report54(NOT_REPRODUCED, False, False)
    r2m = parse("R2-", m.setup)
    forced = not any(truth_at(m, lf.world, r2m) for lf in start)
    reached = trace_pivot_path(tree, start_text, "R", "R1")
    r1p = parse("R1+", m.setup)
    plus = [lf for lf in reached if truth_at(m, lf.world, r1p)]
    weight = sum(lf.weight for lf in plus)
    branch = sum(lf.weight for lf in reached)
    cond = weight / branch if branch > 0 else 0.0
    ok = forced and bool(plus) and weight > m.table.null_tolerance
    return Report54(CONTRADICTION_REPRODUCED if ok else NOT_REPRODUCED, True, forced, plus, weight, cond)


# -- decoherence functional --------------------------------------------------------------

@dataclass
class HistoryFamily:
    """Per choice assignment, time-ordered slots of complete projector sets."""

    rho: np.ndarray
    slots: dict[tuple[int, ...], list[list[np.ndarray]]]

    def __post_init__(self):
        dim = self.rho.shape[0]
        if self.rho.shape != (dim, dim):
            raise DimensionError("density matrix must be square")
        for key, slots in self.slots.items():
            for projectors in slots:
                for P in projectors:
                    if P.shape != (dim, dim):
                        raise DimensionError(f"projector of shape {P.shape} in slot {key}; expected {(dim, dim)}")
                total = sum(projectors)
                if not np.allclose(total, np.eye(dim), atol=1e-10):
                    raise ValueError(f"slot projectors for {key} do not sum to the identity")
                for P, Q in itertools.combinations(projectors, 2):
                    if np.linalg.norm(P @ Q) > 1e-10:
                        raise ValueError(f"slot projectors for {key} are not orthogonal")


def natural_family(m: Model) -> HistoryFamily:
    """L projector first, then R projector, for every (L choice, R choice)."""
    qm = m.source
    if qm is None:
        raise ValueError("model has no quantum state attached")
    setup = qm.setup
    a, b = setup.regions
    slots = {}
    for i in range(setup.n_measurements(a)):
        for j in range(setup.n_measurements(b)):
            slots[(i, j)] = [
                [qm.measurements.projector(a, i + 1, s).matrix for s in range(len(setup.outcomes))],
                [qm.measurements.projector(b, j + 1, t).matrix for t in range(len(setup.outcomes))],
            ]
    return HistoryFamily(qm.state.density(), slots)


def decoherence_matrix(family: HistoryFamily, key: tuple[int, ...]) -> np.ndarray:
    """D(alpha, beta) = Tr[C_alpha rho C_beta^dagger] over the histories of one subtree."""
    chains = []
    for combo in itertools.product(*family.slots[key]):
        C = np.eye(family.rho.shape[0], dtype=complex)
        for P in combo:
            C = P @ C  # later times act on the left
        chains.append(C)
    n = len(chains)
    D = np.empty((n, n), dtype=complex)
    for x, y in itertools.product(range(n), repeat=2):
        D[x, y] = np.trace(chains[x] @ family.rho @ chains[y].conj().T)
    return D


def check_consistency(family: HistoryFamily) -> float:
    """Largest |Re D(alpha, beta)| over alpha != beta, across all subtrees."""
    worst = 0.0
    for key in family.slots:
        D = decoherence_matrix(family, key)
        off = D - np.diag(np.diag(D))
        worst = max(worst, float(np.max(np.abs(off.real))) if off.size else 0.0)
    return worst


def same_region_family(m: Model, region: str = "L") -> HistoryFamily:
    """Two successive slots in one region with non-commuting bases (measurement 1, then 2)."""
    qm = m.source
    if qm is None:
        raise ValueError("model has no quantum state attached")
    outs = range(len(qm.setup.outcomes))
    slots = {(0,): [[qm.measurements.projector(region, 1, s).matrix for s in outs],
                    [qm.measurements.projector(region, 2, s).matrix for s in outs]]}
    return HistoryFamily(qm.state.density(), slots)


def policies(setup, seed: int, count: int) -> list[ChoicePolicy]:
    rng = random.Random(seed)
    return [ChoicePolicy.random(setup, rng) for _ in range(count)]
