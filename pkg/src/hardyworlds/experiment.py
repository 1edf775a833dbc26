"""Experimental universe: regions, causal relations, frames and worlds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .formula import Atom, parse

DEFAULT_MAX_WORLDS = 2 ** 20


class CapacityError(RuntimeError):
    """An enumeration would exceed its configured bound."""


class SetupError(ValueError):
    pass


@dataclass(frozen=True)
class Setup:
    """Regions, measurement counts per region and the shared outcome labels.

    Measurements in a region are numbered 1..n; an atom ``R2`` names
    measurement 2 of region ``R``.
    """

    regions: tuple[str, ...]
    measurements: Mapping[str, int]
    outcomes: tuple[str, ...] = ("+", "-")

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "measurements", dict(self.measurements))
        if not self.regions:
            raise SetupError("at least one region is required")
        if len(set(self.regions)) != len(self.regions):
            raise SetupError("region names must be unique")
        for r in self.regions:
            if not r.isalpha():
                raise SetupError(f"region name {r!r} must be alphabetic")
            if self.measurements.get(r, 0) < 1:
                raise SetupError(f"region {r} needs at least one measurement")
        if set(self.measurements) - set(self.regions):
            raise SetupError("measurements declared for unknown regions")
        if not self.outcomes or len(set(self.outcomes)) != len(self.outcomes):
            raise SetupError("outcome labels must be nonempty and unique")
        # a prefix-ambiguous pair such as A / AB would make atom names ambiguous
        for a, b in itertools.permutations(self.regions, 2):
            if b.startswith(a):
                raise SetupError(f"region names {a!r} and {b!r} are prefix-ambiguous")

    def __hash__(self):
        return hash((self.regions, tuple(sorted(self.measurements.items())), self.outcomes))

    def n_measurements(self, region: str) -> int:
        return self.measurements[region]

    def region_index(self, region: str) -> int:
        return self.regions.index(region)

    def world_count(self) -> int:
        n = 1
        for r in self.regions:
            n *= self.measurements[r] * len(self.outcomes)
        return n

    def world(self, *atoms: str) -> World:
        """Build a world from outcome-atom names, one per region: ``world("L2+", "R1-")``."""
        if len(atoms) != len(self.regions):
            raise SetupError(f"need one outcome atom per region, got {atoms}")
        choices = [0] * len(self.regions)
        outcomes = [0] * len(self.regions)
        seen = set()
        for text in atoms:
            a = parse(text, self)
            if not isinstance(a, Atom) or a.is_choice:
                raise SetupError(f"{text!r} is not an outcome atom")
            k = self.region_index(a.region)
            if k in seen:
                raise SetupError(f"region {a.region} given twice")
            seen.add(k)
            choices[k] = a.measurement - 1
            outcomes[k] = self.outcomes.index(a.sign)
        return World(tuple(choices), tuple(outcomes))

    def describe(self, w: World) -> str:
        parts = []
        for k, r in enumerate(self.regions):
            parts.append(f"{r}{w.choices[k] + 1},{self.outcomes[w.outcomes[k]]}")
        return "(" + ",".join(parts) + ")"


HARDY_SETUP = Setup(("L", "R"), {"L": 2, "R": 2}, ("+", "-"))


@dataclass(frozen=True)
class World:
    """One (choice, outcome) pair per region, as 0-based indices."""

    choices: tuple[int, ...]
    outcomes: tuple[int, ...]


@dataclass(frozen=True)
class CausalStructure:
    """Finite causal relation table between regions.

    ``future[a]`` is the set of regions inside the forward light cone of
    ``a`` (always containing ``a`` itself).  Two distinct regions are
    spacelike when neither lies in the other's cone.
    """

    regions: tuple[str, ...]
    future: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        fut = {r: frozenset(self.future.get(r, ())) | {r} for r in self.regions}
        for r, cone in fut.items():
            if cone - set(self.regions):
                raise SetupError(f"cone of {r} names unknown regions")
        for a, b in itertools.permutations(self.regions, 2):
            if b in fut[a] and a in fut[b]:
                raise SetupError(f"regions {a} and {b} lie in each other's forward cone")
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "future", fut)

    def __hash__(self):
        return hash((self.regions, tuple(sorted((r, tuple(sorted(c))) for r, c in self.future.items()))))

    @classmethod
    def all_spacelike(cls, regions: Sequence[str]) -> CausalStructure:
        return cls(tuple(regions), {})

    def in_forward_cone(self, a: str, b: str) -> bool:
        """True when region ``b`` lies inside the forward cone of ``a``."""
        return b in self.future[a]

    def spacelike(self, a: str, b: str) -> bool:
        return a != b and not self.in_forward_cone(a, b) and not self.in_forward_cone(b, a)

    def cone(self, source: str | None) -> frozenset[str]:
        if source is None:
            return frozenset()
        return self.future[source]


HARDY_CAUSAL = CausalStructure.all_spacelike(("L", "R"))


@dataclass(frozen=True)
class Frame:
    """A total time order on the regions."""

    order: tuple[str, ...]

    def later(self, a: str, b: str) -> bool:
        return self.order.index(a) > self.order.index(b)


def admissible_frames(causal: CausalStructure) -> list[Frame]:
    """Every total order compatible with the cone relation."""
    frames = []
    for perm in itertools.permutations(causal.regions):
        ok = all(
            perm.index(a) < perm.index(b)
            for a, b in itertools.permutations(causal.regions, 2)
            if causal.in_forward_cone(a, b)
        )
        if ok:
            frames.append(Frame(perm))
    return frames


def enumerate_logical_worlds(setup: Setup, max_worlds: int = DEFAULT_MAX_WORLDS) -> list[World]:
    """All logically possible worlds, in lexicographic (region, choice, outcome) order."""
    count = setup.world_count()
    if count > max_worlds:
        raise CapacityError(f"{count} logical worlds exceed the bound {max_worlds}")
    per_region = [
        [(c, o) for c in range(setup.measurements[r]) for o in range(len(setup.outcomes))]
        for r in setup.regions
    ]
    worlds = []
    for combo in itertools.product(*per_region):
        worlds.append(World(tuple(c for c, _ in combo), tuple(o for _, o in combo)))
    return worlds


def atom_truth(setup: Setup, w: World, a: Atom) -> bool:
    k = setup.region_index(a.region)
    if w.choices[k] != a.measurement - 1:
        return False
    if a.is_choice:
        return True
    return w.outcomes[k] == setup.outcomes.index(a.sign)


def conflict_region(setup: Setup, w: World, c: Atom) -> str | None:
    """Region where choice atom ``c`` conflicts with ``w``; None if ``c`` already holds."""
    if not c.is_choice:
        raise ValueError(f"{c.name} is not a choice atom")
    return None if atom_truth(setup, w, c) else c.region


def agrees_outside_cone(setup: Setup, v: World, w: World, source: str | None,
                        causal: CausalStructure) -> bool:
    cone = causal.cone(source)
    for k, r in enumerate(setup.regions):
        if r in cone:
            continue
        if v.choices[k] != w.choices[k] or v.outcomes[k] != w.outcomes[k]:
            return False
    return True


def localized_outside(f_regions: Iterable[str], source: str, causal: CausalStructure) -> bool:
    """True when every region in ``f_regions`` lies outside the forward cone of ``source``."""
    return not (set(f_regions) & causal.cone(source))


@dataclass(frozen=True)
class WorldSet:
    """Subset of the enumerated logical worlds, as a bitmask over their indices."""

    mask: int
    size: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.size:
            raise ValueError("mask has bits beyond the world count")

    @classmethod
    def empty(cls, size: int) -> WorldSet:
        return cls(0, size)

    @classmethod
    def full(cls, size: int) -> WorldSet:
        return cls((1 << size) - 1, size)

    @classmethod
    def of(cls, indices: Iterable[int], size: int) -> WorldSet:
        mask = 0
        for i in indices:
            if not 0 <= i < size:
                raise IndexError(i)
            mask |= 1 << i
        return cls(mask, size)

    def _check(self, other: WorldSet):
        if other.size != self.size:
            raise ValueError("world sets over different universes")

    def __and__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.mask & other.mask, self.size)

    def __or__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.mask | other.mask, self.size)

    def __sub__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.mask & ~other.mask, self.size)

    def __invert__(self) -> WorldSet:
        return WorldSet(~self.mask & ((1 << self.size) - 1), self.size)

    def __le__(self, other: WorldSet) -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def __contains__(self, index: int) -> bool:
        return bool(self.mask >> index & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __iter__(self):
        m, i = self.mask, 0
        while m:
            if m & 1:
                yield i
            m >>= 1
            i += 1

    def is_empty(self) -> bool:
        return self.mask == 0
