"""Capability types, typed beliefs and the operators that act on them.

Beliefs are short float vectors indexed by a totally ordered set of
capability labels (search depths in every shipped environment).  Two
interpretations share one container:

* ``Mode.EXACT`` -- unnormalized likelihoods, updated multiplicatively.
* ``Mode.TEMPERED`` -- accumulated losses, turned into likelihoods by a
  temperature softmax.

All objects here are immutable; operators return new objects.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STRUCTURE_TOL = 1e-9


class Mode(str, enum.Enum):
    EXACT = "exact"
    TEMPERED = "tempered"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CapabilitySet:
    """Strictly increasing capability labels."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        if not labels:
            raise ValueError("capability set must be nonempty")
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise ValueError(f"labels must be strictly increasing: {labels}")
        if labels[0] < 0:
            raise ValueError("capability labels are nonnegative integers")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, c) -> bool:
        return c in self._index

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def max(self) -> int:
        return self.labels[-1]

    @property
    def min(self) -> int:
        return self.labels[0]

    def index(self, c: int) -> int:
        try:
            return self._index[c]
        except KeyError:
            raise KeyError(f"unknown capability {c!r}; known {self.labels}") from None

    def predecessors(self, c: int) -> tuple[int, ...]:
        """The closed predecessor set p(c) = {c' <= c}.

        ``c`` need not be a label itself (search levels between labels are
        legal arguments); the result may then be empty.
        """
        return tuple(x for x in self.labels if x <= c)

    def count_le(self, c: int) -> int:
        return len(self.predecessors(c))

    def to_json(self) -> str:
        return json.dumps(list(self.labels))

    @classmethod
    def from_json(cls, text: str) -> "CapabilitySet":
        return cls(tuple(json.loads(text)))


@dataclass(frozen=True)
class Belief:
    caps: CapabilitySet
    values: np.ndarray
    mode: Mode = Mode.EXACT

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (len(self.caps),):
            raise ValueError(f"belief has {vals.shape} entries, expected {len(self.caps)}")
        if np.isnan(vals).any():
            raise ValueError("belief entries must not be NaN")
        if self.mode is Mode.EXACT:
            if (vals < 0).any() or not np.isfinite(vals).all():
                raise ValueError("exact beliefs are finite and nonnegative")
        elif (vals < 0).any():
            raise ValueError("tempered beliefs are nonnegative losses")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mode", Mode(self.mode))

    def __getitem__(self, c: int) -> float:
        return float(self.values[self.caps.index(c)])

    def with_values(self, values) -> "Belief":
        return Belief(self.caps, values, self.mode)

    @classmethod
    def initial(cls, caps: CapabilitySet, owner_type: int, mode: Mode) -> "Belief":
        if mode is Mode.EXACT:
            vals = [1.0 if c <= owner_type else 0.0 for c in caps]
        else:
            vals = [0.0] * len(caps)
        return cls(caps, vals, mode)

    @classmethod
    def delta(cls, caps: CapabilitySet, c: int, mode: Mode) -> "Belief":
        k = caps.index(c)
        if mode is Mode.EXACT:
            vals = np.zeros(len(caps))
            vals[k] = 1.0
        else:
            vals = np.full(len(caps), math.inf)
            vals[k] = 0.0
        return cls(caps, vals, mode)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "caps": list(self.caps.labels),
            "values": ["inf" if math.isinf(v) else float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Belief":
        vals = [math.inf if v == "inf" else float(v) for v in d["values"]]
        return cls(CapabilitySet(tuple(d["caps"])), vals, Mode(d["mode"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Belief":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class BeliefBank:
    """One player's beliefs about every player, ``beliefs[j]`` is about j."""

    owner_type: int
    beliefs: tuple[Belief, ...]

    def __post_init__(self):
        beliefs = tuple(self.beliefs)
        if not beliefs:
            raise ValueError("belief bank needs at least one belief")
        caps, mode = beliefs[0].caps, beliefs[0].mode
        for b in beliefs:
            if b.caps != caps or b.mode != mode:
                raise ValueError("all beliefs in a bank share capability set and mode")
        if self.owner_type not in caps:
            raise ValueError(f"owner type {self.owner_type} not in {caps.labels}")
        object.__setattr__(self, "beliefs", beliefs)

    @property
    def caps(self) -> CapabilitySet:
        return self.beliefs[0].caps

    @property
    def mode(self) -> Mode:
        return self.beliefs[0].mode

    @property
    def n_players(self) -> int:
        return len(self.beliefs)

    def about(self, j: int) -> Belief:
        return self.beliefs[j]

    def replace(self, j: int, belief: Belief) -> "BeliefBank":
        beliefs = list(self.beliefs)
        beliefs[j] = belief
        return BeliefBank(self.owner_type, tuple(beliefs))

    def reduced(self, c: int) -> "BeliefBank":
        return BeliefBank(self.owner_type, tuple(reduce(b, c) for b in self.beliefs))

    @classmethod
    def initial(cls, caps: CapabilitySet, owner_type: int, n_players: int,
                mode: Mode = Mode.EXACT) -> "BeliefBank":
        b = Belief.initial(caps, owner_type, mode)
        return cls(owner_type, (b,) * n_players)

    def to_dict(self) -> dict:
        return {"owner_type": self.owner_type, "beliefs": [b.to_dict() for b in self.beliefs]}

    @classmethod
    def from_dict(cls, d: dict) -> "BeliefBank":
        return cls(int(d["owner_type"]), tuple(Belief.from_dict(b) for b in d["beliefs"]))


@dataclass(frozen=True)
class PlayerRoster:
    caps: CapabilitySet
    types: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(int(t) for t in self.types))
        if len(self.types) < 2:
            raise ValueError("need at least two players")
        for t in self.types:
            self.caps.index(t)

    @property
    def n_players(self) -> int:
        return len(self.types)


def reduce(b: Belief, c: int) -> Belief:
    """Zero every entry above capability ``c``."""
    b.caps.index(c)
    keep = np.array([x <= c for x in b.caps.labels])
    if keep.all():
        return b
    return b.with_values(np.where(keep, b.values, 0.0))


def intervene(bank: BeliefBank, j: int, c: int) -> BeliefBank:
    """Condition the bank on player ``j`` having type exactly ``c``.

    Tempered banks get the loss delta (0 at c, inf elsewhere); exact banks the
    likelihood delta (1 at c, 0 elsewhere).  Both give the same conditional.
    """
    if not 0 <= j < bank.n_players:
        raise IndexError(f"player {j} out of range")
    return bank.replace(j, Belief.delta(bank.caps, c, bank.mode))


def _close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    inf_a, inf_b = np.isinf(a), np.isinf(b)
    if (inf_a != inf_b).any():
        return False
    fin = ~inf_a
    return bool(np.all(np.abs(a[fin] - b[fin]) <= tol))


def is_type_structure(beliefs: Sequence[tuple[int, Belief]], tol: float = STRUCTURE_TOL) -> bool:
    """True iff the (owner_type, belief) pairs form a capability type structure."""
    beliefs = list(beliefs)
    if not beliefs:
        raise ValueError("is_type_structure needs at least one belief")
    caps = beliefs[0][1].caps
    if any(b.caps != caps for _, b in beliefs):
        raise ValueError("beliefs must share a capability set")
    for (ci, bi), (cj, bj) in itertools.combinations(beliefs, 2):
        if ci == cj:
            ok = _close(bi.values, bj.values, tol)
        elif cj < ci:
            ok = _close(reduce(bi, cj).values, bj.values, tol)
        else:
            ok = _close(reduce(bj, ci).values, bi.values, tol)
        if not ok:
            return False
    return True


def feasible_assignments(caps: CapabilitySet, c: int, n: int) -> list[tuple[int, ...]]:
    """All joint assignments in p(c)^n, in lexicographic order."""
    caps.index(c)
    return list(itertools.product(caps.predecessors(c), repeat=n))


def capability_set(labels: Iterable[int]) -> CapabilitySet:
    return CapabilitySet(tuple(labels))
