import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capteam.capability import (
    Belief,
    BeliefBank,
    CapabilitySet,
    Mode,
    PlayerRoster,
    feasible_assignments,
    intervene,
    is_type_structure,
    reduce,
)

labels_st = st.lists(st.integers(0, 30), min_size=1, max_size=5, unique=True).map(sorted)


def test_capability_set_rejects_unsorted_and_empty():
    with pytest.raises(ValueError):
        CapabilitySet((4, 2))
    with pytest.raises(ValueError):
        CapabilitySet(())
    with pytest.raises(ValueError):
        CapabilitySet((2, 2))


def test_predecessors_accept_non_labels(caps4):
    assert caps4.predecessors(5) == (2, 4)
    assert caps4.predecessors(1) == ()
    assert caps4.count_le(8) == 4
    with pytest.raises(KeyError):
        caps4.index(5)


def test_reduce_zeroes_above(caps4):
    b = Belief(caps4, [0.1, 0.2, 0.3, 0.4])
    assert list(reduce(b, 4).values) == [0.1, 0.2, 0.0, 0.0]
    assert reduce(b, 8) is b


def test_intervene_modes(caps4):
    bank = BeliefBank.initial(caps4, 8, 2, Mode.EXACT)
    assert list(intervene(bank, 1, 4).about(1).values) == [0, 1, 0, 0]
    tbank = BeliefBank.initial(caps4, 8, 2, Mode.TEMPERED)
    vals = intervene(tbank, 0, 6).about(0).values
    assert vals[2] == 0 and all(math.isinf(v) for k, v in enumerate(vals) if k != 2)
    with pytest.raises(IndexError):
        intervene(bank, 2, 4)


def test_initial_exact_belief_is_uniform_up_to_owner(caps4):
    assert list(Belief.initial(caps4, 4, Mode.EXACT).values) == [1, 1, 0, 0]
    assert list(Belief.initial(caps4, 4, Mode.TEMPERED).values) == [0, 0, 0, 0]


def test_belief_validation(caps4):
    with pytest.raises(ValueError):
        Belief(caps4, [1, 2, 3])
    with pytest.raises(ValueError):
        Belief(caps4, [1, -1, 0, 0])
    with pytest.raises(ValueError):
        Belief(caps4, [1, math.inf, 0, 0], Mode.EXACT)
    Belief(caps4, [0, math.inf, 0, 0], Mode.TEMPERED)


def test_belief_is_immutable(caps4):
    b = Belief(caps4, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        b.values[0] = 5


def test_bank_requires_shared_caps(caps4):
    other = CapabilitySet((2, 4))
    with pytest.raises(ValueError):
        BeliefBank(2, (Belief.initial(caps4, 2, Mode.EXACT), Belief.initial(other, 2, Mode.EXACT)))
    with pytest.raises(ValueError):
        BeliefBank(3, (Belief.initial(caps4, 2, Mode.EXACT),))


def test_roster_validates_types(caps4):
    assert PlayerRoster(caps4, (2, 8)).n_players == 2
    with pytest.raises(KeyError):
        PlayerRoster(caps4, (2, 5))


def test_feasible_assignments_count(caps4):
    assert len(feasible_assignments(caps4, 4, 3)) == 8
    assert feasible_assignments(caps4, 2, 2) == [(2, 2)]


def test_type_structure_examples(caps4):
    full = Belief(caps4, [0.5, 0.25, 0.125, 0.0625])
    assert is_type_structure([(8, full), (4, reduce(full, 4)), (2, reduce(full, 2))])
    bad = Belief(caps4, [0.4, 0.25, 0, 0])
    assert not is_type_structure([(8, full), (4, bad)])
    assert not is_type_structure([(8, full), (8, reduce(full, 6))])


def test_type_structure_handles_infinities(caps4):
    a = Belief(caps4, [math.inf, 0, 1, 2], Mode.TEMPERED)
    assert is_type_structure([(8, a), (4, reduce(a, 4))])
    b = Belief(caps4, [5, 0, 0, 0], Mode.TEMPERED)
    assert not is_type_structure([(8, a), (4, b)])


@given(labels_st, st.data())
def test_reduce_idempotent_and_composes(labels, data):
    caps = CapabilitySet(tuple(labels))
    vals = data.draw(st.lists(st.floats(0, 10), min_size=len(caps), max_size=len(caps)))
    b = Belief(caps, vals)
    c1 = data.draw(st.sampled_from(labels))
    c2 = data.draw(st.sampled_from(labels))
    assert np.array_equal(reduce(reduce(b, c1), c1).values, reduce(b, c1).values)
    assert np.array_equal(reduce(reduce(b, c1), c2).values, reduce(b, min(c1, c2)).values)


@given(labels_st, st.data())
def test_reductions_of_one_belief_form_a_structure(labels, data):
    caps = CapabilitySet(tuple(labels))
    vals = data.draw(st.lists(st.floats(0, 10), min_size=len(caps), max_size=len(caps)))
    top = Belief(caps, vals)
    owners = data.draw(st.lists(st.sampled_from(labels), min_size=1, max_size=4))
    assert is_type_structure([(caps.max, top)] + [(c, reduce(top, c)) for c in owners])


@given(labels_st, st.data())
def test_serialization_round_trip(labels, data):
    caps = CapabilitySet(tuple(labels))
    mode = data.draw(st.sampled_from(list(Mode)))
    pool = st.floats(0, 10) | (st.just(math.inf) if mode is Mode.TEMPERED else st.floats(0, 1))
    vals = data.draw(st.lists(pool, min_size=len(caps), max_size=len(caps)))
    b = Belief(caps, vals, mode)
    back = Belief.from_json(b.to_json())
    assert back.mode is mode and np.array_equal(back.values, b.values)
    bank = BeliefBank(caps.max, (b, b))
    assert BeliefBank.from_dict(bank.to_dict()).about(1).to_dict() == b.to_dict()
    assert CapabilitySet.from_json(caps.to_json()) == caps
