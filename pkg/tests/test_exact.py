import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capteam.capability import BeliefBank, CapabilitySet, Mode, is_type_structure
from capteam.exact import (
    PolicyDraw,
    conditional_likelihood,
    exact_update,
    greedy_policy,
    optimal_action_set,
    optimal_value,
)
from capteam.oracle import TabularTypedQ, random_tabular_game


class TableQ:
    """Belief-independent Q: q[c][a]."""

    def __init__(self, table):
        self.table = table

    def actions(self, state):
        return (0, 1, 2)

    def q(self, c, state, bank, action):
        return self.table[c][action]


CAPS = CapabilitySet((2, 4, 6))
Q = TableQ({2: [1, 0, 0], 4: [0, 1, 0], 6: [1, 1, 0]})


def test_optimal_sets_and_values():
    bank = BeliefBank.initial(CAPS, 6, 2)
    assert optimal_action_set(2, None, bank, Q, 1) == (0,)
    assert optimal_action_set(6, None, bank, Q, 1) == (0, 1)
    assert optimal_value(4, None, bank, Q, 1) == 1


def test_update_multiplies_by_argmax_likelihood():
    bank = BeliefBank.initial(CAPS, 6, 2)
    after = exact_update(bank, 1, 0, None, Q)
    assert list(after.about(1).values) == [1.0, 0.0, 0.5]
    assert list(after.about(0).values) == [1.0, 1.0, 1.0]


def test_update_scope_is_observer_type():
    bank = BeliefBank.initial(CAPS, 4, 2)
    after = exact_update(bank, 1, 1, None, Q)
    assert list(after.about(1).values) == [0.0, 1.0, 0.0]


def test_update_rejects_tempered_bank():
    with pytest.raises(ValueError):
        exact_update(BeliefBank.initial(CAPS, 6, 2, Mode.TEMPERED), 1, 0, None, Q)


def test_conditional_likelihood_undefined_on_zero_mass():
    bank = exact_update(BeliefBank.initial(CAPS, 6, 2), 1, 1, None, Q)
    b = bank.about(1)
    assert conditional_likelihood(b, 2) is None
    np.testing.assert_allclose(conditional_likelihood(b, 6), [0, 2 / 3, 1 / 3])


def test_greedy_policy_tie_draws_are_uniform():
    bank = BeliefBank.initial(CAPS, 6, 2)
    rng = np.random.default_rng(0)
    draws = [greedy_policy(6, None, bank, Q, rng, actor=0).chosen_action for _ in range(10_000)]
    share = np.mean(np.array(draws) == 0)
    assert abs(share - 0.5) < 0.02
    assert set(draws) == {0, 1}


def test_policy_draw_validates_membership():
    with pytest.raises(ValueError):
        PolicyDraw(2, (0, 1))


@given(st.integers(0, 10_000))
def test_structure_preserved_along_random_play(seed):
    rng = np.random.default_rng(seed)
    caps = CapabilitySet((1, 2, 3))
    game = random_tabular_game(rng, caps, n_states=4, horizon=4, reward_levels=1)
    q = TabularTypedQ(game, rng)
    types = (1, 3)
    banks = [BeliefBank.initial(caps, t, 2) for t in types]
    state = game.initial_state()
    for _ in range(4):
        i = game.actor(state)
        a = int(rng.integers(game.n_actions))
        banks = [exact_update(banks[j], i, a, state, q, types[j]) for j in range(2)]
        for m in range(2):
            assert is_type_structure([(types[j], banks[j].about(m)) for j in range(2)])
        state = game.step(state, a)[0]
