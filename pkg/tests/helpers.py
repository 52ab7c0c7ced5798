"""Small deterministic games for search and agent tests."""

from capteam.envs.base import StepResult, TurnGame


class TreeGame(TurnGame):
    """Game given by an explicit tree: ``tree[path] = (actor, {action: reward})``.

    States are action paths; a path missing from ``tree`` is terminal.
    """

    def __init__(self, tree, teams=((0, 1),)):
        self.tree = tree
        self.teams = teams

    def initial_state(self):
        return ()

    def actor(self, state):
        return self.tree[state][0]

    def legal_actions(self, state):
        return tuple(self.tree[state][1]) if state in self.tree else ()

    def is_terminal(self, state):
        return state not in self.tree

    def step(self, state, action):
        actor, rewards = self.tree[state]
        nxt = state + (action,)
        team = self.team_of(actor)
        vec = [0.0] * self.n_teams
        vec[team] = rewards[action]
        return StepResult(nxt, tuple(vec), None if self.is_terminal(nxt) else self.actor(nxt))


def bandit(rewards=(1.0, 0.0)):
    return TreeGame({(): (0, {f"arm{k}": r for k, r in enumerate(rewards)})})


class LineGame(TurnGame):
    """Alternating players on a counter; no rewards; ends after ``horizon`` steps."""

    def __init__(self, horizon=6, n_actions=3, teams=((0, 1),)):
        self.horizon = horizon
        self.n_actions = n_actions
        self.teams = teams

    def initial_state(self):
        return 0

    def actor(self, state):
        return state % self.n_players

    def legal_actions(self, state):
        return tuple(range(self.n_actions)) if state < self.horizon else ()

    def is_terminal(self, state):
        return state >= self.horizon

    def step(self, state, action):
        return StepResult(state + 1, (0.0,) * self.n_teams, None)
