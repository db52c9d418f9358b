"""Stochastic learners for the Stackelberg power game.

Three schemes share one step loop:

* ``rla1`` -- the leader updates toward its exact expected utility given the
  followers' broadcast strategies; each follower keeps a running-average
  utility table indexed by (own action, leader action) and updates toward
  its estimate weighted by the leader's strategy.
* ``rla2`` -- followers additionally hold a belief over the *other*
  followers' joint actions, nudged by a conjecture rule proportional to the
  change in their own strategy, and evaluate utilities against that belief.
  A follower with belief factor 0 runs the plain ``rla1`` update, so the
  two schemes coincide exactly (bitwise) when all belief factors are zero.
* ``noncoop`` -- every user, leader included, does bandit Q-learning on the
  raw realized utility with no information exchange.

Each user's utilities are rescaled by that user's own maximum pure-profile
utility before learning, so one default temperature works across users and
instances (leader and follower utilities differ by orders of magnitude);
traces report physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import watt_to_dbm
from .game import GameInstance, sinr_tensor, utility_tensor

RLA1 = "rla1"
RLA2 = "rla2"
NONCOOP = "noncoop"
ALGORITHMS = (RLA1, RLA2, NONCOOP)

# Default Boltzmann temperature as a fraction of the normalized utility scale.
AUTO_TEMPERATURE_FRACTION = 0.05


def boltzmann_strategy(q: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax of Q-values at the given temperature, overflow-safe."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    z = np.asarray(q, dtype=float) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sample_action(strategy: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF sample of an action index from a probability vector."""
    u = rng.random()
    acc = 0.0
    for j in range(len(strategy) - 1):
        acc += strategy[j]
        if u < acc:
            return j
    return len(strategy) - 1


def q_update(q: np.ndarray, action: int, target: float, alpha: float) -> np.ndarray:
    """Single-entry Q recursion q[a] <- q[a] + alpha (target - q[a])."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    out = q.copy()
    out[action] += alpha * (target - out[action])
    return out


def noncoop_q_update(q: np.ndarray, action: int, realized_utility: float, alpha: float) -> np.ndarray:
    """Myopic variant: the target is the raw realized utility sample."""
    return q_update(q, action, realized_utility, alpha)


class JointEstimate:
    """Running-average utility per (own action, leader action) cell."""

    def __init__(self, own_dim: int, leader_dim: int):
        self.u_hat = np.zeros((own_dim, leader_dim))
        self.counts = np.zeros((own_dim, leader_dim), dtype=np.int64)

    def update(self, own_action: int, leader_action: int, realized_utility: float) -> None:
        c = self.counts[own_action, leader_action]
        self.u_hat[own_action, leader_action] += (
            realized_utility - self.u_hat[own_action, leader_action]
        ) / (c + 1)
        self.counts[own_action, leader_action] = c + 1

    def estimate(self, own_action: int, leader_strategy: np.ndarray) -> float:
        """Estimated expected utility of an own action, weighting the cell
        averages by the leader's broadcast strategy."""
        return float(leader_strategy @ self.u_hat[own_action])


def conjecture_adjust(
    belief: np.ndarray, delta: float, own_prob_new: float, own_prob_old: float
) -> np.ndarray:
    """Shift a contention belief by -delta * (change in own action probability).

    The raw shift can leave the simplex; entries are clamped to [0, 1] and
    renormalized.  ``delta == 0`` is the identity.
    """
    if delta < 0:
        raise ValueError("belief factor must be >= 0")
    raw = belief - delta * (own_prob_new - own_prob_old)
    clipped = np.clip(raw, 0.0, 1.0)
    total = clipped.sum()
    if total <= 0:
        return np.full_like(belief, 1.0 / belief.size)
    return clipped / total


def rla2_estimated_expected_utility(
    own_action: int,
    follower_index: int,
    leader_strategy: np.ndarray,
    belief: np.ndarray,
    u_i: np.ndarray,
) -> float:
    """Belief-weighted expected utility of an own action for an rla2 follower.

    ``u_i`` is the follower's utility tensor over the joint action grid
    (axes ordered by user index); the environment supplies it exactly.
    ``belief`` has one axis per other follower, in user order.
    """
    sub = np.take(u_i, own_action, axis=follower_index)  # axes: leader, other followers
    if belief.ndim:
        over_leader = np.tensordot(sub, belief, axes=(list(range(1, sub.ndim)), list(range(belief.ndim))))
    else:
        over_leader = sub * belief
    return float(leader_strategy @ over_leader)


def _contract_over_others(tensor: np.ndarray, strategies, axis: int) -> np.ndarray:
    """Expected value of ``tensor`` over everyone's strategies except ``axis``,
    returning a vector over that axis."""
    out = tensor
    # contract trailing axes first so earlier axis numbers stay valid
    for j in range(len(strategies) - 1, -1, -1):
        if j == axis:
            continue
        out = np.tensordot(out, strategies[j], axes=([j if j < axis else out.ndim - 1], [0]))
    return out


def action_expected_utilities(tensor: np.ndarray, strategies, user: int) -> np.ndarray:
    """U_i(a, Y_{-i}) for every action a of ``user``."""
    return _contract_over_others(tensor, strategies, user)


def leader_expected_utility(
    j0: int, follower_strategies, game: GameInstance | None = None, u0: np.ndarray | None = None
) -> float:
    """Exact expected leader utility of action ``j0`` given all follower
    strategies (the leader receives them over the uplink)."""
    if u0 is None:
        if game is None:
            raise ValueError("either a game or a precomputed leader tensor is required")
        u0 = utility_tensor(game, 0)
    out = u0[j0]
    for s in reversed(follower_strategies):
        out = out @ s
    return float(out)


def full_expected_utility(tensor: np.ndarray, strategies) -> float:
    """Expected value of a joint-action tensor under a full strategy profile."""
    out = tensor
    for s in reversed(strategies):
        out = out @ s
    return float(out)


@dataclass
class LearnerSettings:
    """Hyperparameters shared by all schemes.

    ``temperature`` is expressed in post-normalization utility units (the
    learner rescales utilities to [0, 1]); ``None`` selects the default
    fraction of that scale.  ``temperature_decay`` < 1 anneals geometrically.
    """

    alpha: float = 0.1
    temperature: float | None = None
    temperature_decay: float = 1.0
    belief_factor: float = 2.0

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.temperature is not None and self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.temperature_decay <= 1:
            raise ValueError("temperature_decay must lie in (0, 1]")
        if self.belief_factor < 0:
            raise ValueError("belief_factor must be >= 0")


@dataclass
class TraceRecord:
    """One logged learning step, physical units."""

    step: int
    actions: tuple[int, ...]
    powers_dbm: tuple[float, ...]
    sinr_lin: tuple[float, ...]
    utilities: tuple[float, ...]
    expected_utilities: tuple[float, ...]
    strategies: list[np.ndarray]


class StackelbergLearning:
    """Sequential learning run of one scheme on one game instance.

    Owns its RNG stream and all agent state; distinct runs are independent.
    """

    def __init__(
        self,
        game: GameInstance,
        algorithm: str,
        seed_or_rng,
        settings: LearnerSettings | None = None,
        belief_factors=None,
    ):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.game = game
        self.algorithm = algorithm
        self.settings = settings or LearnerSettings()
        if isinstance(seed_or_rng, np.random.Generator):
            self.rng = seed_or_rng
        else:
            self.rng = np.random.default_rng(seed_or_rng)

        n = game.num_users
        self.dims = game.action_dims
        self.u_phys = [utility_tensor(game, i) for i in range(n)]
        self.sinr_tensors = [sinr_tensor(game, i) for i in range(n)]
        self.u_max = [max(float(t.max()), 0.0) or 1.0 for t in self.u_phys]
        self.u_norm = [t / m for t, m in zip(self.u_phys, self.u_max)]

        tau = self.settings.temperature
        if tau is None:
            tau = AUTO_TEMPERATURE_FRACTION  # normalized utilities peak at 1
        self.temperatures = [tau] * n

        if belief_factors is None:
            belief_factors = [self.settings.belief_factor] * game.num_followers
        if len(belief_factors) != game.num_followers:
            raise ValueError("one belief factor per follower is required")
        self.belief_factors = [float(d) for d in belief_factors]

        self.q = [np.zeros(m) for m in self.dims]
        self.strategies = [boltzmann_strategy(qi, t) for qi, t in zip(self.q, self.temperatures)]
        self.prev_strategies = [s.copy() for s in self.strategies]
        self.estimates = [JointEstimate(self.dims[i], self.dims[0]) for i in range(1, n)]
        self.beliefs = [
            np.full(self._other_dims(i), 1.0 / max(1, int(np.prod(self._other_dims(i)))))
            for i in range(1, n)
        ]
        self.t = 0

    def _other_dims(self, follower: int) -> tuple[int, ...]:
        return tuple(m for j, m in enumerate(self.dims) if j not in (0, follower))

    def step(self) -> TraceRecord:
        """One iteration: sample, realize utilities, update estimators and
        Q-values, regenerate every strategy from the new Q-values."""
        game = self.game
        n = game.num_users
        alpha = self.settings.alpha
        y = self.strategies

        actions = tuple(sample_action(y[i], self.rng) for i in range(n))
        realized_norm = [float(self.u_norm[i][actions]) for i in range(n)]

        record = TraceRecord(
            step=self.t,
            actions=actions,
            powers_dbm=tuple(
                watt_to_dbm(game.users[i].action_set.levels_w[actions[i]]) for i in range(n)
            ),
            sinr_lin=tuple(float(self.sinr_tensors[i][actions]) for i in range(n)),
            utilities=tuple(float(self.u_phys[i][actions]) for i in range(n)),
            expected_utilities=tuple(
                full_expected_utility(self.u_phys[i], y) for i in range(n)
            ),
            strategies=[s.copy() for s in y],
        )

        if self.algorithm == NONCOOP:
            for i in range(n):
                self.q[i] = noncoop_q_update(self.q[i], actions[i], realized_norm[i], alpha)
        else:
            leader_target = leader_expected_utility(actions[0], y[1:], u0=self.u_norm[0])
            self.q[0] = q_update(self.q[0], actions[0], leader_target, alpha)
            for i in range(1, n):
                est = self.estimates[i - 1]
                est.update(actions[i], actions[0], realized_norm[i])
                delta = self.belief_factors[i - 1]
                if self.algorithm == RLA2 and delta != 0.0:
                    dy_new = float(y[i][actions[i]])
                    dy_old = float(self.prev_strategies[i][actions[i]])
                    belief = conjecture_adjust(self.beliefs[i - 1], delta, dy_new, dy_old)
                    self.beliefs[i - 1] = belief
                    target = rla2_estimated_expected_utility(
                        actions[i], i, y[0], belief, self.u_norm[i]
                    )
                else:
                    target = est.estimate(actions[i], y[0])
                self.q[i] = q_update(self.q[i], actions[i], target, alpha)

        self.prev_strategies = y
        decay = self.settings.temperature_decay
        if decay != 1.0:
            self.temperatures = [t * decay for t in self.temperatures]
        self.strategies = [
            boltzmann_strategy(qi, t) for qi, t in zip(self.q, self.temperatures)
        ]
        self.t += 1
        return record

    def run(self, num_steps: int, log_every: int = 1) -> list[TraceRecord]:
        """Run ``num_steps`` iterations, keeping every ``log_every``-th record
        plus the final one."""
        if num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        records = []
        for t in range(num_steps):
            rec = self.step()
            if t % log_every == 0 or t == num_steps - 1:
                records.append(rec)
        return records


def learning_step(engine: StackelbergLearning) -> TraceRecord:
    """Functional alias for one engine iteration."""
    return engine.step()
