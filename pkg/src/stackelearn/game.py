"""The static power-control game.

User 0 (the macro user) is the leader; users 1..N (femto users) are the
followers.  Payoffs are thresholded energy efficiencies: rate per consumed
watt when the user's SINR target is met, zero otherwise.  Action sets are
finite power grids, so equilibria can be found by exhaustive enumeration.

Scalar operations (`sinr`, `energy_efficiency`, `utility`) are deliberately
written in plain Python with a fixed summation order so that independent
re-enumerations reproduce them bit-for-bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import dbm_to_watt


@dataclass(frozen=True)
class ActionSet:
    """Finite, strictly increasing grid of transmit powers in watts."""

    levels_w: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels_w) == 0:
            raise ValueError("action set must be non-empty")
        for p in self.levels_w:
            if not (math.isfinite(p) and p > 0):
                raise ValueError(f"power level must be finite and > 0, got {p!r}")
        if any(b <= a for a, b in zip(self.levels_w, self.levels_w[1:])):
            raise ValueError("power levels must be strictly increasing")

    @classmethod
    def from_dbm(cls, levels_dbm: Sequence[float]) -> "ActionSet":
        return cls(tuple(dbm_to_watt(x) for x in levels_dbm))

    def __len__(self) -> int:
        return len(self.levels_w)


@dataclass(frozen=True)
class UserParams:
    """SINR target (linear), circuit power (W) and power grid of one user."""

    sinr_target_lin: float
    circuit_power_w: float
    action_set: ActionSet

    def __post_init__(self):
        if not (math.isfinite(self.sinr_target_lin) and self.sinr_target_lin > 0):
            raise ValueError("sinr_target_lin must be finite and > 0")
        if not (math.isfinite(self.circuit_power_w) and self.circuit_power_w >= 0):
            raise ValueError("circuit_power_w must be finite and >= 0")


@dataclass(frozen=True)
class GameInstance:
    """One immutable network realization bound to per-user parameters.

    ``gains[j, i]`` is the channel gain from user j to base station i.
    """

    gains: np.ndarray
    users: tuple[UserParams, ...]
    bandwidth_hz: float
    noise_power_w: float

    def __post_init__(self):
        self.gains.setflags(write=False)
        n = len(self.users)
        if self.gains.shape != (n, n):
            raise ValueError(f"gains shape {self.gains.shape} does not match {n} users")
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains <= 0):
            raise ValueError("all channel gains must be finite and > 0")
        if self.bandwidth_hz <= 0 or self.noise_power_w <= 0:
            raise ValueError("bandwidth and noise power must be > 0")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_followers(self) -> int:
        return len(self.users) - 1

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(len(u.action_set) for u in self.users)

    def powers_from_indices(self, indices: Sequence[int]) -> list[float]:
        return [self.users[i].action_set.levels_w[a] for i, a in enumerate(indices)]


@dataclass(frozen=True)
class EquilibriumResult:
    leader_action_index: int
    follower_action_indices: tuple[int, ...]
    utilities: tuple[float, ...]
    is_pure_se: bool


@dataclass(frozen=True)
class FeasibilityOutcome:
    game: GameInstance
    feasible: bool
    rounds_applied: int


def sinr(i: int, powers_w: Sequence[float], game: GameInstance) -> float:
    """Linear SINR of user i at its serving base station."""
    h = game.gains
    interference = 0.0
    for j in range(game.num_users):
        if j != i:
            interference += h[j, i] * powers_w[j]
    return h[i, i] * powers_w[i] / (interference + game.noise_power_w)


def energy_efficiency(i: int, powers_w: Sequence[float], game: GameInstance) -> float:
    """Achievable rate per consumed watt (transmit + circuit), bit/s/W."""
    total_power = game.users[i].circuit_power_w + powers_w[i]
    if total_power <= 0:
        raise ValueError("total consumed power must be > 0")
    gamma = sinr(i, powers_w, game)
    return game.bandwidth_hz * math.log2(1.0 + gamma) / total_power


def utility(i: int, powers_w: Sequence[float], game: GameInstance) -> float:
    """Energy efficiency when the SINR target is met, exactly zero otherwise."""
    if sinr(i, powers_w, game) >= game.users[i].sinr_target_lin:
        return energy_efficiency(i, powers_w, game)
    return 0.0


def joint_action_space(game: GameInstance):
    """Iterator over all joint action index tuples."""
    return itertools.product(*(range(m) for m in game.action_dims))


def utility_tensor(game: GameInstance, i: int) -> np.ndarray:
    """Utility of user i tabulated over the full joint action grid."""
    out = np.empty(game.action_dims)
    for idx in joint_action_space(game):
        out[idx] = utility(i, game.powers_from_indices(idx), game)
    out.setflags(write=False)
    return out


def sinr_tensor(game: GameInstance, i: int) -> np.ndarray:
    """Linear SINR of user i tabulated over the full joint action grid."""
    out = np.empty(game.action_dims)
    for idx in joint_action_space(game):
        out[idx] = sinr(i, game.powers_from_indices(idx), game)
    out.setflags(write=False)
    return out


def expected_utility(i: int, strategies: Sequence[np.ndarray], game: GameInstance) -> float:
    """Expected utility of user i under a mixed strategy profile.

    Exhaustive enumeration over the product action space; strategies must
    live on their simplices and match the users' action set sizes.
    """
    if len(strategies) != game.num_users:
        raise ValueError("one strategy per user is required")
    for s, m in zip(strategies, game.action_dims):
        if len(s) != m:
            raise ValueError("strategy length does not match the user's action set")
    total = 0.0
    for idx in joint_action_space(game):
        prob = 1.0
        for s, a in zip(strategies, idx):
            prob *= s[a]
        if prob != 0.0:
            total += utility(i, game.powers_from_indices(idx), game) * prob
    return total


def best_response(i: int, actions: Sequence[int], game: GameInstance) -> int:
    """Best pure action of user i with all opponents fixed.

    ``actions[i]`` is ignored.  Ties break toward the lowest power index.
    """
    trial = list(actions)
    best_idx, best_val = 0, -math.inf
    for a in range(game.action_dims[i]):
        trial[i] = a
        val = utility(i, game.powers_from_indices(trial), game)
        if val > best_val:
            best_idx, best_val = a, val
    return best_idx


def follower_pure_nash(leader_action: int, game: GameInstance) -> list[tuple[int, ...]]:
    """All pure Nash equilibria of the follower game for a fixed leader action.

    A follower profile qualifies when no follower has a strictly improving
    unilateral deviation.  May be empty: the discretized game need not have
    a pure NE.
    """
    dims = game.action_dims
    equilibria = []
    for followers in itertools.product(*(range(m) for m in dims[1:])):
        profile = (leader_action,) + followers
        powers = game.powers_from_indices(profile)
        stable = True
        for i in range(1, game.num_users):
            u_here = utility(i, powers, game)
            trial = list(profile)
            for a in range(dims[i]):
                if a == profile[i]:
                    continue
                trial[i] = a
                if utility(i, game.powers_from_indices(trial), game) > u_here:
                    stable = False
                    break
            trial[i] = profile[i]
            if not stable:
                break
        if stable:
            equilibria.append(followers)
    return equilibria


def _iterated_best_response_followers(
    leader_action: int, game: GameInstance, max_sweeps: int = 1000
) -> tuple[int, ...]:
    """Fallback follower profile when no pure NE exists.

    Sweeps best responses from the all-min profile; on a cycle (or sweep
    cap) returns the visited profile maximizing the leader's utility.
    """
    followers = [0] * game.num_followers
    seen: dict[tuple[int, ...], int] = {tuple(followers): 0}
    visited = [tuple(followers)]
    for sweep in range(max_sweeps):
        for i in range(1, game.num_users):
            profile = [leader_action] + followers
            followers[i - 1] = best_response(i, profile, game)
        key = tuple(followers)
        if key in seen:
            break
        seen[key] = sweep + 1
        visited.append(key)

    def leader_value(fol: tuple[int, ...]) -> float:
        return utility(0, game.powers_from_indices((leader_action,) + fol), game)

    return max(visited, key=leader_value)


def stackelberg_oracle(game: GameInstance) -> EquilibriumResult:
    """Brute-force Stackelberg equilibrium over the finite action grids.

    For each leader action the follower response is the pure NE maximizing
    the leader's utility (optimistic convention, lexicographic tie-break);
    leader actions without a pure follower NE fall back to iterated best
    response and clear ``is_pure_se``.
    """
    best: tuple[float, int, tuple[int, ...]] | None = None
    all_pure = True
    for p0 in range(game.action_dims[0]):
        nes = follower_pure_nash(p0, game)
        if nes:
            response = max(
                nes,
                key=lambda fol: (
                    utility(0, game.powers_from_indices((p0,) + fol), game),
                    tuple(-a for a in fol),
                ),
            )
        else:
            all_pure = False
            response = _iterated_best_response_followers(p0, game)
        u0 = utility(0, game.powers_from_indices((p0,) + response), game)
        if best is None or u0 > best[0]:
            best = (u0, p0, response)
    assert best is not None
    _, p0, response = best
    profile = (p0,) + response
    powers = game.powers_from_indices(profile)
    utilities = tuple(utility(i, powers, game) for i in range(game.num_users))
    return EquilibriumResult(
        leader_action_index=p0,
        follower_action_indices=response,
        utilities=utilities,
        is_pure_se=all_pure,
    )


def leader_worst_case_feasible(game: GameInstance) -> bool:
    """Can the leader meet its SINR target at max power while every
    follower also transmits at max power?"""
    powers = [u.action_set.levels_w[-1] for u in game.users]
    return sinr(0, powers, game) >= game.users[0].sinr_target_lin


def feasibility_adjust(
    game: GameInstance, reduction_factor: float, max_rounds: int
) -> FeasibilityOutcome:
    """Scale follower SINR targets down while the leader's worst-case check fails.

    Mirrors the protocol where the macro base station asks femtocells to
    relax their QoS targets whenever the macro target is infeasible.  A run
    that exhausts ``max_rounds`` is reported with ``feasible=False`` rather
    than silently accepted.  The input game is never modified.
    """
    if not 0 < reduction_factor < 1:
        raise ValueError("reduction_factor must lie in (0, 1)")
    current = game
    rounds = 0
    while rounds < max_rounds and not leader_worst_case_feasible(current):
        users = [current.users[0]]
        users += [
            replace(u, sinr_target_lin=u.sinr_target_lin * reduction_factor)
            for u in current.users[1:]
        ]
        current = replace(current, users=tuple(users))
        rounds += 1
    return FeasibilityOutcome(
        game=current,
        feasible=leader_worst_case_feasible(current),
        rounds_applied=rounds,
    )
