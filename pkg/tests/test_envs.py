"""Environment reward semantics, oracles, and trace serialization."""

import io
from itertools import product

import numpy as np
import pytest

from incentiverl.envs import (
    AsymmetricEscapeRoom,
    Cleanup,
    CleanupParams,
    EnvError,
    EscapeRoom,
    IteratedPrisonersDilemma,
    TraceRecorder,
    er_optimal_return,
)
from incentiverl.envs.cleanup import CLEAN, DOWN, LEFT, RIGHT, STAY, UP
from incentiverl.envs.escape_room import DOOR, LEVER, START
from incentiverl.envs.trace import read_trace

C, D = 0, 1


class TestIpd:
    @pytest.mark.parametrize(
        "actions,expected",
        [
            ((C, C), (-1, -1)),
            ((C, D), (-3, 0)),
            ((D, C), (0, -3)),
            ((D, D), (-2, -2)),
        ],
    )
    def test_payoffs(self, actions, expected):
        env = IteratedPrisonersDilemma()
        env.reset()
        result = env.step(actions)
        assert tuple(result.rewards) == expected

    def test_reward_sums(self):
        env = IteratedPrisonersDilemma()
        env.reset()
        assert env.step((C, C)).rewards.sum() == -2
        assert env.step((D, D)).rewards.sum() == -4

    def test_first_round_indicator(self):
        env = IteratedPrisonersDilemma()
        obs = env.reset()
        for o in obs:
            assert o[0] == 1.0 and o.sum() == 1.0

    def test_observation_is_egocentric(self):
        env = IteratedPrisonersDilemma()
        env.reset()
        result = env.step((C, D))
        # agent 0 saw (own=C, other=D); agent 1 saw (own=D, other=C)
        assert result.obs[0][1 + 2 * C + D] == 1.0
        assert result.obs[1][1 + 2 * D + C] == 1.0

    def test_episode_length(self):
        env = IteratedPrisonersDilemma()
        env.reset()
        for k in range(5):
            result = env.step((C, C))
        assert result.done
        with pytest.raises(EnvError):
            env.step((C, C))

    def test_invalid_action(self):
        env = IteratedPrisonersDilemma()
        env.reset()
        with pytest.raises(EnvError):
            env.step((0, 7))


class TestEscapeRoom:
    def test_lever_plus_door(self):
        env = EscapeRoom(2, 1)
        env.reset()
        result = env.step([DOOR, LEVER])
        assert tuple(result.rewards) == (10.0, -1.0)
        assert result.done

    def test_both_stay(self):
        env = EscapeRoom(2, 1)
        env.reset()
        result = env.step([START, START])
        assert tuple(result.rewards) == (0.0, 0.0)
        assert not result.done

    def test_single_mover_below_quota(self):
        env = EscapeRoom(3, 2)
        env.reset()
        result = env.step([LEVER, START, START])
        assert tuple(result.rewards) == (-1.0, 0.0, 0.0)
        assert not result.done

    def test_staying_at_lever_costs_nothing(self):
        env = EscapeRoom(2, 1)
        env.reset()
        env.step([LEVER, START])
        result = env.step([LEVER, START])
        assert tuple(result.rewards) == (0.0, 0.0)

    def test_door_without_quota_is_movement(self):
        env = EscapeRoom(2, 1)
        env.reset()
        result = env.step([START, DOOR])
        assert tuple(result.rewards) == (0.0, -1.0)
        assert not result.done

    def test_single_exit_per_episode(self):
        env = EscapeRoom(3, 1)
        env.reset()
        result = env.step([LEVER, DOOR, DOOR])
        # lowest-index door agent exits; the other pays the movement cost
        assert tuple(result.rewards) == (-1.0, 10.0, -1.0)
        assert result.done

    def test_five_step_limit(self):
        env = EscapeRoom(2, 1)
        env.reset()
        for _ in range(4):
            assert not env.step([START, START]).done
        assert env.step([START, START]).done

    def test_observation_layout(self):
        env = EscapeRoom(2, 1)
        obs = env.reset()
        for o in obs:
            assert o.shape == (6,)
            assert o[START] == 1.0 and o[3 + START] == 1.0
        result = env.step([LEVER, DOOR])
        assert result.obs[0][LEVER] == 1.0  # own slot first
        assert result.obs[1][DOOR] == 1.0

    @pytest.mark.parametrize("n,m,expected", [(2, 1, 9.0), (3, 2, 8.0), (5, 3, 7.0)])
    def test_optimal_return(self, n, m, expected):
        assert er_optimal_return(n, m) == expected

    def test_optimal_return_independent_enumeration(self):
        # 3 pullers at -1 each plus one exit at +10
        assert er_optimal_return(5, 3) == 3 * -1.0 + 10.0

    def test_optimal_return_contract(self):
        with pytest.raises(EnvError):
            er_optimal_return(3, 3)

    @pytest.mark.parametrize("n,m", [(2, 1), (3, 2), (4, 2), (5, 3)])
    def test_no_positive_return_without_quota(self, n, m):
        for assignment in product((LEVER, START, DOOR), repeat=n):
            if sum(a == LEVER for a in assignment) >= m:
                continue
            env = EscapeRoom(n, m)
            env.reset()
            assert env.step(list(assignment)).rewards.sum() <= 0.0


class TestAsymmetricEscapeRoom:
    def test_both_stay(self):
        env = AsymmetricEscapeRoom()
        env.reset()
        result = env.step([0, 0])  # A1 stays at start, A2 stays at start
        assert tuple(result.rewards) == (-1.0, 0.0)

    def test_exit_with_lever_held(self):
        env = AsymmetricEscapeRoom()
        env.reset()
        env.step([0, 1])  # A2 moves to the lever (-1)
        result = env.step([1, 1])  # A2 stays at lever, A1 start->door
        assert tuple(result.rewards) == (10.0, 0.0)
        assert result.done

    def test_lever_move_costs_one(self):
        env = AsymmetricEscapeRoom()
        env.reset()
        result = env.step([0, 1])
        assert result.rewards[1] == -1.0

    def test_door_without_lever(self):
        env = AsymmetricEscapeRoom()
        env.reset()
        result = env.step([1, 0])
        assert result.rewards[0] == -1.0
        assert not result.done

    def test_peer_action_embedding(self):
        env = AsymmetricEscapeRoom()
        obs = env.reset()
        amended = env.fill_peer_action(obs[0], 0, 1)
        assert amended[5] == 1.0 and amended[4] == 0.0
        assert env.fill_peer_action(obs[1], 1, 1) is obs[1]


class TestCleanup:
    def make_env(self, seed=0, **overrides):
        params = CleanupParams(**{**vars(CleanupParams.small()), **overrides})
        return Cleanup(params, n_agents=2, rng=np.random.default_rng(seed))

    def test_initial_state(self):
        env = self.make_env()
        env.reset()
        assert env.waste_density() == 1.0
        assert env.apples.sum() == 0
        assert env.current_spawn_probs() == (0.0, 0.0)

    def test_apple_pickup(self):
        env = self.make_env()
        env.reset()
        r, c = env.positions[0]
        env.apples[r + 1, c] = True
        result = env.step([DOWN, STAY])
        assert result.rewards[0] == 1.0
        assert not env.apples[r + 1, c]

    def test_spawn_probability_zero_at_threshold(self):
        env = self.make_env()
        env.reset()
        capacity = env.river_mask.sum()
        target = int(np.ceil(env.params.threshold_depletion * capacity))
        env.waste[:] = False
        env.waste[np.nonzero(env.river_mask)[0][:target], np.nonzero(env.river_mask)[1][:target]] = True
        assert env.waste_density() >= env.params.threshold_depletion
        assert env.current_spawn_probs()[0] == 0.0

    def test_spawn_probability_full_at_zero_waste(self):
        env = self.make_env()
        env.reset()
        env.waste[:] = False
        apple_p, waste_p = env.current_spawn_probs()
        assert apple_p == env.params.apple_respawn
        assert waste_p == env.params.waste_spawn

    def test_spawn_probability_linear(self):
        env = self.make_env()
        env.reset()
        cells = list(zip(*np.nonzero(env.river_mask)))
        env.waste[:] = False
        for cell in cells[: len(cells) // 4]:
            env.waste[cell] = True
        d = env.waste_density()
        expected = env.params.apple_respawn * (1.0 - d / env.params.threshold_depletion)
        assert env.current_spawn_probs()[0] == pytest.approx(expected)

    def test_beam_miss_is_noop(self):
        env = self.make_env(waste_spawn=0.0)
        env.reset()
        env.positions[0] = (3, 4)  # upward beam spans columns 3..5, no river
        waste_before = env.waste.copy()
        result = env.step([CLEAN, STAY])
        assert result.info["beam_fired"][0]
        assert result.info["beam_hits"][0] == 0
        np.testing.assert_array_equal(env.waste, waste_before)

    def test_beam_clears_waste(self):
        env = self.make_env()
        env.reset()
        env.positions[0] = (5, 0)
        result = env.step([CLEAN, STAY])
        assert result.info["beam_hits"][0] > 0
        assert env.waste_density() < 1.0

    def test_waste_nonincreasing_under_cleaning_only(self):
        # respawn disabled so the claim isolates the beam's effect
        env = self.make_env(waste_spawn=0.0)
        env.reset()
        env.positions[0] = (5, 0)
        env.positions[1] = (6, 4)
        last = env.waste_density()
        for _ in range(10):
            env.step([CLEAN, CLEAN])
            assert env.waste_density() <= last
            last = env.waste_density()

    def test_apples_collected_bounded_by_spawned(self, rng):
        env = self.make_env(seed=3)
        env.reset()
        env.positions[0] = (5, 0)
        done = False
        while not done:
            actions = [CLEAN, int(rng.integers(6))]
            done = env.step(actions).done
        assert env.total_apples_collected <= env.total_apples_spawned

    def test_determinism_given_seed(self):
        actions = [[CLEAN, RIGHT], [DOWN, UP], [LEFT, CLEAN]] * 5
        signatures = []
        for _ in range(2):
            env = self.make_env(seed=11)
            env.reset()
            env.positions[0] = (5, 0)
            for a in actions:
                env.step(a)
            signatures.append(env.state_signature())
        assert signatures[0] == signatures[1]

    def test_movement_conflicts_block(self):
        env = self.make_env()
        env.reset()
        env.positions[0] = (3, 2)
        env.positions[1] = (3, 3)
        env.step([RIGHT, LEFT])
        assert len(set(env.positions)) == 2  # never stacked

    def test_observation_channels(self):
        env = self.make_env()
        obs = env.reset()
        size = env.height * env.width
        assert obs[0].shape == (5 * size,)
        chans = obs[0].reshape(5, env.height, env.width)
        np.testing.assert_array_equal(chans[1], env.waste)
        np.testing.assert_array_equal(chans[2], env.river_mask)
        assert chans[4][env.positions[0]] == 1.0
        assert chans[3][env.positions[1]] == 1.0


def test_trace_recorder_roundtrip():
    buf = io.StringIO()
    env = TraceRecorder(EscapeRoom(2, 1), buf)
    env.reset()
    env.step([START, LEVER])
    env.step([DOOR, LEVER])
    buf.seek(0)
    lines = read_trace(buf)
    assert len(lines) == 2
    assert set(lines[0]) == {"state", "actions", "rewards"}
    assert lines[0]["rewards"] == [0.0, -1.0]
    assert lines[1]["actions"] == [DOOR, LEVER]
    assert lines[1]["rewards"] == [10.0, 0.0]  # staying at the lever is free
    assert isinstance(lines[0]["state"], str) and len(lines[0]["state"]) == 40
