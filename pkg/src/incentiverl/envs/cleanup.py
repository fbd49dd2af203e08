"""Waste-cleanup public-goods gridworld.

A square map with a river strip on the left whose cells hold waste and an
apple patch on the right.  Apples pay +1 and respawn per empty patch cell
with probability ``apple_respawn * max(0, 1 - density / threshold_depletion)``
where density is the occupied fraction of the waste region; at or above the
depletion threshold the rate is exactly zero.  Waste respawns per empty
river cell with its own probability while density is below the depletion
threshold.  Agents permanently face up, so the cleaning beam (length 5,
width 3) projects toward row 0 and only hits waste when the agent stands in
or near the river columns.  Episodes start with the river fully wasted and
no apples, and run a fixed number of steps.

The exact cell split between river, open ground, and apple patch is this
implementation's choice (river width 2 on 7x7 and 3 on 10x10): only the
region structure - river left, apples right - is fixed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .base import EnvError, StepResult

UP, DOWN, LEFT, RIGHT, STAY, CLEAN = range(6)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
BEAM_LENGTH = 5
BEAM_WIDTH = 3


@dataclass(frozen=True)
class CleanupParams:
    size: int = 7
    apple_respawn: float = 0.5
    threshold_depletion: float = 0.6
    threshold_restoration: float = 0.0
    waste_spawn: float = 0.5
    max_steps: int = 50

    @staticmethod
    def small() -> "CleanupParams":
        return CleanupParams(size=7, apple_respawn=0.5, threshold_depletion=0.6)

    @staticmethod
    def large() -> "CleanupParams":
        return CleanupParams(size=10, apple_respawn=0.3, threshold_depletion=0.4)


class Cleanup:
    n_actions = 6

    def __init__(self, params: CleanupParams | None = None, n_agents: int = 2, rng=None):
        self.params = params or CleanupParams.small()
        self.n_agents = n_agents
        self.rng = rng if rng is not None else np.random.default_rng(0)
        size = self.params.size
        self.height = self.width = size
        self.river_width = 2 if size <= 8 else 3
        self.apple_width = 2 if size <= 8 else 3
        self.river_mask = np.zeros((size, size), dtype=bool)
        self.river_mask[:, : self.river_width] = True
        self.apple_mask = np.zeros((size, size), dtype=bool)
        self.apple_mask[:, size - self.apple_width :] = True
        mid_cols = list(range(self.river_width, size - self.apple_width))
        if n_agents > len(mid_cols) * size:
            raise EnvError("too many agents for the map")
        self._starts = [
            (size // 2 + (i // len(mid_cols)), mid_cols[i % len(mid_cols)])
            for i in range(n_agents)
        ]
        self.obs_dim = 5 * size * size
        self.waste = None
        self.apples = None
        self.positions = None
        self._step = None
        self._done = True
        self.total_apples_spawned = 0
        self.total_apples_collected = 0

    # ------------------------------------------------------------------ #

    def reset(self) -> list[np.ndarray]:
        self.waste = self.river_mask.copy()
        self.apples = np.zeros((self.height, self.width), dtype=bool)
        self.positions = [tuple(p) for p in self._starts]
        self._step = 0
        self._done = False
        self.total_apples_spawned = 0
        self.total_apples_collected = 0
        return self._observations()

    def waste_density(self) -> float:
        return float(self.waste.sum()) / float(self.river_mask.sum())

    def current_spawn_probs(self) -> tuple[float, float]:
        """(apple spawn prob per cell, waste spawn prob per cell) now."""
        d = self.waste_density()
        p = self.params
        if d >= p.threshold_depletion:
            return 0.0, 0.0
        if d <= p.threshold_restoration:
            apple_p = p.apple_respawn
        else:
            apple_p = p.apple_respawn * (
                1.0 - (d - p.threshold_restoration) / (p.threshold_depletion - p.threshold_restoration)
            )
        return apple_p, p.waste_spawn

    def beam_footprint(self, row: int, col: int) -> list[tuple[int, int]]:
        cells = []
        for r in range(max(0, row - BEAM_LENGTH), row):
            for c in range(max(0, col - (BEAM_WIDTH // 2)), min(self.width, col + BEAM_WIDTH // 2 + 1)):
                cells.append((r, c))
        return cells

    def step(self, actions) -> StepResult:
        if self._done:
            raise EnvError("step() on a finished or unreset episode")
        actions = [int(a) for a in actions]
        if len(actions) != self.n_agents or any(a < 0 or a >= 6 for a in actions):
            raise EnvError(f"actions must be in [0, 6), got {actions}")
        rewards = np.zeros(self.n_agents)
        occupied = {pos: i for i, pos in enumerate(self.positions)}

        # movement, processed in a random order so conflicts are unbiased
        for i in self.rng.permutation(self.n_agents):
            a = actions[i]
            if a not in _MOVES:
                continue
            dr, dc = _MOVES[a]
            r, c = self.positions[i]
            nr, nc = min(max(r + dr, 0), self.height - 1), min(max(c + dc, 0), self.width - 1)
            if (nr, nc) != (r, c) and (nr, nc) not in occupied:
                del occupied[(r, c)]
                occupied[(nr, nc)] = i
                self.positions[i] = (nr, nc)
                if self.apples[nr, nc]:
                    self.apples[nr, nc] = False
                    rewards[i] += 1.0
                    self.total_apples_collected += 1

        # cleaning beams
        beam_fired = np.zeros(self.n_agents, dtype=bool)
        beam_hits = np.zeros(self.n_agents, dtype=int)
        for i in range(self.n_agents):
            if actions[i] == CLEAN:
                beam_fired[i] = True
                for cell in self.beam_footprint(*self.positions[i]):
                    if self.waste[cell]:
                        self.waste[cell] = False
                        beam_hits[i] += 1

        # respawn apples and waste (never under an agent)
        apple_p, waste_p = self.current_spawn_probs()
        agent_cells = set(self.positions)
        if apple_p > 0.0:
            for r, c in zip(*np.nonzero(self.apple_mask & ~self.apples)):
                if (r, c) not in agent_cells and self.rng.random() < apple_p:
                    self.apples[r, c] = True
                    self.total_apples_spawned += 1
        if waste_p > 0.0:
            for r, c in zip(*np.nonzero(self.river_mask & ~self.waste)):
                if (r, c) not in agent_cells and self.rng.random() < waste_p:
                    self.waste[r, c] = True

        self._step += 1
        self._done = self._step >= self.params.max_steps
        info = {
            "beam_fired": beam_fired,
            "beam_hits": beam_hits,
            "waste_density": self.waste_density(),
            "in_river": np.array(
                [self.river_mask[pos] for pos in self.positions], dtype=bool
            ),
        }
        return StepResult(self._observations(), rewards, self._done, info=info)

    def _observations(self) -> list[np.ndarray]:
        base = np.zeros((3, self.height, self.width))
        base[0] = self.apples
        base[1] = self.waste
        base[2] = self.river_mask
        obs = []
        for i in range(self.n_agents):
            chans = np.zeros((5, self.height, self.width))
            chans[:3] = base
            for k, pos in enumerate(self.positions):
                chans[3 if k != i else 4][pos] = 1.0
            obs.append(chans.reshape(-1))
        return obs

    def state_signature(self) -> str:
        raw = b"|".join(
            [
                b"cleanup",
                str(self._step).encode(),
                self.waste.tobytes(),
                self.apples.tobytes(),
                str(self.positions).encode(),
            ]
        )
        return hashlib.sha1(raw).hexdigest()
