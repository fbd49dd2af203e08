"""Experiment orchestration.

One training iteration for incentive-learning agents follows the
online-cross-validation protocol: roll a trajectory tau under current
parameters, stage every agent's policy update, roll a second trajectory
tau_hat under the updated policies, update incentive functions on
(tau, tau_hat), then commit.  Baseline agents run the ordinary
one-trajectory loop.  Every episode appends one record to the metrics log,
and every incentive iteration appends a pairing record naming the episodes
it consumed, so the ordering contract is checkable after the fact.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import exact_ipd
from .agents import (
    AcAgent,
    AccAgent,
    AcdAgent,
    LioAcAgent,
    LioPgAgent,
    PgAgent,
    PgcAgent,
    PgdAgent,
    Trajectory,
    beam_action_encoder,
    load_checkpoint,
    onehot_action_encoder,
    save_checkpoint,
)
from .config import AgentConfig, ExperimentConfig, epsilon
from .envs import (
    AsymmetricEscapeRoom,
    Cleanup,
    CleanupParams,
    DOOR,
    EscapeRoom,
    IteratedPrisonersDilemma,
    LEVER,
)
from .envs.cleanup import CLEAN
from .metrics import MetricsLog


def build_env(config: ExperimentConfig, rng: np.random.Generator):
    if config.env == "ipd":
        return IteratedPrisonersDilemma()
    if config.env == "er":
        return EscapeRoom(config.n_agents, config.m_required)
    if config.env == "er-asym":
        return AsymmetricEscapeRoom()
    if config.env == "cleanup":
        params = CleanupParams.small() if config.map_size == 7 else CleanupParams.large()
        return Cleanup(params, config.n_agents, rng)
    raise ValueError(f"unknown env {config.env!r}")


def build_encoder(config: ExperimentConfig, env):
    if config.env == "cleanup":
        return beam_action_encoder(CLEAN, config.n_agents)
    return onehot_action_encoder(env.n_actions, config.n_agents)


def _base_obs_dims(env) -> list[int]:
    dims = getattr(env, "obs_dims", None)
    if dims is not None:
        return list(dims)
    return [env.obs_dim] * env.n_agents


_AGENT_CLASSES = {
    "pg": PgAgent,
    "pg-d": PgdAgent,
    "pg-c": PgcAgent,
    "ac": AcAgent,
    "ac-d": AcdAgent,
    "ac-c": AccAgent,
}


def make_agent(config: ExperimentConfig, env, index: int, cfg: AgentConfig, rng):
    base_dim = _base_obs_dims(env)[index]
    encoder = build_encoder(config, env)
    observes_given = config.env in ("er", "er-asym")
    obs_dim = base_dim
    gives = cfg.algo in ("lio", "lio-dec", "pg-d", "pg-c", "ac-d", "ac-c")
    if observes_given and gives:
        obs_dim += config.n_agents
    if cfg.algo in ("lio", "lio-dec"):
        cls = LioAcAgent if config.env == "cleanup" else LioPgAgent
        agent = cls(
            index,
            config.n_agents,
            obs_dim,
            env.n_actions,
            cfg,
            rng,
            encoder,
            decentralized=cfg.algo == "lio-dec",
        )
    else:
        cls = _AGENT_CLASSES[cfg.algo]
        agent = cls(index, config.n_agents, obs_dim, env.n_actions, cfg, rng)
    agent.observes_given = observes_given and gives
    return agent


def make_agents(config: ExperimentConfig, env, rng: np.random.Generator):
    streams = rng.spawn(config.n_agents)
    return [
        make_agent(config, env, i, cfg, streams[i])
        for i, cfg in enumerate(config.agents)
    ]


# ---------------------------------------------------------------------- #
# rollout


def rollout(env, agents, eps, rng, episode_index: int) -> Trajectory:
    n = len(agents)
    base_obs = env.reset()
    for agent in agents:
        agent.begin_episode()
    obs_rows = [[] for _ in range(n)]
    actions_rows, env_reward_rows, inc_rows, cost_rows, total_rows = [], [], [], [], []
    inc_input_rows = [[] for _ in range(n)]
    metas_rows, infos = [], []
    order = list(getattr(env, "action_observation_order", range(n)))
    fill = getattr(env, "fill_peer_action", None)
    done = False
    while not done:
        step_obs = [agents[i].policy_obs(base_obs[i]) for i in range(n)]
        actions = [None] * n
        metas = [None] * n
        acted = []
        for i in order:
            o = step_obs[i]
            if fill is not None and len(acted) == 1:
                o = fill(o, i, actions[acted[0]])
                step_obs[i] = o
            actions[i], metas[i] = agents[i].act(o, eps[i], rng)
            acted.append(i)
        inc = np.zeros((n, n))
        for i, agent in enumerate(agents):
            if agent.gives_incentives:
                given, x = agent.incentives_for(step_obs[i], actions, metas[i])
                inc[i] = given
                if x is not None:
                    inc_input_rows[i].append(x)
                agent.note_given(given)
        result = env.step(actions)
        costs = np.array(
            [inc[i].sum() if agents[i].cost_in_reward else 0.0 for i in range(n)]
        )
        totals = result.rewards + inc.sum(axis=0) - costs
        for i in range(n):
            obs_rows[i].append(step_obs[i])
        actions_rows.append(actions)
        env_reward_rows.append(result.rewards)
        inc_rows.append(inc)
        cost_rows.append(costs)
        total_rows.append(totals)
        metas_rows.append(metas)
        infos.append(result.info)
        base_obs = result.obs
        done = result.done
    for i in range(n):
        obs_rows[i].append(agents[i].policy_obs(base_obs[i]))
    return Trajectory(
        episode=episode_index,
        obs=[np.asarray(rows) for rows in obs_rows],
        actions=np.asarray(actions_rows, dtype=np.intp),
        env_rewards=np.asarray(env_reward_rows),
        incentives=np.asarray(inc_rows),
        reward_costs=np.asarray(cost_rows),
        total_rewards=np.asarray(total_rows),
        inc_inputs=[
            np.asarray(rows) if rows else None for rows in inc_input_rows
        ],
        metas=metas_rows,
        infos=infos,
    )


def episode_record(traj: Trajectory, env, n_actions: int) -> dict:
    n = traj.n_agents
    received = traj.received()
    given = traj.given()
    counts = [
        np.bincount(traj.actions[:, i], minlength=n_actions).tolist() for i in range(n)
    ]
    by_action = []
    for i in range(n):
        per = []
        for a in range(n_actions):
            mask = traj.actions[:, i] == a
            per.append([float(received[mask, i].sum()), int(mask.sum())])
        by_action.append(per)
    record = {
        "steps": traj.steps,
        "collective_return": float(traj.env_rewards.sum()),
        "returns": [float(v) for v in traj.env_rewards.sum(axis=0)],
        "total_returns": [float(v) for v in traj.total_rewards.sum(axis=0)],
        "given": [float(v) for v in given.sum(axis=0)],
        "received": [float(v) for v in received.sum(axis=0)],
        "action_counts": counts,
        "received_by_action": by_action,
    }
    if isinstance(env, Cleanup):
        record["beam_fired"] = [
            int(sum(info["beam_fired"][i] for info in traj.infos)) for i in range(n)
        ]
        record["clean_steps"] = [
            int(sum(info["beam_hits"][i] > 0 for info in traj.infos)) for i in range(n)
        ]
        record["river_steps"] = [
            int(sum(info["in_river"][i] for info in traj.infos)) for i in range(n)
        ]
        record["waste_density"] = float(traj.infos[-1]["waste_density"])
    return record


# ---------------------------------------------------------------------- #
# training loops


def run_experiment(config: ExperimentConfig, seed: int | None = None, out_dir=None):
    """Train one seed; returns (MetricsLog, status) with status "ok" or
    "diverged".  When out_dir is given, writes config.snapshot,
    metrics.jsonl, summary.csv and final checkpoints there."""
    config.validate()
    seed = config.seed if seed is None else seed
    log = MetricsLog(f"{config.name}-s{seed}", seed)
    env_rng, init_rng, run_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )
    env = build_env(config, env_rng)

    if config.agents[0].algo == "exact-lio":
        _run_exact(config, log)
        if out_dir is not None:
            _write_outputs(config, log, Path(out_dir), agents=None)
        return log, "ok"

    agents = make_agents(config, env, init_rng)
    status = _train(config, env, agents, run_rng, log)
    labels = classify_agents(config, env, agents, run_rng)
    if labels is not None:
        log.append("classification", labels=labels)
    log.append(
        "final",
        status=status,
        clip_events=[getattr(a, "policy").clip_events if hasattr(a, "policy") else 0 for a in agents],
    )
    if out_dir is not None:
        _write_outputs(config, log, Path(out_dir), agents)
    return log, status


def _train(config, env, agents, rng, log) -> str:
    n = len(agents)
    lio_mode = any(a.algo in ("lio", "lio-dec") for a in agents)
    episode = 0
    iteration = 0
    while episode < config.episodes:
        eps = [epsilon(config.agents[i], episode) for i in range(n)]
        traj = rollout(env, agents, eps, rng, episode)
        log.episode(episode, kind="train", eps=eps, **episode_record(traj, env, env.n_actions))
        episode += 1
        try:
            pendings = [a.policy_update(traj, config.gamma) for a in agents]
            if lio_mode:
                for a in agents:
                    if a.algo == "lio-dec":
                        a.observe_opponents(traj)
                for a in agents:
                    a.apply_policy_update()
                eps = [epsilon(config.agents[i], episode) for i in range(n)]
                traj_hat = rollout(env, agents, eps, rng, episode)
                log.episode(
                    episode, kind="cross", eps=eps, **episode_record(traj_hat, env, env.n_actions)
                )
                episode += 1
                for a in agents:
                    if a.algo in ("lio", "lio-dec"):
                        a.incentive_update(traj, traj_hat, pendings, config.gamma)
                for a in agents:
                    a.apply_incentive_update()
                for a in agents:
                    if a.algo == "lio-dec":
                        a.observe_opponents(traj_hat)
                log.append(
                    "iteration",
                    iteration=iteration,
                    tau_episode=traj.episode,
                    tau_hat_episode=traj_hat.episode,
                    incentive_update_consumed=traj_hat.episode,
                )
            else:
                for a in agents:
                    a.apply_policy_update()
        except FloatingPointError as exc:
            log.append("failure", episode=episode, error=str(exc))
            return "diverged"
        if any(a.diverged() for a in agents):
            log.append("failure", episode=episode, error="non-finite parameters")
            return "diverged"
        iteration += 1
    return "ok"


def _run_exact(config: ExperimentConfig, log: MetricsLog) -> None:
    state = exact_ipd.ExactState.make(
        0.5, 0.5, alpha=config.exact_alpha, beta=config.exact_beta, gamma=config.exact_gamma
    )
    base1 = np.array([-1.0, -3.0, 0.0, -2.0])
    base2 = np.array([-1.0, 0.0, -3.0, -2.0])
    for k in range(config.episodes):
        new_theta = exact_ipd.exact_policy_step(state).theta
        new_eta = exact_ipd.exact_incentive_step(state).eta
        state.theta, state.eta = new_theta, new_eta
        p = exact_ipd.joint_distribution(state.theta)
        log.episode(
            k,
            kind="exact",
            steps=1,
            collective_return=float(p @ (base1 + base2)),
            returns=[float(p @ base1), float(p @ base2)],
            theta=[float(v) for v in state.theta],
            eta=[[float(v) for v in row] for row in state.eta],
        )
    log.append("exact_verdict", converged=exact_ipd.cc_converged(state))


# ---------------------------------------------------------------------- #
# post-hoc analysis


def classify_agents(config, env, agents, rng):
    """End-of-training labels: lever-favoring Cooperators vs door-favoring
    Winners in the escape room; majority-cleaning Cleaners vs Harvesters in
    the cleanup game."""
    if config.env == "er":
        obs = env.reset()
        labels = []
        for i, agent in enumerate(agents):
            p = agent.action_probs(agent.policy_obs(obs[i]))
            if p[LEVER] > p[DOOR]:
                labels.append("Cooperator")
            elif p[DOOR] > p[LEVER]:
                labels.append("Winner")
            else:
                labels.append("Undetermined")
        return labels
    if config.env == "cleanup":
        clean_steps = np.zeros(len(agents))
        total_steps = 0
        for _ in range(config.eval_episodes):
            traj = rollout(env, agents, [0.0] * len(agents), rng, -1)
            total_steps += traj.steps
            for i in range(len(agents)):
                clean_steps[i] += sum(info["beam_hits"][i] > 0 for info in traj.infos)
        labels = []
        for i in range(len(agents)):
            if 2 * clean_steps[i] > total_steps:
                labels.append("Cleaner")
            elif 2 * clean_steps[i] == total_steps:
                labels.append("Undetermined")
            else:
                labels.append("Harvester")
        return labels
    return None


BEAM_ROW = 5  # standing here, the upward beam reaches rows 0..4


class ScriptedProbe:
    """Deterministic cleanup opponents: R moves in the river without
    cleaning, C cleans successfully, M fires the beam where it misses."""

    def __init__(self, kind: str):
        if kind not in ("R", "C", "M"):
            raise ValueError(f"unknown probe kind {kind!r}")
        self.kind = kind
        self._down = True

    def reset(self):
        self._down = True

    def action(self, env: Cleanup, index: int) -> int:
        from .envs.cleanup import DOWN, LEFT, UP

        row, col = env.positions[index]
        if self.kind == "M":
            return CLEAN
        if self.kind == "C":
            if row < min(BEAM_ROW, env.height - 1):
                return DOWN
            if col > 0:
                return LEFT
            return CLEAN
        # R: walk along the bottom row into the river, then pace up and
        # down without ever firing
        if col >= env.river_width:
            return DOWN if row < env.height - 1 else LEFT
        if row >= env.height - 1:
            self._down = False
        elif row <= 0:
            self._down = True
        return DOWN if self._down else UP


def probe_incentives(agent, config: ExperimentConfig, kinds=("R", "C", "M"), episodes: int = 20, rng=None):
    """Average per-episode incentives the trained agent pays each scripted
    opponent over evaluation episodes; returns {kind: (mean, stderr)}."""
    rng = rng if rng is not None else np.random.default_rng(0)
    results = {}
    probe_index = 1 - agent.index if config.n_agents == 2 else (agent.index + 1) % config.n_agents
    for kind in kinds:
        totals = []
        for _ in range(episodes):
            env = build_env(config, rng.spawn(1)[0])
            probe = ScriptedProbe(kind)
            probe.reset()
            obs = env.reset()
            agent.begin_episode()
            total = 0.0
            done = False
            while not done:
                actions = [0] * config.n_agents
                actions[probe_index] = probe.action(env, probe_index)
                o = agent.policy_obs(obs[agent.index])
                actions[agent.index], meta = agent.act(o, 0.0, rng)
                given, _ = agent.incentives_for(o, actions, meta)
                agent.note_given(given)
                total += float(given[probe_index])
                result = env.step(actions)
                obs = result.obs
                done = result.done
            totals.append(total)
        totals = np.asarray(totals)
        stderr = totals.std(ddof=1) / np.sqrt(len(totals)) if len(totals) > 1 else 0.0
        results[kind] = (float(totals.mean()), float(stderr))
    return results


# ---------------------------------------------------------------------- #
# persistence and sweeps


def _write_outputs(config, log, out_dir: Path, agents):
    from .config import config_snapshot

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.snapshot").write_text(config_snapshot(config))
    log.write_jsonl(out_dir / "metrics.jsonl")
    log.write_summary_csv(out_dir / "summary.csv")
    if agents:
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for i, agent in enumerate(agents):
            save_agent_checkpoint(ckpt_dir / f"agent{i}.npz", config, agent)


def save_agent_checkpoint(path, config: ExperimentConfig, agent) -> None:
    meta = {
        "env": config.env,
        "n_agents": config.n_agents,
        "map_size": config.map_size,
        "m_required": config.m_required,
        "index": agent.index,
        "algo": agent.algo,
        "agent_cfg": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in vars(config.agents[agent.index]).items()
        },
    }
    save_checkpoint(path, agent.algo, agent.state_arrays(), meta)


def agent_from_checkpoint(path):
    """Rebuild an agent (and its experiment config) from a checkpoint."""
    algo, arrays, meta = load_checkpoint(path)
    agent_cfg = AgentConfig(
        **{
            k: (tuple(v) if isinstance(v, list) else v)
            for k, v in meta["agent_cfg"].items()
        }
    )
    config = ExperimentConfig(
        env=meta["env"],
        n_agents=meta["n_agents"],
        map_size=meta["map_size"],
        m_required=meta["m_required"],
        episodes=1,
        agents=[agent_cfg] * meta["n_agents"],
    )
    env = build_env(config, np.random.default_rng(0))
    agent = make_agent(config, env, meta["index"], agent_cfg, np.random.default_rng(0))
    agent.load_state_arrays(arrays)
    return agent, config


def final_collective(log: MetricsLog, window: int) -> float:
    records = log.episodes(kind=None)
    tail = records[-window:]
    return float(np.mean([r["collective_return"] for r in tail]))


def _sweep_worker(args):
    config, seed, out_root = args
    out_dir = None if out_root is None else Path(out_root) / config.name / str(seed)
    log, status = run_experiment(config, seed=seed, out_dir=out_dir)
    window = max(1, min(500, config.episodes // 10))
    return {
        "seed": seed,
        "status": status,
        "final_collective": final_collective(log, window),
    }


def sweep(config: ExperimentConfig, out_root=None, max_workers: int | None = None, parallel: bool = True):
    """Run config.seeds seeds (seed, seed+1, ...); parallel across processes.

    Each worker owns its environment, agents and log; only the per-seed
    summaries are collected in the parent.
    """
    seeds = [config.seed + k for k in range(config.seeds)]
    jobs = [(config, s, out_root) for s in seeds]
    if not parallel or len(seeds) == 1:
        return [_sweep_worker(j) for j in jobs]
    workers = max_workers or min(len(seeds), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, jobs))
