"""Experiment configuration: defaults per environment/algorithm, and the
flat key-value config-file format.

Config files are INI-style text: a ``[run]`` section for the experiment, an
``[agents]`` section whose keys apply to every agent, and optional
``[agent.K]`` sections with per-agent overrides.  Unset keys fall back to
the per-environment defaults below, which reproduce the published
hyperparameter tables for each algorithm.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

ALGOS = ("lio", "lio-dec", "pg", "pg-d", "pg-c", "ac", "ac-d", "ac-c", "exact-lio")
ENVS = ("ipd", "er", "er-asym", "cleanup")


class ConfigError(Exception):
    """Invalid or inconsistent configuration; message names the field."""


@dataclass
class AgentConfig:
    algo: str = "pg"
    alpha_theta: float = 1e-3  # policy learning rate (plain gradient ascent)
    alpha_eta: float = 1e-3  # incentive-function Adam learning rate
    alpha_cost: float = 1e-4  # learning rate of the separate cost Adam
    cost_coef: float = 0.0  # weight of the discounted L1 incentive cost
    alpha_phi: float = 1e-3  # critic Adam learning rate
    entropy_coef: float = 0.0
    r_max: float = 2.0  # sigmoid scale bounding each emitted incentive
    r_give: float = 2.0  # fixed value of the discrete give-reward action
    eps_start: float = 0.5
    eps_end: float = 0.05
    eps_div: float = 1000.0
    policy_hidden: tuple = (64, 32)
    incentive_hidden: tuple = (64, 16)
    critic_hidden: tuple = (64, 64)
    model_lr: float = 0.01  # opponent-model fitting (decentralized mode)
    model_fit_steps: int = 2
    model_buffer: int = 200


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    env: str = "ipd"
    n_agents: int = 2
    m_required: int = 1  # escape room lever quota
    map_size: int = 7  # cleanup
    episodes: int = 1000
    gamma: float = 0.99
    seed: int = 0
    seeds: int = 1
    out: str = "out"
    eval_episodes: int = 5
    checkpoint_every: int = 0  # 0 = final checkpoint only
    exact_alpha: float = 0.01  # exact-dynamics step sizes (exact-lio runs)
    exact_beta: float = 0.01
    exact_gamma: float = 0.9
    agents: list = field(default_factory=list)

    def validate(self) -> None:
        if self.env not in ENVS:
            raise ConfigError(f"run.env: unknown environment {self.env!r}, expected one of {ENVS}")
        if self.episodes < 1:
            raise ConfigError("run.episodes: must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("run.gamma: must be in [0, 1)")
        if self.env == "ipd" and self.n_agents != 2:
            raise ConfigError("run.n_agents: the matrix game is 2-player")
        if self.env == "er-asym" and self.n_agents != 2:
            raise ConfigError("run.n_agents: the asymmetric room is 2-player")
        if self.env == "er" and not self.m_required < self.n_agents:
            raise ConfigError("run.m_required: need M < N")
        if self.env == "cleanup" and self.map_size not in (7, 10):
            raise ConfigError("run.map_size: supported sizes are 7 and 10")
        if len(self.agents) != self.n_agents:
            raise ConfigError(
                f"agents: expected {self.n_agents} agent configs, got {len(self.agents)}"
            )
        for k, a in enumerate(self.agents):
            if a.algo not in ALGOS:
                raise ConfigError(f"agent.{k}.algo: unknown algorithm {a.algo!r}")
            if a.algo == "exact-lio" and self.env != "ipd":
                raise ConfigError(f"agent.{k}.algo: exact-lio runs on the matrix game only")
            if not 0.0 <= a.eps_start <= 1.0 or not 0.0 <= a.eps_end <= 1.0:
                raise ConfigError(f"agent.{k}.eps_start/eps_end: must be in [0, 1]")
            if a.eps_div <= 0:
                raise ConfigError(f"agent.{k}.eps_div: must be positive")
        algos = {a.algo for a in self.agents}
        if "exact-lio" in algos and algos != {"exact-lio"}:
            raise ConfigError("agents: exact-lio cannot be mixed with sampled learners")


def epsilon(cfg: AgentConfig, episode: int) -> float:
    """Linearly decaying exploration lower bound."""
    frac = (cfg.eps_start - cfg.eps_end) / cfg.eps_div
    return max(cfg.eps_end, cfg.eps_start - episode * frac)


# ---------------------------------------------------------------------- #
# per-environment hyperparameter defaults


def default_episodes(env: str) -> int:
    return {"ipd": 60000, "er": 10000, "er-asym": 10000, "cleanup": 10000}[env]


def agent_defaults(env: str, algo: str, n_agents: int = 2, map_size: int = 7) -> AgentConfig:
    """Published table defaults for one agent."""
    if env == "ipd":
        base = AgentConfig(
            algo=algo,
            alpha_theta=1e-3,
            alpha_eta=1e-3,
            cost_coef=0.0,
            entropy_coef=0.1,
            eps_start=1.0,
            eps_end=0.01,
            eps_div=5000.0,
            r_max=3.0,
            r_give=2.0,
            policy_hidden=(16, 8),
            incentive_hidden=(16, 8),
            critic_hidden=(16, 8),
        )
        return base
    if env in ("er", "er-asym"):
        base = AgentConfig(
            algo=algo,
            policy_hidden=(64, 32),
            incentive_hidden=(64, 16),
            critic_hidden=(64, 32),
            r_max=2.0,
            r_give=2.0,
        )
        if algo in ("lio", "lio-dec"):
            return replace(
                base,
                alpha_theta=1e-4,
                alpha_eta=1e-3,
                alpha_cost=1e-4,
                cost_coef=1.0,
                entropy_coef=0.01,
                eps_start=0.5,
                eps_end=0.1 if n_agents <= 2 else 0.3,
                eps_div=1000.0,
            )
        if algo == "pg-c":
            return replace(
                base,
                alpha_theta=1e-3,
                entropy_coef=0.1,
                eps_start=1.0,
                eps_end=0.1,
                eps_div=1000.0,
            )
        return replace(
            base,
            alpha_theta=1e-4,
            entropy_coef=0.01,
            eps_start=0.5,
            eps_end=0.05,
            eps_div=100.0,
        )
    if env == "cleanup":
        big = map_size >= 10
        base = AgentConfig(
            algo=algo,
            policy_hidden=(64, 64),
            incentive_hidden=(64, 64),
            critic_hidden=(64, 64),
            alpha_phi=1e-3,
            entropy_coef=0.1,
            eps_start=0.5,
            eps_end=0.05,
            r_max=2.0,
            r_give=2.0,
        )
        if algo in ("lio", "lio-dec"):
            return replace(
                base,
                alpha_theta=1e-4,
                alpha_eta=1e-3,
                alpha_cost=1e-4,
                cost_coef=1e-4,
                eps_div=1000.0 if big else 100.0,
            )
        if algo == "ac":
            return replace(base, alpha_theta=1e-3, eps_div=5000.0 if big else 100.0)
        return replace(
            base,
            alpha_theta=1e-3 if big else 1e-4,
            eps_div=1000.0 if big else 100.0,
        )
    raise ConfigError(f"run.env: unknown environment {env!r}")


def make_config(env: str, algos: list[str], **run_fields) -> ExperimentConfig:
    """Programmatic constructor with table defaults resolved."""
    n_agents = run_fields.pop("n_agents", len(algos))
    map_size = run_fields.get("map_size", 7)
    overrides = run_fields.pop("agent_overrides", [{}] * len(algos))
    episodes = run_fields.pop("episodes", default_episodes(env))
    cfg = ExperimentConfig(env=env, n_agents=n_agents, episodes=episodes, **run_fields)
    cfg.agents = [
        replace(agent_defaults(env, algo, n_agents, map_size), **overrides[k])
        for k, algo in enumerate(algos)
    ]
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------- #
# config-file parsing

_TUPLE_FIELDS = {"policy_hidden", "incentive_hidden", "critic_hidden"}


def _parse_scalar(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind is tuple:
            return tuple(int(v) for v in raw.replace("(", "").replace(")", "").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from exc
    raise ConfigError(f"{name}: unsupported field type")


_RUN_TYPES = {f.name: f.type for f in fields(ExperimentConfig) if f.name != "agents"}
_AGENT_TYPES = {f.name: f.type for f in fields(AgentConfig)}
_TYPE_MAP = {"str": str, "int": int, "float": float, "tuple": tuple}


def _coerce(section: str, key: str, raw: str, declared: str):
    kind = _TYPE_MAP.get(declared, str)
    return _parse_scalar(f"{section}.{key}", kind, raw)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    if "run" not in parser:
        raise ConfigError("missing [run] section")
    run_raw = dict(parser["run"])
    env = run_raw.get("env")
    if env is None:
        raise ConfigError("run.env: required")
    run_fields = {}
    for key, raw in run_raw.items():
        if key not in _RUN_TYPES:
            raise ConfigError(f"run.{key}: unknown key")
        run_fields[key] = _coerce("run", key, raw, _RUN_TYPES[key])
    run_fields.setdefault("episodes", default_episodes(env) if env in ENVS else 1000)
    n_agents = run_fields.get("n_agents", 2)
    map_size = run_fields.get("map_size", 7)

    shared = dict(parser["agents"]) if "agents" in parser else {}
    agent_sections = {}
    for section in parser.sections():
        if section.startswith("agent."):
            try:
                idx = int(section.split(".", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"section [{section}]: agent index must be an integer") from exc
            if not 0 <= idx < n_agents:
                raise ConfigError(f"section [{section}]: index out of range for n_agents={n_agents}")
            agent_sections[idx] = dict(parser[section])

    agents = []
    for k in range(n_agents):
        raw = dict(shared)
        raw.update(agent_sections.get(k, {}))
        algo = raw.get("algo", "pg")
        if env not in ENVS:
            raise ConfigError(f"run.env: unknown environment {env!r}, expected one of {ENVS}")
        cfg = agent_defaults(env, algo, n_agents, map_size)
        for key, value in raw.items():
            if key not in _AGENT_TYPES:
                raise ConfigError(f"agent.{k}.{key}: unknown key")
            cfg = replace(cfg, **{key: _coerce(f"agent.{k}", key, value, _AGENT_TYPES[key])})
        agents.append(cfg)

    config = ExperimentConfig(**run_fields, agents=agents)
    config.validate()
    return config


def config_snapshot(config: ExperimentConfig) -> str:
    """Serialize a resolved config back to the file format."""
    lines = ["[run]"]
    for f in fields(ExperimentConfig):
        if f.name == "agents":
            continue
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {value}")
    for k, agent in enumerate(config.agents):
        lines.append("")
        lines.append(f"[agent.{k}]")
        for f in fields(AgentConfig):
            value = getattr(agent, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
