"""Append-only experiment log: line-delimited records plus a summary CSV."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class MetricsLog:
    run_id: str
    seed: int
    records: list = field(default_factory=list)

    def append(self, record_type: str, **fields) -> dict:
        record = {"type": record_type, "run_id": self.run_id, "seed": self.seed}
        record.update(fields)
        self.records.append(record)
        return record

    def episode(self, episode: int, **fields) -> dict:
        return self.append("episode", episode=episode, **fields)

    def episodes(self, kind: str | None = None) -> list[dict]:
        out = [r for r in self.records if r["type"] == "episode"]
        if kind is not None:
            out = [r for r in out if r.get("kind") == kind]
        return out

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for record in self.records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def write_summary_csv(self, path) -> None:
        episodes = self.episodes()
        if not episodes:
            return
        n_agents = len(episodes[0]["returns"])
        header = ["episode", "collective_return"] + [f"agent{i}_return" for i in range(n_agents)]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in episodes:
                row = [str(r["episode"]), f"{r['collective_return']:.10g}"]
                row += [f"{v:.10g}" for v in r["returns"]]
                fh.write(",".join(row) + "\n")

    @staticmethod
    def read_jsonl(path) -> "MetricsLog":
        records = []
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        if not records:
            raise ValueError(f"empty metrics file {path!r}")
        log = MetricsLog(records[0]["run_id"], records[0]["seed"])
        log.records = records
        return log
