"""Line-delimited step traces for replay and debugging.

One JSON object per line: the environment's state hash before the step, the
joint action, and the per-agent extrinsic rewards.
"""

from __future__ import annotations

import json

import numpy as np


class TraceRecorder:
    """Wraps an environment and appends one trace line per step."""

    def __init__(self, env, fileobj):
        self.env = env
        self.fileobj = fileobj

    def reset(self):
        return self.env.reset()

    def step(self, actions):
        signature = self.env.state_signature()
        result = self.env.step(actions)
        line = {
            "state": signature,
            "actions": [int(a) for a in np.asarray(actions).ravel()],
            "rewards": [float(r) for r in result.rewards],
        }
        self.fileobj.write(json.dumps(line) + "\n")
        return result

    def __getattr__(self, name):
        return getattr(self.env, name)


def read_trace(fileobj) -> list[dict]:
    return [json.loads(line) for line in fileobj if line.strip()]
