"""Shared fixtures; puts src/ on the import path like src/greenlb.py does."""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from cluster_model import PowerModel, PowerState  # noqa: E402
from policy_dsl import ServerSnapshot  # noqa: E402

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


class ScriptedDraws:
    """Stands in for a random stream, returning fixed values in order."""

    def __init__(self, values):
        self.values = list(values)
        self.calls = 0

    def random(self):
        value = self.values[self.calls]
        self.calls += 1
        return value


@pytest.fixture
def power():
    return PowerModel()


@pytest.fixture
def make_snapshots():
    """Build snapshots from ``(queue_size, state)`` pairs, ids in list order."""
    def build(servers, params=None, power=None):
        power = power or PowerModel()
        return [
            ServerSnapshot(
                id=i, num_servers=len(servers), queue_size=qs,
                power_state=state if isinstance(state, PowerState) else PowerState.parse(state),
                power_on=power.p_on, power_sleep=power.p_sleep,
                power_suspend=power.p_suspend, power_wakeup=power.p_wakeup,
                time_wakeup=power.t_wakeup, time_suspend=power.t_suspend,
                timeout_time=power.timeout, design_params=dict(params or {"q": 5}),
            )
            for i, (qs, state) in enumerate(servers)
        ]
    return build


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def scripted_draws():
    return ScriptedDraws
