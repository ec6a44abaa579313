import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navgap.analysis import TrialRecord, compounding_cost, empirical_error, spl, success_rate

trial = st.builds(TrialRecord, st.booleans(), st.floats(0.01, 100.0), st.floats(0.0, 200.0))


def test_success_rate_examples():
    assert success_rate([TrialRecord(True, 1, 1)] * 3) == 1.0
    assert success_rate([TrialRecord(s, 1, 1) for s in (True, False, True, False)]) == 0.5
    with pytest.raises(ValueError):
        success_rate([])


def test_spl_examples():
    assert spl([TrialRecord(True, 4.0, 4.0), TrialRecord(True, 2.5, 2.5)]) == 1.0
    assert spl([TrialRecord(True, 10, 10), TrialRecord(True, 10, 20)]) == 0.75
    # a path shorter than l* (goal reached inside the success radius) counts as optimal
    assert spl([TrialRecord(True, 10, 8)]) == 1.0
    assert spl([TrialRecord(False, 10, 10)]) == 0.0


def test_spl_input_validation():
    with pytest.raises(ValueError):
        spl([TrialRecord(True, 0.0, 1.0)])
    with pytest.raises(ValueError):
        TrialRecord(True, 1.0, -1.0)
    with pytest.raises(ValueError):
        spl([])


@given(st.lists(trial, min_size=1, max_size=30))
def test_spl_le_sr(trials):
    assert spl(trials) <= success_rate(trials) + 1e-15


def test_empirical_error_examples():
    labeled = [(np.array([k]), k % 3) for k in range(30)]
    assert empirical_error(lambda x: int(x[0]) % 3, labeled) == 0.0
    assert empirical_error(lambda x: 0, labeled) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        empirical_error(lambda x: 0, [])


def test_expert_scored_with_itself():
    from navgap.expert import generate_demos, plan
    from navgap.simulator import SensorSpec
    from navgap.worldgen import WorldGenSpec, generate_world, get_theme
    w = generate_world(WorldGenSpec(6.0, 6.0, obstacle_density=0.2), 0)
    ds = generate_demos([w], [get_theme("sim")], 3, SensorSpec(4, math.pi / 2, 1.0), seed=1)
    labeled = [(k, int(ds.action[k])) for k in range(len(ds))]

    def expert(k):
        pose, goal, _, _ = ds.sample(k)
        return plan(w, pose, goal).actions[0]

    assert empirical_error(expert, labeled) == 0.0


def test_compounding_cost():
    assert compounding_cost(50, 0.0) == 0.0
    assert compounding_cost(1, 0.3) == 0.3
    assert compounding_cost(200, 0.01) == 400.0
    with pytest.raises(ValueError):
        compounding_cost(0, 0.1)
    with pytest.raises(ValueError):
        compounding_cost(5, -0.1)
