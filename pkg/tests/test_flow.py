import numpy as np
import pytest
from scipy.integrate import solve_ivp

from beltrami.catalog import get_example
from beltrami.fields import VectorField
from beltrami.flow import Streamline, StepControl, evolve_observable, invariant_drift, trace_streamline

FIELDS = ["b0", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8"]
TIGHT = StepControl(rtol=1e-10, atol=1e-10)


def test_b0_trace_stays_in_plane():
    e = get_example("b0")
    s = trace_streamline(e.field, (1, 0, 0), 10, TIGHT, triple=e.triple)
    pts = s.as_array()
    assert np.all(pts[:, 2] == 0)
    assert np.allclose(pts[-1], [1, 10, 0], atol=1e-12)
    assert np.allclose(s.L_theta_values, 1.0, atol=1e-14)


def test_constant_field():
    s = trace_streamline(VectorField(["0", "0", "1"]), (0, 0, 0), 2)
    assert np.allclose(s.points[-1], (0, 0, 2), atol=1e-14)
    assert s.times[-1] == 2 and s.status == "completed"


def test_ex5_drift_from_origin():
    e = get_example("ex5")
    s = trace_streamline(e.field, (0, 0, 0), 5, TIGHT, triple=e.triple)
    d = invariant_drift(s)
    assert d["theta_drift"] <= 1e-9 and d["L_drift"] <= 1e-9


def test_streamline_bookkeeping():
    e = get_example("ex1")
    s = trace_streamline(e.field, (1, 0.2, 0.1), 3, TIGHT, triple=e.triple)
    assert np.all(np.diff(s.times) > 0)
    assert len(s.times) == len(s.points) == len(s.theta_values) == len(s.L_theta_values)
    assert s.step_stats["accepted"] == len(s.times) - 1


def test_zero_length_trace():
    e = get_example("b0")
    s = trace_streamline(e.field, (0, 0, 0), 0.0, triple=e.triple)
    assert invariant_drift(s) == {"theta_drift": 0.0, "L_drift": 0.0}
    assert invariant_drift(Streamline([0.0], [(0, 0, 0)])) == {"theta_drift": 0.0, "L_drift": 0.0}


def test_drift_needs_invariants():
    s = trace_streamline(get_example("b0").field, (0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        invariant_drift(s)


@pytest.mark.parametrize("eid", FIELDS)
def test_invariants_conserved(eid):
    e = get_example(eid)
    for x0 in e.trace_seeds(5):
        s = trace_streamline(e.field, x0, 20, TIGHT, triple=e.triple, guard=e.trace_guard)
        d = invariant_drift(s)
        assert d["theta_drift"] <= 1e-6
        assert d["L_drift"] <= 1e-6 * (abs(s.L_theta_values[0]) + 1)


@pytest.mark.parametrize("eid", ["ex1", "ex3", "ex4", "ex8"])
def test_drift_shrinks_with_tolerance(eid):
    e = get_example(eid)
    x0 = e.trace_seeds(1)[0]
    drifts = []
    for rtol in (1e-3, 1e-6, 1e-9):
        s = trace_streamline(e.field, x0, 20, StepControl(rtol=rtol, atol=rtol), triple=e.triple,
                             guard=e.trace_guard)
        d = invariant_drift(s)
        drifts.append(max(d["theta_drift"], d["L_drift"]))
    assert drifts[0] > drifts[1] > drifts[2]


def test_leaving_the_guard_truncates():
    e = get_example("ex8")
    s = trace_streamline(e.field, (0.0, 0.3, 0.0), 50, TIGHT, triple=e.triple, guard=e.trace_guard)
    assert s.status == "guard_exit" and s.truncated
    assert s.times[-1] < 50 and s.as_array()[:, 0].max() <= 1.5


def test_step_budget():
    e = get_example("ex1")
    s = trace_streamline(e.field, (1, 0, 0), 10, StepControl(rtol=1e-12, atol=1e-12, max_steps=5))
    assert s.status == "max_steps"


@pytest.mark.parametrize("eid", ["b0", "ex1", "ex2", "ex5", "ex8"])
def test_time_reversal(eid):
    e = get_example(eid)
    x0 = e.trace_seeds(1)[0]
    back = trace_streamline(e.field, x0, 5, TIGHT, direction=-1, guard=e.trace_guard)
    fwd = trace_streamline(e.field, back.points[-1], back.times[-1], TIGHT, guard=e.trace_guard)
    assert np.max(np.abs(np.array(fwd.points[-1]) - x0)) <= 1e-6


@pytest.mark.parametrize("eid", ["ex1", "ex4", "ex7"])
def test_agrees_with_scipy(eid):
    e = get_example(eid)
    x0 = e.trace_seeds(1)[0]
    s = trace_streamline(e.field, x0, 2, TIGHT, guard=e.trace_guard)
    fast = e.field.fast()
    ref = solve_ivp(lambda t, y: fast(*y), (0, s.times[-1]), x0, method="DOP853", rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(ref.y[:, -1] - s.points[-1])) <= 1e-7


def test_observable_theta_is_constant():
    e = get_example("ex5")
    o = evolve_observable(e.triple.theta, e.triple, e.field, (0.1, 0.2, 0.3), 3, TIGHT)
    assert np.max(np.abs(o.bracket)) <= 1e-14
    assert np.ptp(o.values) <= 1e-12


def test_observable_x_on_b0():
    e = get_example("b0")
    o = evolve_observable("x", e.triple, e.field, (0.1, 0.2, 0.3), 3, TIGHT)
    z = o.streamline.as_array()[:, 2]
    assert np.allclose(o.bracket, np.sin(z), atol=1e-14)
    assert np.median(o.mismatch) <= 1e-9


def test_observable_L_is_constant():
    e = get_example("ex1")
    o = evolve_observable(e.triple.L_theta(), e.triple, e.field, (1.0, 0.3, 0.2), 3, TIGHT)
    assert np.max(np.abs(o.bracket)) <= 1e-12


@pytest.mark.parametrize("eid", FIELDS)
@pytest.mark.parametrize("f", ["x", "y", "z"])
def test_bracket_consistency(eid, f):
    e = get_example(eid)
    x0 = e.trace_seeds(1)[0]
    o = evolve_observable(f, e.triple, e.field, x0, 2, TIGHT)
    assert np.median(o.mismatch / (1 + np.abs(o.values))) <= 10 * TIGHT.rtol
