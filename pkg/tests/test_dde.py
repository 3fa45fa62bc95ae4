import math

import numpy as np
import pytest

from pysymde import Constant, InputError, PastUnderflow, system, t, y
from pysymde.anchors import constant_past
from pysymde.dde import DdeStepper, discontinuity_times
from pysymde.lowering import lower
from pysymde.ode import Tolerances
from .fixtures import sunflower_spec

def delayed_decay() -> DdeStepper:
    """M{y'(t) = -y(t-1)} with a constant past 1: M{y = 1 - t} on M{[0, 1]}."""
    exe = lower(system([-y(0, t - 1)]))
    return DdeStepper(exe, constant_past([1.0], 0.0, 1.0), 1.0,
                      tolerances=Tolerances(atol=1e-10, rtol=1e-10))

def test_discontinuity_times() -> None:
    assert discontinuity_times(0.0, [40.0]) == [40.0, 80.0, 120.0]
    assert discontinuity_times(10.0, [1.0, 1.5]) == [11.0, 11.5, 12.0, 12.5, 13.0, 13.5, 14.0, 14.5]
    assert discontinuity_times(0.0, [Constant(2.0)], order=1) == [2.0]
    assert discontinuity_times(0.0, []) == []
    with pytest.raises(InputError):
        discontinuity_times(0.0, [-1.0])
    with pytest.raises(InputError):
        discontinuity_times(0.0, [y(0)])

def test_method_of_steps_solution() -> None:
    stepper = delayed_decay()
    stops = discontinuity_times(0.0, [1.0])
    assert abs(stepper.integrate_to(0.5, stops)[0] - 0.5) < 1e-6
    assert abs(stepper.integrate_to(1.0, stops)[0]) < 1e-6
    assert abs(stepper.integrate_to(1.5, stops)[0] + 0.375) < 1e-6
    assert abs(stepper.integrate_to(2.0, stops)[0] + 0.5) < 1e-6

def test_step_on_discontinuities() -> None:
    stepper = delayed_decay()
    assert stepper.step_on_discontinuities([1.0]) == [1.0, 2.0, 3.0]
    assert stepper.t == 3.0
    assert 2.0 in stepper.anchors.times
    assert stepper.min_delay == 1.0
    # y = 1 - t, then -(2(t-1) - (t^2-1)/2) on [1, 2]
    assert abs(stepper.anchors.state_at(2.0)[0][0] + 0.5) < 1e-6
    with pytest.raises(InputError):
        delayed_decay().step_on_discontinuities([y(0) + 1])

def test_adjust_diff() -> None:
    stepper = delayed_decay()
    assert not stepper.adjusted
    assert stepper.dy[0] == 0.0
    stepper.adjust_diff()
    assert stepper.adjusted
    assert stepper.anchors.times == [-2.0, -1e-7, 0.0]
    assert stepper.dy[0] == -1.0
    assert stepper.anchors.last.prev.dy[0] == 0.0
    stepper.adjust_diff()
    assert len(stepper.anchors) == 3

def test_past_is_truncated() -> None:
    stepper = delayed_decay()
    stepper.integrate_to(10.0)
    assert stepper.anchors.first.t <= stepper.t - 1.0 < stepper.anchors.first.next.t
    # a time in the past gives the stored solution without stepping
    accepted = stepper.stats.accepted
    stepper.integrate_to(9.5)
    assert stepper.stats.accepted == accepted
    with pytest.raises(PastUnderflow):
        stepper.integrate_to(5.0)

@pytest.mark.parametrize('tol', [1e-6, 1e-9])
def test_sunflower_tolerances(sunflower_spec, tol: float) -> None:
    exe = lower(sunflower_spec)
    reference = DdeStepper(exe, constant_past([1.0, 0.0], 0.0, 40.0), 40.0,
                           tolerances=Tolerances(atol=1e-11, rtol=1e-11))
    stepper = DdeStepper(exe, constant_past([1.0, 0.0], 0.0, 40.0), 40.0,
                         tolerances=Tolerances(atol=tol, rtol=tol))
    stops = discontinuity_times(0.0, [40.0])
    for time in (50.0, 100.0, 150.0, 200.0):
        expected = reference.integrate_to(time, stops)
        assert np.max(np.abs(stepper.integrate_to(time, stops) - expected)) < 1000 * tol

def test_fixed_step_convergence() -> None:
    exe = lower(system([-2 * y(0) + y(0, t - 1)]))
    finals = []
    for steps in (10, 20, 40):
        stepper = DdeStepper(exe, constant_past([1.0], 0.0, 1.0), 1.0)
        h = 1.0 / steps
        for i in range(3 * steps):
            stepper.fixed_step(h, t_new=(i + 1) / steps)
        assert stepper.t == 3.0
        finals.append(stepper.y[0])
    slope = math.log2(abs(finals[0] - finals[1]) / abs(finals[1] - finals[2]))
    assert 2.6 < slope < 3.4

def test_integrate_blindly(sunflower_spec) -> None:
    stepper = DdeStepper(lower(sunflower_spec), constant_past([1.0, 0.0], 0.0, 40.0), 40.0)
    state = stepper.integrate_blindly(10.0, 0.5)
    assert stepper.t == 10.0
    assert stepper.stats.accepted == 20
    assert stepper.stats.rejected == 0
    assert list(state) == list(stepper.y)
    with pytest.raises(InputError):
        stepper.integrate_blindly(-1.0, 0.5)
    with pytest.raises(InputError):
        stepper.integrate_blindly(1.0, 0.0)

def test_min_delay_caps_steps_initially() -> None:
    exe = lower(system([-y(0, t - 1)]))
    stepper = DdeStepper(exe, constant_past([1.0], 0.0, 1.0), 1.0, min_delay=0.25,
                         tolerances=Tolerances(atol=1e-2, rtol=1e-2))
    while stepper.t < 1.0:
        assert stepper.try_step().h <= 0.25

def test_past_too_short() -> None:
    exe = lower(system([-y(0, t - 5)]))
    stepper = DdeStepper(exe, constant_past([1.0], 0.0, 1.0), 1.0)
    with pytest.raises(PastUnderflow):
        stepper.integrate_to(1.0)

def test_invalid_setup(sunflower_spec) -> None:
    exe = lower(sunflower_spec)
    with pytest.raises(InputError):
        DdeStepper(exe, constant_past([1.0], 0.0, 40.0), 40.0)
    with pytest.raises(InputError):
        DdeStepper(exe, constant_past([1.0, 0.0], 0.0, 40.0), -1.0)
