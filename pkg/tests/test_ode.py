import math

import numpy as np
import pytest

from pysymde import (ContractViolation, InputError, IntegrationError, StepSizeUnderflow, symbol,
                     system, t, y)
from pysymde.lowering import lower
from pysymde.ode import BS3, DOPRI5, OdeStepper, Tolerances, step_factor
from .fixtures import decay_spec, rk4, roessler_spec, sunflower_spec

def test_roessler_matches_reference(roessler_spec) -> None:
    exe = lower(roessler_spec)
    stepper = OdeStepper(exe, [0.1, 0.2, 0.3], tolerances=Tolerances(atol=1e-10, rtol=1e-10))
    f = lambda time, state: np.array([-state[1] - state[2],
                                      state[0] + 0.2 * state[1],
                                      0.2 + state[2] * (state[0] - 5.7)])
    reference = rk4(f, [0.1, 0.2, 0.3], 0.0, 50.0, 1e-3)
    result = stepper.integrate_to(50.0)
    assert stepper.t == 50.0
    assert np.max(np.abs(result - reference)) < 1e-5

@pytest.mark.parametrize('method', ['RK45', 'RK23'])
def test_exponential_decay(decay_spec, method: str) -> None:
    stepper = OdeStepper(lower(decay_spec), [2.0], method=method,
                         tolerances=Tolerances(atol=1e-10, rtol=1e-10))
    for target in range(1, 11):
        value = stepper.integrate_to(float(target))[0]
        assert stepper.t == target
        assert abs(value - 2.0 * math.exp(-0.5 * target)) < 1e-7

def test_parameters_and_time() -> None:
    spec = system([-symbol('k') * y(0), t])
    stepper = OdeStepper(lower(spec), [1.0, 0.0], params={'k': 2.0},
                         tolerances=Tolerances(atol=1e-12, rtol=1e-12))
    value = stepper.integrate_to(1.5)
    assert abs(value[0] - math.exp(-3.0)) < 1e-9
    assert abs(value[1] - 1.125) < 1e-9
    with pytest.raises(ContractViolation):
        OdeStepper(lower(spec), [1.0, 0.0])

def test_result_is_a_copy(decay_spec) -> None:
    stepper = OdeStepper(lower(decay_spec), [1.0])
    result = stepper.integrate_to(1.0)
    result[0] = 100.0
    assert stepper.y[0] != 100.0

def test_integrate_to_current_time(decay_spec) -> None:
    stepper = OdeStepper(lower(decay_spec), [1.0], t0=3.0)
    assert list(stepper.integrate_to(3.0)) == [1.0]
    assert stepper.stats.attempts == 0
    with pytest.raises(InputError):
        stepper.integrate_to(2.0)

def test_statistics(roessler_spec) -> None:
    stepper = OdeStepper(lower(roessler_spec), [0.1, 0.2, 0.3], tolerances=Tolerances(atol=1e-8, rtol=1e-8))
    stepper.integrate_to(20.0)
    stats = stepper.stats
    assert stats.accepted > 100
    assert stats.attempts == stats.accepted + stats.rejected
    # first-same-as-last: one derivative for the initial step size, six per attempt
    assert stats.evaluations == 1 + 6 * stats.attempts

def test_step_size_limits(decay_spec) -> None:
    tol = Tolerances(atol=1e-3, rtol=1e-3, h_max=0.1, first_step=0.01)
    stepper = OdeStepper(lower(decay_spec), [1.0], tolerances=tol)
    assert stepper.h == 0.01
    sizes = []
    while stepper.t < 5.0:
        sizes.append(stepper.try_step(t_limit=5.0).h)
    assert max(sizes) <= 0.1
    assert stepper.t == 5.0

@pytest.mark.filterwarnings('ignore')
def test_blow_up_raises() -> None:
    stepper = OdeStepper(lower(system([y(0) ** 2])), [1.0])
    with pytest.raises(StepSizeUnderflow):
        stepper.integrate_to(2.0)
    assert issubclass(StepSizeUnderflow, IntegrationError)
    assert 0.99 < stepper.t < 1.01

@pytest.mark.parametrize('method, order', [('RK45', 5), ('RK23', 3)])
def test_fixed_step_order(decay_spec, method: str, order: int) -> None:
    exe = lower(decay_spec)
    errors = []
    for h in (0.2, 0.1):
        stepper = OdeStepper(exe, [1.0], method=method)
        for _ in range(int(round(2.0 / h))):
            stepper.fixed_step(h)
        errors.append(abs(stepper.y[0] - math.exp(-1.0)))
    slope = math.log2(errors[0] / errors[1])
    assert order - 0.5 < slope < order + 0.5

def test_reset_derivative(decay_spec) -> None:
    stepper = OdeStepper(lower(decay_spec), [1.0])
    assert stepper.dy[0] == -0.5
    stepper.y[0] = 2.0
    stepper.reset_derivative()
    assert stepper.dy[0] == -1.0

def test_tableaus_are_consistent() -> None:
    for tableau in (DOPRI5, BS3):
        assert math.isclose(sum(tableau.b), 1.0)
        assert abs(sum(tableau.error)) < 1e-14
        for c, row in zip(tableau.c, tableau.a):
            assert math.isclose(sum(row), c, abs_tol=1e-15)
    assert step_factor(1.0, 5) == 0.9

def test_invalid_input(decay_spec, sunflower_spec) -> None:
    exe = lower(decay_spec)
    with pytest.raises(InputError):
        Tolerances(atol=0, rtol=0)
    with pytest.raises(InputError):
        Tolerances(atol=-1)
    with pytest.raises(InputError):
        Tolerances(h_min=1.0, h_max=0.5)
    with pytest.raises(InputError):
        OdeStepper(exe, [math.nan])
    with pytest.raises(InputError):
        OdeStepper(exe, [1.0, 2.0])
    with pytest.raises(InputError):
        OdeStepper(exe, [1.0], method='Euler')
    with pytest.raises(ContractViolation):
        OdeStepper(lower(sunflower_spec), [1.0, 0.0])
    # a purely absolute criterion is fine
    OdeStepper(exe, [1.0], tolerances=Tolerances(atol=1e-6, rtol=0)).integrate_to(1.0)
