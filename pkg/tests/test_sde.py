import math

import numpy as np
import pytest
from scipy import stats

from pysymde import ContractViolation, InputError, SpecError, system, y
from pysymde.generators import mmm, mmm_mean
from pysymde.lowering import lower
from pysymde.ode import Tolerances
from pysymde.sde import (JumpSpec, SdeStepper, Segment, apply_jumps, brownian_bridge_sample,
                         detect_additive, merge_segments, rswm_advance, sample_segment,
                         split_segment, stratonovich_to_ito)
from pysymde.symbolic import evaluate
from .fixtures import rng

def gbm(mu: float = 0.5, sigma: float = 0.8):
    return lower(system([mu * y(0)], diffusion=[sigma * y(0)]))

def test_detect_additive() -> None:
    assert detect_additive(system([-y(0), y(0)], diffusion=[0.3, 1.0])) == 'additive'
    assert detect_additive(system([-y(0), y(0)], diffusion=[0.3, y(0)])) == 'general'
    with pytest.raises(SpecError):
        detect_additive(system([-y(0)]))

def test_stratonovich_to_ito() -> None:
    spec = system([-y(0)], diffusion=[0.5 * y(0)], calculus='stratonovich')
    ito = stratonovich_to_ito(spec)
    assert ito.calculus == 'ito'
    assert ito.diffusion == spec.diffusion
    assert math.isclose(evaluate(ito.drift[0], state=[2.0]), -2.0 + 0.5 * 0.25 * 2.0)
    already = system([-y(0)], diffusion=[0.5 * y(0)])
    assert stratonovich_to_ito(already) is already

def test_segments_merge_back(rng) -> None:
    segment = sample_segment(0.8, (5,), rng)
    first, second = split_segment(segment, 0.3, rng)
    assert math.isclose(first.dt, 0.3) and math.isclose(second.dt, 0.5)
    merged = merge_segments(first, second)
    assert math.isclose(merged.dt, 0.8)
    assert np.allclose(merged.dW, segment.dW, rtol=0, atol=1e-14)
    assert np.allclose(merged.dI, segment.dI, rtol=0, atol=1e-14)
    with pytest.raises(InputError):
        split_segment(segment, 0.8, rng)

def test_split_preserves_the_law(rng) -> None:
    k = 20000
    first, second = split_segment(sample_segment(1.0, (k,), rng), 0.3, rng)
    for piece, length in ((first, 0.3), (second, 0.7)):
        assert np.var(piece.dW) == pytest.approx(length, rel=0.05)
        assert np.var(piece.dI) == pytest.approx(length**3 / 3, rel=0.05)
        assert np.mean(piece.dW * piece.dI) == pytest.approx(length**2 / 2, rel=0.05)
    # increments over disjoint intervals are independent
    assert abs(np.corrcoef(first.dW, second.dW)[0, 1]) < 0.03
    assert abs(np.corrcoef(first.dI, second.dI)[0, 1]) < 0.03

def test_brownian_bridge(rng) -> None:
    values = brownian_bridge_sample((2.0, np.full(20000, 1.0)), 0.25, rng)
    assert np.mean(values) == pytest.approx(0.25, abs=0.02)
    assert np.var(values) == pytest.approx(0.25 * 0.75 * 2.0, rel=0.05)
    with pytest.raises(InputError):
        brownian_bridge_sample((1.0, np.zeros(1)), 1.0, rng)

def test_brownian_motion_law_with_rejections() -> None:
    stepper = SdeStepper(gbm(), [1.0], seed=4, paths=500, tolerances=Tolerances(atol=1e-4, rtol=1e-4))
    stepper.integrate_to(2.0)
    assert stepper.t == 2.0
    assert stepper.stats.rejected > 0
    result = stats.kstest(stepper.W[0] / math.sqrt(2.0), 'norm')
    assert result.pvalue > 1e-3

def test_geometric_brownian_motion_strong_error() -> None:
    mu, sigma = 0.5, 0.8
    stepper = SdeStepper(gbm(mu, sigma), [1.0], seed=12, paths=20, tolerances=Tolerances(atol=1e-5, rtol=1e-5))
    final = stepper.integrate_to(1.0)[0]
    exact = np.exp((mu - sigma**2 / 2) + sigma * stepper.W[0])
    assert np.max(np.abs(final - exact) / exact) < 2e-2

def test_additive_noise_matches_fine_fixed_steps(rng) -> None:
    exe = lower(system([-y(0)], diffusion=[0.5]))
    path = [sample_segment(1e-3, (1,), rng) for _ in range(1000)]
    fine = SdeStepper(exe, [1.0], noise='additive', fixed_step=1e-3, seed=1)
    fine.extend_future(path)
    adaptive = SdeStepper(exe, [1.0], noise='additive', seed=2, tolerances=Tolerances(atol=1e-5, rtol=1e-5))
    adaptive.extend_future(path)
    expected = fine.integrate_to(1.0)
    assert np.allclose(adaptive.integrate_to(1.0), expected, rtol=0, atol=5e-3)
    assert np.allclose(adaptive.W, fine.W, rtol=0, atol=1e-12)

def test_future_segments(rng) -> None:
    stepper = SdeStepper(gbm(), [1.0], seed=0)
    segments = [sample_segment(0.1, (1,), rng), sample_segment(0.2, (1,), rng)]
    stepper.extend_future(segments)
    assert [s.dt for s in stepper.future] == [0.1, 0.2]
    increments = stepper.draw_increments(0.15)
    assert math.isclose(increments.dt, 0.15)
    assert [round(s.dt, 12) for s in stepper.future] == [0.15]
    with pytest.raises(InputError):
        stepper.extend_future([Segment(0.1, np.zeros(2), np.zeros(2))])

def test_seeds_determine_paths() -> None:
    exe = gbm()
    runs = [SdeStepper(exe, [1.0], seed=seed).integrate_to(1.0)[0] for seed in (3, 3, 4)]
    assert runs[0] == runs[1]
    assert runs[0] != runs[2]

def test_fixed_steps() -> None:
    stepper = SdeStepper(gbm(), [1.0], seed=5, fixed_step=0.125)
    rswm_advance(stepper, 1.0)
    assert stepper.t == 1.0
    assert stepper.stats.accepted == 8
    assert stepper.stats.rejected == 0

def test_minimal_market_model_mean() -> None:
    stepper = SdeStepper(lower(mmm()), [1.0], seed=7, paths=2000, fixed_step=0.01)
    final = stepper.integrate_to(10.0)[0]
    assert np.mean(final) == pytest.approx(mmm_mean(10.0), abs=0.25)

def test_jumps_are_poisson() -> None:
    exe = lower(system([0 * y(0)], diffusion=[0.0]))
    unit = JumpSpec(2.0, lambda time, state, generator: [1.0])
    counts = [apply_jumps(SdeStepper(exe, [0.0], seed=seed, noise='additive'), unit, 1.0)[0]
              for seed in range(1000)]
    assert np.mean(counts) == pytest.approx(2.0, abs=0.2)
    assert np.var(counts) == pytest.approx(2.0, abs=0.4)
    assert all(c == int(c) for c in counts)

def test_no_jumps_is_plain_integration() -> None:
    plain = SdeStepper(gbm(), [1.0], seed=3)
    expected = plain.integrate_to(2.0)
    stepper = SdeStepper(gbm(), [1.0], seed=3)
    result = apply_jumps(stepper, JumpSpec(0.0, lambda time, state, generator: [1.0]), 2.0)
    assert np.array_equal(result, expected)
    assert np.array_equal(stepper.W, plain.W)
    assert stepper.t == plain.t == 2.0

class _RegularWaits:
    """Stands in for the jump generator: every waiting time is C{wait}."""

    def __init__(self, wait: float):
        self.wait = wait

    def exponential(self, scale: float) -> float:
        return self.wait

def test_jump_on_the_end_of_an_interval() -> None:
    exe = lower(system([0 * y(0)], diffusion=[0.0]))
    stepper = SdeStepper(exe, [0.0], seed=0, noise='additive')
    stepper.jump_rng = _RegularWaits(0.5)
    times = []
    def amplitude(time: float, state: np.ndarray, generator) -> list:
        times.append(time)
        return [1.0]
    unit = JumpSpec(1.0, amplitude)
    assert apply_jumps(stepper, unit, 1.0)[0] == 2.0
    assert apply_jumps(stepper, unit, 2.0)[0] == 4.0
    assert times == [0.5, 1.0, 1.5, 2.0]

def test_jump_errors() -> None:
    with pytest.raises(InputError):
        JumpSpec(-1.0, lambda time, state, generator: state)
    exe = lower(system([0 * y(0)], diffusion=[0.0]))
    with pytest.raises(ContractViolation):
        apply_jumps(SdeStepper(exe, [0.0], paths=2, seed=0), JumpSpec(1.0, lambda *_: [1.0]), 1.0)
    with pytest.raises(InputError):
        apply_jumps(SdeStepper(exe, [0.0], seed=0), JumpSpec(100.0, lambda *_: [1.0, 2.0]), 1.0)

def test_invalid_setup() -> None:
    exe = gbm()
    with pytest.raises(ContractViolation):
        SdeStepper(lower(system([-y(0)])), [1.0])
    with pytest.raises(InputError):
        SdeStepper(exe, [1.0], noise='multiplicative')
    with pytest.raises(InputError):
        SdeStepper(exe, [math.nan])
    with pytest.raises(InputError):
        SdeStepper(exe, [[1.0, 2.0]], paths=3)
    with pytest.raises(InputError):
        SdeStepper(exe, [1.0], fixed_step=0.0)
    with pytest.raises(InputError):
        SdeStepper(exe, [1.0], seed=0).integrate_to(-1.0)
