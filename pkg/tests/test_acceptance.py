"""
Long reference runs: trajectories, exponents, convergence orders, ensemble means and
timings at full length. Run them with C{pytest --runslow}.
"""
import math

import numpy as np
import pytest

from pysymde import system, y
from pysymde.anchors import constant_past
from pysymde.benchmark import benchmark, speedup
from pysymde.generators import FHN_PAIR_DELAYS, FHN_PAIR_GROUPS, fhn_pair, mmm, mmm_mean, roessler, sunflower
from pysymde.lowering import lower
from pysymde.lyapunov import augment_dde, dde_benettin, run_benettin, transversal_setup
from pysymde.ode import OdeStepper, Tolerances
from pysymde.sde import SdeStepper, sample_segment
from pysymde.stats import summarize
from .fixtures import rk4

pytestmark = pytest.mark.slow

def test_roessler_matches_fine_rk4() -> None:
    exe = lower(roessler())
    stepper = OdeStepper(exe, [0.1, 0.2, 0.3], tolerances=Tolerances(atol=1e-10, rtol=1e-10))
    reference = rk4(lambda time, state: exe.evaluate_drift(time, state), [0.1, 0.2, 0.3], 0.0, 100.0, 1e-4)
    assert np.max(np.abs(stepper.integrate_to(100.0) - reference)) <= 1e-5

def test_sunflower_spectrum() -> None:
    augmented = augment_dde(sunflower(), m=3)
    benettin = dde_benettin(augmented, constant_past([1.0, 0.0], 0.0, 40.0), seed=0)
    benettin.stepper.step_on_discontinuities(augmented.delays)
    run_benettin(benettin, 10.0, 100)
    samples = run_benettin(benettin, 10.0, 900)
    first, second, third = summarize([s.exponents for s in samples], [s.weight for s in samples])
    assert abs(first.mean) < 1e-3 and first.p > 0.05
    assert -7.5e-3 <= second.mean <= -2.5e-3 and second.p < 0.01
    assert -7.5e-2 <= third.mean <= -2.5e-2 and third.p < 0.01

def test_fhn_pair_transversal_exponent() -> None:
    _, augmented = transversal_setup(fhn_pair(), FHN_PAIR_GROUPS)
    benettin = dde_benettin(augmented, constant_past([0.1, 0.0], 0.0, augmented.max_delay), seed=0,
                            tolerances=Tolerances(atol=1e-10, rtol=1e-5))
    benettin.stepper.step_on_discontinuities(FHN_PAIR_DELAYS, max_step=1.0)
    run_benettin(benettin, 10.0, 1000)
    samples = run_benettin(benettin, 10.0, 10000)
    (transversal,) = summarize([s.exponents for s in samples], [s.weight for s in samples])
    assert 0.0005 <= transversal.mean <= 0.002
    assert transversal.p < 0.01

def _strong_errors(exe, noise: str, exact, steps, paths: int = 1000, seed: int = 3):
    rng = np.random.Generator(np.random.PCG64(seed))
    fine = 2.0**-12
    path = [sample_segment(fine, (1, paths), rng) for _ in range(4096)]
    def final(h: float):
        stepper = SdeStepper(exe, [1.0], paths=paths, noise=noise, fixed_step=h, seed=seed)
        stepper.extend_future(path)
        return stepper.integrate_to(1.0)[0], stepper.W[0]
    reference, W = final(fine)
    target = exact(W) if exact is not None else reference
    return [float(np.mean(np.abs(final(h)[0] - target))) for h in steps]

def _order(steps, errors) -> float:
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])

def test_strong_convergence_orders() -> None:
    steps = [2.0**-k for k in range(4, 10)]
    mu, sigma = 0.5, 0.8
    gbm = lower(system([mu * y(0)], diffusion=[sigma * y(0)]))
    errors = _strong_errors(gbm, 'general', lambda W: np.exp(mu - sigma**2 / 2 + sigma * W), steps)
    assert _order(steps, errors) >= 1.4
    additive = lower(system([-y(0)], diffusion=[0.5]))
    errors = _strong_errors(additive, 'additive', None, steps)
    assert _order(steps, errors) >= 1.4

def test_minimal_market_model_mean_at_100() -> None:
    paths = 10000
    stepper = SdeStepper(lower(mmm()), [1.0], seed=11, paths=paths, fixed_step=0.01)
    final = stepper.integrate_to(100.0)[0]
    half_width = 2.5758 * np.std(final, ddof=1) / math.sqrt(paths)
    assert mmm_mean(100.0) == pytest.approx(22.034, abs=1e-3)
    assert abs(np.mean(final) - mmm_mean(100.0)) <= half_width

def test_benchmark_scaling() -> None:
    sizes = [20, 50, 100, 200]
    rows = benchmark(sizes, duration=20.0, repetitions=1, seed=0)
    per_edge = [row.integration for row in rows if row.backend == 'bytecode']
    assert len(per_edge) == len(sizes)
    assert max(per_edge) < 10 * min(per_edge)
    assert speedup(rows, 100) > 2
