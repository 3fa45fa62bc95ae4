import math
from typing import List

import numpy as np
import pytest
from scipy.optimize import brentq

from pysymde import (ContractViolation, DegenerateTangentWarning, Expression, InputError, SystemSpec,
                     symbol, system, t, y)
from pysymde.anchors import constant_past
from pysymde.generators import mmm
from pysymde.lowering import lower
from pysymde.lyapunov import (HERMITE_GRAM, Benettin, GroupPartition, HermiteGramWindow,
                              augment_dde, augment_ode, dde_benettin, lyapunov_vectors,
                              ode_benettin, orthonormalize_vectors, run_benettin,
                              transversal_matrix, transversal_setup, window_scalar_product)
from pysymde.ode import OdeStepper, Tolerances
from .fixtures import decay_spec, rng, roessler_spec, sunflower_spec

PRECISE = Tolerances(atol=1e-10, rtol=1e-10)

def test_scalar_exponent(decay_spec) -> None:
    augmented = augment_ode(decay_spec)
    assert augmented.spec.n == 2
    assert augmented.tangent_slice(0) == slice(1, 2)
    benettin = ode_benettin(augmented, [1.0], seed=0, tolerances=PRECISE)
    samples = run_benettin(benettin, 1.0, 10)
    assert [s.t for s in samples] == [float(k) for k in range(1, 11)]
    for sample in samples:
        assert sample.weight == 1.0
        assert abs(sample.exponents[0] + 0.5) < 1e-6
    assert abs(benettin.state[0] - math.exp(-5.0)) < 1e-8

def test_linear_system_spectrum() -> None:
    spec = system([-y(0) + 2 * y(1), -3 * y(1)])
    benettin = ode_benettin(augment_ode(spec, m=2), [1.0, 1.0], seed=3, tolerances=PRECISE)
    samples = run_benettin(benettin, 1.0, 20)
    for sample in samples:
        # the volume spanned by both tangent vectors contracts with the trace
        assert abs(sum(sample.exponents) + 4.0) < 1e-5
    assert np.allclose(samples[-1].exponents, [-1.0, -3.0], atol=1e-4)
    vectors = lyapunov_vectors(benettin)
    assert np.allclose(vectors @ vectors.T, np.eye(2), atol=1e-12)
    assert abs(abs(vectors[0, 0]) - 1.0) < 1e-4

def test_seed_determines_exponents() -> None:
    spec = system([-y(0) + y(1), -y(0) - y(1)])
    runs = [[s.exponents[0] for s in run_benettin(ode_benettin(augment_ode(spec), [1.0, 0.0], seed=5), 0.5, 4)]
            for _ in range(2)]
    assert runs[0] == runs[1]

def test_benettin_errors(decay_spec) -> None:
    augmented = augment_ode(decay_spec)
    with pytest.raises(ContractViolation):
        Benettin(OdeStepper(lower(decay_spec), [1.0]), augmented)
    with pytest.raises(InputError):
        ode_benettin(augmented, [1.0, 2.0])
    benettin = ode_benettin(augmented, [1.0], seed=0)
    with pytest.raises(InputError):
        benettin.sample(0.0)

def test_augment_errors(decay_spec, sunflower_spec) -> None:
    with pytest.raises(InputError):
        augment_ode(mmm())
    with pytest.raises(InputError):
        augment_ode(sunflower_spec)
    with pytest.raises(InputError):
        augment_ode(decay_spec, m=0)
    with pytest.raises(InputError):
        augment_ode(decay_spec, m=2)
    with pytest.raises(InputError):
        augment_dde(system([-y(0, t - y(0))]))
    with pytest.raises(InputError):
        augment_dde(system([-y(0, t + 1)]))
    with pytest.raises(InputError):
        augment_dde(system([-y(0, t - symbol('tau'))]))
    augmented = augment_dde(system([-y(0, t - symbol('tau'))]), delays=[2.0])
    assert augmented.delays == (2.0,)

def test_augment_dde(sunflower_spec) -> None:
    augmented = augment_dde(sunflower_spec, m=2)
    assert augmented.delays == (40.0,)
    assert augmented.max_delay == 40.0
    assert augmented.spec.n == 6
    assert augmented.spec.uses_past

def test_dde_exponent_at_zero() -> None:
    # y' = -y + y(t-1): the rightmost root of the characteristic equation is 0
    augmented = augment_dde(system([-y(0) + y(0, t - 1)]))
    benettin = dde_benettin(augmented, constant_past([1.0], 0.0, 1.0), seed=1,
                            tolerances=Tolerances(atol=1e-9, rtol=1e-9))
    samples = run_benettin(benettin, 1.0, 60)
    late = [s.exponents[0] for s in samples[40:]]
    assert abs(np.mean(late)) < 5e-3
    with pytest.raises(ContractViolation):
        lyapunov_vectors(benettin)
    with pytest.raises(InputError):
        dde_benettin(augmented, constant_past([1.0, 2.0], 0.0, 1.0))

def test_hermite_gram_matches_quadrature() -> None:
    nodes, weights = np.polynomial.legendre.leggauss(8)
    s = (nodes + 1) / 2
    basis = np.array([2*s**3 - 3*s**2 + 1, s**3 - 2*s**2 + s, -2*s**3 + 3*s**2, s**3 - s**2])
    gram = (basis * weights / 2) @ basis.T
    assert np.allclose(gram, HERMITE_GRAM, rtol=0, atol=1e-12)

def test_window_scalar_product() -> None:
    # v(t) = t^2 is represented exactly
    times = [0.0, 1.0, 2.0]
    v = np.array([[[0.0], [0.0]], [[1.0], [2.0]], [[4.0], [4.0]]])
    full = HermiteGramWindow(times)
    assert math.isclose(window_scalar_product(full, v, v), 32 / 5, rel_tol=1e-12)
    partial = HermiteGramWindow(times, start=0.5)
    assert partial.length == 1.5
    assert math.isclose(partial.scalar_product(v, v), (32 - 1 / 32) / 5, rel_tol=1e-12)
    # a constant function against t^2
    one = np.array([[[1.0], [0.0]]] * 3)
    assert math.isclose(partial.scalar_product(one, v), (8 - 0.125) / 3, rel_tol=1e-12)
    with pytest.raises(ContractViolation):
        full.scalar_product(v[:2], v[:2])
    with pytest.raises(InputError):
        HermiteGramWindow([0.0, 0.0])
    with pytest.raises(InputError):
        HermiteGramWindow(times, start=2.0)

def test_orthonormalize_degenerate_vectors(rng) -> None:
    with pytest.warns(DegenerateTangentWarning):
        basis, norms = orthonormalize_vectors([[1.0, 0.0], [2.0, 0.0]], rng=rng)
    assert norms[0] == 1.0 and norms[1] == 0.0
    assert np.allclose(basis @ basis.T, np.eye(2), atol=1e-12)

def test_transversal_matrix() -> None:
    for size in range(1, 7):
        A, A_inv = transversal_matrix(size)
        assert np.allclose(A @ A_inv, np.eye(size), atol=1e-12)
    with pytest.raises(InputError):
        transversal_matrix(0)

def test_group_partition() -> None:
    partition = GroupPartition(5, [[0, 2], [1, 3, 4]])
    assert partition.representatives == [0, 1]
    assert partition.index_map == {0: 0, 1: 1, 2: 0, 3: 1, 4: 1}
    assert partition.transversal_dim == 3
    assert list(partition.reduce_state([5.0, 6.0, 7.0, 8.0, 9.0])) == [5.0, 6.0]
    assert GroupPartition(3, [[1, 2]]).representatives == [0, 1]
    for groups in ([], [[0]], [[0, 5]], [[0, 1], [1, 2]]):
        with pytest.raises(InputError):
            GroupPartition(4, groups)
    with pytest.raises(InputError):
        partition.reduce_state([1.0])

def test_transversal_exponent_of_coupled_pair() -> None:
    c = 0.5
    spec = system([-y(0) + c * (y(1) - y(0)), -y(1) + c * (y(0) - y(1))])
    main, augmented = transversal_setup(spec, [(0, 1)])
    assert main.n == 1
    assert augmented.spec.n == 2
    assert augmented.partition.transversal_dim == 1
    benettin = ode_benettin(augmented, [1.0], seed=0, tolerances=PRECISE)
    # the difference of the two components decays at rate 1 + 2c
    for sample in run_benettin(benettin, 1.0, 5):
        assert abs(sample.exponents[0] + 1 + 2 * c) < 1e-6

def test_transversal_setup_errors() -> None:
    spec = system([-y(0), -y(1)])
    with pytest.raises(InputError):
        transversal_setup(spec, [(0, 1)], m=2)
    with pytest.raises(InputError):
        transversal_setup(spec, [(0, 2)])
    with pytest.raises(InputError):
        transversal_setup(mmm(), [(0, 1)])

def test_dde_allows_more_tangent_vectors_than_components(sunflower_spec) -> None:
    augmented = augment_dde(sunflower_spec, m=3)
    assert augmented.spec.n == 8
    assert augmented.tangent_slice(2) == slice(6, 8)
    benettin = dde_benettin(augmented, constant_past([1.0, 0.0], 0.0, 40.0), seed=4)
    samples = run_benettin(benettin, 20.0, 2)
    assert all(s.exponents.shape == (3,) and np.all(np.isfinite(s.exponents)) for s in samples)
    with pytest.raises(InputError):
        augment_dde(sunflower_spec, m=0)
    delayed = system([-y(0) - 0.5 * y(1, t - 1), -y(1) - 0.5 * y(0, t - 1)])
    _, transversal = transversal_setup(delayed, [(0, 1)], m=2)
    assert transversal.m == 2
    assert transversal.spec.n == 3

def test_dde_transversal_exponent_matches_characteristic_root() -> None:
    # the difference z = y0 - y1 follows z' = -z + c z(t-1)
    c = 0.5
    spec = system([-y(0) - c * y(1, t - 1), -y(1) - c * y(0, t - 1)])
    main, augmented = transversal_setup(spec, [(0, 1)])
    assert main.n == 1
    root = brentq(lambda rate: rate + 1 - c * math.exp(-rate), -1.0, 0.0)
    benettin = dde_benettin(augmented, constant_past([1.0], 0.0, 1.0), seed=0,
                            tolerances=Tolerances(atol=1e-9, rtol=1e-9))
    late = run_benettin(benettin, 1.0, 40)[20:]
    mean = np.average([s.exponents[0] for s in late], weights=[s.weight for s in late])
    assert abs(mean - root) < 2e-3

def test_window_product_is_symmetric_and_positive(rng) -> None:
    for _ in range(100):
        size = int(rng.integers(2, 8))
        times = np.cumsum(rng.uniform(0.1, 1.0, size))
        window = HermiteGramWindow(times, start=rng.uniform(times[0], times[-1]))
        v = rng.standard_normal((size, 2, 3))
        w = rng.standard_normal((size, 2, 3))
        assert math.isclose(window.scalar_product(v, w), window.scalar_product(w, v), rel_tol=1e-12, abs_tol=1e-12)
        assert window.scalar_product(v, v) > 0

def _sampled(function, derivative, times: np.ndarray) -> np.ndarray:
    return np.stack([function(times), derivative(times)], axis=1)[:, :, np.newaxis]

def test_window_product_converges_with_spacing() -> None:
    # int_a^2 sin(t) cos(t) dt
    for start in (0.0, 0.3):
        exact = (math.sin(2.0)**2 - math.sin(start)**2) / 2
        errors = []
        for intervals in (4, 8, 16, 32):
            times = np.linspace(0.0, 2.0, intervals + 1)
            window = HermiteGramWindow(times, start=start)
            v = _sampled(np.sin, np.cos, times)
            w = _sampled(np.cos, lambda s: -np.sin(s), times)
            errors.append(abs(window.scalar_product(v, w) - exact))
        for coarse, fine in zip(errors, errors[1:]):
            assert coarse / fine >= 4

def test_window_product_of_ramp() -> None:
    ramp = np.array([[[0.0], [1.0]], [[1.0], [1.0]]])
    assert math.isclose(HermiteGramWindow([0.0, 1.0]).scalar_product(ramp, ramp), 1 / 3, rel_tol=1e-14)

def test_orthonormalize_keeps_norms() -> None:
    basis, norms = orthonormalize_vectors([[1.0, 0.0], [1.0, 1.0]])
    assert np.allclose(basis, np.eye(2), rtol=0, atol=1e-15)
    assert np.allclose(norms, [1.0, 1.0], rtol=1e-15)
    weighted = lambda v, w: float(v[0] * w[0] + 4 * v[1] * w[1])
    basis, norms = orthonormalize_vectors([[0.0, 1.0], [1.0, 1.0]], weighted)
    assert np.allclose(norms, [2.0, 1.0], rtol=1e-14)
    assert np.allclose(basis, [[0.0, 0.5], [1.0, 0.0]], rtol=0, atol=1e-15)

def test_tangent_dynamics_are_linear(rng, roessler_spec, sunflower_spec) -> None:
    exe = lower(augment_ode(roessler_spec, m=2).spec)
    for _ in range(20):
        state, tangents = rng.uniform(-5, 5, 3), rng.standard_normal(6)
        scale = rng.uniform(-3, 3)
        base = exe.evaluate_drift(0.0, np.concatenate([state, tangents]))
        scaled = exe.evaluate_drift(0.0, np.concatenate([state, scale * tangents]))
        assert np.array_equal(scaled[:3], base[:3])
        assert np.allclose(scaled[3:], scale * base[3:], rtol=1e-12, atol=1e-12)
    delayed = lower(augment_dde(sunflower_spec).spec)
    for _ in range(20):
        state, past_state = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
        scale = rng.uniform(-3, 3)
        def past(index: int, time: float, site: int, factor: float = 1.0) -> float:
            return past_state[index] * (factor if index >= 2 else 1.0)
        base = delayed.evaluate_drift(50.0, state, past)
        scaled_state = np.concatenate([state[:2], scale * state[2:]])
        scaled = delayed.evaluate_drift(50.0, scaled_state, lambda i, time, s: past(i, time, s, scale))
        assert np.allclose(scaled[:2], base[:2], rtol=1e-14, atol=1e-14)
        assert np.allclose(scaled[2:], scale * base[2:], rtol=1e-12, atol=1e-12)

def test_lyapunov_vectors_align_with_axes() -> None:
    spec = system([y(0), -y(1)])
    benettin = ode_benettin(augment_ode(spec, m=2), [0.0, 0.0], seed=8, tolerances=PRECISE)
    samples = run_benettin(benettin, 1.0, 10)
    assert np.allclose(samples[-1].exponents, [1.0, -1.0], atol=1e-6)
    vectors = lyapunov_vectors(benettin)
    assert abs(vectors[0, 0]) > 0.999
    assert abs(vectors[1, 1]) > 0.999

def _van_der_pol_pair(coupling: float) -> SystemSpec:
    def field(me: int, other: int) -> List[Expression]:
        x, v = y(me), y(me + 1)
        return [v + coupling * (y(other) - x),
                (1 - x**2) * v - x + coupling * (y(other + 1) - v)]
    return system(field(0, 2) + field(2, 0))

def test_transversal_exponent_matches_full_integration() -> None:
    # full diffusive coupling of both components shifts the tangent dynamics by -2c,
    # and the top exponent of a limit cycle is zero
    coupling = 0.1
    spec = _van_der_pol_pair(coupling)
    tolerances = Tolerances(atol=1e-9, rtol=1e-9)
    _, augmented = transversal_setup(spec, [(0, 2), (1, 3)])
    benettin = ode_benettin(augmented, [2.0, 0.0], seed=1, tolerances=tolerances)
    run_benettin(benettin, 1.0, 100)
    reduced = np.mean([s.exponents[0] for s in run_benettin(benettin, 1.0, 200)])

    full = augment_ode(spec)
    tangent = full.tangent_slice(0)
    stepper = OdeStepper(lower(full.spec), [2.0, 0.0, 2.0, 0.0, 1.0, 0.5, -1.0, -0.5], tolerances=tolerances)
    logs = []
    for k in range(1, 301):
        stepper.integrate_to(float(k))
        state = stepper.y.copy()
        z = state[tangent]
        along = (z[:2] + z[2:]) / 2
        z = z - np.concatenate([along, along])
        norm = float(np.linalg.norm(z))
        state[tangent] = z / norm
        stepper.y = state
        stepper.reset_derivative()
        if k > 100:
            logs.append(math.log(norm))
    brute_force = float(np.mean(logs))
    assert abs(reduced - brute_force) < 0.05 * abs(brute_force)
    assert abs(reduced + 2 * coupling) < 0.02
