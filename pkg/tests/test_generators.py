import numpy as np
import pytest

from pysymde import Call, InputError, iter_nodes
from pysymde.generators import (FHN_PAIR_DELAYS, FHN_PAIR_GROUPS, fhn_pair, gen_kuramoto,
                                gen_smallworld_fhn, kuramoto_network, lattice_offsets, mmm,
                                mmm_mean, roessler, small_world_lattice, sunflower)
from pysymde.lowering import lower
from pysymde.lyapunov import augment_dde, transversal_setup
from pysymde.symbolic import evaluate
from .fixtures import rng

def _calls(spec, fn: str = 'sin') -> int:
    return sum(1 for e in spec.drift for node in iter_nodes([e]) if isinstance(node, Call) and node.fn == fn)

def test_example_systems() -> None:
    assert roessler().n == 3 and not roessler().uses_past
    assert sunflower().uses_past
    assert mmm().is_stochastic
    assert mmm_mean(0.0) == 1.0
    assert mmm_mean(10.0, y0=2.0) == pytest.approx(2.0 + 0.2 * 10.0, rel=1e-2)

def test_fhn_pair_synchronization_manifold() -> None:
    spec = fhn_pair()
    assert spec.n == 4
    assert augment_dde(spec).delays == FHN_PAIR_DELAYS
    past = lambda index, time: [0.1, 0.02, 0.1, 0.02][index] + 1e-3 * time
    f = [evaluate(e, 100.0, [0.2, -0.01, 0.2, -0.01], past=past) for e in spec.drift]
    assert f[0] == f[2] and f[1] == f[3]
    main, augmented = transversal_setup(spec, FHN_PAIR_GROUPS, m=2)
    assert main.n == 2
    assert augmented.spec.n == 6
    assert augmented.delays == FHN_PAIR_DELAYS

def test_kuramoto_network() -> None:
    rng = np.random.Generator(np.random.PCG64(1))
    assert kuramoto_network(10, 0.0, rng).number_of_edges() == 0
    assert kuramoto_network(10, 1.0, rng).number_of_edges() == 90
    with pytest.raises(InputError):
        kuramoto_network(10, 1.5, rng)

def test_gen_kuramoto() -> None:
    spec = gen_kuramoto(10, q=1.0, seed=2)
    assert spec.n == 10
    assert spec.parameters == ()
    assert _calls(spec) == 90
    # all phases equal: only the eigenfrequencies remain
    omega = lower(spec).evaluate_drift(0.0, np.full(10, 0.7))
    assert np.all(np.diff(omega) >= 0)
    assert np.all(np.abs(omega) <= 0.5)
    assert _calls(gen_kuramoto(10, q=0.0, seed=2)) == 0
    sparse = gen_kuramoto(30, q=0.2, seed=5)
    assert 0 < _calls(sparse) < 30 * 29
    assert gen_kuramoto(30, q=0.2, seed=5) == sparse
    assert gen_kuramoto(30, q=0.2, seed=6) != sparse
    with pytest.raises(InputError):
        gen_kuramoto(1)
    with pytest.raises(InputError):
        gen_kuramoto(5, q=-0.1)

def test_lattice_offsets() -> None:
    assert lattice_offsets(8) == [(-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert lattice_offsets(12)[8:] == [(-2, 0), (0, -2), (0, 2), (2, 0)]
    with pytest.raises(InputError):
        lattice_offsets(5)

def test_small_world_lattice(rng) -> None:
    torus = small_world_lattice(5, 4, 0.0, rng)
    assert torus.number_of_edges() == 50
    assert all(degree == 4 for _, degree in torus.degree())
    rewired = small_world_lattice(5, 4, 0.5, rng)
    assert rewired.number_of_edges() == 50
    assert set(rewired.edges()) != set(torus.edges())
    with pytest.raises(InputError):
        small_world_lattice(2, 8, 0.1, rng)
    with pytest.raises(InputError):
        small_world_lattice(5, 4, 2.0, rng)

def test_gen_smallworld_fhn() -> None:
    spec = gen_smallworld_fhn(3, 4, seed=3)
    assert spec.n == 36
    assert spec.parameters == ('k_B',)
    assert [h.name for h in spec.helpers] == ['S0', 'S1']
    assert gen_smallworld_fhn(3, 4, seed=3) == spec
    # identical networks: the synchronized state is invariant
    half = np.linspace(-0.2, 0.3, 18)
    f = lower(spec).evaluate_drift(0.0, np.concatenate([half, half]), params=[0.05])
    assert np.allclose(f[:18], f[18:], rtol=0, atol=1e-15)
    main, augmented = transversal_setup(spec, [(j, j + 18) for j in range(18)])
    assert main.n == 18
    assert augmented.partition.transversal_dim == 18
    with pytest.raises(InputError):
        gen_smallworld_fhn(3, 4, subnets=0)
