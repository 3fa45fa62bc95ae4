import pytest

from pysymde import InputError
from pysymde.benchmark import (BenchmarkRow, benchmark, expected_edges, prepare, speedup,
                               time_scenario)
from pysymde.generators import gen_kuramoto
from pysymde.program import BACKENDS

def test_expected_edges() -> None:
    assert expected_edges(10, 0.2) == pytest.approx(18.0)

def test_prepare_compiles() -> None:
    spec = gen_kuramoto(5, q=0.5, seed=1)
    for backend in BACKENDS:
        exe = prepare(spec, backend)
        assert exe.backend == backend

def test_time_scenario() -> None:
    timing = time_scenario(gen_kuramoto(6, q=0.5, seed=2), [0.1 * i for i in range(6)], 'bytecode', 5.0)
    assert timing.preparation >= 0 and timing.integration >= 0
    assert timing.wall_integration > 0

def test_benchmark_rows() -> None:
    rows = benchmark([4, 6], duration=2.0, repetitions=2, seed=0, q=0.5)
    assert [(row.n, row.backend) for row in rows] == [(n, b) for n in (4, 6) for b in BACKENDS]
    assert all(row.repetitions == 2 and row.integration >= 0 for row in rows)
    with pytest.raises(InputError):
        benchmark([4], repetitions=0)
    with pytest.raises(InputError):
        benchmark([4], backends=['jit'])

def test_speedup() -> None:
    rows = [BenchmarkRow(10, 'treewalk', 1.0, 6.0, 1.0, 6.0, 3), BenchmarkRow(10, 'bytecode', 2.0, 2.0, 2.0, 2.0, 3)]
    assert speedup(rows, 10) == 3.0
    with pytest.raises(InputError):
        speedup(rows, 20)
