"""
Timing of the preparation (lowering and compilation) and the integration of
Kuramoto networks, for each evaluation backend.

Times are CPU times of the process, wall-clock times are reported alongside.
Scenarios run one after the other; for each of them all backends get the same
network and initial state, in random order.
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar
import statistics
import time

import attr
import numpy as np

from pysymde import InputError, SystemSpec
from pysymde.generators import gen_kuramoto
from pysymde.lowering import lower
from pysymde.ode import OdeStepper, Tolerances
from pysymde.program import BACKENDS, ExecutableSystem

__all__ = ['Timing', 'BenchmarkRow', 'prepare', 'time_scenario', 'benchmark', 'speedup', 'expected_edges']

@attr.s(auto_attribs=True, frozen=True)
class Timing:
    preparation: float
    integration: float
    wall_preparation: float
    wall_integration: float

@attr.s(auto_attribs=True, frozen=True)
class BenchmarkRow:
    """
    Median times over the repetitions of one network size and backend, divided by
    the expected number of edges.
    """
    n: int
    backend: str
    preparation: float
    integration: float
    wall_preparation: float
    wall_integration: float
    repetitions: int

T = TypeVar('T')

def _timed(fn: Callable[[], T]) -> Tuple[T, float, float]:
    cpu, wall = time.process_time(), time.perf_counter()
    result = fn()
    return result, time.process_time() - cpu, time.perf_counter() - wall

def prepare(spec: SystemSpec, backend: str) -> ExecutableSystem:
    """Lower C{spec} and do the one-time work of its backend."""
    exe = lower(spec, backend=backend)
    exe.drift.prepare(backend)
    return exe

def time_scenario(spec: SystemSpec, y0: Sequence[float], backend: str, duration: float,
                  tolerances: Optional[Tolerances] = None) -> Timing:
    """Time the lowering of C{spec} and its integration over C{duration}."""
    exe, cpu_prep, wall_prep = _timed(lambda: prepare(spec, backend))
    stepper = OdeStepper(exe, y0, tolerances=tolerances or Tolerances(atol=1e-6, rtol=0.0))
    _, cpu_int, wall_int = _timed(lambda: stepper.integrate_to(duration))
    return Timing(cpu_prep, cpu_int, wall_prep, wall_int)

def expected_edges(n: int, q: float) -> float:
    return q * n * (n - 1)

def benchmark(sizes: Iterable[int], duration: float = 1000.0, repetitions: int = 3, seed: Optional[int] = None,
              q: float = 0.2, backends: Sequence[str] = BACKENDS,
              tolerances: Optional[Tolerances] = None) -> List[BenchmarkRow]:
    """
    Time Kuramoto networks of the given sizes, see L{pysymde.generators.gen_kuramoto}.

    @return: One row per size and backend.
    """
    if repetitions < 1:
        raise InputError(f"at least one repetition is needed, got {repetitions}")
    for backend in backends:
        if backend not in BACKENDS:
            raise InputError(f"unknown backend {backend!r}")
    sizes = list(sizes)
    *seeds, order_seed = np.random.SeedSequence(seed).spawn(len(sizes) * repetitions + 1)
    order_rng = np.random.Generator(np.random.PCG64(order_seed))
    rows = []
    for k, n in enumerate(sizes):
        timings: Dict[str, List[Timing]] = {b: [] for b in backends}
        for r in range(repetitions):
            scenario = np.random.Generator(np.random.PCG64(seeds[k * repetitions + r]))
            spec = gen_kuramoto(n, q=q, seed=int(scenario.integers(2**32)))
            y0 = scenario.uniform(0, 2 * np.pi, n)
            for i in order_rng.permutation(len(backends)):
                backend = backends[int(i)]
                timings[backend].append(time_scenario(spec, y0, backend, duration, tolerances))
        edges = expected_edges(n, q)
        for backend in backends:
            ts = timings[backend]
            rows.append(BenchmarkRow(
                n, backend,
                statistics.median(x.preparation for x in ts) / edges,
                statistics.median(x.integration for x in ts) / edges,
                statistics.median(x.wall_preparation for x in ts) / edges,
                statistics.median(x.wall_integration for x in ts) / edges,
                repetitions))
    return rows

def speedup(rows: Iterable[BenchmarkRow], n: int, slow: str = 'treewalk', fast: str = 'bytecode') -> float:
    """Ratio of the integration times of two backends for networks of size C{n}."""
    times = {row.backend: row.integration for row in rows if row.n == n}
    try:
        return times[slow] / times[fast]
    except KeyError as e:
        raise InputError(f"no timing for backend {e.args[0]!r} and n={n}") from None
