"""
Example systems, and generators of network systems.

Networks are built as L{networkx} graphs from a seeded PCG64 generator, then
turned into expressions with generator functions, one component at a time.
"""

from typing import Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from pysymde import (Expression, InputError, SystemSpec, HelperDefinition, absolute, exp, helper,
                     sin, sqrt, summation, symbol, system, t, y)

__all__ = ['roessler', 'sunflower', 'mmm', 'mmm_mean', 'fhn_pair', 'FHN_PAIR_DELAYS', 'FHN_PAIR_GROUPS',
           'kuramoto_network', 'gen_kuramoto', 'lattice_offsets', 'small_world_lattice',
           'gen_smallworld_fhn']

def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))

def roessler(a: float = 0.2, b: float = 0.2, c: float = 5.7) -> SystemSpec:
    """
    The Roessler oscillator.

    >>> roessler().n
    3
    """
    return system([-y(1) - y(2), y(0) + a*y(1), b + y(2)*(y(0) - c)])

def sunflower(tau: float = 40.0, a: float = 4.8, b: float = 0.186) -> SystemSpec:
    """The sunflower equation, with the single delay C{tau}."""
    return system([y(1), -a/tau*y(1) - b/tau*sin(y(0, t - tau))])

def mmm(alpha: float = 0.2, eta: float = 0.001) -> SystemSpec:
    """
    The minimal market model, an Itô SDE. The argument of the square root is taken
    as an absolute value so paths reaching zero stay defined.
    """
    growth = alpha * exp(eta * t)
    return system([growth], diffusion=[sqrt(absolute(growth * y(0)))])

def mmm_mean(time: float, y0: float = 1.0, alpha: float = 0.2, eta: float = 0.001) -> float:
    """Expected value of the minimal market model at C{time}."""
    return y0 + alpha * (np.exp(eta * time) - 1) / eta

FHN_PAIR_DELAYS = (70.0, 80.0)
FHN_PAIR_GROUPS = ((0, 2), (1, 3))

def fhn_pair(tau1: float = 80.0, tau2: float = 70.0, M1: float = 0.005, M2: float = 0.0053,
             a: float = -0.025, b: float = 0.00652, c: float = 0.02) -> SystemSpec:
    """
    Two FitzHugh-Nagumo oscillators coupled diffusively with two delays in each
    component. The states M{y_0 = y_2}, M{y_1 = y_3} form an invariant
    synchronization manifold, see L{FHN_PAIR_GROUPS}.
    """
    def coupling(i: int, j: int) -> Expression:
        return M1 * (y(j, t - tau1) - y(i)) + M2 * (y(j, t - tau2) - y(i))

    def equations() -> Iterator[Expression]:
        for x, w, other in ((0, 1, 2), (2, 3, 0)):
            yield y(x) * (y(x) - 1) * (a - y(x)) - y(w) + coupling(x, other)
            yield b * y(x) - c * y(w) + coupling(w, other + 1)

    return system(equations(), n=4)

def kuramoto_network(n: int, q: float, rng: np.random.Generator) -> nx.DiGraph:
    """A directed Erdős-Rényi network: each edge exists with probability C{q}."""
    if not 0 <= q <= 1:
        raise InputError(f"the edge probability must be in [0, 1], got {q}")
    return nx.gnp_random_graph(n, q, seed=int(rng.integers(2**32)), directed=True)

def gen_kuramoto(n: int, c: float = 3.0, q: float = 0.2, seed: Optional[int] = None) -> SystemSpec:
    """
    Kuramoto oscillators on a random directed network:
    M{dy_i/dt = omega_i + c/(n-1) sum_j A_ji sin(y_j - y_i)}, with eigenfrequencies
    M{omega_i ~ U([-0.5, 0.5])} in ascending order. Absent edges contribute no term.
    """
    if n < 2:
        raise InputError(f"a network needs at least two oscillators, got {n}")
    rng = _rng(seed)
    graph = kuramoto_network(n, q, rng)
    omega = np.sort(rng.uniform(-0.5, 0.5, n))

    def equations() -> Iterator[Expression]:
        for i in range(n):
            coupling = summation(sin(y(j) - y(i)) for j in sorted(graph.predecessors(i)))
            yield float(omega[i]) + c / (n - 1) * coupling

    return system(equations(), n=n)

def lattice_offsets(M: int) -> List[Tuple[int, int]]:
    """
    The C{M} offsets nearest to the origin of a square lattice: by ring (Chebyshev
    distance), then by Euclidean distance.

    >>> lattice_offsets(4)
    [(-1, 0), (0, -1), (0, 1), (1, 0)]

    @raises InputError: If the nearest C{M} offsets cut a set of equally distant ones.
    """
    radius = 1
    while (2 * radius + 1) ** 2 - 1 < M:
        radius += 1
    candidates = [(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1)
                  if (dx, dy) != (0, 0)]
    key = lambda o: (max(abs(o[0]), abs(o[1])), o[0]**2 + o[1]**2)
    candidates.sort(key=lambda o: key(o) + o)
    if M < len(candidates) and key(candidates[M - 1]) == key(candidates[M]):
        raise InputError(f"{M} neighbours do not form a symmetric neighbourhood")
    return candidates[:M]

def small_world_lattice(L: int, M: int, p: float, rng: np.random.Generator) -> nx.Graph:
    """
    Small-world network on an M{L x L} lattice with cyclic boundaries: each node is
    linked to its C{M} nearest nodes (see L{lattice_offsets}), then each edge is
    rewired with probability C{p} to a random node it is not yet linked with
    (Watts-Strogatz).
    """
    if not 0 <= p <= 1:
        raise InputError(f"the rewiring probability must be in [0, 1], got {p}")
    offsets = lattice_offsets(M)
    if len({(dx % L, dy % L) for dx, dy in offsets}) != M:
        raise InputError(f"a {L}x{L} lattice is too small for {M} neighbours")
    N = L * L
    graph = nx.Graph()
    graph.add_nodes_from(range(N))
    for i in range(N):
        x, z = divmod(i, L)
        for dx, dy in offsets:
            graph.add_edge(i, ((x + dx) % L) * L + (z + dy) % L)
    for u, v in sorted(graph.edges()):
        if rng.random() < p:
            choices = [w for w in range(N) if w != u and not graph.has_edge(u, w)]
            if choices:
                graph.remove_edge(u, v)
                graph.add_edge(u, choices[int(rng.integers(len(choices)))])
    return graph

def gen_smallworld_fhn(L: int, M: int, p: float = 0.18, k_W: float = 0.128, seed: Optional[int] = None,
                       subnets: int = 2, a: float = -0.0276, c: float = 0.02,
                       b_range: Sequence[float] = (0.006, 0.014)) -> SystemSpec:
    """
    Identical small-world networks of FitzHugh-Nagumo oscillators (within-coupling
    M{k_W/M}), each oscillator coupled to all oscillators of the other networks through
    their mean fields with the deferred parameter C{k_B}.

    With M{N = L^2}, the states of network C{q} are M{X_iq = y(2Nq + i)} and
    M{Y_iq = y(2Nq + N + i)}. The sums M{S_r = sum_j X_jr} are the helpers C{S0}, C{S1}, ...
    """
    if subnets < 1:
        raise InputError(f"at least one network is needed, got {subnets}")
    rng = _rng(seed)
    graph = small_world_lattice(L, M, p, rng)
    N = L * L
    b = rng.uniform(b_range[0], b_range[1], N)
    k_B = symbol('k_B')

    def X(i: int, q: int) -> Expression:
        return y(2 * N * q + i)

    def Y(i: int, q: int) -> Expression:
        return y(2 * N * q + N + i)

    helpers = [HelperDefinition(f'S{r}', summation(X(j, r) for j in range(N))) for r in range(subnets)]

    def equations() -> Iterator[Expression]:
        for q in range(subnets):
            for i in range(N):
                within = k_W / M * summation(X(j, q) - X(i, q) for j in sorted(graph.neighbors(i)))
                between = summation(k_B / N * (helper(f'S{r}') - N * X(i, q)) for r in range(subnets) if r != q)
                yield X(i, q) * (a - X(i, q)) * (X(i, q) - 1) - Y(i, q) + within + between
            for i in range(N):
                yield float(b[i]) * X(i, q) - c * Y(i, q)

    return system(equations(), n=2 * N * subnets, helpers=helpers, parameters=['k_B'])
