"""
Lyapunov exponents of ODEs and DDEs.

The tangent dynamics are generated symbolically and integrated alongside the main
dynamics in one augmented system (see L{augment_ode} and L{augment_dde}).
L{Benettin} integrates it, regularly orthonormalizes the tangent vectors and turns
their growth into local Lyapunov exponents.

For DDEs a tangent vector is a function over the last C{max_delay} time units,
given by the tangent part of the stored anchors. Its norm comes from the scalar
product of the piecewise cubic Hermite interpolants, which is exact for the stored
representation (L{HermiteGramWindow}), and the orthonormalization combines the
anchors' values and derivatives.

Transversal exponents of synchronization manifolds are computed on a reduced main
system and transformed tangent coordinates, see L{transversal_setup}.
"""

from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import math
import warnings

import attr
import numpy as np

from pysymde import (ContractViolation, DegenerateTangentWarning, Expression, InputError,
                     NormOverflow, PastState, State, SymbolicError, SystemSpec,
                     HelperDefinition, iter_nodes, summation, system)
from pysymde.anchors import AnchorList
from pysymde.dde import DdeStepper
from pysymde.lowering import LoweringOptions, lower
from pysymde.ode import OdeStepper, Tolerances
from pysymde.symbolic import differentiate, evaluate, is_zero, remap_states, simplify_basic

__all__ = ['AugmentedSpec', 'GroupPartition', 'HermiteGramWindow', 'LocalExponents', 'Benettin',
           'HERMITE_GRAM', 'augment_ode', 'augment_dde', 'orthonormalize_vectors',
           'window_scalar_product', 'run_benettin', 'transversal_matrix', 'transversal_setup',
           'lyapunov_vectors', 'ode_benettin', 'dde_benettin', 'augmented_past']

Params = Union[Sequence[float], Mapping[str, float]]

# tangent systems

@attr.s(auto_attribs=True, frozen=True)
class GroupPartition:
    """
    Groups of synchronized state components.

    Each group is represented by its first index. Components outside of all groups
    are their own representatives.

    @ivar n: Dimension of the full system.
    """
    n: int
    groups: Tuple[Tuple[int, ...], ...] = attr.ib(converter=lambda gs: tuple(tuple(int(i) for i in g) for g in gs))

    def __attrs_post_init__(self) -> None:
        seen: Dict[int, Tuple[int, ...]] = {}
        if not self.groups:
            raise InputError("at least one group is needed")
        for group in self.groups:
            if len(group) < 2:
                raise InputError(f"groups need at least two members, got {group}")
            for i in group:
                if not 0 <= i < self.n:
                    raise InputError(f"index {i} of group {group} is out of range for dimension {self.n}")
                if i in seen:
                    raise InputError(f"index {i} is in the groups {seen[i]} and {group}")
                seen[i] = group

    @property
    def representatives(self) -> List[int]:
        """Original indices of the components of the reduced system, ascending."""
        grouped = {i for g in self.groups for i in g[1:]}
        return [i for i in range(self.n) if i not in grouped]

    @property
    def index_map(self) -> Dict[int, int]:
        """Original index to the index of its representative in the reduced system."""
        reduced = {r: k for k, r in enumerate(self.representatives)}
        mapping = dict(reduced)
        for g in self.groups:
            for i in g:
                mapping[i] = reduced[g[0]]
        return mapping

    @property
    def transversal_dim(self) -> int:
        return sum(len(g) - 1 for g in self.groups)

    def reduce_state(self, y: Sequence[float]) -> np.ndarray:
        """The representatives' components of a full state."""
        y_arr = np.asarray(y, dtype=float)
        if y_arr.shape != (self.n,):
            raise InputError(f"expected a state of length {self.n}, got shape {y_arr.shape}")
        return y_arr[self.representatives]

@attr.s(auto_attribs=True, frozen=True)
class AugmentedSpec:
    """
    A system extended by C{m} tangent vectors of dimension C{tangent_dim}.

    The main states occupy the indices M{[0, n)} of L{spec}, tangent vector C{k} the
    indices M{[n + k tangent_dim, n + (k+1) tangent_dim)}.

    @ivar base: The main dynamics, C{n = base.n}.
    @ivar spec: The augmented system.
    @ivar delays: The constant delays of a DDE.
    @ivar partition: The groups, for transversal tangent coordinates.
    """
    base: SystemSpec
    m: int
    spec: SystemSpec
    tangent_dim: int
    delays: Tuple[float, ...] = ()
    partition: Optional[GroupPartition] = None

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def max_delay(self) -> float:
        return max(self.delays, default=0.0)

    def tangent_slice(self, k: int) -> slice:
        start = self.n + k * self.tangent_dim
        return slice(start, start + self.tangent_dim)

Variable = Union[State, PastState]

def _partials(spec: SystemSpec, with_past: bool) -> List[List[Tuple[Expression, Variable]]]:
    # Non-zero partial derivatives of each drift component, with their variable.
    variables: List[Variable] = [State(j) for j in range(spec.n)]
    if with_past:
        variables.extend(spec.past_nodes)
    helpers = {h.name: h.value for h in spec.helpers}
    result = []
    for f in spec.drift:
        terms = []
        for var in variables:
            partial = differentiate(f, var, helpers)
            if not is_zero(partial):
                terms.append((partial, var))
        result.append(terms)
    return result

def _check_m(m: int, dim: Optional[int]) -> None:
    # a DDE has an infinite-dimensional phase space: only ODEs bound m
    if not isinstance(m, int) or m < 1:
        raise InputError(f"the number of tangent vectors must be a positive integer, got {m!r}")
    if dim is not None and m > dim:
        raise InputError(f"the number of tangent vectors must be between 1 and {dim}, got {m!r}")

def _tangent_drift(partials: List[List[Tuple[Expression, Variable]]],
                   image: Callable[[Variable], Expression]) -> List[Expression]:
    return [simplify_basic(summation(partial * image(var) for partial, var in terms)) for terms in partials]

def _shifted(offset: int) -> Callable[[Variable], Expression]:
    def image(var: Variable) -> Expression:
        if isinstance(var, PastState):
            return PastState(var.index + offset, var.at)
        return State(var.index + offset)
    return image

def augment_ode(spec: SystemSpec, m: int = 1) -> AugmentedSpec:
    """
    Add C{m} tangent vectors to an ODE: M{dz_i/dt = sum_j df_i/dy_j z_j}.

    >>> from pysymde import y, system
    >>> augment_ode(system([-y(0)])).spec.drift
    (Product(factors=(Constant(value=-1.0), State(index=0))), Product(factors=(Constant(value=-1.0), State(index=1))))

    @raises InputError: If the system is stochastic or has delays (use L{augment_dde}).
    """
    if spec.is_stochastic:
        raise InputError("Lyapunov exponents of stochastic systems are not supported")
    if spec.uses_past:
        raise InputError("the system has delayed states, use augment_dde()")
    return _augment(spec, m, _partials(spec, with_past=False), ())

def _infer_delay(node: PastState) -> float:
    try:
        at_zero = evaluate(node.at, time=0.0)
        at_one = evaluate(node.at, time=1.0)
    except SymbolicError:
        raise InputError(f"cannot determine the delay of {node!r}, pass the delays explicitly") from None
    if not math.isclose(at_one - at_zero, 1.0, rel_tol=1e-12):
        raise InputError(f"the delay of {node!r} is not constant")
    return -at_zero

def augment_dde(spec: SystemSpec, delays: Optional[Iterable[float]] = None, m: int = 1) -> AugmentedSpec:
    """
    Add C{m} tangent vectors to a DDE. Each delayed state contributes the tangent
    vector at the same delay: M{dz_i/dt = sum_j df_i/dy_j z_j + sum_d,j df_i/dy_j(t-tau_d) z_j(t-tau_d)}.

    @param delays: The constant delays, inferred from the delayed states if they
        do not depend on parameters.
    @raises InputError: If a delay depends on the state, or is not positive.
    """
    if spec.is_stochastic:
        raise InputError("Lyapunov exponents of stochastic systems are not supported")
    for node in spec.past_nodes:
        if any(isinstance(sub, (State, PastState)) for sub in iter_nodes([node.at])):
            raise InputError(f"state-dependent delays are not supported: {node!r}")
    if delays is None:
        values = [_infer_delay(node) for node in spec.past_nodes]
    else:
        values = [float(d) for d in delays]
    for d in values:
        if not d > 0 or not math.isfinite(d):
            raise InputError(f"delays must be positive and finite, got {d}")
    return _augment(spec, m, _partials(spec, with_past=True), tuple(sorted(set(values))))

def _augment(spec: SystemSpec, m: int, partials: List[List[Tuple[Expression, Variable]]],
             delays: Tuple[float, ...]) -> AugmentedSpec:
    _check_m(m, None if delays else spec.n)
    drift = list(spec.drift)
    for k in range(m):
        drift.extend(_tangent_drift(partials, _shifted(spec.n * (1 + k))))
    full = system(drift, helpers=spec.helpers, parameters=spec.parameters)
    return AugmentedSpec(spec, m, full, spec.n, delays)

def transversal_matrix(size: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    The transformation M{A} of a group of C{size} tangent components to the sum
    coordinate (first row) and the successive differences, and its inverse.

    >>> A, A_inv = transversal_matrix(3)
    >>> A
    array([[ 1.,  1.,  1.],
           [ 1., -1.,  0.],
           [ 0.,  1., -1.]])
    >>> A_inv * 3
    array([[ 1.,  2.,  1.],
           [ 1., -1.,  1.],
           [ 1., -1., -2.]])
    """
    if size < 1:
        raise InputError(f"group size must be positive, got {size}")
    A = np.zeros((size, size))
    A[0] = 1.0
    for i in range(1, size):
        A[i, i - 1] = 1.0
        A[i, i] = -1.0
    A_inv = np.empty((size, size))
    A_inv[:, 0] = 1.0
    for i in range(size):
        for j in range(1, size):
            A_inv[i, j] = size - j if i < j else -j
    return A, A_inv / size

def transversal_setup(spec: SystemSpec, groups: Iterable[Sequence[int]], m: int = 1,
                      delays: Optional[Iterable[float]] = None) -> Tuple[SystemSpec, AugmentedSpec]:
    """
    Prepare the computation of Lyapunov exponents transversal to the synchronization
    manifold on which the members of each group are equal.

    Only the representatives of the groups are integrated: in the reduced main system
    every member is replaced by its representative. The tangent vectors live in the
    coordinates M{A z} of each group, without the sum coordinate, which is along the
    manifold and pinned to zero. Components outside of all groups have no
    transversal direction.

    @return: The reduced main system and the augmented system with the transformed
        tangent dynamics.
    @raises InputError: If groups overlap, are too small or reference invalid indices.
    """
    if spec.is_stochastic:
        raise InputError("Lyapunov exponents of stochastic systems are not supported")
    partition = GroupPartition(spec.n, groups)
    index_map = partition.index_map
    reps = partition.representatives

    if spec.uses_past:
        augmented_delays = augment_dde(spec, delays, 1).delays
    else:
        augmented_delays = ()

    def reduce(e: Expression) -> Expression:
        return simplify_basic(remap_states(e, index_map))

    helpers = [HelperDefinition(h.name, reduce(h.value)) for h in spec.helpers]
    main_drift = [reduce(spec.drift[r]) for r in reps]
    main = system(main_drift, helpers=helpers, parameters=spec.parameters)

    n_main = len(reps)
    dim = partition.transversal_dim
    _check_m(m, None if spec.uses_past else dim)
    partials = [[(reduce(partial), var) for partial, var in terms]
                for terms in _partials(spec, with_past=spec.uses_past)]

    # For each tangent vector: z_i as a combination of the transversal coordinates.
    drift = list(main_drift)
    for k in range(m):
        offset = n_main + k * dim
        combinations: Dict[int, List[Tuple[float, int]]] = {}
        rows: List[Tuple[Tuple[int, ...], np.ndarray]] = []
        start = offset
        for group in partition.groups:
            A, A_inv = transversal_matrix(len(group))
            for i, member in enumerate(group):
                combinations[member] = [(float(A_inv[i, j]), start + j - 1) for j in range(1, len(group))
                                        if A_inv[i, j] != 0]
            rows.append((group, A))
            start += len(group) - 1

        def image(var: Variable, combinations: Dict[int, List[Tuple[float, int]]] = combinations) -> Expression:
            terms = combinations.get(var.index, [])
            if isinstance(var, PastState):
                return summation(c * PastState(index, reduce(var.at)) for c, index in terms)
            return summation(c * State(index) for c, index in terms)

        h = _tangent_drift(partials, image)
        for group, A in rows:
            for i in range(1, len(group)):
                drift.append(simplify_basic(summation(float(A[i, j]) * h[member] for j, member in enumerate(group)
                                                      if A[i, j] != 0)))
    full = system(drift, helpers=helpers, parameters=spec.parameters)
    return main, AugmentedSpec(main, m, full, dim, augmented_delays, partition)

# scalar products

HERMITE_GRAM = np.array([[156.0, 22.0, 54.0, -13.0],
                         [22.0, 4.0, 13.0, -3.0],
                         [54.0, 13.0, 156.0, -22.0],
                         [-13.0, -3.0, -22.0, 4.0]]) / 420
"""
Gram matrix of the cubic Hermite basis on M{[0, 1]}, for the coefficients
M{(p(0), p'(0), p(1), p'(1))}.
"""

def _basis(s: float) -> Tuple[np.ndarray, np.ndarray]:
    values = np.array([2*s**3 - 3*s**2 + 1, s**3 - 2*s**2 + s, -2*s**3 + 3*s**2, s**3 - s**2])
    slopes = np.array([6*s**2 - 6*s, 3*s**2 - 4*s + 1, -6*s**2 + 6*s, 3*s**2 - 2*s])
    return values, slopes

class HermiteGramWindow:
    """
    The L2 scalar product over M{[start, times[-1]]} of functions given by values and
    derivatives at C{times}, interpolated by piecewise cubic Hermite polynomials.

    An interval reaching before C{start} only contributes its part after C{start}.

    >>> window = HermiteGramWindow([0.0, 1.0])
    >>> v = np.array([[[0.0], [1.0]], [[1.0], [1.0]]])  # v(t) = t
    >>> round(window.scalar_product(v, v), 12)
    0.333333333333

    @ivar blocks: One 4x4 matrix per interval after C{start}, for the coefficients
        M{(v(t_a), v'(t_a), v(t_b), v'(t_b))}.
    """

    def __init__(self, times: Sequence[float], start: Optional[float] = None):
        self.times = np.asarray(times, dtype=float)
        if len(self.times) < 2 or not np.all(np.diff(self.times) > 0):
            raise InputError("a window needs at least two strictly increasing times")
        self.start = self.times[0] if start is None else max(float(start), self.times[0])
        if not self.start < self.times[-1]:
            raise InputError(f"the window starts at {self.start}, after its end {self.times[-1]}")
        self.first = int(np.searchsorted(self.times, self.start, side='right')) - 1
        blocks = []
        for a in range(self.first, len(self.times) - 1):
            width = self.times[a + 1] - self.times[a]
            scale = np.diag([1.0, width, 1.0, width])
            s0 = (self.start - self.times[a]) / width if a == self.first else 0.0
            if s0 > 0:
                values, slopes = _basis(s0)
                shrink = 1 - s0
                T = np.array([values, shrink * slopes, [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, shrink]])
                gram = shrink * width * T.T @ HERMITE_GRAM @ T
            else:
                gram = width * HERMITE_GRAM
            blocks.append(scale @ gram @ scale)
        self.blocks = np.array(blocks)

    @property
    def length(self) -> float:
        return float(self.times[-1] - self.start)

    def _coefficients(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            v = v[:, :, np.newaxis]
        if v.ndim != 3 or v.shape[:2] != (len(self.times), 2):
            raise ContractViolation(f"expected values and derivatives at {len(self.times)} times, got shape {v.shape}")
        head = v[self.first:-1]
        tail = v[self.first + 1:]
        return np.concatenate([head, tail], axis=1)

    def scalar_product(self, v: np.ndarray, w: np.ndarray) -> float:
        """
        @param v: Array of shape C{(len(times), 2, c)}: values (C{[:, 0]}) and derivatives
            (C{[:, 1]}) of C{c} components, summed over in the product.
        @raises ContractViolation: If the arrays do not match the window's times.
        """
        cv = self._coefficients(v)
        cw = self._coefficients(w)
        if cv.shape != cw.shape:
            raise ContractViolation(f"mismatched functions: shapes {np.shape(v)} and {np.shape(w)}")
        return float(np.einsum('kac,kab,kbc->', cv, self.blocks, cw))

def window_scalar_product(window: HermiteGramWindow, v: np.ndarray, w: np.ndarray) -> float:
    """See L{HermiteGramWindow.scalar_product}."""
    return window.scalar_product(v, w)

Product = Callable[[np.ndarray, np.ndarray], float]

def _dot(v: np.ndarray, w: np.ndarray) -> float:
    return float(np.vdot(v, w))

def orthonormalize_vectors(vectors: Union[Sequence[Sequence[float]], np.ndarray],
                           product: Optional[Product] = None,
                           rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Modified Gram-Schmidt orthonormalization.

    A vector in the span of its predecessors is replaced by a random unit vector
    orthogonal to them, with a L{DegenerateTangentWarning}; its norm is reported as zero.

    >>> q, r = orthonormalize_vectors([[1.0, 0.0], [1.0, 1.0]])
    >>> q, r
    (array([[1., 0.],
           [0., 1.]]), array([1., 1.]))

    @param vectors: The vectors along the first axis. Any shape works with a custom product.
    @param product: Scalar product, the Euclidean one by default.
    @return: The orthonormal vectors and the norms of the residuals.
    """
    basis = np.array(vectors, dtype=float)
    dot = product or _dot
    norms = np.empty(len(basis))
    for k in range(len(basis)):
        v = basis[k]
        for j in range(k):
            v -= dot(v, basis[j]) * basis[j]
        r = math.sqrt(max(dot(v, v), 0.0))
        norms[k] = r
        if r == 0:
            warnings.warn(f"tangent vector {k} is degenerate, replacing it by a random vector",
                          DegenerateTangentWarning)
            rng = rng or np.random.Generator(np.random.PCG64())
            v = rng.standard_normal(v.shape)
            # Twice, so rounding errors of the first pass are removed.
            for _ in range(2):
                for j in range(k):
                    v -= dot(v, basis[j]) * basis[j]
            r = math.sqrt(dot(v, v))
        basis[k] = v / r
    return basis, norms

# Benettin's method

@attr.s(auto_attribs=True, frozen=True)
class LocalExponents:
    """
    Growth rates of the tangent vectors between two orthonormalizations.

    @ivar weight: The time between them.
    """
    t: float
    exponents: np.ndarray
    weight: float

Stepper = Union[OdeStepper, DdeStepper]

class Benettin:
    """
    Estimation of the C{m} largest Lyapunov exponents: the augmented system is
    integrated and the tangent vectors are regularly orthonormalized. The logarithms of
    their norms divided by the elapsed time are the local Lyapunov exponents.

    The tangent vectors are initialized to random orthonormal vectors, drawn from a
    PCG64 generator seeded with C{seed}. For DDEs they are constant functions, unless
    there are more tangent vectors than components: then their values and slopes at
    the anchors of the initial past are random.

    @param stepper: An integrator of C{augmented.spec}.
    @ivar last_normalization: Time of the latest orthonormalization.
    """

    def __init__(self, stepper: Stepper, augmented: AugmentedSpec, seed: Optional[int] = None):
        if stepper.exe.n != augmented.spec.n:
            raise ContractViolation(f"the stepper integrates {stepper.exe.n} components, "
                                    f"the augmented system has {augmented.spec.n}")
        self.stepper = stepper
        self.augmented = augmented
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.is_dde = isinstance(stepper, DdeStepper)
        if self.is_dde:
            self._initialize_functions()
        else:
            self._initialize_vectors()
        self.last_normalization = stepper.t

    @property
    def m(self) -> int:
        return self.augmented.m

    def _initialize_vectors(self) -> None:
        aug = self.augmented
        vectors = self.rng.standard_normal((aug.m, aug.tangent_dim))
        self._set_vectors(orthonormalize_vectors(vectors, rng=self.rng)[0])

    def _set_vectors(self, vectors: np.ndarray) -> None:
        stepper = self.stepper
        assert isinstance(stepper, OdeStepper)
        y = stepper.y.copy()
        for k in range(self.m):
            y[self.augmented.tangent_slice(k)] = vectors[k]
        stepper.y = y
        stepper.reset_derivative()

    def _initialize_functions(self) -> None:
        stepper = self.stepper
        assert isinstance(stepper, DdeStepper)
        aug = self.augmented
        anchors = list(stepper.anchors)
        if aug.m <= aug.tangent_dim:
            constants = self.rng.standard_normal((aug.m, aug.tangent_dim))
            values = np.broadcast_to(constants, (len(anchors),) + constants.shape)
            slopes = np.zeros_like(values)
        else:
            # more tangent vectors than components: constant functions would be dependent
            values = self.rng.standard_normal((len(anchors), aug.m, aug.tangent_dim))
            slopes = self.rng.standard_normal((len(anchors), aug.m, aug.tangent_dim))
        for i, anchor in enumerate(anchors):
            for k in range(aug.m):
                anchor.y[aug.tangent_slice(k)] = values[i, k]
                anchor.dy[aug.tangent_slice(k)] = slopes[i, k]
        self._normalize_functions()
        last = stepper.anchors.last
        assert last is not None
        if stepper.adjusted:
            last.dy = stepper.f(stepper.t, last.y)
        else:
            stepper.adjust_diff()

    def _normalize_functions(self) -> np.ndarray:
        stepper = self.stepper
        assert isinstance(stepper, DdeStepper)
        aug = self.augmented
        anchors = list(stepper.anchors)
        values = np.array([a.y for a in anchors])
        slopes = np.array([a.dy for a in anchors])
        window = HermiteGramWindow([a.t for a in anchors], stepper.t - stepper.max_delay)
        functions = np.array([np.stack([values[:, aug.tangent_slice(k)], slopes[:, aug.tangent_slice(k)]], axis=1)
                              for k in range(aug.m)])
        basis, norms = orthonormalize_vectors(functions, window.scalar_product, self.rng)
        for i, anchor in enumerate(anchors):
            for k in range(aug.m):
                anchor.y[aug.tangent_slice(k)] = basis[k, i, 0]
                anchor.dy[aug.tangent_slice(k)] = basis[k, i, 1]
        stepper.y = anchors[-1].y.copy()
        return norms

    def _normalize_vectors(self) -> np.ndarray:
        stepper = self.stepper
        vectors = np.array([stepper.y[self.augmented.tangent_slice(k)] for k in range(self.m)])
        basis, norms = orthonormalize_vectors(vectors, rng=self.rng)
        self._set_vectors(basis)
        return norms

    def normalize(self) -> LocalExponents:
        """
        Orthonormalize the tangent vectors now.

        @raises NormOverflow: If a norm is zero or not finite.
        """
        norms = self._normalize_functions() if self.is_dde else self._normalize_vectors()
        weight = self.stepper.t - self.last_normalization
        self.last_normalization = self.stepper.t
        if not np.all(np.isfinite(norms)) or not np.all(norms > 0):
            raise NormOverflow(f"tangent vector norms {norms} at t={self.stepper.t}, "
                               "orthonormalize more often (a shorter sample interval)")
        with np.errstate(all='ignore'):
            exponents = np.log(norms) / weight if weight > 0 else np.full(self.m, np.nan)
        return LocalExponents(self.stepper.t, exponents, weight)

    def sample(self, interval: float) -> LocalExponents:
        """
        Integrate for C{interval} and orthonormalize. DDE steps are not shortened, the
        weight is the time actually integrated.
        """
        if not interval > 0:
            raise InputError(f"the sample interval must be positive, got {interval}")
        target = self.last_normalization + interval
        stepper = self.stepper
        if isinstance(stepper, OdeStepper):
            stepper.integrate_to(target)
        else:
            while stepper.t < target:
                stepper.try_step()
        return self.normalize()

    @property
    def state(self) -> np.ndarray:
        """The main state."""
        return self.stepper.y[:self.augmented.n].copy()

def run_benettin(benettin: Benettin, sample_interval: float, n_samples: int) -> List[LocalExponents]:
    """Take C{n_samples} samples of the local Lyapunov exponents."""
    return [benettin.sample(sample_interval) for _ in range(n_samples)]

def lyapunov_vectors(benettin: Benettin) -> np.ndarray:
    """
    The current tangent vectors, orthonormal right after a sample.

    @raises ContractViolation: For DDEs, whose tangent vectors are functions.
    """
    if benettin.is_dde:
        raise ContractViolation("Lyapunov vectors are only available for ODEs")
    return np.array([benettin.stepper.y[benettin.augmented.tangent_slice(k)] for k in range(benettin.m)])

def ode_benettin(augmented: AugmentedSpec, y0: Sequence[float], t0: float = 0.0, params: Params = (),
                 tolerances: Optional[Tolerances] = None, seed: Optional[int] = None,
                 options: Optional[LoweringOptions] = None, method: str = 'RK45') -> Benettin:
    """
    Lower an augmented ODE and set up L{Benettin} for it.

    @param y0: Initial main state, of dimension C{augmented.n}.
    """
    y_main = np.asarray(y0, dtype=float)
    if y_main.shape != (augmented.n,):
        raise InputError(f"expected an initial state of length {augmented.n}, got shape {y_main.shape}")
    y_full = np.zeros(augmented.spec.n)
    y_full[:augmented.n] = y_main
    stepper = OdeStepper(lower(augmented.spec, options), y_full, t0, params, tolerances, method)
    return Benettin(stepper, augmented, seed)

def augmented_past(past: AnchorList, dim: int) -> AnchorList:
    """A copy of C{past} with its states padded with zeros to dimension C{dim}."""
    extended = AnchorList(dim)
    for anchor in past:
        y = np.zeros(dim)
        dy = np.zeros(dim)
        y[:past.n] = anchor.y
        dy[:past.n] = anchor.dy
        extended.append(anchor.t, y, dy)
    return extended

def dde_benettin(augmented: AugmentedSpec, past: AnchorList, params: Params = (),
                 tolerances: Optional[Tolerances] = None, seed: Optional[int] = None,
                 options: Optional[LoweringOptions] = None) -> Benettin:
    """
    Lower an augmented DDE and set up L{Benettin} for it.

    @param past: Initial past of the main dynamics.
    """
    if past.n != augmented.n:
        raise InputError(f"the past has dimension {past.n}, the main system {augmented.n}")
    delays = augmented.delays
    stepper = DdeStepper(lower(augmented.spec, options), augmented_past(past, augmented.spec.n),
                         augmented.max_delay, params, tolerances, min_delay=min(delays, default=None))
    return Benettin(stepper, augmented, seed)
