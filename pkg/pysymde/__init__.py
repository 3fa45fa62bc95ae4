"""
Symbolic differential equations: write the right-hand side of an ODE, DDE or SDE as
symbolic expressions, lower it to a fast evaluation program and integrate it.

Systems are written the way they read on a blackboard, with the builder API::

    from pysymde import y, t, symbol, sin, system
    a, b, c = 0.2, 0.2, 5.7
    roessler = [ -y(1) - y(2), y(0) + a*y(1), b + y(2)*(y(0) - c) ]
    spec = system(roessler)

Delayed states are written C{y(i, t - tau)}, undetermined control parameters with
L{symbol}, repeated subexpressions can be declared as helpers with L{helper}.

@see: L{pysymde.lowering.lower}, L{pysymde.ode.OdeStepper}, L{pysymde.dde.DdeStepper},
    L{pysymde.sde.SdeStepper} and L{pysymde.lyapunov}.
"""

from typing import (Any, Callable, Iterable, Iterator, List, Optional,
                    Sequence, Set, Tuple, Union)
import numbers

import attr

from cached_property import cached_property

from . import genericvisitor

__all__ = [
  'Expression',
  'Constant',
  'Time',
  'State',
  'PastState',
  'Parameter',
  'HelperRef',
  'Sum',
  'Product',
  'Power',
  'Call',
  'HelperDefinition',
  'SystemSpec',
  'system',
  'y', 't', 'symbol', 'helper',
  'summation',
  'PysymdeError',
  'InputError',
  'SymbolicError',
  'ExpressionSyntaxError',
  'SpecError',
  'LoweringError',
  'ProgramLoadError',
  'IntegrationError',
  'StepSizeUnderflow',
  'PastUnderflow',
  'NormOverflow',
  'ContractViolation',
  'PastExtrapolationWarning',
  'DegenerateTangentWarning',
  'NonFiniteWarning',
]

FUNCTIONS = ('sin', 'cos', 'tan', 'exp', 'log', 'sqrt', 'sinh', 'cosh', 'tanh', 'abs', 'sign')
"""
Names of the elementary functions an L{Call} node can apply.

C{sign} is only produced when differentiating C{abs}, but it is accepted everywhere.
"""

CALCULI = ('none', 'ito', 'stratonovich')

# errors

class PysymdeError(Exception):
    """Base class of all errors raised by this package."""

class InputError(PysymdeError, ValueError):
    """Invalid input supplied by the user: bad arguments, non-finite initial data, bad groups."""

class SymbolicError(InputError):
    """Misuse of the symbolic layer, like differentiating with respect to time."""

class ExpressionSyntaxError(SymbolicError):
    """
    Malformed expression text.

    @ivar lineno: Line number of the offending token, if known.
    @ivar col: Column of the offending token, if known.
    """
    def __init__(self, msg: str, filename: Optional[str] = None,
                 lineno: Optional[int] = None, col: Optional[int] = None):
        self.msg = msg
        self.filename = filename
        self.lineno = lineno
        self.col = col
        location = ''
        if filename or lineno is not None:
            location = f"{filename or '<string>'}:{lineno if lineno is not None else '?'}"
            if col is not None:
                location += f":{col}"
            location += ': '
        super().__init__(location + msg)

class SpecError(SymbolicError):
    """Invalid L{SystemSpec}: dimension mismatch, state out of range, nested delays."""

class LoweringError(SymbolicError):
    """The system cannot be lowered, typically because it references an unknown symbol."""

class ProgramLoadError(PysymdeError, OSError):
    """A compiled program file has a bad header, version, size or checksum."""

class IntegrationError(PysymdeError, ArithmeticError):
    """Numerical failure of an integrator."""

class StepSizeUnderflow(IntegrationError):
    """The step size controller asked for a step below the minimal step size."""

class PastUnderflow(IntegrationError):
    """A delayed state was requested before the earliest stored anchor."""

class NormOverflow(IntegrationError):
    """A tangent vector norm over- or underflowed between two orthonormalizations."""

class ContractViolation(PysymdeError, RuntimeError):
    """An API was called in a way that breaks its contract (missing past accessor, wrong parameter count...)."""

# warnings

class PastExtrapolationWarning(UserWarning):
    """A delayed state was extrapolated beyond the newest anchor by more than one step width."""

class DegenerateTangentWarning(UserWarning):
    """A tangent vector became linearly dependent on the others and was replaced by a random one."""

class NonFiniteWarning(UserWarning):
    """A non-finite value was produced and handled, for instance by rejecting a step."""

# expressions

ExpressionLike = Union['Expression', float, int]

def as_expression(value: ExpressionLike) -> 'Expression':
    """
    Coerce a number to a L{Constant}, return expressions unchanged.

    >>> as_expression(2)
    Constant(value=2.0)
    """
    if isinstance(value, Expression):
        return value
    if isinstance(value, numbers.Real) and not isinstance(value, bool):
        return Constant(float(value))
    raise SymbolicError(f"cannot use {value!r} in an expression")

class Expression:
    """
    Immutable node of a symbolic expression DAG.

    Concrete node classes are frozen L{attr.s} classes: structural equality and hashing
    are derived from their fields. Python operators build new, non-normalized nodes;
    use L{pysymde.symbolic.simplify_basic} to get the canonical form.
    """

    # Rank of the node kind in the canonical ordering of Sum and Product children.
    _rank: int = -1

    @property
    def children(self) -> Tuple['Expression', ...]:
        return ()

    @cached_property
    def sort_key(self) -> Tuple[Any, ...]:
        """
        Key of the canonical ordering: constants first, then by node kind and content.
        Stable across processes (unlike C{hash()} of strings).
        """
        return (self._rank,) + self._key_payload()

    def _key_payload(self) -> Tuple[Any, ...]:
        raise NotImplementedError()

    @property
    def is_leaf(self) -> bool:
        """Whether this node holds no sub-expression."""
        return not self.children

    def __add__(self, other: ExpressionLike) -> 'Expression':
        return _sum_of(self, as_expression(other))
    def __radd__(self, other: ExpressionLike) -> 'Expression':
        return _sum_of(as_expression(other), self)
    def __sub__(self, other: ExpressionLike) -> 'Expression':
        return _sum_of(self, -as_expression(other))
    def __rsub__(self, other: ExpressionLike) -> 'Expression':
        return _sum_of(as_expression(other), -self)
    def __mul__(self, other: ExpressionLike) -> 'Expression':
        return _product_of(self, as_expression(other))
    def __rmul__(self, other: ExpressionLike) -> 'Expression':
        return _product_of(as_expression(other), self)
    def __truediv__(self, other: ExpressionLike) -> 'Expression':
        return _product_of(self, Power(as_expression(other), Constant(-1.0)))
    def __rtruediv__(self, other: ExpressionLike) -> 'Expression':
        return _product_of(as_expression(other), Power(self, Constant(-1.0)))
    def __pow__(self, other: ExpressionLike) -> 'Expression':
        return Power(self, as_expression(other))
    def __rpow__(self, other: ExpressionLike) -> 'Expression':
        return Power(as_expression(other), self)
    def __neg__(self) -> 'Expression':
        if isinstance(self, Constant):
            return Constant(-self.value)
        return Product((Constant(-1.0), self))
    def __pos__(self) -> 'Expression':
        return self

    def __str__(self) -> str:
        from pysymde import astutils
        return astutils.to_source(self)

def _sum_of(a: Expression, b: Expression) -> Expression:
    left = a.children if isinstance(a, Sum) else (a,)
    right = b.children if isinstance(b, Sum) else (b,)
    return Sum(left + right)

def _product_of(a: Expression, b: Expression) -> Expression:
    left = a.children if isinstance(a, Product) else (a,)
    right = b.children if isinstance(b, Product) else (b,)
    return Product(left + right)

def _check_index(inst: Any, attribute: 'attr.Attribute[int]', value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise SymbolicError(f"state index must be a non-negative integer, got {value!r}")

def _check_identifier(inst: Any, attribute: 'attr.Attribute[str]', value: str) -> None:
    if not isinstance(value, str) or not value.isidentifier():
        raise SymbolicError(f"invalid symbol name {value!r}")

def _to_index(value: Any) -> int:
    if isinstance(value, numbers.Integral) and not isinstance(value, bool):
        return int(value)
    return value # type:ignore[no-any-return]

@attr.s(frozen=True, cache_hash=True, repr=True)
class Constant(Expression):
    """A real number."""
    value: float = attr.ib(converter=float)
    _rank = 0
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.value,)

@attr.s(frozen=True, cache_hash=True)
class Time(Expression):
    """The independent variable C{t}."""
    _rank = 1
    def _key_payload(self) -> Tuple[Any, ...]:
        return ()

@attr.s(frozen=True, cache_hash=True)
class State(Expression):
    """Current state component C{y(index)}."""
    index: int = attr.ib(converter=_to_index, validator=_check_index)
    _rank = 2
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.index,)

@attr.s(frozen=True, cache_hash=True)
class PastState(Expression):
    """Delayed state component C{y(index, at)}, C{at} being an arbitrary expression of time and states."""
    index: int = attr.ib(converter=_to_index, validator=_check_index)
    at: Expression = attr.ib(converter=as_expression)
    _rank = 3
    @property
    def children(self) -> Tuple[Expression, ...]:
        return (self.at,)
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.index, self.at.sort_key)

@attr.s(frozen=True, cache_hash=True)
class Parameter(Expression):
    """A control parameter, either substituted before lowering or bound at run time."""
    name: str = attr.ib(validator=_check_identifier)
    _rank = 4
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.name,)

@attr.s(frozen=True, cache_hash=True)
class HelperRef(Expression):
    """Reference to a L{HelperDefinition}."""
    name: str = attr.ib(validator=_check_identifier)
    _rank = 5
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.name,)

def _to_children(value: Iterable[ExpressionLike]) -> Tuple[Expression, ...]:
    return tuple(as_expression(v) for v in value)

@attr.s(frozen=True, cache_hash=True)
class Sum(Expression):
    """N-ary sum."""
    terms: Tuple[Expression, ...] = attr.ib(converter=_to_children)
    _rank = 6
    @property
    def children(self) -> Tuple[Expression, ...]:
        return self.terms
    def _key_payload(self) -> Tuple[Any, ...]:
        return tuple(c.sort_key for c in self.terms)

@attr.s(frozen=True, cache_hash=True)
class Product(Expression):
    """N-ary product."""
    factors: Tuple[Expression, ...] = attr.ib(converter=_to_children)
    _rank = 7
    @property
    def children(self) -> Tuple[Expression, ...]:
        return self.factors
    def _key_payload(self) -> Tuple[Any, ...]:
        return tuple(c.sort_key for c in self.factors)

@attr.s(frozen=True, cache_hash=True)
class Power(Expression):
    """C{base ^ exponent}."""
    base: Expression = attr.ib(converter=as_expression)
    exponent: Expression = attr.ib(converter=as_expression)
    _rank = 8
    @property
    def children(self) -> Tuple[Expression, ...]:
        return (self.base, self.exponent)
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.base.sort_key, self.exponent.sort_key)

def _check_function(inst: Any, attribute: 'attr.Attribute[str]', value: str) -> None:
    if value not in FUNCTIONS:
        raise SymbolicError(f"unknown function {value!r}, expected one of {', '.join(FUNCTIONS)}")

@attr.s(frozen=True, cache_hash=True)
class Call(Expression):
    """Application of one of the L{FUNCTIONS}."""
    fn: str = attr.ib(validator=_check_function)
    arg: Expression = attr.ib(converter=as_expression)
    _rank = 9
    @property
    def children(self) -> Tuple[Expression, ...]:
        return (self.arg,)
    def _key_payload(self) -> Tuple[Any, ...]:
        return (self.fn, self.arg.sort_key)

# builder API

t = Time()
"""The time symbol."""

def y(index: int, at: Optional[ExpressionLike] = None) -> Expression:
    """
    State component C{index}, or its value at time C{at} if given.

    >>> y(0)
    State(index=0)
    >>> y(1, t - 40)
    PastState(index=1, at=Sum(terms=(Time(), Constant(value=-40.0))))
    """
    if at is None:
        return State(index)
    return PastState(index, as_expression(at))

def symbol(name: str) -> Parameter:
    """A control parameter named C{name}."""
    return Parameter(name)

def helper(name: str) -> HelperRef:
    """A reference to the helper named C{name}, see L{HelperDefinition}."""
    return HelperRef(name)

def summation(terms: Iterable[ExpressionLike]) -> Expression:
    """
    Build one flat sum from C{terms}, like the builtin C{sum()} without
    quadratic re-flattening for long sums. An empty sum is zero.
    """
    children = _to_children(terms)
    if not children:
        return Constant(0.0)
    if len(children) == 1:
        return children[0]
    return Sum(children)

def _function(name: str) -> Callable[[ExpressionLike], Expression]:
    def build(arg: ExpressionLike) -> Expression:
        return Call(name, as_expression(arg))
    build.__name__ = name
    build.__doc__ = f"C{{{name}(arg)}} as an expression."
    return build

sin = _function('sin')
cos = _function('cos')
tan = _function('tan')
exp = _function('exp')
log = _function('log')
sqrt = _function('sqrt')
sinh = _function('sinh')
cosh = _function('cosh')
tanh = _function('tanh')
sign = _function('sign')
# Not named "abs" so the builtin stays usable in this module.
absolute = _function('abs')

# system specifications

@attr.s(auto_attribs=True, frozen=True)
class HelperDefinition:
    """
    A named subexpression, computed once per evaluation.
    In an ordered list of helpers, each value may only reference earlier helpers.
    """
    name: str = attr.ib(validator=_check_identifier)
    value: Expression = attr.ib(converter=as_expression)

def iter_nodes(roots: Iterable[Expression]) -> Iterator[Expression]:
    """
    Iterate over the distinct nodes (by structural equality) of the DAGs rooted
    in C{roots}, children before parents.
    """
    return genericvisitor.iter_unique(roots, lambda e: e.children)

def _to_expressions(value: Optional[Iterable[ExpressionLike]]) -> Optional[Tuple[Expression, ...]]:
    if value is None:
        return None
    return _to_children(value)

def _to_helpers(value: Iterable[Union[HelperDefinition, Tuple[str, ExpressionLike]]]) -> Tuple[HelperDefinition, ...]:
    helpers = []
    for h in value:
        if not isinstance(h, HelperDefinition):
            h = HelperDefinition(*h)
        helpers.append(h)
    return tuple(helpers)

@attr.s(auto_attribs=True, frozen=True)
class SystemSpec:
    """
    Full statement of a differential equation problem.

    C{drift} gives M{f} in M{dy = f(t, y, y(t-tau)) dt + g(t, y) dW}, C{diffusion} the
    diagonal noise intensities M{g} of an SDE (C{None} for deterministic systems).

    Do not construct this class directly, use L{system}, which accepts generators and
    infers the dimension and parameters.
    """
    n: int
    drift: Tuple[Expression, ...] = attr.ib(converter=_to_children)
    diffusion: Optional[Tuple[Expression, ...]] = attr.ib(default=None, converter=_to_expressions)
    helpers: Tuple[HelperDefinition, ...] = attr.ib(default=(), converter=_to_helpers)
    parameters: Tuple[str, ...] = attr.ib(default=(), converter=tuple)
    calculus: str = 'none'

    def __attrs_post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """
        Check the structural invariants of a specification.

        Unknown parameters and helpers are reported by the lowering step, which
        sees the final set of expressions.

        @raises SpecError: If the specification is inconsistent.
        """
        if not isinstance(self.n, int) or self.n < 1:
            raise SpecError(f"dimension must be a positive integer, got {self.n!r}")
        if len(self.drift) != self.n:
            raise SpecError(f"dimension is {self.n} but {len(self.drift)} drift expressions were given")
        if self.calculus not in CALCULI:
            raise SpecError(f"unknown noise calculus {self.calculus!r}")
        if self.diffusion is not None:
            if len(self.diffusion) != self.n:
                raise SpecError(f"dimension is {self.n} but {len(self.diffusion)} diffusion expressions were given")
            if self.calculus == 'none':
                raise SpecError("a diffusion term requires the 'ito' or 'stratonovich' calculus")
            if any(isinstance(node, PastState) for node in iter_nodes(self.diffusion)):
                raise SpecError("delayed states are not supported in the diffusion term")
        elif self.calculus != 'none':
            raise SpecError(f"calculus {self.calculus!r} given but there is no diffusion term")
        names = [h.name for h in self.helpers]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate helper names in {names}")
        for node in iter_nodes(self.all_expressions):
            if isinstance(node, (State, PastState)) and node.index >= self.n:
                raise SpecError(f"{node!r} is out of range for a system of dimension {self.n}")
            if isinstance(node, PastState):
                if any(isinstance(sub, PastState) for sub in iter_nodes([node.at])):
                    raise SpecError(f"nested delay in {node!r}")

    @property
    def all_expressions(self) -> List[Expression]:
        """Helper values, drift and diffusion expressions, in this order."""
        return [h.value for h in self.helpers] + list(self.drift) + list(self.diffusion or ())

    @cached_property
    def past_nodes(self) -> List[PastState]:
        """Distinct delayed-state nodes, in traversal order."""
        return [node for node in iter_nodes(self.all_expressions) if isinstance(node, PastState)]

    @cached_property
    def uses_past(self) -> bool:
        """Whether any expression refers to a delayed state."""
        return bool(self.past_nodes)

    @cached_property
    def used_parameters(self) -> Set[str]:
        return {node.name for node in iter_nodes(self.all_expressions) if isinstance(node, Parameter)}

    @property
    def is_stochastic(self) -> bool:
        return self.diffusion is not None

def system(drift: Iterable[ExpressionLike], n: Optional[int] = None,
           diffusion: Optional[Iterable[ExpressionLike]] = None,
           helpers: Iterable[Union[HelperDefinition, Tuple[str, ExpressionLike]]] = (),
           parameters: Optional[Sequence[str]] = None,
           calculus: Optional[str] = None) -> SystemSpec:
    """
    Build a L{SystemSpec}.

    @param drift: Expressions or numbers, a list or any iterable (generator functions are welcome).
    @param n: The dimension. Inferred from the number of drift expressions if not given,
        an explicit dimension that does not match is an error.
    @param diffusion: Diagonal noise intensities, makes this an SDE.
    @param helpers: L{HelperDefinition}s or C{(name, value)} pairs.
    @param parameters: Names of the control parameters left undetermined until run time.
        Inferred from the expressions (in sorted order) if not given.
    @param calculus: C{'ito'} (default for SDEs) or C{'stratonovich'}.

    >>> spec = system([-y(1) - y(2), y(0) + 0.2*y(1), 0.2 + y(2)*(y(0) - 5.7)])
    >>> spec.n, spec.parameters, spec.uses_past
    (3, (), False)
    """
    drift_t = _to_children(drift)
    if n is not None and n != len(drift_t):
        raise SpecError(f"dimension {n} was given explicitly but there are {len(drift_t)} drift expressions")
    diffusion_t = _to_expressions(diffusion)
    if calculus is None:
        calculus = 'none' if diffusion_t is None else 'ito'
    helpers_t = _to_helpers(helpers)
    if parameters is None:
        roots = [h.value for h in helpers_t] + list(drift_t) + list(diffusion_t or ())
        parameters = sorted({node.name for node in iter_nodes(roots) if isinstance(node, Parameter)})
    return SystemSpec(n=len(drift_t) if n is None else n, drift=drift_t, diffusion=diffusion_t,
                      helpers=helpers_t, parameters=tuple(parameters), calculus=calculus)
