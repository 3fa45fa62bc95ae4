"""
Symbolic manipulations of L{Expression} DAGs: simplification, differentiation,
substitution, common-subexpression elimination and Jacobians.

All operations return new expressions, inputs are never modified.
"""

from typing import (AbstractSet, Callable, Dict, Iterable, List, Mapping, Optional,
                    Sequence, Tuple, Union)
import math

import numpy as np

from pysymde import (Expression, ExpressionLike, Constant, Time, State, PastState, Parameter,
                     HelperRef, Sum, Product, Power, Call, HelperDefinition, SymbolicError,
                     as_expression, genericvisitor)

__all__ = [
    'simplify_basic',
    'differentiate',
    'substitute',
    'remap_states',
    'expand_helpers',
    'eliminate_common_subexpressions',
    'jacobian',
    'evaluate',
    'is_zero',
]

NUMPY_FUNCTIONS: Mapping[str, Callable[..., float]] = {
    'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp, 'log': np.log,
    'sqrt': np.sqrt, 'sinh': np.sinh, 'cosh': np.cosh, 'tanh': np.tanh,
    'abs': np.abs, 'sign': np.sign,
}
"""Function table with IEEE semantics: domain errors give NaN, overflows give infinities."""

ZERO = Constant(0.0)
ONE = Constant(1.0)
MINUS_ONE = Constant(-1.0)

def is_zero(e: Expression) -> bool:
    """Whether C{e} is the constant zero."""
    return isinstance(e, Constant) and e.value == 0.0

def _call(fn: str, value: float) -> float:
    with np.errstate(all='ignore'):
        return float(NUMPY_FUNCTIONS[fn](np.float64(value)))

def _power(base: float, exponent: float) -> float:
    with np.errstate(all='ignore'):
        return float(np.power(np.float64(base), np.float64(exponent)))

def replace_children(e: Expression, children: Sequence[Expression]) -> Expression:
    """
    A node of the same kind as C{e} with new children.
    Returns C{e} itself when the children are unchanged.
    """
    if len(children) == len(e.children) and all(a is b for a, b in zip(children, e.children)):
        return e
    if isinstance(e, PastState):
        return PastState(e.index, children[0])
    if isinstance(e, Sum):
        return Sum(tuple(children))
    if isinstance(e, Product):
        return Product(tuple(children))
    if isinstance(e, Power):
        return Power(children[0], children[1])
    if isinstance(e, Call):
        return Call(e.fn, children[0])
    assert not children, f"unexpected children for {e!r}"
    return e

class Rebuilder(genericvisitor.Transformer[Expression, Expression]):
    """
    Base transformer rebuilding every node from its transformed children.
    Override ``visit_...`` methods for the node kinds to change.
    """
    def unknown_visit(self, e: Expression) -> Expression:
        return replace_children(e, [self.visit(c) for c in e.children])

# simplification

class _Simplifier(Rebuilder):
    """Implementation of L{simplify_basic()}."""

    def visit_Sum(self, e: Sum) -> Expression:
        constants: List[float] = []
        terms: List[Expression] = []
        for child in e.terms:
            child = self.visit(child)
            for item in (child.terms if isinstance(child, Sum) else (child,)):
                if isinstance(item, Constant):
                    constants.append(item.value)
                else:
                    terms.append(item)
        const = math.fsum(constants) if all(math.isfinite(c) for c in constants) else sum(constants)
        terms.sort(key=lambda c: c.sort_key)
        if const != 0.0 or not terms:
            terms.insert(0, Constant(const))
        if len(terms) == 1:
            return terms[0]
        return Sum(tuple(terms))

    def visit_Product(self, e: Product) -> Expression:
        constants: List[float] = []
        factors: List[Expression] = []
        for child in e.factors:
            child = self.visit(child)
            for item in (child.factors if isinstance(child, Product) else (child,)):
                if isinstance(item, Constant):
                    constants.append(item.value)
                else:
                    factors.append(item)
        const = 1.0
        for value in sorted(constants, key=lambda v: (abs(v), v)):
            const *= value
        if const == 0.0:
            return ZERO
        factors.sort(key=lambda c: c.sort_key)
        if const != 1.0 or not factors:
            factors.insert(0, Constant(const))
        if len(factors) == 1:
            return factors[0]
        return Product(tuple(factors))

    def visit_Power(self, e: Power) -> Expression:
        base = self.visit(e.base)
        exponent = self.visit(e.exponent)
        if isinstance(exponent, Constant):
            if exponent.value == 1.0:
                return base
            if exponent.value == 0.0:
                return ONE
            if isinstance(base, Constant):
                return Constant(_power(base.value, exponent.value))
        if isinstance(base, Constant) and base.value == 1.0:
            return ONE
        return replace_children(e, (base, exponent))

    def visit_Call(self, e: Call) -> Expression:
        arg = self.visit(e.arg)
        if isinstance(arg, Constant):
            return Constant(_call(e.fn, arg.value))
        return replace_children(e, (arg,))

def simplify_basic(e: Expression) -> Expression:
    """
    Constant folding, removal of zero summands and unit factors, C{x*0 -> 0},
    C{x^1 -> x}, flattening of nested sums and products, and canonical ordering of
    their children (constants first).

    >>> from pysymde import y
    >>> simplify_basic(0 + y(0))
    State(index=0)
    >>> simplify_basic(1*(y(0) - 0))
    State(index=0)
    """
    return _Simplifier().visit(e)

def simplify_all(exprs: Iterable[Expression]) -> List[Expression]:
    """Simplify several expressions, sharing the work on common subexpressions."""
    simplifier = _Simplifier()
    return [simplifier.visit(e) for e in exprs]

# substitution

class _Substituter(Rebuilder):
    def __init__(self, mapping: Mapping[Expression, Expression]):
        super().__init__()
        self._memo.update(mapping)

_SUBSTITUTABLE = (State, PastState, Parameter, HelperRef)

def substitute(e: Expression, mapping: Mapping[Expression, ExpressionLike]) -> Expression:
    """
    Simultaneous replacement of the keys of C{mapping} by their values. Replacements
    are not substituted again.

    @param mapping: Keys are L{State}, L{PastState}, L{Parameter} or L{HelperRef} nodes.

    >>> from pysymde import y, symbol
    >>> substitute(symbol('a')*y(1), {symbol('a'): 0.2})
    Product(factors=(Constant(value=0.2), State(index=1)))
    """
    for key in mapping:
        if not isinstance(key, _SUBSTITUTABLE):
            raise SymbolicError(f"cannot substitute {key!r}: only states, delayed states, parameters and helpers can")
    return _Substituter({k: as_expression(v) for k, v in mapping.items()}).visit(e)

class _StateRemapper(Rebuilder):
    def __init__(self, mapping: Mapping[int, int]):
        super().__init__()
        self.mapping = mapping

    def _index(self, index: int) -> int:
        try:
            return self.mapping[index]
        except KeyError:
            raise SymbolicError(f"no new index for state {index}") from None

    def visit_State(self, e: State) -> Expression:
        return State(self._index(e.index))

    def visit_PastState(self, e: PastState) -> Expression:
        return PastState(self._index(e.index), self.visit(e.at))

def remap_states(e: Expression, mapping: Mapping[int, int]) -> Expression:
    """
    Renumber the current and delayed states of C{e}, including inside delay arguments.

    @param mapping: Old index to new index, must cover every state index of C{e}.
    """
    return _StateRemapper(mapping).visit(e)

class _HelperExpander(Rebuilder):
    def __init__(self, helpers: Mapping[str, Expression]):
        super().__init__()
        self.helpers = helpers

    def visit_HelperRef(self, e: HelperRef) -> Expression:
        try:
            value = self.helpers[e.name]
        except KeyError:
            raise SymbolicError(f"unknown helper {e.name!r}") from None
        return self.visit(value)

def _helper_map(helpers: Union[Mapping[str, Expression], Iterable[HelperDefinition]]) -> Mapping[str, Expression]:
    if isinstance(helpers, Mapping):
        return helpers
    return {h.name: h.value for h in helpers}

def expand_helpers(e: Expression, helpers: Union[Mapping[str, Expression], Iterable[HelperDefinition]]) -> Expression:
    """Replace every helper reference by its (recursively expanded) value."""
    return _HelperExpander(_helper_map(helpers)).visit(e)

# differentiation

_CHAIN_RULES: Mapping[str, Callable[[Expression, Call], Expression]] = {
    'sin': lambda x, c: Call('cos', x),
    'cos': lambda x, c: Product((MINUS_ONE, Call('sin', x))),
    'tan': lambda x, c: Sum((ONE, Power(c, Constant(2.0)))),
    'exp': lambda x, c: c,
    'log': lambda x, c: Power(x, MINUS_ONE),
    'sqrt': lambda x, c: Product((Constant(0.5), Power(c, MINUS_ONE))),
    'sinh': lambda x, c: Call('cosh', x),
    'cosh': lambda x, c: Call('sinh', x),
    'tanh': lambda x, c: Sum((ONE, Product((MINUS_ONE, Power(c, Constant(2.0)))))),
    # sign(0) is 0, the kink of abs is a null set.
    'abs': lambda x, c: Call('sign', x),
    'sign': lambda x, c: ZERO,
}

class _Differentiator(genericvisitor.Transformer[Expression, Expression]):
    """Implementation of L{differentiate()}. Results are not simplified."""

    def __init__(self, wrt: Expression, helpers: Mapping[str, Expression]):
        super().__init__()
        self.wrt = wrt
        self.helpers = helpers
        self._depends: Dict[Expression, bool] = {}

    def depends(self, e: Expression) -> bool:
        try:
            return self._depends[e]
        except KeyError:
            pass
        if e == self.wrt:
            result = True
        elif isinstance(e, HelperRef):
            result = self.depends(self._helper(e))
        elif isinstance(e, PastState):
            # Delayed states are independent variables, their delay argument is not followed.
            result = False
        else:
            result = any(self.depends(c) for c in e.children)
        self._depends[e] = result
        return result

    def _helper(self, e: HelperRef) -> Expression:
        try:
            return self.helpers[e.name]
        except KeyError:
            raise SymbolicError(f"cannot differentiate through unknown helper {e.name!r}") from None

    def visit(self, e: Expression) -> Expression:
        if e == self.wrt:
            return ONE
        if not self.depends(e):
            return ZERO
        return super().visit(e)

    def visit_HelperRef(self, e: HelperRef) -> Expression:
        return self.visit(self._helper(e))

    def visit_Sum(self, e: Sum) -> Expression:
        return Sum(tuple(self.visit(c) for c in e.terms if self.depends(c)))

    def visit_Product(self, e: Product) -> Expression:
        terms = []
        for i, factor in enumerate(e.factors):
            if not self.depends(factor):
                continue
            others = e.factors[:i] + e.factors[i+1:]
            terms.append(Product(others + (self.visit(factor),)))
        return Sum(tuple(terms))

    def visit_Power(self, e: Power) -> Expression:
        if not self.depends(e.exponent):
            return Product((e.exponent, Power(e.base, Sum((e.exponent, MINUS_ONE))), self.visit(e.base)))
        # d(b^x) = b^x (x' log b + x b'/b)
        return Product((e, Sum((
                Product((self.visit(e.exponent), Call('log', e.base))),
                Product((e.exponent, self.visit(e.base), Power(e.base, MINUS_ONE)))))))

    def visit_Call(self, e: Call) -> Expression:
        return Product((_CHAIN_RULES[e.fn](e.arg, e), self.visit(e.arg)))

def differentiate(e: Expression, wrt: Expression,
                  helpers: Union[Mapping[str, Expression], Iterable[HelperDefinition]] = ()) -> Expression:
    """
    Partial derivative of C{e} with respect to a state, a delayed state or a parameter.

    Delayed states are treated as variables of their own: M{d y(0, t-1) / d y(0) = 0}.
    Helper references are differentiated through their definitions (chain rule), the
    result may still reference helpers.

    @param helpers: Definitions of the helpers referenced by C{e}.
    @raises SymbolicError: When differentiating with respect to time or something else
        than a symbol.

    >>> from pysymde import y, symbol
    >>> differentiate(y(0) + symbol('a')*y(1), y(1))
    Parameter(name='a')
    """
    if isinstance(wrt, Time):
        raise SymbolicError("differentiation with respect to time is not supported")
    if not isinstance(wrt, (State, PastState, Parameter)):
        raise SymbolicError(f"cannot differentiate with respect to {wrt!r}")
    result = _Differentiator(wrt, _helper_map(helpers)).visit(e)
    return simplify_basic(result)

def jacobian(f: Sequence[Expression], n: int,
             helpers: Union[Mapping[str, Expression], Iterable[HelperDefinition]] = ()) -> List[List[Expression]]:
    """
    Jacobian matrix of C{f} with respect to the current states: entry C{[k][j]} is
    M{d f_k / d y_j}.
    """
    helper_map = _helper_map(helpers)
    return [[differentiate(fk, State(j), helper_map) for j in range(n)] for fk in f]

# common subexpressions

def _hoistable(e: Expression) -> bool:
    return not e.is_leaf

def eliminate_common_subexpressions(exprs: Sequence[Expression], prefix: str = '_cse',
                                    reserved: AbstractSet[str] = frozenset()) -> Tuple[List[HelperDefinition], List[Expression]]:
    """
    Hoist every non-leaf subexpression that occurs at least twice into a helper.

    Occurrences are counted on the expressions where already hoisted subexpressions
    are replaced by their helper, so a subexpression that only occurs inside one
    repeated subexpression is not hoisted on its own.

    @param prefix: Prefix of the names of the new helpers.
    @param reserved: Names that must not be used for new helpers.
    @return: The new helper definitions, each referencing only earlier ones,
        and the rewritten expressions.

    >>> from pysymde import y, sin
    >>> defs, rewritten = eliminate_common_subexpressions([y(0) + y(1), sin(y(0) + y(1))])
    >>> [d.name for d in defs], rewritten[0], rewritten[1].arg
    (['_cse0'], HelperRef(name='_cse0'), HelperRef(name='_cse0'))
    """
    counts: Dict[Expression, int] = {}
    order: List[Expression] = []
    for root in exprs:
        if not _hoistable(root):
            continue
        if root in counts:
            counts[root] += 1
            continue
        counts[root] = 1
        stack = [(root, iter(root.children))]
        while stack:
            node, children = stack[-1]
            for child in children:
                if not _hoistable(child):
                    continue
                if child in counts:
                    counts[child] += 1
                    continue
                counts[child] = 1
                stack.append((child, iter(child.children)))
                break
            else:
                stack.pop()
                order.append(node)

    names: Dict[Expression, str] = {}
    k = 0
    for node in order:
        if counts[node] < 2:
            continue
        while f"{prefix}{k}" in reserved:
            k += 1
        names[node] = f"{prefix}{k}"
        k += 1

    rewriter = _Substituter({node: HelperRef(name) for node, name in names.items()})
    defs = [HelperDefinition(name, replace_children(node, [rewriter.visit(c) for c in node.children]))
            for node, name in names.items()]
    return defs, [rewriter.visit(e) for e in exprs]

# numerical evaluation

PastFunction = Callable[[int, float], float]

class _Evaluator(genericvisitor.Transformer[Expression, float]):
    """Implementation of L{evaluate()}."""

    def __init__(self, time: float, state: Sequence[float], params: Mapping[str, float],
                 helpers: Mapping[str, Expression], past: Optional[PastFunction]):
        super().__init__()
        self.time = time
        self.state = state
        self.params = params
        self.helpers = helpers
        self.past = past

    def visit_Constant(self, e: Constant) -> float:
        return e.value
    def visit_Time(self, e: Time) -> float:
        return self.time
    def visit_State(self, e: State) -> float:
        return float(self.state[e.index])
    def visit_PastState(self, e: PastState) -> float:
        if self.past is None:
            raise SymbolicError(f"no past given to evaluate {e!r}")
        return float(self.past(e.index, self.visit(e.at)))
    def visit_Parameter(self, e: Parameter) -> float:
        try:
            return float(self.params[e.name])
        except KeyError:
            raise SymbolicError(f"no value for parameter {e.name!r}") from None
    def visit_HelperRef(self, e: HelperRef) -> float:
        try:
            return self.visit(self.helpers[e.name])
        except KeyError:
            raise SymbolicError(f"unknown helper {e.name!r}") from None
    def visit_Sum(self, e: Sum) -> float:
        return sum(self.visit(c) for c in e.terms)
    def visit_Product(self, e: Product) -> float:
        result = 1.0
        for c in e.factors:
            result *= self.visit(c)
        return result
    def visit_Power(self, e: Power) -> float:
        return _power(self.visit(e.base), self.visit(e.exponent))
    def visit_Call(self, e: Call) -> float:
        return _call(e.fn, self.visit(e.arg))

def evaluate(e: Expression, time: float = 0.0, state: Sequence[float] = (),
             params: Mapping[str, float] = {},
             helpers: Union[Mapping[str, Expression], Iterable[HelperDefinition]] = (),
             past: Optional[PastFunction] = None) -> float:
    """
    Evaluate an expression directly, without lowering. Slow, meant for checks and tests.

    @param past: Function C{(index, time) -> value} giving delayed states.

    >>> from pysymde import y
    >>> round(evaluate(0.2 + y(2)*(y(0) - 5.7), state=[0.1, 0.2, 0.3]), 12)
    -1.48
    """
    with np.errstate(all='ignore'):
        return _Evaluator(time, state, params, _helper_map(helpers), past).visit(e)
