"""
Expression text grammar: parsing through L{ast}, rendering through L{astor}.

The grammar is Python's expression syntax restricted to::

    + - * / ^ (or **), unary minus, parentheses, numbers,
    t, y(i), y(i, <expression of t and states>), fn(<expression>),
    identifiers (parameters or helpers), pi, inf, nan

C{^} is exponentiation and is right-associative.
"""

from typing import AbstractSet, List, Optional, cast
import ast
import math

import astor

from pysymde import (Expression, Constant, Time, State, PastState, Parameter, HelperRef,
                     Sum, Product, Power, Call, ExpressionSyntaxError, FUNCTIONS, genericvisitor)

_NAMED_CONSTANTS = {'pi': math.pi, 'inf': math.inf, 'nan': math.nan}

def _original_column(line: str, col: int) -> int:
    # Each '^' became '**', shifting the columns of the translated text by one.
    shift = 0
    orig = 0
    for char in line:
        if orig + shift >= col:
            break
        if char == '^':
            shift += 1
        orig += 1
    return col - shift

def parse_expression(text: str, helpers: AbstractSet[str] = frozenset(),
                     filename: Optional[str] = None, lineno: int = 1) -> Expression:
    """
    Parse expression text into an L{Expression}.

    @param helpers: Names to parse as L{HelperRef}; other identifiers become L{Parameter}s.
    @param filename: For diagnostics only.
    @param lineno: Line number of the text in C{filename}, for diagnostics only.
    @raises ExpressionSyntaxError: With the location of the offending token.

    >>> parse_expression('b + y(2)*(y(0) - c)')
    Sum(terms=(Parameter(name='b'), Product(factors=(State(index=2), Sum(terms=(State(index=0), Product(factors=(Constant(value=-1.0), Parameter(name='c')))))))))
    >>> parse_expression('2^3^2') == Power(Constant(2), Power(Constant(3), Constant(2)))
    True
    """
    if '\n' in text.strip():
        raise ExpressionSyntaxError("expected a single line expression", filename, lineno)
    source = text.strip().replace('^', '**')
    try:
        tree = ast.parse(source, filename or '<string>', mode='eval')
    except SyntaxError as e:
        col = _original_column(text.strip(), (e.offset or 1) - 1) + 1
        raise ExpressionSyntaxError(f"invalid syntax in {text.strip()!r}", filename, lineno, col) from e
    return _ExpressionBuilder(text.strip(), helpers, filename, lineno).visit(tree.body)

class _ExpressionBuilder(ast.NodeVisitor):
    """Implementation of L{parse_expression()}."""

    def __init__(self, text: str, helpers: AbstractSet[str], filename: Optional[str], lineno: int):
        self.text = text
        self.helpers = helpers
        self.filename = filename
        self.lineno = lineno

    def error(self, node: ast.AST, msg: str) -> ExpressionSyntaxError:
        col = _original_column(self.text, getattr(node, 'col_offset', 0)) + 1
        return ExpressionSyntaxError(msg, self.filename, self.lineno, col)

    def visit(self, node: ast.AST) -> Expression:
        return cast(Expression, super().visit(node))

    def generic_visit(self, node: ast.AST) -> Expression:
        raise self.error(node, f"unsupported syntax: {type(node).__name__}")

    def visit_Constant(self, node: ast.Constant) -> Expression:
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise self.error(node, f"unsupported literal {node.value!r}")
        return Constant(node.value)

    def visit_Name(self, node: ast.Name) -> Expression:
        if node.id == 't':
            return Time()
        if node.id in _NAMED_CONSTANTS:
            return Constant(_NAMED_CONSTANTS[node.id])
        if node.id == 'y' or node.id in FUNCTIONS:
            raise self.error(node, f"{node.id!r} must be called")
        if node.id in self.helpers:
            return HelperRef(node.id)
        return Parameter(node.id)

    def visit_UnaryOp(self, node: ast.UnaryOp) -> Expression:
        operand = self.visit(node.operand)
        if isinstance(node.op, ast.UAdd):
            return operand
        if isinstance(node.op, ast.USub):
            return -operand
        raise self.error(node, f"unsupported operator {type(node.op).__name__}")

    def visit_BinOp(self, node: ast.BinOp) -> Expression:
        left = self.visit(node.left)
        right = self.visit(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, ast.Pow):
            return Power(left, right)
        raise self.error(node, f"unsupported operator {type(node.op).__name__}")

    def visit_Call(self, node: ast.Call) -> Expression:
        if not isinstance(node.func, ast.Name):
            raise self.error(node, "only plain function names can be called")
        if node.keywords:
            raise self.error(node, "keyword arguments are not supported")
        name = node.func.id
        if name == 'y':
            if not 1 <= len(node.args) <= 2:
                raise self.error(node, "y() takes a state index and an optional time")
            index_node = node.args[0]
            if not (isinstance(index_node, ast.Constant) and isinstance(index_node.value, int)
                    and not isinstance(index_node.value, bool) and index_node.value >= 0):
                raise self.error(index_node, "state index must be a non-negative integer literal")
            if len(node.args) == 1:
                return State(index_node.value)
            return PastState(index_node.value, self.visit(node.args[1]))
        if name not in FUNCTIONS:
            raise self.error(node, f"unknown function {name!r}")
        if len(node.args) != 1:
            raise self.error(node, f"{name}() takes exactly one argument")
        return Call(name, self.visit(node.args[0]))

# rendering

class _SourceBuilder(genericvisitor.Transformer[Expression, ast.expr]):
    """Implementation of L{to_source()}: builds the Python AST of an expression."""

    def visit_Constant(self, e: Constant) -> ast.expr:
        value = e.value
        if math.isnan(value):
            return ast.Name(id='nan', ctx=ast.Load())
        if math.isinf(value):
            node: ast.expr = ast.Name(id='inf', ctx=ast.Load())
        else:
            node = ast.Constant(value=abs(value), kind=None)
        if math.copysign(1.0, value) < 0:
            return ast.UnaryOp(op=ast.USub(), operand=node)
        return node

    def visit_Time(self, e: Time) -> ast.expr:
        return ast.Name(id='t', ctx=ast.Load())

    def visit_State(self, e: State) -> ast.expr:
        return ast.Call(func=ast.Name(id='y', ctx=ast.Load()),
                        args=[ast.Constant(value=e.index, kind=None)], keywords=[])

    def visit_PastState(self, e: PastState) -> ast.expr:
        return ast.Call(func=ast.Name(id='y', ctx=ast.Load()),
                        args=[ast.Constant(value=e.index, kind=None), self.visit(e.at)], keywords=[])

    def visit_Parameter(self, e: Parameter) -> ast.expr:
        return ast.Name(id=e.name, ctx=ast.Load())

    def visit_HelperRef(self, e: HelperRef) -> ast.expr:
        return ast.Name(id=e.name, ctx=ast.Load())

    def _chain(self, op: ast.operator, children: List[ast.expr]) -> ast.expr:
        node = children[0]
        for child in children[1:]:
            node = ast.BinOp(left=node, op=op, right=child)
        return node

    def visit_Sum(self, e: Sum) -> ast.expr:
        return self._chain(ast.Add(), [self.visit(c) for c in e.terms])

    def visit_Product(self, e: Product) -> ast.expr:
        return self._chain(ast.Mult(), [self.visit(c) for c in e.factors])

    def visit_Power(self, e: Power) -> ast.expr:
        return ast.BinOp(left=self.visit(e.base), op=ast.Pow(), right=self.visit(e.exponent))

    def visit_Call(self, e: Call) -> ast.expr:
        return ast.Call(func=ast.Name(id=e.fn, ctx=ast.Load()), args=[self.visit(e.arg)], keywords=[])

def to_source(e: Expression) -> str:
    """
    Render an expression in the text grammar.

    >>> from pysymde import y, t
    >>> to_source(y(1, t))
    'y(1, t)'
    """
    tree = _SourceBuilder().visit(e)
    # Joining the source fragments as-is keeps long expressions on one line.
    source = cast(str, astor.to_source(tree, pretty_source=''.join))
    # No other construct of the grammar contains '**'.
    return source.strip().replace('**', '^')
