import math

import pytest
from hypothesis import given, settings

from pysymde import (Call, Constant, ExpressionSyntaxError, HelperRef, Parameter, PastState, Power,
                     State, Time, y, t)
from pysymde.astutils import parse_expression, to_source
from pysymde.symbolic import simplify_basic
from .fixtures import expressions

def test_parse_states_and_names() -> None:
    assert parse_expression('y(3)') == State(3)
    assert parse_expression('y(0, t - tau)') == PastState(0, t - Parameter('tau'))
    assert parse_expression('coupling * y(1)', helpers={'coupling'}) == HelperRef('coupling') * State(1)
    assert parse_expression('coupling') == Parameter('coupling')
    assert parse_expression('t') == Time()
    assert parse_expression('sin(y(0))') == Call('sin', State(0))

def test_parse_constants() -> None:
    assert parse_expression('pi') == Constant(math.pi)
    assert parse_expression('-2') == Constant(-2.0)
    assert parse_expression('1e-3') == Constant(0.001)
    assert parse_expression('inf') == Constant(math.inf)

def test_parse_caret_is_power() -> None:
    assert parse_expression('y(0)^2') == Power(State(0), Constant(2.0))
    assert parse_expression('y(0)**2') == parse_expression('y(0)^2')
    # right-associative
    assert parse_expression('2^3^2') == Power(Constant(2), Power(Constant(3), Constant(2)))
    assert parse_expression('y(0) / 2') == State(0) * Power(Constant(2.0), Constant(-1.0))

@pytest.mark.parametrize('text', [
    'y(-1)',
    'y(0.5)',
    'y(i)',
    'y()',
    'y(0, t, 1)',
    'y + 1',
    'sin',
    'foo(y(0))',
    'sin(y(0), y(1))',
    'y(0) < 1',
    'y(0) % 2',
    "'text'",
    'y(0) +',
    'True',
    ])
def test_parse_rejects(text: str) -> None:
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(text)

def test_error_location() -> None:
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression('foo(y(0))', filename='model.ini', lineno=12)
    assert info.value.col == 1
    assert info.value.lineno == 12
    assert str(info.value).startswith('model.ini:12:1: ')

    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression('2 + y(-1)')
    assert info.value.col == 7

    # columns refer to the text as written, before '^' is translated
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression('y(0)^2 + foo(1)')
    assert info.value.col == 10

def test_error_without_filename() -> None:
    err = ExpressionSyntaxError("bad", lineno=3, col=2)
    assert str(err) == '<string>:3:2: bad'
    assert str(ExpressionSyntaxError("bad")) == 'bad'

def test_to_source() -> None:
    assert to_source(y(1, t)) == 'y(1, t)'
    assert '^' in to_source(y(0) ** 2)
    assert '**' not in to_source(y(0) ** 2)
    assert to_source(Parameter('a')) == 'a'
    assert str(Call('exp', Time())) == 'exp(t)'

def test_source_of_special_constants() -> None:
    assert parse_expression(to_source(Constant(math.inf))) == Constant(math.inf)
    assert parse_expression(to_source(Constant(-math.inf))) == Constant(-math.inf)
    assert math.isnan(parse_expression(to_source(Constant(math.nan))).value)

@settings(max_examples=80, deadline=None)
@given(expressions)
def test_source_parses_back(expr) -> None:
    e = simplify_basic(expr)
    assert simplify_basic(parse_expression(to_source(e))) == e
