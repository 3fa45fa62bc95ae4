import os
from typing import Callable, List

import numpy as np
import pytest
from hypothesis import strategies as st

import pysymde
from pysymde import Call, Constant, Expression, symbol, system, y
from pysymde.generators import roessler, sunflower

MODELS = os.path.join(os.path.dirname(__file__), 'models')

def model_path(name: str) -> str:
  return os.path.join(MODELS, name)

_roessler = roessler()
_sunflower = sunflower()
_decay = system([-0.5 * y(0)])

@pytest.fixture
def roessler_spec() -> pysymde.SystemSpec:
  return _roessler

@pytest.fixture
def sunflower_spec() -> pysymde.SystemSpec:
  return _sunflower

@pytest.fixture
def decay_spec() -> pysymde.SystemSpec:
  return _decay

@pytest.fixture
def rng() -> np.random.Generator:
  return np.random.Generator(np.random.PCG64(20211018))

# random expressions of y(0), y(1), y(2) and the parameters a and b

STATES = [y(0), y(1), y(2)]
PARAMS = {'a': 0.7, 'b': -0.3}

def _leaves() -> st.SearchStrategy[Expression]:
  return st.one_of(
    st.sampled_from(STATES),
    st.sampled_from([symbol(name) for name in PARAMS]),
    st.floats(-1.5, 1.5, allow_nan=False, allow_infinity=False).map(Constant),
  )

def _extend(children: st.SearchStrategy[Expression]) -> st.SearchStrategy[Expression]:
  pairs = st.tuples(children, children)
  return st.one_of(
    pairs.map(lambda p: p[0] + p[1]),
    pairs.map(lambda p: p[0] - p[1]),
    pairs.map(lambda p: p[0] * p[1]),
    st.tuples(children, st.sampled_from(['sin', 'cos', 'tanh'])).map(lambda p: Call(p[1], p[0])),
    # Powers of leaves only, so values and derivatives stay moderate.
    st.tuples(_leaves(), st.sampled_from([2.0, 3.0])).map(lambda p: p[0] ** p[1]),
  )

expressions = st.recursive(_leaves(), _extend, max_leaves=6)
"""Smooth random expressions."""

states = st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=3, max_size=3)

def rk4(f: Callable[[float, np.ndarray], np.ndarray], y0: List[float], t0: float, t1: float, h: float) -> np.ndarray:
  """Classic fixed step Runge-Kutta, the reference solution of the tests."""
  steps = int(round((t1 - t0) / h))
  h = (t1 - t0) / steps
  state = np.array(y0, dtype=float)
  t = t0
  for _ in range(steps):
    k1 = f(t, state)
    k2 = f(t + h/2, state + h/2 * k1)
    k3 = f(t + h/2, state + h/2 * k2)
    k4 = f(t + h, state + h * k3)
    state = state + h/6 * (k1 + 2*k2 + 2*k3 + k4)
    t += h
  return state
