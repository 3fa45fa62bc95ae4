"""
Visitors and helper functions for L{pysymde.Expression} trees.
"""
try:
  from termcolor import colored as _colored
except ImportError as exc:
  def _colored(s, *args, **kwargs):  # type: ignore
    return str(s)

import sys
import typing as t

import attr

from pysymde import (Expression, Constant, Time, State, PastState, Parameter, HelperRef, Call,
                     HelperDefinition, SystemSpec)

from . import genericvisitor

# visitors

@attr.s(auto_attribs=True)
class Symbols:
  """
  Symbols found by L{SymbolCollector}.

  @ivar past: Distinct delayed states, in order of first occurrence.
  """
  states: t.Set[int] = attr.ib(factory=set)
  past: t.List[PastState] = attr.ib(factory=list)
  parameters: t.Set[str] = attr.ib(factory=set)
  helpers: t.Set[str] = attr.ib(factory=set)
  uses_time: bool = False

class SymbolCollector(genericvisitor.Visitor[Expression]):
  """
  Visits expressions and records the states, delayed states, parameters and helpers
  they refer to. The states read inside a delay expression count as current states.
  """

  def __init__(self) -> None:
    self.symbols = Symbols()

  def visit_State(self, ob: State) -> None:
    self.symbols.states.add(ob.index)

  def visit_PastState(self, ob: PastState) -> None:
    if ob not in self.symbols.past:
      self.symbols.past.append(ob)

  def visit_Parameter(self, ob: Parameter) -> None:
    self.symbols.parameters.add(ob.name)

  def visit_HelperRef(self, ob: HelperRef) -> None:
    self.symbols.helpers.add(ob.name)

  def visit_Time(self, ob: Time) -> None:
    self.symbols.uses_time = True

  def unknown_visit(self, ob: Expression) -> None:
    pass

  def unknown_departure(self, ob: Expression) -> None:
    pass

class PrintVisitor(genericvisitor.Visitor[Expression]):
  """
  Visit expressions and print each node with the defined format string.
  Available substitutions are:
    - "{node_type}" (colored)
    - "{node_label}": the value, index, name or function of the node
    - "{node_source}": the node as model file text
  The default format string is: "{node_type} {node_label}"
  """

  _COLOR_MAP = {
    'Constant': 'blue',
    'Time': 'magenta',
    'State': 'cyan',
    'PastState': 'cyan',
    'Parameter': 'yellow',
    'HelperRef': 'green',
    'Call': 'red',
  }

  def __init__(self, formatstr: str = "{node_type} {node_label}",
               colorize: bool = True, out: t.Optional[t.TextIO] = None):
        self.formatstr = formatstr
        self.colorize = colorize
        self.out = out
        self.depth = 0

  def unknown_visit(self, ob: Expression) -> None:
    name = type(ob).__name__
    tokens = dict(
      node_type = _colored(name, self._COLOR_MAP.get(name)) if self.colorize else name,
      node_label = _label(ob),
      node_source = str(ob),
      )
    print('| ' * self.depth + self.formatstr.format(**tokens), file=self.out or sys.stdout)
    self.depth += 1

  def unknown_departure(self, ob: Expression) -> None:
    self.depth -= 1

def _label(ob: Expression) -> str:
  if isinstance(ob, Constant):
    return repr(ob.value)
  if isinstance(ob, (State, PastState)):
    return str(ob.index)
  if isinstance(ob, (Parameter, HelperRef)):
    return ob.name
  if isinstance(ob, Call):
    return ob.fn
  return ''

def _get_Expression_children(ob: Expression) -> t.Iterable[Expression]:
    return ob.children

def walk_Expression(ob: Expression, visitor: genericvisitor.Visitor[Expression]) -> None:
    genericvisitor.walk(ob, visitor, _get_Expression_children)

def walkabout_Expression(ob: Expression, visitor: genericvisitor.Visitor[Expression]) -> None:
    genericvisitor.walkabout(ob, visitor, _get_Expression_children)

def collect_symbols(exprs: t.Iterable[Expression]) -> Symbols:
    """
    Symbols used by C{exprs}.

    >>> from pysymde import y, t, symbol
    >>> s = collect_symbols([symbol('k') * y(0, t - 1) + y(1)])
    >>> sorted(s.states), s.parameters, s.uses_time
    ([1], {'k'}, True)
    """
    collector = SymbolCollector()
    for e in exprs:
        walk_Expression(e, collector)
    return collector.symbols

def print_system(spec: SystemSpec, colorize: bool = True, out: t.Optional[t.TextIO] = None) -> None:
    """Print the expression trees of the helpers, drift and diffusion of C{spec}."""
    stream = out or sys.stdout
    visitor = PrintVisitor(colorize=colorize, out=stream)
    sections: t.List[t.Tuple[str, t.Sequence[t.Union[Expression, HelperDefinition]]]] = [
      ('helper', spec.helpers), ('drift', spec.drift), ('diffusion', spec.diffusion or ())]
    for title, entries in sections:
        for i, entry in enumerate(entries):
            if isinstance(entry, HelperDefinition):
                print(f"{title} {entry.name}:", file=stream)
                walkabout_Expression(entry.value, visitor)
            else:
                print(f"{title} {i}:", file=stream)
                walkabout_Expression(entry, visitor)
