"""
Double dispatch over expression trees.

A L{Visitor} only observes the nodes it walks through, a L{Transformer} maps every
node to a result. Both dispatch on the node class name.
"""
from typing import Callable, Dict, Generic, Iterable, Iterator, List, Set, Tuple, TypeVar

T = TypeVar("T")
R = TypeVar("R")

class Visitor(Generic[T]):
  """
  Base class for side-effecting traversals.

  L{walk} calls ``visit_<ClassName>`` when it enters a node, L{walkabout} also calls
  ``depart_<ClassName>`` once all children of the node are done. A node class
  without a matching method goes to L{unknown_visit} or L{unknown_departure},
  which both raise: a subclass handles every node class it can meet, or overrides
  the fallbacks.
  """

  def visit(self, ob: T) -> None:
    handler = getattr(self, 'visit_' + ob.__class__.__name__, self.unknown_visit)
    handler(ob)

  def depart(self, ob: T) -> None:
    handler = getattr(self, 'depart_' + ob.__class__.__name__, self.unknown_departure)
    handler(ob)

  def unknown_visit(self, ob: T) -> None:
    raise NotImplementedError(
        f'{self.__class__.__name__} has no visit method for {ob.__class__.__name__}')

  def unknown_departure(self, ob: T) -> None:
    raise NotImplementedError(
        f'{self.__class__.__name__} has no depart method for {ob.__class__.__name__}')

class Transformer(Generic[T, R]):
  """
  Like L{Visitor}, but ``visit_...`` methods return a value: the result for the object.

  Results are memoized per object (objects must be hashable), so an object that is
  shared several times in a DAG is transformed only once. Subclasses recurse by
  calling `visit()` on children themselves.
  """

  def __init__(self) -> None:
    self._memo: Dict[T, R] = {}

  def visit(self, ob: T) -> R:
    """Transform an object, or return the memoized result."""
    try:
      return self._memo[ob]
    except KeyError:
      pass
    method = 'visit_' + ob.__class__.__name__
    visitor: Callable[[T], R] = getattr(self, method, self.unknown_visit)
    result = visitor(ob)
    self._memo[ob] = result
    return result

  def unknown_visit(self, ob: T) -> R:
    raise NotImplementedError(
        '%s transforming unknown object type: %s'
        % (self.__class__, ob.__class__.__name__))

def walk(ob: T, visitor: Visitor[T], get_children: Callable[[T], Iterable[T]]) -> None:
    """
    Visit C{ob} and then, depth first, everything below it.

    A sub-expression shared by several parents is visited once per parent.

    @param ob: The root node.
    @param visitor: Receives a C{visit} call per node.
    @param get_children: Returns the children of a node, in evaluation order.
    """
    visitor.visit(ob)
    for child in get_children(ob):
        walk(child, visitor, get_children)

def walkabout(ob: T, visitor: Visitor[T], get_children: Callable[[T], Iterable[T]]) -> None:
    """
    Like L{walk}, with a C{depart} call on each node after its children.
    """
    visitor.visit(ob)
    for child in get_children(ob):
        walkabout(child, visitor, get_children)
    visitor.depart(ob)

def iter_unique(roots: Iterable[T], get_children: Callable[[T], Iterable[T]]) -> Iterator[T]:
    """
    Iterate over the distinct objects of one or several DAGs in post-order: an object
    comes after all its children. Objects are compared by equality, so structurally
    equal sub-objects are only yielded once.

    This is iterative, deep DAGs do not hit the recursion limit.
    """
    seen: Set[T] = set()
    for root in roots:
        if root in seen:
            continue
        stack: List[Tuple[T, Iterator[T]]] = [(root, iter(get_children(root)))]
        seen.add(root)
        while stack:
            ob, children = stack[-1]
            for child in children:
                if child not in seen:
                    seen.add(child)
                    stack.append((child, iter(get_children(child))))
                    break
            else:
                stack.pop()
                yield ob
