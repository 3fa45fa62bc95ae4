"""
Storage of the past of a delay differential equation.

The past is a doubly linked list of L{Anchor}s: states and derivatives at previous
time steps. Between two anchors the past is the cubic Hermite polynomial matching
the values and derivatives at both ends.

Each site of the system that accesses the past has its own search cursor: the
times requested by one site move slowly and monotonically, so a lookup usually
moves the cursor by at most one anchor.
"""

from typing import (Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union)
import math
import warnings

import attr
import numpy as np

from pysymde import ContractViolation, InputError, PastExtrapolationWarning, PastUnderflow

__all__ = ['Anchor', 'AnchorList', 'PastStats', 'hermite_interpolate', 'hermite_weights',
           'constant_past', 'past_from_function', 'from_anchors']

@attr.s(auto_attribs=True, eq=False)
class Anchor:
    """A node of an L{AnchorList}."""
    t: float
    y: np.ndarray
    dy: np.ndarray
    prev: Optional['Anchor'] = attr.ib(default=None, repr=False)
    next: Optional['Anchor'] = attr.ib(default=None, repr=False)

def hermite_weights(s: float, width: float) -> Tuple[float, float, float, float]:
    """
    Weights of M{(y0, dy0, y1, dy1)} in the value of the cubic Hermite polynomial at the
    normalized position C{s} of an interval of length C{width}.
    """
    s2 = s * s
    s3 = s2 * s
    return (2*s3 - 3*s2 + 1, (s3 - 2*s2 + s) * width, -2*s3 + 3*s2, (s3 - s2) * width)

def hermite_interpolate(a0: Anchor, a1: Anchor, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Value and derivative at C{t} of the cubic matching the values and derivatives of two
    anchors. C{t} may lie outside of the interval (extrapolation).

    @raises InputError: If both anchors have the same time.

    >>> a0 = Anchor(0.0, np.array([0.0]), np.array([0.0]))
    >>> a1 = Anchor(1.0, np.array([1.0]), np.array([3.0]))
    >>> hermite_interpolate(a0, a1, 0.5)[0]
    array([0.125])
    """
    width = a1.t - a0.t
    if not width > 0:
        raise InputError(f"degenerate interpolation interval [{a0.t}, {a1.t}]")
    s = (t - a0.t) / width
    w0, w1, w2, w3 = hermite_weights(s, width)
    value = w0 * a0.y + w1 * a0.dy + w2 * a1.y + w3 * a1.dy
    d0 = (6*s*s - 6*s) / width
    derivative = d0 * a0.y + (3*s*s - 4*s + 1) * a0.dy - d0 * a1.y + (3*s*s - 2*s) * a1.dy
    return value, derivative

@attr.s(auto_attribs=True)
class PastStats:
    """
    @ivar traversed: Total number of anchors the cursors moved over.
    """
    queries: int = 0
    traversed: int = 0
    extrapolations: int = 0

    @property
    def traversed_per_query(self) -> float:
        return self.traversed / self.queries if self.queries else 0.0

class AnchorList:
    """
    Ordered anchors with strictly increasing times.

    @ivar n: Dimension of the anchored states.
    """

    # Site id of lookups made by state_at().
    STATE_SITE = -1

    def __init__(self, n: int):
        self.n = n
        self.first: Optional[Anchor] = None
        self.last: Optional[Anchor] = None
        self._size = 0
        self._cursors: Dict[int, Anchor] = {}
        self._weights: Dict[int, Tuple[float, Anchor, Anchor, Tuple[float, float, float, float]]] = {}
        self.stats = PastStats()

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[Anchor]:
        anchor = self.first
        while anchor is not None:
            yield anchor
            anchor = anchor.next

    @property
    def times(self) -> List[float]:
        return [a.t for a in self]

    def _check(self, t: float, y: Sequence[float], dy: Sequence[float]) -> Anchor:
        y_arr = np.array(y, dtype=float)
        dy_arr = np.array(dy, dtype=float)
        if y_arr.shape[:1] != (self.n,) or dy_arr.shape != y_arr.shape:
            raise InputError(f"anchor states must have length {self.n}, got shapes {y_arr.shape} and {dy_arr.shape}")
        if not (math.isfinite(t) and np.all(np.isfinite(y_arr)) and np.all(np.isfinite(dy_arr))):
            raise InputError(f"anchor at t={t} is not finite")
        return Anchor(float(t), y_arr, dy_arr)

    def _changed(self) -> None:
        self._weights.clear()

    def append(self, t: float, y: Sequence[float], dy: Sequence[float]) -> Anchor:
        """
        Add an anchor after the newest one.

        @raises InputError: If C{t} is not after the newest anchor or a value is not finite.
        """
        anchor = self._check(t, y, dy)
        if self.last is not None and not anchor.t > self.last.t:
            raise InputError(f"anchor times must increase: {anchor.t} after {self.last.t}")
        anchor.prev = self.last
        if self.last is None:
            self.first = anchor
        else:
            self.last.next = anchor
        self.last = anchor
        self._size += 1
        self._changed()
        return anchor

    def insert(self, t: float, y: Sequence[float], dy: Sequence[float]) -> Anchor:
        """Add an anchor at its place in time."""
        if self.last is None or t > self.last.t:
            return self.append(t, y, dy)
        anchor = self._check(t, y, dy)
        after: Optional[Anchor] = self.last
        while after is not None and after.t > t:
            after = after.prev
        if after is not None and after.t == t:
            raise InputError(f"there is already an anchor at t={t}")
        before = self.first if after is None else after.next
        assert before is not None
        anchor.prev, anchor.next = after, before
        before.prev = anchor
        if after is None:
            self.first = anchor
        else:
            after.next = anchor
        self._size += 1
        self._changed()
        return anchor

    def truncate(self, t_keep: float) -> None:
        """
        Forget the oldest anchors, keeping exactly one anchor at or before C{t_keep}
        (and always at least two anchors).
        """
        removed = False
        while (self._size > 2 and self.first is not None and self.first.next is not None
               and self.first.next.t <= t_keep):
            old = self.first
            self.first = old.next
            self.first.prev = None # type:ignore[union-attr]
            old.next = None
            self._size -= 1
            removed = True
        if removed:
            self._cursors = {site: a for site, a in self._cursors.items() if a.prev is not None or a is self.first}
            self._changed()

    def locate(self, site: int, t: float) -> Tuple[Anchor, Anchor, bool]:
        """
        The pair of adjacent anchors to interpolate C{t} with, and whether C{t} is after the
        newest anchor. A time equal to an anchor's time gives the pair starting with that
        anchor, except for the newest anchor.

        @param site: Identifies the cursor to start the search from.
        @raises PastUnderflow: If C{t} is before the earliest anchor.
        """
        if self._size < 2:
            raise ContractViolation("at least two anchors are needed to access the past")
        assert self.first is not None and self.last is not None
        if t < self.first.t:
            raise PastUnderflow(f"the past at t={t} was requested but it starts at t={self.first.t}, "
                                "the initial past is too short")
        self.stats.queries += 1
        anchor = self._cursors.get(site, self.first)
        traversed = 0
        while anchor.t > t and anchor.prev is not None:
            anchor = anchor.prev
            traversed += 1
        while anchor.next is not None and anchor.next.t <= t and anchor.next.next is not None:
            anchor = anchor.next
            traversed += 1
        if anchor.next is None:
            anchor = anchor.prev # type:ignore[assignment]
        self.stats.traversed += traversed
        self._cursors[site] = anchor
        assert anchor.next is not None
        extrapolating = t > self.last.t
        if extrapolating:
            self.stats.extrapolations += 1
        return anchor, anchor.next, extrapolating

    def past_value(self, index: int, t: float, site: int) -> float:
        """
        Interpolated component C{index} of the past at time C{t}, the signature of a
        L{pysymde.program.PastAccessor}.

        Beyond the newest anchor, the cubic of the newest pair of anchors is extrapolated.
        Reaching further than the length of that interval warns with a
        L{PastExtrapolationWarning}.
        """
        t = float(t)
        cached = self._weights.get(site)
        if cached is not None and cached[0] == t:
            _, a0, a1, w = cached
        else:
            a0, a1, extrapolating = self.locate(site, t)
            width = a1.t - a0.t
            if extrapolating and t - a1.t > width:
                warnings.warn(f"extrapolating the past {t - a1.t:g} beyond the newest anchor, "
                              f"further than the newest interval of length {width:g}",
                              PastExtrapolationWarning)
            w = hermite_weights((t - a0.t) / width, width)
            self._weights[site] = (t, a0, a1, w)
        return float(w[0] * a0.y[index] + w[1] * a0.dy[index] + w[2] * a1.y[index] + w[3] * a1.dy[index])

    def state_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Interpolated state and derivative at time C{t}."""
        a0, a1, _ = self.locate(self.STATE_SITE, t)
        return hermite_interpolate(a0, a1, t)

def from_anchors(triples: Iterable[Tuple[float, Sequence[float], Sequence[float]]]) -> AnchorList:
    """
    Build an L{AnchorList} from explicit C{(t, y, dy)} triples, ordered in time.
    """
    items = list(triples)
    if len(items) < 2:
        raise InputError("at least two anchors are needed")
    anchors = AnchorList(len(items[0][1]))
    for t, y, dy in items:
        anchors.append(t, y, dy)
    return anchors

def constant_past(y0: Sequence[float], t0: float, max_delay: float, margin: float = 1.0) -> AnchorList:
    """
    A constant past: two anchors at M{t0 - max_delay - margin} and M{t0} with value
    C{y0} and derivative zero.

    >>> past = constant_past([1.0, 0.0], 0.0, 40.0)
    >>> round(past.past_value(0, -12.5, 0), 12), past.times
    (1.0, [-41.0, 0.0])
    """
    if not max_delay >= 0 or not margin > 0:
        raise InputError(f"invalid past span: max_delay={max_delay}, margin={margin}")
    n = len(y0)
    zero = np.zeros(n)
    return from_anchors([(t0 - max_delay - margin, y0, zero), (t0, y0, zero)])

def past_from_function(fn: Callable[[float], Union[Sequence[float], np.ndarray]], t0: float, max_delay: float,
                       tol: float = 1e-6, max_anchors: int = 10000, initial: int = 16) -> AnchorList:
    """
    Anchors approximating C{fn} on M{[t0 - max_delay, t0]}.

    C{fn} is sampled at C{initial} equidistant times, derivatives are computed by central
    differences. Then intervals are split in halves while the interpolant deviates from
    C{fn} by more than C{tol} at a quarter, the middle or three quarters of the interval.

    @param max_anchors: Upper bound of the number of anchors, refinement stops there.
    @raises InputError: If C{fn} gives non-finite values.
    """
    if not max_delay > 0:
        raise InputError(f"max_delay must be positive, got {max_delay}")
    if initial < 2:
        raise InputError("at least two initial anchors are needed")

    def sample(t: float) -> np.ndarray:
        value = np.array(fn(t), dtype=float).reshape(-1)
        if not np.all(np.isfinite(value)):
            raise InputError(f"the initial past function is not finite at t={t}")
        return value

    def anchor_at(t: float) -> Anchor:
        delta = np.cbrt(np.finfo(float).eps) * max(1.0, abs(t))
        derivative = (sample(t + delta) - sample(t - delta)) / (2 * delta)
        return Anchor(t, sample(t), derivative)

    def deviation(a0: Anchor, a1: Anchor) -> float:
        worst = 0.0
        for s in (0.25, 0.5, 0.75):
            tm = a0.t + s * (a1.t - a0.t)
            worst = max(worst, float(np.max(np.abs(hermite_interpolate(a0, a1, tm)[0] - sample(tm)))))
        return worst

    start = t0 - max_delay
    anchors = [anchor_at(start + (t0 - start) * i / (initial - 1)) for i in range(initial - 1)]
    anchors.append(anchor_at(t0))
    result: List[Anchor] = []
    count = len(anchors)
    # Depth first over the intervals, in time order.
    todo = [(anchors[i], anchors[i+1]) for i in reversed(range(len(anchors) - 1))]
    result.append(anchors[0])
    while todo:
        a0, a1 = todo.pop()
        if count < max_anchors and deviation(a0, a1) > tol:
            middle = anchor_at(0.5 * (a0.t + a1.t))
            if a0.t < middle.t < a1.t:
                count += 1
                todo.append((middle, a1))
                todo.append((a0, middle))
                continue
        result.append(a1)
    return from_anchors((a.t, a.y, a.dy) for a in result)
