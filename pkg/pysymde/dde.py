"""
Integration of delay differential equations with the Bogacki-Shampine 3(2) pair.

Delayed states are read from an L{AnchorList} by cubic Hermite interpolation; every
accepted step appends an anchor with the new state and its derivative. When a delay
is shorter than the step, the past is extrapolated.

The derivative of the solution usually jumps at the initial time and this jump
propagates along the delays. Two ways to deal with it:

    - L{DdeStepper.step_on_discontinuities}: land steps exactly on the points where
      derivatives jump, for constant delays;
    - L{DdeStepper.integrate_blindly}: integrate with fixed steps for a while, so the
      transients of the initial past have decayed afterwards.
"""

from typing import Iterable, List, Mapping, Optional, Sequence, Union
import itertools
import math
import warnings

import numpy as np

from pysymde import Constant, Expression, InputError, NonFiniteWarning, StepSizeUnderflow
from pysymde.anchors import AnchorList
from pysymde.ode import BS3, StepResult, StepStats, Tolerances, error_norm, runge_kutta_step, step_factor
from pysymde.program import ExecutableSystem

__all__ = ['DdeStepper', 'discontinuity_times']

def _constant_delay(delay: Union[float, Expression]) -> float:
    if isinstance(delay, Expression):
        if not isinstance(delay, Constant):
            raise InputError(f"the delay {delay} is not constant, use integrate_blindly() instead")
        delay = delay.value
    value = float(delay)
    if not value > 0 or not math.isfinite(value):
        raise InputError(f"delays must be positive and finite, got {value}")
    return value

def discontinuity_times(t0: float, delays: Iterable[Union[float, Expression]], order: int = 3) -> List[float]:
    """
    Times where a derivative of order up to C{order} may jump: M{t0 + sum_j k_j tau_j}
    for non-negative integers with M{1 <= sum_j k_j <= order}.

    >>> discontinuity_times(0.0, [40.0])
    [40.0, 80.0, 120.0]

    @raises InputError: If a delay is not a positive constant.
    """
    values = sorted({_constant_delay(d) for d in delays})
    times = {t0 + sum(combination)
             for r in range(1, order + 1)
             for combination in itertools.combinations_with_replacement(values, r)}
    return sorted(times)

class DdeStepper:
    """
    Adaptive integrator of M{dy/dt = f(t, y, y(t - tau_1), ...)}.

    @param past: The initial past, ending at the initial time. It becomes L{anchors}
        and grows during the integration.
    @param max_delay: Longest delay: older anchors are forgotten. For state-dependent
        delays this must be a bound of the delays.
    @param min_delay: Shortest constant delay, if known. Steps are not longer than this
        during the first C{max_delay} of the integration.
    @ivar anchors: The past, see L{AnchorList}.
    """

    def __init__(self, exe: ExecutableSystem, past: AnchorList, max_delay: float,
                 params: Union[Sequence[float], Mapping[str, float]] = (),
                 tolerances: Optional[Tolerances] = None, min_delay: Optional[float] = None):
        if past.n != exe.n:
            raise InputError(f"the past has dimension {past.n}, the system {exe.n}")
        if len(past) < 2:
            raise InputError("the initial past needs at least two anchors")
        if not max_delay >= 0 or not math.isfinite(max_delay):
            raise InputError(f"max_delay must be non-negative and finite, got {max_delay}")
        assert past.last is not None
        self.exe = exe
        self.params = exe.parameter_vector(params)
        self.tolerances = tolerances or Tolerances()
        self.anchors = past
        self.max_delay = float(max_delay)
        self.min_delay = min_delay
        self.t0 = past.last.t
        self.t = past.last.t
        self.y = past.last.y.copy()
        self.stats = StepStats()
        self.tableau = BS3
        self._adjusted = False
        self.h = self.tolerances.first_step or 0.0

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        self.stats.evaluations += 1
        return self.exe.evaluate_drift(t, y, self.anchors.past_value, self.params)

    @property
    def dy(self) -> np.ndarray:
        """Derivative at the current state, as stored in the newest anchor."""
        assert self.anchors.last is not None
        return self.anchors.last.dy

    @property
    def adjusted(self) -> bool:
        """Whether L{adjust_diff} has run."""
        return self._adjusted

    def adjust_diff(self) -> None:
        """
        Account for the jump of the derivative at the initial time: the newest anchor gets
        the derivative given by the system, and an anchor just before it keeps the
        derivative of the initial past. Called before the first step.
        """
        if self._adjusted:
            return
        self._adjusted = True
        last = self.anchors.last
        assert last is not None and last.prev is not None
        old_dy = last.dy
        new_dy = self.f(self.t, self.y)
        epsilon = 1e-7 * max(1.0, self.max_delay)
        if last.t - last.prev.t > 2 * epsilon:
            self.anchors.insert(last.t - epsilon, last.y - epsilon * old_dy, old_dy)
        if not np.all(np.isfinite(new_dy)):
            raise InputError(f"the derivative at the initial time is not finite: {new_dy}")
        last.dy = new_dy
        if not self.h:
            self.h = self.initial_step()

    def initial_step(self) -> float:
        tol = self.tolerances
        with np.errstate(all='ignore'):
            h = 0.01 * (1 + np.max(np.abs(self.y))) / (1 + np.max(np.abs(self.dy)))
        if not math.isfinite(h):
            h = tol.h_min
        return float(min(max(h, tol.h_min), tol.h_max))

    def _step_cap(self) -> float:
        cap = self.tolerances.h_max
        if self.min_delay is not None and self.min_delay > 0 and self.t < self.t0 + self.max_delay:
            cap = min(cap, self.min_delay)
        return cap

    def _accept(self, t_new: float, y_new: np.ndarray, dy_new: np.ndarray) -> None:
        self.anchors.append(t_new, y_new, dy_new)
        self.anchors.truncate(t_new - self.max_delay)
        self.t = t_new
        self.y = y_new

    def try_step(self, t_limit: Optional[float] = None) -> StepResult:
        """
        Attempt one step, see L{pysymde.ode.OdeStepper.try_step}. On acceptance the new
        anchor is appended and anchors older than needed are dropped.
        """
        self.adjust_diff()
        tol = self.tolerances
        h = min(self.h, self._step_cap())
        clipped = t_limit is not None and self.t + h >= t_limit
        if clipped:
            assert t_limit is not None
            h = t_limit - self.t
        y_new, error, dy_new = runge_kutta_step(self.f, self.t, self.y, h, self.dy, self.tableau)
        norm = error_norm(error, self.y, y_new, tol.atol, tol.rtol)
        finite = math.isfinite(norm) and bool(np.all(np.isfinite(y_new))) and bool(np.all(np.isfinite(dy_new)))
        if finite and norm <= 1.0:
            self.stats.accepted += 1
            self._accept(t_limit if clipped else self.t + h, y_new, dy_new) # type:ignore[arg-type]
            h_new = min(max(h * step_factor(norm, self.tableau.order), tol.h_min), tol.h_max)
            self.h = max(h_new, self.h) if clipped else h_new
            return StepResult(True, norm, h)
        self.stats.rejected += 1
        if not finite:
            warnings.warn(f"non-finite error estimate at t={self.t}, halving the step size", NonFiniteWarning)
            h_new = h / 2
        else:
            h_new = h * step_factor(norm, self.tableau.order)
        if h_new < tol.h_min:
            raise StepSizeUnderflow(f"step size {h_new:g} below the minimum {tol.h_min:g} at t={self.t}")
        self.h = min(h_new, tol.h_max)
        return StepResult(False, norm, h)

    def fixed_step(self, h: float, t_new: Optional[float] = None) -> None:
        """
        Take one step of size C{h} without error control.

        @param t_new: Exact end time of the step, defaults to M{t + h}.
        """
        self.adjust_diff()
        y_new, _, dy_new = runge_kutta_step(self.f, self.t, self.y, h, self.dy, self.tableau)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(dy_new))):
            raise StepSizeUnderflow(f"non-finite state after a fixed step at t={self.t}")
        self.stats.accepted += 1
        self._accept(self.t + h if t_new is None else t_new, y_new, dy_new)

    def step_on_discontinuities(self, delays: Iterable[Union[float, Expression]],
                                max_step: float = math.inf) -> List[float]:
        """
        Integrate over the times where derivatives of order up to three jump because of the
        initial past (see L{discontinuity_times}), with steps ending exactly on them.

        @param delays: The constant delays of the system.
        @param max_step: Upper bound of the step size during this phase.
        @return: The discontinuity times that were stepped on.
        @raises InputError: If a delay is not constant.
        """
        values = [_constant_delay(d) for d in delays]
        times = discontinuity_times(self.t, values)
        if values:
            self.min_delay = min(values)
        self.adjust_diff()
        for target in times:
            while self.t < target:
                self.h = min(self.h, max_step)
                self.try_step(t_limit=target)
        return times

    def integrate_blindly(self, duration: float, max_step: float) -> np.ndarray:
        """
        Integrate over C{duration} with equal steps of at most C{max_step}, ignoring the
        error estimate.
        """
        if not duration >= 0 or not max_step > 0:
            raise InputError(f"invalid blind integration: duration={duration}, max_step={max_step}")
        steps = math.ceil(duration / max_step)
        start = self.t
        if steps:
            h = duration / steps
            for i in range(steps):
                self.fixed_step(h, t_new=start + (i + 1) * h)
            self.h = h
        return self.y.copy()

    def integrate_to(self, t_target: float, stops: Iterable[float] = ()) -> np.ndarray:
        """
        Advance until the solution is known at C{t_target} and return it, interpolated
        between the anchors around C{t_target}. Steps are not shortened to end at C{t_target}.

        A C{t_target} in the past gives the stored solution there.

        @param stops: Times that steps must end on instead of passing them, such as the
            result of L{discontinuity_times}.
        """
        pending = sorted(s for s in stops if s > self.t)
        while self.t < t_target:
            while pending and pending[0] <= self.t:
                pending.pop(0)
            self.try_step(t_limit=pending[0] if pending else None)
        return self.anchors.state_at(t_target)[0]
