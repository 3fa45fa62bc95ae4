"""
Adaptive explicit Runge-Kutta integration of ODEs over an L{ExecutableSystem}.

Two embedded pairs are available: Dormand-Prince 5(4) (C{'RK45'}, the default) and
Bogacki-Shampine 3(2) (C{'RK23'}). Both have the first-same-as-last property: the
derivative at the end of an accepted step is the first stage of the next one.

The step size controller, error norm and tableaus live here and are shared with
L{pysymde.dde}.
"""

from typing import Callable, Mapping, Optional, Sequence, Tuple, Union
import math
import warnings

import attr
import numpy as np

from pysymde import ContractViolation, InputError, NonFiniteWarning, StepSizeUnderflow
from pysymde.program import ExecutableSystem

__all__ = ['Tolerances', 'Tableau', 'StepResult', 'StepStats', 'OdeStepper',
           'DOPRI5', 'BS3', 'TABLEAUS', 'error_norm', 'step_factor']

def _positive(inst: object, attribute: 'attr.Attribute[float]', value: float) -> None:
    if not value > 0:
        raise InputError(f"{attribute.name} must be positive, got {value!r}")

def _non_negative(inst: object, attribute: 'attr.Attribute[float]', value: float) -> None:
    if not value >= 0:
        raise InputError(f"{attribute.name} must be non-negative, got {value!r}")

@attr.s(auto_attribs=True, frozen=True)
class Tolerances:
    """
    Error control settings.

    C{rtol=0} is legal and gives a purely absolute error criterion.

    @ivar first_step: Initial step size, estimated from the derivative if C{None}.
    """
    atol: float = attr.ib(default=1e-6, converter=float, validator=_non_negative)
    rtol: float = attr.ib(default=1e-6, converter=float, validator=_non_negative)
    h_min: float = attr.ib(default=1e-12, converter=float, validator=_positive)
    h_max: float = attr.ib(default=math.inf, converter=float, validator=_positive)
    first_step: Optional[float] = None

    def __attrs_post_init__(self) -> None:
        if self.atol == 0 and self.rtol == 0:
            raise InputError("atol and rtol can't both be zero")
        if self.h_min > self.h_max:
            raise InputError(f"h_min ({self.h_min}) is larger than h_max ({self.h_max})")

@attr.s(auto_attribs=True, frozen=True)
class Tableau:
    """
    Butcher tableau of an explicit embedded pair with the FSAL property.

    @ivar error: Difference of the weights of the two solutions of the pair.
    @ivar order: Exponent of the step size controller is M{-1/order}.
    """
    c: Tuple[float, ...]
    a: Tuple[Tuple[float, ...], ...]
    b: Tuple[float, ...]
    error: Tuple[float, ...]
    order: int

    @property
    def stages(self) -> int:
        return len(self.c)

DOPRI5 = Tableau(
    c=(0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0),
    a=((),
       (1/5,),
       (3/40, 9/40),
       (44/45, -56/15, 32/9),
       (19372/6561, -25360/2187, 64448/6561, -212/729),
       (9017/3168, -355/33, 46732/5247, 49/176, -5103/18656),
       (35/384, 0.0, 500/1113, 125/192, -2187/6784, 11/84)),
    b=(35/384, 0.0, 500/1113, 125/192, -2187/6784, 11/84, 0.0),
    error=(35/384 - 5179/57600, 0.0, 500/1113 - 7571/16695, 125/192 - 393/640,
           -2187/6784 + 92097/339200, 11/84 - 187/2100, -1/40),
    order=5,
)

BS3 = Tableau(
    c=(0.0, 1/2, 3/4, 1.0),
    a=((),
       (1/2,),
       (0.0, 3/4),
       (2/9, 1/3, 4/9)),
    b=(2/9, 1/3, 4/9, 0.0),
    error=(2/9 - 7/24, 1/3 - 1/4, 4/9 - 1/3, -1/8),
    order=3,
)

TABLEAUS: Mapping[str, Tableau] = {'RK45': DOPRI5, 'RK23': BS3}

Derivative = Callable[[float, np.ndarray], np.ndarray]

def runge_kutta_step(fun: Derivative, t: float, y: np.ndarray, h: float, k0: np.ndarray,
                     tableau: Tableau) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One step of an embedded pair with the FSAL property.

    @param k0: Derivative at C{(t, y)}.
    @return: The new state, the local error estimate and the derivative at the new state.
    """
    ks = [k0]
    for i in range(1, tableau.stages):
        increment = sum((a * k for a, k in zip(tableau.a[i], ks) if a), np.zeros_like(y))
        ks.append(fun(t + tableau.c[i] * h, y + h * increment))
    y_new = y + h * sum((b * k for b, k in zip(tableau.b, ks) if b), np.zeros_like(y))
    error = h * sum((e * k for e, k in zip(tableau.error, ks) if e), np.zeros_like(y))
    return y_new, error, ks[-1]

def error_norm(error: np.ndarray, y: np.ndarray, y_new: np.ndarray, atol: float, rtol: float) -> float:
    """
    Root mean square of the scaled error M{error_k / (atol + rtol max(|y_k|, |y_new_k|))}
    over all entries. Non-finite inputs give a non-finite norm.
    """
    with np.errstate(all='ignore'):
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean(np.square(error / scale))))

def step_factor(norm: float, order: int) -> float:
    """
    Step size multiplier for an error norm: M{0.9 norm^(-1/order)}, clipped to M{[0.2, 5]}.

    >>> step_factor(0.0, 5), step_factor(1e10, 5)
    (5.0, 0.2)
    """
    if norm == 0:
        return 5.0
    return min(5.0, max(0.2, 0.9 * norm ** (-1.0 / order)))

@attr.s(auto_attribs=True, frozen=True)
class StepResult:
    accepted: bool
    error_norm: float
    h: float

@attr.s(auto_attribs=True)
class StepStats:
    """Counters of an integration run."""
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0

    @property
    def attempts(self) -> int:
        return self.accepted + self.rejected

def check_state(y0: Union[Sequence[float], np.ndarray], n: int) -> np.ndarray:
    y = np.array(y0, dtype=float)
    if y.shape[:1] != (n,):
        raise InputError(f"expected an initial state of length {n}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("the initial state must be finite")
    return y

class OdeStepper:
    """
    Adaptive integrator of M{dy/dt = f(t, y)}.

    >>> from pysymde import system, y
    >>> from pysymde.lowering import lower
    >>> stepper = OdeStepper(lower(system([-y(0)])), [1.0], tolerances=Tolerances(atol=1e-10, rtol=1e-10))
    >>> abs(stepper.integrate_to(1.0)[0] - math.exp(-1)) < 1e-8
    True

    @ivar t: Current time.
    @ivar y: Current state, replaced (not modified) by each accepted step.
    @ivar h: Step size of the next attempt.
    """

    def __init__(self, exe: ExecutableSystem, y0: Union[Sequence[float], np.ndarray], t0: float = 0.0,
                 params: Union[Sequence[float], Mapping[str, float]] = (),
                 tolerances: Optional[Tolerances] = None, method: str = 'RK45'):
        if exe.uses_past:
            raise ContractViolation("this system has delayed states, use pysymde.dde.DdeStepper")
        try:
            self.tableau = TABLEAUS[method]
        except KeyError:
            raise InputError(f"unknown method {method!r}, expected one of {', '.join(TABLEAUS)}") from None
        self.exe = exe
        self.params = exe.parameter_vector(params)
        self.tolerances = tolerances or Tolerances()
        self.t = float(t0)
        self.y = check_state(y0, exe.n)
        self.stats = StepStats()
        self._dy: Optional[np.ndarray] = None
        self.h = self.initial_step()

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        self.stats.evaluations += 1
        return self.exe.evaluate_drift(t, y, params=self.params)

    @property
    def dy(self) -> np.ndarray:
        """Derivative at the current state."""
        if self._dy is None:
            self._dy = self.f(self.t, self.y)
        return self._dy

    def reset_derivative(self) -> None:
        """Call after changing L{y} in place, so the cached derivative is recomputed."""
        self._dy = None

    def initial_step(self) -> float:
        tol = self.tolerances
        if tol.first_step is not None:
            return min(max(tol.first_step, tol.h_min), tol.h_max)
        with np.errstate(all='ignore'):
            h = 0.01 * (1 + np.max(np.abs(self.y))) / (1 + np.max(np.abs(self.dy)))
        if not math.isfinite(h):
            h = tol.h_min
        return float(min(max(h, tol.h_min), tol.h_max))

    def _update(self, y_new: np.ndarray, dy_new: np.ndarray, t_new: float) -> None:
        self.t = t_new
        self.y = y_new
        self._dy = dy_new

    def try_step(self, t_limit: Optional[float] = None) -> StepResult:
        """
        Attempt one step of size L{h}, shortened to end exactly at C{t_limit} if it would pass it.

        @raises StepSizeUnderflow: If the step is rejected and the next one would be below C{h_min}.
        """
        tol = self.tolerances
        h = self.h
        clipped = t_limit is not None and self.t + h >= t_limit
        if clipped:
            assert t_limit is not None
            h = t_limit - self.t
        y_new, error, dy_new = runge_kutta_step(self.f, self.t, self.y, h, self.dy, self.tableau)
        norm = error_norm(error, self.y, y_new, tol.atol, tol.rtol)
        finite = math.isfinite(norm) and bool(np.all(np.isfinite(y_new)))
        if finite and norm <= 1.0:
            self.stats.accepted += 1
            self._update(y_new, dy_new, t_limit if clipped else self.t + h) # type:ignore[arg-type]
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

    def fixed_step(self, h: float) -> None:
        """Take one step of size C{h} without error control."""
        y_new, _, dy_new = runge_kutta_step(self.f, self.t, self.y, h, self.dy, self.tableau)
        self.stats.accepted += 1
        self._update(y_new, dy_new, self.t + h)

    def integrate_to(self, t_target: float) -> np.ndarray:
        """
        Advance with accepted steps to exactly C{t_target} and return a copy of the state there.
        """
        if t_target < self.t:
            raise InputError(f"cannot integrate backwards from t={self.t} to {t_target}")
        while self.t < t_target:
            self.try_step(t_limit=t_target)
        return self.y.copy()
