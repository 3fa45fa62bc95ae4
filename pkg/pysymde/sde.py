"""
Adaptive strong integration of Itô SDEs with diagonal noise:
M{dy = f(t, y) dt + g(t, y) * dW}, M{*} being the component-wise product.

Steps use stochastic Runge-Kutta methods of strong order 1.5 with an embedded error
estimate: SRIW1 for general diagonal noise and SRA1 for additive noise (M{dg/dy = 0}).

Step size control rejects steps without changing the realized Brownian path:
increments drawn for a rejected step are pushed back on a stack of future
segments, and the next, shorter attempt takes its increments from them, splitting a
segment with the exact conditional law of the Brownian motion and its time integral
(rejection sampling with memory).

Random numbers come from numpy's PCG64 bit generator; a seed fully determines the
trajectory.
"""

from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union
import math
import warnings

import attr
import numpy as np

from pysymde import (ContractViolation, InputError, NonFiniteWarning, SpecError, State,
                     StepSizeUnderflow, SystemSpec, system)
from pysymde.ode import StepResult, StepStats, Tolerances, error_norm, step_factor
from pysymde.program import ExecutableSystem
from pysymde.symbolic import differentiate, is_zero, simplify_basic

__all__ = ['Segment', 'SdeStepper', 'JumpSpec', 'NOISE_KINDS', 'detect_additive', 'stratonovich_to_ito',
           'brownian_bridge_sample', 'sample_segment', 'split_segment', 'merge_segments',
           'rswm_advance', 'apply_jumps']

NOISE_KINDS = ('general', 'additive')

# symbolic preparation

def detect_additive(spec: SystemSpec) -> str:
    """
    C{'additive'} if no noise intensity depends on the state, else C{'general'}.

    @raises SpecError: If C{spec} has no diffusion term.

    >>> from pysymde import y, system
    >>> detect_additive(system([-y(0)], diffusion=[0.5])), detect_additive(system([-y(0)], diffusion=[0.5*y(0)]))
    ('additive', 'general')
    """
    if spec.diffusion is None:
        raise SpecError("the system has no diffusion term")
    for g in spec.diffusion:
        for j in range(spec.n):
            if not is_zero(differentiate(g, State(j), spec.helpers)):
                return 'general'
    return 'additive'

def stratonovich_to_ito(spec: SystemSpec) -> SystemSpec:
    """
    The Itô form of a Stratonovich SDE with diagonal noise: the drift gets the term
    M{g_i dg_i/dy_i / 2}. Itô systems are returned unchanged.
    """
    if spec.diffusion is None or spec.calculus != 'stratonovich':
        return spec
    drift = [simplify_basic(f + 0.5 * g * differentiate(g, State(i), spec.helpers))
             for i, (f, g) in enumerate(zip(spec.drift, spec.diffusion))]
    return system(drift, n=spec.n, diffusion=spec.diffusion, helpers=spec.helpers,
                  parameters=spec.parameters, calculus='ito')

# Brownian increments

@attr.s(auto_attribs=True, frozen=True)
class Segment:
    """
    Increments of the Brownian motions over a time interval of length C{dt}:
    C{dW = W(dt)} and C{dI}, the time integral of M{W(s)} over the interval
    (the iterated Itô integral M{I_(1,0)}), both relative to the interval's start.
    """
    dt: float
    dW: np.ndarray
    dI: np.ndarray

def sample_segment(dt: float, shape: Tuple[int, ...], rng: np.random.Generator) -> Segment:
    """Fresh increments: M{dW ~ N(0, dt)}, M{dI = dt/2 (dW + dZ/sqrt(3))} with independent M{dZ ~ N(0, dt)}."""
    root = math.sqrt(dt)
    dW = root * rng.standard_normal(shape)
    dZ = root * rng.standard_normal(shape)
    return Segment(dt, dW, 0.5 * dt * (dW + dZ / math.sqrt(3)))

def brownian_bridge_sample(segment: Tuple[float, np.ndarray], q: float, rng: np.random.Generator) -> np.ndarray:
    """
    Value of the Brownian motion at the fraction C{q} of a segment C{(dt, dW)}, given its
    end value: M{N(q dW, q (1-q) dt)}.
    """
    dt, dW = segment
    if not 0 < q < 1:
        raise InputError(f"the split fraction must be in (0, 1), got {q}")
    dW = np.asarray(dW, dtype=float)
    return q * dW + math.sqrt(q * (1 - q) * dt) * rng.standard_normal(dW.shape)

_END_COVARIANCE_INV = np.linalg.inv(np.array([[1.0, 0.5], [0.5, 1/3]]))

def _split_law(q: float) -> Tuple[np.ndarray, np.ndarray]:
    # Law of (W(q), I(q)) given (W(1), I(1)), for a standard Brownian motion on [0, 1].
    cross = np.array([[q, q - q*q/2], [q*q/2, q*q/2 - q**3/6]])
    own = np.array([[q, q*q/2], [q*q/2, q**3/3]])
    gain = cross @ _END_COVARIANCE_INV
    cov = own - gain @ cross.T
    a = math.sqrt(max(cov[0, 0], 0.0))
    b = cov[1, 0] / a if a > 0 else 0.0
    c = math.sqrt(max(cov[1, 1] - b*b, 0.0))
    return gain, np.array([[a, 0.0], [b, c]])

def split_segment(segment: Segment, dt: float, rng: np.random.Generator) -> Tuple[Segment, Segment]:
    """
    Split a segment at C{dt}, sampling the intermediate values from their exact
    conditional law. The pieces merge back (L{merge_segments}) to the original.
    """
    if not 0 < dt < segment.dt:
        raise InputError(f"cannot split a segment of length {segment.dt} at {dt}")
    h = segment.dt
    gain, chol = _split_law(dt / h)
    root = math.sqrt(h)
    w_end = segment.dW / root
    i_end = segment.dI / (h * root)
    xi = rng.standard_normal((2,) + segment.dW.shape)
    w_mid = (gain[0, 0] * w_end + gain[0, 1] * i_end + chol[0, 0] * xi[0]) * root
    i_mid = (gain[1, 0] * w_end + gain[1, 1] * i_end + chol[1, 0] * xi[0] + chol[1, 1] * xi[1]) * h * root
    rest = h - dt
    return (Segment(dt, w_mid, i_mid),
            Segment(rest, segment.dW - w_mid, segment.dI - i_mid - rest * w_mid))

def merge_segments(first: Segment, second: Segment) -> Segment:
    """Increments over two consecutive segments."""
    return Segment(first.dt + second.dt, first.dW + second.dW,
                   first.dI + second.dI + second.dt * first.dW)

# stepping

@attr.s(auto_attribs=True, frozen=True)
class _Sriw1:
    # Stage coefficients of SRIW1, for diagonal noise.
    c0: Tuple[float, ...] = (0.0, 0.75)
    c1: Tuple[float, ...] = (0.0, 0.25, 1.0, 0.25)
    alpha: Tuple[float, ...] = (1/3, 2/3)
    beta1: Tuple[float, ...] = (-1.0, 4/3, 2/3, 0.0)
    beta2: Tuple[float, ...] = (-1.0, 4/3, -1/3, 0.0)
    beta3: Tuple[float, ...] = (2.0, -4/3, -2/3, 0.0)
    beta4: Tuple[float, ...] = (-2.0, 5/3, -2/3, 1.0)

SRIW1 = _Sriw1()

ArrayLike = Union[Sequence[float], np.ndarray]

class SdeStepper:
    """
    Adaptive integrator of an Itô SDE with diagonal noise.

    The state is a vector (one path) or an C{(n, k)} array: C{k} independent paths
    driven by independent noise and sharing one step size sequence.

    @param exe: A lowered system with a diffusion program.
    @param noise: C{'general'} or C{'additive'}, see L{detect_additive}.
    @param seed: Seed of the PCG64 generator.
    @param paths: If given, C{y0} (a vector) is copied for this many paths.
    @param fixed_step: If given, steps of this size are taken without error control.
    @ivar W: The realized Brownian motions at L{t}, relative to the initial time.
    """

    def __init__(self, exe: ExecutableSystem, y0: ArrayLike, t0: float = 0.0,
                 params: Union[Sequence[float], Mapping[str, float]] = (),
                 tolerances: Optional[Tolerances] = None, noise: str = 'general',
                 seed: Optional[int] = None, paths: Optional[int] = None,
                 fixed_step: Optional[float] = None):
        if exe.diffusion is None:
            raise ContractViolation("the system has no diffusion term, use pysymde.ode.OdeStepper")
        if exe.uses_past:
            raise ContractViolation("delayed states are not supported in stochastic systems")
        if noise not in NOISE_KINDS:
            raise InputError(f"unknown noise kind {noise!r}, expected one of {', '.join(NOISE_KINDS)}")
        y = np.array(y0, dtype=float)
        if paths is not None:
            if y.ndim != 1:
                raise InputError("paths can only be given with a single initial state")
            y = np.repeat(y[:, np.newaxis], paths, axis=1)
        if y.shape[:1] != (exe.n,) or y.ndim > 2:
            raise InputError(f"expected an initial state of shape ({exe.n},) or ({exe.n}, k), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise InputError("the initial state must be finite")
        if fixed_step is not None and not fixed_step > 0:
            raise InputError(f"the fixed step must be positive, got {fixed_step}")
        self.exe = exe
        self.params = exe.parameter_vector(params)
        self.tolerances = tolerances or Tolerances()
        self.noise = noise
        self.fixed_step = fixed_step
        seeds = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.Generator(np.random.PCG64(seeds[0]))
        self.jump_rng = np.random.Generator(np.random.PCG64(seeds[1]))
        self.t = float(t0)
        self.y = y
        self.W = np.zeros_like(y)
        self.stats = StepStats()
        # Segments ahead of t, the next one last.
        self._future: List[Segment] = []
        self.h = fixed_step or self.initial_step()

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        self.stats.evaluations += 1
        return self.exe.evaluate_drift(t, y, params=self.params)

    def g(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.exe.evaluate_diffusion(t, y, params=self.params)

    def initial_step(self) -> float:
        tol = self.tolerances
        if tol.first_step is not None:
            return min(max(tol.first_step, tol.h_min), tol.h_max)
        with np.errstate(all='ignore'):
            scale = np.max(np.abs(self.f(self.t, self.y))) + np.max(np.abs(self.g(self.t, self.y))) ** 2
            h = 0.01 * (1 + np.max(np.abs(self.y))) / (1 + scale)
        if not math.isfinite(h):
            h = tol.h_min
        return float(min(max(h, tol.h_min), tol.h_max))

    @property
    def future(self) -> List[Segment]:
        """Brownian segments drawn ahead of L{t}, in time order."""
        return self._future[::-1]

    def extend_future(self, segments: Sequence[Segment]) -> None:
        """
        Append predetermined Brownian segments after the ones already drawn. Steps consume
        them before drawing fresh increments, so several runs can share a Brownian path.
        """
        for segment in segments:
            if not segment.dt > 0 or np.shape(segment.dW) != self.y.shape:
                raise InputError(f"segments must have positive lengths and increments of shape {self.y.shape}")
        self._future[0:0] = list(segments)[::-1]

    def draw_increments(self, h: float) -> Segment:
        """Take the Brownian increments over the next C{h} from the future stack, sampling as needed."""
        total: Optional[Segment] = None
        needed = h
        while needed > 0:
            if not self._future:
                piece = sample_segment(needed, self.y.shape, self.rng)
            else:
                piece = self._future.pop()
                if piece.dt > needed * (1 + 1e-12):
                    piece, rest = split_segment(piece, needed, self.rng)
                    self._future.append(rest)
            total = piece if total is None else merge_segments(total, piece)
            needed = h - total.dt
            if needed <= h * 1e-12:
                break
        assert total is not None
        return total

    def _sriw1(self, h: float, inc: Segment) -> Tuple[np.ndarray, np.ndarray]:
        tab, t, y = SRIW1, self.t, self.y
        root = math.sqrt(h)
        dW = inc.dW
        chi1 = (dW*dW - h) / (2 * root)     # I_(1,1) / sqrt(h)
        chi2 = inc.dI / h                   # I_(1,0) / h
        chi3 = (dW**3 - 3*h*dW) / (6 * h)   # I_(1,1,1) / h
        f0 = h * self.f(t, y)
        g0 = self.g(t, y)
        f1 = h * self.f(t + tab.c0[1]*h, y + 0.75*f0 + 1.5*chi2*g0)
        g1 = self.g(t + tab.c1[1]*h, y + 0.25*f0 + 0.5*root*g0)
        g2 = self.g(t + tab.c1[2]*h, y + f0 - root*g0)
        g3 = self.g(t + tab.c1[3]*h, y + 0.25*f0 + root*(-5*g0 + 3*g1 + 0.5*g2))
        gs = (g0, g1, g2, g3)
        noise = sum(((tab.beta1[i]*dW + tab.beta2[i]*chi1 + tab.beta3[i]*chi2 + tab.beta4[i]*chi3) * gs[i]
                     for i in range(4)), np.zeros_like(y))
        y_new = y + tab.alpha[0]*f0 + tab.alpha[1]*f1 + noise
        higher = sum(((tab.beta3[i]*chi2 + tab.beta4[i]*chi3) * gs[i] for i in range(4)), np.zeros_like(y))
        error = np.abs(2/3 * (f1 - f0)) + np.abs(higher)
        return y_new, error

    def _sra1(self, h: float, inc: Segment) -> Tuple[np.ndarray, np.ndarray]:
        t, y = self.t, self.y
        chi2 = inc.dI / h
        f0 = h * self.f(t, y)
        g_start = self.g(t, y)
        g_end = self.g(t + h, y)
        f1 = h * self.f(t + 0.75*h, y + 0.75*f0 + 1.5*chi2*g_end)
        y_new = y + (f0 + 2*f1) / 3 + (inc.dW - chi2) * g_end + chi2 * g_start
        error = np.abs(2/3 * (f1 - f0)) + np.abs(chi2 * (g_start - g_end))
        return y_new, error

    def _propose(self, h: float, inc: Segment) -> Tuple[np.ndarray, np.ndarray]:
        with np.errstate(all='ignore'):
            return self._sra1(h, inc) if self.noise == 'additive' else self._sriw1(h, inc)

    def _accept(self, t_new: float, y_new: np.ndarray, inc: Segment) -> None:
        self.stats.accepted += 1
        self.t = t_new
        self.y = y_new
        self.W = self.W + inc.dW

    def try_step(self, t_limit: Optional[float] = None) -> StepResult:
        """
        Attempt one step of size L{h}, shortened to end exactly at C{t_limit} if it would
        pass it. A rejected step leaves its increments on the future stack.

        @raises StepSizeUnderflow: If the step is rejected and the next one would be below C{h_min}.
        """
        tol = self.tolerances
        h = self.h
        clipped = t_limit is not None and self.t + h >= t_limit
        if clipped:
            assert t_limit is not None
            h = t_limit - self.t
        inc = self.draw_increments(h)
        y_new, error = self._propose(h, inc)
        t_new = t_limit if clipped else self.t + h
        if self.fixed_step is not None:
            if not np.all(np.isfinite(y_new)):
                raise StepSizeUnderflow(f"non-finite state after a fixed step at t={self.t}")
            self._accept(t_new, y_new, inc) # type:ignore[arg-type]
            return StepResult(True, 0.0, h)
        norm = error_norm(error, self.y, y_new, tol.atol, tol.rtol)
        finite = math.isfinite(norm) and bool(np.all(np.isfinite(y_new)))
        if finite and norm <= 1.0:
            self._accept(t_new, y_new, inc) # type:ignore[arg-type]
            h_new = min(max(h * step_factor(norm, 2), tol.h_min), tol.h_max)
            self.h = max(h_new, self.h) if clipped else h_new
            return StepResult(True, norm, h)
        self.stats.rejected += 1
        self._future.append(inc)
        if not finite:
            warnings.warn(f"non-finite error estimate at t={self.t}, halving the step size", NonFiniteWarning)
            h_new = h / 2
        else:
            h_new = h * step_factor(norm, 2)
        if h_new < tol.h_min:
            raise StepSizeUnderflow(f"step size {h_new:g} below the minimum {tol.h_min:g} at t={self.t}")
        self.h = min(h_new, tol.h_max)
        return StepResult(False, norm, h)

    def integrate_to(self, t_target: float) -> np.ndarray:
        """Advance to exactly C{t_target} and return a copy of the state there."""
        if t_target < self.t:
            raise InputError(f"cannot integrate backwards from t={self.t} to {t_target}")
        while self.t < t_target:
            if self.fixed_step is not None:
                self.h = self.fixed_step
            self.try_step(t_limit=t_target)
        return self.y.copy()

def rswm_advance(stepper: SdeStepper, t_target: float) -> np.ndarray:
    """Advance C{stepper} to C{t_target} with adaptive steps, see L{SdeStepper.integrate_to}."""
    return stepper.integrate_to(t_target)

# jumps

def _non_negative_rate(inst: object, attribute: object, value: float) -> None:
    if not (value >= 0 and math.isfinite(value)):
        raise InputError(f"the jump rate must be finite and non-negative, got {value}")

@attr.s(auto_attribs=True, frozen=True)
class JumpSpec:
    """
    Jumps occurring as a Poisson process.

    @ivar rate: Expected number of jumps per unit time.
    @ivar amplitude: C{(t, y, rng) -> jump}, added to the state at each jump.
    """
    rate: float = attr.ib(converter=float, validator=_non_negative_rate)
    amplitude: Callable[[float, np.ndarray, np.random.Generator], ArrayLike]

def apply_jumps(stepper: SdeStepper, jumps: JumpSpec, t_end: float) -> np.ndarray:
    """
    Integrate to C{t_end} with jumps: jump times are drawn with exponential waiting
    times from the stepper's jump generator, integration stops at each of them and the
    jump amplitude is added. A jump exactly at C{t_end} is applied.

    Waiting times are memoryless: successive calls for successive intervals give one
    Poisson process.
    """
    if stepper.y.ndim != 1:
        raise ContractViolation("jumps are only supported for single paths")
    if jumps.rate > 0:
        t_jump = stepper.t + stepper.jump_rng.exponential(1 / jumps.rate)
        while t_jump <= t_end:
            stepper.integrate_to(t_jump)
            jump = np.asarray(jumps.amplitude(stepper.t, stepper.y.copy(), stepper.jump_rng), dtype=float)
            if jump.shape != stepper.y.shape:
                raise InputError(f"jump amplitudes must have shape {stepper.y.shape}, got {jump.shape}")
            stepper.y = stepper.y + jump
            t_jump += stepper.jump_rng.exponential(1 / jumps.rate)
    return stepper.integrate_to(t_end)
