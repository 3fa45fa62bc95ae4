"""
Command line interface.

Each sub-command reads a model file (see L{pysymde.modelfile}) or a compiled
program file, integrates it and writes CSV rows to standard output. A summary of
the run (L{RunReport}) goes to standard error.

Exit codes: 0 on success, 2 for invalid usage or input, 3 when the integration
fails, 4 for I/O errors.
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple
import argparse
import csv
import math
import sys
import time

import attr
import numpy as np

from pysymde import ContractViolation, InputError, IntegrationError
from pysymde.anchors import constant_past
from pysymde.benchmark import benchmark, speedup
from pysymde.dde import DdeStepper, discontinuity_times
from pysymde.lowering import LoweringOptions, lower
from pysymde.lyapunov import (AugmentedSpec, Benettin, augment_dde, augment_ode,
                              dde_benettin, ode_benettin, run_benettin, transversal_setup)
from pysymde.modelfile import ModelFile, initial_state, parse_model
from pysymde.ode import OdeStepper, Tolerances
from pysymde.program import BACKENDS, ExecutableSystem
from pysymde.sde import NOISE_KINDS, SdeStepper, detect_additive, stratonovich_to_ito
from pysymde.stats import summarize
from pysymde.visitors import print_system

__all__ = ['main', 'RunReport']

@attr.s(auto_attribs=True)
class RunReport:
    """
    Summary of a command, written to standard error.

    @ivar preparation: CPU seconds spent loading, lowering and compiling.
    @ivar integration: CPU seconds spent integrating.
    """
    command: str
    backend: str
    seed: Optional[int] = None
    preparation: float = 0.0
    integration: float = 0.0
    rows: int = 0
    notes: List[str] = attr.ib(factory=list)

    def format(self) -> str:
        lines = [f"# {self.command}: backend={self.backend} seed={self.seed} rows={self.rows}",
                 f"# preparation={self.preparation:.6f}s integration={self.integration:.6f}s"]
        lines.extend(f"# {note}" for note in self.notes)
        return '\n'.join(lines)

class _Clock:
    """CPU time of the blocks run in C{with clock:}."""
    def __init__(self) -> None:
        self.elapsed = 0.0
    def __enter__(self) -> '_Clock':
        self._start = time.process_time()
        return self
    def __exit__(self, *exc: object) -> None:
        self.elapsed += time.process_time() - self._start

# argument types

def _binding(text: str) -> Tuple[str, float]:
    name, sep, value = text.partition('=')
    try:
        if not sep or not name.strip():
            raise ValueError(text)
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}") from None

def _floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None

def _ints(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None

def _groups(text: str) -> Tuple[Tuple[int, ...], ...]:
    return tuple(_ints(group) for group in text.split(';') if group.strip())

# problem setup

@attr.s(auto_attribs=True)
class _Problem:
    """What a command integrates: a model and/or a compiled system, with run metadata."""
    model: Optional[ModelFile]
    exe: Optional[ExecutableSystem]
    initial: np.ndarray
    t0: float
    delays: Tuple[float, ...]
    params: Dict[str, float]

    @property
    def max_delay(self) -> float:
        return max(self.delays, default=0.0)

    def bound(self, names: Sequence[str]) -> Tuple[float, ...]:
        if self.model is not None:
            return self.model.bind(self.params)
        missing = [name for name in names if name not in self.params]
        if missing:
            raise InputError(f"no value for the parameters: {', '.join(missing)}")
        unknown = set(self.params) - set(names)
        if unknown:
            raise InputError(f"unknown parameters: {', '.join(sorted(unknown))}")
        return tuple(self.params[name] for name in names)

def _problem(args: argparse.Namespace) -> _Problem:
    model = parse_model(args.model) if getattr(args, 'model', None) else None
    exe_path = getattr(args, 'exec', None)
    exe = ExecutableSystem.load(exe_path, backend=args.backend) if exe_path else None
    if model is None and exe is None:
        raise InputError("a model file (--model) or a program file (--exec) is required")
    initial: Optional[np.ndarray] = None
    if getattr(args, 'initial', None) is not None:
        initial = np.array(args.initial, dtype=float)
    elif model is not None and model.initial is not None:
        initial = initial_state(model)
    if initial is None:
        raise InputError("no initial state: add an [initial] section or pass --initial")
    n = exe.n if exe is not None else model.spec.n # type:ignore[union-attr]
    if initial.shape != (n,):
        raise InputError(f"the initial state has {initial.size} values, the system {n} components")
    delays = tuple(getattr(args, 'delays', None) or (model.delays if model is not None else ()))
    t0 = model.t0 if model is not None else 0.0
    return _Problem(model, exe, initial, t0, delays, dict(args.param or ()))

def _options(args: argparse.Namespace) -> LoweringOptions:
    return LoweringOptions(apply_simplify=not getattr(args, 'no_simplify', False),
                           apply_cse=not getattr(args, 'no_cse', False),
                           chunk_size=getattr(args, 'chunk_size', None),
                           backend=args.backend)

def _compile(exe: ExecutableSystem, batch: bool = False) -> ExecutableSystem:
    for program in (exe.drift, exe.diffusion):
        if program is not None:
            program.prepare(exe.backend, array=batch)
    return exe

def _tolerances(args: argparse.Namespace) -> Tolerances:
    return Tolerances(atol=args.atol, rtol=args.rtol,
                      h_max=args.max_step if args.max_step is not None else math.inf)

def _sample_times(first: float, last: float, dt: float) -> List[float]:
    """
    C{first}, C{first + dt}, ... up to C{last}.

    >>> _sample_times(100.0, 103.0, 1.0)
    [100.0, 101.0, 102.0, 103.0]
    """
    if not dt > 0:
        raise InputError(f"--dt must be positive, got {dt}")
    if last < first:
        raise InputError(f"--t1 ({last}) is before the first sample time ({first})")
    count = int(math.floor((last - first) / dt + 1e-9)) + 1
    return [first + k * dt for k in range(count)]

def _components(args: argparse.Namespace, n: int) -> List[int]:
    if args.components is None:
        return list(range(n))
    for i in args.components:
        if not 0 <= i < n:
            raise InputError(f"component {i} is out of range for a system of dimension {n}")
    return list(args.components)

# output

def _writer(out: TextIO) -> Any:
    return csv.writer(out, lineterminator='\n')

def _row(*values: float) -> List[str]:
    return [repr(float(v)) for v in values]

# commands

def _run(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('run', args.backend, args.seed)
    prep, integration = _Clock(), _Clock()
    with prep:
        problem = _problem(args)
        if problem.exe is not None:
            exe = problem.exe
        else:
            assert problem.model is not None
            exe = lower(problem.model.spec, _options(args))
        if exe.diffusion is not None:
            raise InputError("the system is stochastic, use the sde command")
        _compile(exe)
        params = problem.bound(exe.parameters)
        tolerances = _tolerances(args)
        components = _components(args, exe.n)
        times = _sample_times(problem.t0 if args.t0 is None else args.t0, args.t1, args.dt)
    writer = _writer(out)
    writer.writerow(['t'] + [f'y{i}' for i in components])
    with integration:
        stepper: object
        if exe.uses_past:
            if not problem.delays:
                raise InputError("the system has delays: list them in [delays] or pass --delays")
            past = constant_past(problem.initial, problem.t0, problem.max_delay)
            dde = DdeStepper(exe, past, problem.max_delay, params, tolerances, min_delay=min(problem.delays))
            stops: List[float] = []
            if args.blind:
                if args.max_step is None:
                    raise InputError("--blind needs --max-step")
                if times[0] < problem.t0 + args.blind:
                    raise InputError(f"the first sample time {times[0]} is within the blind integration")
                dde.integrate_blindly(args.blind, args.max_step)
            else:
                stops = discontinuity_times(problem.t0, problem.delays)
            advance: Callable[[float], np.ndarray] = lambda t: dde.integrate_to(t, stops)
            stepper = dde
        else:
            ode = OdeStepper(exe, problem.initial, problem.t0, params, tolerances, args.method)
            advance = ode.integrate_to
            stepper = ode
        for t in times:
            state = advance(t)
            writer.writerow(_row(t, *(state[i] for i in components)))
    report.preparation, report.integration, report.rows = prep.elapsed, integration.elapsed, len(times)
    report.notes.append(f"steps: {stepper.stats}") # type:ignore[attr-defined]
    return report

def _sde(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('sde', args.backend, args.seed)
    prep, integration = _Clock(), _Clock()
    with prep:
        problem = _problem(args)
        if problem.exe is not None:
            exe = problem.exe
            noise = args.noise or 'general'
        else:
            assert problem.model is not None
            spec = stratonovich_to_ito(problem.model.spec)
            if not spec.is_stochastic:
                raise InputError("the model has no [diffusion] section, use the run command")
            noise = args.noise or detect_additive(spec)
            exe = lower(spec, _options(args))
        _compile(exe, batch=args.paths is not None)
        params = problem.bound(exe.parameters)
        components = _components(args, exe.n)
        times = _sample_times(problem.t0 if args.t0 is None else args.t0, args.t1, args.dt)
        stepper = SdeStepper(exe, problem.initial, problem.t0, params, _tolerances(args), noise,
                             args.seed, args.paths, args.fixed_step)
    writer = _writer(out)
    if args.paths is None:
        writer.writerow(['t'] + [f'y{i}' for i in components])
    else:
        writer.writerow(['t'] + [f'{stat}{i}' for i in components for stat in ('mean', 'std')])
    with integration:
        for t in times:
            state = stepper.integrate_to(t)
            if args.paths is None:
                writer.writerow(_row(t, *(state[i] for i in components)))
            else:
                values = []
                for i in components:
                    values += [np.mean(state[i]), np.std(state[i], ddof=1) if args.paths > 1 else 0.0]
                writer.writerow(_row(t, *values))
    report.preparation, report.integration, report.rows = prep.elapsed, integration.elapsed, len(times)
    report.notes.append(f"noise: {noise}, steps: {stepper.stats}")
    return report

def _exponents(args: argparse.Namespace, out: TextIO, report: RunReport, prep: _Clock,
               setup: Callable[[], Benettin]) -> RunReport:
    integration = _Clock()
    if not args.interval > 0:
        raise InputError(f"--interval must be positive, got {args.interval}")
    with prep:
        benettin = setup()
    writer = _writer(out)
    writer.writerow(['t', 'weight'] + [f'lambda{k}' for k in range(benettin.m)])
    with integration:
        run_benettin(benettin, args.interval, int(math.ceil(args.transient / args.interval - 1e-9)))
        count = int(math.floor((args.t1 - benettin.last_normalization) / args.interval + 1e-9))
        if count < 2:
            raise InputError(f"--t1 leaves {max(count, 0)} samples after the transient, at least two are needed")
        samples = run_benettin(benettin, args.interval, count)
    for sample in samples:
        writer.writerow(_row(sample.t, sample.weight, *sample.exponents))
    summary = summarize([s.exponents for s in samples], [s.weight for s in samples])
    for k, s in enumerate(summary):
        report.notes.append(f"lambda{k}: mean={s.mean:.6g} t={s.t:.4g} p={s.p:.4g}")
    report.preparation, report.integration, report.rows = prep.elapsed, integration.elapsed, len(samples)
    return report

def _model_only(args: argparse.Namespace, command: str) -> Tuple[_Problem, ModelFile]:
    problem = _problem(args)
    if problem.model is None:
        raise InputError(f"the {command} command needs a model file (--model)")
    if problem.model.spec.is_stochastic:
        raise InputError("Lyapunov exponents of stochastic systems are not supported")
    return problem, problem.model

def _benettin(augmented: AugmentedSpec, args: argparse.Namespace, problem: _Problem,
              params: Tuple[float, ...], initial: np.ndarray) -> Benettin:
    options = _options(args)
    if augmented.delays:
        past = constant_past(initial, problem.t0, augmented.max_delay)
        return dde_benettin(augmented, past, params, _tolerances(args), args.seed, options)
    return ode_benettin(augmented, initial, problem.t0, params, _tolerances(args), args.seed, options)

def _lyap(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('lyap', args.backend, args.seed)
    prep = _Clock()

    def setup() -> Benettin:
        problem, model = _model_only(args, 'lyap')
        params = model.bind(problem.params)
        if model.spec.uses_past:
            augmented = augment_dde(model.spec, problem.delays or None, args.m)
        else:
            augmented = augment_ode(model.spec, args.m)
        return _benettin(augmented, args, problem, params, problem.initial)

    return _exponents(args, out, report, prep, setup)

def _transversal(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('transversal', args.backend, args.seed)
    prep = _Clock()

    def setup() -> Benettin:
        problem, model = _model_only(args, 'transversal')
        groups = args.groups or model.groups
        if not groups:
            raise InputError("no groups: add a [groups] section or pass --groups")
        params = model.bind(problem.params)
        _, augmented = transversal_setup(model.spec, groups, args.m, problem.delays or None)
        partition = augmented.partition
        assert partition is not None
        initial = partition.reduce_state(problem.initial)
        return _benettin(augmented, args, problem, params, initial)

    return _exponents(args, out, report, prep, setup)

def _benchmark(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('benchmark', ','.join(BACKENDS), args.seed)
    clock = _Clock()
    with clock:
        rows = benchmark(args.sizes, args.t1, args.repetitions, args.seed, args.q,
                         tolerances=Tolerances(atol=args.atol, rtol=args.rtol))
    writer = _writer(out)
    writer.writerow(['n', 'backend', 'preparation', 'integration', 'wall_preparation', 'wall_integration'])
    for row in rows:
        writer.writerow([str(row.n), row.backend] + _row(row.preparation, row.integration,
                                                         row.wall_preparation, row.wall_integration))
    for n in args.sizes:
        report.notes.append(f"n={n}: bytecode speedup {speedup(rows, n):.3g}")
    report.integration, report.rows = clock.elapsed, len(rows)
    return report

def _compile_command(args: argparse.Namespace, out: TextIO) -> RunReport:
    report = RunReport('compile', args.backend)
    prep = _Clock()
    with prep:
        model = parse_model(args.model)
        exe = lower(model.spec, _options(args))
    if args.print:
        print_system(model.spec, colorize=sys.stderr.isatty(), out=sys.stderr)
    exe.save(args.exec)
    report.preparation = prep.elapsed
    report.notes.append(f"wrote {args.exec}: {exe.n} components, parameters {list(exe.parameters)}, "
                        f"chunks {exe.chunks}")
    return report

# parser

def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="pysymde",
        description="Integrate symbolic ODEs, DDEs and SDEs, and estimate Lyapunov exponents.",
    )
    commands = parser.add_subparsers(dest='command_name', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--backend", choices=BACKENDS, default='bytecode')
    common.add_argument("--atol", type=float, default=1e-6)
    common.add_argument("--rtol", type=float, default=1e-6)
    common.add_argument("--max-step", dest="max_step", type=float, default=None)

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--model", help="model file")
    source.add_argument("--param", type=_binding, action="append", metavar="NAME=VALUE",
                        help="value of a deferred parameter")
    source.add_argument("--initial", type=_floats, default=None, help="initial state, overrides the model's")
    source.add_argument("--delays", type=_floats, default=None, help="delays, overrides the model's")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--t0", type=float, default=None, help="first sample time")
    sampling.add_argument("--t1", type=float, required=True, help="last sample time")
    sampling.add_argument("--dt", type=float, default=1.0, help="time between samples")
    sampling.add_argument("--components", type=_ints, default=None)

    lowering = argparse.ArgumentParser(add_help=False)
    lowering.add_argument("--chunk-size", dest="chunk_size", type=int, default=None)
    lowering.add_argument("--no-cse", dest="no_cse", action="store_true")
    lowering.add_argument("--no-simplify", dest="no_simplify", action="store_true")

    exponents = argparse.ArgumentParser(add_help=False)
    exponents.add_argument("--m", type=int, default=1, help="number of exponents")
    exponents.add_argument("--t1", type=float, required=True, help="end of the integration")
    exponents.add_argument("--transient", type=float, default=0.0)
    exponents.add_argument("--interval", type=float, default=10.0, help="time between orthonormalizations")

    run = commands.add_parser('run', parents=[common, source, sampling, lowering],
                              help="integrate an ODE or DDE")
    run.add_argument("--exec", help="program file written by the compile command")
    run.add_argument("--blind", type=float, default=None,
                     help="integrate this long with fixed steps of --max-step first (DDEs)")
    run.add_argument("--method", choices=('RK45', 'RK23'), default='RK45', help="ODE method")
    run.set_defaults(command=_run)

    exec_ = commands.add_parser('exec', parents=[common, source, sampling],
                                help="integrate a program file, like run --exec")
    exec_.add_argument("--exec", required=True, help="program file written by the compile command")
    exec_.add_argument("--blind", type=float, default=None)
    exec_.add_argument("--method", choices=('RK45', 'RK23'), default='RK45')
    exec_.set_defaults(command=_run)

    sde = commands.add_parser('sde', parents=[common, source, sampling, lowering], help="integrate an SDE")
    sde.add_argument("--exec", help="program file written by the compile command")
    sde.add_argument("--paths", type=int, default=None, help="number of paths; prints means and deviations")
    sde.add_argument("--noise", choices=NOISE_KINDS, default=None, help="detected from the model if not given")
    sde.add_argument("--fixed-step", dest="fixed_step", type=float, default=None)
    sde.set_defaults(command=_sde)

    lyap = commands.add_parser('lyap', parents=[common, source, exponents, lowering],
                               help="estimate the largest Lyapunov exponents")
    lyap.set_defaults(command=_lyap)

    transversal = commands.add_parser('transversal', parents=[common, source, exponents, lowering],
                                      help="estimate the Lyapunov exponents transversal to a synchronization manifold")
    transversal.add_argument("--groups", type=_groups, default=None, metavar="I,J;K,L",
                             help="groups of synchronized components, overrides the model's")
    transversal.set_defaults(command=_transversal)

    bench = commands.add_parser('benchmark', help="time all backends on random Kuramoto networks")
    bench.add_argument("--sizes", type=_ints, default=(20, 50, 100, 200))
    bench.add_argument("--t1", type=float, default=1000.0, help="integration time")
    bench.add_argument("--repetitions", type=int, default=3)
    bench.add_argument("--q", type=float, default=0.2, help="edge probability")
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--atol", type=float, default=1e-6)
    bench.add_argument("--rtol", type=float, default=0.0)
    bench.set_defaults(command=_benchmark)

    compile_ = commands.add_parser('compile', parents=[lowering], help="lower a model and save the program")
    compile_.add_argument("--model", required=True)
    compile_.add_argument("--exec", required=True, help="output program file")
    compile_.add_argument("--backend", choices=BACKENDS, default='bytecode')
    compile_.add_argument("--print", action="store_true", help="print the expression trees to standard error")
    compile_.set_defaults(command=_compile_command)

    return parser.parse_args(argv)

def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    args = _parse_args(argv)
    try:
        report = args.command(args, out or sys.stdout)
    except (InputError, ContractViolation) as e:
        print(f"pysymde: error: {e}", file=sys.stderr)
        return 2
    except IntegrationError as e:
        print(f"pysymde: integration failed: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"pysymde: {e}", file=sys.stderr)
        return 4
    print(report.format(), file=sys.stderr)
    return 0

if __name__ == "__main__":
    raise SystemExit(main())
