"""
Model files: plain text statements of a system, parsed with L{configparser}.

Example::

    [system]
    name = sunflower

    [parameters]
    tau = 40
    a = 4.8
    b = 0.186

    [drift]
    0 = y(1)
    1 = -a/tau*y(1) - b/tau*sin(y(0, t - tau))

    [delays]
    values = tau

    [initial]
    state = 1.0, 0.0

Sections:

    - C{[system]}: C{name}, C{dimension} and C{calculus} (C{ito} or C{stratonovich}), all optional.
    - C{[parameters]}: C{name = value}; values are substituted when loading.
      C{name = ?} declares a deferred parameter, bound at run time.
    - C{[helpers]}: C{name = expression}, each may use the helpers above it.
    - C{[drift]} and C{[diffusion]}: C{index = expression} for each component.
    - C{[delays]}: C{values = ...}, comma separated constant expressions.
    - C{[groups]}: C{name = i, j, ...}, groups of synchronized components.
    - C{[initial]}: C{state = ...} and C{t0 = ...}.

Expressions follow the grammar of L{pysymde.astutils}.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Tuple
import configparser
import io
import math

import attr
import numpy as np

from pysymde import (Constant, Expression, ExpressionSyntaxError, HelperDefinition, InputError,
                     Parameter, SpecError, SystemSpec, system)
from pysymde.astutils import parse_expression, to_source
from pysymde.symbolic import simplify_basic, substitute

__all__ = ['ModelFile', 'parse_model', 'parse_model_text', 'format_model', 'initial_state', 'DEFERRED']

DEFERRED = '?'
"""Value of a parameter bound at run time."""

_SECTIONS = ('system', 'parameters', 'helpers', 'drift', 'diffusion', 'delays', 'groups', 'initial')

@attr.s(auto_attribs=True, frozen=True)
class ModelFile:
    """
    A parsed model file.

    @ivar spec: The system, with fixed parameter values substituted. Its parameters
        are the deferred ones.
    @ivar values: The fixed parameter values.
    @ivar delays: Values of the C{[delays]} section.
    @ivar initial: Initial state, if given.
    """
    spec: SystemSpec
    name: str = ''
    values: Mapping[str, float] = attr.ib(factory=dict)
    delays: Tuple[float, ...] = ()
    groups: Tuple[Tuple[int, ...], ...] = ()
    initial: Optional[Tuple[float, ...]] = None
    t0: float = 0.0
    filename: Optional[str] = None

    @property
    def deferred(self) -> Tuple[str, ...]:
        return self.spec.parameters

    @property
    def max_delay(self) -> float:
        return max(self.delays, default=0.0)

    def bind(self, params: Mapping[str, float]) -> Tuple[float, ...]:
        """
        The parameter vector of L{spec} from run time values.

        @raises InputError: If a deferred parameter has no value or an unknown name is given.
        """
        unknown = set(params) - set(self.deferred)
        if unknown:
            raise InputError(f"unknown deferred parameters: {', '.join(sorted(unknown))}")
        missing = [name for name in self.deferred if name not in params]
        if missing:
            raise InputError(f"no value for the deferred parameters: {', '.join(missing)}")
        return tuple(float(params[name]) for name in self.deferred)

class _Parser:
    """Implementation of L{parse_model_text()}."""

    def __init__(self, text: str, filename: Optional[str]):
        self.text = text
        self.filename = filename
        self.lines = text.splitlines()
        self.config = configparser.ConfigParser(interpolation=None, delimiters=('=',),
                                                comment_prefixes=('#', ';'), inline_comment_prefixes=('#',))
        self.config.optionxform = str # type:ignore[assignment, method-assign]

    def locate(self, section: str, key: str) -> Tuple[int, int]:
        """Line and column (both 1-based) of the value of C{key} in C{section}."""
        current = None
        for i, line in enumerate(self.lines):
            stripped = line.strip()
            if stripped.startswith('[') and stripped.endswith(']'):
                current = stripped[1:-1].strip()
            elif current == section and '=' in line and line.split('=', 1)[0].strip() == key:
                value = line.split('=', 1)[1]
                return i + 1, len(line) - len(value.lstrip()) + 1
        return 0, 0

    def error(self, section: str, key: str, msg: str) -> ExpressionSyntaxError:
        lineno, col = self.locate(section, key)
        return ExpressionSyntaxError(f"[{section}] {key}: {msg}", self.filename, lineno or None, col or None)

    def expression(self, section: str, key: str, helpers: Iterable[str] = ()) -> Expression:
        lineno, col = self.locate(section, key)
        try:
            return parse_expression(self.config[section][key], frozenset(helpers))
        except ExpressionSyntaxError as e:
            column = col + (e.col or 1) - 1 if col else e.col
            raise ExpressionSyntaxError(f"[{section}] {key}: {e.msg}",
                                        self.filename, lineno or None, column) from None

    def number(self, section: str, key: str, text: str, values: Mapping[str, float]) -> float:
        try:
            e = parse_expression(text)
        except ExpressionSyntaxError as err:
            raise self.error(section, key, f"invalid number {text.strip()!r}") from err
        folded = simplify_basic(substitute(e, {Parameter(k): v for k, v in values.items()}))
        if not isinstance(folded, Constant):
            raise self.error(section, key, f"{text.strip()!r} is not a constant")
        return folded.value

    def numbers(self, section: str, key: str, values: Mapping[str, float]) -> List[float]:
        text = self.config[section][key]
        return [self.number(section, key, item, values) for item in text.split(',') if item.strip()]

    def components(self, section: str, helpers: Iterable[str]) -> Dict[int, Expression]:
        result: Dict[int, Expression] = {}
        for key in self.config[section]:
            try:
                index = int(key)
            except ValueError:
                raise self.error(section, key, "keys must be component indices") from None
            if index < 0:
                raise self.error(section, key, "component indices must be non-negative")
            result[index] = self.expression(section, key, helpers)
        return result

    def parse(self) -> ModelFile:
        try:
            self.config.read_string(self.text, source=self.filename or '<string>')
        except configparser.Error as e:
            raise ExpressionSyntaxError(f"malformed model file: {e.message}", self.filename,
                                        getattr(e, 'lineno', None)) from e
        for section in self.config.sections():
            if section not in _SECTIONS:
                raise ExpressionSyntaxError(f"unknown section [{section}]", self.filename,
                                            self.locate_section(section))
        if not self.config.has_section('drift'):
            raise ExpressionSyntaxError("a model needs a [drift] section", self.filename)
        get = self.section

        values: Dict[str, float] = {}
        deferred: List[str] = []
        for key, text in get('parameters').items():
            if not key.isidentifier():
                raise self.error('parameters', key, "invalid parameter name")
            if text.strip() == DEFERRED:
                deferred.append(key)
            else:
                values[key] = self.number('parameters', key, text, values)
        constants = {Parameter(k): v for k, v in values.items()}

        def resolve(e: Expression) -> Expression:
            return simplify_basic(substitute(e, constants)) if constants else e

        helpers = []
        for key in get('helpers'):
            if not key.isidentifier():
                raise self.error('helpers', key, "invalid helper name")
            helpers.append(HelperDefinition(key, resolve(self.expression('helpers', key, [h.name for h in helpers]))))
        names = [h.name for h in helpers]
        drift = self.components('drift', names)
        diffusion = self.components('diffusion', names) if self.config.has_section('diffusion') else None

        info = get('system')
        dimension = int(self.number('system', 'dimension', info['dimension'], {})) if 'dimension' in info else max(drift, default=-1) + 1
        for kind, entries in (('drift', drift), ('diffusion', diffusion)):
            if entries is not None and sorted(entries) != list(range(dimension)):
                raise ExpressionSyntaxError(f"[{kind}] must define the components 0 to {dimension - 1}, "
                                            f"got {sorted(entries)}", self.filename)
        calculus = info.get('calculus')
        spec = system([resolve(drift[i]) for i in range(dimension)], n=dimension,
                      diffusion=None if diffusion is None else [resolve(diffusion[i]) for i in range(dimension)],
                      helpers=helpers, parameters=None, calculus=calculus)
        undeclared = spec.used_parameters - set(deferred)
        if undeclared:
            raise SpecError(f"undeclared parameters: {', '.join(sorted(undeclared))}")
        spec = attr.evolve(spec, parameters=tuple(deferred))

        delays: List[float] = []
        if 'values' in get('delays'):
            delays = self.numbers('delays', 'values', values)
        for d in delays:
            if not d > 0 or not math.isfinite(d):
                raise self.error('delays', 'values', f"delays must be positive and finite, got {d}")

        groups = []
        for key in get('groups'):
            items = self.numbers('groups', key, {})
            if any(i != int(i) for i in items):
                raise self.error('groups', key, "group members must be component indices")
            groups.append(tuple(int(i) for i in items))

        initial = None
        init = get('initial')
        if 'state' in init:
            initial = tuple(self.numbers('initial', 'state', values))
            if len(initial) != dimension:
                raise self.error('initial', 'state', f"expected {dimension} values, got {len(initial)}")
        t0 = self.number('initial', 't0', init['t0'], values) if 't0' in init else 0.0

        return ModelFile(spec, info.get('name', ''), values, tuple(delays), tuple(groups),
                         initial, t0, self.filename)

    def section(self, name: str) -> Mapping[str, str]:
        return self.config[name] if self.config.has_section(name) else {}

    def locate_section(self, section: str) -> Optional[int]:
        for i, line in enumerate(self.lines):
            if line.strip() == f'[{section}]':
                return i + 1
        return None

def parse_model_text(text: str, filename: Optional[str] = None) -> ModelFile:
    """
    Parse the text of a model file.

    @raises ExpressionSyntaxError: With the line and column of the offending entry.
    @raises SpecError: If the statement is inconsistent.

    >>> model = parse_model_text('''
    ... [parameters]
    ... a = 0.5
    ... k = ?
    ... [drift]
    ... 0 = -a*y(0) + k
    ... ''')
    >>> model.spec.n, model.deferred, model.values
    (1, ('k',), {'a': 0.5})
    """
    return _Parser(text, filename).parse()

def parse_model(path: str) -> ModelFile:
    """Parse the model file at C{path}, see L{parse_model_text}."""
    with open(path, encoding='utf-8') as f:
        return parse_model_text(f.read(), path)

def format_model(model: ModelFile) -> str:
    """
    Model file text of C{model}; fixed parameter values are already substituted in the
    expressions, so only deferred parameters are written.
    """
    spec = model.spec
    config = configparser.ConfigParser(interpolation=None)
    config.optionxform = str # type:ignore[assignment, method-assign]
    config['system'] = {'dimension': str(spec.n)}
    if model.name:
        config['system']['name'] = model.name
    if spec.diffusion is not None:
        config['system']['calculus'] = spec.calculus
    if spec.parameters:
        config['parameters'] = {name: DEFERRED for name in spec.parameters}
    if spec.helpers:
        config['helpers'] = {h.name: to_source(h.value) for h in spec.helpers}
    config['drift'] = {str(i): to_source(e) for i, e in enumerate(spec.drift)}
    if spec.diffusion is not None:
        config['diffusion'] = {str(i): to_source(e) for i, e in enumerate(spec.diffusion)}
    if model.delays:
        config['delays'] = {'values': ', '.join(repr(d) for d in model.delays)}
    if model.groups:
        config['groups'] = {f'g{k}': ', '.join(str(i) for i in g) for k, g in enumerate(model.groups)}
    if model.initial is not None:
        config['initial'] = {'state': ', '.join(repr(v) for v in model.initial), 't0': repr(model.t0)}
    out = io.StringIO()
    config.write(out)
    return out.getvalue()

def initial_state(model: ModelFile) -> np.ndarray:
    """
    The initial state of a model.

    @raises InputError: If the model has none.
    """
    if model.initial is None:
        raise InputError("the model has no [initial] state")
    return np.array(model.initial, dtype=float)
