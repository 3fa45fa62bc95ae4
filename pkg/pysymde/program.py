"""
Executable evaluation programs: the result of L{pysymde.lowering.lower}.

A L{Program} is a flat sequence of register instructions in single-assignment form.
It starts with a helper section, computed once per evaluation, followed by one
section per chunk of outputs. Three backends execute it:

    - C{bytecode}: a dispatch loop runs the instruction list over a register
      file. The instructions are assembled once (constants preloaded, functions
      resolved), so the loop only moves values between registers.
    - C{native}: the program is translated to straight-line Python source (one
      local variable per register, one function per chunk) and compiled once with
      L{compile}; evaluations run the compiled code object.
    - C{treewalk}: the program is interpreted by recursively walking its register
      DAG from each output; slow, used as reference.

All backends follow IEEE semantics: domain errors and overflows produce NaN and
infinities instead of raising.

An L{ExecutableSystem} bundles the drift and optional diffusion programs with the
parameter slot table, and can be saved to and loaded from a file.
"""

from typing import (Any, Callable, Dict, List, Mapping, NamedTuple, Optional,
                    Sequence, Tuple, Union)
import enum
import math
import operator
import struct
import zlib

import attr
import numpy as np

from cached_property import cached_property

from pysymde import FUNCTIONS, ContractViolation, ProgramLoadError, PysymdeError

__all__ = ['Op', 'Instruction', 'Program', 'ExecutableSystem', 'save', 'load', 'BACKENDS']

BACKENDS = ('bytecode', 'native', 'treewalk')

PastAccessor = Callable[[int, float, int], float]
"""
Delayed state access: C{(component index, time, access-site id) -> value}.

The site id identifies one delay argument expression of the system, so an
accessor can keep one search cursor per site.
"""

class Op(enum.IntEnum):
    CONST = 0
    TIME = 1
    STATE = 2
    PARAM = 3
    PAST = 4
    ADD = 5
    MUL = 6
    POW = 7
    CALL = 8
    OUT = 9

# plain ints for the dispatch loop
_TIME, _STATE, _PARAM, _PAST, _ADD, _MUL, _POW, _CALL, _OUT = (
    int(op) for op in (Op.TIME, Op.STATE, Op.PARAM, Op.PAST, Op.ADD, Op.MUL, Op.POW, Op.CALL, Op.OUT))

class Instruction(NamedTuple):
    """
    One register instruction. Field use per opcode:

        - CONST: C{dst = value}
        - TIME: C{dst = t}
        - STATE: C{dst = y[a]}
        - PARAM: C{dst = params[a]}
        - PAST: C{dst = past(a, register b, site c)}
        - ADD, MUL, POW: C{dst = register a (op) register b}
        - CALL: C{dst = FUNCTIONS[c](register a)}
        - OUT: C{output[a] = register b}, C{dst} unused
    """
    op: Op
    dst: int = 0
    a: int = 0
    b: int = 0
    c: int = 0
    value: float = 0.0

def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return x * 0.0 # zero keeps its value, NaN stays NaN

_SCALAR_NAMESPACE: Dict[str, Any] = {
    'sin': math.sin, 'cos': math.cos, 'tan': math.tan, 'exp': math.exp, 'log': math.log,
    'sqrt': math.sqrt, 'sinh': math.sinh, 'cosh': math.cosh, 'tanh': math.tanh,
    'abs': abs, 'sign': _sign, 'pow': math.pow, 'ipow': operator.pow,
    'inf': math.inf, 'nan': math.nan, 'float64': float,
}

_ARRAY_NAMESPACE: Dict[str, Any] = {
    'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp, 'log': np.log,
    'sqrt': np.sqrt, 'sinh': np.sinh, 'cosh': np.cosh, 'tanh': np.tanh,
    'abs': np.abs, 'sign': np.sign, 'pow': np.power, 'ipow': np.power,
    'inf': math.inf, 'nan': math.nan, 'float64': np.float64,
}

def _is_small_integer(value: float) -> bool:
    return math.isfinite(value) and value == int(value) and abs(value) <= 64

@attr.s(auto_attribs=True, frozen=True)
class Program:
    """
    A register program computing C{n_outputs} values.

    @ivar helper_end: Index of the first instruction after the helper section.
    @ivar chunks: Per chunk: C{(first output, stop output, first instruction, stop instruction)}.
    """
    instructions: Tuple[Instruction, ...]
    n_registers: int
    n_outputs: int
    helper_end: int
    chunks: Tuple[Tuple[int, int, int, int], ...]

    @cached_property
    def constants(self) -> Dict[int, float]:
        """Registers holding constants."""
        return {i.dst: i.value for i in self.instructions if i.op == Op.CONST}

    @cached_property
    def uses_past(self) -> bool:
        return any(i.op == Op.PAST for i in self.instructions)

    def _integral_exponent(self, ins: Instruction) -> Optional[float]:
        value = self.constants.get(ins.b)
        if value is not None and _is_small_integer(value):
            return value
        return None

    # bytecode backend

    def _assemble(self, namespace: Mapping[str, Any]) -> 'Tuple[List[Any], Tuple[Tuple[int, int, int, int, Any], ...]]':
        """
        Prepare the dispatch loop: the register file template with all constants
        loaded, and the remaining instructions as C{(op, dst, a, b, arg)} tuples
        where C{arg} is the resolved function of CALL and POW, or the site of PAST.
        """
        registers: List[Any] = [namespace['float64'](0.0)] * self.n_registers
        code = []
        for ins in self.instructions:
            op = ins.op
            if op == Op.CONST:
                registers[ins.dst] = namespace['float64'](ins.value)
                continue
            if op == Op.POW:
                arg = namespace['ipow'] if self._integral_exponent(ins) is not None else namespace['pow']
            elif op == Op.CALL:
                arg = namespace[FUNCTIONS[ins.c]]
            elif op == Op.PAST:
                arg = ins.c
            else:
                arg = None
            code.append((int(op), ins.dst, ins.a, ins.b, arg))
        return registers, tuple(code)

    @cached_property
    def _scalar_code(self) -> 'Tuple[List[Any], Tuple[Tuple[int, int, int, int, Any], ...]]':
        return self._assemble(_SCALAR_NAMESPACE)

    @cached_property
    def _array_code(self) -> 'Tuple[List[Any], Tuple[Tuple[int, int, int, int, Any], ...]]':
        return self._assemble(_ARRAY_NAMESPACE)

    def dispatch(self, t: Any, y: Any, p: Any, past: Optional[PastAccessor], array: bool = False) -> List[Any]:
        """
        Run the instruction list in a dispatch loop and return the outputs.

        Helpers come first in the list, so they are computed once before any chunk.
        """
        template, code = self._array_code if array else self._scalar_code
        r = list(template)
        out: List[Any] = [0.0] * self.n_outputs
        for op, dst, a, b, arg in code:
            if op == _MUL:
                r[dst] = r[a] * r[b]
            elif op == _ADD:
                r[dst] = r[a] + r[b]
            elif op == _STATE:
                r[dst] = y[a]
            elif op == _CALL:
                r[dst] = arg(r[a])
            elif op == _POW:
                r[dst] = arg(r[a], r[b])
            elif op == _OUT:
                out[a] = r[b]
            elif op == _PARAM:
                r[dst] = p[a]
            elif op == _PAST:
                r[dst] = past(a, r[b], arg) # type:ignore[misc]
            elif op == _TIME:
                r[dst] = t
            else:
                raise AssertionError(f"unexpected opcode {op}")
        return out

    # native backend

    def _statement(self, ins: Instruction, array: bool) -> str:
        op = ins.op
        d = f"r{ins.dst}"
        if op == Op.CONST:
            v = ins.value
            if math.isnan(v):
                literal = 'nan'
            elif math.isinf(v):
                literal = 'inf' if v > 0 else '(-inf)'
            else:
                literal = repr(v)
            return f"{d} = float64({literal})" if array else f"{d} = {literal}"
        if op == Op.TIME:
            return f"{d} = t"
        if op == Op.STATE:
            return f"{d} = y[{ins.a}]"
        if op == Op.PARAM:
            return f"{d} = p[{ins.a}]"
        if op == Op.PAST:
            return f"{d} = past({ins.a}, r{ins.b}, {ins.c})"
        if op == Op.ADD:
            return f"{d} = r{ins.a} + r{ins.b}"
        if op == Op.MUL:
            return f"{d} = r{ins.a} * r{ins.b}"
        if op == Op.POW:
            if self._integral_exponent(ins) is not None:
                return f"{d} = ipow(r{ins.a}, r{ins.b})"
            return f"{d} = pow(r{ins.a}, r{ins.b})"
        if op == Op.CALL:
            return f"{d} = {FUNCTIONS[ins.c]}(r{ins.a})"
        raise AssertionError(f"unexpected instruction {ins!r}")

    def to_python_source(self, array: bool = False) -> str:
        """
        The Python source of the C{native} backend. Defines C{evaluate(t, y, p, past)}
        returning the list of outputs.

        @param array: Generate code for numpy arrays (constants become numpy scalars).
        """
        lines: List[str] = []
        helper_regs = {i.dst for i in self.instructions[:self.helper_end] if i.op != Op.OUT}
        exported: List[int] = []
        chunk_calls: List[str] = []
        for k, (first, stop, start, end) in enumerate(self.chunks):
            body = self.instructions[start:end]
            used = sorted({r for i in body if i.op != Op.CONST and i.op != Op.OUT
                           for r in ((i.a, i.b) if i.op in (Op.ADD, Op.MUL, Op.POW) else
                                     (i.b,) if i.op == Op.PAST else
                                     (i.a,) if i.op == Op.CALL else ())
                           if r in helper_regs} |
                          {i.b for i in body if i.op == Op.OUT and i.b in helper_regs})
            for r in used:
                if r not in exported:
                    exported.append(r)
            lines.append(f"def _chunk{k}(t, y, p, past, hv):")
            for r in used:
                lines.append(f"    r{r} = hv[{exported.index(r)}]")
            outputs: Dict[int, int] = {}
            for ins in body:
                if ins.op == Op.OUT:
                    outputs[ins.a] = ins.b
                else:
                    lines.append("    " + self._statement(ins, array))
            lines.append("    return [" + ", ".join(f"r{outputs[j]}" for j in range(first, stop)) + "]")
            lines.append("")
            chunk_calls.append(f"_chunk{k}(t, y, p, past, hv)")
        lines.append("def evaluate(t, y, p, past):")
        for ins in self.instructions[:self.helper_end]:
            lines.append("    " + self._statement(ins, array))
        lines.append("    hv = (" + "".join(f"r{r}, " for r in exported) + ")")
        if chunk_calls:
            lines.append(f"    out = {chunk_calls[0]}")
            for call in chunk_calls[1:]:
                lines.append(f"    out.extend({call})")
        else:
            lines.append("    out = []")
        lines.append("    return out")
        return "\n".join(lines) + "\n"

    def _compile(self, array: bool) -> Callable[..., List[Any]]:
        namespace = dict(_ARRAY_NAMESPACE if array else _SCALAR_NAMESPACE)
        code = compile(self.to_python_source(array), '<pysymde program>', 'exec')
        exec(code, namespace)
        return namespace['evaluate'] # type:ignore[no-any-return]

    @cached_property
    def scalar_function(self) -> Callable[..., List[Any]]:
        """Compiled C{evaluate(t, y, p, past)} over Python floats."""
        return self._compile(array=False)

    @cached_property
    def array_function(self) -> Callable[..., List[Any]]:
        """Compiled C{evaluate(t, y, p, past)} over numpy scalars or arrays."""
        return self._compile(array=True)

    # treewalk backend

    @cached_property
    def _definitions(self) -> Dict[int, Instruction]:
        return {i.dst: i for i in self.instructions if i.op != Op.OUT}

    def _walk(self, reg: int, env: 'Tuple[Any, Any, Any, Any, Dict[int, Any], Mapping[str, Any]]') -> Any:
        known = env[4]
        try:
            return known[reg]
        except KeyError:
            pass
        value = known[reg] = self._compute(self._definitions[reg], env)
        return value

    def _compute(self, ins: Instruction, env: 'Tuple[Any, Any, Any, Any, Dict[int, Any], Mapping[str, Any]]') -> Any:
        t, y, p, past, _, ns = env
        op = ins.op
        if op == Op.CONST:
            return ns['float64'](ins.value)
        if op == Op.TIME:
            return t
        if op == Op.STATE:
            return y[ins.a]
        if op == Op.PARAM:
            return p[ins.a]
        if op == Op.PAST:
            return past(ins.a, self._walk(ins.b, env), ins.c)
        if op == Op.ADD:
            return self._walk(ins.a, env) + self._walk(ins.b, env)
        if op == Op.MUL:
            return self._walk(ins.a, env) * self._walk(ins.b, env)
        if op == Op.POW:
            power = ns['ipow'] if self._integral_exponent(ins) is not None else ns['pow']
            return power(self._walk(ins.a, env), self._walk(ins.b, env))
        if op == Op.CALL:
            return ns[FUNCTIONS[ins.c]](self._walk(ins.a, env))
        raise AssertionError(f"unexpected instruction {ins!r}")

    def treewalk(self, t: Any, y: Any, p: Any, past: Optional[PastAccessor], array: bool = False) -> List[Any]:
        """
        Interpret the program: helpers are computed once, then each output is
        computed by recursively walking the registers it depends on. Every
        register is computed at most once per evaluation.
        """
        known: Dict[int, Any] = {}
        env = (t, y, p, past, known, _ARRAY_NAMESPACE if array else _SCALAR_NAMESPACE)
        for ins in self.instructions[:self.helper_end]:
            self._walk(ins.dst, env)
        outputs: List[Any] = [0.0] * self.n_outputs
        for _, _, start, end in self.chunks:
            for ins in self.instructions[start:end]:
                if ins.op == Op.OUT:
                    outputs[ins.a] = self._walk(ins.b, env)
        return outputs

    def prepare(self, backend: str, array: bool = False) -> None:
        """Do the one-time work of a backend (assembling or compiling) ahead of the first evaluation."""
        if backend == 'bytecode':
            self._array_code if array else self._scalar_code
        elif backend == 'native':
            self.array_function if array else self.scalar_function

    def _evaluate(self, backend: str, t: Any, y: Any, p: Any, past: Optional[PastAccessor],
                  array: bool) -> List[Any]:
        if backend == 'bytecode':
            return self.dispatch(t, y, p, past, array)
        if backend == 'native':
            function = self.array_function if array else self.scalar_function
            return function(t, y, p, past)
        if backend == 'treewalk':
            return self.treewalk(t, y, p, past, array)
        raise ContractViolation(f"unknown backend {backend!r}, expected one of {', '.join(BACKENDS)}")

    def run(self, backend: str, t: float, y: np.ndarray, p: Sequence[float],
            past: Optional[PastAccessor]) -> np.ndarray:
        """
        Evaluate for one state (C{y} of shape C{(n,)}) or a batch of states (shape C{(n, k)}).
        """
        if y.ndim == 1:
            try:
                values = self._evaluate(backend, float(t), y.tolist(), tuple(float(v) for v in p), past,
                                        array=False)
            except (ArithmeticError, ValueError) as e:
                if isinstance(e, PysymdeError):
                    raise
                # Retry with numpy scalars, which follow IEEE semantics instead of raising.
                with np.errstate(all='ignore'):
                    values = self._evaluate(backend, np.float64(t), y.astype(np.float64),
                                            np.asarray(p, dtype=np.float64), past, array=True)
            return np.array(values, dtype=float)
        with np.errstate(all='ignore'):
            values = self._evaluate(backend, np.float64(t), y, np.asarray(p, dtype=np.float64), past, array=True)
        result = np.empty((self.n_outputs,) + y.shape[1:], dtype=float)
        for i, value in enumerate(values):
            result[i] = value
        return result

@attr.s(auto_attribs=True, frozen=True)
class ExecutableSystem:
    """
    Lowered, serializable evaluator of a system's drift and diffusion.

    No symbolic expression is kept: the programs are self-contained.

    @ivar parameters: The parameter slot table: names of the parameters that must be
        bound at evaluation time, in slot order.
    @ivar n_sites: Number of distinct delay access sites.
    """
    VERSION = 1

    n: int
    drift: Program
    diffusion: Optional[Program] = None
    parameters: Tuple[str, ...] = ()
    n_sites: int = 0
    backend: str = attr.ib(default='bytecode', validator=attr.validators.in_(BACKENDS))

    @property
    def uses_past(self) -> bool:
        """Whether evaluating the drift needs a past accessor."""
        return self.drift.uses_past

    @property
    def chunks(self) -> List[Tuple[int, int]]:
        """Output index ranges of the drift chunks."""
        return [(first, stop) for first, stop, _, _ in self.drift.chunks]

    def with_backend(self, backend: str) -> 'ExecutableSystem':
        """A copy of this system evaluated by another backend."""
        return attr.evolve(self, backend=backend)

    def parameter_vector(self, params: Union[Sequence[float], Mapping[str, float]] = ()) -> Tuple[float, ...]:
        """
        Normalize parameter values to a vector in slot order.

        @param params: Values in slot order, or a mapping from parameter names.
        @raises ContractViolation: If a value is missing or superfluous.
        """
        if isinstance(params, Mapping):
            missing = [name for name in self.parameters if name not in params]
            if missing:
                raise ContractViolation(f"no value for parameter(s) {', '.join(missing)}")
            unknown = [name for name in params if name not in self.parameters]
            if unknown:
                raise ContractViolation(f"unknown parameter(s) {', '.join(unknown)}")
            return tuple(float(params[name]) for name in self.parameters)
        values = tuple(float(v) for v in params)
        if len(values) != len(self.parameters):
            raise ContractViolation(f"expected {len(self.parameters)} parameter values "
                                    f"({', '.join(self.parameters)}), got {len(values)}")
        return values

    def _state(self, y: Any) -> np.ndarray:
        state = np.asarray(y, dtype=float)
        if state.shape[:1] != (self.n,) or state.ndim > 2:
            raise ContractViolation(f"expected a state of shape ({self.n},) or ({self.n}, k), got {state.shape}")
        return state

    def evaluate_drift(self, t: float, y: Any, past: Optional[PastAccessor] = None,
                       params: Union[Sequence[float], Mapping[str, float]] = ()) -> np.ndarray:
        """
        Evaluate M{f(t, y, past)}. Inputs are not modified.

        @param y: One state of shape C{(n,)} or a batch of shape C{(n, k)}.
        @param past: Required iff L{uses_past}.
        @raises ContractViolation: If the past accessor or parameters don't match.
        """
        if self.uses_past and past is None:
            raise ContractViolation("this system uses delayed states, a past accessor is required")
        state = self._state(y)
        if self.uses_past and state.ndim == 2:
            raise ContractViolation("batches of states are not supported for systems with delays")
        return self.drift.run(self.backend, t, state, self.parameter_vector(params), past)

    def evaluate_diffusion(self, t: float, y: Any,
                           params: Union[Sequence[float], Mapping[str, float]] = ()) -> np.ndarray:
        """Evaluate the diagonal noise intensities M{g(t, y)}."""
        if self.diffusion is None:
            raise ContractViolation("this system has no diffusion term")
        return self.diffusion.run(self.backend, t, self._state(y), self.parameter_vector(params), None)

    # serialization

    def to_bytes(self) -> bytes:
        """Serialized form, see L{save}."""
        parts = [_HEADER.pack(_MAGIC, self.VERSION, self.n, int(self.diffusion is not None),
                              len(self.parameters), self.n_sites)]
        for program in (self.drift, self.diffusion):
            if program is None:
                continue
            parts.append(_PROGRAM.pack(len(program.instructions), program.n_registers,
                                       program.n_outputs, program.helper_end, len(program.chunks)))
            parts.extend(_INSTRUCTION.pack(int(i.op), i.dst, i.a, i.b, i.c, i.value) for i in program.instructions)
            parts.extend(_CHUNK.pack(*chunk) for chunk in program.chunks)
        for name in self.parameters:
            encoded = name.encode('utf-8')
            parts.append(_NAME_LENGTH.pack(len(encoded)) + encoded)
        data = b''.join(parts)
        return data + _CRC.pack(zlib.crc32(data))

    @classmethod
    def from_bytes(cls, data: bytes, backend: str = 'bytecode') -> 'ExecutableSystem':
        """
        Inverse of L{to_bytes}.

        @raises ProgramLoadError: On a bad magic number, version or checksum, or truncated data.
        """
        if len(data) < _HEADER.size + _CRC.size:
            raise ProgramLoadError("truncated program file")
        body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
        magic, version, n, has_diffusion, n_params, n_sites = _HEADER.unpack_from(body)
        if magic != _MAGIC:
            raise ProgramLoadError("not a compiled program file (bad magic number)")
        if zlib.crc32(body) != crc:
            raise ProgramLoadError("checksum mismatch, the program file is corrupted or truncated")
        if version != cls.VERSION:
            raise ProgramLoadError(f"unsupported program format version {version}, expected {cls.VERSION}")
        reader = _Reader(body, _HEADER.size)
        programs = []
        for _ in range(1 + has_diffusion):
            n_ins, n_reg, n_out, helper_end, n_chunks = reader.read(_PROGRAM)
            try:
                instructions = tuple(Instruction(Op(op), dst, a, b, c, value) for op, dst, a, b, c, value
                                     in (reader.read(_INSTRUCTION) for _ in range(n_ins)))
            except ValueError as e:
                raise ProgramLoadError(f"invalid instruction: {e}") from e
            chunks = tuple(reader.read(_CHUNK) for _ in range(n_chunks))
            programs.append(Program(instructions, n_reg, n_out, helper_end, chunks))
        names = []
        for _ in range(n_params):
            (length,) = reader.read(_NAME_LENGTH)
            names.append(reader.take(length).decode('utf-8'))
        if reader.offset != len(body):
            raise ProgramLoadError("trailing data in program file")
        return cls(n=n, drift=programs[0], diffusion=programs[1] if has_diffusion else None,
                   parameters=tuple(names), n_sites=n_sites, backend=backend)

    def save(self, path: str) -> None:
        """
        Write this system to C{path}.

        Format, all integers little-endian: magic C{SYMF}, u32 format version, u32
        dimension, u32 flags, u32 parameter count, u32 site count; per program: sizes,
        instruction records and chunk table; parameter names; CRC32 of everything before.
        """
        with open(path, 'wb') as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path: str, backend: str = 'bytecode') -> 'ExecutableSystem':
        """
        Read a system written by L{save}.

        @raises ProgramLoadError: If the file is not a valid program file.
        """
        with open(path, 'rb') as f:
            return cls.from_bytes(f.read(), backend=backend)

_MAGIC = b'SYMF'
_HEADER = struct.Struct('<4sIIIII')
_PROGRAM = struct.Struct('<IIIII')
_INSTRUCTION = struct.Struct('<BIIIId')
_CHUNK = struct.Struct('<IIII')
_NAME_LENGTH = struct.Struct('<H')
_CRC = struct.Struct('<I')

class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise ProgramLoadError("truncated program file")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def read(self, fmt: struct.Struct) -> Tuple[Any, ...]:
        return fmt.unpack(self.take(fmt.size))

def save(exe: ExecutableSystem, path: str) -> None:
    """Write C{exe} to C{path}, see L{ExecutableSystem.save}."""
    exe.save(path)

def load(path: str, backend: str = 'bytecode') -> ExecutableSystem:
    """Read an L{ExecutableSystem} from C{path}."""
    return ExecutableSystem.load(path, backend=backend)
