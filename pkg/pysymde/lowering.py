"""
Lowering of a L{SystemSpec} into an L{ExecutableSystem}.

The pipeline is:

    1. optional simplification of every expression (L{simplify_basic}),
    2. optional common-subexpression elimination over the helpers, drift and
       diffusion together, the new helpers come after the user helpers,
    3. emission of one register L{Program} for the drift and one for the diffusion:
       a helper section with the helpers reachable from the outputs, then one section
       per chunk of outputs.

Structurally equal subexpressions inside one section share a register. Sums and
products are emitted as balanced binary trees, so the reduction order of an
output only depends on the expression, never on the chunking.
"""

from typing import Dict, List, Optional, Sequence, Set

import attr

from pysymde import (FUNCTIONS, Expression, Constant, Time, State, PastState, Parameter, HelperRef,
                     Sum, Product, Power, Call, HelperDefinition, SystemSpec, LoweringError,
                     genericvisitor, iter_nodes)
from pysymde.program import BACKENDS, ExecutableSystem, Instruction, Op, Program
from pysymde.symbolic import eliminate_common_subexpressions, simplify_all

__all__ = ['LoweringOptions', 'lower']

def _check_chunk_size(inst: object, attribute: object, value: Optional[int]) -> None:
    if value is not None and (not isinstance(value, int) or value < 1):
        raise LoweringError(f"chunk size must be a positive integer, got {value!r}")

@attr.s(auto_attribs=True, frozen=True)
class LoweringOptions:
    """
    @ivar chunk_size: Number of outputs per chunk, C{None} for a single chunk.
    @ivar backend: One of L{BACKENDS}: C{'bytecode'}, C{'native'} or C{'treewalk'}.
    """
    apply_simplify: bool = True
    apply_cse: bool = True
    chunk_size: Optional[int] = attr.ib(default=None, validator=_check_chunk_size)
    backend: str = attr.ib(default='bytecode', validator=attr.validators.in_(BACKENDS))

class _ProgramBuilder:
    """Accumulates the instructions of one L{Program}."""

    def __init__(self, lowerer: '_Lowerer'):
        self.lowerer = lowerer
        self.instructions: List[Instruction] = []
        self.n_registers = 0
        self.helper_registers: Dict[str, int] = {}
        self._pending: Set[str] = set()
        self._helper_section = _SectionVisitor(self)

    def emit(self, op: Op, a: int = 0, b: int = 0, c: int = 0, value: float = 0.0) -> int:
        dst = self.n_registers
        self.n_registers += 1
        self.instructions.append(Instruction(op, dst, a, b, c, value))
        return dst

    def helper_register(self, name: str) -> int:
        """Register of a helper, emitting its definition (and its dependencies) first if needed."""
        try:
            return self.helper_registers[name]
        except KeyError:
            pass
        if name in self._pending:
            raise LoweringError(f"helper {name!r} is defined in terms of itself")
        try:
            value = self.lowerer.helpers[name]
        except KeyError:
            raise LoweringError(f"unknown helper {name!r}") from None
        self._pending.add(name)
        reg = self._helper_section.visit(value)
        self._pending.discard(name)
        self.helper_registers[name] = reg
        return reg

    def build(self, outputs: Sequence[Expression]) -> Program:
        for name in self.lowerer.reachable_helpers(outputs):
            self.helper_register(name)
        helper_end = len(self.instructions)
        size = self.lowerer.options.chunk_size or max(len(outputs), 1)
        chunks = []
        for first in range(0, len(outputs), size):
            stop = min(first + size, len(outputs))
            start = len(self.instructions)
            section = _SectionVisitor(self, shared=self._helper_section)
            for k in range(first, stop):
                reg = section.visit(outputs[k])
                self.instructions.append(Instruction(Op.OUT, 0, k, reg))
            chunks.append((first, stop, start, len(self.instructions)))
        return Program(tuple(self.instructions), self.n_registers, len(outputs), helper_end, tuple(chunks))

class _SectionVisitor(genericvisitor.Transformer[Expression, int]):
    """
    Emits the instructions computing an expression, returns its register.
    A section may see the registers of the helper section (C{shared}).
    """

    def __init__(self, builder: _ProgramBuilder, shared: Optional['_SectionVisitor'] = None):
        super().__init__()
        self.builder = builder
        if shared is not None:
            self._memo.update(shared._memo)

    def visit_Constant(self, e: Constant) -> int:
        return self.builder.emit(Op.CONST, value=e.value)

    def visit_Time(self, e: Time) -> int:
        return self.builder.emit(Op.TIME)

    def visit_State(self, e: State) -> int:
        return self.builder.emit(Op.STATE, a=e.index)

    def visit_PastState(self, e: PastState) -> int:
        time_reg = self.visit(e.at)
        return self.builder.emit(Op.PAST, a=e.index, b=time_reg, c=self.builder.lowerer.site_of(e.at))

    def visit_Parameter(self, e: Parameter) -> int:
        try:
            slot = self.builder.lowerer.slots[e.name]
        except KeyError:
            raise LoweringError(f"unknown parameter {e.name!r}") from None
        return self.builder.emit(Op.PARAM, a=slot)

    def visit_HelperRef(self, e: HelperRef) -> int:
        return self.builder.helper_register(e.name)

    def _reduce(self, op: Op, children: Sequence[Expression]) -> int:
        regs = [self.visit(c) for c in children]
        while len(regs) > 1:
            paired = [self.builder.emit(op, regs[i], regs[i+1]) for i in range(0, len(regs) - 1, 2)]
            if len(regs) % 2:
                paired.append(regs[-1])
            regs = paired
        return regs[0]

    def visit_Sum(self, e: Sum) -> int:
        if not e.terms:
            return self.builder.emit(Op.CONST, value=0.0)
        return self._reduce(Op.ADD, e.terms)

    def visit_Product(self, e: Product) -> int:
        if not e.factors:
            return self.builder.emit(Op.CONST, value=1.0)
        return self._reduce(Op.MUL, e.factors)

    def visit_Power(self, e: Power) -> int:
        base = self.visit(e.base)
        exponent = self.visit(e.exponent)
        return self.builder.emit(Op.POW, base, exponent)

    def visit_Call(self, e: Call) -> int:
        return self.builder.emit(Op.CALL, a=self.visit(e.arg), c=FUNCTIONS.index(e.fn))

@attr.s(auto_attribs=True)
class _Lowerer:
    """Implementation of L{lower()}."""
    spec: SystemSpec
    options: LoweringOptions
    helpers: Dict[str, Expression] = attr.ib(factory=dict)
    slots: Dict[str, int] = attr.ib(factory=dict)
    sites: Dict[Expression, int] = attr.ib(factory=dict)

    def site_of(self, at: Expression) -> int:
        return self.sites.setdefault(at, len(self.sites))

    def reachable_helpers(self, outputs: Sequence[Expression]) -> List[str]:
        """Names of the helpers needed by C{outputs}, transitively, in definition order."""
        found: Set[str] = set()
        todo = [node.name for node in iter_nodes(outputs) if isinstance(node, HelperRef)]
        while todo:
            name = todo.pop()
            if name in found:
                continue
            found.add(name)
            if name not in self.helpers:
                raise LoweringError(f"unknown helper {name!r}")
            todo.extend(node.name for node in iter_nodes([self.helpers[name]]) if isinstance(node, HelperRef))
        return [name for name in self.helpers if name in found]

    def check_helper_order(self) -> None:
        defined: Set[str] = set()
        names = {h.name for h in self.spec.helpers}
        for h in self.spec.helpers:
            for node in iter_nodes([h.value]):
                if isinstance(node, HelperRef) and node.name not in defined:
                    if node.name in names:
                        raise LoweringError(f"helper {h.name!r} references helper {node.name!r}, "
                                            "which is defined later")
                    raise LoweringError(f"unknown helper {node.name!r} in the definition of {h.name!r}")
            defined.add(h.name)

    def process(self) -> ExecutableSystem:
        spec = self.spec
        self.check_helper_order()
        self.slots = {name: i for i, name in enumerate(spec.parameters)}
        n_helpers = len(spec.helpers)
        n_drift = len(spec.drift)
        exprs = spec.all_expressions
        if self.options.apply_simplify:
            exprs = simplify_all(exprs)
        cse_defs: List[HelperDefinition] = []
        if self.options.apply_cse:
            cse_defs, exprs = eliminate_common_subexpressions(
                exprs, reserved=frozenset(h.name for h in spec.helpers))
        for h, value in zip(spec.helpers, exprs[:n_helpers]):
            self.helpers[h.name] = value
        for d in cse_defs:
            self.helpers[d.name] = d.value
        drift = exprs[n_helpers:n_helpers + n_drift]
        diffusion = exprs[n_helpers + n_drift:]

        drift_program = _ProgramBuilder(self).build(drift)
        diffusion_program = _ProgramBuilder(self).build(diffusion) if spec.diffusion is not None else None
        return ExecutableSystem(n=spec.n, drift=drift_program, diffusion=diffusion_program,
                                parameters=tuple(spec.parameters), n_sites=len(self.sites),
                                backend=self.options.backend)

def lower(spec: SystemSpec, options: Optional[LoweringOptions] = None, **kwargs: object) -> ExecutableSystem:
    """
    Lower a system specification into an executable, serializable evaluator.

    @param options: Lowering options, or pass them as keyword arguments.
    @raises LoweringError: If an expression references an unknown parameter or helper.

    >>> from pysymde import system, y
    >>> exe = lower(system([-y(1) - y(2), y(0) + 0.2*y(1), 0.2 + y(2)*(y(0) - 5.7)]), chunk_size=1)
    >>> exe.chunks, exe.parameters
    ([(0, 1), (1, 2), (2, 3)], ())
    >>> [round(v, 12) for v in exe.evaluate_drift(0, [0.1, 0.2, 0.3])]
    [-0.5, 0.14, -1.48]
    """
    if options is None:
        options = LoweringOptions(**kwargs) # type:ignore[arg-type]
    elif kwargs:
        options = attr.evolve(options, **kwargs)
    return _Lowerer(spec, options).process()
