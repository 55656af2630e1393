"""
rclab/minilang.py

    deterministic, fuel-bounded stack machine used by the code and simulation domains

    Instructions: PUSH k, ADD, SUB, MUL, DUP, SWAP, POP, READ, OUT, JZ off, JMP off.
    Jump offsets are relative to the jumping instruction and must land inside the program.
    Runtime faults never raise, they end execution with a HaltReason.
"""


from typing import List, Tuple, Optional, Sequence
from dataclasses import dataclass, field
import enum
import re


MAX_PROGRAM_LEN = 32
MAX_LITERAL = 999
MAX_STACK = 64
MAX_INPUTS = 8
MAX_VALUE = 10 ** 9
DEFAULT_FUEL = 1000
MAX_FUEL = 10_000

_ARG_OPS = frozenset(("PUSH", "JZ", "JMP"))
_PLAIN_OPS = frozenset(("ADD", "SUB", "MUL", "DUP", "SWAP", "POP", "READ", "OUT"))

_TOKEN_RE = re.compile(r"[^\s;]+")
_INT_RE = re.compile(r"[+-]?\d+")


class ParseError(ValueError):
    """ malformed program text, ``position`` is the character offset of the offending token """

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"parse: {reason} (at position {position})")


class HaltReason(enum.Enum):
    END = "end"
    STACK_UNDERFLOW = "stack_underflow"
    STACK_OVERFLOW = "stack_overflow"
    READ_PAST_INPUT = "read_past_input"
    FUEL_EXHAUSTED = "fuel_exhausted"
    OVERFLOW = "overflow"


@dataclass(frozen=True)
class Instr:
    op: str
    arg: Optional[int] = None

    def render(self) -> str :
        return self.op if self.arg is None else f"{self.op} {self.arg}"


@dataclass(frozen=True)
class Program:
    instrs: Tuple[Instr, ...]

    def __len__(self) -> int :
        return len(self.instrs)


@dataclass(frozen=True)
class TestCase:
    inputs: Tuple[int, ...]
    expected_outputs: Tuple[int, ...]

    def __post_init__(self):
        if len(self.inputs) > MAX_INPUTS:
            raise ValueError(f"TestCase: at most {MAX_INPUTS} inputs, got {len(self.inputs)}")

    def to_json(self) -> dict :
        return {"inputs": list(self.inputs), "outputs": list(self.expected_outputs)}

    @staticmethod
    def from_json(obj: dict) -> "TestCase" :
        return TestCase(tuple(obj["inputs"]), tuple(obj["outputs"]))


@dataclass
class ExecResult:
    outputs: List[int]
    halt: HaltReason
    steps: int
    # (pc, instruction, stack after) per executed instruction, only filled when requested
    trace: List[Tuple[int, Instr, Tuple[int, ...]]] = field(default_factory=list)


def parse(source: str) -> Program :
    """
    parse program text, tokens are separated by whitespace and/or semicolons and opcodes
    are case-insensitive

    Raises
    ------
    ParseError
        unknown opcode, missing/invalid argument, literal out of range, program too long
        or a jump that leaves the program
    """
    tokens = [(m.start(), m.group()) for m in _TOKEN_RE.finditer(source)]
    instrs, positions = [], []
    i = 0
    while i < len(tokens):
        pos, tok = tokens[i]
        op = tok.upper()
        if op in _PLAIN_OPS:
            instr = Instr(op)
            i += 1
        elif op in _ARG_OPS:
            if i + 1 >= len(tokens) or not _INT_RE.fullmatch(tokens[i + 1][1]):
                raise ParseError(pos, f"{op} needs an integer argument")
            arg = int(tokens[i + 1][1])
            if op == "PUSH" and abs(arg) > MAX_LITERAL:
                raise ParseError(tokens[i + 1][0], f"literal {arg} outside [-{MAX_LITERAL}, {MAX_LITERAL}]")
            instr = Instr(op, arg)
            i += 2
        else:
            raise ParseError(pos, f"unknown opcode {tok!r}")
        if len(instrs) == MAX_PROGRAM_LEN:
            raise ParseError(pos, f"program longer than {MAX_PROGRAM_LEN} instructions")
        instrs.append(instr)
        positions.append(pos)
    n = len(instrs)
    for pc, (instr, pos) in enumerate(zip(instrs, positions)):
        if instr.op in ("JZ", "JMP") and not 0 <= pc + instr.arg < n:
            raise ParseError(pos, f"jump target {pc + instr.arg} outside program of length {n}")
    return Program(tuple(instrs))


def render(prog: Program) -> str :
    """ canonical program text, parse(render(p)) == p """
    return "; ".join(instr.render() for instr in prog.instrs)


def run(prog: Program,
        inputs: Sequence[int],
        fuel: int = DEFAULT_FUEL,
        record: bool = False
        ) -> ExecResult :
    """
    execute a program

    Parameters
    ----------
    prog : Program
    inputs : sequence of int
        consumed in order by READ
    fuel : int, default=1000
        maximum number of executed instructions (at most 10,000)
    record : bool, default=False
        keep a per-step execution trace

    Returns
    -------
    result : ExecResult
        OUT emissions up to the halt, the halt reason and the number of steps executed
    """
    if not 0 <= fuel <= MAX_FUEL:
        raise ValueError(f"run: fuel must be in [0, {MAX_FUEL}], got {fuel}")
    stack: List[int] = []
    outputs: List[int] = []
    trace = []
    pc, steps, next_input = 0, 0, 0
    n = len(prog.instrs)

    def done(reason):
        return ExecResult(outputs, reason, steps, trace)

    while pc < n:
        if steps >= fuel:
            return done(HaltReason.FUEL_EXHAUSTED)
        instr = prog.instrs[pc]
        op = instr.op
        steps += 1
        next_pc = pc + 1
        match op:
            case "PUSH":
                stack.append(instr.arg)
            case "READ":
                if next_input >= len(inputs):
                    return done(HaltReason.READ_PAST_INPUT)
                stack.append(int(inputs[next_input]))
                next_input += 1
            case "DUP":
                if not stack:
                    return done(HaltReason.STACK_UNDERFLOW)
                stack.append(stack[-1])
            case "POP" | "OUT":
                if not stack:
                    return done(HaltReason.STACK_UNDERFLOW)
                v = stack.pop()
                if op == "OUT":
                    outputs.append(v)
            case "SWAP":
                if len(stack) < 2:
                    return done(HaltReason.STACK_UNDERFLOW)
                stack[-1], stack[-2] = stack[-2], stack[-1]
            case "ADD" | "SUB" | "MUL":
                if len(stack) < 2:
                    return done(HaltReason.STACK_UNDERFLOW)
                b = stack.pop()
                a = stack.pop()
                v = a + b if op == "ADD" else a - b if op == "SUB" else a * b
                if abs(v) > MAX_VALUE:
                    return done(HaltReason.OVERFLOW)
                stack.append(v)
            case "JZ":
                if not stack:
                    return done(HaltReason.STACK_UNDERFLOW)
                if stack.pop() == 0:
                    next_pc = pc + instr.arg
            case "JMP":
                next_pc = pc + instr.arg
        if len(stack) > MAX_STACK:
            return done(HaltReason.STACK_OVERFLOW)
        if record:
            trace.append((pc, instr, tuple(stack)))
        pc = next_pc
    return done(HaltReason.END)


def run_tests(prog: Program, tests: Sequence[TestCase], fuel: int = DEFAULT_FUEL) -> Tuple[int, int] :
    """
    run a program against a unit-test suite, a test passes iff execution ends normally
    and the outputs equal the expected outputs exactly

    Returns
    -------
    (pass_count, total)
    """
    if not tests:
        raise ValueError("run_tests: test suite is empty")
    passed = 0
    for tc in tests:
        res = run(prog, tc.inputs, fuel=fuel)
        if res.halt is HaltReason.END and tuple(res.outputs) == tuple(tc.expected_outputs):
            passed += 1
    return passed, len(tests)
