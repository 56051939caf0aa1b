"""Pattern generator: script parser, 64-bit vector assembler and executor.

Script grammar (one instruction per line, ``#`` starts a comment)::

    Set<leaf>    node[,node...] [delay]      # SetHigh; alias SetHigh<leaf>
    Clr<leaf>    node[,node...] [delay]      # SetLow;  alias SetLow<leaf>
    Pulse<leaf>  node[,node...] [delay]
    Amp          node[,node...] code         # alias Amplitude; code 0..255
    Loop         count target                # repeat vectors target..here-1

``leaf`` is the pulse-select leaf cell 0..7, ``delay`` extra idle CKDIV ticks
(0..255) after the vector, ``target`` a 1-based vector number.  Keywords are
case-insensitive; node names are case-sensitive.

Word layout (bit 63 is the MSB)::

    [63:61] kind   [60:58] leaf   [57:56] spare control bits (zero)
    [55:48] amplitude code (Amp) or delay (Set/Clr/Pulse)
    [47:0]  control lines, one bit per node (Set/Clr/Pulse/Amp)
            Loop: [15:0] count, [24:16] target-1

Within a vector, targets are kept in control-line order so that
disassembly reproduces the parsed program.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "DEPTH",
    "WORD_BITS",
    "MAX_NEST",
    "Kind",
    "Instruction",
    "PatternProgram",
    "MemoryImage",
    "ControlEvent",
    "PatternError",
    "PatternSyntaxError",
    "CapacityError",
    "LoopNestingError",
    "TickBudgetExceeded",
    "default_node_table",
    "parse_script",
    "assemble",
    "decode",
    "execute",
    "total_ticks",
    "disassembly_json",
    "utilization_bits",
    "write_image",
    "read_image",
    "disassembly",
    "bundled_script",
    "BUNDLED_SCRIPTS",
]

DEPTH = 512
WORD_BITS = 64
CTRL_BITS = 48
MAX_NEST = 4
MAX_LOOP_COUNT = 0xFFFF
_CTRL_MASK = (1 << CTRL_BITS) - 1


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class CapacityError(PatternError):
    pass


class LoopNestingError(PatternError):
    pass


class TickBudgetExceeded(PatternError):
    pass


class Kind(enum.IntEnum):
    SetHigh = 1
    SetLow = 2
    Pulse = 3
    Amplitude = 4
    Loop = 5


def default_node_table() -> dict[str, int]:
    """32 CDAC clocks then 16 detector CDS switches.

    IU1..IU16 / ID1..ID16 are the upper and lower injector CDACs; DETk_S0 and
    DETk_S1 the two CDS sampling switches of detector k.
    """
    table = {}
    for i in range(16):
        table[f"IU{i + 1}"] = i
        table[f"ID{i + 1}"] = 16 + i
    for d in range(8):
        table[f"DET{d}_S0"] = 32 + 2 * d
        table[f"DET{d}_S1"] = 33 + 2 * d
    return table


@dataclass(frozen=True)
class Instruction:
    kind: Kind
    leaf_cell: int = 0
    targets: tuple[str, ...] = ()
    amplitude_code: int = 0
    loop_count: int = 0
    loop_target: int = 0
    delay_vectors: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 0 <= self.leaf_cell <= 7:
            raise PatternError(f"leaf cell {self.leaf_cell} outside 0..7")
        if not 0 <= self.amplitude_code <= 255:
            raise PatternError(f"amplitude code {self.amplitude_code} outside 0..255")
        if not 0 <= self.delay_vectors <= 255:
            raise PatternError(f"delay {self.delay_vectors} outside 0..255")
        if self.kind is Kind.Loop:
            if not 1 <= self.loop_count <= MAX_LOOP_COUNT:
                raise PatternError(f"loop count {self.loop_count} outside 1..{MAX_LOOP_COUNT}")
            if self.loop_target < 1:
                raise PatternError("loop target must be >= 1")
            if self.targets or self.delay_vectors or self.amplitude_code:
                raise PatternError("Loop takes only a count and a target")
        else:
            if not self.targets:
                raise PatternError(f"{self.kind.name} needs at least one target node")
            if self.kind is Kind.Amplitude and self.delay_vectors:
                raise PatternError("Amp vectors cannot carry a delay")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.name, "leaf_cell": self.leaf_cell}
        if self.kind is Kind.Loop:
            d.update(loop_count=self.loop_count, loop_target=self.loop_target)
        else:
            d["targets"] = list(self.targets)
            if self.kind is Kind.Amplitude:
                d["amplitude_code"] = self.amplitude_code
            else:
                d["delay_vectors"] = self.delay_vectors
        return d


@dataclass(frozen=True)
class PatternProgram:
    vectors: tuple[Instruction, ...]
    node_table: Mapping[str, int] = field(default_factory=default_node_table)

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(self.vectors))
        object.__setattr__(self, "node_table", dict(self.node_table))
        for bit in self.node_table.values():
            if not 0 <= bit < CTRL_BITS:
                raise PatternError(f"control line {bit} outside 0..{CTRL_BITS - 1}")
        if len(set(self.node_table.values())) != len(self.node_table):
            raise PatternError("two nodes share a control line")
        validate(self)

    def __len__(self):
        return len(self.vectors)

    def __eq__(self, other):
        if not isinstance(other, PatternProgram):
            return NotImplemented
        return self.vectors == other.vectors and self.node_table == other.node_table

    __hash__ = None


def validate(program: PatternProgram) -> None:
    """Capacity, node names and loop structure."""
    vecs = program.vectors
    if len(vecs) > DEPTH:
        raise CapacityError(f"{len(vecs)} vectors exceed the {DEPTH}-vector memory")
    for i, ins in enumerate(vecs, start=1):
        for n in ins.targets:
            if n not in program.node_table:
                raise PatternError(f"vector {i}: unknown node {n!r}")
        if ins.kind is Kind.Loop and ins.loop_target > i - 1:
            raise LoopNestingError(f"vector {i}: loop target {ins.loop_target} is not an earlier vector")
    check_nesting(vecs)


def _loop_bodies(vecs: Sequence[Instruction]) -> list[tuple[int, int]]:
    """(first, last) 1-based vector spans of each loop, loop vector included."""
    return [(ins.loop_target, i) for i, ins in enumerate(vecs, start=1) if ins.kind is Kind.Loop]


def check_nesting(vecs: Sequence[Instruction]) -> None:
    spans = _loop_bodies(vecs)
    for a_lo, a_hi in spans:
        depth = 0
        for b_lo, b_hi in spans:
            overlap = not (b_hi < a_lo or a_hi < b_lo)
            nested = (b_lo <= a_lo and a_hi <= b_hi) or (a_lo <= b_lo and b_hi <= a_hi)
            if overlap and not nested:
                raise LoopNestingError(f"loops at vectors {a_hi} and {b_hi} overlap without nesting")
            if b_lo <= a_lo and a_hi <= b_hi:
                depth += 1
        if depth > MAX_NEST:
            raise LoopNestingError(f"loop at vector {a_hi} nested {depth} deep (max {MAX_NEST})")


# ----------------------------------------------------------------- parser

_KEYWORDS = {
    "set": Kind.SetHigh,
    "sethigh": Kind.SetHigh,
    "clr": Kind.SetLow,
    "setlow": Kind.SetLow,
    "pulse": Kind.Pulse,
    "amp": Kind.Amplitude,
    "amplitude": Kind.Amplitude,
    "loop": Kind.Loop,
}
_HEAD = re.compile(r"([A-Za-z]+)(\d*)$")
_NODE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _int(tok: str, lineno: int, col: int, what: str) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise PatternSyntaxError(f"expected integer {what}, got {tok!r}", lineno, col) from None


def parse_script(text: str, node_table: Mapping[str, int] | None = None) -> PatternProgram:
    table = dict(default_node_table() if node_table is None else node_table)
    vectors: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        if not toks:
            continue
        head, hcol = toks[0]
        m = _HEAD.match(head)
        if not m or m.group(1).lower() not in _KEYWORDS:
            raise PatternSyntaxError(f"unknown instruction {head!r}", lineno, hcol)
        kind = _KEYWORDS[m.group(1).lower()]
        leaf_txt = m.group(2)
        args = toks[1:]
        if kind in (Kind.Amplitude, Kind.Loop) and leaf_txt:
            raise PatternSyntaxError(f"{m.group(1)} takes no leaf index", lineno, hcol)
        if kind in (Kind.SetHigh, Kind.SetLow, Kind.Pulse) and not leaf_txt:
            raise PatternSyntaxError(f"{m.group(1)} needs a leaf index 0..7", lineno, hcol)
        try:
            if kind is Kind.Loop:
                if len(args) != 2:
                    raise PatternSyntaxError("Loop needs: count target", lineno, hcol)
                count = _int(args[0][0], lineno, args[0][1], "loop count")
                target = _int(args[1][0], lineno, args[1][1], "loop target")
                if target > len(vectors):
                    raise PatternSyntaxError(
                        f"loop target {target} beyond current vector {len(vectors) + 1}", lineno, args[1][1]
                    )
                ins = Instruction(Kind.Loop, loop_count=count, loop_target=target)
            else:
                if not args:
                    raise PatternSyntaxError("missing target nodes", lineno, hcol + len(head))
                names_tok, ncol = args[0]
                names = names_tok.split(",")
                for nm in names:
                    if not _NODE.match(nm):
                        raise PatternSyntaxError(f"bad node name {nm!r}", lineno, ncol)
                    if nm not in table:
                        raise PatternSyntaxError(f"unknown node {nm!r}", lineno, ncol)
                if len(set(names)) != len(names):
                    raise PatternSyntaxError("duplicate node in vector", lineno, ncol)
                names = tuple(sorted(names, key=table.__getitem__))
                rest = args[1:]
                if kind is Kind.Amplitude:
                    if len(rest) != 1:
                        raise PatternSyntaxError("Amp needs: nodes code", lineno, hcol)
                    code = _int(rest[0][0], lineno, rest[0][1], "amplitude code")
                    ins = Instruction(kind, targets=names, amplitude_code=code)
                else:
                    if len(rest) > 1:
                        raise PatternSyntaxError("unexpected extra operand", lineno, rest[1][1])
                    delay = _int(rest[0][0], lineno, rest[0][1], "delay") if rest else 0
                    ins = Instruction(kind, leaf_cell=int(leaf_txt), targets=names, delay_vectors=delay)
        except PatternSyntaxError:
            raise
        except PatternError as exc:
            raise PatternSyntaxError(str(exc), lineno, hcol) from None
        vectors.append(ins)
        if len(vectors) > DEPTH:
            raise CapacityError(f"line {lineno}: more than {DEPTH} vectors")
    return PatternProgram(tuple(vectors), table)


# -------------------------------------------------------------- assembler


@dataclass(frozen=True)
class MemoryImage:
    words: np.ndarray  # (512,) uint64
    used_vectors: int
    node_table: Mapping[str, int] = field(default_factory=default_node_table)

    @property
    def utilization_bits(self) -> int:
        return self.used_vectors * WORD_BITS

    def to_bytes(self) -> bytes:
        return np.asarray(self.words, dtype="<u8").tobytes()


def encode(ins: Instruction, node_table: Mapping[str, int]) -> int:
    word = int(ins.kind) << 61 | ins.leaf_cell << 58
    if ins.kind is Kind.Loop:
        return word | (ins.loop_target - 1) << 16 | ins.loop_count
    payload = ins.amplitude_code if ins.kind is Kind.Amplitude else ins.delay_vectors
    word |= payload << 48
    for n in ins.targets:
        word |= 1 << node_table[n]
    return word


def decode_word(word: int, node_table: Mapping[str, int]) -> Instruction:
    word = int(word)
    kind = Kind(word >> 61 & 0x7)
    leaf = word >> 58 & 0x7
    if kind is Kind.Loop:
        return Instruction(kind, leaf, loop_count=word & 0xFFFF, loop_target=(word >> 16 & 0x1FF) + 1)
    by_bit = {b: n for n, b in node_table.items()}
    ctrl = word & _CTRL_MASK
    targets = tuple(by_bit[b] for b in range(CTRL_BITS) if ctrl >> b & 1)
    payload = word >> 48 & 0xFF
    if kind is Kind.Amplitude:
        return Instruction(kind, leaf, targets, amplitude_code=payload)
    return Instruction(kind, leaf, targets, delay_vectors=payload)


def assemble(program: PatternProgram) -> MemoryImage:
    words = np.zeros(DEPTH, dtype=np.uint64)
    for i, ins in enumerate(program.vectors):
        words[i] = encode(ins, program.node_table)
    return MemoryImage(words, len(program.vectors), dict(program.node_table))


def decode(image: MemoryImage) -> PatternProgram:
    vecs = tuple(decode_word(w, image.node_table) for w in image.words[: image.used_vectors])
    return PatternProgram(vecs, image.node_table)


def utilization_bits(program: PatternProgram) -> int:
    return WORD_BITS * len(program.vectors)


def write_image(image: MemoryImage, path) -> None:
    Path(path).write_bytes(image.to_bytes())


def read_image(path, node_table: Mapping[str, int] | None = None) -> MemoryImage:
    """Load a 4096-byte image; used vectors run up to the first zero word."""
    raw = Path(path).read_bytes()
    if len(raw) != DEPTH * 8:
        raise PatternError(f"image must be {DEPTH * 8} bytes, got {len(raw)}")
    words = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
    nz = np.flatnonzero(words == 0)
    used = int(nz[0]) if nz.size else DEPTH
    if np.any(words[used:]):
        raise PatternError("non-zero word after the end of the program")
    return MemoryImage(words, used, dict(default_node_table() if node_table is None else node_table))


def disassembly(image: MemoryImage) -> dict:
    prog = decode(image)
    return {
        "used_vectors": image.used_vectors,
        "utilization_bits": image.utilization_bits,
        "vectors": [
            {"vector": i + 1, "word": f"0x{int(w):016x}", **ins.to_dict()}
            for i, (w, ins) in enumerate(zip(image.words, prog.vectors))
        ],
    }


def disassembly_json(image: MemoryImage) -> str:
    return json.dumps(disassembly(image), indent=2, sort_keys=True)


# --------------------------------------------------------------- executor


@dataclass(frozen=True)
class ControlEvent:
    tick: int
    data_bus: int  # 16 bits
    ctrl_bus: int  # 48 bits
    vector: int = 0  # 1-based source vector


def _run(program: PatternProgram, max_ticks: int) -> tuple[list[ControlEvent], int]:
    check_nesting(program.vectors)
    vecs = program.vectors
    words = [encode(v, program.node_table) for v in vecs]
    events: list[ControlEvent] = []
    remaining: dict[int, int] = {}
    pc = tick = 0
    while pc < len(vecs):
        ins = vecs[pc]
        if ins.kind is Kind.Loop:
            if pc not in remaining:
                tick += 1
                remaining[pc] = ins.loop_count - 1
            if remaining[pc] > 0:
                remaining[pc] -= 1
                pc = ins.loop_target - 1
            else:
                del remaining[pc]
                pc += 1
        else:
            w = words[pc]
            events.append(ControlEvent(tick, w >> CTRL_BITS, w & _CTRL_MASK, pc + 1))
            tick += 1 + ins.delay_vectors
            pc += 1
        if tick > max_ticks:
            raise TickBudgetExceeded(f"tick budget {max_ticks} exhausted at vector {pc + 1}")
    return events, tick


def execute(program: PatternProgram, max_ticks: int = 10_000_000) -> list[ControlEvent]:
    """Issue vectors on consecutive CKDIV ticks.

    A vector occupies ``1 + delay_vectors`` ticks.  A Loop vector costs one
    tick when first reached and then rewinds for free until its count is
    spent, so ``Loop n t`` runs vectors t..here-1 n times in total.
    """
    return _run(program, max_ticks)[0]


def total_ticks(program: PatternProgram, max_ticks: int = 10_000_000) -> int:
    """CKDIV ticks consumed by a full run, loop-entry ticks included."""
    return _run(program, max_ticks)[1]


BUNDLED_SCRIPTS = {
    "script1": "script1.qpat",
    "script2": "script2.qpat",
    "script3": "script3.qpat",
    "script4": "script4.qpat",
}


def bundled_script(name: str) -> str:
    """Text of one of the shipped example scripts (``script1``..``script4``)."""
    from importlib.resources import files

    return files("qpusim.data.scripts").joinpath(BUNDLED_SCRIPTS[name]).read_text()
