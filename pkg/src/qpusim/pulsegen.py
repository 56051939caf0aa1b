"""High-speed pulse generator.

A 16-stage Johnson counter clocked at ``clk_freq_hz`` yields 16 square-wave
phases spaced one clock period apart; each phase is high for 16 periods and
low for 16.  Pulse-select leaf cells AND/OR two phases, and the mode-select
stage either passes the chosen leaf output through or drives an SR latch for
long pulses.

Timelines are immutable lists of edges.  Digital signals start low at t=0.
"""
from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "N_PHASES",
    "Edge",
    "SignalTimeline",
    "Combine",
    "PulseSelectConfig",
    "PassThrough",
    "SRLatch",
    "LatchWarning",
    "JitterModel",
    "generate_phases",
    "pulse_select",
    "mode_select",
    "control_timeline",
    "apply_jitter",
]

N_PHASES = 16


class Edge(NamedTuple):
    time_s: float
    signal: str
    level: float


@dataclass(frozen=True)
class SignalTimeline:
    edges: tuple[Edge, ...]
    resolution_s: float = 0.0

    def __post_init__(self):
        edges = tuple(Edge(float(e[0]), str(e[1]), e[2]) for e in self.edges)
        times = [e.time_s for e in edges]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("edge times must be nondecreasing")
        object.__setattr__(self, "edges", edges)

    def __len__(self):
        return len(self.edges)

    @property
    def signals(self) -> list[str]:
        seen = dict.fromkeys(e.signal for e in self.edges)
        return list(seen)

    def edges_for(self, signal: str) -> list[Edge]:
        return [e for e in self.edges if e.signal == signal]

    def level_at(self, signal: str, t: float, initial: float = 0) -> float:
        """Level just after time ``t`` (edges at ``t`` included)."""
        level = initial
        for e in self.edges:
            if e.time_s > t:
                break
            if e.signal == signal:
                level = e.level
        return level

    def pulses(self, signal: str) -> list[tuple[float, float]]:
        """Closed (rise, fall) intervals of a digital signal."""
        out, rise = [], None
        for e in self.edges_for(signal):
            if e.level and rise is None:
                rise = e.time_s
            elif not e.level and rise is not None:
                out.append((rise, e.time_s))
                rise = None
        return out

    def select(self, *signals: str) -> "SignalTimeline":
        keep = set(signals)
        return SignalTimeline(tuple(e for e in self.edges if e.signal in keep), self.resolution_s)

    def merged(self, other: "SignalTimeline") -> "SignalTimeline":
        edges = sorted(self.edges + other.edges, key=lambda e: e.time_s)
        return SignalTimeline(tuple(edges), self.resolution_s or other.resolution_s)

    def is_quantized(self, tol: float = 1e-6) -> bool:
        """True when every edge time is an integer multiple of the resolution."""
        if not self.resolution_s:
            return False
        q = np.array([e.time_s for e in self.edges]) / self.resolution_s
        return bool(np.all(np.abs(q - np.round(q)) <= tol))

    def to_csv(self, fh=None) -> str | None:
        """Write ``time_s,signal,level`` rows; returns the text if no file given."""
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "signal", "level"])
        for e in self.edges:
            w.writerow([repr(e.time_s), e.signal, e.level])
        return None if fh is not None else buf.getvalue()

    def to_vcd(self, timescale_s: float = 1e-12) -> str:
        """Minimal VCD text for digital signals (time rounded to ``timescale_s``)."""
        names = self.signals
        ids = {n: chr(33 + i) if i < 94 else f"s{i}" for i, n in enumerate(names)}
        unit = {1e-12: "1ps", 1e-9: "1ns", 1e-15: "1fs"}.get(timescale_s, "1ps")
        lines = [f"$timescale {unit} $end", "$scope module pulsegen $end"]
        lines += [f"$var wire 1 {ids[n]} {n} $end" for n in names]
        lines += ["$upscope $end", "$enddefinitions $end", "#0", "$dumpvars"]
        lines += [f"0{ids[n]}" for n in names]
        lines.append("$end")
        last = 0
        for e in self.edges:
            t = int(round(e.time_s / timescale_s))
            if t != last:
                lines.append(f"#{t}")
                last = t
            lines.append(f"{1 if e.level else 0}{ids[e.signal]}")
        return "\n".join(lines) + "\n"


def _phase_name(i: int) -> str:
    return f"ph{i}"


def generate_phases(clk_freq_hz: float, duration_s: float) -> SignalTimeline:
    """Phase i rises at (i + 32k)/f and falls at (i + 16 + 32k)/f."""
    if clk_freq_hz <= 0:
        raise ValueError("clk_freq_hz must be > 0")
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    t_clk = 1.0 / clk_freq_hz
    n_ticks = int(np.floor(duration_s * clk_freq_hz + 1e-9))
    if n_ticks < N_PHASES:
        raise ValueError("duration shorter than one Johnson half-period")
    edges = []
    for tick in range(n_ticks):
        pos = tick % (2 * N_PHASES)
        if pos < N_PHASES:
            edges.append(Edge(tick * t_clk, _phase_name(pos), 1))
        else:
            edges.append(Edge(tick * t_clk, _phase_name(pos - N_PHASES), 0))
    return SignalTimeline(tuple(edges), t_clk)


class Combine(enum.Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class PulseSelectConfig:
    sel1: int
    sel2: int
    combine: Combine = Combine.AND
    leaf_index: int = 0

    def __post_init__(self):
        for s in (self.sel1, self.sel2):
            if not 0 <= s < N_PHASES:
                raise ValueError(f"phase select {s} outside 0..15")
        if not 0 <= self.leaf_index < 8:
            raise ValueError("leaf_index outside 0..7")
        object.__setattr__(self, "combine", Combine(self.combine))

    @property
    def name(self) -> str:
        return f"leaf{self.leaf_index}"


def _combine_signals(tl: SignalTimeline, a: str, b: str, op, out: str) -> list[Edge]:
    levels = {a: 0, b: 0}
    current = 0
    edges = []
    src = [e for e in tl.edges if e.signal in levels]
    i = 0
    while i < len(src):
        t = src[i].time_s
        while i < len(src) and src[i].time_s == t:
            levels[src[i].signal] = 1 if src[i].level else 0
            i += 1
        new = op(levels[a], levels[b])
        if new != current:
            edges.append(Edge(t, out, new))
            current = new
    return edges


def pulse_select(cfg: PulseSelectConfig, phases: SignalTimeline) -> SignalTimeline:
    """AND (narrow) or OR (widen) two Johnson phases in a leaf cell."""
    a, b = _phase_name(cfg.sel1), _phase_name(cfg.sel2)
    op = (lambda x, y: x & y) if cfg.combine is Combine.AND else (lambda x, y: x | y)
    return SignalTimeline(tuple(_combine_signals(phases, a, b, op, cfg.name)), phases.resolution_s)


# ------------------------------------------------------------ mode select


class LatchWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PassThrough:
    pass


@dataclass(frozen=True)
class SRLatch:
    set_source: str = "set"
    reset_source: str = "reset"


def _triggers(events, mode: SRLatch) -> list[tuple[float, str]]:
    if isinstance(events, SignalTimeline):
        out = []
        for sig, action in ((mode.set_source, "set"), (mode.reset_source, "reset")):
            prev = 0
            for e in events.edges_for(sig):
                if e.level and not prev:
                    out.append((e.time_s, action))
                prev = e.level
        return sorted(out, key=lambda x: x[0])
    return sorted(((float(t), str(a)) for t, a in events), key=lambda x: x[0])


def mode_select(mode, input: SignalTimeline, events=None, output: str = "pulse_out") -> SignalTimeline:
    """Pass the leaf output through, or latch it.

    In :class:`SRLatch` mode the output rises on each set trigger and falls on
    each reset trigger; input edges in between are ignored.  ``events`` is a
    timeline whose rising edges on ``set_source``/``reset_source`` trigger the
    latch, or a sequence of ``(time_s, "set"|"reset")``.  When omitted the
    sources are looked up in ``input``.
    """
    if isinstance(mode, PassThrough):
        return input
    if not isinstance(mode, SRLatch):
        raise TypeError(f"unknown mode {mode!r}")
    trig = _triggers(input if events is None else events, mode)
    q = 0
    edges = []
    for t, action in trig:
        if action == "set":
            if not q:
                edges.append(Edge(t, output, 1))
                q = 1
        elif action == "reset":
            if not edges:
                warnings.warn(f"reset at {t:.6g} s before any set; output held low", LatchWarning, stacklevel=2)
            elif q:
                edges.append(Edge(t, output, 0))
                q = 0
        else:
            raise ValueError(f"unknown latch action {action!r}")
    return SignalTimeline(tuple(edges), input.resolution_s)


def control_timeline(events: Iterable, node_table: dict[str, int], tick_s: float) -> SignalTimeline:
    """Render a control-event stream as one-tick pulses on named nodes.

    A node pulses high for one tick whenever its control line is set in an
    event's ``ctrl_bus``.
    """
    by_bit = {bit: name for name, bit in node_table.items()}
    edges = []
    for ev in events:
        t0 = ev.tick * tick_s
        for bit, name in by_bit.items():
            if ev.ctrl_bus >> bit & 1:
                edges.append(Edge(t0, name, 1))
                edges.append(Edge(t0 + tick_s, name, 0))
    edges.sort(key=lambda e: e.time_s)
    return SignalTimeline(tuple(edges), tick_s)


# ----------------------------------------------------------------- jitter


@dataclass(frozen=True)
class JitterModel:
    rms_s: float = 1.5e-12
    seed: int = 0

    def __post_init__(self):
        if self.rms_s < 0:
            raise ValueError("rms_s must be >= 0")


def apply_jitter(tl: SignalTimeline, jm: JitterModel) -> SignalTimeline:
    """Add i.i.d. Gaussian timing error to every edge, then stable re-sort."""
    if jm.rms_s == 0 or not tl.edges:
        return tl
    rng = np.random.default_rng(jm.seed)
    dt = rng.normal(0.0, jm.rms_s, len(tl.edges))
    moved = [Edge(e.time_s + d, e.signal, e.level) for e, d in zip(tl.edges, dt)]
    order = np.argsort([e.time_s for e in moved], kind="stable")
    return SignalTimeline(tuple(moved[i] for i in order), tl.resolution_s)
