"""Deterministic simulation of a pool of message-passing processing units.

Scheduling is round-robin over occupied units in index order; each turn a
live unit executes one instruction (a blocked send or an unready guard
table is simply retried).  The clock advances by one tick per executed
instruction.  When a whole round makes no progress the clock jumps to the
earliest pending ``after`` deadline; if there is none the run ends as a
deadlock (no tokens waiting anywhere) or as stuck (tokens waiting that no
unit will take).

Port ids
    Global port ids are handed out in increasing order and never reused.
    A process gets a contiguous block: its control port first, then its
    declared ports in order.  Id 1 is the harness, which collects whatever
    is sent to it.

Control ports
    A new process's control port is initially directed at its creator's
    control port, and the root's at the harness.

``extra`` argument of ``new``
    Bit 31 pins the process to the unit whose index is in bits 0..15; all
    other bits must be clear.  Without the pin flag the lowest idle unit is
    used.
"""

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import runtime
from .bytecode import LOCAL_SPACE, FormatError, decode_image
from .runtime import DATA, END, HALTED, PAUSE, RUNNING, STALLED, TRAPPED, Trap, Unit

HARNESS = 1
PIN = 0x80000000
UNIT_MASK = 0xFFFF

OUTCOME_EXIT = {"finished": 0, "deadlock": 3, "stuck": 3, "step-limit": 5, "no-root": 2}


@dataclass
class RunConfig:
    units: int = 16
    capacity: int = 8
    seed: int = 0
    max_steps: int = 1_000_000
    trace: bool = False
    max_call_depth: int = 1024
    max_data_words: int = 1 << 22

    @classmethod
    def from_file(cls, path):
        """Read ``key = value`` lines; ``#`` starts a comment."""
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in cls.__dataclass_fields__:
                raise ValueError(f"{path}:{lineno}: bad setting {raw!r}")
            value = value.strip()
            if key == "trace":
                setattr(cfg, key, value.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(cfg, key, int(value, 0))
        return cfg


@dataclass
class ProcessRecord:
    pid: int
    name: str
    unit: int
    dimension: int
    control: int
    status: str = RUNNING
    trap: Optional[str] = None


@dataclass
class RunReport:
    outcome: str
    steps: int
    clock: int
    processes: list
    output: list
    trace: list
    stats: dict = field(default_factory=dict)

    @property
    def traps(self):
        return [p for p in self.processes if p.status == TRAPPED]

    @property
    def exit_code(self):
        if self.traps:
            return 4
        return OUTCOME_EXIT[self.outcome]

    def output_words(self):
        return [t.value for t in self.output if t.kind == DATA]

    def summary(self):
        lines = [f"outcome: {self.outcome}", f"steps: {self.steps}", f"clock: {self.clock}"]
        for p in self.processes:
            extra = f" ({p.trap})" if p.trap else ""
            lines.append(f"process {p.pid} {p.name} unit {p.unit} dim {p.dimension}: "
                         f"{p.status}{extra}")
        lines.append("output: " + " ".join(str(t) for t in self.output))
        return "\n".join(lines)


def load_store(directory):
    """Map file stem to image for every ``.gsx`` file in a directory."""
    store = {}
    for path in sorted(Path(directory).glob("*.gsx")):
        try:
            store[path.stem] = decode_image(path.read_bytes())
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return store


class Fabric:
    def __init__(self, store, config: RunConfig = None, sink=None):
        self.store = dict(store)
        self.sink = sink  # called with each trace line as it is produced
        self.config = config or RunConfig()
        self.rng = random.Random(self.config.seed)
        self.units = [None] * self.config.units
        self.queues = {}
        self.directory = {}  # gid -> (unit, local port)
        self.next_gid = HARNESS + 1
        self.clock = 0
        self.steps = 0
        self.output = []
        self.trace = []
        self.processes = []
        self.sent = 0
        self.consumed_count = 0
        self.discarded = 0
        self.paused = 0
        self.outcome = None
        self._round = deque()
        self._progress = False
        self._rounds = 0

    # ------------------------------------------------------------ tracing
    def note(self, unit, event, detail=""):
        if not self.config.trace:
            return
        who = f"u{unit.index} p{unit.pid}" if unit is not None else "fabric"
        line = f"{self.steps:07d} t={self.clock} {who} {event} {detail}".rstrip()
        self.trace.append(line)
        if self.sink is not None:
            self.sink(line)

    # ---------------------------------------------------- runtime services
    def incoming(self, unit, port):
        return self.queues[unit.ports[port].gid]

    def consumed(self, unit, port, token):
        self.consumed_count += 1
        self.note(unit, "recv", f"port={unit.ports[port].gid} {token}")

    def can_transmit(self, unit, port):
        dest = unit.ports[port].dest
        if dest == HARNESS:
            return True
        return dest in self.directory and len(self.queues[dest]) < self.config.capacity

    def transmit(self, unit, port, token):
        dest = unit.ports[port].dest
        src = unit.ports[port].gid
        if dest == 0:
            raise Trap(f"port {port} has no destination")
        if token.kind == PAUSE:
            if dest != HARNESS and dest not in self.directory:
                raise Trap(f"dangling destination {dest}")
            self.paused += 1
            self.note(unit, "pause", f"{src}->{dest}")
            return True
        if dest == HARNESS:
            self.sent += 1
            self.consumed_count += 1
            self.output.append(token)
            self.note(unit, "out", str(token))
            return True
        if dest not in self.directory:
            raise Trap(f"dangling destination {dest}")
        q = self.queues[dest]
        if len(q) >= self.config.capacity:
            return False
        q.append(token)
        self.sent += 1
        self.note(unit, "send", f"{src}->{dest} {token}")
        return True

    def choose(self, n):
        return self.rng.randrange(n)

    def spawn(self, name, dimension, extra, creator=None):
        """Start a process; returns its control port id or 0 on failure."""
        if not isinstance(name, str):
            try:
                name = "".join(chr(c) for c in name)
            except (ValueError, OverflowError):
                return 0
        image = self.store.get(name)
        if image is None:
            return 0
        if extra & ~(PIN | UNIT_MASK):
            return 0
        if extra & PIN:
            index = extra & UNIT_MASK
            if index >= len(self.units) or self.units[index] is not None:
                return 0
        else:
            idle = [i for i, u in enumerate(self.units) if u is None]
            if not idle:
                return 0
            index = idle[0]
        if image.data_size(dimension) > min(self.config.max_data_words, LOCAL_SPACE):
            return 0

        nports = runtime.port_count(image)
        base = self.next_gid
        self.next_gid += nports
        pid = len(self.processes)
        unit = Unit(image, dimension, name=name, index=index, pid=pid,
                    max_scratch=self.config.max_data_words,
                    max_depth=self.config.max_call_depth)
        unit.ports = [runtime.Port(base + k) for k in range(nports)]
        unit.ports[0].dest = creator.ports[0].gid if creator is not None else HARNESS
        for k, p in enumerate(unit.ports):
            self.queues[p.gid] = deque()
            self.directory[p.gid] = (unit, k)
        self.units[index] = unit
        self.processes.append(ProcessRecord(pid, name, index, dimension, base))
        self.note(unit, "spawn", f"{name} dim={dimension} ports={base}..{base + nports - 1}")
        return base

    def _retire(self, unit):
        for p in unit.ports:
            self.discarded += len(self.queues.pop(p.gid))
            del self.directory[p.gid]
        self.units[unit.index] = None

    # -------------------------------------------------------- bookkeeping
    def queued(self):
        return sum(len(q) for q in self.queues.values())

    def token_balance(self):
        """sent - consumed - queued - discarded; zero at all times."""
        return self.sent - self.consumed_count - self.queued() - self.discarded

    def live_units(self):
        return [u for u in self.units if u is not None and u.status in (RUNNING, STALLED)]

    # ---------------------------------------------------------- scheduler
    def start(self, root, dimension=0, inputs=()):
        gid = self.spawn(root, dimension, 0)
        if gid == 0:
            self.outcome = "no-root"
            return
        for w in inputs:
            self.queues[gid].append(runtime.data(w))
            self.sent += 1

    def advance(self) -> bool:
        """Give one unit one turn.  Returns False once the run is over."""
        if self.outcome is not None:
            return False
        if not self._round:
            if self._rounds and self._round_done_without_progress():
                return self.outcome is None
            live = self.live_units()
            if not live:
                self.outcome = "finished"
                return False
            self._round = deque(live)
            self._progress = False
            self._rounds += 1
        unit = self._round.popleft()
        if unit.status not in (RUNNING, STALLED):
            return True
        was = unit.status
        status = runtime.step(unit, self)
        if status == STALLED:
            if was != STALLED:
                self.note(unit, "stall", f"pc={unit.pc:04x}")
            return True
        self._progress = True
        if status == HALTED:
            self.note(unit, "halt")
            self.processes[unit.pid].status = HALTED
            self._retire(unit)
        elif status == TRAPPED:
            rec = self.processes[unit.pid]
            rec.status, rec.trap = TRAPPED, unit.trap
        self.steps += 1
        self.clock += 1
        if self.steps >= self.config.max_steps:
            self.outcome = "step-limit"
            self.note(None, "limit")
            return False
        return True

    def _round_done_without_progress(self):
        """Handle the end of a round; True if the round made no progress."""
        if self._progress:
            return False
        live = self.live_units()
        if not live:
            return False
        pending = [u.deadline for u in live
                   if u.deadline is not None and u.deadline > self.clock]
        if pending:
            self.clock = min(pending)
            self.note(None, "idle", f"clock -> {self.clock}")
            self._progress = True
            return True
        waiting = any(self.queues[p.gid] for u in live for p in u.ports)
        self.outcome = "stuck" if waiting else "deadlock"
        self.note(None, self.outcome)
        return True

    def report(self) -> RunReport:
        for p in self.processes:
            u = self.units[p.unit]
            if p.status == RUNNING and u is not None and u.pid == p.pid:
                p.status = u.status
        return RunReport(
            outcome=self.outcome or "finished", steps=self.steps, clock=self.clock,
            processes=self.processes, output=self.output, trace=self.trace,
            stats={"sent": self.sent, "consumed": self.consumed_count,
                   "queued": self.queued(), "discarded": self.discarded,
                   "paused": self.paused},
        )

    def run(self, root, dimension=0, inputs=()) -> RunReport:
        self.start(root, dimension, inputs)
        while self.advance():
            pass
        return self.report()


def run(store, root, dimension=0, config=None, inputs=()) -> RunReport:
    """Run ``root`` from an image store to completion."""
    return Fabric(store, config).run(root, dimension, inputs)
