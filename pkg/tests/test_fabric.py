import pytest
from hypothesis import given, strategies as st

from gustl.codegen import compile_source
from gustl.fabric import HARNESS, PIN, Fabric, RunConfig, load_store, run
from gustl.bytecode import encode_image


def drive(fabric, root, dimension=0, inputs=()):
    """Run turn by turn, checking the token balance after every turn."""
    fabric.start(root, dimension, inputs)
    assert fabric.token_balance() == 0
    clock = fabric.clock
    while fabric.advance():
        assert fabric.token_balance() == 0
        assert fabric.clock >= clock
        clock = fabric.clock
    return fabric.report()


@given(st.integers(0, 2**32))
def test_same_seed_same_run(store, seed):
    cfg = RunConfig(seed=seed, trace=True)
    a = run(store, "ping", config=cfg)
    b = run(store, "ping", config=cfg)
    assert a.trace == b.trace
    assert a.summary() == b.summary()
    assert a.output_words() == [110]


@pytest.mark.parametrize("root", ["ping", "boss", "pinned", "coin", "timer", "waitboth"])
def test_conservation_every_turn(store, root):
    report = drive(Fabric(store, RunConfig(seed=3)), root, dimension=50)
    s = report.stats
    assert s["sent"] == s["consumed"] + s["queued"] + s["discarded"]


def test_ping_pong_token_counts(store):
    report = drive(Fabric(store, RunConfig(seed=1, trace=True)), "ping")
    sends = [ln for ln in report.trace if " send " in ln]
    ends = [ln for ln in sends if ln.endswith(" end")]
    assert len(sends) == 22 and len(ends) == 2
    assert report.outcome == "finished" and report.exit_code == 0


def test_clock_one_tick_per_instruction(store):
    report = run(store, "ping", config=RunConfig(seed=5))
    assert report.clock == report.steps


def test_deadlock_report(store):
    fabric = Fabric(store)
    report = drive(fabric, "waitboth")
    assert report.outcome == "deadlock" and report.exit_code == 3
    live = fabric.live_units()
    assert len(live) == 2 and all(u.status == "stalled" for u in live)
    assert fabric.queued() == 0


def test_stuck_when_tokens_wait_for_nobody():
    image = compile_source("process p(c) state s, f start next s on s \\ c ? end: next f stop")
    report = drive(Fabric({"main": image}), "main", inputs=[5])
    assert report.outcome == "stuck" and report.exit_code == 3
    assert report.stats["queued"] == 1


def test_missing_root():
    report = run({}, "nothing")
    assert report.outcome == "no-root" and report.processes == [] and report.exit_code == 2


def test_step_limit(store):
    report = run(store, "coin", 0, RunConfig(max_steps=500))
    assert report.outcome == "step-limit" and report.exit_code == 5 and report.steps == 500


SINK = compile_source('const n[] = "hole" process p(c, k) port h word i start h := new(n, 0, 0) '
                      "i := 0 repeat k times h ! i i := i + 1 done stop")
HOLE = compile_source("process hole(c) state s, f start next s on s \\ c ? end: next f stop")


@pytest.mark.parametrize("capacity", [1, 3, 8])
def test_full_channel_blocks_sender(capacity):
    fabric = Fabric({"main": SINK, "hole": HOLE}, RunConfig(capacity=capacity))
    report = drive(fabric, "main", dimension=20)
    assert report.outcome == "stuck"
    assert fabric.queued() == capacity
    assert fabric.units[0].status == "stalled"


def test_tokens_left_behind_are_discarded():
    napper = compile_source("process hole(c) state s, f start next s on s \\ after 200: next f stop")
    report = drive(Fabric({"main": SINK, "hole": napper}), "main", dimension=3)
    assert report.outcome == "finished"
    assert report.stats["discarded"] == 3 and report.stats["consumed"] == 0


class TestSpawn:
    def setup_method(self):
        self.image = compile_source("process w(c) port a, b start stop")
        self.fabric = Fabric({"w": self.image}, RunConfig(units=4))

    def test_unknown_name(self):
        assert self.fabric.spawn("zz", 0, 0) == 0

    def test_name_as_code_points(self):
        assert self.fabric.spawn([ord("w")], 0, 0) != 0

    def test_pinned(self):
        assert self.fabric.spawn("w", 0, PIN | 2) != 0
        assert self.fabric.units[2] is not None
        assert self.fabric.spawn("w", 0, PIN | 2) == 0
        assert self.fabric.spawn("w", 0, PIN | 9) == 0

    def test_reserved_bits(self):
        assert self.fabric.spawn("w", 0, 0x10000) == 0
        assert self.fabric.spawn("w", 0, 1 << 30) == 0

    def test_pool_exhausted(self):
        ids = [self.fabric.spawn("w", 0, 0) for _ in range(4)]
        assert all(ids) and self.fabric.spawn("w", 0, 0) == 0

    def test_memory_cap(self):
        big = compile_source("process w(c, d) word a[d] start stop")
        fabric = Fabric({"w": big}, RunConfig(max_data_words=100))
        assert fabric.spawn("w", 101, 0) == 0
        assert fabric.spawn("w", 100, 0) != 0

    def test_port_ids_contiguous_and_fresh(self):
        first = self.fabric.spawn("w", 0, 0)
        second = self.fabric.spawn("w", 0, 0)
        assert first > HARNESS and second == first + 3
        unit = self.fabric.units[0]
        assert [p.gid for p in unit.ports] == [first, first + 1, first + 2]
        assert unit.ports[0].dest == HARNESS
        child = self.fabric.units[1]
        assert child.ports[0].dest == HARNESS
        self.fabric._retire(unit)
        third = self.fabric.spawn("w", 0, 0)
        assert third == second + 3

    def test_control_port_directed_at_creator(self):
        self.fabric.spawn("w", 0, 0)
        parent = self.fabric.units[0]
        gid = self.fabric.spawn("w", 0, 0, creator=parent)
        child = self.fabric.directory[gid][0]
        assert child.ports[0].dest == parent.ports[0].gid


def test_pause_tokens_are_dropped_and_counted():
    image = compile_source("process p(c) start c ! pause c ! 1 c ! pause stop")
    report = run({"main": image}, "main")
    assert report.stats["paused"] == 2 and report.output_words() == [1]


def test_idle_round_jumps_clock():
    image = compile_source("process p(c) state s, f start next s on s \\ after 1000: next f stop")
    report = run({"main": image}, "main")
    assert report.clock > 1000 > report.steps


def test_trace_sink_streams_lines(store):
    lines = []
    fabric = Fabric(store, RunConfig(trace=True), sink=lines.append)
    report = fabric.run("timer")
    assert lines == report.trace and lines


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# settings\nseed = 9\nmax-steps=0x100\ntrace = yes\n")
    cfg = RunConfig.from_file(path)
    assert (cfg.seed, cfg.max_steps, cfg.trace, cfg.units) == (9, 256, True, 16)
    path.write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        RunConfig.from_file(path)


def test_load_store(tmp_path, store):
    (tmp_path / "ping.gsx").write_bytes(encode_image(store["ping"]))
    (tmp_path / "notes.txt").write_text("ignored")
    assert load_store(tmp_path) == {"ping": store["ping"]}
