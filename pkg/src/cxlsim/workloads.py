"""Characterization traffic generators.

Four generator families reproduce the classic memory characterization
suite at desk scale:

* latency_sweep - dependent pointer-chase over a randomized single-cycle
  permutation, one outstanding load, per-array-size mean load-to-use.
* stream - Copy/Scale/Add/Triad streaming kernels measured over a window
  after pre-warming the LLC to steady write-back state.
* rdwr_sweep - open-loop uniform-random 64B traffic at a given read
  fraction and injection rate; one fresh system per grid point.
* dlrm_proxy - gather-heavy concurrent random reads (embedding-lookup
  style queries) for the bridge congestion study.
* kv_proxy - mixed get/put stream with page locality used to compare the
  SSD-backed device against its DRAM-backed twin.

Every generator owns a seeded random.Random, so runs are deterministic
for a given (config, seed) pair.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .engine import TICKS_PER_NS
from .hdm import PAGE_BYTES, Policy
from .host import LINE_BYTES, MemCmd
from .system import System

TICKS_PER_S = TICKS_PER_NS * 1_000_000_000


@dataclass
class WorkloadResult:
    columns: List[str]
    rows: List[tuple]
    summary: dict
    system: System


def _derive_seed(seed: int, *parts) -> int:
    # crc32 keeps sub-seeds stable across processes (str hash() is not).
    value = seed & 0xFFFFFFFF
    for part in parts:
        value = (value * 1_000_003 + zlib.crc32(repr(part).encode())) & 0xFFFFFFFF
    return value


def build_chase_cycle(num_lines: int, rng: random.Random) -> Tuple[int, List[int]]:
    """Random single-cycle permutation over line indices.

    Returns (start_line, next_line) where following next_line visits every
    line exactly once before returning to start.
    """
    order = list(range(num_lines))
    rng.shuffle(order)
    nxt = [0] * num_lines
    for i in range(num_lines):
        nxt[order[i]] = order[(i + 1) % num_lines]
    return order[0], nxt


class _PagedRegion:
    """Maps a contiguous logical byte region onto placed physical pages."""

    def __init__(self, system: System, size: int, policy: Policy):
        pages = (size + PAGE_BYTES - 1) // PAGE_BYTES
        self.page_addrs = system.place_pages(pages, policy)
        self.size = size

    def addr(self, offset: int) -> int:
        return self.page_addrs[offset // PAGE_BYTES] + offset % PAGE_BYTES

    def line_addr(self, line: int) -> int:
        return self.addr(line * LINE_BYTES)


# -- latency sweep -------------------------------------------------------------


@dataclass
class LatencySweepSpec:
    array_sizes: Sequence[int]
    stride: int = LINE_BYTES
    samples: int = 3000
    placement: Policy = field(default_factory=lambda: Policy.bind(0))

    def validate(self) -> None:
        if self.stride < LINE_BYTES:
            raise ValueError("stride must be >= one cache line")
        if list(self.array_sizes) != sorted(self.array_sizes):
            raise ValueError("array sizes must be ascending")


def run_latency_sweep(system: System, spec: LatencySweepSpec) -> WorkloadResult:
    spec.validate()
    injector = system.injectors[0]
    engine = system.engine
    l3_capacity = system.host.hierarchy.levels[-1].config.capacity
    rows: List[tuple] = []

    for idx, size in enumerate(spec.array_sizes):
        region = _PagedRegion(system, size, spec.placement)
        lines = size // spec.stride
        rng = random.Random(_derive_seed(system.seed, "lat", idx))
        start, nxt = build_chase_cycle(lines, rng)
        stride_lines = spec.stride // LINE_BYTES

        # A footprint larger than the LLC misses on every chase step with
        # LRU (reuse distance exceeds the capacity), so warm-up only
        # matters for arrays that fit some cache level.
        warm_left = lines if size <= l3_capacity else 0
        samples = min(spec.samples, lines)
        state = {"line": start, "warm_left": warm_left,
                 "measure_left": samples, "lat_sum": 0, "t0": 0}

        def next_addr(state=state, region=region, nxt=nxt,
                      stride_lines=stride_lines) -> int:
            addr = region.line_addr(state["line"] * stride_lines)
            state["line"] = nxt[state["line"]]
            return addr

        def issue_next(state=state, next_addr=next_addr):
            if state["warm_left"] > 0:
                state["warm_left"] -= 1
                injector.issue(MemCmd.READ_REQ, next_addr(),
                               on_complete=lambda _p: issue_next())
            elif state["measure_left"] > 0:
                state["measure_left"] -= 1
                state["t0"] = engine.now
                injector.issue(MemCmd.READ_REQ, next_addr(),
                               on_complete=measured)

        def measured(_pkt, state=state, issue_next=issue_next):
            state["lat_sum"] += engine.now - state["t0"]
            issue_next()

        engine.schedule(0, issue_next)
        engine.run()
        mean_ns = (state["lat_sum"] / samples) / TICKS_PER_NS if samples else 0.0
        rows.append((size, round(mean_ns, 6)))

    summary = {
        "kind": "latency_sweep",
        "curve": [[int(s), m] for s, m in rows],
        "plateau_ns": rows[-1][1] if rows else 0.0,
    }
    return WorkloadResult(["array_bytes", "mean_load_to_use_ns"], rows,
                          summary, system)


# -- STREAM kernels -------------------------------------------------------------

STREAM_KERNELS = {
    # kernel: (reads per element group, writes per element group)
    "copy": (("a",), ("c",)),
    "scale": (("c",), ("b",)),
    "add": (("a", "b"), ("c",)),
    "triad": (("b", "c"), ("a",)),
}


@dataclass
class StreamSpec:
    kernel: str
    array_bytes: int = 64 * 1024 * 1024
    groups: int = 8000            # 64B line groups simulated (the window)
    warm_groups: int = 800
    injectors: int = 2
    mlp: int = 6
    placement: Policy = field(default_factory=lambda: Policy.bind(0))

    def validate(self, llc_capacity: int) -> None:
        if self.kernel not in STREAM_KERNELS:
            raise ValueError(f"unknown STREAM kernel {self.kernel!r}")
        if self.array_bytes < 8 * llc_capacity:
            raise ValueError("array_bytes must be at least 8x the LLC size")
        if self.warm_groups >= self.groups:
            raise ValueError("warm_groups must be below groups")


def stream_bytes_per_group(kernel: str) -> int:
    reads, writes = STREAM_KERNELS[kernel]
    return (len(reads) + len(writes)) * LINE_BYTES


def run_stream(system: System, spec: StreamSpec) -> WorkloadResult:
    hierarchy = system.host.hierarchy
    llc = hierarchy.levels[-1]
    spec.validate(llc.config.capacity)
    engine = system.engine
    reads, writes = STREAM_KERNELS[spec.kernel]
    arrays = {name: _PagedRegion(system, spec.array_bytes, spec.placement)
              for name in ("a", "b", "c")}

    # Pre-warm the LLC to the steady state a long-running kernel would
    # reach: full of streamed lines whose dirty fraction matches the
    # kernel's dirty-install fraction, so evictions during the measured
    # window produce write-backs at the steady rate.
    ghost = _PagedRegion(system, llc.config.capacity, spec.placement)
    installs_per_group = len(reads) + len(writes)
    ghost_lines = llc.config.capacity // LINE_BYTES
    for i in range(ghost_lines):
        dirty = (i % installs_per_group) < len(writes)
        hierarchy.warm_install(ghost.line_addr(i), dirty=dirty)

    ops_per_group = len(reads) + len(writes)
    total_ops = spec.groups * ops_per_group
    warm_ops = spec.warm_groups * ops_per_group
    progress = {"done": 0, "t0": 0, "t1": 0}

    def on_complete(_pkt):
        progress["done"] += 1
        if progress["done"] == warm_ops:
            progress["t0"] = engine.now
        if progress["done"] == total_ops:
            progress["t1"] = engine.now

    # Interleave groups across injectors so all streams advance together.
    def feed(inj_index: int):
        injector = system.injectors[inj_index]
        for group in range(inj_index, spec.groups, spec.injectors):
            for name in reads:
                injector.issue(MemCmd.READ_REQ, arrays[name].line_addr(group),
                               on_complete=on_complete)
            for name in writes:
                injector.issue(MemCmd.WRITE_REQ, arrays[name].line_addr(group),
                               on_complete=on_complete)

    for inj_index in range(spec.injectors):
        engine.schedule(0, lambda k=inj_index: feed(k))
    engine.run()

    measured_bytes = (spec.groups - spec.warm_groups) * stream_bytes_per_group(spec.kernel)
    elapsed = progress["t1"] - progress["t0"]
    bw = measured_bytes * TICKS_PER_S / elapsed if elapsed else 0.0
    summary = {"kind": "stream", "kernel": spec.kernel,
               "bytes_per_sec": bw,
               "read_byte_fraction": len(reads) / ops_per_group}
    return WorkloadResult(["kernel", "bytes_per_sec"],
                          [(spec.kernel, bw)], summary, system)


# -- Rd/Wr ratio sweep ----------------------------------------------------------


@dataclass
class RdWrSweepSpec:
    read_fractions: Sequence[float]
    rates_bytes_per_ns: Sequence[float] = (64.0,)
    footprint: int = 64 * 1024 * 1024
    ops: int = 6000
    warm_ops: int = 500
    injectors: int = 4
    lsq_depth: int = 32
    placement: Policy = field(default_factory=lambda: Policy.bind(0))

    def validate(self) -> None:
        for r in self.read_fractions:
            if not 0.0 <= r <= 1.0:
                raise ValueError("read fractions must lie in [0, 1]")
        if self.warm_ops >= self.ops:
            raise ValueError("warm_ops must be below ops")


def run_rdwr_sweep(factory: Callable[[], System],
                   spec: RdWrSweepSpec) -> WorkloadResult:
    """One fresh system per (read_fraction, rate) grid point."""
    spec.validate()
    rows: List[tuple] = []
    last_system: Optional[System] = None

    for r_idx, read_fraction in enumerate(spec.read_fractions):
        for rate in spec.rates_bytes_per_ns:
            system = factory()
            last_system = system
            bw, lat_ns = _run_rdwr_point(system, spec, read_fraction, rate,
                                         _derive_seed(system.seed, "rdwr", r_idx, rate))
            rows.append((read_fraction, rate, bw, lat_ns))

    peaks: Dict[float, float] = {}
    for read_fraction, _rate, bw, _lat in rows:
        peaks[read_fraction] = max(peaks.get(read_fraction, 0.0), bw)
    argmax_r = max(peaks, key=lambda r: (peaks[r], r))
    values = list(peaks.values())
    sensitivity = (max(values) - min(values)) / min(values) if min(values) else 0.0
    summary = {"kind": "rdwr_sweep",
               "peaks": [[r, peaks[r]] for r in sorted(peaks)],
               "argmax_read_fraction": argmax_r,
               "peak_bytes_per_sec": peaks[argmax_r],
               "sensitivity": sensitivity}
    return WorkloadResult(
        ["read_fraction", "rate_bytes_per_ns", "achieved_bytes_per_sec",
         "mean_latency_ns"], rows, summary, last_system)


def _run_rdwr_point(system: System, spec: RdWrSweepSpec, read_fraction: float,
                    rate: float, seed: int) -> Tuple[float, float]:
    engine = system.engine
    rng = random.Random(seed)
    region = _PagedRegion(system, spec.footprint, spec.placement)
    num_lines = spec.footprint // LINE_BYTES
    interval = max(1, round(LINE_BYTES * TICKS_PER_NS / rate))
    progress = {"done": 0, "t0": 0, "t1": 0, "lat_sum": 0}
    arrivals: Dict[int, int] = {}

    def on_complete(pkt):
        progress["done"] += 1
        if progress["done"] > spec.warm_ops:
            progress["lat_sum"] += engine.now - arrivals[pkt.id]
        if progress["done"] == spec.warm_ops:
            progress["t0"] = engine.now
        elif progress["done"] == spec.ops:
            progress["t1"] = engine.now

    def issue_op(k: int):
        injector = system.injectors[k % spec.injectors]
        cmd = MemCmd.READ_REQ if rng.random() < read_fraction else MemCmd.WRITE_REQ
        addr = region.line_addr(rng.randrange(num_lines))
        pkt_id = injector.issue(cmd, addr, cacheable=False,
                                on_complete=on_complete)
        arrivals[pkt_id] = engine.now

    for k in range(spec.ops):
        engine.schedule(k * interval, lambda k=k: issue_op(k))
    engine.run()

    measured = spec.ops - spec.warm_ops
    elapsed = progress["t1"] - progress["t0"]
    bw = measured * LINE_BYTES * TICKS_PER_S / elapsed if elapsed else 0.0
    lat_ns = progress["lat_sum"] / measured / TICKS_PER_NS if measured else 0.0
    return bw, round(lat_ns, 6)


# -- DLRM-style congestion proxy -----------------------------------------------


@dataclass
class DlrmProxySpec:
    injectors: int = 12
    queries_per_injector: int = 128
    lookups_per_query: int = 16
    footprint: int = 64 * 1024 * 1024
    lsq_depth: int = 8
    placement: Policy = field(default_factory=lambda: Policy.bind(0))


def run_dlrm_proxy(system: System, spec: DlrmProxySpec) -> WorkloadResult:
    engine = system.engine
    region = _PagedRegion(system, spec.footprint, spec.placement)
    num_lines = spec.footprint // LINE_BYTES
    finished = {"injectors": 0, "t_end": 0}

    def start_injector(k: int):
        injector = system.injectors[k]
        rng = random.Random(_derive_seed(system.seed, "dlrm", k))
        state = {"query": 0, "pending": 0}

        def next_query():
            if state["query"] == spec.queries_per_injector:
                finished["injectors"] += 1
                finished["t_end"] = engine.now
                return
            state["query"] += 1
            state["pending"] = spec.lookups_per_query
            for _ in range(spec.lookups_per_query):
                addr = region.line_addr(rng.randrange(num_lines))
                injector.issue(MemCmd.READ_REQ, addr, on_complete=gathered)

        def gathered(_pkt):
            state["pending"] -= 1
            if state["pending"] == 0:
                next_query()

        next_query()

    for k in range(spec.injectors):
        engine.schedule(0, lambda k=k: start_injector(k))
    engine.run()

    elapsed = finished["t_end"]
    total_queries = spec.injectors * spec.queries_per_injector
    agg_qps = total_queries * TICKS_PER_S / elapsed if elapsed else 0.0
    per_inj = agg_qps / spec.injectors
    summary = {"kind": "dlrm_proxy", "injectors": spec.injectors,
               "aggregateQps": agg_qps, "perInjectorQps": per_inj,
               "duration_ns": elapsed / TICKS_PER_NS}
    return WorkloadResult(["injectors", "aggregate_qps", "per_injector_qps"],
                          [(spec.injectors, agg_qps, per_inj)], summary, system)


# -- key-value get/put proxy for the SSD study -----------------------------------


@dataclass
class KvProxySpec:
    ops: int = 40000
    put_fraction: float = 0.5
    hot_fraction: float = 0.94
    hot_window_pages: int = 48
    footprint: int = 8 * 1024 * 1024
    lsq_depth: int = 8
    warm_ops: int = 2000


def run_kv_proxy(system: System, spec: KvProxySpec) -> WorkloadResult:
    """Mixed get/put random workload over an app-managed HDM region.

    Puts append sequentially (overwriting the footprint cyclically), gets
    favor recently written pages; ops overlap up to the LSQ depth.
    """
    engine = system.engine
    rng = random.Random(_derive_seed(system.seed, "kv"))
    base = system.am_alloc(pid=1, size=spec.footprint)
    total_lines = spec.footprint // LINE_BYTES
    lines_per_page = PAGE_BYTES // LINE_BYTES
    hot_lines = spec.hot_window_pages * lines_per_page

    progress = {"done": 0, "t0": 0, "t1": 0}

    def on_complete(_pkt):
        progress["done"] += 1
        if progress["done"] == spec.warm_ops:
            progress["t0"] = engine.now
        elif progress["done"] == spec.ops:
            progress["t1"] = engine.now

    frontier = 0
    injector = system.injectors[0]
    for _ in range(spec.ops):
        if rng.random() < spec.put_fraction:
            line = frontier % total_lines
            frontier += 1
            injector.issue(MemCmd.WRITE_REQ, base + line * LINE_BYTES,
                           cacheable=False, on_complete=on_complete)
        else:
            if rng.random() < spec.hot_fraction and frontier > 0:
                span = min(frontier, hot_lines)
                line = (frontier - 1 - rng.randrange(span)) % total_lines
            else:
                line = rng.randrange(total_lines)
            injector.issue(MemCmd.READ_REQ, base + line * LINE_BYTES,
                           cacheable=False, on_complete=on_complete)
    engine.run()

    measured = spec.ops - spec.warm_ops
    elapsed = progress["t1"] - progress["t0"]
    throughput = measured * TICKS_PER_S / elapsed if elapsed else 0.0
    summary = {"kind": "kv_proxy", "ops": spec.ops,
               "throughput_ops_per_sec": throughput}
    return WorkloadResult(["ops", "throughput_ops_per_sec"],
                          [(spec.ops, throughput)], summary, system)
