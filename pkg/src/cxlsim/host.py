"""Host side of the datapath: injectors, cache hierarchy, memory bus.

Synthetic cores ("injectors") issue 64B loads and stores through a shared
three-level set-associative write-back hierarchy (LRU within set,
write-allocate, MSHR-style miss coalescing).  Below the last level a
memory bus routes packets by physical address range either to local DRAM
or to the CXL bridge.

Latency budget: a request that misses every level pays the per-level
lookup latencies plus a residual bus latency, and the sum of those host
charges equals the configured host_path_lat.  host_path_lat is the single
calibration constant for the host side: the dependent-load plateau on
local memory is host_path_lat + the local medium's idle service time.
Uncacheable requests (non-temporal style traffic used by the open-loop
bandwidth sweeps) pay the same host_path_lat as a lump sum, so both paths
see identical end-to-end timing for a full miss.

The hierarchy is timing-only; functional byte storage lives in the memory
devices and is exercised through uncacheable or device-level accesses.
"""

from __future__ import annotations

import itertools
from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .engine import Engine

LINE_BYTES = 64


class MemCmd(Enum):
    READ_REQ = "ReadReq"
    WRITE_REQ = "WriteReq"
    READ_RESP = "ReadResp"
    WRITE_RESP = "WriteResp"


RESPONSE_FOR = {MemCmd.READ_REQ: MemCmd.READ_RESP,
                MemCmd.WRITE_REQ: MemCmd.WRITE_RESP}


class Target(Enum):
    LOCAL_DRAM = "LocalDRAM"
    BRIDGE = "Bridge"


class SimFault(RuntimeError):
    """Protocol or device fault that aborts the simulation."""


class AddressFault(SimFault):
    """Issued address falls outside every configured range."""


@dataclass
class MemPacket:
    id: int
    cmd: MemCmd
    addr: int
    size: int = LINE_BYTES
    issue_tick: int = 0
    origin: int = -1
    cacheable: bool = True
    writeback: bool = False
    data: Optional[bytes] = None

    def __post_init__(self):
        if self.size <= 0 or self.size > LINE_BYTES or (self.size & (self.size - 1)):
            raise ValueError(f"size must be a power of two <= {LINE_BYTES}")
        if self.addr % self.size:
            raise ValueError(f"addr {self.addr:#x} not aligned to size {self.size}")

    def make_response(self, data: Optional[bytes] = None) -> "MemPacket":
        return MemPacket(id=self.id, cmd=RESPONSE_FOR[self.cmd], addr=self.addr,
                         size=self.size, issue_tick=self.issue_tick,
                         origin=self.origin, cacheable=self.cacheable,
                         writeback=self.writeback, data=data)


@dataclass(frozen=True)
class AddressRange:
    base: int
    limit: int          # exclusive
    target: Target
    device: Optional[object] = None

    def __contains__(self, addr: int) -> bool:
        return self.base <= addr < self.limit


class AddressMap:
    """Non-overlapping physical ranges routed to LocalDRAM or the bridge."""

    def __init__(self):
        self.ranges: List[AddressRange] = []

    def add_range(self, base: int, limit: int, target: Target,
                  device: Optional[object] = None) -> AddressRange:
        if limit <= base:
            raise ValueError("empty address range")
        for r in self.ranges:
            if base < r.limit and r.base < limit:
                raise ValueError(
                    f"range [{base:#x}, {limit:#x}) overlaps [{r.base:#x}, {r.limit:#x})")
        rng = AddressRange(base, limit, target, device)
        self.ranges.append(rng)
        self.ranges.sort(key=lambda r: r.base)
        return rng

    def lookup(self, addr: int) -> AddressRange:
        for r in self.ranges:
            if addr in r:
                return r
        raise AddressFault(f"address {addr:#x} is unmapped")

    def top(self) -> int:
        return max((r.limit for r in self.ranges), default=0)

    def allocate_above(self, size: int) -> int:
        """Next size-aligned base above all existing ranges."""
        top = self.top()
        base = (top + size - 1) // size * size
        if base + size > 1 << 64:
            raise AddressFault("insufficient host physical address space")
        return base


@dataclass
class CacheLevelConfig:
    capacity: int
    associativity: int
    hit_latency: int                 # ticks
    line: int = LINE_BYTES

    def validate(self) -> None:
        if self.capacity % (self.associativity * self.line):
            raise ValueError("capacity must divide into associativity x line")
        if self.hit_latency <= 0:
            raise ValueError("hit_latency must be > 0")


class Cache:
    """One set-associative level; LRU replacement within each set."""

    def __init__(self, name: str, config: CacheLevelConfig, stats=None):
        config.validate()
        self.name = name
        self.config = config
        self.num_sets = config.capacity // (config.associativity * config.line)
        self.ways = config.associativity
        self._sets: List[OrderedDict] = [OrderedDict() for _ in range(self.num_sets)]
        if stats is not None:
            self.lookups = stats.counter(f"{name}.lookups")
            self.hits = stats.counter(f"{name}.hits")
            self.misses = stats.counter(f"{name}.misses")
        else:
            self.lookups = self.hits = self.misses = None

    def _locate(self, line: int) -> Tuple[OrderedDict, int]:
        return self._sets[line % self.num_sets], line // self.num_sets

    def touch(self, line: int) -> bool:
        """Lookup; refreshes LRU order on a hit."""
        cset, tag = self._locate(line)
        if self.lookups is not None:
            self.lookups.inc()
        if tag in cset:
            cset.move_to_end(tag)
            if self.hits is not None:
                self.hits.inc()
            return True
        if self.misses is not None:
            self.misses.inc()
        return False

    def contains(self, line: int) -> bool:
        cset, tag = self._locate(line)
        return tag in cset

    def mark_dirty(self, line: int) -> None:
        cset, tag = self._locate(line)
        cset[tag] = True
        cset.move_to_end(tag)

    def install(self, line: int, dirty: bool = False):
        """Insert a line; returns (victim_line, victim_dirty) when one is
        evicted, else None.  Installing a present line refreshes LRU."""
        cset, tag = self._locate(line)
        if tag in cset:
            if dirty:
                cset[tag] = True
            cset.move_to_end(tag)
            return None
        victim = None
        if len(cset) >= self.ways:
            vtag, vdirty = cset.popitem(last=False)
            victim = (vtag * self.num_sets + line % self.num_sets, vdirty)
        cset[tag] = dirty
        return victim


class MemBus:
    """Routes packets by address range; charges the caller-chosen latency."""

    def __init__(self, engine: Engine, addr_map: AddressMap, stats=None):
        self.engine = engine
        self.addr_map = addr_map
        self.targets: Dict[Target, object] = {}
        if stats is not None:
            self.to_local = stats.counter("membus.toLocal")
            self.to_bridge = stats.counter("membus.toBridge")
        else:
            self.to_local = self.to_bridge = None

    def attach(self, target: Target, port) -> None:
        self.targets[target] = port

    def route(self, pkt: MemPacket) -> AddressRange:
        return self.addr_map.lookup(pkt.addr)

    def send(self, pkt: MemPacket, lat: int,
             on_response: Callable[[MemPacket], None]) -> None:
        rng = self.route(pkt)
        counter = self.to_bridge if rng.target is Target.BRIDGE else self.to_local
        if counter is not None:
            counter.inc()
        port = self.targets[rng.target]
        self.engine.schedule(lat, lambda: port.receive(pkt, on_response))


class LocalMemory:
    """Local DRAM controller: one medium instance behind the bus."""

    def __init__(self, engine: Engine, medium):
        self.engine = engine
        self.medium = medium

    def receive(self, pkt: MemPacket, on_response) -> None:
        kind = "read" if pkt.cmd is MemCmd.READ_REQ else "write"
        self.medium.submit(kind, lambda: on_response(pkt.make_response()))


class CacheHierarchy:
    """Shared L1/L2/L3 with a single MSHR table below the last level."""

    def __init__(self, engine: Engine, levels: List[Cache], membus: MemBus,
                 membus_lat: int, stats=None):
        self.engine = engine
        self.levels = levels
        self.membus = membus
        self.membus_lat = membus_lat
        self._mshrs: Dict[int, list] = {}
        self._pkt_ids = itertools.count(1 << 48)  # fill/writeback id space
        self._wb_outstanding = stats.gauge("membus.writebacksInFlight") if stats else None
        self._miss_lat = stats.histogram("l3.overallAvgMissLat") if stats else None
        self._mshr_merges = stats.counter("l3.mshrMerges") if stats else None

    def access(self, pkt: MemPacket, on_complete: Callable[[MemPacket], None]) -> None:
        self._lookup(0, pkt, on_complete)

    def _lookup(self, idx: int, pkt, on_complete) -> None:
        level = self.levels[idx]

        def after_lookup():
            line = pkt.addr // LINE_BYTES
            if level.touch(line):
                if pkt.cmd is MemCmd.WRITE_REQ:
                    level.mark_dirty(line)
                if idx > 0:
                    self._promote(idx - 1, line)
                on_complete(pkt)
            elif idx + 1 < len(self.levels):
                self._lookup(idx + 1, pkt, on_complete)
            else:
                self._miss(pkt, on_complete)

        self.engine.schedule(level.config.hit_latency, after_lookup)

    def _promote(self, upto: int, line: int) -> None:
        for k in range(upto, -1, -1):
            victim = self.levels[k].install(line)
            if victim is not None and victim[1]:
                self._demote(k + 1, victim[0])

    def _demote(self, idx: int, line: int) -> None:
        """Push a dirty victim down; past the last level it becomes a
        write-back packet to memory."""
        while idx < len(self.levels):
            level = self.levels[idx]
            if level.contains(line):
                level.mark_dirty(line)
                return
            victim = level.install(line, dirty=True)
            if victim is None or not victim[1]:
                return
            line = victim[0]
            idx += 1
        self._issue_writeback(line)

    def _issue_writeback(self, line: int) -> None:
        wb = MemPacket(id=next(self._pkt_ids), cmd=MemCmd.WRITE_REQ,
                       addr=line * LINE_BYTES, issue_tick=self.engine.now,
                       cacheable=False, writeback=True)
        if self._wb_outstanding is not None:
            self._wb_outstanding.add(1)

        def done(_resp):
            if self._wb_outstanding is not None:
                self._wb_outstanding.add(-1)

        self.membus.send(wb, self.membus_lat, done)

    def _miss(self, pkt, on_complete) -> None:
        line = pkt.addr // LINE_BYTES
        if line in self._mshrs:
            if self._mshr_merges is not None:
                self._mshr_merges.inc()
            self._mshrs[line].append((pkt, on_complete))
            return
        self._mshrs[line] = [(pkt, on_complete)]
        miss_tick = self.engine.now
        fetch = MemPacket(id=next(self._pkt_ids), cmd=MemCmd.READ_REQ,
                          addr=line * LINE_BYTES, issue_tick=miss_tick,
                          cacheable=True)
        self.membus.send(fetch, self.membus_lat,
                         lambda resp: self._fill(line, miss_tick))

    def _fill(self, line: int, miss_tick: int) -> None:
        if self._miss_lat is not None:
            self._miss_lat.record(self.engine.now - miss_tick)
        self._promote(len(self.levels) - 1, line)
        waiters = self._mshrs.pop(line)
        for pkt, on_complete in waiters:
            if pkt.cmd is MemCmd.WRITE_REQ:
                self.levels[0].mark_dirty(line)
            on_complete(pkt)

    def warm_install(self, addr: int, dirty: bool = False,
                     level: int = -1) -> None:
        """Directly pre-populate one level (default: last); used to reach
        steady cache state without simulating the fill traffic."""
        self.levels[level].install(addr // LINE_BYTES, dirty=dirty)


@dataclass
class InjectorConfig:
    count: int = 1
    lsq_depth: int = 8
    think_time: int = 0   # ticks between dispatches from the pending queue

    def validate(self) -> None:
        if self.lsq_depth < 1:
            raise ValueError("lsq_depth must be >= 1")
        if self.count < 1:
            raise ValueError("injector count must be >= 1")


class Injector:
    """Synthetic core with a bounded load/store queue.

    Issues beyond the LSQ depth queue up and count as lsqFullEvents; a
    slot is released when the matching response returns (cached stores
    complete on fill, uncacheable stores on the target's acknowledgment).
    """

    def __init__(self, engine: Engine, inj_id: int, config: InjectorConfig,
                 dispatch, load_to_use=None, lsq_full=None, outstanding=None,
                 ticks_per_cycle: float = 400.0):
        self.engine = engine
        self.id = inj_id
        self.config = config
        self._dispatch = dispatch
        self._in_flight = 0
        self._pending: deque = deque()
        self._load_to_use = load_to_use
        self._lsq_full = lsq_full
        self._outstanding = outstanding
        self._ticks_per_cycle = ticks_per_cycle
        self._ids = itertools.count(inj_id << 32)

    @property
    def in_flight(self) -> int:
        return self._in_flight

    def issue(self, cmd: MemCmd, addr: int, size: int = LINE_BYTES,
              cacheable: bool = True, on_complete=None,
              data: Optional[bytes] = None) -> int:
        pkt = MemPacket(id=next(self._ids), cmd=cmd, addr=addr, size=size,
                        origin=self.id, cacheable=cacheable, data=data)
        if self._in_flight < self.config.lsq_depth and not self._pending:
            self._start(pkt, on_complete)
        else:
            if self._lsq_full is not None:
                self._lsq_full.inc()
            self._pending.append((pkt, on_complete))
        return pkt.id

    def _start(self, pkt: MemPacket, on_complete) -> None:
        self._in_flight += 1
        if self._outstanding is not None:
            self._outstanding.add(1)
        pkt.issue_tick = self.engine.now
        self._dispatch(pkt, lambda done_pkt: self._finish(done_pkt, on_complete))

    def _finish(self, pkt: MemPacket, on_complete) -> None:
        self._in_flight -= 1
        if self._outstanding is not None:
            self._outstanding.add(-1)
        if pkt.cmd is MemCmd.READ_REQ and self._load_to_use is not None:
            self._load_to_use.record(
                (self.engine.now - pkt.issue_tick) / self._ticks_per_cycle)
        if self._pending and self._in_flight < self.config.lsq_depth:
            nxt, cb = self._pending.popleft()
            if self.config.think_time:
                self.engine.schedule(self.config.think_time,
                                     lambda: self._start(nxt, cb))
            else:
                self._start(nxt, cb)
        if on_complete is not None:
            on_complete(pkt)


class HostPath:
    """Assembled host: injectors feeding caches (or the uncacheable fast
    path) into the memory bus."""

    def __init__(self, engine: Engine, caches: List[Cache], membus: MemBus,
                 injector_config: InjectorConfig, host_path_lat: int,
                 stats=None, ticks_per_cycle: float = 400.0):
        lookup_sum = sum(c.config.hit_latency for c in caches)
        if host_path_lat < lookup_sum:
            raise ValueError(
                f"host_path_lat {host_path_lat} is smaller than the summed "
                f"cache lookup latencies {lookup_sum}")
        self.engine = engine
        self.membus = membus
        self.host_path_lat = host_path_lat
        membus_lat = host_path_lat - lookup_sum
        self.hierarchy = CacheHierarchy(engine, caches, membus, membus_lat, stats)
        if stats is not None:
            load_to_use = stats.histogram(
                "core.loadToUse", edges=(0, 10, 100, 1000, 10000, 100000))
            lsq_full = stats.counter("core.lsqFullEvents")
            outstanding = stats.gauge("core.outstandingRequests")
        else:
            load_to_use = lsq_full = outstanding = None
        self.injectors = [
            Injector(engine, i, injector_config, self._dispatch,
                     load_to_use, lsq_full, outstanding, ticks_per_cycle)
            for i in range(injector_config.count)
        ]

    def _dispatch(self, pkt: MemPacket, on_complete) -> None:
        self.membus.route(pkt)  # fault early on unmapped addresses
        if pkt.cacheable:
            self.hierarchy.access(pkt, on_complete)
        else:
            def responded(resp: MemPacket):
                if resp.cmd is MemCmd.READ_RESP:
                    pkt.data = resp.data
                on_complete(pkt)

            self.membus.send(pkt, self.host_path_lat, responded)
