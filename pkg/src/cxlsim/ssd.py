"""Flash-backed medium with an interposed device cache and prefetcher.

The SSD speaks page-granular I/O (microsecond latencies, a handful of
parallel channels) while CXL.mem arrives in 64-byte transfers, so a
DRAM-class cache sits between the controller and the flash: demand hits
are served at cache latency, misses fetch whole pages, dirty evictions
write pages back, and a Best-Offset prefetcher watches the miss stream
to fetch ahead when a stable page stride emerges.

Best-Offset learning: candidate offsets are the positive integers up to
64 whose prime factors are in {2, 3, 5}.  Each eligible access (demand
miss or first hit on a prefetched page) tests one candidate d in
round-robin order and scores it when page-d is in the recent-request
table.  A phase ends when a score reaches 31 or after 100 rounds; the
best-scoring offset becomes the active prefetch offset unless its score
is <= 1, which disables prefetching until a later phase finds a winner.

Functional note: write-back data is propagated to the flash store when
the write-back is submitted (write-buffer semantics) so a racing refetch
of the victim page always observes the latest bytes; the program time is
still charged on the channel.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .engine import Engine


def _smooth_offsets(limit: int = 64) -> List[int]:
    out = []
    for d in range(1, limit + 1):
        n = d
        for p in (2, 3, 5):
            while n % p == 0:
                n //= p
        if n == 1:
            out.append(d)
    return out


@dataclass
class SsdConfig:
    page_size: int = 4096
    read_latency: int = 25_000_000     # ticks per page (25 us)
    write_latency: int = 300_000_000   # ticks per page (300 us)
    parallel_channels: int = 8

    def validate(self) -> None:
        if self.page_size < 64 or self.page_size & (self.page_size - 1):
            raise ValueError("page_size must be a power of two >= 64")
        if self.parallel_channels < 1:
            raise ValueError("need at least one channel")


@dataclass
class DeviceCacheConfig:
    capacity: int
    policy: str = "lru"       # lru | fifo
    writeback: bool = True

    def validate(self, page_size: int) -> None:
        if self.capacity % page_size:
            raise ValueError("cache capacity must divide into whole pages")
        if self.policy not in ("lru", "fifo"):
            raise ValueError(f"unknown replacement policy {self.policy!r}")


class BestOffsetPrefetcher:
    """Offset prefetcher scored against a recent-request table."""

    def __init__(self, score_max: int = 31, round_max: int = 100,
                 bad_score: int = 1, rr_size: int = 128, max_offset: int = 64):
        self.offsets = _smooth_offsets(max_offset)
        self.score_max = score_max
        self.round_max = round_max
        self.bad_score = bad_score
        self.rr_size = rr_size
        self.scores: Dict[int, int] = {d: 0 for d in self.offsets}
        self.best_offset: Optional[int] = None
        self.round = 0
        self._test_idx = 0
        self._rr: OrderedDict = OrderedDict()
        self.phases_completed = 0

    def _rr_insert(self, page: int) -> None:
        if page in self._rr:
            self._rr.move_to_end(page)
        else:
            self._rr[page] = None
            if len(self._rr) > self.rr_size:
                self._rr.popitem(last=False)

    def _end_phase(self, selected: Optional[int]) -> None:
        self.best_offset = selected
        self.scores = {d: 0 for d in self.offsets}
        self.round = 0
        self._test_idx = 0
        self.phases_completed += 1

    def update(self, page: int) -> Optional[int]:
        """One learning step for an eligible access; returns the page to
        prefetch when an offset is active, else None."""
        d = self.offsets[self._test_idx]
        if page - d in self._rr:
            self.scores[d] += 1
            if self.scores[d] >= self.score_max:
                self._end_phase(d)
                self._rr_insert(page)
                return self._candidate(page)
        self._test_idx += 1
        if self._test_idx == len(self.offsets):
            self._test_idx = 0
            self.round += 1
            if self.round >= self.round_max:
                best = max(self.offsets, key=lambda o: self.scores[o])
                if self.scores[best] > self.bad_score:
                    self._end_phase(best)
                else:
                    self._end_phase(None)
        self._rr_insert(page)
        return self._candidate(page)

    def _candidate(self, page: int) -> Optional[int]:
        if self.best_offset is None:
            return None
        return page + self.best_offset


class SsdMedium:
    """Page store with FIFO channel arbitration."""

    def __init__(self, engine: Engine, config: SsdConfig, stats=None):
        config.validate()
        self.engine = engine
        self.config = config
        self._store: Dict[int, bytes] = {}
        self._busy = 0
        self._backlog: deque = deque()
        if stats is not None:
            self.page_reads = stats.counter("ssd.pageReads")
            self.page_writes = stats.counter("ssd.pageWrites")
        else:
            self.page_reads = self.page_writes = None

    def io(self, page: int, kind: str, on_done: Callable[[], None]) -> None:
        if kind == "read":
            if self.page_reads is not None:
                self.page_reads.inc()
            lat = self.config.read_latency
        else:
            if self.page_writes is not None:
                self.page_writes.inc()
            lat = self.config.write_latency
        if self._busy < self.config.parallel_channels:
            self._start(lat, on_done)
        else:
            self._backlog.append((lat, on_done))

    def _start(self, lat: int, on_done) -> None:
        self._busy += 1

        def finish():
            self._busy -= 1
            if self._backlog:
                self._start(*self._backlog.popleft())
            on_done()

        self.engine.schedule(lat, finish)

    def read_page(self, page: int) -> bytes:
        return self._store.get(page, bytes(self.config.page_size))

    def write_page(self, page: int, data: bytes) -> None:
        self._store[page] = bytes(data)


class _CachedPage:
    __slots__ = ("data", "dirty", "prefetched", "referenced")

    def __init__(self, data: bytearray, prefetched: bool = False):
        self.data = data
        self.dirty = False
        self.prefetched = prefetched
        self.referenced = False


class SsdCachedMedium:
    """Device cache in front of the flash; write-allocate, write-back."""

    functional = True

    def __init__(self, engine: Engine, ssd: SsdMedium, cache: DeviceCacheConfig,
                 hit_latency: int, stats=None,
                 prefetcher: Optional[BestOffsetPrefetcher] = None):
        cache.validate(ssd.config.page_size)
        self.engine = engine
        self.ssd = ssd
        self.cache_config = cache
        self.hit_latency = hit_latency
        self.prefetcher = prefetcher
        self.page_size = ssd.config.page_size
        self.capacity_pages = cache.capacity // self.page_size
        self._pages: OrderedDict = OrderedDict()      # page -> _CachedPage
        self._inflight: Dict[int, dict] = {}          # page -> fetch record
        if stats is not None:
            self.hits = stats.counter("ssdcache.hits")
            self.misses = stats.counter("ssdcache.misses")
            self.late_hits = stats.counter("ssdcache.lateHits")
            self.prefetch_issued = stats.counter("ssdcache.prefetchIssued")
            self.prefetch_useful = stats.counter("ssdcache.prefetchUseful")
            self.writebacks = stats.counter("ssdcache.writebacks")
        else:
            self.hits = self.misses = self.late_hits = None
            self.prefetch_issued = self.prefetch_useful = self.writebacks = None

    # -- medium interface ---------------------------------------------------

    def access(self, offset: int, kind: str, data: Optional[bytes],
               on_done: Callable[[Optional[bytes]], None]) -> None:
        page = offset // self.page_size
        entry = self._pages.get(page)
        if entry is not None:
            if self.hits is not None:
                self.hits.inc()
            if self.cache_config.policy == "lru":
                self._pages.move_to_end(page)
            candidate = None
            if entry.prefetched and not entry.referenced:
                if self.prefetch_useful is not None:
                    self.prefetch_useful.inc()
                entry.referenced = True
                if self.prefetcher is not None:
                    candidate = self.prefetcher.update(page)
            result = self._apply(entry, offset, kind, data)
            self.engine.schedule(self.hit_latency, lambda: on_done(result))
            if candidate is not None:
                self._maybe_prefetch(candidate, trigger=page)
            return

        if page in self._inflight:
            record = self._inflight[page]
            record["waiters"].append((offset, kind, data, on_done))
            if record["prefetch"]:
                if self.late_hits is not None:
                    self.late_hits.inc()
                if self.prefetcher is not None:
                    candidate = self.prefetcher.update(page)
                    if candidate is not None:
                        self._maybe_prefetch(candidate, trigger=page)
            return

        if self.misses is not None:
            self.misses.inc()
        candidate = self.prefetcher.update(page) if self.prefetcher else None
        self._fetch(page, prefetch=False, trigger=page,
                    waiters=[(offset, kind, data, on_done)])
        if candidate is not None:
            self._maybe_prefetch(candidate, trigger=page)

    def _apply(self, entry: _CachedPage, offset: int, kind: str,
               data: Optional[bytes]) -> Optional[bytes]:
        off = offset % self.page_size
        if kind == "read":
            return bytes(entry.data[off:off + 64])
        entry.dirty = True
        if data is not None:
            entry.data[off:off + len(data)] = data
        return None

    # -- fills and evictions --------------------------------------------------

    def _maybe_prefetch(self, page: int, trigger: int) -> None:
        if page in self._pages or page in self._inflight:
            return
        if self.prefetch_issued is not None:
            self.prefetch_issued.inc()
        self._fetch(page, prefetch=True, trigger=trigger, waiters=[])

    def _fetch(self, page: int, prefetch: bool, trigger: int, waiters: list) -> None:
        self._inflight[page] = {"prefetch": prefetch, "trigger": trigger,
                                "waiters": waiters}
        self.ssd.io(page, "read", lambda: self._install(page))

    def _install(self, page: int) -> None:
        record = self._inflight.pop(page)
        entry = _CachedPage(bytearray(self.ssd.read_page(page)),
                            prefetched=record["prefetch"])
        installed = self._evict_for(record)
        if installed:
            self._pages[page] = entry
        for offset, kind, data, on_done in record["waiters"]:
            entry.referenced = True
            result = self._apply(entry, offset, kind, data)
            self.engine.schedule(self.hit_latency,
                                 lambda r=result, cb=on_done: cb(r))
        if not installed and entry.dirty:
            # Uncacheable install absorbed a write; persist it.
            self.ssd.write_page(page, bytes(entry.data))
            self.ssd.io(page, "write", lambda: None)

    def _evict_for(self, record: dict) -> bool:
        """Make room for one install; returns False when a prefetched page
        may not be cached because the only victim is its trigger line."""
        if len(self._pages) < self.capacity_pages:
            return True
        protected = record["trigger"] if record["prefetch"] else None
        victim_page = None
        for page in self._pages:          # front = LRU or FIFO order
            if page != protected:
                victim_page = page
                break
        if victim_page is None:
            return False
        victim = self._pages.pop(victim_page)
        if victim.dirty and self.cache_config.writeback:
            if self.writebacks is not None:
                self.writebacks.inc()
            # Data reaches the flash store now; program time still occupies
            # a channel so the timing cost is paid.
            self.ssd.write_page(victim_page, bytes(victim.data))
            self.ssd.io(victim_page, "write", lambda: None)
        return True

    def peek(self, offset: int) -> bytes:
        page = offset // self.page_size
        off = offset % self.page_size
        entry = self._pages.get(page)
        if entry is not None:
            return bytes(entry.data[off:off + 64])
        return self.ssd.read_page(page)[off:off + 64]


class SsdDirectMedium:
    """Uncached SSD path: every 64B read costs a page read and every 64B
    write a page read-modify-write."""

    functional = True

    def __init__(self, engine: Engine, ssd: SsdMedium):
        self.engine = engine
        self.ssd = ssd
        self.page_size = ssd.config.page_size

    def access(self, offset: int, kind: str, data: Optional[bytes],
               on_done: Callable[[Optional[bytes]], None]) -> None:
        page = offset // self.page_size
        off = offset % self.page_size

        if kind == "read":
            self.ssd.io(page, "read",
                        lambda: on_done(self.ssd.read_page(page)[off:off + 64]))
            return

        def after_read():
            buf = bytearray(self.ssd.read_page(page))
            if data is not None:
                buf[off:off + len(data)] = data
            self.ssd.write_page(page, bytes(buf))
            self.ssd.io(page, "write", lambda: on_done(None))

        self.ssd.io(page, "read", after_read)

    def peek(self, offset: int) -> bytes:
        page = offset // self.page_size
        off = offset % self.page_size
        return self.ssd.read_page(page)[off:off + 64]
