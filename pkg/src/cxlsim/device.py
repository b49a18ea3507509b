"""CXL Type-3 memory expander: config space, controller, backend media.

The device is enumerated like a PCI endpoint: the host sizes each base
address register with the write-all-ones probe, carves a host physical
range for the HDM window above the existing map, and writes the chosen
base back into the BAR.  After that the memory controller translates
incoming CXL.mem request addresses to device-internal offsets and
services them against the configured backend medium.

device_proto_proc_lat is charged twice per request, once when the M2S
message is parsed and once when the S2M response is built, so swapping
controllers changes end-to-end latency by twice the per-message delta.

Data is stored byte-exactly in a sparse shadow map keyed by 64B line;
untouched lines read as zero.  SSD-backed media manage their own bytes
(page store plus device cache) and bypass the shadow map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .engine import Engine
from .host import AddressMap, SimFault, Target
from .bridge import CxlBridge, CxlKind, CxlMemPacket

ALL_ONES = (1 << 64) - 1
ZERO_LINE = bytes(64)


class DeviceFault(SimFault):
    pass


class EnumerationError(SimFault):
    pass


class BaseAddressRegister:
    """PCI-style BAR with write-all-ones sizing semantics."""

    def __init__(self, size: int):
        if size <= 0 or size & (size - 1):
            raise ValueError("BAR size must be a power of two")
        self.size = size
        self._value = 0

    def write(self, value: int) -> None:
        # Low log2(size) bits are hardwired to zero.
        self._value = value & ~(self.size - 1) & ALL_ONES

    def read(self) -> int:
        return self._value

    @property
    def base(self) -> int:
        return self._value


@dataclass
class ConfigSpace:
    vendor_id: int = 0x1DB7
    device_id: int = 0xC3D0
    bars: List[BaseAddressRegister] = field(default_factory=list)


@dataclass
class CxlDeviceConfig:
    hdm_size: int
    device_proto_proc_lat: int   # ticks, charged per message direction
    medium_access_lat: int       # ticks, backend medium access knob
    medium: str = "coarse_dram"  # coarse_dram | queued_ddr | ssd

    def validate(self) -> None:
        if self.hdm_size <= 0:
            raise ValueError("hdm_size must be > 0")
        if self.device_proto_proc_lat < 0 or self.medium_access_lat < 0:
            raise ValueError("latencies must be >= 0")


class MemExpander:
    """Memory controller plus backend medium behind one BAR window."""

    def __init__(self, engine: Engine, config: CxlDeviceConfig, medium,
                 stats=None, prefix: str = "cxl"):
        config.validate()
        self.engine = engine
        self.config = config
        self.medium = medium
        self.config_space = ConfigSpace(bars=[BaseAddressRegister(config.hdm_size)])
        self._shadow: Dict[int, bytes] = {}
        self._bridge: Optional[CxlBridge] = None
        if stats is not None:
            self.rsp_time = stats.histogram(f"{prefix}.rsp")
            self.reads = stats.counter(f"{prefix}.reads")
            self.writes = stats.counter(f"{prefix}.writes")
        else:
            self.rsp_time = self.reads = self.writes = None

    @property
    def bar(self) -> BaseAddressRegister:
        return self.config_space.bars[0]

    def bind_bridge(self, bridge: CxlBridge) -> None:
        self._bridge = bridge

    def translate(self, addr: int) -> int:
        base = self.bar.base
        if base == 0:
            raise DeviceFault("device not enumerated (BAR base unset)")
        if not base <= addr < base + self.config.hdm_size:
            raise DeviceFault(
                f"address {addr:#x} outside HDM window "
                f"[{base:#x}, {base + self.config.hdm_size:#x})")
        return addr - base

    # -- CXL.mem service ----------------------------------------------------

    def receive_m2s(self, pkt: CxlMemPacket) -> None:
        if pkt.kind not in (CxlKind.M2S_REQ, CxlKind.M2S_RWD):
            raise DeviceFault(f"device cannot service {pkt.kind.value}")
        arrival = self.engine.now
        offset = self.translate(pkt.addr)
        is_read = pkt.kind is CxlKind.M2S_REQ
        if is_read and self.reads is not None:
            self.reads.inc()
        elif not is_read and self.writes is not None:
            self.writes.inc()

        def parsed():
            self._medium_access(
                "read" if is_read else "write", offset, pkt.data,
                lambda result: self._respond(pkt, arrival, is_read, offset, result))

        self.engine.schedule(self.config.device_proto_proc_lat, parsed)

    def _medium_access(self, kind: str, offset: int, data, on_done) -> None:
        if getattr(self.medium, "functional", False):
            self.medium.access(offset, kind, data, on_done)
        else:
            line = offset // 64
            if kind == "write" and data is not None:
                if len(data) != 64:
                    raise DeviceFault("payload writes must be full 64B lines")
                self._shadow[line] = bytes(data)
            result = self._shadow.get(line, ZERO_LINE) if kind == "read" else None
            self.medium.submit(kind, lambda: on_done(result))

    def _respond(self, pkt: CxlMemPacket, arrival: int, is_read: bool,
                 offset: int, result) -> None:
        def built():
            if is_read:
                resp = CxlMemPacket(CxlKind.S2M_DRS, pkt.id, pkt.addr, 64,
                                    data=result)
            else:
                resp = CxlMemPacket(CxlKind.S2M_NDR, pkt.id, pkt.addr, 0)
            if self.rsp_time is not None:
                self.rsp_time.record(self.engine.now - arrival)
            self._bridge.device_egress(resp)

        self.engine.schedule(self.config.device_proto_proc_lat, built)

    # Direct functional access for tests and management layers.
    def peek(self, offset: int) -> bytes:
        if getattr(self.medium, "functional", False):
            return self.medium.peek(offset)
        return self._shadow.get(offset // 64, ZERO_LINE)


def probe_bar_size(bar: BaseAddressRegister) -> int:
    """Discover a BAR's window size via the all-ones write/read protocol."""
    bar.write(ALL_ONES)
    mask = bar.read()
    return (~mask & ALL_ONES) + 1


def enumerate_expander(addr_map: AddressMap, device: MemExpander,
                       bridge: Optional[CxlBridge] = None):
    """Three-step enumeration: size the BAR, carve an HDM range above the
    existing map, write the base back.  Returns the new address range."""
    size = probe_bar_size(device.bar)
    try:
        base = addr_map.allocate_above(size)
        rng = addr_map.add_range(base, base + size, Target.BRIDGE, device)
    except (SimFault, ValueError) as exc:
        raise EnumerationError(f"cannot map {size:#x} bytes of HDM: {exc}") from exc
    device.bar.write(base)
    if bridge is not None:
        bridge.attach_device(base, base + size, device)
    return rng
