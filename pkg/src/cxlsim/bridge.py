"""Bridge between the memory bus and CXL.mem devices.

The bridge intercepts HDM-bound host packets, converts them to CXL.mem
messages through two pairs of bounded FIFO queues, and converts device
responses back.  A request FIFO slot doubles as the transaction credit:
it is held from admission until the converted response is handed back to
the memory bus, which makes req_fifo_depth the ceiling on in-flight HDM
requests and ties peak random-access bandwidth to Little's law.

Admission control is credit-free NACK/retry: a request arriving with no
free slot is refused once (counted), and the sender holds the packet.
Every time a slot frees, all held senders re-offer; the oldest wins and
each losing re-offer counts as another retry.  The response path never
drops: the device reserves a response FIFO slot before transmitting, so
a full response FIFO back-pressures device-side delivery.

Each link direction is an independent serial channel.  Transfers cut
through (a message is delivered when the channel grants it) while the
channel stays occupied for header+payload bytes at the configured rate,
so serialization bounds throughput without inflating idle latency.

Per-traversal latency: bridge_lat + host_proto_proc_lat is charged on the
request conversion and again on the response conversion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

from .engine import Engine
from .host import MemCmd, MemPacket, SimFault


class CxlKind(Enum):
    M2S_REQ = "M2SReq"    # read request, header only
    M2S_RWD = "M2SRwD"    # write request with 64B payload
    S2M_NDR = "S2MNDR"    # no-data response (write ack)
    S2M_DRS = "S2MDRS"    # data response with 64B payload


class ConversionError(SimFault):
    pass


class ProtocolError(SimFault):
    pass


@dataclass
class CxlMemPacket:
    kind: CxlKind
    id: int
    addr: int
    payload_bytes: int
    data: Optional[bytes] = None

    def __post_init__(self):
        expect = 64 if self.kind in (CxlKind.M2S_RWD, CxlKind.S2M_DRS) else 0
        if self.payload_bytes != expect:
            raise ProtocolError(
                f"{self.kind.value} must carry {expect}B payload, "
                f"got {self.payload_bytes}")


def convert_m2s(pkt: MemPacket) -> CxlMemPacket:
    """Host request -> CXL.mem request; ids are preserved."""
    if pkt.cmd is MemCmd.READ_REQ:
        return CxlMemPacket(CxlKind.M2S_REQ, pkt.id, pkt.addr, 0)
    if pkt.cmd is MemCmd.WRITE_REQ:
        return CxlMemPacket(CxlKind.M2S_RWD, pkt.id, pkt.addr, 64, data=pkt.data)
    raise ConversionError(f"cannot convert {pkt.cmd.value} to a CXL.mem request")


def convert_s2m(pkt: CxlMemPacket, request: MemPacket) -> MemPacket:
    """CXL.mem response -> host response for the matching request."""
    if pkt.kind is CxlKind.S2M_DRS:
        if request.cmd is not MemCmd.READ_REQ:
            raise ProtocolError("S2MDRS must answer a ReadReq")
        return request.make_response(data=pkt.data)
    if pkt.kind is CxlKind.S2M_NDR:
        if request.cmd is not MemCmd.WRITE_REQ:
            raise ProtocolError("S2MNDR must answer a WriteReq")
        return request.make_response()
    raise ConversionError(f"{pkt.kind.value} is not a device response")


@dataclass
class BridgeConfig:
    bridge_lat: int             # ticks, charged per traversal
    host_proto_proc_lat: int    # ticks, charged per traversal
    req_fifo_depth: int
    resp_fifo_depth: int
    link_bytes_per_ns_tx: float
    link_bytes_per_ns_rx: float
    msg_header_bytes: int = 16

    def validate(self) -> None:
        if self.req_fifo_depth < 1 or self.resp_fifo_depth < 1:
            raise ValueError("FIFO depths must be >= 1")
        if self.bridge_lat < 0 or self.host_proto_proc_lat < 0:
            raise ValueError("latencies must be >= 0")
        if self.link_bytes_per_ns_tx <= 0 or self.link_bytes_per_ns_rx <= 0:
            raise ValueError("link capacities must be > 0")

    @property
    def traversal_lat(self) -> int:
        return self.bridge_lat + self.host_proto_proc_lat


class LinkChannel:
    """One link direction: FIFO, cut-through, byte-serialized occupancy."""

    def __init__(self, engine: Engine, bytes_per_ns: float, byte_counter=None):
        self.engine = engine
        self.bytes_per_ns = bytes_per_ns
        self._busy = False
        self._queue: deque = deque()
        self._bytes = byte_counter

    def transmit(self, nbytes: int, deliver: Callable[[], None]) -> None:
        self._queue.append((nbytes, deliver))
        self._kick()

    def _kick(self) -> None:
        if self._busy or not self._queue:
            return
        nbytes, deliver = self._queue.popleft()
        self._busy = True
        if self._bytes is not None:
            self._bytes.inc(nbytes)
        deliver()
        hold = max(1, round(nbytes * 1000 / self.bytes_per_ns))

        def release():
            self._busy = False
            self._kick()

        self.engine.schedule(hold, release)

    @property
    def queued(self) -> int:
        return len(self._queue)


class CxlBridge:
    """Fig-style bridge: two FIFO pairs, conversion latency, retry logic."""

    def __init__(self, engine: Engine, config: BridgeConfig, stats=None):
        config.validate()
        self.engine = engine
        self.config = config
        self._devices: List[Tuple[int, int, object]] = []   # (base, limit, device)
        self._inflight: dict = {}        # id -> (request pkt, on_response)
        self._credits = 0                # upstream req FIFO slots in use
        self._waiters: deque = deque()   # held (pkt, on_response)
        self._resp_slots = 0             # downstream resp FIFO incl. reservations
        self._egress_waiters: deque = deque()
        self.down_req: deque = deque()   # converted requests awaiting TX
        self.down_resp: deque = deque()  # responses awaiting conversion
        if stats is not None:
            self.retry_counts = stats.counter("bridge.reqRetryCounts")
            self.req_occupancy = stats.gauge("bridge.reqFifoOccupancy")
            self.resp_occupancy = stats.gauge("bridge.respFifoOccupancy")
            self.m2s_sent = stats.counter("bridge.m2sSent")
            self.s2m_received = stats.counter("bridge.s2mReceived")
            tx_bytes = stats.counter("bridge.txBytes")
            rx_bytes = stats.counter("bridge.rxBytes")
        else:
            self.retry_counts = _NullCounter()
            self.req_occupancy = _NullGauge()
            self.resp_occupancy = _NullGauge()
            self.m2s_sent = _NullCounter()
            self.s2m_received = _NullCounter()
            tx_bytes = rx_bytes = None
        self.tx = LinkChannel(engine, config.link_bytes_per_ns_tx, tx_bytes)
        self.rx = LinkChannel(engine, config.link_bytes_per_ns_rx, rx_bytes)

    def attach_device(self, base: int, limit: int, device) -> None:
        self._devices.append((base, limit, device))
        device.bind_bridge(self)

    def _device_for(self, addr: int):
        for base, limit, device in self._devices:
            if base <= addr < limit:
                return device
        raise ProtocolError(f"no CXL device backs address {addr:#x}")

    @property
    def in_flight(self) -> int:
        return self._credits

    # -- request path ------------------------------------------------------

    def receive(self, pkt: MemPacket, on_response) -> None:
        """Memory-bus port: admit or refuse-and-hold (retry protocol)."""
        if pkt.cmd not in (MemCmd.READ_REQ, MemCmd.WRITE_REQ):
            raise ProtocolError(f"bridge cannot admit {pkt.cmd.value}")
        if self._credits < self.config.req_fifo_depth:
            self._admit(pkt, on_response)
        else:
            self.retry_counts.inc()
            self._waiters.append((pkt, on_response))

    def _admit(self, pkt: MemPacket, on_response) -> None:
        self._credits += 1
        self.req_occupancy.set(self._credits)
        if pkt.id in self._inflight:
            raise ProtocolError(f"request id {pkt.id} already in flight")
        self._inflight[pkt.id] = (pkt, on_response)

        def converted():
            cxl = convert_m2s(pkt)
            self.down_req.append(cxl)
            self._tx_kick()

        self.engine.schedule(self.config.traversal_lat, converted)

    def _tx_kick(self) -> None:
        while self.down_req:
            cxl = self.down_req.popleft()
            device = self._device_for(cxl.addr)
            nbytes = self.config.msg_header_bytes + cxl.payload_bytes
            self.m2s_sent.inc()
            self.tx.transmit(nbytes, lambda c=cxl, d=device: d.receive_m2s(c))

    # -- response path -----------------------------------------------------

    def device_egress(self, cxl: CxlMemPacket, on_sent=None) -> None:
        """Device-side delivery; stalls when the response FIFO is full."""
        if self._resp_slots < self.config.resp_fifo_depth:
            self._resp_slots += 1
            self.resp_occupancy.set(self._resp_slots)
            nbytes = self.config.msg_header_bytes + cxl.payload_bytes
            if on_sent is not None:
                on_sent()
            self.rx.transmit(nbytes, lambda: self._arrived(cxl))
        else:
            self._egress_waiters.append((cxl, on_sent))

    def _arrived(self, cxl: CxlMemPacket) -> None:
        self.s2m_received.inc()
        self.down_resp.append(cxl)

        def converted():
            self.down_resp.remove(cxl)
            try:
                request, on_response = self._inflight.pop(cxl.id)
            except KeyError:
                raise ProtocolError(f"response id {cxl.id} matches no request")
            resp = convert_s2m(cxl, request)
            self._release_resp_slot()
            self._release_credit()
            on_response(resp)

        self.engine.schedule(self.config.traversal_lat, converted)

    def _release_resp_slot(self) -> None:
        self._resp_slots -= 1
        self.resp_occupancy.set(self._resp_slots)
        if self._egress_waiters:
            cxl, on_sent = self._egress_waiters.popleft()
            self.device_egress(cxl, on_sent)

    def _release_credit(self) -> None:
        self._credits -= 1
        self.req_occupancy.set(self._credits)
        if self._waiters:
            pkt, on_response = self._waiters.popleft()
            # Space-available broadcast: the oldest sender wins the slot;
            # every other held sender re-offers and is refused again.
            self.retry_counts.inc(len(self._waiters))
            self._admit(pkt, on_response)


class _NullCounter:
    value = 0

    def inc(self, n=1):
        pass


class _NullGauge:
    value = 0
    max_value = 0

    def set(self, v):
        pass

    def add(self, d):
        pass
