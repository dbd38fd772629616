"""Wire protocol and node roles for the relay network.

Frame layout (big-endian, 8-byte header, 128-byte frame cap to fit the
transceiver FIFOs):

    preamble(4) = AA 55 AA 55 | kind(1) | length(1) | counter(2) | payload

Node roles: the moving transceiver (MT) rides the robot; each relay node owns
an address advertiser (AAT) that broadcasts the node's address while the node
is in service, and a data exchange transceiver (DET) that collects sensor
frames and answers the end-of-upload marker with a motion command. A
transceiver in transmit mode cannot receive; every delivered frame raises one
interrupt on each side.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace

PREAMBLE = b"\xaa\x55\xaa\x55"
HEADER_LEN = 8
MAX_FRAME_BYTES = 128  # transceiver FIFO size
MAX_PAYLOAD_BYTES = MAX_FRAME_BYTES - HEADER_LEN
MAX_DATA_RATE_BPS = 120_000
SENSOR_CHANNELS = 5
DEFAULT_SETTLE_TIME_S = 60.0
DEFAULT_ADVERTISE_INTERVAL_S = 0.1


class FrameError(ValueError):
    """Frame cannot be encoded within the wire constraints."""


class DecodeError(ValueError):
    """Base for malformed received frames."""


class BadPreambleError(DecodeError):
    pass


class TruncatedFrameError(DecodeError):
    pass


class LengthMismatchError(DecodeError):
    pass


class UnknownRnaError(KeyError):
    """Received address is not in the programmed map."""


class InvalidReadingError(RuntimeError):
    """Sensor sampled before its output settled."""


class PacketKind(enum.IntEnum):
    SENSOR_DATA = 1
    RNA = 2
    DONE_TRANSMISSION = 3
    MOTION_COMMAND = 4
    START = 5


class RadioMode(enum.Enum):
    TX = "tx"
    RX = "rx"
    OFF = "off"


class NodeRole(enum.Enum):
    MT = "mt"
    AAT = "aat"
    DET = "det"


class DeliveryOutcome(enum.Enum):
    DELIVERED = "delivered"
    SENDER_NOT_TRANSMITTING = "sender_not_transmitting"
    RECEIVER_NOT_RECEIVING = "receiver_not_receiving"
    LINK_DOWN = "link_down"
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass(frozen=True)
class Packet:
    kind: PacketKind
    counter: int
    payload: bytes = b""


def encode_packet(p: Packet) -> bytes:
    """Serialize a packet; total frame size is capped by the FIFO bound."""
    if len(p.payload) > MAX_PAYLOAD_BYTES:
        raise FrameError(
            f"payload {len(p.payload)} B exceeds {MAX_PAYLOAD_BYTES} B "
            f"({MAX_FRAME_BYTES} B frame cap)"
        )
    if not 0 <= p.counter <= 0xFFFF:
        raise FrameError(f"counter {p.counter} outside 16-bit range")
    return PREAMBLE + struct.pack(
        ">BBH", int(p.kind), len(p.payload), p.counter
    ) + p.payload


def decode_packet(frame: bytes) -> Packet:
    """Parse a frame back into a packet; malformed input raises a DecodeError."""
    if len(frame) < len(PREAMBLE) or frame[: len(PREAMBLE)] != PREAMBLE:
        raise BadPreambleError("frame does not start with the preamble")
    if len(frame) < HEADER_LEN:
        raise TruncatedFrameError(f"frame of {len(frame)} B shorter than header")
    kind_byte, length, counter = struct.unpack(">BBH", frame[4:HEADER_LEN])
    try:
        kind = PacketKind(kind_byte)
    except ValueError as exc:
        raise DecodeError(f"unknown packet kind {kind_byte}") from exc
    payload = frame[HEADER_LEN:]
    if len(payload) != length:
        if len(payload) < length:
            raise TruncatedFrameError(
                f"payload truncated: header says {length} B, got {len(payload)} B"
            )
        raise LengthMismatchError(
            f"length field {length} does not match payload {len(payload)} B"
        )
    return Packet(kind=kind, counter=counter, payload=payload)


def frame_airtime_bits(frame: bytes) -> int:
    return 8 * len(frame)


class ThroughputBudget:
    """Sliding-window airtime admission at the link's maximum data rate.

    A frame is admitted while the bits sent in the trailing one-second window,
    including the new frame, stay at or below the rate cap.
    """

    def __init__(self, rate_bps: int = MAX_DATA_RATE_BPS, window_s: float = 1.0):
        self.rate_bps = rate_bps
        self.window_s = window_s
        self._sent: list[tuple[float, int]] = []

    def try_admit(self, t: float, bits: int) -> bool:
        cutoff = t - self.window_s
        sent = self._sent
        while sent and sent[0][0] <= cutoff:
            sent.pop(0)
        used = sum(b for _, b in sent)
        if used + bits > self.rate_bps * self.window_s:
            return False
        sent.append((t, bits))
        return True


@dataclass
class Transceiver:
    """One radio endpoint with interrupt accounting."""

    name: str
    role: NodeRole
    mode: RadioMode = RadioMode.RX
    tx_interrupts: int = 0
    rx_interrupts: int = 0
    inbox: list[Packet] = field(default_factory=list)
    counter: int = 0

    def next_counter(self) -> int:
        self.counter = (self.counter + 1) & 0xFFFF
        return self.counter


def deliver(
    packet: Packet,
    sender: Transceiver,
    receiver: Transceiver,
    link: bool,
    budget: ThroughputBudget | None = None,
    t: float = 0.0,
) -> DeliveryOutcome:
    """Point-to-point delivery attempt; non-delivery is an outcome, not an error."""
    if sender.mode is not RadioMode.TX:
        return DeliveryOutcome.SENDER_NOT_TRANSMITTING
    frame = encode_packet(packet)
    if budget is not None and not budget.try_admit(t, frame_airtime_bits(frame)):
        return DeliveryOutcome.BUDGET_EXCEEDED
    sender.tx_interrupts += 1
    if receiver.mode is not RadioMode.RX:
        return DeliveryOutcome.RECEIVER_NOT_RECEIVING
    if not link:
        return DeliveryOutcome.LINK_DOWN
    receiver.inbox.append(decode_packet(frame))
    receiver.rx_interrupts += 1
    return DeliveryOutcome.DELIVERED


def broadcast(
    packet: Packet,
    sender: Transceiver,
    receivers: list[tuple[Transceiver, bool]],
    budget: ThroughputBudget | None = None,
    t: float = 0.0,
) -> list[DeliveryOutcome]:
    """One transmission fanned out to every listener; airtime is charged once.

    Every in-range receiver in RX mode gets the same frame, which is what lets
    a listener joining mid-stream pick up all subsequent frames.
    """
    if sender.mode is not RadioMode.TX:
        return [DeliveryOutcome.SENDER_NOT_TRANSMITTING for _ in receivers]
    frame = encode_packet(packet)
    if budget is not None and not budget.try_admit(t, frame_airtime_bits(frame)):
        return [DeliveryOutcome.BUDGET_EXCEEDED for _ in receivers]
    sender.tx_interrupts += 1
    outcomes = []
    for receiver, link in receivers:
        if receiver.mode is not RadioMode.RX:
            outcomes.append(DeliveryOutcome.RECEIVER_NOT_RECEIVING)
        elif not link:
            outcomes.append(DeliveryOutcome.LINK_DOWN)
        else:
            receiver.inbox.append(decode_packet(frame))
            receiver.rx_interrupts += 1
            outcomes.append(DeliveryOutcome.DELIVERED)
    return outcomes


class JunctionKind(enum.Enum):
    STRAIGHT = "straight"
    BEND45 = "bend45"
    BEND90 = "bend90"
    BEND135 = "bend135"
    T_JUNCTION = "t_junction"


@dataclass(frozen=True)
class JunctionConfig:
    """Pipe configuration a relay address maps to."""

    kind: JunctionKind
    branch: str | None = None  # T-junction: "left" or "right"

    def __post_init__(self):
        if self.kind is JunctionKind.T_JUNCTION:
            if self.branch not in ("left", "right"):
                raise ValueError("T-junction config needs branch 'left' or 'right'")
        elif self.branch is not None:
            raise ValueError(f"{self.kind.value} takes no branch")


@dataclass(frozen=True)
class RnaArray:
    """Ordered relay addresses with their junction configurations.

    The order is the traversal order; it is the robot's map of the line.
    """

    entries: tuple[tuple[int, JunctionConfig], ...]

    def __post_init__(self):
        addresses = [a for a, _ in self.entries]
        if len(set(addresses)) != len(addresses):
            raise ValueError("relay addresses must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def addresses(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.entries)


def configuration_lookup(rna_received: int, rna_map: RnaArray) -> JunctionConfig:
    """Linear scan of the programmed address array for the received address."""
    if len(rna_map) == 0:
        raise ValueError("empty relay address map")
    done = False
    i = 0
    found = None
    while not done and i < len(rna_map.entries):
        address, config = rna_map.entries[i]
        if address == rna_received:
            done = True
            found = config
        i += 1
    if not done:
        raise UnknownRnaError(f"address {rna_received} not in map {rna_map.addresses()}")
    return found


def rna_payload(address: int) -> bytes:
    return struct.pack(">H", address)


def parse_rna_payload(payload: bytes) -> int:
    if len(payload) != 2:
        raise DecodeError(f"relay address payload must be 2 B, got {len(payload)}")
    return struct.unpack(">H", payload)[0]


@dataclass(frozen=True)
class SensorChannel:
    """One measurement channel: raw source plus its processing descriptor."""

    name: str
    raw_value: float
    gain: float = 1.0
    offset: float = 0.0
    settle_time: float = DEFAULT_SETTLE_TIME_S
    median_window: int = 1  # samples per reading; >1 applies a median filter

    def process(self, raws: list[float]) -> float:
        vals = sorted(raws)
        mid = len(vals) // 2
        if len(vals) % 2 == 1:
            med = vals[mid]
        else:
            med = 0.5 * (vals[mid - 1] + vals[mid])
        return self.gain * med + self.offset


@dataclass(frozen=True)
class SensorBank:
    """The five onboard water-quality channels."""

    channels: tuple[SensorChannel, ...]

    def __post_init__(self):
        if len(self.channels) != SENSOR_CHANNELS:
            raise ValueError(f"sensor bank must have exactly {SENSOR_CHANNELS} channels")


def default_sensor_bank(settle_time: float = DEFAULT_SETTLE_TIME_S) -> SensorBank:
    base = [
        ("ph", 7.1, 1.0, 0.0),
        ("free_chlorine", 0.6, 1.0, 0.0),
        ("turbidity", 1.3, 1.0, 0.0),
        ("conductivity", 410.0, 1.0, 0.0),
        ("temperature", 17.5, 1.0, 0.0),
    ]
    return SensorBank(
        channels=tuple(
            SensorChannel(name=n, raw_value=v, gain=g, offset=o, settle_time=settle_time)
            for n, v, g, o in base
        )
    )


def sensor_payload(channel_index: int, value: float) -> bytes:
    return struct.pack(">Bd", channel_index, value)


def parse_sensor_payload(payload: bytes) -> tuple[int, float]:
    if len(payload) != 9:
        raise DecodeError(f"sensor payload must be 9 B, got {len(payload)}")
    return struct.unpack(">Bd", payload)


@dataclass
class MeasurementEvent:
    t: float
    channel: str
    raw: float
    processed: float


class MeasurementPhase:
    """Sequencer for the robot's hold-and-upload phase.

    Order of operations: activate the micro-pump, wait out the slowest
    settle time, sample and process every channel, transmit one frame per
    channel, close with the end-of-upload marker, and drop the transceiver
    back to receive mode. sample-before-settle is a sequencing bug and
    raises instead of producing a bogus reading.
    """

    def __init__(self, bank: SensorBank, mt: Transceiver, start_time: float):
        self.bank = bank
        self.mt = mt
        self.activated_at = start_time
        self.settle_deadline = start_time + max(c.settle_time for c in bank.channels)
        self.samples: list[MeasurementEvent] = []
        self.pending: list[Packet] = []
        self.done_sent = False
        self._sampled = False

    def sample_all(self, t: float) -> list[MeasurementEvent]:
        events = []
        for idx, ch in enumerate(self.bank.channels):
            if t - self.activated_at < ch.settle_time:
                raise InvalidReadingError(
                    f"{ch.name} sampled {t - self.activated_at:.1f} s after pump start, "
                    f"needs {ch.settle_time:.0f} s"
                )
            raws = [ch.raw_value] * ch.median_window
            processed = ch.process(raws)
            events.append(MeasurementEvent(t=t, channel=ch.name, raw=ch.raw_value, processed=processed))
            self.pending.append(
                Packet(
                    kind=PacketKind.SENSOR_DATA,
                    counter=self.mt.next_counter(),
                    payload=sensor_payload(idx, processed),
                )
            )
        self.pending.append(
            Packet(kind=PacketKind.DONE_TRANSMISSION, counter=self.mt.next_counter())
        )
        self.samples.extend(events)
        self._sampled = True
        return events

    def next_frame(self, t: float) -> Packet | None:
        """Next frame to put on the air, in order; None while settling or done."""
        if not self._sampled:
            if t < self.settle_deadline:
                return None
            self.sample_all(t)
            self.mt.mode = RadioMode.TX
        if self.pending:
            return self.pending[0]
        return None

    def mark_sent(self, packet: Packet) -> None:
        assert self.pending and self.pending[0] is packet
        self.pending.pop(0)
        if packet.kind is PacketKind.DONE_TRANSMISSION:
            self.done_sent = True
            self.mt.mode = RadioMode.RX

    @property
    def complete(self) -> bool:
        return self.done_sent


def run_measurement_phase(
    bank: SensorBank,
    mt: Transceiver,
    det: Transceiver,
    start_time: float = 0.0,
    dt: float = 1e-3,
    budget: ThroughputBudget | None = None,
    link: bool = True,
) -> tuple[list[Packet], list[MeasurementEvent]]:
    """Run the upload sequence to completion on its own clock; returns the
    frames the exchange transceiver received plus the sampling log."""
    phase = MeasurementPhase(bank, mt, start_time)
    t = start_time
    guard = int((max(c.settle_time for c in bank.channels) + 10.0) / dt)
    for _ in range(guard):
        frame = phase.next_frame(t)
        if frame is not None:
            outcome = deliver(frame, mt, det, link=link, budget=budget, t=t)
            if outcome in (DeliveryOutcome.DELIVERED, DeliveryOutcome.LINK_DOWN,
                           DeliveryOutcome.RECEIVER_NOT_RECEIVING):
                phase.mark_sent(frame)
        if phase.complete:
            break
        t += dt
    return list(det.inbox), phase.samples


@dataclass
class RelayNode:
    """One relay: address advertiser + data exchange transceiver."""

    address: int
    advertise_interval: float = DEFAULT_ADVERTISE_INTERVAL_S
    in_service: bool = True
    aat: Transceiver = None  # type: ignore[assignment]
    det: Transceiver = None  # type: ignore[assignment]
    _next_advertise: float = 0.0
    got_done: bool = False
    command_sent: bool = False

    def __post_init__(self):
        if self.aat is None:
            self.aat = Transceiver(f"rn{self.address}.aat", NodeRole.AAT, RadioMode.TX)
        if self.det is None:
            self.det = Transceiver(f"rn{self.address}.det", NodeRole.DET, RadioMode.RX)

    def retire(self) -> None:
        """Remove the node from service: the advertiser goes quiet."""
        self.in_service = False
        self.aat.mode = RadioMode.OFF
        self.det.mode = RadioMode.OFF

    def advertise_due(self, t: float) -> Packet | None:
        if not self.in_service or t < self._next_advertise:
            return None
        self._next_advertise = t + self.advertise_interval
        return Packet(
            kind=PacketKind.RNA,
            counter=self.aat.next_counter(),
            payload=rna_payload(self.address),
        )

    def take_received(self) -> list[Packet]:
        got = self.det.inbox
        self.det.inbox = []
        for p in got:
            if p.kind is PacketKind.DONE_TRANSMISSION:
                self.got_done = True
        return got

    def motion_command_due(self) -> Packet | None:
        """After the end-of-upload marker, answer exactly once with the go command."""
        if self.got_done and not self.command_sent:
            self.command_sent = True
            self.det.mode = RadioMode.TX
            return Packet(kind=PacketKind.MOTION_COMMAND, counter=self.det.next_counter())
        return None


def relay_node_step(node: RelayNode, t: float) -> list[tuple[Transceiver, Packet]]:
    """Frames the node wants on the air at time t, paired with their sender."""
    frames: list[tuple[Transceiver, Packet]] = []
    adv = node.advertise_due(t)
    if adv is not None:
        frames.append((node.aat, adv))
    node.take_received()
    cmd = node.motion_command_due()
    if cmd is not None:
        frames.append((node.det, cmd))
    return frames
