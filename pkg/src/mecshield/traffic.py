"""Synthetic flow generation for benign IoT categories and DDoS adversaries,
plus the flow-record CSV ingestion path."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

TCP = "TCP"
UDP = "UDP"
ICMP = "ICMP"
OTHER = "OTHER"
PROTOCOLS = (TCP, UDP, ICMP, OTHER)

LABEL_BENIGN = "benign"
LABEL_MALICIOUS = "malicious"

SENSOR = "sensor"
MONITOR = "monitor"
ALARM = "alarm"

VOLUMETRIC = "volumetric"
APP_LAYER = "app_layer"

# response-bytes : request-bytes ranges of the abused reflector services
AMPLIFICATION = {
    "dns": (28.0, 54.0),
    "ntp": (556.9, 556.9),
    "ssdp": (30.8, 30.8),
}
SERVICE_PORT = {"dns": 53, "ntp": 123, "ssdp": 1900}

APP_LAYER_MODES = ("session_flood", "request_flood", "asymmetric")

CSV_HEADER = ["flow_id", "src_addr", "dst_addr", "protocol", "dst_port",
              "packet_count", "byte_count", "start_time", "end_time", "label"]


@dataclass
class FlowRecord:
    flow_id: str
    src_addr: int
    dst_addr: int
    protocol: str
    dst_port: int
    packet_count: int
    byte_count: float
    start_time: float
    end_time: float
    packet_timestamps: list[float] = field(default_factory=list)
    truth_label: str = LABEL_BENIGN  # ground truth; evaluation only, never shown to classifiers

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"flow {self.flow_id}: unknown protocol {self.protocol!r}")
        if not (0 <= self.dst_port <= 65535):
            raise ValueError(f"flow {self.flow_id}: port {self.dst_port} out of range")
        if self.packet_count < 0 or self.byte_count < 0:
            raise ValueError(f"flow {self.flow_id}: negative packet/byte count")
        if self.start_time > self.end_time:
            raise ValueError(f"flow {self.flow_id}: start_time after end_time")
        if self.packet_count != len(self.packet_timestamps):
            raise ValueError(f"flow {self.flow_id}: packet_count != timestamp count")
        if self.truth_label not in (LABEL_BENIGN, LABEL_MALICIOUS):
            raise ValueError(f"flow {self.flow_id}: bad label {self.truth_label!r}")
        ts = self.packet_timestamps
        for a, b in zip(ts, ts[1:]):
            if b < a:
                raise ValueError(f"flow {self.flow_id}: timestamps not sorted")
        if ts and (ts[0] < self.start_time - 1e-9 or ts[-1] > self.end_time + 1e-9):
            raise ValueError(f"flow {self.flow_id}: timestamps outside [start,end]")


@dataclass
class BenignProfile:
    """Qualitative IoT traffic categories, parameterized.

    sensor:  fixed-period flows, few packets each.
    monitor: few long-lived flows, many packets each (camera-like).
    alarm:   Poisson event arrivals, moderate flows and packets; an event can
             fire a burst of flows from one device.
    """
    category: str
    device_count: int = 1
    protocol: str = UDP
    dst_port: int = 5683
    period: float = 10.0              # sensor: seconds between flows per device
    flows_per_minute: float = 1.0     # monitor
    event_rate: float = 0.05          # alarm: Poisson events/s
    burst_flows: int = 1              # alarm: flows emitted per event
    packets_per_flow: float = 5.0
    bytes_per_packet: float = 100.0
    flow_duration: float = 1.0

    def __post_init__(self):
        if self.category not in (SENSOR, MONITOR, ALARM):
            raise ValueError(f"unknown benign category {self.category!r}")
        for name in ("device_count", "period", "flows_per_minute", "event_rate",
                     "burst_flows", "packets_per_flow", "bytes_per_packet", "flow_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"benign profile {self.category}: {name} must be positive")


def default_benign_profile(category: str) -> BenignProfile:
    if category == SENSOR:
        return BenignProfile(SENSOR, protocol=UDP, dst_port=5683,
                             period=10.0, packets_per_flow=5.0, flow_duration=1.0)
    if category == MONITOR:
        return BenignProfile(MONITOR, protocol=TCP, dst_port=554,
                             flows_per_minute=1.0, packets_per_flow=500.0,
                             flow_duration=30.0)
    if category == ALARM:
        return BenignProfile(ALARM, protocol=TCP, dst_port=4059,
                             event_rate=0.05, packets_per_flow=50.0,
                             flow_duration=2.0)
    raise ValueError(f"unknown benign category {category!r}")


@dataclass
class AttackProfile:
    scenario: str                     # volumetric | app_layer
    sub_mode: str                     # dns/ntp/ssdp or session_flood/request_flood/asymmetric
    target_addr: int
    bot_count: int = 10
    offered_rate: float = 0.0         # total attack bytes per sim-second; 0 = no rescaling
    spoofing: bool = True
    # volumetric knobs
    request_bytes: float = 100.0
    requests_per_bot_per_s: float = 10.0
    amplifier_addr: int = 0x08080808
    # application-layer knobs
    protocol: str = TCP
    dst_port: int = 80
    base_session_rate: float = 1.0    # flows/s per bot at multiplier 1.0
    multiplier: float = 10.0
    base_packets_per_flow: int = 2
    bytes_per_packet: float = 60.0
    session_duration: float = 0.5
    burst_size: int = 1               # sessions opened per arrival event
    burst_interval: float = 0.1

    def __post_init__(self):
        if self.bot_count < 1:
            raise ValueError("bot_count must be >= 1")
        if self.scenario == VOLUMETRIC:
            if self.sub_mode not in AMPLIFICATION:
                raise ValueError(f"unknown volumetric sub_mode {self.sub_mode!r}")
        elif self.scenario == APP_LAYER:
            if self.sub_mode not in APP_LAYER_MODES:
                raise ValueError(f"unknown app-layer sub_mode {self.sub_mode!r}")
        else:
            raise ValueError(f"unknown attack scenario {self.scenario!r}")


def _packet_times(rng, start: float, dur: float, count: int) -> list[float]:
    if count <= 0:
        return []
    ts = start + np.sort(rng.uniform(0.0, dur, size=count))
    return [float(t) for t in ts]


def gen_benign(profile: BenignProfile, duration: float, seed: int,
               src_base: int = 0x0A000000, dst_addr: int = 0xC0A80001,
               t0: float = 0.0) -> list[FlowRecord]:
    """Benign flows for one category over [t0, t0+duration); deterministic per seed."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng([seed, 0x0BE19])
    flows: list[FlowRecord] = []

    def emit(src, start, pkts):
        pkts = max(1, int(pkts))
        dur = min(profile.flow_duration, t0 + duration - start)
        dur = max(dur, 1e-6)
        ts = _packet_times(rng, start, dur, pkts)
        flows.append(FlowRecord(
            flow_id=f"{profile.category}-{len(flows)}",
            src_addr=src, dst_addr=dst_addr, protocol=profile.protocol,
            dst_port=profile.dst_port, packet_count=pkts,
            byte_count=pkts * profile.bytes_per_packet,
            start_time=start, end_time=ts[-1] if ts else start,
            packet_timestamps=ts, truth_label=LABEL_BENIGN))

    if profile.category == SENSOR:
        for d in range(profile.device_count):
            n = int(np.floor(duration / profile.period + 1e-9))
            for k in range(n):
                start = t0 + k * profile.period
                emit(src_base + d, start, rng.poisson(profile.packets_per_flow - 1) + 1)
    elif profile.category == MONITOR:
        gap = 60.0 / profile.flows_per_minute
        for d in range(profile.device_count):
            n = int(np.floor(duration / gap + 1e-9)) or 1
            for k in range(n):
                start = t0 + k * gap
                if start >= t0 + duration:
                    break
                emit(src_base + d, start, rng.normal(profile.packets_per_flow,
                                                     profile.packets_per_flow / 10.0))
    else:  # ALARM
        t = t0 + float(rng.exponential(1.0 / profile.event_rate))
        while t < t0 + duration:
            src = src_base + int(rng.integers(profile.device_count))
            for b in range(profile.burst_flows):
                start = t + b * 0.1
                if start >= t0 + duration:
                    break
                emit(src, start, rng.poisson(profile.packets_per_flow - 1) + 1)
            t += float(rng.exponential(1.0 / profile.event_rate))
    for f in flows:
        f.validate()
    return flows


def gen_attack(profile: AttackProfile, duration: float, seed: int,
               src_base: int = 0xC6000000, t0: float = 0.0) -> list[FlowRecord]:
    """Malicious flows for one adversary over [t0, t0+duration); deterministic per seed."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng([seed, 0xA77AC])
    if profile.scenario == VOLUMETRIC:
        return _gen_volumetric(profile, duration, rng, src_base, t0)
    return _gen_app_layer(profile, duration, rng, src_base, t0)


def _gen_volumetric(p: AttackProfile, duration: float, rng, src_base: int,
                    t0: float) -> list[FlowRecord]:
    lo, hi = AMPLIFICATION[p.sub_mode]
    port = SERVICE_PORT[p.sub_mode]
    # lay out request times and draw per-pair amplification first, so the
    # request size can be rescaled to meet offered_rate while keeping every
    # response/request byte ratio exactly equal to the drawn factor
    pairs = []
    for b in range(p.bot_count):
        bot = src_base + b
        phase = float(rng.uniform(0.0, 1.0 / p.requests_per_bot_per_s))
        t = t0 + phase
        while t < t0 + duration:
            factor = lo if lo == hi else float(rng.uniform(lo, hi))
            pairs.append((t, bot, factor))
            t += 1.0 / p.requests_per_bot_per_s
    pairs.sort()
    req_bytes = p.request_bytes
    if p.offered_rate > 0 and pairs:
        raw_total = sum(req_bytes * (1.0 + f) for _, _, f in pairs)
        req_bytes = req_bytes * (p.offered_rate * duration / raw_total)
    flows: list[FlowRecord] = []
    for k, (t, bot, factor) in enumerate(pairs):
        flows.append(FlowRecord(
            flow_id=f"req-{k}", src_addr=bot, dst_addr=p.amplifier_addr,
            protocol=UDP, dst_port=port, packet_count=1, byte_count=req_bytes,
            start_time=t, end_time=t, packet_timestamps=[t],
            truth_label=LABEL_MALICIOUS))
        rsp_dst = p.target_addr if p.spoofing else bot
        rsp_pkts = max(1, int(factor))
        rsp_start = t + 0.001
        ts = [rsp_start + 0.0001 * i for i in range(rsp_pkts)]
        flows.append(FlowRecord(
            flow_id=f"rsp-{k}", src_addr=p.amplifier_addr, dst_addr=rsp_dst,
            protocol=UDP, dst_port=port, packet_count=rsp_pkts,
            byte_count=req_bytes * factor,
            start_time=rsp_start, end_time=ts[-1], packet_timestamps=ts,
            truth_label=LABEL_MALICIOUS))
    for f in flows:
        f.validate()
    return flows


def _gen_app_layer(p: AttackProfile, duration: float, rng, src_base: int,
                   t0: float) -> list[FlowRecord]:
    rate = p.base_session_rate * (p.multiplier if p.sub_mode == "session_flood" else 1.0)
    pkts = max(1, int(round(p.base_packets_per_flow *
                            (p.multiplier if p.sub_mode == "request_flood" else 1.0))))
    byte_w = p.bytes_per_packet * (p.multiplier if p.sub_mode == "asymmetric" else 1.0)
    flows: list[FlowRecord] = []

    def emit(bot, start):
        ts = _packet_times(rng, start, p.session_duration, pkts)
        flows.append(FlowRecord(
            flow_id=f"atk-{bot:x}-{len(flows)}", src_addr=bot,
            dst_addr=p.target_addr, protocol=p.protocol, dst_port=p.dst_port,
            packet_count=pkts, byte_count=pkts * byte_w, start_time=start,
            end_time=ts[-1], packet_timestamps=ts, truth_label=LABEL_MALICIOUS))

    for b in range(p.bot_count):
        bot = src_base + b
        if p.burst_size > 1:
            # bursty arrivals: Poisson burst events, a clump of sessions each
            burst_rate = rate / p.burst_size
            t = t0 + float(rng.exponential(1.0 / burst_rate))
            while t < t0 + duration:
                for k in range(p.burst_size):
                    start = t + k * p.burst_interval
                    if start < t0 + duration:
                        emit(bot, start)
                t += float(rng.exponential(1.0 / burst_rate))
        else:
            phase = float(rng.uniform(0.0, 1.0 / rate))
            t = t0 + phase
            while t < t0 + duration:
                emit(bot, t)
                t += 1.0 / rate
    if p.offered_rate > 0 and flows:
        total = sum(f.byte_count for f in flows)
        scale = p.offered_rate * duration / total
        flows = [replace(f, byte_count=f.byte_count * scale) for f in flows]
    for f in flows:
        f.validate()
    return flows


# -- CSV ingestion ---------------------------------------------------------

def load_flow_csv(path) -> list[FlowRecord]:
    """Parse the documented flow-record schema; packet timestamps are
    synthesized uniformly over [start_time, end_time]."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {','.join(CSV_HEADER)}")
        if [h.strip() for h in header] != CSV_HEADER:
            missing = set(CSV_HEADER) - {h.strip() for h in header}
            if missing:
                raise DataError(f"{path}: missing column(s) {sorted(missing)}")
            raise DataError(f"{path}: header {header} does not match schema {CSV_HEADER}")
        flows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                pkts = int(row[5])
                start, end = float(row[7]), float(row[8])
                ts = [float(t) for t in np.linspace(start, end, pkts)] if pkts else []
                rec = FlowRecord(
                    flow_id=row[0], src_addr=int(row[1]), dst_addr=int(row[2]),
                    protocol=row[3].strip().upper(), dst_port=int(row[4]),
                    packet_count=pkts, byte_count=float(row[6]),
                    start_time=start, end_time=end, packet_timestamps=ts,
                    truth_label=row[9].strip().lower())
                rec.validate()
            except (ValueError, OverflowError) as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
            flows.append(rec)
    return flows


def write_flow_csv(path, flows: list[FlowRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in flows:
            w.writerow([r.flow_id, r.src_addr, r.dst_addr, r.protocol, r.dst_port,
                        r.packet_count, repr(r.byte_count), repr(r.start_time),
                        repr(r.end_time), r.truth_label])
