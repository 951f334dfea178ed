"""Edge agent: traffic monitoring, local SOM filtering with a protection-mode
state machine, policy application, and window reports for the controller."""
from __future__ import annotations

from dataclasses import dataclass, field

from .features import (FeatureMode, MODE_DIM, NormalizationSpec, WindowStats,
                       extract_one, window_stats)
from .som import MALICIOUS, SomHyperParams, SomMap, init_map
from .traffic import FlowRecord

NORMAL = "normal"
PROTECTION = "protection"

FORWARD = "forward"
DROP = "drop"
BLOCK = "block"

R_BENIGN = "benign"
R_SOM_MALICIOUS = "som_malicious"
R_POLICY_DROP = "policy_drop"
R_POLICY_BLOCK = "policy_block"


@dataclass
class Verdict:
    flow_id: str
    decision: str
    decided_at: float
    reason: str
    classified: bool = False
    predicted: str | None = None


@dataclass
class DestinationStats:
    flows: int = 0
    bytes: float = 0.0
    packets: int = 0
    protocol_counts: dict = field(default_factory=dict)
    port_counts: dict = field(default_factory=dict)
    src_addrs: set = field(default_factory=set)


@dataclass
class TrafficReport:
    agent_id: str
    window_start: float
    window_length: float
    flow_count: int
    byte_count: float
    protocol_counts: dict
    port_buckets: dict                      # port // 1024 -> flow count
    src_range: tuple | None                 # (lo, hi) of observed sources
    per_destination: dict                   # dst_addr -> DestinationStats


@dataclass
class AgentConfig:
    window_length: float = 5.0
    quiet_period: float = 30.0
    local_trigger_count: int = 5      # malicious winners in one window that arm protection locally
    drop_packets_max: int = 3         # SYN-flood shape: tiny flows ...
    drop_flows_min: int = 100         # ... from a source opening many of them
    block_packets_min: int = 1000     # heavy flows get their source blocked
    feature_mode: FeatureMode = FeatureMode.SOURCE_SITE
    norm_spec: NormalizationSpec = field(default_factory=NormalizationSpec)
    hyperparams: SomHyperParams = field(default_factory=SomHyperParams)


class Agent:
    """One sequential edge-agent state machine; no shared state across agents."""

    def __init__(self, agent_id: str, soms: dict[FeatureMode, SomMap],
                 config: AgentConfig | None = None, log: list | None = None,
                 filter_always_on: bool = False):
        self.agent_id = agent_id
        self.config = config or AgentConfig()
        self.soms = dict(soms)
        self.feature_mode = self.config.feature_mode
        if self.feature_mode not in self.soms:
            raise ValueError(f"agent {agent_id}: no SOM for mode {self.feature_mode.value}")
        self.mode = PROTECTION if filter_always_on else NORMAL
        self.filter_always_on = filter_always_on
        self.active_policy = None
        self.last_malicious_seen: float | None = None
        self.blocked_sources: set[int] = set()
        self.flows_processed = 0
        self.flows_forwarded = 0
        self.flows_dropped = 0
        self.flows_blocked = 0
        self.work_units = 0
        self.log = log if log is not None else []
        self._window_flows: list[FlowRecord] = []
        self._window_stats: WindowStats | None = None

    @property
    def som(self) -> SomMap:
        return self.soms[self.feature_mode]

    def _log(self, t: float, kind: str, **fields) -> None:
        self.log.append({"t": t, "agent": self.agent_id, "kind": kind, **fields})

    def _enter_protection(self, now: float, why: str) -> None:
        if self.mode != PROTECTION:
            self.mode = PROTECTION
            self._log(now, "mode", mode=PROTECTION, why=why)

    def _policy_active(self, now: float) -> bool:
        return self.active_policy is not None and self.active_policy.expires_at > now

    # -- main ingest path --------------------------------------------------

    def ingest(self, flows: list[FlowRecord], now: float) -> tuple[list[Verdict], int]:
        """Process one window's flows.

        Normal mode forwards everything but still trains the SOM from the
        monitored traffic; protection mode classifies each flow and enforces
        drop/block.  Returns the verdicts and the work units spent
        (vectors classified + vectors trained).
        """
        cfg = self.config
        stats = window_stats(flows, now - cfg.window_length, cfg.window_length)
        self._window_flows = list(flows)
        self._window_stats = stats
        verdicts: list[Verdict] = []
        work = 0
        malicious_in_window = 0
        for flow in flows:
            self.flows_processed += 1
            vec = extract_one(flow, self.feature_mode, cfg.norm_spec, stats)
            if self.mode == PROTECTION and flow.src_addr in self.blocked_sources:
                verdicts.append(Verdict(flow.flow_id, BLOCK, now, R_POLICY_BLOCK))
                self.flows_blocked += 1
                continue
            if self.mode == PROTECTION and self.som.is_labeled:
                predicted = self.som.classify(vec)
                work += 1
                if predicted == MALICIOUS:
                    self.last_malicious_seen = now
                    verdicts.append(self._mitigate(flow, stats, now, predicted))
                else:
                    verdicts.append(Verdict(flow.flow_id, FORWARD, now, R_BENIGN,
                                            classified=True, predicted=predicted))
                    self.flows_forwarded += 1
            else:
                verdicts.append(Verdict(flow.flow_id, FORWARD, now, R_BENIGN))
                self.flows_forwarded += 1
                predicted = None
            # continuous training in both modes, labeled by the map's own verdict
            train_label = predicted
            if train_label is None and self.som.is_labeled:
                train_label = str(self.som.labels[self.som.find_winner(vec)])
            self.som.train_step(vec, cfg.hyperparams, label=train_label)
            work += 1
            if self.mode == NORMAL and train_label == MALICIOUS:
                malicious_in_window += 1
                if malicious_in_window >= cfg.local_trigger_count:
                    self.last_malicious_seen = now
                    self._enter_protection(now, "local_trigger")
        self.work_units += work
        return verdicts, work

    def _mitigate(self, flow: FlowRecord, stats: WindowStats, now: float,
                  predicted: str) -> Verdict:
        cfg = self.config
        policy = self.active_policy if self._policy_active(now) else None
        decision, reason = DROP, R_SOM_MALICIOUS
        if policy is not None:
            per_src = stats.flows_per_source.get(flow.src_addr, 0)
            if flow.packet_count >= cfg.block_packets_min or policy.mitigation == BLOCK:
                decision, reason = BLOCK, R_POLICY_BLOCK
                self.blocked_sources.add(flow.src_addr)
            else:
                decision, reason = DROP, R_POLICY_DROP
        if decision == BLOCK:
            self.flows_blocked += 1
        else:
            self.flows_dropped += 1
        return Verdict(flow.flow_id, decision, now, reason,
                       classified=True, predicted=predicted)

    def observe(self, flows: list[FlowRecord], now: float) -> WindowStats:
        """Record a window for reporting without filtering or training
        (centralized scheme: the traffic is forwarded wholesale)."""
        stats = window_stats(flows, now - self.config.window_length,
                             self.config.window_length)
        self._window_flows = list(flows)
        self._window_stats = stats
        self.flows_processed += len(flows)
        return stats

    # -- reporting / control -----------------------------------------------

    def make_report(self, window: WindowStats | None = None) -> TrafficReport:
        """Traffic statistics for the last ingested window."""
        stats = window or self._window_stats
        if stats is None:
            stats = WindowStats(0.0, self.config.window_length)
        flows = self._window_flows
        proto: dict[str, int] = {}
        buckets: dict[int, int] = {}
        per_dst: dict[int, DestinationStats] = {}
        total_bytes = 0.0
        srcs = []
        for f in flows:
            proto[f.protocol] = proto.get(f.protocol, 0) + 1
            buckets[f.dst_port // 1024] = buckets.get(f.dst_port // 1024, 0) + 1
            total_bytes += f.byte_count
            srcs.append(f.src_addr)
            d = per_dst.setdefault(f.dst_addr, DestinationStats())
            d.flows += 1
            d.bytes += f.byte_count
            d.packets += f.packet_count
            d.protocol_counts[f.protocol] = d.protocol_counts.get(f.protocol, 0) + 1
            d.port_counts[f.dst_port] = d.port_counts.get(f.dst_port, 0) + 1
            d.src_addrs.add(f.src_addr)
        return TrafficReport(
            agent_id=self.agent_id,
            window_start=stats.window_start,
            window_length=stats.window_length,
            flow_count=len(flows),
            byte_count=total_bytes,
            protocol_counts=proto,
            port_buckets=buckets,
            src_range=(min(srcs), max(srcs)) if srcs else None,
            per_destination=per_dst,
        )

    def apply_policy(self, policy, now: float) -> None:
        """Install a controller directive: switch the feature tuple, arm the
        mitigation table, and activate protection."""
        if self.agent_id not in policy.addressed_agents:
            raise ValueError(
                f"policy {policy.policy_id} is addressed to {policy.addressed_agents}, "
                f"not agent {self.agent_id}")
        mode = policy.required_features
        if mode not in self.soms:
            hp = self.config.hyperparams
            self.soms[mode] = init_map(self.som.width, self.som.height,
                                       MODE_DIM[mode], hp.rng_seed)
        self.feature_mode = mode
        self.active_policy = policy
        self._enter_protection(now, "policy")
        self._log(now, "policy_applied", policy_id=policy.policy_id,
                  mitigation=policy.mitigation, features=mode.value)

    def tick(self, now: float) -> None:
        """Deactivate protection after a quiet period with no malicious vectors
        and no unexpired policy."""
        if self.filter_always_on:
            return
        if self.active_policy is not None and self.active_policy.expires_at <= now:
            self.active_policy = None
            self.blocked_sources.clear()
        if self.mode == PROTECTION and not self._policy_active(now):
            quiet = (self.last_malicious_seen is None or
                     now - self.last_malicious_seen > self.config.quiet_period)
            if quiet:
                self.mode = NORMAL
                self._log(now, "mode", mode=NORMAL, why="quiet_period")
