"""Discrete-event simulation of roadside key donation to moving vehicles.

One certification authority (CA) serves a set of roadside devices (RSDs),
each connected to the CA by its own noise key-exchange line that fills a
key pool at the line's secure bit rate. Lane-embedded roadside key
providers (RSKPs) donate whole keys to vehicles passing over their pads via
a near-field link, one-time-pad encrypted with the vehicle's previous key.
A donation succeeds only if the pool holds a full key and the vehicle's
remaining time over the pad covers the transfer.

The event loop is strictly sequential and deterministic: events are
processed in (time, sequence) order and every random draw flows from the
scenario seed.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, InvalidParameterError, TopologyError
from .lifetime import secure_bit_rate
from .physics import KljnLineConfig, as_seed_sequence


class EventKind(str, Enum):
    VEHICLE_ARRIVAL = "vehicle-arrival"
    KEY_REQUEST = "key-request"
    POOL_REFILL = "pool-refill"
    DONATION_START = "donation-start"
    DONATION_COMPLETE = "donation-complete"
    KEY_EXPIRY = "key-expiry"
    DEPARTURE = "departure"


@dataclass(frozen=True)
class ScenarioEvent:
    """One row of the simulation event log."""

    time: float
    sequence: int
    kind: EventKind
    vehicle_id: int | None = None
    rsd_id: str | None = None
    lane: str | None = None
    detail: str = ""


@dataclass(frozen=True)
class Rskp:
    """Lane-embedded key provider pad, attached to exactly one RSD."""

    id: str
    rsd_id: str
    lane: str
    pad_length: float
    transfer_rate: float
    detector_latency: float = 0.0
    pad_position: float = 0.0
    line: KljnLineConfig | None = None


@dataclass(frozen=True)
class Rsd:
    """Roadside device with its own key-exchange line to the CA."""

    id: str
    line: KljnLineConfig
    high_speed_link: bool = True
    parallel_channels: int = 1
    rskps: tuple[Rskp, ...] = ()


@dataclass(frozen=True)
class Topology:
    """Validated network layout with per-unit secure bit rates."""

    rsds: tuple[Rsd, ...]
    kljn_endpoint: str = "rsd"
    gamma: float = 100.0

    def rsd_by_id(self, rsd_id: str) -> Rsd:
        for rsd in self.rsds:
            if rsd.id == rsd_id:
                return rsd
        raise TopologyError(f"unknown RSD id {rsd_id!r}")

    @property
    def all_rskps(self) -> tuple[Rskp, ...]:
        return tuple(r for rsd in self.rsds for r in rsd.rskps)

    @property
    def lanes(self) -> tuple[str, ...]:
        return tuple(r.lane for r in self.all_rskps)

    def secure_rate(self, rsd: Rsd, rskp: Rskp | None = None) -> float:
        """Secure bit rate of the pool-owning unit (the RSD's line by
        default, the RSKP's own line in 'rskp' endpoint mode)."""
        if self.kljn_endpoint == "rskp":
            if rskp is None or rskp.line is None:
                raise TopologyError("rskp endpoint mode needs a line per RSKP")
            return secure_bit_rate(
                rskp.line.noise_bandwidth, self.gamma, rsd.parallel_channels
            )
        return secure_bit_rate(
            rsd.line.noise_bandwidth, self.gamma, rsd.parallel_channels
        )


def _parse_line(d: dict, where: str) -> KljnLineConfig:
    if not isinstance(d, dict):
        raise TopologyError(f"{where}: line config must be an object")
    known = {"r_low", "r_high", "t_eff", "line_length", "wave_speed", "theta"}
    unknown = set(d) - known
    if unknown:
        raise TopologyError(f"{where}: unknown line field(s) {sorted(unknown)}")
    return KljnLineConfig(**d)


def build_topology(spec: dict, gamma: float = 100.0) -> Topology:
    """Build and validate a topology from its JSON-shaped description.

    Expected shape::

        {"kljn_endpoint": "rsd" | "rskp",
         "rsds":  [{"id", "line": {...}, "high_speed_link", "parallel_channels"}],
         "rskps": [{"id", "rsd", "lane", "pad_length_m", "transfer_rate_bps",
                    "detector_latency_s", "pad_position_m", "line": {...}}]}
    """
    if not isinstance(spec, dict):
        raise TopologyError("topology must be an object")
    endpoint = spec.get("kljn_endpoint", "rsd")
    if endpoint not in ("rsd", "rskp"):
        raise TopologyError("kljn_endpoint must be 'rsd' or 'rskp'")

    rsd_specs = spec.get("rsds", [])
    rskp_specs = spec.get("rskps", [])
    if not rsd_specs:
        raise TopologyError("topology needs at least one RSD")

    rskps_by_rsd: dict[str, list[Rskp]] = {}
    seen_rsd_ids = set()
    for rd in rsd_specs:
        rsd_id = rd.get("id")
        if not rsd_id:
            raise TopologyError("every RSD needs an 'id'")
        if rsd_id in seen_rsd_ids:
            raise TopologyError(f"duplicate RSD id {rsd_id!r}")
        seen_rsd_ids.add(rsd_id)
        rskps_by_rsd[rsd_id] = []

    seen_rskp_ids = set()
    seen_lanes = set()
    for kd in rskp_specs:
        rskp_id = kd.get("id")
        if not rskp_id:
            raise TopologyError("every RSKP needs an 'id'")
        if rskp_id in seen_rskp_ids:
            raise TopologyError(f"duplicate RSKP id {rskp_id!r}")
        seen_rskp_ids.add(rskp_id)
        owner = kd.get("rsd")
        if owner not in rskps_by_rsd:
            raise TopologyError(f"RSKP {rskp_id!r} references unknown RSD {owner!r}")
        lane = kd.get("lane")
        if not lane:
            raise TopologyError(f"RSKP {rskp_id!r} needs a 'lane'")
        if lane in seen_lanes:
            raise TopologyError(f"lane {lane!r} already has an RSKP pad")
        seen_lanes.add(lane)
        pad_length = float(kd.get("pad_length_m", 2.0))
        rate = float(kd.get("transfer_rate_bps", 1e6))
        latency = float(kd.get("detector_latency_s", 0.0))
        if pad_length <= 0:
            raise TopologyError(f"RSKP {rskp_id!r}: pad_length_m must be positive")
        if rate <= 0:
            raise TopologyError(f"RSKP {rskp_id!r}: transfer_rate_bps must be positive")
        if latency < 0:
            raise TopologyError(f"RSKP {rskp_id!r}: detector_latency_s must be >= 0")
        line = kd.get("line")
        if endpoint == "rskp" and line is None:
            raise TopologyError(
                f"RSKP {rskp_id!r}: missing line config (required in rskp endpoint mode)"
            )
        rskps_by_rsd[owner].append(
            Rskp(
                id=rskp_id,
                rsd_id=owner,
                lane=lane,
                pad_length=pad_length,
                transfer_rate=rate,
                detector_latency=latency,
                pad_position=float(kd.get("pad_position_m", 0.0)),
                line=None if line is None else _parse_line(line, f"rskp {rskp_id!r}"),
            )
        )

    rsds = []
    for rd in rsd_specs:
        rsd_id = rd["id"]
        line = rd.get("line")
        if line is None:
            raise TopologyError(f"RSD {rsd_id!r}: missing line config")
        channels = int(rd.get("parallel_channels", 1))
        if channels < 1:
            raise TopologyError(f"RSD {rsd_id!r}: parallel_channels must be >= 1")
        rsds.append(
            Rsd(
                id=rsd_id,
                line=_parse_line(line, f"rsd {rsd_id!r}"),
                high_speed_link=bool(rd.get("high_speed_link", True)),
                parallel_channels=channels,
                rskps=tuple(rskps_by_rsd[rsd_id]),
            )
        )

    return Topology(rsds=tuple(rsds), kljn_endpoint=endpoint, gamma=float(gamma))


@dataclass(frozen=True)
class TrafficModel:
    """Vehicle traffic on the lanes of the topology.

    Lanes are closed circuits of ``circuit_length`` meters: a vehicle keeps
    circulating (re-passing its lane's pad once per lap) until it departs.
    ``initial_vehicles_per_lane`` vehicles start at uniformly random
    positions at time zero; additional vehicles arrive per-lane as a Poisson
    stream at ``arrival_rate_per_lane`` and depart after an exponential
    dwell when ``mean_dwell_s`` is set. Each vehicle keeps one constant
    speed drawn uniformly from ``speed_range``.

    ``key_ttl_s`` is how long a donated key stays valid; 0 means keys expire
    immediately, i.e. saturated demand (a fresh key is requested on every
    pad crossing). ``provision_keys`` hands every registering vehicle a
    bootstrap key so donations can be encrypted from the start.
    """

    circuit_length: float = 9000.0
    arrival_rate_per_lane: float = 0.0
    speed_range: tuple[float, float] = (29.0, 31.0)
    initial_vehicles_per_lane: int = 0
    mean_dwell_s: float | None = None
    provision_keys: bool = True
    key_ttl_s: float = 0.0

    def __post_init__(self) -> None:
        if self.circuit_length <= 0:
            raise InvalidParameterError("circuit_length must be positive")
        if self.arrival_rate_per_lane < 0:
            raise InvalidParameterError("arrival_rate_per_lane must be >= 0")
        lo, hi = self.speed_range
        if lo <= 0 or hi < lo:
            raise InvalidParameterError("speed_range must satisfy 0 < lo <= hi")
        if self.initial_vehicles_per_lane < 0:
            raise InvalidParameterError("initial_vehicles_per_lane must be >= 0")
        if self.mean_dwell_s is not None and self.mean_dwell_s <= 0:
            raise InvalidParameterError("mean_dwell_s must be positive when given")
        if self.key_ttl_s < 0:
            raise InvalidParameterError("key_ttl_s must be >= 0")


@dataclass(frozen=True)
class ProtocolParams:
    """Key-exchange parameters shared by all lines of a scenario."""

    gamma: float = 100.0
    key_bits: int = 100

    def __post_init__(self) -> None:
        if self.gamma < 1:
            raise InvalidParameterError("gamma must be at least 1")
        if self.key_bits < 1:
            raise InvalidParameterError("key_bits must be at least 1")


@dataclass(frozen=True)
class PoolParams:
    """Key pool sizing; capacity defaults to 100 keys' worth of bits."""

    capacity_bits: int | None = None
    initial_fill: float = 0.0

    def __post_init__(self) -> None:
        if self.capacity_bits is not None and self.capacity_bits < 1:
            raise InvalidParameterError("capacity_bits must be positive")
        if not 0.0 <= self.initial_fill <= 1.0:
            raise InvalidParameterError("initial_fill must lie in [0, 1]")

    def capacity_for(self, key_bits: int) -> int:
        cap = 100 * key_bits if self.capacity_bits is None else self.capacity_bits
        if cap < key_bits:
            raise InvalidParameterError("pool capacity must hold at least one key")
        return cap


def donation_window(
    speed: float, pad_length: float, key_bits: int, rate: float
) -> bool:
    """Can a full key be transferred while the vehicle is over the pad?

    Feasible when ``pad_length / speed >= key_bits / rate``.
    """
    if speed <= 0:
        raise InvalidParameterError("speed must be positive")
    if pad_length < 0 or key_bits < 0:
        raise InvalidParameterError("pad_length and key_bits must be >= 0")
    if key_bits == 0:
        return True
    if rate <= 0:
        return False
    return pad_length / speed >= key_bits / rate


def detection_time(pad_entry_s: float, detector_latency_s: float) -> float:
    """When the lane detector reports a vehicle that entered the pad.

    Detection is perfect (no misses); the report lags pad entry by the
    detector latency.
    """
    if detector_latency_s < 0:
        raise InvalidParameterError("detector latency must be >= 0")
    return pad_entry_s + detector_latency_s


@dataclass
class Vehicle:
    """Mutable per-vehicle state tracked by the simulation."""

    id: int
    lane: str
    speed: float
    pos0: float
    t0: float
    arrival_time: float
    current_key: np.ndarray | None = None
    former_key: np.ndarray | None = None
    key_issued_at: float | None = None
    departed_at: float | None = None
    donated_bits: int = 0
    refresh_sum: float = 0.0
    refresh_count: int = 0
    refresh_max: float = 0.0

    def key_age(self, now: float) -> float | None:
        if self.current_key is None:
            return None
        return now - self.key_issued_at

    def position_at(self, now: float, circuit: float) -> float:
        return (self.pos0 + self.speed * (now - self.t0)) % circuit


@dataclass
class KeyPool:
    """Bit stock of one pool-owning unit, consumed in whole-key quanta."""

    unit_id: str
    rsd_id: str
    fill_rate: float
    capacity: int
    available: int
    generated: int
    pending: deque = field(default_factory=deque)
    depletion_episodes: int = 0


@dataclass
class RsdMetrics:
    donations: int = 0
    bits_donated: int = 0
    fail_pool_empty: int = 0
    fail_window_too_short: int = 0
    fail_no_former_key: int = 0
    depletion_episodes: int = 0
    max_load: int = 0
    pool_available_end: int = 0
    pool_generated: int = 0


@dataclass(frozen=True)
class DonationRecord:
    time: float
    vehicle_id: int
    rsd_id: str
    rskp_id: str
    lane: str
    ciphertext: np.ndarray
    new_key: np.ndarray
    former_key: np.ndarray


@dataclass
class NetworkMetrics:
    """Aggregated outcome of one scenario run."""

    duration_s: float
    vehicles_created: int
    max_concurrent_vehicles: int
    donation_success: int
    fail_pool_empty: int
    fail_window_too_short: int
    fail_no_former_key: int
    skipped_valid_key: int
    bits_donated: int
    mean_vehicle_rate_bps: float
    mean_refresh_interval_s: float
    max_refresh_interval_s: float
    per_rsd: dict[str, RsdMetrics]
    events: list[ScenarioEvent] | None = None
    donations: list[DonationRecord] | None = None

    @property
    def donation_attempts(self) -> int:
        return (
            self.donation_success
            + self.fail_pool_empty
            + self.fail_window_too_short
            + self.fail_no_former_key
        )


class _Engine:
    def __init__(
        self,
        topology: Topology,
        traffic: TrafficModel,
        duration_s: float,
        seed,
        protocol: ProtocolParams,
        pool_params: PoolParams,
        record_events: bool,
        record_donations: bool,
    ):
        if duration_s <= 0:
            raise InvalidParameterError("duration_s must be positive")
        self.topology = topology
        self.traffic = traffic
        self.duration = float(duration_s)
        self.protocol = protocol
        self.record_events = record_events
        self.record_donations = record_donations

        root = as_seed_sequence(seed)
        traffic_seed, provision_seed, keys_root = root.spawn(3)
        self.traffic_rng = np.random.default_rng(traffic_seed)
        self.provision_rng = np.random.default_rng(provision_seed)

        self.heap: list = []
        self.seq = 0
        self.log_seq = 0
        self.vehicles: dict[int, Vehicle] = {}
        self.next_vehicle_id = 0
        self.events: list[ScenarioEvent] = []
        self.donations: list[DonationRecord] = []
        self.skipped_valid_key = 0
        self.concurrent: dict[str, int] = {}
        self.rsd_metrics: dict[str, RsdMetrics] = {}
        self.max_concurrent_total = 0
        self.concurrent_total = 0

        self.lane_to_rskp: dict[str, Rskp] = {}
        self.rsd_of_rskp: dict[str, Rsd] = {}
        for rsd in topology.rsds:
            self.rsd_metrics[rsd.id] = RsdMetrics()
            self.concurrent[rsd.id] = 0
            for rskp in rsd.rskps:
                self.lane_to_rskp[rskp.lane] = rskp
                self.rsd_of_rskp[rskp.id] = rsd

        # One pool per owning unit; refills add whole keys.
        self.pools: dict[str, KeyPool] = {}
        self.key_rngs: dict[str, np.random.Generator] = {}
        key_bits = protocol.key_bits
        units: list[tuple[str, str, float]] = []
        if topology.kljn_endpoint == "rskp":
            for rsd in topology.rsds:
                for rskp in rsd.rskps:
                    units.append((rskp.id, rsd.id, topology.secure_rate(rsd, rskp)))
        else:
            for rsd in topology.rsds:
                units.append((rsd.id, rsd.id, topology.secure_rate(rsd)))
        unit_seeds = keys_root.spawn(len(units)) if units else []
        for (unit_id, rsd_id, rate), useed in zip(units, unit_seeds):
            capacity = pool_params.capacity_for(key_bits)
            initial = int(round(pool_params.initial_fill * capacity))
            self.pools[unit_id] = KeyPool(
                unit_id=unit_id,
                rsd_id=rsd_id,
                fill_rate=rate,
                capacity=capacity,
                available=initial,
                generated=initial,
            )
            self.key_rngs[unit_id] = np.random.default_rng(useed)
            self._push(key_bits / rate, EventKind.POOL_REFILL, (unit_id,))

        # Initial population, then the Poisson streams.
        for lane in topology.lanes:
            for _ in range(traffic.initial_vehicles_per_lane):
                self._push(0.0, EventKind.VEHICLE_ARRIVAL, (lane, "initial"))
        for lane in topology.lanes:
            if traffic.arrival_rate_per_lane > 0:
                gap = self.traffic_rng.exponential(1.0 / traffic.arrival_rate_per_lane)
                self._push(gap, EventKind.VEHICLE_ARRIVAL, (lane, "poisson"))

    # -- plumbing ---------------------------------------------------------

    def _push(self, time: float, kind: EventKind, payload, force: bool = False) -> None:
        if time > self.duration and not force:
            return
        heapq.heappush(self.heap, (time, self.seq, kind, payload))
        self.seq += 1

    def _log(self, time, kind, vehicle_id=None, rsd_id=None, lane=None, detail=""):
        if not self.record_events:
            return
        self.events.append(
            ScenarioEvent(time, self.log_seq, kind, vehicle_id, rsd_id, lane, detail)
        )
        self.log_seq += 1

    def _pool_for(self, rskp: Rskp) -> KeyPool:
        unit = rskp.id if self.topology.kljn_endpoint == "rskp" else rskp.rsd_id
        return self.pools[unit]

    # -- event handlers ---------------------------------------------------

    def _on_arrival(self, t: float, lane: str, source: str) -> None:
        if source == "poisson":
            gap = self.traffic_rng.exponential(1.0 / self.traffic.arrival_rate_per_lane)
            self._push(t + gap, EventKind.VEHICLE_ARRIVAL, (lane, "poisson"))

        lo, hi = self.traffic.speed_range
        speed = lo if lo == hi else float(self.traffic_rng.uniform(lo, hi))
        pos = (
            float(self.traffic_rng.uniform(0.0, self.traffic.circuit_length))
            if source == "initial"
            else 0.0
        )
        vid = self.next_vehicle_id
        self.next_vehicle_id += 1
        vehicle = Vehicle(id=vid, lane=lane, speed=speed, pos0=pos, t0=t, arrival_time=t)
        if self.traffic.provision_keys:
            vehicle.current_key = self.provision_rng.integers(
                0, 2, self.protocol.key_bits, dtype=np.uint8
            )
            vehicle.key_issued_at = t
        self.vehicles[vid] = vehicle

        rskp = self.lane_to_rskp[lane]
        self.concurrent[rskp.rsd_id] += 1
        self.concurrent_total += 1
        self.max_concurrent_total = max(self.max_concurrent_total, self.concurrent_total)
        rm = self.rsd_metrics[rskp.rsd_id]
        rm.max_load = max(rm.max_load, self.concurrent[rskp.rsd_id])

        if self.traffic.mean_dwell_s is not None:
            dwell = self.traffic_rng.exponential(self.traffic.mean_dwell_s)
            self._push(t + dwell, EventKind.DEPARTURE, (vid,))

        self._log(t, EventKind.VEHICLE_ARRIVAL, vid, rskp.rsd_id, lane, source)
        self._schedule_crossing(t, vehicle)

    def _schedule_crossing(self, now: float, vehicle: Vehicle, after_entry=None) -> None:
        rskp = self.lane_to_rskp[vehicle.lane]
        circuit = self.traffic.circuit_length
        if after_entry is None:
            gap = (rskp.pad_position - vehicle.position_at(now, circuit)) % circuit
            entry = now + gap / vehicle.speed
        else:
            entry = after_entry + circuit / vehicle.speed
        request_t = detection_time(entry, rskp.detector_latency)
        self._push(request_t, EventKind.KEY_REQUEST, (vehicle.id, rskp.id, entry))

    def _fail(self, t: float, vehicle: Vehicle, rskp: Rskp, cause: str) -> None:
        rm = self.rsd_metrics[rskp.rsd_id]
        if cause == "pool-empty":
            rm.fail_pool_empty += 1
        elif cause == "window-too-short":
            rm.fail_window_too_short += 1
        else:
            rm.fail_no_former_key += 1
        self._log(
            t, EventKind.KEY_REQUEST, vehicle.id, rskp.rsd_id, rskp.lane, f"fail:{cause}"
        )

    def _on_key_request(self, t: float, vid: int, rskp_id: str, entry: float) -> None:
        vehicle = self.vehicles[vid]
        if vehicle.departed_at is not None:
            return
        rskp = self.lane_to_rskp[vehicle.lane]
        self._schedule_crossing(t, vehicle, after_entry=entry)

        age = vehicle.key_age(t)
        if age is not None and age < self.traffic.key_ttl_s:
            self.skipped_valid_key += 1
            self._log(
                t, EventKind.KEY_REQUEST, vid, rskp.rsd_id, rskp.lane, "skipped-valid-key"
            )
            return

        pool = self._pool_for(rskp)
        key_bits = self.protocol.key_bits
        exit_t = entry + rskp.pad_length / vehicle.speed
        latest_start = exit_t - key_bits / rskp.transfer_rate
        if t > latest_start:
            self._fail(t, vehicle, rskp, "window-too-short")
            return
        if vehicle.current_key is None:
            self._fail(t, vehicle, rskp, "no-former-key")
            return
        if pool.available >= key_bits:
            self._log(t, EventKind.KEY_REQUEST, vid, rskp.rsd_id, rskp.lane, "granted")
            self._start_donation(t, vehicle, rskp, pool)
        else:
            if not pool.pending:
                pool.depletion_episodes += 1
            pool.pending.append((vid, rskp.id, latest_start))
            self._log(t, EventKind.KEY_REQUEST, vid, rskp.rsd_id, rskp.lane, "queued")

    def _start_donation(self, t: float, vehicle: Vehicle, rskp: Rskp, pool: KeyPool) -> None:
        key_bits = self.protocol.key_bits
        pool.available -= key_bits
        new_key = self.key_rngs[pool.unit_id].integers(0, 2, key_bits, dtype=np.uint8)
        ciphertext = np.bitwise_xor(new_key, vehicle.current_key)
        self._log(t, EventKind.DONATION_START, vehicle.id, rskp.rsd_id, rskp.lane)
        self._push(
            t + key_bits / rskp.transfer_rate,
            EventKind.DONATION_COMPLETE,
            (vehicle.id, rskp.id, ciphertext, new_key),
            force=True,
        )

    def _on_donation_complete(self, t, vid, rskp_id, ciphertext, new_key) -> None:
        vehicle = self.vehicles[vid]
        rskp = self.lane_to_rskp[vehicle.lane]
        former = vehicle.current_key
        decrypted = np.bitwise_xor(ciphertext, former)
        vehicle.former_key = former
        vehicle.current_key = decrypted
        interval = t - vehicle.key_issued_at
        vehicle.refresh_sum += interval
        vehicle.refresh_count += 1
        vehicle.refresh_max = max(vehicle.refresh_max, interval)
        vehicle.key_issued_at = t
        vehicle.donated_bits += self.protocol.key_bits

        rm = self.rsd_metrics[rskp.rsd_id]
        rm.donations += 1
        rm.bits_donated += self.protocol.key_bits
        if self.record_donations:
            self.donations.append(
                DonationRecord(t, vid, rskp.rsd_id, rskp.id, rskp.lane,
                               ciphertext, new_key, former)
            )
        if self.traffic.key_ttl_s > 0 and self.record_events:
            self._push(t + self.traffic.key_ttl_s, EventKind.KEY_EXPIRY, (vid, t))
        self._log(t, EventKind.DONATION_COMPLETE, vid, rskp.rsd_id, rskp.lane)

    def _on_pool_refill(self, t: float, unit_id: str) -> None:
        pool = self.pools[unit_id]
        key_bits = self.protocol.key_bits
        pool.generated += key_bits
        pool.available = min(pool.capacity, pool.available + key_bits)
        self._log(
            t, EventKind.POOL_REFILL, None, pool.rsd_id, None, f"available={pool.available}"
        )
        while pool.pending:
            vid, rskp_id, latest_start = pool.pending[0]
            vehicle = self.vehicles[vid]
            rskp = self.lane_to_rskp[vehicle.lane]
            if vehicle.departed_at is not None or t > latest_start:
                pool.pending.popleft()
                self._fail(t, vehicle, rskp, "pool-empty")
            elif pool.available >= key_bits:
                pool.pending.popleft()
                self._start_donation(t, vehicle, rskp, pool)
            else:
                break
        self._push(t + key_bits / pool.fill_rate, EventKind.POOL_REFILL, (unit_id,))

    def _on_key_expiry(self, t: float, vid: int, issued_at: float) -> None:
        vehicle = self.vehicles[vid]
        if vehicle.key_issued_at == issued_at:
            rskp = self.lane_to_rskp[vehicle.lane]
            self._log(t, EventKind.KEY_EXPIRY, vid, rskp.rsd_id, vehicle.lane)

    def _on_departure(self, t: float, vid: int) -> None:
        vehicle = self.vehicles[vid]
        if vehicle.departed_at is not None:
            return
        vehicle.departed_at = t
        rskp = self.lane_to_rskp[vehicle.lane]
        self.concurrent[rskp.rsd_id] -= 1
        self.concurrent_total -= 1
        self._log(t, EventKind.DEPARTURE, vid, rskp.rsd_id, vehicle.lane)

    # -- main loop --------------------------------------------------------

    def run(self) -> NetworkMetrics:
        dispatch = {
            EventKind.VEHICLE_ARRIVAL: self._on_arrival,
            EventKind.KEY_REQUEST: self._on_key_request,
            EventKind.POOL_REFILL: self._on_pool_refill,
            EventKind.DONATION_COMPLETE: self._on_donation_complete,
            EventKind.KEY_EXPIRY: self._on_key_expiry,
            EventKind.DEPARTURE: self._on_departure,
        }
        while self.heap and self.heap[0][0] <= self.duration:
            time, _, kind, payload = heapq.heappop(self.heap)
            dispatch[kind](time, *payload)
        # Transfers already in flight at the horizon were causally committed:
        # let them land so the pool bookkeeping stays conserved.
        while self.heap:
            time, _, kind, payload = heapq.heappop(self.heap)
            if kind is EventKind.DONATION_COMPLETE:
                self._on_donation_complete(time, *payload)
        for pool in self.pools.values():
            while pool.pending:
                vid, rskp_id, _ = pool.pending.popleft()
                vehicle = self.vehicles[vid]
                self._fail(self.duration, vehicle, self.lane_to_rskp[vehicle.lane],
                           "pool-empty")
        return self._metrics()

    def _metrics(self) -> NetworkMetrics:
        rates = []
        refresh_sum = refresh_count = 0
        refresh_max = 0.0
        for v in self.vehicles.values():
            leave = v.departed_at if v.departed_at is not None else self.duration
            presence = leave - v.arrival_time
            if presence > 0:
                rates.append(v.donated_bits / presence)
            refresh_sum += v.refresh_sum
            refresh_count += v.refresh_count
            refresh_max = max(refresh_max, v.refresh_max)
        for pool in self.pools.values():
            rm = self.rsd_metrics[pool.rsd_id]
            rm.depletion_episodes += pool.depletion_episodes
            rm.pool_available_end += pool.available
            rm.pool_generated += pool.generated
        total = lambda attr: sum(getattr(m, attr) for m in self.rsd_metrics.values())
        return NetworkMetrics(
            duration_s=self.duration,
            vehicles_created=len(self.vehicles),
            max_concurrent_vehicles=self.max_concurrent_total,
            donation_success=total("donations"),
            fail_pool_empty=total("fail_pool_empty"),
            fail_window_too_short=total("fail_window_too_short"),
            fail_no_former_key=total("fail_no_former_key"),
            skipped_valid_key=self.skipped_valid_key,
            bits_donated=total("bits_donated"),
            mean_vehicle_rate_bps=float(np.mean(rates)) if rates else 0.0,
            mean_refresh_interval_s=refresh_sum / refresh_count if refresh_count else 0.0,
            max_refresh_interval_s=refresh_max,
            per_rsd=self.rsd_metrics,
            events=self.events if self.record_events else None,
            donations=self.donations if self.record_donations else None,
        )


def run_scenario(
    topology,
    traffic: TrafficModel,
    duration_s: float,
    seed,
    protocol: ProtocolParams = ProtocolParams(),
    pool: PoolParams = PoolParams(),
    record_events: bool = False,
    record_donations: bool = False,
) -> NetworkMetrics:
    """Run one deterministic scenario and aggregate its metrics.

    ``topology`` may be a validated Topology or its JSON-shaped dict (built
    with the protocol's gamma). Donation failures are metrics, not errors.
    """
    if isinstance(topology, dict):
        topology = build_topology(topology, gamma=protocol.gamma)
    engine = _Engine(
        topology, traffic, duration_s, seed, protocol, pool,
        record_events, record_donations,
    )
    return engine.run()


@dataclass(frozen=True)
class Scenario:
    """A complete scenario: topology, traffic, protocol, pool, horizon, seed."""

    topology: Topology
    traffic: TrafficModel
    protocol: ProtocolParams
    pool: PoolParams
    duration_s: float
    seed: int
    record_events: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        """Parse the scenario JSON object, naming the offending field on error."""
        if not isinstance(d, dict):
            raise ConfigError("scenario: expected a JSON object")
        unknown = set(d) - {
            "topology", "traffic", "protocol", "pool",
            "duration_s", "seed", "record_events",
        }
        if unknown:
            raise ConfigError(f"scenario: unknown field(s) {sorted(unknown)}")
        if "topology" not in d:
            raise ConfigError("scenario: missing required field 'topology'")
        if "duration_s" not in d:
            raise ConfigError("scenario: missing required field 'duration_s'")

        def section(name, maker, known):
            raw = d.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"scenario: field {name!r} must be an object")
            bad = set(raw) - known
            if bad:
                raise ConfigError(f"scenario: unknown field(s) in {name!r}: {sorted(bad)}")
            try:
                return maker(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"scenario: invalid {name!r}: {exc}") from exc

        protocol = section(
            "protocol",
            lambda raw: ProtocolParams(**raw),
            {"gamma", "key_bits"},
        )
        traffic = section(
            "traffic",
            lambda raw: TrafficModel(
                **{**raw, "speed_range": tuple(raw.get("speed_range", (29.0, 31.0)))}
            ),
            {
                "circuit_length", "arrival_rate_per_lane", "speed_range",
                "initial_vehicles_per_lane", "mean_dwell_s", "provision_keys",
                "key_ttl_s",
            },
        )
        pool = section(
            "pool",
            lambda raw: PoolParams(**raw),
            {"capacity_bits", "initial_fill"},
        )
        try:
            topology = build_topology(d["topology"], gamma=protocol.gamma)
        except TopologyError as exc:
            raise ConfigError(f"scenario: invalid 'topology': {exc}") from exc
        duration = d["duration_s"]
        if not isinstance(duration, (int, float)) or duration <= 0:
            raise ConfigError("scenario: 'duration_s' must be a positive number")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("scenario: 'seed' must be a non-negative integer")
        return cls(
            topology=topology,
            traffic=traffic,
            protocol=protocol,
            pool=pool,
            duration_s=float(duration),
            seed=seed,
            record_events=bool(d.get("record_events", False)),
        )

    def run(self, seed=None, record_events=None, record_donations=False) -> NetworkMetrics:
        return run_scenario(
            self.topology,
            self.traffic,
            self.duration_s,
            self.seed if seed is None else seed,
            protocol=self.protocol,
            pool=self.pool,
            record_events=self.record_events if record_events is None else record_events,
            record_donations=record_donations,
        )


def make_homogeneous_scenario(
    vehicle_count: int = 1000,
    duration_s: float = 1e5,
    seed: int = 1,
    *,
    lanes: int = 1,
    circuit_length: float = 9000.0,
    speed_range: tuple[float, float] = (29.0, 31.0),
    key_bits: int = 100,
    gamma: float = 100.0,
    pool_capacity_keys: int = 2000,
    initial_fill: float = 1.0,
    key_ttl_s: float = 0.0,
    line: dict | None = None,
) -> dict:
    """JSON-shaped single-RSD scenario with a fixed circulating population.

    The default line (1 km at one tenth of the no-wave bandwidth budget)
    yields a secure bit rate of 100 bit/s, i.e. one 100-bit key per second,
    shared by ``vehicle_count`` vehicles under saturated demand.
    """
    if lanes < 1 or vehicle_count < lanes or vehicle_count % lanes:
        raise InvalidParameterError("vehicle_count must be a positive multiple of lanes")
    line = line or {}
    return {
        "duration_s": duration_s,
        "seed": seed,
        "protocol": {"gamma": gamma, "key_bits": key_bits},
        "topology": {
            "kljn_endpoint": "rsd",
            "rsds": [{"id": "rsd-1", "line": line}],
            "rskps": [
                {
                    "id": f"rskp-{i + 1}",
                    "rsd": "rsd-1",
                    "lane": f"lane-{i + 1}",
                    "pad_length_m": 2.0,
                    "transfer_rate_bps": 1e6,
                }
                for i in range(lanes)
            ],
        },
        "traffic": {
            "circuit_length": circuit_length,
            "speed_range": list(speed_range),
            "initial_vehicles_per_lane": vehicle_count // lanes,
            "provision_keys": True,
            "key_ttl_s": key_ttl_s,
        },
        "pool": {"capacity_bits": pool_capacity_keys * key_bits, "initial_fill": initial_fill},
    }
