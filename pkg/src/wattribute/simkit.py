"""Deterministic workload and power generator with exact per-process ground truth.

A scenario describes processes as phase schedules (compute / idle /
transition) with per-feature counter rates, plus a true wattage per raw
counter unit, a true baseline and Gaussian measurement noise on the power
signal only. generate() turns that into the same event stream a live node
would produce, together with the noiseless per-interval per-process energy,
so fitted models can be checked against a known answer.

Counter sweeps land just before each interval boundary so that consecutive
deltas line up with the interval whose power they explain. Power is sampled
on the 1/power_hz grid; ground-truth energies use the same sample grid,
which makes per-interval energy conservation exact up to float rounding.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field, replace

import numpy as np

from wattribute.errors import ConfigError, ValidationError
from wattribute.telemetry.events import (
    ALL_FEATURES,
    CUMULATIVE_FEATURES,
    Event,
    GAUGE_FEATURES,
    PowerReading,
    ProcessSample,
    process_label,
)

PHASE_KINDS = ("compute", "idle", "transition")

SCENARIO_FORMAT = "wattribute-scenario"
TRUTH_FORMAT = "wattribute-truth"
FILE_VERSION = 1

# Sweeps are stamped this far before the interval boundary they close.
SWEEP_LEAD_NS = 1_000_000


@dataclass(frozen=True)
class PhaseSpec:
    """One schedule segment.

    rates maps feature name to units/second for cumulative counters and to
    the held level for gauges. Transition phases ignore their own rates and
    ramp linearly from the previous phase's rates to the next phase's.
    """

    kind: str
    duration_s: float
    rates: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ProcessSpec:
    name: str
    pid: int
    phases: tuple[PhaseSpec, ...]
    start_id: int = 1


@dataclass(frozen=True)
class ScenarioSpec:
    duration_s: float
    processes: tuple[ProcessSpec, ...]
    watts_per_unit: dict[str, float]
    baseline_w: float
    noise_w: float = 0.0
    seed: int = 0
    power_hz: float = 4.0
    sample_period_s: float = 1.0


def validate_scenario(spec: ScenarioSpec) -> None:
    if spec.duration_s <= 0:
        raise ValidationError(f"duration_s must be > 0, got {spec.duration_s}")
    if spec.baseline_w < 0:
        raise ValidationError(f"baseline_w must be >= 0, got {spec.baseline_w}")
    if spec.noise_w < 0:
        raise ValidationError(f"noise_w must be >= 0, got {spec.noise_w}")
    if spec.power_hz < 1 or spec.sample_period_s <= 0:
        raise ValidationError("power_hz must be >= 1 and sample_period_s > 0")
    for name, watts in spec.watts_per_unit.items():
        if name not in ALL_FEATURES:
            raise ValidationError(f"watts_per_unit references unknown feature {name!r}")
        if not np.isfinite(watts):
            raise ValidationError(f"watts_per_unit[{name!r}] is not finite")
    seen_pids = set()
    for proc in spec.processes:
        if (proc.pid, proc.start_id) in seen_pids:
            raise ValidationError(f"duplicate process identity {(proc.pid, proc.start_id)}")
        seen_pids.add((proc.pid, proc.start_id))
        total = 0.0
        for phase in proc.phases:
            if phase.kind not in PHASE_KINDS:
                raise ValidationError(f"{proc.name}: unknown phase kind {phase.kind!r}")
            if phase.duration_s <= 0:
                raise ValidationError(f"{proc.name}: phase duration must be > 0")
            for fname, rate in phase.rates.items():
                if fname not in ALL_FEATURES:
                    raise ValidationError(f"{proc.name}: unknown feature {fname!r} in rates")
                if rate < 0:
                    raise ValidationError(f"{proc.name}: rate for {fname!r} is negative")
            total += phase.duration_s
        if total + 1e-9 < spec.duration_s:
            raise ValidationError(
                f"{proc.name}: schedule covers {total}s but scenario lasts {spec.duration_s}s"
            )


class _RateTrack:
    """Piecewise-linear per-feature rate function for one process."""

    def __init__(self, proc: ProcessSpec, duration_s: float):
        segments = []  # (t0, t1, kind, rates0, rates1)
        t = 0.0
        phases = proc.phases
        for i, phase in enumerate(phases):
            t0, t1 = t, t + phase.duration_s
            if phase.kind == "transition":
                r_prev = phases[i - 1].rates if i > 0 else {}
                r_next = phases[i + 1].rates if i + 1 < len(phases) else {}
                segments.append((t0, t1, phase.kind, r_prev, r_next))
            else:
                segments.append((t0, t1, phase.kind, phase.rates, phase.rates))
            t = t1
            if t >= duration_s:
                break
        self.segments = segments
        self.starts = [seg[0] for seg in segments]
        self.features = sorted({f for seg in segments for f in (*seg[3], *seg[4])})
        self._integral_at_start = self._prefix_integrals()

    def _segment_at(self, t: float):
        idx = bisect.bisect_right(self.starts, t) - 1
        idx = max(0, min(idx, len(self.segments) - 1))
        return self.segments[idx]

    def phase_kind_at(self, t: float) -> str:
        return self._segment_at(t)[2]

    def rate(self, feature: str, t: float) -> float:
        t0, t1, _, r0, r1 = self._segment_at(t)
        a = r0.get(feature, 0.0)
        b = r1.get(feature, 0.0)
        if a == b:
            return a
        frac = min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        return a + (b - a) * frac

    def _prefix_integrals(self) -> list[dict[str, float]]:
        acc = {f: 0.0 for f in self.features}
        out = [dict(acc)]
        for t0, t1, _, r0, r1 in self.segments:
            dt = t1 - t0
            for f in self.features:
                acc[f] += 0.5 * (r0.get(f, 0.0) + r1.get(f, 0.0)) * dt
            out.append(dict(acc))
        return out

    def integral(self, feature: str, t: float) -> float:
        """Exact integral of the rate from 0 to t (trapezoid on linear parts)."""
        idx = bisect.bisect_right(self.starts, t) - 1
        idx = max(0, min(idx, len(self.segments) - 1))
        t0, t1, _, r0, r1 = self.segments[idx]
        tt = min(max(t, t0), t1)
        base = self._integral_at_start[idx].get(feature, 0.0)
        ra = r0.get(feature, 0.0)
        rb = self.rate(feature, tt)
        return base + 0.5 * (ra + rb) * (tt - t0)


@dataclass(frozen=True)
class TruthInterval:
    t: int
    t_start_ns: int
    t_end_ns: int
    phase: str
    per_process_j: dict[str, float]
    baseline_j: float
    total_j: float


@dataclass(frozen=True)
class GroundTruth:
    period_s: float
    baseline_w: float
    watts_per_unit: dict[str, float]
    intervals: tuple[TruthInterval, ...]


@dataclass(frozen=True)
class SimResult:
    events: tuple[Event, ...]
    truth: GroundTruth


def _interval_phase(tracks: dict[str, _RateTrack], t_mid: float) -> str:
    kinds = {track.phase_kind_at(t_mid) for track in tracks.values()}
    if "transition" in kinds:
        return "transition"
    if "compute" in kinds:
        return "compute"
    return "idle"


def generate(spec: ScenarioSpec) -> SimResult:
    """Produce the ordered event stream and the noiseless per-interval truth."""
    validate_scenario(spec)
    rng = np.random.default_rng(spec.seed)

    period_ns = int(round(spec.sample_period_s * 1e9))
    n_intervals = int(spec.duration_s / spec.sample_period_s + 1e-9)
    n_power = int(spec.duration_s * spec.power_hz + 1e-9)

    tracks = {process_label(p.pid, p.start_id, p.name): _RateTrack(p, spec.duration_s) for p in spec.processes}
    procs = list(spec.processes)

    def contribution_w(proc: ProcessSpec, t: float) -> float:
        track = tracks[process_label(proc.pid, proc.start_id, proc.name)]
        total = 0.0
        for fname, watts in spec.watts_per_unit.items():
            if watts == 0.0:
                continue
            total += watts * track.rate(fname, t)
        return total

    events: list[Event] = []
    # (interval, label) -> list of sampled contribution watts
    contrib_samples: dict[int, dict[str, list[float]]] = {
        i: {process_label(p.pid, p.start_id, p.name): [] for p in procs} for i in range(n_intervals)
    }

    for j in range(n_power):
        t_ns = round(j * 1e9 / spec.power_hz)
        t_s = t_ns / 1e9
        idx = t_ns // period_ns
        contribs = [contribution_w(p, t_s) for p in procs]
        watts = spec.baseline_w + sum(contribs)
        if spec.noise_w > 0:
            watts += spec.noise_w * rng.standard_normal()
        watts = max(watts, 0.0)
        events.append(PowerReading(timestamp=int(t_ns), watts=float(watts)))
        if idx < n_intervals:
            for p, c in zip(procs, contribs):
                contrib_samples[idx][process_label(p.pid, p.start_id, p.name)].append(c)

    for i in range(n_intervals):
        sweep_ns = (i + 1) * period_ns - SWEEP_LEAD_NS
        t_s = sweep_ns / 1e9
        for p in procs:
            track = tracks[process_label(p.pid, p.start_id, p.name)]
            counters: dict[str, int | float] = {}
            for fname in ALL_FEATURES:
                if fname in GAUGE_FEATURES:
                    counters[fname] = int(round(track.rate(fname, t_s)))
                else:
                    counters[fname] = int(round(track.integral(fname, t_s)))
            events.append(
                ProcessSample(
                    pid=p.pid,
                    start_id=p.start_id,
                    timestamp=int(sweep_ns),
                    name=p.name,
                    counters=counters,
                )
            )

    events.sort(key=lambda e: e.timestamp)

    truth_intervals = []
    baseline_j = spec.baseline_w * spec.sample_period_s
    for i in range(n_intervals):
        per_process = {}
        for label, samples in contrib_samples[i].items():
            mean_w = sum(samples) / len(samples) if samples else 0.0
            per_process[label] = mean_w * spec.sample_period_s
        total = baseline_j + sum(per_process.values())
        truth_intervals.append(
            TruthInterval(
                t=i,
                t_start_ns=i * period_ns,
                t_end_ns=(i + 1) * period_ns,
                phase=_interval_phase(tracks, (i + 0.5) * spec.sample_period_s),
                per_process_j=per_process,
                baseline_j=baseline_j,
                total_j=total,
            )
        )

    truth = GroundTruth(
        period_s=spec.sample_period_s,
        baseline_w=spec.baseline_w,
        watts_per_unit=dict(spec.watts_per_unit),
        intervals=tuple(truth_intervals),
    )
    return SimResult(events=tuple(events), truth=truth)


# ---------------------------------------------------------------------------
# Scenario / truth files


def scenario_to_obj(spec: ScenarioSpec) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "version": FILE_VERSION,
        "duration_s": spec.duration_s,
        "seed": spec.seed,
        "power_hz": spec.power_hz,
        "sample_period_s": spec.sample_period_s,
        "baseline_w": spec.baseline_w,
        "noise_w": spec.noise_w,
        "watts_per_unit": spec.watts_per_unit,
        "processes": [
            {
                "name": p.name,
                "pid": p.pid,
                "start_id": p.start_id,
                "phases": [
                    {"kind": ph.kind, "duration_s": ph.duration_s, "rates": ph.rates}
                    for ph in p.phases
                ],
            }
            for p in spec.processes
        ],
    }


def scenario_from_obj(obj: dict) -> ScenarioSpec:
    if obj.get("format") != SCENARIO_FORMAT:
        raise ConfigError(f"not a {SCENARIO_FORMAT} file")
    if obj.get("version") != FILE_VERSION:
        raise ConfigError(f"unsupported scenario version {obj.get('version')!r}")
    try:
        processes = tuple(
            ProcessSpec(
                name=p["name"],
                pid=int(p["pid"]),
                start_id=int(p.get("start_id", 1)),
                phases=tuple(
                    PhaseSpec(
                        kind=ph["kind"],
                        duration_s=float(ph["duration_s"]),
                        rates={k: float(v) for k, v in ph.get("rates", {}).items()},
                    )
                    for ph in p["phases"]
                ),
            )
            for p in obj["processes"]
        )
        spec = ScenarioSpec(
            duration_s=float(obj["duration_s"]),
            processes=processes,
            watts_per_unit={k: float(v) for k, v in obj["watts_per_unit"].items()},
            baseline_w=float(obj["baseline_w"]),
            noise_w=float(obj.get("noise_w", 0.0)),
            seed=int(obj.get("seed", 0)),
            power_hz=float(obj.get("power_hz", 4.0)),
            sample_period_s=float(obj.get("sample_period_s", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario file: {exc}") from exc
    validate_scenario(spec)
    return spec


def save_scenario(spec: ScenarioSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scenario_to_obj(spec), fh, indent=2)
        fh.write("\n")


def load_scenario(path: str) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_obj(json.load(fh))


def truth_to_obj(truth: GroundTruth) -> dict:
    return {
        "format": TRUTH_FORMAT,
        "version": FILE_VERSION,
        "period_s": truth.period_s,
        "baseline_w": truth.baseline_w,
        "watts_per_unit": truth.watts_per_unit,
        "intervals": [
            {
                "t": iv.t,
                "t_start_ns": iv.t_start_ns,
                "t_end_ns": iv.t_end_ns,
                "phase": iv.phase,
                "per_process_j": iv.per_process_j,
                "baseline_j": iv.baseline_j,
                "total_j": iv.total_j,
            }
            for iv in truth.intervals
        ],
    }


def truth_from_obj(obj: dict) -> GroundTruth:
    if obj.get("format") != TRUTH_FORMAT:
        raise ConfigError(f"not a {TRUTH_FORMAT} file")
    return GroundTruth(
        period_s=float(obj["period_s"]),
        baseline_w=float(obj["baseline_w"]),
        watts_per_unit={k: float(v) for k, v in obj["watts_per_unit"].items()},
        intervals=tuple(
            TruthInterval(
                t=int(iv["t"]),
                t_start_ns=int(iv["t_start_ns"]),
                t_end_ns=int(iv["t_end_ns"]),
                phase=str(iv["phase"]),
                per_process_j={k: float(v) for k, v in iv["per_process_j"].items()},
                baseline_j=float(iv["baseline_j"]),
                total_j=float(iv["total_j"]),
            )
            for iv in obj["intervals"]
        ),
    )


def save_ground_truth(truth: GroundTruth, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth_to_obj(truth), fh, indent=2)
        fh.write("\n")


def load_ground_truth(path: str) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        return truth_from_obj(json.load(fh))


# ---------------------------------------------------------------------------
# Bundled scenario


def _cycles(*phases: PhaseSpec, repeat: int) -> tuple[PhaseSpec, ...]:
    return tuple(phases) * repeat


def default_scenario(
    duration_s: float = 600.0,
    seed: int = 7,
    power_hz: float = 4.0,
    sample_period_s: float = 1.0,
) -> ScenarioSpec:
    """Five staggered processes driving cpu, disk-read and context-switch load.

    Three features carry real wattage; memory, syscalls and network wiggle
    without contributing, so screening and sparsity both have work to do.
    The schedules are offset so the three active features are not collinear
    across intervals.
    """
    idle = PhaseSpec("idle", 1.0, {})

    turbine = ProcessSpec(
        name="turbine",
        pid=1001,
        phases=_cycles(
            PhaseSpec("idle", 12.0, {}),
            PhaseSpec("transition", 3.0, {}),
            PhaseSpec("compute", 22.0, {"cpu_time_ns": 1.6e9}),
            PhaseSpec("transition", 3.0, {}),
            repeat=15,
        ),
    )
    scrubber = ProcessSpec(
        name="scrubber",
        pid=1002,
        phases=(PhaseSpec("idle", 7.0, {}),)
        + _cycles(
            PhaseSpec("compute", 18.0, {"disk_read_bytes": 5.5e8}),
            PhaseSpec("transition", 4.0, {}),
            PhaseSpec("idle", 14.0, {}),
            PhaseSpec("transition", 4.0, {}),
            repeat=15,
        ),
    )
    router = ProcessSpec(
        name="router",
        pid=1003,
        phases=_cycles(
            PhaseSpec("idle", 20.0, {}),
            PhaseSpec("transition", 4.0, {}),
            PhaseSpec("compute", 20.0, {"ctx_switches": 1.5e5}),
            PhaseSpec("transition", 4.0, {}),
            repeat=13,
        ),
    )
    mixer = ProcessSpec(
        name="mixer",
        pid=1004,
        phases=(PhaseSpec("idle", 11.0, {}),)
        + _cycles(
            PhaseSpec("compute", 16.0, {"cpu_time_ns": 5.0e8, "disk_read_bytes": 2.0e8}),
            PhaseSpec("transition", 4.0, {}),
            PhaseSpec("idle", 32.0, {}),
            PhaseSpec("transition", 4.0, {}),
            repeat=11,
        ),
    )
    # Constant low cpu; memory level and syscall rate alternate slowly and
    # carry no wattage.
    logger_phases = []
    for k in range(12):
        level = 2.5e8 if k % 2 == 0 else 3.5e8
        sys_rate = 2.0e3 if k % 2 == 0 else 4.0e3
        logger_phases.append(
            PhaseSpec(
                "compute",
                50.0,
                {
                    "cpu_time_ns": 1.2e8,
                    "mem_rss_bytes": level,
                    "syscalls": sys_rate,
                    "net_rx_bytes": 1.0e4,
                },
            )
        )
    logger = ProcessSpec(name="logger", pid=1005, phases=tuple(logger_phases))

    del idle
    return ScenarioSpec(
        duration_s=duration_s,
        processes=(turbine, scrubber, router, mixer, logger),
        watts_per_unit={
            "cpu_time_ns": 2.5e-8,
            "disk_read_bytes": 6.0e-8,
            "ctx_switches": 2.0e-4,
        },
        baseline_w=60.0,
        noise_w=2.4,
        seed=seed,
        power_hz=power_hz,
        sample_period_s=sample_period_s,
    )
