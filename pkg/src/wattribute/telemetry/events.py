"""Telemetry event types and the counter-name vocabulary.

All timestamps are monotonic nanoseconds relative to the capture epoch of
the stream they belong to. Events are immutable values and safe to hand
between threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from wattribute.errors import ConfigError, ValidationError

# Canonical counter names. "cumulative" counters are non-decreasing and get
# differenced per interval; "gauge" counters are point-in-time levels carried
# at face value.
CUMULATIVE_FEATURES: tuple[str, ...] = (
    "cpu_time_ns",
    "disk_read_bytes",
    "disk_write_bytes",
    "net_rx_bytes",
    "net_tx_bytes",
    "ctx_switches",
    "syscalls",
)
GAUGE_FEATURES: tuple[str, ...] = ("mem_rss_bytes",)

# Display / trace order.
ALL_FEATURES: tuple[str, ...] = (
    "cpu_time_ns",
    "mem_rss_bytes",
    "disk_read_bytes",
    "disk_write_bytes",
    "net_rx_bytes",
    "net_tx_bytes",
    "ctx_switches",
    "syscalls",
)

POWER_URL_ENV = "WATTRIBUTE_POWER_URL"

SOURCE_KINDS = ("live", "replay", "synthetic")


@dataclass(frozen=True)
class ProcessSample:
    """One snapshot of a process's cumulative resource counters.

    Process identity is the (pid, start_id) pair; start_id discriminates
    PID reuse (typically the process start timestamp).
    """

    pid: int
    start_id: int
    timestamp: int
    name: str
    counters: dict[str, int | float] = field(default_factory=dict)


@dataclass(frozen=True)
class PowerReading:
    """One instantaneous node-level active-power measurement in watts."""

    timestamp: int
    watts: float

    def __post_init__(self):
        if not math.isfinite(self.watts):
            raise ValidationError(f"power reading is not finite: {self.watts!r}")
        if self.watts < 0:
            raise ValidationError(f"power reading is negative: {self.watts!r}")


Event = ProcessSample | PowerReading


def process_label(pid: int, start_id: int, name: str) -> str:
    """Stable display key for one process instance."""
    return f"{name}:{pid}:{start_id}"


@dataclass
class SourceConfig:
    """Where telemetry comes from and at what cadence.

    kind selects the backend: "replay" reads a trace file, "synthetic"
    generates a deterministic scenario, "live" polls a power endpoint and a
    process sampler. duration_s, seed and scenario_path only apply to the
    synthetic and live kinds.
    """

    kind: str
    power_endpoint: str | None = None
    power_hz: float = 4.0
    sample_period_s: float = 1.0
    trace_path: str | None = None
    duration_s: float = 10.0
    seed: int = 0
    scenario_path: str | None = None
    bearer_token: str | None = None

    def validate(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ConfigError(f"unknown source kind {self.kind!r}, expected one of {SOURCE_KINDS}")
        if self.power_hz < 1:
            raise ConfigError(f"power_hz must be >= 1, got {self.power_hz}")
        if self.sample_period_s <= 0:
            raise ConfigError(f"sample_period_s must be > 0, got {self.sample_period_s}")
        if self.kind == "replay" and not self.trace_path:
            raise ConfigError("replay source requires trace_path")
        if self.kind in ("synthetic", "live") and self.duration_s <= 0:
            raise ConfigError(f"duration_s must be > 0, got {self.duration_s}")

    def resolve_endpoint(self) -> str:
        """Endpoint from config, falling back to the environment."""
        endpoint = self.power_endpoint or os.environ.get(POWER_URL_ENV)
        if not endpoint:
            raise ConfigError(
                f"live source requires power_endpoint or the {POWER_URL_ENV} environment variable"
            )
        return endpoint
