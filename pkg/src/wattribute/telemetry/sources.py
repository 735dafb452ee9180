"""Unified entry point for telemetry streams."""

from __future__ import annotations

import os
from typing import Iterator

from wattribute.errors import ConfigError
from wattribute.telemetry.events import Event, SourceConfig
from wattribute.telemetry.trace import read_trace


def open_source(cfg: SourceConfig, *, process_sampler=None) -> Iterator[Event]:
    """Open a telemetry stream for the configured source.

    Replay and synthetic streams are deterministic; live streams merge a
    power poller and a process sampler (injectable for tests).
    """
    cfg.validate()
    if cfg.kind == "replay":
        if not os.path.exists(cfg.trace_path):
            raise ConfigError(f"trace file not found: {cfg.trace_path}")
        return read_trace(cfg.trace_path)
    if cfg.kind == "synthetic":
        return _open_synthetic(cfg)
    from wattribute.telemetry.live import LiveStream

    return iter(LiveStream(cfg, process_sampler=process_sampler))


def _open_synthetic(cfg: SourceConfig) -> Iterator[Event]:
    from wattribute import simkit

    if cfg.scenario_path:
        spec = simkit.load_scenario(cfg.scenario_path)
    else:
        spec = simkit.default_scenario(
            duration_s=cfg.duration_s,
            seed=cfg.seed,
            power_hz=cfg.power_hz,
            sample_period_s=cfg.sample_period_s,
        )
    return iter(simkit.generate(spec).events)
