"""Live telemetry: power-endpoint polling and an optional psutil process sampler.

The power endpoint contract is a plain HTTP GET returning
{"power_w": <float>}, optionally authenticated with a static bearer token.
Readings are stamped at receive time with the local monotonic clock; meter
and host clocks are not otherwise synchronized.

A LiveStream runs the poller and the process sampler as independent producer
threads and merges their events into a single timestamp-ordered stream using
a watermark: an event is released once every still-running producer has
advanced past its timestamp. Missed poll ticks are skipped, never back-filled.
"""

from __future__ import annotations

import heapq
import logging
import threading
import time
from typing import Iterator

import requests

from wattribute.errors import PowerFetchError, ValidationError
from wattribute.telemetry.events import (
    CUMULATIVE_FEATURES,
    Event,
    GAUGE_FEATURES,
    PowerReading,
    ProcessSample,
    SourceConfig,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 2.0


def poll_power(
    endpoint: str,
    *,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    bearer_token: str | None = None,
    session: requests.Session | None = None,
) -> PowerReading:
    """Fetch one instantaneous power value, stamped at receive time.

    Raises PowerFetchError on transport problems, non-success status or an
    unusable body; raises ValidationError if the value itself is invalid
    (negative or non-finite). Retry policy is the caller's business.
    """
    headers = {}
    if bearer_token:
        headers["Authorization"] = f"Bearer {bearer_token}"
    getter = session.get if session is not None else requests.get
    try:
        resp = getter(endpoint, timeout=timeout_s, headers=headers)
    except requests.RequestException as exc:
        raise PowerFetchError(f"power endpoint unreachable: {exc}") from exc
    if not 200 <= resp.status_code < 300:
        raise PowerFetchError(f"power endpoint returned HTTP {resp.status_code}")
    try:
        body = resp.json()
        watts = float(body["power_w"])
    except (ValueError, KeyError, TypeError) as exc:
        raise PowerFetchError(f"unparseable power response: {exc}") from exc
    return PowerReading(timestamp=time.monotonic_ns(), watts=watts)


class PsutilProcessSampler:
    """Best-effort live sampler built on psutil.

    Per-process network bytes and syscall counts are not exposed by psutil
    and are reported as zero. Processes that vanish or deny access mid-sweep
    are silently skipped.
    """

    def __init__(self):
        import psutil  # optional adapter; imported on use

        self._psutil = psutil

    def sample(self, timestamp_ns: int) -> list[ProcessSample]:
        psutil = self._psutil
        samples = []
        for proc in psutil.process_iter():
            try:
                with proc.oneshot():
                    cpu = proc.cpu_times()
                    mem = proc.memory_info()
                    ctx = proc.num_ctx_switches()
                    try:
                        io = proc.io_counters()
                        read_bytes, write_bytes = io.read_bytes, io.write_bytes
                    except (psutil.AccessDenied, AttributeError, OSError):
                        read_bytes = write_bytes = 0
                    counters = {
                        "cpu_time_ns": int((cpu.user + cpu.system) * 1e9),
                        "mem_rss_bytes": int(mem.rss),
                        "disk_read_bytes": int(read_bytes),
                        "disk_write_bytes": int(write_bytes),
                        "net_rx_bytes": 0,
                        "net_tx_bytes": 0,
                        "ctx_switches": int(ctx.voluntary + ctx.involuntary),
                        "syscalls": 0,
                    }
                    samples.append(
                        ProcessSample(
                            pid=proc.pid,
                            start_id=int(proc.create_time() * 1e9),
                            timestamp=timestamp_ns,
                            name=proc.name(),
                            counters=counters,
                        )
                    )
            except (psutil.NoSuchProcess, psutil.AccessDenied, psutil.ZombieProcess):
                continue
        samples.sort(key=lambda s: (s.pid, s.start_id))
        return samples


class _WatermarkMerge:
    """Order-preserving merge of concurrently produced event streams.

    Producers push timestamped events and advance their own watermark every
    tick (even on failure), so the consumer can release the heap head as soon
    as no producer can still emit anything earlier.
    """

    def __init__(self, n_producers: int):
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._last = [-1] * n_producers
        self._done = [False] * n_producers
        self._cond = threading.Condition()

    def push(self, producer: int, event: Event) -> None:
        with self._cond:
            self._seq += 1
            heapq.heappush(self._heap, (event.timestamp, self._seq, event))
            self._last[producer] = max(self._last[producer], event.timestamp)
            self._cond.notify_all()

    def advance(self, producer: int, timestamp: int) -> None:
        with self._cond:
            self._last[producer] = max(self._last[producer], timestamp)
            self._cond.notify_all()

    def finish(self, producer: int) -> None:
        with self._cond:
            self._done[producer] = True
            self._cond.notify_all()

    def _watermark(self) -> int | None:
        live = [self._last[i] for i in range(len(self._last)) if not self._done[i]]
        return min(live) if live else None

    def pop(self) -> Event | None:
        """Next ordered event, or None when all producers finished and drained."""
        with self._cond:
            while True:
                if self._heap:
                    ts = self._heap[0][0]
                    mark = self._watermark()
                    if mark is None or ts <= mark:
                        return heapq.heappop(self._heap)[2]
                elif all(self._done):
                    return None
                self._cond.wait(timeout=0.1)


class LiveStream:
    """Single-consumer ordered stream over live producers. Iterate or close()."""

    def __init__(self, cfg: SourceConfig, process_sampler=None):
        cfg.validate()
        self._cfg = cfg
        self._endpoint = cfg.resolve_endpoint()
        if process_sampler is None:
            process_sampler = PsutilProcessSampler()
        self._sampler = process_sampler
        self._merge = _WatermarkMerge(2)
        self._stop = threading.Event()
        self._epoch = time.monotonic_ns()
        self.poll_errors = 0
        self._threads = [
            threading.Thread(target=self._run_power, name="wattribute-power", daemon=True),
            threading.Thread(target=self._run_sampler, name="wattribute-sampler", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def _now(self) -> int:
        return time.monotonic_ns() - self._epoch

    def _ticks(self, period_s: float):
        """Yield tick indices on the period grid, skipping missed ones."""
        period_ns = int(period_s * 1e9)
        deadline = int(self._cfg.duration_s * 1e9)
        k = 0
        while not self._stop.is_set():
            target = k * period_ns
            if target >= deadline:
                return
            delay = (target - self._now()) / 1e9
            if delay > 0 and self._stop.wait(timeout=delay):
                return
            yield k
            # Skip any tick whose slot already passed.
            k = max(k + 1, self._now() // period_ns + (1 if self._now() % period_ns else 0))

    def _run_power(self):
        session = requests.Session()
        try:
            for _ in self._ticks(1.0 / self._cfg.power_hz):
                try:
                    reading = poll_power(
                        self._endpoint,
                        bearer_token=self._cfg.bearer_token,
                        session=session,
                        timeout_s=min(DEFAULT_TIMEOUT_S, 1.0 / self._cfg.power_hz),
                    )
                except (PowerFetchError, ValidationError) as exc:
                    self.poll_errors += 1
                    log.warning("power poll failed: %s", exc)
                    self._merge.advance(0, self._now())
                    continue
                rebased = PowerReading(timestamp=reading.timestamp - self._epoch, watts=reading.watts)
                self._merge.push(0, rebased)
        finally:
            session.close()
            self._merge.finish(0)

    def _run_sampler(self):
        try:
            for _ in self._ticks(self._cfg.sample_period_s):
                now = self._now()
                try:
                    samples = self._sampler.sample(now)
                except Exception as exc:  # sampler is an external adapter
                    log.warning("process sampler failed: %s", exc)
                    self._merge.advance(1, now)
                    continue
                for sample in samples:
                    self._merge.push(1, sample)
                self._merge.advance(1, now)
        finally:
            self._merge.finish(1)

    def close(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=5.0)

    def __iter__(self) -> Iterator[Event]:
        while True:
            event = self._merge.pop()
            if event is None:
                return
            yield event

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
