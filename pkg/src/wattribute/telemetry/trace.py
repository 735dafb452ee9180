"""JSON-lines trace files.

Line 1 is the header object {"format":"wattribute-trace","version":1}; every
following line is one event, either

    {"t":<ns>,"kind":"proc","pid":...,"start_id":...,"name":"...","counters":{...}}
    {"t":<ns>,"kind":"power","watts":<float>}

UTF-8, LF line endings. Events must be in non-decreasing timestamp order;
the reader enforces this so replay always yields an ordered stream. Writing
then replaying then writing again is byte-identical.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator

from wattribute.errors import TraceParseError, TraceWriteError, ValidationError
from wattribute.telemetry.events import Event, PowerReading, ProcessSample

TRACE_FORMAT = "wattribute-trace"
TRACE_VERSION = 1

_HEADER = {"format": TRACE_FORMAT, "version": TRACE_VERSION}


def _dumps(obj) -> str:
    # Compact separators; key order is the dict insertion order, which we keep
    # canonical so round-trips are byte-identical.
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def event_to_line(event: Event) -> str:
    if isinstance(event, ProcessSample):
        return _dumps(
            {
                "t": event.timestamp,
                "kind": "proc",
                "pid": event.pid,
                "start_id": event.start_id,
                "name": event.name,
                "counters": event.counters,
            }
        )
    if isinstance(event, PowerReading):
        return _dumps({"t": event.timestamp, "kind": "power", "watts": event.watts})
    raise TypeError(f"not a telemetry event: {event!r}")


def write_trace(events: Iterable[Event], path: str) -> int:
    """Write events to a trace file, returning the number of records written."""
    written = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dumps(_HEADER))
            fh.write("\n")
            for event in events:
                fh.write(event_to_line(event))
                fh.write("\n")
                written += 1
    except OSError as exc:
        raise TraceWriteError(f"failed writing {path}: {exc}", records_written=written) from exc
    return written


def _parse_event(obj: dict, line_number: int) -> Event:
    kind = obj.get("kind")
    try:
        if kind == "power":
            return PowerReading(timestamp=int(obj["t"]), watts=float(obj["watts"]))
        if kind == "proc":
            counters = obj["counters"]
            if not isinstance(counters, dict):
                raise TraceParseError("counters is not an object", line_number)
            return ProcessSample(
                pid=int(obj["pid"]),
                start_id=int(obj["start_id"]),
                timestamp=int(obj["t"]),
                name=str(obj["name"]),
                counters=counters,
            )
    except ValidationError as exc:
        raise TraceParseError(str(exc), line_number) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceParseError(f"bad event record: {exc}", line_number) from exc
    raise TraceParseError(f"unknown event kind {kind!r}", line_number)


def read_trace_lines(fh: IO[str]) -> Iterator[Event]:
    header_line = fh.readline()
    if not header_line:
        raise TraceParseError("empty file, missing header", 1)
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"bad header: {exc}", 1) from exc
    if not isinstance(header, dict) or header.get("format") != TRACE_FORMAT:
        raise TraceParseError(f"not a {TRACE_FORMAT} file", 1)
    if header.get("version") != TRACE_VERSION:
        raise TraceParseError(f"unsupported trace version {header.get('version')!r}", 1)

    last_ts = None
    for line_number, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"bad JSON: {exc}", line_number) from exc
        event = _parse_event(obj, line_number)
        if last_ts is not None and event.timestamp < last_ts:
            raise TraceParseError(
                f"timestamp {event.timestamp} goes backwards (previous {last_ts})", line_number
            )
        last_ts = event.timestamp
        yield event


def read_trace(path: str) -> Iterator[Event]:
    """Replay a trace file as an ordered event stream. Deterministic."""
    with open(path, "r", encoding="utf-8") as fh:
        yield from read_trace_lines(fh)
