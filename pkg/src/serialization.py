"""CSV and JSON formats for event logs and moment curves."""
import csv
import io
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, Optional, Sequence, Union

from . import __version__
from .core_model import Event, EventKind, EventLog, ModelParams
from .errors import ParameterError
from .moments import MomentCurve

EVENT_FIELDS = ("time", "kind", "mark", "intensity_before", "intensity_after")
PathLike = Union[str, Path, None]


def _num(x: float) -> str:
    return repr(float(x))


@contextmanager
def _open_out(path: PathLike) -> Iterator[IO[str]]:
    if path is None or str(path) == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def event_log_to_csv(log: EventLog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENT_FIELDS)
    for e in log.events:
        writer.writerow(
            [_num(e.time), e.kind.value, _num(e.mark), _num(e.intensity_before), _num(e.intensity_after)]
        )
    return buf.getvalue()


def write_event_log_csv(log: EventLog, path: PathLike = None) -> None:
    with _open_out(path) as fh:
        fh.write(event_log_to_csv(log))


def _parse_event(row: dict, lineno: int) -> Event:
    try:
        return Event(
            float(row["time"]),
            EventKind(row["kind"]),
            float(row["mark"]),
            float(row["intensity_before"]),
            float(row["intensity_after"]),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ParameterError(f"bad event row {lineno}: {e}") from e


def event_log_from_csv(text: str, end_time: float) -> EventLog:
    """Parse the CSV schema; the end time is not part of it and must be given."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != EVENT_FIELDS:
        raise ParameterError(f"expected header {','.join(EVENT_FIELDS)}, got {reader.fieldnames}")
    return EventLog(tuple(_parse_event(row, i) for i, row in enumerate(reader, start=2)), end_time)


def read_event_log_csv(path: Union[str, Path], end_time: float) -> EventLog:
    return event_log_from_csv(Path(path).read_text(), end_time)


def event_log_to_dict(
    log: EventLog, params: Optional[ModelParams] = None, seed: Optional[int] = None, method: Optional[str] = None
) -> dict:
    return {
        "version": __version__,
        "seed": seed,
        "method": method,
        "params": params.to_dict() if params is not None else None,
        "end_time": log.end_time,
        "events": [
            {
                "time": e.time,
                "kind": e.kind.value,
                "mark": e.mark,
                "intensity_before": e.intensity_before,
                "intensity_after": e.intensity_after,
            }
            for e in log.events
        ],
    }


def write_event_log_json(
    log: EventLog,
    path: PathLike = None,
    params: Optional[ModelParams] = None,
    seed: Optional[int] = None,
    method: Optional[str] = None,
) -> None:
    with _open_out(path) as fh:
        json.dump(event_log_to_dict(log, params, seed, method), fh, indent=2)
        fh.write("\n")


def event_log_from_dict(data: dict) -> EventLog:
    if "events" not in data or "end_time" not in data:
        raise ParameterError("event log JSON needs 'events' and 'end_time'")
    events = tuple(_parse_event(row, i) for i, row in enumerate(data["events"]))
    return EventLog(events, float(data["end_time"]))


def read_event_log_json(path: Union[str, Path]) -> EventLog:
    return event_log_from_dict(json.loads(Path(path).read_text()))


def moment_curves_to_csv(curves: Sequence[MomentCurve]) -> str:
    """One row per time: t, theta_1, ..., theta_K."""
    if not curves:
        raise ParameterError("no moment curves to write")
    times = curves[0].times
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"theta_{c.order}" for c in curves])
    for j, t in enumerate(times):
        writer.writerow([_num(t)] + [_num(c.values[j]) for c in curves])
    return buf.getvalue()


def write_moment_curves_csv(curves: Sequence[MomentCurve], path: PathLike = None) -> None:
    with _open_out(path) as fh:
        fh.write(moment_curves_to_csv(curves))
