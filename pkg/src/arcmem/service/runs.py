"""Pipeline run registry: one active run per series, with streamed events."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Iterator


class RunConflictError(Exception):
    code = "RUN_ACTIVE"


@dataclass
class RunHandle:
    run_id: str
    series: str
    season: int
    events: list[dict] = field(default_factory=list)
    done: bool = False
    error: str | None = None
    _condition: threading.Condition = field(default_factory=threading.Condition)

    def emit(self, event: dict) -> None:
        with self._condition:
            self.events.append(event)
            self._condition.notify_all()

    def finish(self, error: str | None = None) -> None:
        with self._condition:
            self.done = True
            self.error = error
            self._condition.notify_all()

    def stream(self, poll_timeout: float = 0.2) -> Iterator[dict]:
        """Yield every event in order, then stop once the run is done."""
        position = 0
        while True:
            with self._condition:
                while position >= len(self.events) and not self.done:
                    self._condition.wait(timeout=poll_timeout)
                chunk = self.events[position:]
                position += len(chunk)
                finished = self.done and position >= len(self.events)
            for event in chunk:
                yield event
            if finished:
                return

    def status(self) -> dict:
        return {
            "run_id": self.run_id,
            "series": self.series,
            "season": self.season,
            "events": len(self.events),
            "done": self.done,
            "error": self.error,
        }


class RunRegistry:
    def __init__(self):
        self._runs: dict[str, RunHandle] = {}
        self._lock = threading.Lock()

    def get(self, run_id: str) -> RunHandle | None:
        return self._runs.get(run_id)

    def start(self, series: str, season: int, work) -> RunHandle:
        """Run ``work(handle)`` on a thread; at most one live run per series."""
        with self._lock:
            for handle in self._runs.values():
                if handle.series == series and not handle.done:
                    raise RunConflictError(f"a pipeline run is already active for series {series!r}")
            handle = RunHandle(run_id=uuid.uuid4().hex, series=series, season=season)
            self._runs[handle.run_id] = handle

        def runner():
            try:
                work(handle)
            except Exception as exc:  # surfaced through the event stream
                handle.emit(
                    {
                        "event": "run_failed",
                        "error": {"code": getattr(exc, "code", "ERROR"), "message": str(exc)},
                    }
                )
                handle.finish(error=str(exc))
                return
            handle.emit({"event": "run_completed"})
            handle.finish()

        threading.Thread(target=runner, daemon=True).start()
        return handle
