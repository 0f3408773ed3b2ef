"""Deterministic discrete-event engine.

Events are totally ordered by ``(time, seq)`` where ``seq`` is assigned in
schedule-call order, so simultaneous events are delivered in the order they
were scheduled.  Handlers may schedule new events at the current clock time
(immediate replies); scheduling strictly in the past raises ``PastEvent``.

Randomness never enters the event loop; any random choices belong to
scenario construction, keyed by the run seed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


class PastEvent(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True)
class Event:
    time: float
    seq: int
    target: str
    payload: Any

    def order_key(self) -> tuple[float, int]:
        return (self.time, self.seq)


@dataclass
class RunConfig:
    """Per-run parameters: seed, horizon, and start-time offset."""

    seed: int = 0
    horizon: float = 14400.0
    epoch_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


Handler = Callable[["Engine", Event], None]


class Engine:
    """Single-threaded event queue with registered actor handlers.

    Handlers are looked up by event target; an optional ``default_handler``
    receives events whose target has no registration.
    """

    def __init__(self, default_handler: Optional[Handler] = None):
        self.clock = 0.0
        self._next_seq = 0
        self._heap: list[tuple[float, int, Event]] = []
        self._handlers: dict[str, Handler] = {}
        self._default_handler = default_handler
        self.processed = 0

    def register(self, target: str, handler: Handler) -> None:
        self._handlers[target] = handler

    def schedule(self, time: float, target: str, payload: Any) -> Event:
        if time < self.clock:
            raise PastEvent(
                f"cannot schedule at t={time} before clock t={self.clock}"
            )
        event = Event(time, self._next_seq, target, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (event.time, event.seq, event))
        return event

    def run_until(self, t_end: float) -> int:
        """Deliver every event with time <= t_end; returns the count.

        The clock finishes at exactly ``t_end`` even if the queue empties
        earlier; events beyond ``t_end`` stay queued.
        """
        if t_end < self.clock:
            raise PastEvent(f"cannot run backwards to t={t_end}")
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            _, _, event = heapq.heappop(self._heap)
            self.clock = event.time
            handler = self._handlers.get(event.target, self._default_handler)
            if handler is not None:
                handler(self, event)
            count += 1
        self.clock = t_end
        self.processed += count
        return count

    def pending(self) -> int:
        return len(self._heap)
