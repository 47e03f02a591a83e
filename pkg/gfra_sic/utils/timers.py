import time
import logging
from typing import Dict, Iterable, Optional

logger = logging.getLogger(__name__)


class PhaseTimer:
    """Wall-clock timer for one named phase of a run cell.

    `pending` holds the time since the last report; `total` keeps growing for
    the lifetime of the timer.
    """

    def __init__(self, name: str):
        self.name = name
        self.pending = 0.0
        self.total = 0.0
        self._start: Optional[float] = None

    def __enter__(self):
        assert self._start is None, f"timer {self.name} is already running"
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self._start
        self._start = None
        self.pending += elapsed
        self.total += elapsed
        return False


class Timers:
    """Named phase timers of a run cell, created on first use."""

    def __init__(self):
        self._timers: Dict[str, PhaseTimer] = {}

    def __call__(self, name: str) -> PhaseTimer:
        if name not in self._timers:
            self._timers[name] = PhaseTimer(name)
        return self._timers[name]

    def total(self, names: Optional[Iterable[str]] = None) -> float:
        """Lifetime seconds summed over the named timers; unknown names count as 0."""
        if names is None:
            names = self._timers.keys()
        return sum(self._timers[n].total for n in names if n in self._timers)

    def report(self) -> Optional[str]:
        """Pending milliseconds per timer, or None if nothing ran since the last report."""
        lines = []
        for name, timer in self._timers.items():
            if timer.pending > 0.0:
                lines.append("    {}: {:.2f}".format((name + " ").ljust(48, "."), timer.pending * 1000.0))
            timer.pending = 0.0
        return "time (ms):\n" + "\n".join(lines) if lines else None

    def log(self, prefix: str = ""):
        output_string = self.report()
        if output_string is not None:
            logger.info(f"{prefix}{output_string}")
