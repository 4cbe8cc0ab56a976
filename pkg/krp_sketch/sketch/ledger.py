"""
Counters for random scalars drawn and multiply-adds performed.

Both counters are shared mutable state and are safe to increment from several
threads; the final totals do not depend on the order of the increments.
"""

import collections
import threading


class RngLedger:
    """
    Counts random scalars drawn, keyed by (context, mode).

    Counts only grow; `reset` is meant to be called between algorithm runs.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: collections.Counter = collections.Counter()

    def add(self, context: str, mode: int, count: int) -> None:
        """
        Records `count` scalars drawn for the stream labelled (context, mode).

        :param str context: stream context tag
        :param int mode: mode index of the stream
        :param int count: number of scalars drawn, must be nonnegative
        :rtype: None
        """
        if count < 0:
            raise ValueError("ledger increments must be nonnegative")
        with self._lock:
            self._counts[(context, mode)] += count

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def by_context(self) -> dict:
        """
        Totals per context tag.

        :rtype: dict
        :return: mapping of context tag to scalars drawn
        """
        totals: collections.Counter = collections.Counter()
        with self._lock:
            for (context, _), count in self._counts.items():
                totals[context] += count
        return dict(totals)

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


class FlopCounter:
    """
    Counts leading-order multiply-adds reported by the kernels, keyed by kernel name.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: collections.Counter = collections.Counter()

    def add(self, kernel: str, count: int) -> None:
        with self._lock:
            self._counts[kernel] += int(count)

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


def count(counter: FlopCounter | None, kernel: str, flops: int) -> None:
    """Adds to `counter` when one is supplied."""
    if counter is not None:
        counter.add(kernel, flops)
