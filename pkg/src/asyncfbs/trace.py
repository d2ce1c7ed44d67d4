"""Event traces of asynchronous runs and their on-disk layout.

A trace directory holds three files:

``trace.csv``
    one row per event, columns ``event_kind, sim_time, agent_id, k,
    block_checksum``; floats are written with 17 significant digits.
``iterates.bin``
    the iterate history ``x_0..x_K`` as little-endian float64, one row per
    iterate, no header.  The row length is ``sum(dims)`` from ``trace.json``.
``trace.json``
    run metadata: block sizes, ``eta``, ``beta``, ``gamma``, update mode,
    start mode, algorithm label, thinning stride and iterate count.

Event semantics (``k`` is the coordinator clock when the event happened):

* ``read`` -- the coordinator snapshots ``x_k`` for the agent; checksum is
  the sum of the agent's block of ``x_k``.
* ``agent_compute`` -- the agent finished its local solve; checksum is the
  sum of ``z^i``.
* ``write_receive`` -- ``z^i`` entered the write buffer.
* ``coordinator_compute`` -- ``x_{k+1}`` was formed from the agent's value;
  checksum is the sum of block ``i`` of ``x_{k+1}``.  ``agent_id = -1`` marks
  a synchronous step that consumed every agent at once.
* ``prime`` -- a first-round value was staged into ``z`` without advancing
  the clock (primed start only).
* ``guard`` -- the starvation guard overrode the pull policy or held the
  compute activity back for the named agent.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import TraceFormatError

EVENT_KINDS = ("read", "agent_compute", "write_receive", "coordinator_compute", "prime", "guard")
CSV_COLUMNS = ("event_kind", "sim_time", "agent_id", "k", "block_checksum")


class TraceEvent(NamedTuple):
    kind: str
    sim_time: float
    agent: int
    k: int
    checksum: float = 0.0


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class Trace:
    events: list
    iterates: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.config["dims"])

    @property
    def stride(self) -> int:
        return int(self.config.get("stride", 1))

    @property
    def dense(self) -> bool:
        return self.stride == 1

    @property
    def n_computes(self) -> int:
        return sum(1 for e in self.events if e.kind == "coordinator_compute")

    def compute_events(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == "coordinator_compute"]

    def iterate_times(self) -> np.ndarray:
        """Simulated time at which each recorded iterate came into existence."""
        t = [0.0] + [e.sim_time for e in self.compute_events()]
        return np.array(t[:: self.stride][: len(self.iterates)])

    def require_dense(self):
        if not self.dense:
            raise TraceFormatError(f"trace is thinned (stride {self.stride}); rerun with a dense trace")
        if len(self.iterates) != self.n_computes + 1:
            raise TraceFormatError(
                f"trace has {len(self.iterates)} iterates but {self.n_computes} compute events"
            )

    # ------------------------------------------------------------------
    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for e in self.events:
                w.writerow((e.kind, fmt(e.sim_time), e.agent, e.k, fmt(e.checksum)))
        np.ascontiguousarray(self.iterates, dtype="<f8").tofile(os.path.join(directory, "iterates.bin"))
        meta = dict(self.config)
        meta["n_iterates"] = int(len(self.iterates))
        with open(os.path.join(directory, "trace.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, directory: str) -> "Trace":
        paths = {name: os.path.join(directory, name) for name in ("trace.csv", "iterates.bin", "trace.json")}
        for name, path in paths.items():
            if not os.path.exists(path):
                raise TraceFormatError(f"missing {name} in {directory}")
        try:
            with open(paths["trace.json"]) as fh:
                meta = json.load(fh)
            dims = [int(d) for d in meta["dims"]]
            n_it = int(meta["n_iterates"])
        except (ValueError, KeyError) as exc:
            raise TraceFormatError(f"bad trace.json: {exc}") from exc
        raw = np.fromfile(paths["iterates.bin"], dtype="<f8")
        n = sum(dims)
        if raw.size != n * n_it:
            raise TraceFormatError(
                f"iterates.bin holds {raw.size} values, expected {n_it} x {n}"
            )
        events = []
        with open(paths["trace.csv"], newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise TraceFormatError(f"unexpected trace.csv header {header!r}")
            for lineno, row in enumerate(r, start=2):
                try:
                    kind, t, a, k, c = row
                    if kind not in EVENT_KINDS:
                        raise ValueError(f"unknown event kind {kind!r}")
                    events.append(TraceEvent(kind, float(t), int(a), int(k), float(c)))
                except ValueError as exc:
                    raise TraceFormatError(f"trace.csv line {lineno}: {exc}") from exc
        return cls(events=events, iterates=raw.reshape(n_it, n), config=meta)
