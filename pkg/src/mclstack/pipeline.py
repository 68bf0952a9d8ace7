"""Two-lane timeline model of (pipelined) Sparse SUMMA.

Each stage ``k`` has four durations: the operand broadcast and the
host-to-device transfer (host lane), the local multiplication (device lane),
and the merge of the stage's output (host lane).

In serial mode every task waits for the previous one. In pipelined mode the
host issues work in the order::

    bcast_1, xfer_1, bcast_2, xfer_2, merge_1, bcast_3, xfer_3, merge_2, ...,
    bcast_K, xfer_K, merge_{K-1}, merge_K

so the broadcast of stage ``k + 1`` overlaps the multiplication of stage
``k``. ``mult_k`` starts once ``xfer_k`` and ``mult_{k-1}`` are done, and
``merge_k`` starts once ``mult_k`` is done and the host is free. Returning
results to the host is folded into ``mult_k`` and never blocks the next
multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class PipelineMode(str, Enum):
    SERIAL = "serial"
    PIPELINED = "pipelined"


@dataclass
class StageCosts:
    bcast: Sequence[float]
    xfer: Sequence[float]
    mult: Sequence[float]
    merge: Sequence[float]

    def __post_init__(self):
        self.bcast, self.xfer = list(map(float, self.bcast)), list(map(float, self.xfer))
        self.mult, self.merge = list(map(float, self.mult)), list(map(float, self.merge))
        n = len(self.bcast)
        if not (len(self.xfer) == len(self.mult) == len(self.merge) == n):
            raise ValueError("all cost lists must have one entry per stage")
        if any(v < 0 for v in self.bcast + self.xfer + self.mult + self.merge):
            raise ValueError("durations must be nonnegative")

    @property
    def nstages(self) -> int:
        return len(self.bcast)

    def to_dict(self):
        return {"bcast": self.bcast, "xfer": self.xfer, "mult": self.mult, "merge": self.merge}

    @classmethod
    def from_dict(cls, d) -> "StageCosts":
        return cls(d["bcast"], d["xfer"], d["mult"], d["merge"])


@dataclass(frozen=True)
class TimelineEvent:
    lane: str  # "host" or "device"
    kind: str  # bcast, xfer, mult or merge
    stage: int
    start: float
    end: float


@dataclass
class TimelineReport:
    mode: PipelineMode
    overall: float
    host_idle: float
    device_idle: float
    events: list = field(default_factory=list)

    def lane(self, name: str) -> list:
        return [e for e in self.events if e.lane == name]

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "overall": self.overall,
            "host_idle": self.host_idle,
            "device_idle": self.device_idle,
            "events": [e.__dict__ for e in self.events],
        }


def _report(mode, events) -> TimelineReport:
    overall = max((e.end for e in events), default=0.0)
    busy = {"host": 0.0, "device": 0.0}
    for e in events:
        busy[e.lane] += e.end - e.start
    return TimelineReport(
        mode,
        overall,
        max(0.0, overall - busy["host"]),
        max(0.0, overall - busy["device"]),
        sorted(events, key=lambda e: (e.start, e.lane, e.stage)),
    )


def simulate_pipeline(costs: StageCosts, mode: PipelineMode | str = PipelineMode.PIPELINED) -> TimelineReport:
    mode = PipelineMode(mode)
    K = costs.nstages
    if K < 1:
        raise ValueError("at least one stage is required")
    events = []

    if mode is PipelineMode.SERIAL:
        t = 0.0
        for k in range(K):
            for lane, kind, dur in (("host", "bcast", costs.bcast[k]), ("host", "xfer", costs.xfer[k]),
                                    ("device", "mult", costs.mult[k]), ("host", "merge", costs.merge[k])):
                events.append(TimelineEvent(lane, kind, k, t, t + dur))
                t += dur
        return _report(mode, events)

    host = 0.0
    mult_end = [0.0] * K

    def host_task(kind, k, ready=0.0):
        nonlocal host
        start = max(host, ready)
        dur = getattr(costs, kind)[k]
        events.append(TimelineEvent("host", kind, k, start, start + dur))
        host = start + dur
        return host

    def device_mult(k, xfer_done):
        start = max(xfer_done, mult_end[k - 1] if k else 0.0)
        mult_end[k] = start + costs.mult[k]
        events.append(TimelineEvent("device", "mult", k, start, mult_end[k]))

    host_task("bcast", 0)
    device_mult(0, host_task("xfer", 0))
    for k in range(K):
        if k + 1 < K:
            host_task("bcast", k + 1)
            device_mult(k + 1, host_task("xfer", k + 1))
        host_task("merge", k, ready=mult_end[k])
    return _report(mode, events)
