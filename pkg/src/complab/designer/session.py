"""Design-session records and crash-safe persistence."""
from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from complab.controllers import AdaptivePidParams, CompensatorParams
from complab.metrics import TrackingStats


class DesignMode(str, enum.Enum):
    COMPENSATOR = "Compensator"
    DIRECT = "DirectController"


class SessionStatus(str, enum.Enum):
    RUNNING = "Running"
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    FAULTED = "Faulted"


PARAM_TYPES = {DesignMode.COMPENSATOR: CompensatorParams, DesignMode.DIRECT: AdaptivePidParams}


def atomic_write_json(path: str | Path, doc) -> None:
    """Write-then-rename so a reader never sees a half-written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=False)
            f.write("\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Iteration:
    index: int
    proposal: CompensatorParams | AdaptivePidParams
    run_stats: TrackingStats
    prompt: str = ""
    raw_reply: str = ""
    delta: CompensatorParams | AdaptivePidParams | None = None
    labels: list[str] = field(default_factory=list)
    halvings: int = 0
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "proposal": self.proposal.to_dict(),
            "run_stats": self.run_stats.to_dict(),
            "prompt": self.prompt,
            "raw_reply": self.raw_reply,
            "delta": None if self.delta is None else self.delta.to_dict(),
            "labels": list(self.labels),
            "halvings": self.halvings,
            "errors": list(self.errors),
        }

    @classmethod
    def from_dict(cls, d: dict, ptype) -> "Iteration":
        return cls(
            index=d["index"],
            proposal=ptype.from_dict(d["proposal"]),
            run_stats=TrackingStats(**d["run_stats"]),
            prompt=d["prompt"],
            raw_reply=d["raw_reply"],
            delta=None if d["delta"] is None else ptype.from_dict(d["delta"]),
            labels=list(d["labels"]),
            halvings=d["halvings"],
            errors=list(d["errors"]),
        )


@dataclass
class DesignSession:
    mode: DesignMode = DesignMode.COMPENSATOR
    config: dict = field(default_factory=dict)
    iterations: list[Iteration] = field(default_factory=list)
    status: SessionStatus = SessionStatus.RUNNING
    backend: str = ""
    nondeterministic: bool = False
    fault: str | None = None
    current: CompensatorParams | AdaptivePidParams | None = None

    def append(self, it: Iteration, max_iter: int) -> None:
        if len(self.iterations) >= max_iter:
            raise RuntimeError("iteration budget exhausted")
        if it.index != len(self.iterations):
            raise RuntimeError("iterations are append-only and consecutive")
        self.iterations.append(it)

    @property
    def final(self):
        return self.iterations[-1].proposal if self.iterations else None

    @property
    def best(self) -> Iteration | None:
        if not self.iterations:
            return None
        return min(self.iterations, key=lambda it: it.run_stats.rmse)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "backend": self.backend,
            "status": self.status.value,
            "nondeterministic": self.nondeterministic,
            "fault": self.fault,
            "config": self.config,
            "iterations": [it.to_dict() for it in self.iterations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSession":
        mode = DesignMode(d["mode"])
        ptype = PARAM_TYPES[mode]
        s = cls(
            mode=mode,
            config=d["config"],
            iterations=[Iteration.from_dict(x, ptype) for x in d["iterations"]],
            status=SessionStatus(d["status"]),
            backend=d.get("backend", ""),
            nondeterministic=d.get("nondeterministic", False),
            fault=d.get("fault"),
        )
        s.current = s.final
        return s

    def save(self, path: str | Path) -> None:
        atomic_write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "DesignSession":
        return cls.from_dict(json.loads(Path(path).read_text()))
