"""Attention-cost model and minibatch reordering for accumulation steps.

One optimizer step is a grid of ``accum_steps`` micro-steps by ``devices``
minibatches. Devices synchronize after each micro-step, so the modeled time
of a step is the sum over micro-steps of the slowest device's cost. Sorting
the step's minibatches by cost and handing consecutive ranks to each
micro-step groups similar work together without changing which minibatches
contribute to the step's gradient.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .packer import PackedSequence

# Per-stage token budgets and batch sizes, binary prefixes (B = 2**30, M = 2**20).
STAGE_BUDGETS = {1: 20 * 2**30, 2: 20 * 2**30}
STAGE_BATCH_TOKENS = {1: 4 * 2**20, 2: 8 * 2**20}


@dataclass(frozen=True)
class CostModel:
    """cost = sum of squared segment lengths + linear * total tokens."""

    linear: float = 0.0

    def segments(self, lengths: Sequence[int]) -> float:
        lengths = np.asarray(lengths, dtype=np.float64)
        return float(np.dot(lengths, lengths) + self.linear * lengths.sum())


def cost(item: Any, model: CostModel = CostModel()) -> float:
    """Modeled work of a packed sequence, or of a minibatch (list of sequences)."""
    if isinstance(item, PackedSequence):
        return model.segments(item.segment_lengths)
    if isinstance(item, (list, tuple)) and item and isinstance(item[0], PackedSequence):
        return sum(cost(s, model) for s in item)
    raise TypeError(f"cannot cost {type(item).__name__}")


def full_attention_cost(seq: PackedSequence, model: CostModel = CostModel()) -> float:
    return model.segments([seq.length])


@dataclass
class StepPlan:
    """Minibatch assignment for one optimizer step.

    ``grid[k][d]`` is the index (into the step's input list) of the minibatch
    that device ``d`` runs in micro-step ``k``; ``costs`` mirrors it.
    """

    devices: int
    accum_steps: int
    grid: Tuple[Tuple[int, ...], ...]
    costs: np.ndarray

    def __post_init__(self):
        if self.devices < 1 or self.accum_steps < 1:
            raise ValueError("a step plan needs at least one device and one micro-step")
        if len(self.grid) != self.accum_steps or any(len(r) != self.devices for r in self.grid):
            raise ValueError("grid shape does not match devices x accum_steps")
        flat = sorted(i for row in self.grid for i in row)
        if flat != list(range(self.devices * self.accum_steps)):
            raise ValueError("every minibatch must appear exactly once in the grid")

    def makespan(self) -> float:
        return makespan(self)


def _plan(order: Sequence[int], costs: np.ndarray, devices: int, accum: int) -> StepPlan:
    grid = tuple(tuple(int(i) for i in order[k * devices : (k + 1) * devices]) for k in range(accum))
    return StepPlan(devices, accum, grid, costs[np.asarray(grid, dtype=np.int64)])


def _costs(minibatches: Sequence[Any], model: CostModel, device_count: int, accum_steps: int) -> np.ndarray:
    if len(minibatches) != device_count * accum_steps:
        raise ValueError(
            f"got {len(minibatches)} minibatches for {device_count} devices x {accum_steps} accumulation steps"
        )
    return np.asarray(
        [m if isinstance(m, (int, float, np.number)) else cost(m, model) for m in minibatches],
        dtype=np.float64,
    )


def manifest_order(minibatches: Sequence[Any], device_count: int, accum_steps: int,
                   model: CostModel = CostModel()) -> StepPlan:
    """Baseline plan: micro-step k takes minibatches [kD, (k+1)D) in input order."""
    c = _costs(minibatches, model, device_count, accum_steps)
    return _plan(range(len(c)), c, device_count, accum_steps)


def reorder(minibatches: Sequence[Any], device_count: int, accum_steps: int,
            model: CostModel = CostModel()) -> StepPlan:
    """Sort by cost (ascending, ties by input order) and fill micro-steps by rank.

    Minibatches may be PackedSequences, lists of them, or bare numeric costs.
    """
    c = _costs(minibatches, model, device_count, accum_steps)
    order = np.argsort(c, kind="stable")
    return _plan(order, c, device_count, accum_steps)


def makespan(plan: StepPlan) -> float:
    if plan.costs.size == 0:
        return 0.0
    return float(plan.costs.max(axis=1).sum())


def step_minibatches(plan: StepPlan, minibatches: Sequence[Any]) -> List[List[Any]]:
    """Materialize the plan as per-micro-step lists of minibatches."""
    return [[minibatches[i] for i in row] for row in plan.grid]


@dataclass
class ThroughputReport:
    devices: int
    accum_steps: int
    steps: int
    tokens: int
    unsorted: List[float] = field(default_factory=list)
    sorted: List[float] = field(default_factory=list)
    budget_tokens: Dict[int, int] = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        """makespan(manifest order) / makespan(sorted) - 1, summed over steps."""
        s = sum(self.sorted)
        return sum(self.unsorted) / s - 1.0 if s else 0.0

    def budget_progress(self) -> Dict[str, float]:
        return {f"stage{k}": self.tokens / v for k, v in self.budget_tokens.items()}

    def summary(self) -> dict:
        return {
            "devices": self.devices,
            "accum_steps": self.accum_steps,
            "steps": self.steps,
            "tokens": self.tokens,
            "makespan_manifest_order": sum(self.unsorted),
            "makespan_sorted": sum(self.sorted),
            "modeled_speedup": self.speedup,
            "budget_progress": self.budget_progress(),
        }

    def to_text(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "unsorted_makespan", "sorted_makespan"])
        for i, (u, s) in enumerate(zip(self.unsorted, self.sorted)):
            w.writerow([i, repr(u), repr(s)])
        return buf.getvalue()


def throughput_report(
    dataset: Iterable[PackedSequence],
    device_count: int,
    accum_steps: int,
    model: CostModel = CostModel(),
    budget_tokens: Optional[Dict[int, int]] = None,
) -> ThroughputReport:
    """Compare manifest-order vs sorted makespans over consecutive optimizer steps.

    Each sequence is one minibatch; a trailing incomplete step is ignored.
    """
    per_step = device_count * accum_steps
    report = ThroughputReport(device_count, accum_steps, 0, 0,
                              budget_tokens=dict(STAGE_BUDGETS if budget_tokens is None else budget_tokens))
    step: List[PackedSequence] = []
    for seq in dataset:
        step.append(seq)
        if len(step) == per_step:
            report.unsorted.append(makespan(manifest_order(step, device_count, accum_steps, model)))
            report.sorted.append(makespan(reorder(step, device_count, accum_steps, model)))
            report.tokens += sum(s.length for s in step)
            report.steps += 1
            step = []
    return report
