"""End-to-end orchestration: pre-analysis, grouped backward runs, merge.

Pattern groups are the unit of parallelism; each group is a pure function of
immutable inputs, so results are merged in canonical partition order and the
output is identical for any worker count or schedule.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from faircert.backward import BackwardStats, PartitionOutcome, analyze_pattern_group
from faircert.domains import ActivationPattern
from faircert.model import InputSpec, NetworkModel
from faircert.preanalysis import BudgetConfig, Partition, PreResult, run_preanalysis


@dataclass
class AnalysisResult:
    pre: PreResult
    outcomes: list[PartitionOutcome] = field(default_factory=list)
    max_live_disjuncts: int = 0
    # per backward group: (number of ReLUs the pattern leaves unknown,
    # high-water mark of live disjuncts)
    group_disjuncts: list[tuple[int, int]] = field(default_factory=list)
    timed_out: bool = False


class _GroupTask:
    def __init__(self, m: NetworkModel, spec: InputSpec):
        self.m = m
        self.spec = spec

    def __call__(self, group):
        pattern, partitions = group
        stats = BackwardStats()
        outcomes = analyze_pattern_group(self.m, self.spec, pattern, partitions, stats)
        return outcomes, stats.max_live


def run_analysis(
    m: NetworkModel,
    spec: InputSpec,
    initial: Iterable[Partition],
    domain: str,
    budget: BudgetConfig,
    workers: int = 1,
    timeout: float | None = None,
) -> AnalysisResult:
    deadline = time.monotonic() + timeout if timeout is not None else None
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if executor is not None:
            map_fn = lambda fn, items: list(executor.map(fn, items, chunksize=4))
        else:
            map_fn = None
        pre = run_preanalysis(m, spec, initial, domain, budget, map_fn, deadline)
        result = AnalysisResult(pre=pre)

        groups = pre.feasible.groups()
        task = _GroupTask(m, spec)
        pending = list(groups)
        futures = []
        if executor is not None:
            futures = [(g, executor.submit(task, g)) for g in groups]
        for idx, group in enumerate(groups):
            if deadline is not None and time.monotonic() > deadline:
                result.timed_out = True
                for pattern, partitions in pending[idx:]:
                    result.pre.excluded.extend((pattern, p) for p in partitions)
                if executor is not None:
                    for _, fut in futures[idx:]:
                        fut.cancel()
                break
            if executor is not None:
                outcomes, max_live = futures[idx][1].result()
            else:
                outcomes, max_live = task(group)
            result.outcomes.extend(outcomes)
            result.max_live_disjuncts = max(result.max_live_disjuncts, max_live)
            result.group_disjuncts.append((m.n_hidden - len(group[0]), max_live))
        result.outcomes.sort(key=lambda o: o.partition.key())
        result.pre.excluded.sort(key=lambda item: item[1].key())
        result.timed_out = result.timed_out or pre.timed_out
        return result
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
