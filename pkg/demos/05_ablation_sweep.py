#!/usr/bin/env python3
# Switch off one component of the full loop at a time and watch which task
# families collapse: coding removal zeroes aggregation, writing removal
# dents composition, and dropping the global plan leaves skills intact.

from goalact.evaluation import success_rate
from goalact.generator import (
    generate_aggregation_task,
    generate_khop_task,
    generate_writing_task,
)
from goalact.oracle import oracle_backend
from goalact.orchestrator import RunConfig, run_task

SEEDS = range(8)
FAMILIES = {
    "3hop": lambda seed: generate_khop_task(seed, 3),
    "writing": generate_writing_task,
    "aggregation": generate_aggregation_task,
}
VARIANTS = {
    "full": frozenset(),
    "w/o global plan": frozenset({"no_global_plan"}),
    "w/o searching": frozenset({"no_searching"}),
    "w/o coding": frozenset({"no_coding"}),
    "w/o writing": frozenset({"no_writing"}),
}


def mean_score(make_task, ablations) -> float:
    scores = []
    for seed in SEEDS:
        task, env = make_task(seed)
        config = RunConfig(method="GoalAct", ablations=ablations)
        trajectory = run_task(task, env, config, oracle_backend(task))
        scores.append(success_rate(task.key_answers,
                                   trajectory.final_answer or "").s)
    return sum(scores) / len(scores)


header = f"{'variant':<18}" + "".join(f"{name:>14}" for name in FAMILIES)
print(header)
print("-" * len(header))
for variant, ablations in VARIANTS.items():
    cells = [mean_score(make, ablations) for make in FAMILIES.values()]
    print(f"{variant:<18}" + "".join(f"{value:>14.3f}" for value in cells))
