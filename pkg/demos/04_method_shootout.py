#!/usr/bin/env python3
# Bench all five control loops over one generated task set and print the
# per-category table plus each method's lead over its best rival.

from goalact.evaluation import compare_methods, render_report_text
from goalact.generator import CATEGORY_ORDER, generate_task
from goalact.oracle import oracle_backend
from goalact.orchestrator import METHODS, RunConfig
from goalact.suite import run_suite

pairs = [generate_task(category, seed)
         for category in CATEGORY_ORDER for seed in range(5)]
print(f"{len(pairs)} tasks across {len(CATEGORY_ORDER)} categories\n")

report = run_suite(pairs, list(METHODS), RunConfig(), oracle_backend)
print(render_report_text(report))

# Deltas against the best rival, per category and overall. The scripted
# oracle plays every method as well as its action space allows, so the gaps
# show the structural limits: single-call loops cannot aggregate, and
# loops without a writing skill cannot finish composition tasks.
deltas = compare_methods(report)
print("lead over the best rival (ALL column):")
for method, entry in deltas.items():
    print(f"  {method:<15} {entry['ALL']:+.4f}")
