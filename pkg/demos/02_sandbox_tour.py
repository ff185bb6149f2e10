#!/usr/bin/env python3
# The coding skill's substrate: a tiny deterministic script language with
# tool built-ins, run under strict step / tool-call / output budgets.

from goalact.environment import Table, ToolEnvironment
from goalact.sandbox import SandboxLimits, Script, eval_script

env = ToolEnvironment(tables=(
    Table(name="ledger", key_field="entry_id", rows=tuple(
        {"entry_id": f"E-{i:03d}", "branch": "north" if i % 3 else "south",
         "amount": 100 + 7 * i}
        for i in range(30)
    )),
))

# Loops, conditionals, records, and tool calls compose freely.
script = """
rows = filter_records("ledger", "branch", "north")
total = 0
biggest = 0
for r in rows {
    total = total + r.amount
    if r.amount > biggest { biggest = r.amount }
}
return [total, biggest, len(rows)]
"""
result = eval_script(Script(script), env)
print("value:", result.value)
print("steps used:", result.steps_used, "tool calls:", result.tool_calls_used)

# Budgets are enforced inside the interpreter; overruns come back as data.
runaway = eval_script(Script("x = 0\nwhile true { x = x + 1 }"), env,
                      SandboxLimits(max_eval_steps=2000))
print("runaway loop ->", runaway.fault.kind, "at", runaway.steps_used, "steps")

# Faults never escape as exceptions; a bad tool name is an observation too.
broken = eval_script(Script('return launch_rockets("now")'), env)
print("bad tool ->", broken.fault.kind, "-", broken.fault.message)

# Evaluation is deterministic, trace included.
again = eval_script(Script(script), env)
assert again.value == result.value and again.trace == result.trace
print("re-evaluation is identical, trace:", result.trace)
