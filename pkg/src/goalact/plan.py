"""Plan, history, and trajectory data model shared by planner, runner, and eval.

A global plan is an ordered list of (thought, action) steps whose final action
is always Finish.  Executed steps are immutable: re-planning may only rewrite
the pending suffix.  The history is the executed prefix as
(thought, action, observation) triples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import (
    BrokenExecutionPrefix,
    MissingFinish,
    NonContiguousIndices,
    PlanTooLong,
    PrematureFinish,
)

# Built-in skill kinds.  Custom kinds are plain strings registered at runtime.
SEARCHING = "Searching"
CODING = "Coding"
WRITING = "Writing"
FINISH = "Finish"
BUILTIN_KINDS = (SEARCHING, CODING, WRITING, FINISH)

PENDING = "pending"
EXECUTED = "executed"

DEFAULT_OBSERVATION_BYTES = 4096
DEFAULT_MAX_PLAN_STEPS = 12
TRUNCATION_MARKER = "[truncated]"


def truncate_observation(text: str, byte_budget: int = DEFAULT_OBSERVATION_BYTES) -> str:
    """Clamp an observation to a UTF-8 byte budget, marking the cut."""
    raw = text.encode("utf-8")
    if len(raw) <= byte_budget:
        return text
    keep = max(byte_budget - len(TRUNCATION_MARKER), 0)
    clipped = raw[:keep].decode("utf-8", errors="ignore")
    return clipped + TRUNCATION_MARKER


@dataclass(frozen=True)
class SkillAction:
    """A skill kind plus its natural-language objective.

    The payload is filled in during execution (the chosen tool call, the
    script that ran, ...), never by the planner.
    """

    kind: str
    objective: str = ""
    payload: Optional[Mapping[str, Any]] = None

    def render(self) -> str:
        return f"{self.kind}[{self.objective}]"


@dataclass(frozen=True)
class PlanStep:
    index: int
    thought: str
    action: SkillAction
    status: str = PENDING
    observation: Optional[str] = None

    @property
    def executed(self) -> bool:
        return self.status == EXECUTED

    def mark_executed(self, observation: str,
                      payload: Optional[Mapping[str, Any]] = None) -> "PlanStep":
        """Produce the executed version of this step; the original is unchanged."""
        action = self.action if payload is None else replace(self.action, payload=dict(payload))
        return replace(self, status=EXECUTED, observation=observation, action=action)


@dataclass(frozen=True)
class GlobalPlan:
    steps: tuple[PlanStep, ...]
    revision: int = 1

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class History:
    """Executed (thought, action, observation) triples, oldest first."""

    triples: tuple[tuple[str, SkillAction, str], ...] = ()

    def __len__(self) -> int:
        return len(self.triples)


def make_plan(steps: Iterable[tuple[str, SkillAction]], revision: int = 1) -> GlobalPlan:
    """Build a pending plan from (thought, action) pairs, numbering from 1."""
    plan_steps = tuple(
        PlanStep(index=i, thought=thought, action=action)
        for i, (thought, action) in enumerate(steps, start=1)
    )
    return GlobalPlan(steps=plan_steps, revision=revision)


def validate_plan(plan: GlobalPlan, max_steps: Optional[int] = None) -> GlobalPlan:
    """Return the plan unchanged iff every structural invariant holds.

    Raises MissingFinish, PrematureFinish, NonContiguousIndices,
    BrokenExecutionPrefix, or PlanTooLong (when a cap is given).
    """
    if not plan.steps or plan.steps[-1].action.kind != FINISH:
        raise MissingFinish("a plan must end with a Finish step")
    for step in plan.steps[:-1]:
        if step.action.kind == FINISH:
            raise PrematureFinish(f"Finish at step {step.index} is not terminal")
    for position, step in enumerate(plan.steps, start=1):
        if step.index != position:
            raise NonContiguousIndices(
                f"step at position {position} carries index {step.index}"
            )
    seen_pending = False
    for step in plan.steps:
        if step.executed and seen_pending:
            raise BrokenExecutionPrefix(
                f"executed step {step.index} follows a pending step"
            )
        if not step.executed:
            seen_pending = True
    if max_steps is not None and len(plan.steps) > max_steps:
        raise PlanTooLong(f"{len(plan.steps)} steps exceed the cap of {max_steps}")
    return plan


def history_of(plan: Optional[GlobalPlan]) -> History:
    """Extract the executed prefix as (thought, action, observation) triples."""
    if plan is None:
        return History()
    triples = []
    for step in plan.steps:
        if not step.executed:
            break
        triples.append((step.thought, step.action, step.observation or ""))
    return History(triples=tuple(triples))


def first_pending(plan: GlobalPlan) -> Optional[PlanStep]:
    """The lowest-index pending step, or None when everything executed."""
    for step in plan.steps:
        if not step.executed:
            return step
    return None


# --- trajectory record --------------------------------------------------------

TERMINATION_FINISH = "finish"
TERMINATION_MAX_ITERATIONS = "max_iterations"
TERMINATION_FATAL = "fatal_error"


@dataclass
class LlmExchange:
    purpose: str
    model: str
    temperature: float
    messages: list[dict[str, str]]
    response: str
    attempts: int = 1


@dataclass
class ToolCallRecord:
    tool: str
    arguments: dict[str, Any]
    result: str
    ok: bool = True


@dataclass
class Trajectory:
    """The complete persisted record of one task run."""

    task_id: str
    method: str
    revisions: list[dict[str, Any]] = field(default_factory=list)
    llm_calls: list[LlmExchange] = field(default_factory=list)
    tool_calls: list[ToolCallRecord] = field(default_factory=list)
    final_answer: Optional[str] = None
    step_count: int = 0
    termination_reason: str = TERMINATION_MAX_ITERATIONS
    degraded: bool = False

    def record_plan(self, plan: GlobalPlan) -> None:
        self.revisions.append(plan_to_dict(plan))

    def record_llm(self, exchange: LlmExchange) -> None:
        self.llm_calls.append(exchange)

    def record_tool(self, record: ToolCallRecord) -> None:
        self.tool_calls.append(record)


def step_to_dict(step: PlanStep) -> dict[str, Any]:
    return {
        "index": step.index,
        "thought": step.thought,
        "kind": step.action.kind,
        "objective": step.action.objective,
        "payload": dict(step.action.payload) if step.action.payload else None,
        "status": step.status,
        "observation": step.observation,
    }


def step_from_dict(doc: Mapping[str, Any]) -> PlanStep:
    return PlanStep(
        index=doc["index"],
        thought=doc["thought"],
        action=SkillAction(kind=doc["kind"], objective=doc["objective"],
                           payload=doc.get("payload")),
        status=doc["status"],
        observation=doc.get("observation"),
    )


def plan_to_dict(plan: GlobalPlan) -> dict[str, Any]:
    return {"revision": plan.revision, "steps": [step_to_dict(s) for s in plan.steps]}


def plan_from_dict(doc: Mapping[str, Any]) -> GlobalPlan:
    return GlobalPlan(
        steps=tuple(step_from_dict(s) for s in doc["steps"]),
        revision=doc["revision"],
    )


def trajectory_to_dict(traj: Trajectory) -> dict[str, Any]:
    return {
        "task_id": traj.task_id,
        "method": traj.method,
        "revisions": traj.revisions,
        "llm_calls": [
            {
                "purpose": call.purpose,
                "model": call.model,
                "temperature": call.temperature,
                "messages": call.messages,
                "response": call.response,
                "attempts": call.attempts,
            }
            for call in traj.llm_calls
        ],
        "tool_calls": [
            {"tool": rec.tool, "arguments": rec.arguments,
             "result": rec.result, "ok": rec.ok}
            for rec in traj.tool_calls
        ],
        "final_answer": traj.final_answer,
        "step_count": traj.step_count,
        "termination_reason": traj.termination_reason,
        "degraded": traj.degraded,
    }


def trajectory_from_dict(doc: Mapping[str, Any]) -> Trajectory:
    return Trajectory(
        task_id=doc["task_id"],
        method=doc["method"],
        revisions=list(doc["revisions"]),
        llm_calls=[
            LlmExchange(
                purpose=c["purpose"],
                model=c["model"],
                temperature=c["temperature"],
                messages=list(c["messages"]),
                response=c["response"],
                attempts=c["attempts"],
            )
            for c in doc["llm_calls"]
        ],
        tool_calls=[
            ToolCallRecord(tool=c["tool"], arguments=dict(c["arguments"]),
                           result=c["result"], ok=c["ok"])
            for c in doc["tool_calls"]
        ],
        final_answer=doc.get("final_answer"),
        step_count=doc["step_count"],
        termination_reason=doc["termination_reason"],
        degraded=doc.get("degraded", False),
    )


def encode_trajectory(traj: Trajectory) -> str:
    """One canonical JSON document, suitable for line-delimited logs."""
    return json.dumps(trajectory_to_dict(traj), ensure_ascii=False,
                      separators=(",", ":"))


def decode_trajectory(line: str) -> Trajectory:
    return trajectory_from_dict(json.loads(line))


def write_trajectories(path: Any, trajectories: Sequence[Trajectory]) -> None:
    """Append one document per line; `path` is any os.PathLike or str."""
    with open(path, "a", encoding="utf-8") as handle:
        for traj in trajectories:
            handle.write(encode_trajectory(traj) + "\n")


def read_trajectories(path: Any) -> list[Trajectory]:
    with open(path, encoding="utf-8") as handle:
        return [decode_trajectory(line) for line in handle if line.strip()]
