"""Hierarchical execution layer: the skill registry and its executors.

The planner names a skill and an objective; dispatch routes to the matching
executor.  In-skill failures never raise: they are rendered into the
observation so the next planning round can react to them.  Finish is listed
for prompt rendering but executed by the run loop, not here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Optional

from .backends import strip_code_fences, user_request
from .environment import ToolCall, ToolEnvironment, render_row, render_rows
from .errors import (
    BackendUnavailable,
    DuplicateSkill,
    ReservedKind,
    SkillDisabled,
    SkillUnknown,
    ToolError,
)
from .plan import (
    CODING,
    DEFAULT_OBSERVATION_BYTES,
    FINISH,
    SEARCHING,
    WRITING,
    History,
    SkillAction,
    truncate_observation,
)

SEARCHING_MARKER = "Retrieval objective:"
WRITING_MARKER = "Writing objective:"
DEFAULT_WRITING_BUDGET = 12000

_REACT_CALL_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\[(.*)\]\s*$", re.DOTALL)


@dataclass(frozen=True)
class OutcomeError:
    kind: str
    message: str


@dataclass(frozen=True)
class SkillOutcome:
    observation: str
    tool_calls_made: int = 0
    error: Optional[OutcomeError] = None
    payload: Optional[Mapping[str, Any]] = None


@dataclass
class SkillContext:
    """Everything an executor may need for one action."""

    question: str
    history: History
    env: ToolEnvironment
    backend: Any
    sandbox_limits: Any = None
    observation_bytes: int = DEFAULT_OBSERVATION_BYTES
    writing_budget: int = DEFAULT_WRITING_BUDGET
    model: str = "scripted"


Executor = Callable[[SkillAction, SkillContext], SkillOutcome]


@dataclass(frozen=True)
class SkillDescriptor:
    name: str
    description: str
    enabled: bool = True
    run: Optional[Executor] = None


@dataclass(frozen=True)
class SkillRegistry:
    entries: tuple[SkillDescriptor, ...]

    def get(self, kind: str) -> Optional[SkillDescriptor]:
        for entry in self.entries:
            if entry.name == kind:
                return entry
        return None

    def kinds(self) -> tuple[str, ...]:
        return tuple(entry.name for entry in self.entries)

    def enabled_entries(self) -> list[tuple[str, str]]:
        """(name, description) pairs for the prompt menu, Finish always last."""
        listed = [(e.name, e.description) for e in self.entries
                  if e.enabled and e.name != FINISH]
        finish = self.get(FINISH)
        listed.append((finish.name, finish.description))
        return listed

    def disable(self, kind: str) -> "SkillRegistry":
        if kind == FINISH:
            raise ReservedKind("Finish cannot be disabled")
        entry = self.get(kind)
        if entry is None:
            raise SkillUnknown(f"cannot disable unregistered kind {kind!r}")
        entries = tuple(replace(e, enabled=False) if e.name == kind else e
                        for e in self.entries)
        return SkillRegistry(entries=entries)


def register_skill(registry: SkillRegistry, kind: str,
                   descriptor: SkillDescriptor) -> SkillRegistry:
    """Add a custom kind; identifiers are case-sensitive and must be fresh."""
    if not kind:
        raise SkillUnknown("skill kind identifiers must be non-empty")
    if kind == FINISH:
        raise ReservedKind("Finish is built in and cannot be re-registered")
    if registry.get(kind) is not None:
        raise DuplicateSkill(f"skill kind {kind!r} is already registered")
    entries = registry.entries[:-1] + (replace(descriptor, name=kind),
                                       registry.entries[-1])
    return SkillRegistry(entries=entries)


def default_registry() -> SkillRegistry:
    from .sandbox import exec_coding  # Coding runs on the sandbox module.

    return SkillRegistry(entries=(
        SkillDescriptor(
            name=SEARCHING,
            description=("Retrieve a record from a data table based on "
                         "information, or filter multiple records that meet "
                         "specific attribute values."),
            run=exec_searching,
        ),
        SkillDescriptor(
            name=CODING,
            description=("If the problem is too complex to be solved by "
                         "querying alone, you may attempt to program a "
                         "solution. You can filter, sort, sum, or iterate "
                         "over queried data."),
            run=exec_coding,
        ),
        SkillDescriptor(
            name=WRITING,
            description=("If content generation (such as a defense statement) "
                         "is needed, you should attempt writing to resolve "
                         "the issue."),
            run=exec_writing,
        ),
        SkillDescriptor(
            name=FINISH,
            description="Provide the final answer and terminate the task.",
            run=None,
        ),
    ))


def dispatch(action: SkillAction, context: SkillContext,
             registry: Optional[SkillRegistry] = None) -> SkillOutcome:
    """Route one action to its executor.

    Raises only for dispatch-level faults (unknown or disabled kinds);
    everything inside a skill comes back as an observation.
    """
    registry = registry or default_registry()
    entry = registry.get(action.kind)
    if entry is None:
        raise SkillUnknown(f"no skill registered for kind {action.kind!r}")
    if not entry.enabled:
        raise SkillDisabled(f"skill {action.kind!r} is currently disabled")
    if entry.run is None:
        raise SkillUnknown(f"skill {action.kind!r} has no executor "
                           "(Finish is handled by the run loop)")
    outcome = entry.run(action, context)
    observation = outcome.observation or "(empty observation)"
    observation = truncate_observation(observation, context.observation_bytes)
    return replace(outcome, observation=observation)


# --- tool-call emission parsing -------------------------------------------------

def _call_from_obj(obj: Any) -> Optional[ToolCall]:
    if isinstance(obj, dict) and "tool" in obj:
        args = obj.get("args", {})
        if isinstance(args, dict):
            return ToolCall(tool_name=str(obj["tool"]),
                            arguments={str(k): v for k, v in args.items()})
    return None


def parse_tool_emission(text: str) -> tuple[list[ToolCall], Optional[str]]:
    """Extract tool calls from a backend emission.

    Accepts the canonical {"tool": name, "args": {...}} object, an array of
    such objects, one object per line, or the ReAct-style Tool[k=v, ...]
    form.  Returns (calls, problem); problem explains a parse failure.
    """
    body = strip_code_fences(text)
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        doc = None
    if doc is not None:
        if isinstance(doc, list):
            calls = [c for c in (_call_from_obj(item) for item in doc) if c]
            if calls:
                return calls, None
            return [], "array held no {\"tool\": ...} objects"
        call = _call_from_obj(doc)
        if call:
            return [call], None
        return [], "object lacks a \"tool\" key"

    calls = []
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            obj = None
        call = _call_from_obj(obj) if obj is not None else None
        if call is None:
            call = _parse_react_call(line)
        if call is not None:
            calls.append(call)
    if calls:
        return calls, None
    single = _parse_react_call(body)
    if single is not None:
        return [single], None
    return [], "no tool call found in the emission"


def _parse_react_call(line: str) -> Optional[ToolCall]:
    match = _REACT_CALL_RE.match(line)
    if not match:
        return None
    name, arg_body = match.group(1), match.group(2)
    arguments: dict[str, Any] = {}
    if arg_body.strip():
        for piece in arg_body.split(","):
            if "=" not in piece:
                return None
            key, value = piece.split("=", 1)
            arguments[key.strip()] = value.strip().strip("\"'")
    return ToolCall(tool_name=name, arguments=arguments)


# --- executors -------------------------------------------------------------------

def _searching_prompt(action: SkillAction, context: SkillContext) -> str:
    return "\n".join([
        "You translate one retrieval objective into exactly one tool call.",
        "Respond with a single JSON object {\"tool\": \"<name>\", \"args\": "
        "{...}} and nothing else. The form Tool[key=value, ...] is also "
        "accepted.",
        "",
        "Available tools:",
        context.env.render_tool_descriptions(),
        "",
        f"Question: {context.question}",
        f"{SEARCHING_MARKER} {action.objective}",
    ])


def exec_searching(action: SkillAction, context: SkillContext) -> SkillOutcome:
    """One retrieval intent, at most one tool call."""
    try:
        emission = context.backend.complete(
            user_request(_searching_prompt(action, context),
                         model=context.model))
    except BackendUnavailable as exc:
        return SkillOutcome(
            observation=f"Searching failed before any tool ran: {exc}",
            error=OutcomeError(kind=type(exc).__name__, message=str(exc)))
    calls, problem = parse_tool_emission(emission)
    if problem is not None:
        return SkillOutcome(
            observation=f"Searching emitted no usable tool call ({problem}).",
            error=OutcomeError(kind="MalformedToolCall", message=problem))
    call, discarded = calls[0], len(calls) - 1
    try:
        rows = context.env.invoke_tool(call)
    except ToolError as exc:
        return SkillOutcome(
            observation=(f"Tool call {call.tool_name} failed: {exc}"),
            tool_calls_made=1,
            error=OutcomeError(kind=type(exc).__name__, message=str(exc)),
            payload={"tool": call.tool_name, "args": dict(call.arguments)})
    spec = context.env.tool(call.tool_name)
    rendered = render_row(rows[0]) if spec.semantics == "get_record" \
        else render_rows(rows)
    note = "" if not discarded else \
        f" ({discarded} extra emitted call{'s' if discarded > 1 else ''} discarded)"
    return SkillOutcome(
        observation=rendered + note,
        tool_calls_made=1,
        payload={"tool": call.tool_name, "args": dict(call.arguments)})


def render_source_material(history: History, budget: int) -> str:
    """History for the writing prompt: newest last, oldest dropped first."""
    blocks = []
    for thought, act, observation in history.triples:
        blocks.append(f"Action: {act.render()}\nObservation: {observation}")
    kept: list[str] = []
    used = 0
    for block in reversed(blocks):
        cost = len(block) + 2
        if used + cost > budget and kept:
            break
        if cost > budget and not kept:
            block = block[:budget]
            cost = len(block)
        kept.append(block)
        used += cost
    kept.reverse()
    return "\n\n".join(kept)


def _writing_prompt(action: SkillAction, context: SkillContext) -> str:
    return "\n".join([
        "You compose a finished document from the gathered material below.",
        "Use only facts that appear in the question or the material.",
        "",
        f"Question: {context.question}",
        "",
        "Gathered material:",
        render_source_material(context.history, context.writing_budget),
        "",
        f"{WRITING_MARKER} {action.objective}",
    ])


def exec_writing(action: SkillAction, context: SkillContext) -> SkillOutcome:
    """One backend call; the generated document is the observation."""
    try:
        document = context.backend.complete(
            user_request(_writing_prompt(action, context), model=context.model))
    except BackendUnavailable as exc:
        return SkillOutcome(
            observation=f"Writing failed: {exc}",
            error=OutcomeError(kind=type(exc).__name__, message=str(exc)))
    return SkillOutcome(observation=document, tool_calls_made=0)
