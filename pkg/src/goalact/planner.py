"""Global-plan maintenance: prompt assembly, response parsing, plan splicing.

Each planning round renders the question, tool and table descriptions,
few-shot exemplars, and the executed history into the planning template,
asks the backend for the *continuation* of the plan, and splices the parsed
pending steps onto the immutable executed prefix.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any, Optional, Sequence

from .backends import strip_code_fences, user_request
from .environment import ToolEnvironment
from .errors import (
    EmptyPlan,
    MalformedDocument,
    MissingKeys,
    PlanningFailed,
    PlanParseError,
    PlanValidationError,
    TemplateSlotMissing,
    UnknownSkill,
)
from .plan import (
    BUILTIN_KINDS,
    DEFAULT_MAX_PLAN_STEPS,
    FINISH,
    GlobalPlan,
    History,
    PlanStep,
    SkillAction,
    history_of,
    validate_plan,
)

PROMPT_VERSION = 1
DEFAULT_EXEMPLAR_COUNT = 2

# Section header the template places above the rendered history; scripted
# fixtures key on it to recognize planning prompts.
PLANNING_MARKER = "Existing planning chain:"

REPAIR_INSTRUCTION = (
    "Your previous reply could not be used. Output a valid structured array "
    "only: a JSON array of objects, each with exactly the keys \"Thinking\" "
    "and \"Action\"."
)

_NUMBER_WORDS = ["zero", "one", "two", "three", "four", "five", "six",
                 "seven", "eight", "nine", "ten", "eleven", "twelve"]

_SLOTS = ("question", "table_used_prompt", "tool_prompt", "memory",
          "scratchpad", "skill_count", "skill_menu")

_ACTION_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[(.*)\])?\s*$",
                        re.DOTALL)


def count_word(n: int) -> str:
    return _NUMBER_WORDS[n] if 0 <= n < len(_NUMBER_WORDS) else str(n)


def load_template() -> str:
    return resources.files("goalact.prompts").joinpath(
        "global_planning.txt").read_text(encoding="utf-8")


def load_default_exemplars(count: int = DEFAULT_EXEMPLAR_COUNT) -> list[str]:
    """The packaged few-shot transcripts, one per planning process."""
    raw = resources.files("goalact.prompts").joinpath(
        "exemplars.jsonl").read_text(encoding="utf-8")
    transcripts = [json.loads(line)["transcript"]
                   for line in raw.splitlines() if line.strip()]
    if count > len(transcripts):
        raise TemplateSlotMissing(
            f"{count} exemplars requested but only {len(transcripts)} shipped")
    return transcripts[:count]


def load_exemplars_file(path: Any, count: int) -> list[str]:
    """Exemplars from a line-delimited log file with a `transcript` field."""
    transcripts = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                transcripts.append(json.loads(line)["transcript"])
    if count > len(transcripts):
        raise TemplateSlotMissing(
            f"{count} exemplars requested but file holds {len(transcripts)}")
    return transcripts[:count]


@dataclass(frozen=True)
class PlannerPromptInputs:
    question: str
    tool_prompt: str
    table_prompt: str
    memory: tuple[str, ...]
    scratchpad: str


def render_history(history: History) -> str:
    """The {scratchpad} slot: Thought/Action/Observation lines, oldest first."""
    lines = []
    for thought, action, observation in history.triples:
        lines.append(f"Thought: {thought}")
        lines.append(f"Action: {action.render()}")
        lines.append(f"Observation: {observation}")
    return "\n".join(lines)


def render_skill_menu(registry: Optional[Any] = None) -> tuple[int, str]:
    """Numbered action-type list from the enabled registry entries."""
    if registry is None:
        from .skills import default_registry

        registry = default_registry()
    entries = registry.enabled_entries()
    lines = [f"{i}. {name}: {description}"
             for i, (name, description) in enumerate(entries, start=1)]
    return len(entries), "\n".join(lines)


def build_planning_prompt(inputs: PlannerPromptInputs,
                          registry: Optional[Any] = None) -> str:
    """Substitute every template slot; unresolved slots are an error."""
    skill_count, skill_menu = render_skill_menu(registry)
    values = {
        "question": inputs.question,
        "table_used_prompt": inputs.table_prompt,
        "tool_prompt": inputs.tool_prompt,
        "memory": "\n\n".join(inputs.memory),
        "scratchpad": inputs.scratchpad,
        "skill_count": count_word(skill_count),
        "skill_menu": skill_menu,
    }
    prompt = load_template()
    for slot in _SLOTS:
        marker = "{%s}" % slot
        if marker not in prompt:
            raise TemplateSlotMissing(f"template lost its {marker} marker")
        if values[slot] is None:
            raise TemplateSlotMissing(f"no renderer produced a value for {marker}")
        prompt = prompt.replace(marker, values[slot])
    return prompt


def parse_action(text: str, kinds: Sequence[str]) -> SkillAction:
    """Split 'Kind[objective]' into a SkillAction; kind match is case-insensitive."""
    match = _ACTION_RE.match(text)
    if not match:
        raise MalformedDocument(f"unparseable action string: {text!r}")
    word, objective = match.group(1), match.group(2) or ""
    canonical = {kind.lower(): kind for kind in kinds}
    kind = canonical.get(word.lower())
    if kind is None:
        raise UnknownSkill(f"action kind {word!r} is not a registered skill")
    if kind != FINISH and not objective.strip():
        raise MalformedDocument(
            f"{kind} action is missing its bracketed objective: {text!r}")
    return SkillAction(kind=kind, objective=objective.strip())


def parse_step_texts(raw: str) -> list[tuple[str, str]]:
    """Parse a completion into raw (thinking, action-text) pairs.

    Strips an optional code fence, accepts stray prose around the array, and
    requires each element to carry exactly the Thinking and Action keys.
    """
    text = strip_code_fences(raw)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("["), text.rfind("]")
        if start < 0 or end <= start:
            raise MalformedDocument("completion holds no parseable array")
        try:
            doc = json.loads(text[start:end + 1])
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"array does not parse: {exc}") from exc
    if not isinstance(doc, list):
        raise MalformedDocument(f"expected an array, got {type(doc).__name__}")
    if not doc:
        raise EmptyPlan("the parsed plan has no steps")
    pairs = []
    for i, item in enumerate(doc, start=1):
        if not isinstance(item, dict):
            raise MalformedDocument(f"step {i} is not an object")
        if set(item.keys()) != {"Thinking", "Action"}:
            raise MissingKeys(
                f"step {i} must have exactly the keys Thinking and Action, "
                f"got {sorted(item.keys())}")
        pairs.append((str(item["Thinking"]), str(item["Action"])))
    return pairs


def parse_plan_response(raw: str, kinds: Sequence[str] = BUILTIN_KINDS
                        ) -> list[tuple[str, SkillAction]]:
    """Parse a planner completion into (thought, SkillAction) pairs."""
    return [(thought, parse_action(text, kinds))
            for thought, text in parse_step_texts(raw)]


def splice_pending(executed: tuple[PlanStep, ...],
                   parsed: Sequence[tuple[str, SkillAction]], revision: int,
                   max_steps: Optional[int] = None) -> GlobalPlan:
    """Executed prefix (verbatim) plus freshly numbered pending steps."""
    pending = tuple(
        PlanStep(index=len(executed) + i, thought=thought, action=action)
        for i, (thought, action) in enumerate(parsed, start=1)
    )
    return validate_plan(GlobalPlan(steps=executed + pending,
                                    revision=revision), max_steps=max_steps)


def render_plan_steps(steps: Sequence[tuple[str, SkillAction]]) -> str:
    """The inverse of parse_plan_response, in the planner's output format."""
    doc = [{"Thinking": thought, "Action": action.render()}
           for thought, action in steps]
    return json.dumps(doc, ensure_ascii=False, indent=2)


def build_prompt_inputs(question: str, env: ToolEnvironment, history: History,
                        exemplars: Optional[Sequence[str]] = None,
                        exemplar_count: int = DEFAULT_EXEMPLAR_COUNT
                        ) -> PlannerPromptInputs:
    memory = tuple(exemplars) if exemplars is not None \
        else tuple(load_default_exemplars(exemplar_count))
    if len(memory) != exemplar_count:
        raise TemplateSlotMissing(
            f"memory holds {len(memory)} exemplars, configured for {exemplar_count}")
    return PlannerPromptInputs(
        question=question,
        tool_prompt=env.render_tool_descriptions(),
        table_prompt=env.render_table_schemas(),
        memory=memory,
        scratchpad=render_history(history),
    )


def update_global_plan(question: str, env: ToolEnvironment,
                       plan_prev: Optional[GlobalPlan], backend: Any,
                       registry: Optional[Any] = None,
                       exemplars: Optional[Sequence[str]] = None,
                       exemplar_count: int = DEFAULT_EXEMPLAR_COUNT,
                       max_plan_steps: int = DEFAULT_MAX_PLAN_STEPS,
                       model: str = "scripted") -> GlobalPlan:
    """One planning round: executed prefix preserved, pending suffix rewritten.

    The backend is called once, plus a single repair retry with a corrective
    instruction when its output cannot be parsed or validated.  Raises
    PlanningFailed when both attempts are unusable; backend errors propagate.
    """
    if registry is None:
        from .skills import default_registry

        registry = default_registry()
    history = history_of(plan_prev)
    executed = tuple(plan_prev.steps[:len(history)]) if plan_prev else ()
    inputs = build_prompt_inputs(question, env, history,
                                 exemplars=exemplars,
                                 exemplar_count=exemplar_count)
    prompt = build_planning_prompt(inputs, registry)
    revision = plan_prev.revision + 1 if plan_prev else 1
    kinds = registry.kinds()

    failure: Exception | None = None
    for attempt_prompt in (prompt, prompt + "\n\n" + REPAIR_INSTRUCTION):
        raw = backend.complete(user_request(attempt_prompt, model=model))
        try:
            parsed = parse_plan_response(raw, kinds)
            return splice_pending(executed, parsed, revision,
                                  max_steps=max_plan_steps)
        except (PlanParseError, PlanValidationError) as exc:
            failure = exc
    raise PlanningFailed(f"no valid plan after repair retry: {failure}")
