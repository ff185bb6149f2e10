"""Control loops for every benchmark method.

GoalAct re-plans the full global plan before each executed action and routes
actions through the skill registry.  The four baseline loops share the same
environment, backend, iteration cap, and terminal summarization but differ in
how much planning and what action space they get:

  PlanAndSolve   - one plan up front, executed without revision.
  PlanAndExecute - re-planned free-text sub-tasks, each mapped to one tool call.
  ReAct          - no plan; one thought plus one tool call per iteration.
  CodeAct        - no plan; one sandbox script per iteration.

Recoverable trouble (tool errors, malformed emissions, backend outages inside
a skill) always degrades to an observation so the next iteration can react;
only configuration faults and scripted-fixture misses abort a run.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Optional

from .backends import (
    CompletionRequest,
    strip_code_fences,
    user_request,
)
from .environment import ToolEnvironment, render_row, render_rows
from .errors import (
    AuthFailure,
    BackendUnavailable,
    CassetteMiss,
    FatalError,
    PlanningFailed,
    PlanParseError,
    PlanValidationError,
    RuleMiss,
    SkillDisabled,
    SkillUnknown,
    ToolError,
)
from .generator import Task
from .plan import (
    CODING,
    FINISH,
    SEARCHING,
    TERMINATION_FATAL,
    TERMINATION_FINISH,
    TERMINATION_MAX_ITERATIONS,
    WRITING,
    GlobalPlan,
    History,
    LlmExchange,
    PlanStep,
    SkillAction,
    ToolCallRecord,
    Trajectory,
    first_pending,
    history_of,
    truncate_observation,
)
from .planner import (
    load_default_exemplars,
    parse_step_texts,
    render_history,
    splice_pending,
    update_global_plan,
)
from .sandbox import (
    GRAMMAR_REFERENCE,
    SandboxLimits,
    Script,
    eval_script,
    render_sandbox_outcome,
)
from .skills import (
    SkillContext,
    SkillRegistry,
    default_registry,
    dispatch,
    parse_tool_emission,
)

METHOD_GOALACT = "GoalAct"
METHOD_PLAN_AND_SOLVE = "PlanAndSolve"
METHOD_PLAN_AND_EXECUTE = "PlanAndExecute"
METHOD_REACT = "ReAct"
METHOD_CODEACT = "CodeAct"
METHODS = (METHOD_GOALACT, METHOD_PLAN_AND_SOLVE, METHOD_PLAN_AND_EXECUTE,
           METHOD_REACT, METHOD_CODEACT)

ABLATION_NO_GLOBAL_PLAN = "no_global_plan"
ABLATION_NO_SEARCHING = "no_searching"
ABLATION_NO_CODING = "no_coding"
ABLATION_NO_WRITING = "no_writing"
ABLATIONS = (ABLATION_NO_GLOBAL_PLAN, ABLATION_NO_SEARCHING,
             ABLATION_NO_CODING, ABLATION_NO_WRITING)

SUMMARY_MARKER = "Summarize the trajectory and give the final answer."
REACT_MARKER = "Respond with the next thought and action."
CODEACT_MARKER = "Computation turn:"
NO_PLAN_MARKER = "Propose only the single next step."
PE_PLAN_MARKER = "Plan the remaining sub-tasks as free text."
PE_SUBTASK_MARKER = "Subtask:"
PE_SUBTASK_KIND = "Subtask"

_FINISH_TEXT_RE = re.compile(r"^\s*finish\s*(?:\[(.*)\])?\s*$",
                             re.IGNORECASE | re.DOTALL)

_FATAL_BACKEND = (AuthFailure, RuleMiss, CassetteMiss)


@dataclass(frozen=True)
class RunConfig:
    method: str = METHOD_GOALACT
    max_iterations: int = 10
    ablations: frozenset[str] = frozenset()
    exemplar_count: int = 2
    exemplars_file: Optional[str] = None
    max_plan_steps: int = 12
    sandbox_limits: SandboxLimits = SandboxLimits()
    observation_bytes: int = 4096
    writing_budget: int = 12000
    model: str = "scripted"
    custom_skills: tuple[tuple[str, str], ...] = ()  # (name, description)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise FatalError(f"unknown method {self.method!r}; "
                             f"expected one of {', '.join(METHODS)}")
        if self.max_iterations < 1:
            raise FatalError("max_iterations must be at least 1")
        unknown = set(self.ablations) - set(ABLATIONS)
        if unknown:
            raise FatalError(f"unknown ablation flags: {sorted(unknown)}")
        if self.ablations and self.method != METHOD_GOALACT:
            raise FatalError("ablation switches only apply to GoalAct")


def normalize_method(name: str) -> str:
    key = re.sub(r"[-_\s]", "", name).lower()
    aliases = {
        "goalact": METHOD_GOALACT,
        "planandsolve": METHOD_PLAN_AND_SOLVE,
        "ps": METHOD_PLAN_AND_SOLVE,
        "planandexecute": METHOD_PLAN_AND_EXECUTE,
        "pe": METHOD_PLAN_AND_EXECUTE,
        "react": METHOD_REACT,
        "codeact": METHOD_CODEACT,
    }
    if key not in aliases:
        raise FatalError(f"unknown method name {name!r}")
    return aliases[key]


# --- recording wrappers ------------------------------------------------------------

class RecordingBackend:
    """Delegates completions and logs every exchange into the trajectory."""

    def __init__(self, inner: Any, trajectory: Trajectory):
        self.inner = inner
        self.trajectory = trajectory
        self.purpose = "unspecified"

    def complete(self, request: CompletionRequest) -> str:
        response = self.inner.complete(request)
        self.trajectory.record_llm(LlmExchange(
            purpose=self.purpose,
            model=request.model,
            temperature=request.temperature,
            messages=[{"role": m.role, "content": m.content}
                      for m in request.messages],
            response=response,
            attempts=getattr(self.inner, "last_attempts", 1),
        ))
        return response


class RecordingEnvironment:
    """Delegates tool calls and logs each one into the trajectory."""

    def __init__(self, inner: ToolEnvironment, trajectory: Trajectory):
        self.inner = inner
        self.trajectory = trajectory

    @property
    def tools(self):
        return self.inner.tools

    @property
    def tables(self):
        return self.inner.tables

    def tool(self, name: str):
        return self.inner.tool(name)

    def table(self, name: str):
        return self.inner.table(name)

    def render_tool_descriptions(self) -> str:
        return self.inner.render_tool_descriptions()

    def render_table_schemas(self) -> str:
        return self.inner.render_table_schemas()

    def invoke_tool(self, call):
        try:
            rows = self.inner.invoke_tool(call)
        except ToolError as exc:
            self.trajectory.record_tool(ToolCallRecord(
                tool=call.tool_name, arguments=dict(call.arguments),
                result=str(exc), ok=False))
            raise
        self.trajectory.record_tool(ToolCallRecord(
            tool=call.tool_name, arguments=dict(call.arguments),
            result=render_rows(rows), ok=True))
        return rows


# --- shared pieces -------------------------------------------------------------------

def summarize(question: str, history_text: str, backend: Any,
              model: str = "scripted",
              best_observation: str = "") -> tuple[str, bool]:
    """Terminal summarization; degrades to the best-known observation."""
    prompt = "\n".join([
        SUMMARY_MARKER,
        f"Question: {question}",
        "Trajectory:",
        history_text,
        "Final answer:",
    ])
    try:
        return backend.complete(user_request(prompt, model=model)), False
    except BackendUnavailable as exc:
        fallback = best_observation or "(no observations gathered)"
        return f"[degraded: {exc}] {fallback}", True


def _registry_for(config: RunConfig) -> SkillRegistry:
    from .skills import SkillDescriptor, register_skill

    registry = default_registry()
    for name, description in config.custom_skills:
        registry = register_skill(registry, name,
                                  SkillDescriptor(name=name,
                                                  description=description))
    if ABLATION_NO_SEARCHING in config.ablations:
        registry = registry.disable(SEARCHING)
    if ABLATION_NO_CODING in config.ablations:
        registry = registry.disable(CODING)
    if ABLATION_NO_WRITING in config.ablations:
        registry = registry.disable(WRITING)
    if len(registry.enabled_entries()) < 2:
        raise FatalError("a run needs at least one enabled skill besides Finish")
    return registry


def _exemplars_for(config: RunConfig) -> list[str]:
    if config.exemplars_file:
        from .planner import load_exemplars_file

        return load_exemplars_file(config.exemplars_file,
                                   config.exemplar_count)
    return load_default_exemplars(config.exemplar_count)


def _execute_action(action: SkillAction, context: SkillContext,
                    registry: SkillRegistry) -> tuple[str, Optional[dict]]:
    """Dispatch one action; dispatch-level faults become observations too."""
    try:
        outcome = dispatch(action, context, registry)
    except (SkillDisabled, SkillUnknown) as exc:
        return f"Action not executed: {exc}", None
    payload = dict(outcome.payload) if outcome.payload else None
    return outcome.observation, payload


def _mark_executed(plan: GlobalPlan, step: PlanStep, observation: str,
                   payload: Optional[dict]) -> GlobalPlan:
    steps = tuple(
        s.mark_executed(observation, payload) if s.index == step.index else s
        for s in plan.steps
    )
    return GlobalPlan(steps=steps, revision=plan.revision)


def _last_observation(history: History) -> str:
    if not history.triples:
        return ""
    return history.triples[-1][2]


# --- GoalAct --------------------------------------------------------------------------

def run_goalact(task: Task, env: ToolEnvironment, config: RunConfig,
                backend: Any) -> Trajectory:
    """Plan, execute one step, observe, re-plan, until Finish or the cap."""
    if ABLATION_NO_GLOBAL_PLAN in config.ablations:
        return _run_goalact_planless(task, env, config, backend)

    traj = Trajectory(task_id=task.id, method=METHOD_GOALACT)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    registry = _registry_for(config)
    exemplars = _exemplars_for(config)
    plan: Optional[GlobalPlan] = None

    try:
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            rec_backend.purpose = "planning"
            try:
                plan = update_global_plan(
                    task.query, rec_env, plan, rec_backend, registry=registry,
                    exemplars=exemplars, exemplar_count=config.exemplar_count,
                    max_plan_steps=config.max_plan_steps, model=config.model)
            except (PlanningFailed, BackendUnavailable) as exc:
                _finalize(traj, task, render_history(history_of(plan)),
                          rec_backend, config,
                          reason=TERMINATION_FATAL,
                          best_observation=f"planning failed: {exc}")
                return traj
            traj.record_plan(plan)
            step = first_pending(plan)
            history = history_of(plan)
            if step is None or step.action.kind == FINISH:
                _finalize(traj, task, render_history(history), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=_last_observation(history))
                return traj
            context = _context(task, history, rec_env, rec_backend, config)
            rec_backend.purpose = f"skill:{step.action.kind}"
            observation, payload = _execute_action(step.action, context,
                                                   registry)
            plan = _mark_executed(plan, step, observation, payload)
        history = history_of(plan)
        _finalize(traj, task, render_history(history), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=_last_observation(history))
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


def _run_goalact_planless(task: Task, env: ToolEnvironment, config: RunConfig,
                          backend: Any) -> Trajectory:
    """The w/o-global-plan ablation: single-step queries, same skills."""
    traj = Trajectory(task_id=task.id, method=METHOD_GOALACT)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    registry = _registry_for(config)
    triples: list[tuple[str, SkillAction, str]] = []

    try:
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            history = History(triples=tuple(triples))
            rec_backend.purpose = "next_step"
            prompt = "\n".join([
                "You act step by step with the skills below; no plan is kept.",
                _skill_menu_text(registry),
                "Available tools:",
                rec_env.render_tool_descriptions(),
                "Data tables:",
                rec_env.render_table_schemas(),
                f"Question: {task.query}",
                "Steps so far:",
                render_history(history),
                NO_PLAN_MARKER,
                'Respond with a JSON array holding one {"Thinking": "...", '
                '"Action": "Kind[objective]"} object.',
            ])
            step = _ask_single_step(rec_backend, prompt, registry, config)
            if step is None:
                triples.append(("(unparseable step)",
                                SkillAction(kind=SEARCHING, objective="none"),
                                "The step could not be parsed; try again."))
                continue
            thought, action = step
            if action.kind == FINISH:
                _finalize(traj, task, render_history(history), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=_last_observation(history))
                return traj
            context = _context(task, history, rec_env, rec_backend, config)
            rec_backend.purpose = f"skill:{action.kind}"
            observation, payload = _execute_action(action, context, registry)
            if payload:
                action = SkillAction(kind=action.kind,
                                     objective=action.objective,
                                     payload=payload)
            triples.append((thought, action, observation))
        history = History(triples=tuple(triples))
        _finalize(traj, task, render_history(history), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=_last_observation(history))
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


def _skill_menu_text(registry: SkillRegistry) -> str:
    lines = [f"{i}. {name}: {desc}"
             for i, (name, desc) in enumerate(registry.enabled_entries(), 1)]
    return "Skills:\n" + "\n".join(lines)


def _ask_single_step(backend: Any, prompt: str, registry: SkillRegistry,
                     config: RunConfig) -> Optional[tuple[str, SkillAction]]:
    from .planner import parse_action

    raw = backend.complete(user_request(prompt, model=config.model))
    try:
        pairs = parse_step_texts(raw)
        thought, text = pairs[0]
        return thought, parse_action(text, registry.kinds())
    except PlanParseError:
        return None


def _context(task: Task, history: History, env: Any, backend: Any,
             config: RunConfig) -> SkillContext:
    return SkillContext(
        question=task.query,
        history=history,
        env=env,
        backend=backend,
        sandbox_limits=config.sandbox_limits,
        observation_bytes=config.observation_bytes,
        writing_budget=config.writing_budget,
        model=config.model,
    )


def _finalize(traj: Trajectory, task: Task, history_text: str, backend: Any,
              config: RunConfig, reason: str, best_observation: str) -> None:
    backend.purpose = "summarize"
    answer, degraded = summarize(task.query, history_text, backend,
                                 model=config.model,
                                 best_observation=best_observation)
    traj.final_answer = answer
    traj.degraded = degraded
    traj.termination_reason = reason


# --- Plan-and-Solve --------------------------------------------------------------------

def run_plan_and_solve(task: Task, env: ToolEnvironment, config: RunConfig,
                       backend: Any) -> Trajectory:
    """One planning call, then every step in order with no adaptation."""
    traj = Trajectory(task_id=task.id, method=METHOD_PLAN_AND_SOLVE)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    registry = _registry_for(config)
    exemplars = _exemplars_for(config)

    try:
        rec_backend.purpose = "planning"
        try:
            plan = update_global_plan(
                task.query, rec_env, None, rec_backend, registry=registry,
                exemplars=exemplars, exemplar_count=config.exemplar_count,
                max_plan_steps=config.max_plan_steps, model=config.model)
        except (PlanningFailed, BackendUnavailable) as exc:
            traj.step_count = 1
            _finalize(traj, task, "", rec_backend, config,
                      reason=TERMINATION_FATAL,
                      best_observation=f"planning failed: {exc}")
            return traj
        traj.record_plan(plan)
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            step = first_pending(plan)
            history = history_of(plan)
            if step is None or step.action.kind == FINISH:
                _finalize(traj, task, render_history(history), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=_last_observation(history))
                return traj
            context = _context(task, history, rec_env, rec_backend, config)
            rec_backend.purpose = f"skill:{step.action.kind}"
            observation, payload = _execute_action(step.action, context,
                                                   registry)
            plan = _mark_executed(plan, step, observation, payload)
        history = history_of(plan)
        _finalize(traj, task, render_history(history), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=_last_observation(history))
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


# --- Plan-and-Execute --------------------------------------------------------------------

def _free_action(text: str) -> SkillAction:
    match = _FINISH_TEXT_RE.match(text)
    if match:
        return SkillAction(kind=FINISH, objective=(match.group(1) or "").strip())
    return SkillAction(kind=PE_SUBTASK_KIND, objective=text.strip())


def _pe_plan_prompt(question: str, env: Any, history: History) -> str:
    return "\n".join([
        "You direct an agent that can run exactly one retrieval tool call "
        "per sub-task. Describe each remaining sub-task in plain language.",
        "Available tools:",
        env.render_tool_descriptions(),
        "Data tables:",
        env.render_table_schemas(),
        f"Question: {question}",
        "Executed so far:",
        render_history(history),
        PE_PLAN_MARKER,
        'Respond with a JSON array of {"Thinking": "...", "Action": "..."} '
        'objects; the final Action must be "Finish".',
    ])


def _pe_update_plan(question: str, env: Any, plan_prev: Optional[GlobalPlan],
                    backend: Any, config: RunConfig) -> GlobalPlan:
    history = history_of(plan_prev)
    executed = tuple(plan_prev.steps[:len(history)]) if plan_prev else ()
    revision = plan_prev.revision + 1 if plan_prev else 1
    prompt = _pe_plan_prompt(question, env, history)
    repair = ("\n\nYour previous reply could not be used. Output a valid "
              "structured array only.")
    failure: Exception | None = None
    for attempt_prompt in (prompt, prompt + repair):
        raw = backend.complete(user_request(attempt_prompt, model=config.model))
        try:
            pairs = parse_step_texts(raw)
            parsed = [(thought, _free_action(text)) for thought, text in pairs]
            return splice_pending(executed, parsed, revision,
                                  max_steps=config.max_plan_steps)
        except (PlanParseError, PlanValidationError) as exc:
            failure = exc
    raise PlanningFailed(f"no valid sub-task plan after repair retry: {failure}")


def _exec_subtask(objective: str, task: Task, env: Any, backend: Any,
                  config: RunConfig) -> tuple[str, Optional[dict]]:
    """The generic executor: one backend-chosen tool call per sub-task."""
    prompt = "\n".join([
        "Map the sub-task below to exactly one tool call. Respond with a "
        "single JSON object {\"tool\": \"<name>\", \"args\": {...}}.",
        "Available tools:",
        env.render_tool_descriptions(),
        f"Question: {task.query}",
        f"{PE_SUBTASK_MARKER} {objective}",
    ])
    try:
        emission = backend.complete(user_request(prompt, model=config.model))
    except BackendUnavailable as exc:
        return f"Sub-task failed before any tool ran: {exc}", None
    calls, problem = parse_tool_emission(emission)
    if problem is not None:
        return f"Sub-task emitted no usable tool call ({problem}).", None
    call = calls[0]
    payload = {"tool": call.tool_name, "args": dict(call.arguments)}
    try:
        rows = env.invoke_tool(call)
    except ToolError as exc:
        return f"Tool call {call.tool_name} failed: {exc}", payload
    spec = env.tool(call.tool_name)
    rendered = render_row(rows[0]) if spec.semantics == "get_record" \
        else render_rows(rows)
    return truncate_observation(rendered, config.observation_bytes), payload


def run_plan_and_execute(task: Task, env: ToolEnvironment, config: RunConfig,
                         backend: Any) -> Trajectory:
    """Re-planned free-text sub-tasks run by the generic one-call executor."""
    traj = Trajectory(task_id=task.id, method=METHOD_PLAN_AND_EXECUTE)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    plan: Optional[GlobalPlan] = None

    try:
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            rec_backend.purpose = "planning"
            try:
                plan = _pe_update_plan(task.query, rec_env, plan, rec_backend,
                                       config)
            except (PlanningFailed, BackendUnavailable) as exc:
                _finalize(traj, task, render_history(history_of(plan)),
                          rec_backend, config, reason=TERMINATION_FATAL,
                          best_observation=f"planning failed: {exc}")
                return traj
            traj.record_plan(plan)
            step = first_pending(plan)
            history = history_of(plan)
            if step is None or step.action.kind == FINISH:
                _finalize(traj, task, render_history(history), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=_last_observation(history))
                return traj
            rec_backend.purpose = "subtask"
            observation, payload = _exec_subtask(step.action.objective, task,
                                                 rec_env, rec_backend, config)
            plan = _mark_executed(plan, step, observation, payload)
        history = history_of(plan)
        _finalize(traj, task, render_history(history), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=_last_observation(history))
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


# --- ReAct -----------------------------------------------------------------------------

def _parse_thought_action(raw: str) -> Optional[tuple[str, str]]:
    body = strip_code_fences(raw)
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        start, end = body.find("{"), body.rfind("}")
        if start < 0 or end <= start:
            return None
        try:
            doc = json.loads(body[start:end + 1])
        except json.JSONDecodeError:
            return None
    if isinstance(doc, list) and doc:
        doc = doc[0]
    if not isinstance(doc, dict):
        return None
    thought = doc.get("Thought", doc.get("Thinking"))
    action = doc.get("Action")
    if thought is None or action is None:
        return None
    return str(thought), str(action)


def _render_transcript(lines: list[str]) -> str:
    return "\n".join(lines)


def run_react(task: Task, env: ToolEnvironment, config: RunConfig,
              backend: Any) -> Trajectory:
    """Incremental thought-action-observation with no global plan."""
    traj = Trajectory(task_id=task.id, method=METHOD_REACT)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    lines: list[str] = []
    last_observation = ""

    try:
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            rec_backend.purpose = "react_step"
            prompt = "\n".join([
                "You solve the task through alternating thought, action, and "
                "observation steps.",
                "Each action is exactly one tool call written as "
                "tool_name[key=value, ...], or Finish[answer] once the "
                "observations already answer the question.",
                "Available tools:",
                rec_env.render_tool_descriptions(),
                "Data tables:",
                rec_env.render_table_schemas(),
                f"Question: {task.query}",
                "Transcript:",
                _render_transcript(lines),
                REACT_MARKER,
                'Respond with a JSON object {"Thought": "...", "Action": "..."}.',
            ])
            parsed = _parse_thought_action(rec_backend.complete(
                user_request(prompt, model=config.model)))
            if parsed is None:
                lines.append("Observation: the previous response could not "
                             "be parsed; answer with the JSON object format.")
                continue
            thought, action_text = parsed
            lines.append(f"Thought: {thought}")
            lines.append(f"Action: {action_text}")
            if _FINISH_TEXT_RE.match(action_text):
                _finalize(traj, task, _render_transcript(lines), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=last_observation)
                return traj
            observation = _react_observe(action_text, rec_env, config)
            last_observation = observation
            lines.append(f"Observation: {observation}")
        _finalize(traj, task, _render_transcript(lines), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=last_observation)
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


def _react_observe(action_text: str, env: Any, config: RunConfig) -> str:
    calls, problem = parse_tool_emission(action_text)
    if problem is not None:
        return f"No usable tool call found ({problem})."
    call = calls[0]
    try:
        rows = env.invoke_tool(call)
    except ToolError as exc:
        return f"Tool call {call.tool_name} failed: {exc}"
    spec = env.tool(call.tool_name)
    rendered = render_row(rows[0]) if spec.semantics == "get_record" \
        else render_rows(rows)
    return truncate_observation(rendered, config.observation_bytes)


# --- CodeAct ---------------------------------------------------------------------------

def run_codeact(task: Task, env: ToolEnvironment, config: RunConfig,
                backend: Any) -> Trajectory:
    """One whole sandbox script per iteration; the script is the action."""
    traj = Trajectory(task_id=task.id, method=METHOD_CODEACT)
    rec_backend = RecordingBackend(backend, traj)
    rec_env = RecordingEnvironment(env, traj)
    lines: list[str] = []
    last_observation = ""

    try:
        for t in range(1, config.max_iterations + 1):
            traj.step_count = t
            rec_backend.purpose = "codeact_step"
            prompt = "\n".join([
                "You solve the task by writing one script per turn in the "
                "sandbox language below, or Finish[answer] once done.",
                GRAMMAR_REFERENCE,
                "Available tools:",
                rec_env.render_tool_descriptions(),
                "Data tables:",
                rec_env.render_table_schemas(),
                f"Question: {task.query}",
                "Transcript:",
                _render_transcript(lines),
                CODEACT_MARKER,
            ])
            emission = rec_backend.complete(
                user_request(prompt, model=config.model))
            body = strip_code_fences(emission)
            if _FINISH_TEXT_RE.match(body):
                lines.append(f"Action: {body.strip()}")
                _finalize(traj, task, _render_transcript(lines), rec_backend,
                          config, reason=TERMINATION_FINISH,
                          best_observation=last_observation)
                return traj
            result = eval_script(Script(body), rec_env, config.sandbox_limits)
            observation = truncate_observation(render_sandbox_outcome(result),
                                               config.observation_bytes)
            last_observation = observation
            lines.append("Action: script")
            lines.append(f"Observation: {observation}")
        _finalize(traj, task, _render_transcript(lines), rec_backend, config,
                  reason=TERMINATION_MAX_ITERATIONS,
                  best_observation=last_observation)
        return traj
    except _FATAL_BACKEND as exc:
        traj.termination_reason = TERMINATION_FATAL
        traj.final_answer = None
        exc.trajectory = traj  # let the caller persist the partial record
        raise


# --- entry point -----------------------------------------------------------------------

_RUNNERS = {
    METHOD_GOALACT: run_goalact,
    METHOD_PLAN_AND_SOLVE: run_plan_and_solve,
    METHOD_PLAN_AND_EXECUTE: run_plan_and_execute,
    METHOD_REACT: run_react,
    METHOD_CODEACT: run_codeact,
}


def run_task(task: Task, env: ToolEnvironment, config: RunConfig,
             backend: Any) -> Trajectory:
    """Run one task with the configured method's loop."""
    runner = _RUNNERS[config.method]
    return runner(task, env, config, backend)
