"""Resource-bounded scripting substrate for the Coding skill.

A small deterministic language whose only side effects are read-only tool
calls against the table environment.  It supports variables, arithmetic,
comparisons, if/else, while, for-each over lists, list and record values,
and an explicit return; tools appear as built-in functions.  Every
evaluation is metered: an expression-step budget, a tool-call budget, and an
output byte budget, all enforced inside the interpreter so faults come back
as data, never as exceptions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .backends import strip_code_fences, user_request
from .environment import ToolCall, ToolEnvironment, render_number
from .errors import BackendUnavailable, ToolError
from .plan import truncate_observation
from .skills import OutcomeError, SkillAction, SkillContext, SkillOutcome

CODING_MARKER = "Computation objective:"

FAULT_PARSE = "ParseError"
FAULT_RUNTIME = "RuntimeError"
FAULT_LIMIT = "LimitExceeded"

GRAMMAR_REFERENCE = """\
Script language reference (whitespace and newlines separate statements):

  statement := NAME "=" expr            assignment
             | "if" expr { ... } ["else" { ... }]
             | "while" expr { ... }
             | "for" NAME "in" expr { ... }      iterate a list
             | "return" expr
  expr      := numbers (42, 3.5), strings ("text"), true, false,
               lists ([a, b]), names, function calls,
               arithmetic (+ - * /), comparisons (== != < <= > >=),
               record fields (row.amount), list indexing (xs[0])
  builtins  := len(xs), first(xs), plus every registered tool, e.g.
               get_record("table", "field", "value")
               filter_records("table", "field", "value")

Return the final value explicitly with `return`."""


@dataclass(frozen=True)
class Script:
    source: str


@dataclass(frozen=True)
class SandboxLimits:
    max_eval_steps: int = 10000
    max_tool_calls: int = 50
    max_output_bytes: int = 4096

    def __post_init__(self) -> None:
        if min(self.max_eval_steps, self.max_tool_calls,
               self.max_output_bytes) <= 0:
            raise ValueError("sandbox limits must be strictly positive")


@dataclass(frozen=True)
class SandboxFault:
    kind: str  # ParseError | RuntimeError | LimitExceeded
    message: str


@dataclass
class SandboxResult:
    value: str
    trace: list[dict[str, Any]] = field(default_factory=list)
    steps_used: int = 0
    tool_calls_used: int = 0
    fault: Optional[SandboxFault] = None
    raw_value: Any = None  # unrendered return value, full precision

    @property
    def ok(self) -> bool:
        return self.fault is None


# --- lexer -----------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[\s;]+)
  | (?P<number>\d+\.\d+|\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/=<>(){}\[\],.])
""", re.VERBOSE)

_KEYWORDS = {"if", "else", "while", "for", "in", "return", "true", "false"}


class _Fault(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


class _Return(Exception):
    def __init__(self, value: Any):
        super().__init__("return")
        self.value = value


def _tokenize(source: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise _Fault(FAULT_PARSE,
                         f"unexpected character {source[pos]!r} at offset {pos}")
        pos = match.end()
        kind = match.lastgroup
        if kind == "ws":
            continue
        text = match.group()
        if kind == "name" and text in _KEYWORDS:
            tokens.append(("kw", text))
        else:
            tokens.append((kind, text))
    tokens.append(("eof", ""))
    return tokens


# --- parser ----------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, kind: str, text: Optional[str] = None) -> str:
        got_kind, got_text = self.next()
        if got_kind != kind or (text is not None and got_text != text):
            wanted = text or kind
            shown = got_text if got_text else "<eof>"
            raise _Fault(FAULT_PARSE, f"expected {wanted!r}, got {shown!r}")
        return got_text

    def program(self) -> list[Any]:
        statements = []
        while self.peek()[0] != "eof":
            statements.append(self.statement())
        return statements

    def statement(self) -> Any:
        kind, text = self.peek()
        if kind == "kw" and text == "if":
            return self.if_statement()
        if kind == "kw" and text == "while":
            self.next()
            condition = self.expression()
            body = self.block()
            return ("while", condition, body)
        if kind == "kw" and text == "for":
            self.next()
            name = self.expect("name")
            self.expect("kw", "in")
            source = self.expression()
            body = self.block()
            return ("for", name, source, body)
        if kind == "kw" and text == "return":
            self.next()
            return ("return", self.expression())
        if kind == "name":
            name = self.next()[1]
            self.expect("op", "=")
            return ("assign", name, self.expression())
        raise _Fault(FAULT_PARSE, f"unexpected token {text!r}")

    def if_statement(self) -> Any:
        self.expect("kw", "if")
        condition = self.expression()
        then_body = self.block()
        else_body: list[Any] = []
        if self.peek() == ("kw", "else"):
            self.next()
            else_body = self.block()
        return ("if", condition, then_body, else_body)

    def block(self) -> list[Any]:
        self.expect("op", "{")
        statements = []
        while self.peek() != ("op", "}"):
            if self.peek()[0] == "eof":
                raise _Fault(FAULT_PARSE, "unterminated block")
            statements.append(self.statement())
        self.next()
        return statements

    def expression(self) -> Any:
        left = self.sum_expr()
        kind, text = self.peek()
        if kind == "op" and text in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            return ("binop", text, left, self.sum_expr())
        return left

    def sum_expr(self) -> Any:
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.next()[1]
            node = ("binop", op, node, self.term())
        return node

    def term(self) -> Any:
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.next()[1]
            node = ("binop", op, node, self.unary())
        return node

    def unary(self) -> Any:
        if self.peek() == ("op", "-"):
            self.next()
            return ("neg", self.unary())
        return self.postfix()

    def postfix(self) -> Any:
        node = self.primary()
        while True:
            if self.peek() == ("op", "."):
                self.next()
                node = ("field", node, self.expect("name"))
            elif self.peek() == ("op", "["):
                self.next()
                index = self.expression()
                self.expect("op", "]")
                node = ("index", node, index)
            else:
                return node

    def primary(self) -> Any:
        kind, text = self.next()
        if kind == "number":
            return ("lit", float(text) if "." in text else int(text))
        if kind == "string":
            return ("lit", text[1:-1].replace('\\"', '"').replace("\\\\", "\\"))
        if kind == "kw" and text in ("true", "false"):
            return ("lit", text == "true")
        if kind == "name":
            if self.peek() == ("op", "("):
                self.next()
                args = []
                if self.peek() != ("op", ")"):
                    args.append(self.expression())
                    while self.peek() == ("op", ","):
                        self.next()
                        args.append(self.expression())
                self.expect("op", ")")
                return ("call", text, args)
            return ("var", text)
        if kind == "op" and text == "[":
            items = []
            if self.peek() != ("op", "]"):
                items.append(self.expression())
                while self.peek() == ("op", ","):
                    self.next()
                    items.append(self.expression())
            self.expect("op", "]")
            return ("list", items)
        if kind == "op" and text == "(":
            node = self.expression()
            self.expect("op", ")")
            return node
        raise _Fault(FAULT_PARSE, f"unexpected token {text!r} in expression")


# --- evaluator -------------------------------------------------------------------

class _Interpreter:
    def __init__(self, env: ToolEnvironment, limits: SandboxLimits):
        self.env = env
        self.limits = limits
        self.vars: dict[str, Any] = {}
        self.steps = 0
        self.tool_calls = 0
        self.trace: list[dict[str, Any]] = []

    def tick(self) -> None:
        if self.steps >= self.limits.max_eval_steps:
            raise _Fault(FAULT_LIMIT,
                         f"evaluation stopped at {self.limits.max_eval_steps} steps")
        self.steps += 1

    def run(self, statements: list[Any]) -> Any:
        try:
            self.exec_block(statements)
        except _Return as ret:
            return ret.value
        return None

    def exec_block(self, statements: list[Any]) -> None:
        for statement in statements:
            self.exec_statement(statement)

    def exec_statement(self, node: Any) -> None:
        self.tick()
        op = node[0]
        if op == "assign":
            self.vars[node[1]] = self.eval(node[2])
        elif op == "if":
            if self.truthy(self.eval(node[1])):
                self.exec_block(node[2])
            else:
                self.exec_block(node[3])
        elif op == "while":
            while self.truthy(self.eval(node[1])):
                self.exec_block(node[2])
                self.tick()
        elif op == "for":
            source = self.eval(node[2])
            if not isinstance(source, list):
                raise _Fault(FAULT_RUNTIME, "for-each needs a list")
            for item in source:
                self.tick()
                self.vars[node[1]] = item
                self.exec_block(node[3])
        elif op == "return":
            raise _Return(self.eval(node[1]))
        else:  # pragma: no cover - parser emits no other statements
            raise _Fault(FAULT_RUNTIME, f"unknown statement {op}")

    @staticmethod
    def truthy(value: Any) -> bool:
        if isinstance(value, bool):
            return value
        raise _Fault(FAULT_RUNTIME,
                     "conditions must be boolean (use a comparison)")

    def eval(self, node: Any) -> Any:
        self.tick()
        op = node[0]
        if op == "lit":
            return node[1]
        if op == "var":
            if node[1] not in self.vars:
                raise _Fault(FAULT_RUNTIME, f"undefined variable {node[1]!r}")
            return self.vars[node[1]]
        if op == "list":
            return [self.eval(item) for item in node[1]]
        if op == "neg":
            value = self.eval(node[1])
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise _Fault(FAULT_RUNTIME, "negation needs a number")
            return -value
        if op == "field":
            record = self.eval(node[1])
            if not isinstance(record, dict):
                raise _Fault(FAULT_RUNTIME, "field access needs a record")
            if node[2] not in record:
                raise _Fault(FAULT_RUNTIME,
                             f"record has no field {node[2]!r}")
            return record[node[2]]
        if op == "index":
            target = self.eval(node[1])
            index = self.eval(node[2])
            if not isinstance(target, (list, str)):
                raise _Fault(FAULT_RUNTIME, "indexing needs a list or string")
            if isinstance(index, bool) or not isinstance(index, int):
                raise _Fault(FAULT_RUNTIME, "index must be an integer")
            if not 0 <= index < len(target):
                raise _Fault(FAULT_RUNTIME,
                             f"index {index} out of range (length {len(target)})")
            return target[index]
        if op == "binop":
            return self.binop(node[1], self.eval(node[2]), self.eval(node[3]))
        if op == "call":
            return self.call(node[1], [self.eval(arg) for arg in node[2]])
        raise _Fault(FAULT_RUNTIME, f"unknown expression {op}")

    @staticmethod
    def _numeric(value: Any) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool)

    def binop(self, op: str, left: Any, right: Any) -> Any:
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op in ("<", "<=", ">", ">="):
            if self._numeric(left) and self._numeric(right):
                pass
            elif isinstance(left, str) and isinstance(right, str):
                pass
            else:
                raise _Fault(FAULT_RUNTIME,
                             f"cannot order {type(left).__name__} against "
                             f"{type(right).__name__}")
            return {"<": left < right, "<=": left <= right,
                    ">": left > right, ">=": left >= right}[op]
        if op == "+":
            if isinstance(left, str) and isinstance(right, str):
                return left + right
            if self._numeric(left) and self._numeric(right):
                return left + right
            raise _Fault(FAULT_RUNTIME, "+ needs two numbers or two strings")
        if not (self._numeric(left) and self._numeric(right)):
            raise _Fault(FAULT_RUNTIME, f"{op} needs numbers")
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise _Fault(FAULT_RUNTIME, "division by zero")
            return left / right
        raise _Fault(FAULT_RUNTIME, f"unknown operator {op}")

    def call(self, name: str, args: list[Any]) -> Any:
        if name == "len":
            if len(args) != 1 or not isinstance(args[0], (list, str)):
                raise _Fault(FAULT_RUNTIME, "len takes one list or string")
            return len(args[0])
        if name == "first":
            if len(args) != 1 or not isinstance(args[0], list):
                raise _Fault(FAULT_RUNTIME, "first takes one list")
            if not args[0]:
                raise _Fault(FAULT_RUNTIME, "first of an empty list")
            return args[0][0]
        return self.call_tool(name, args)

    def call_tool(self, name: str, args: list[Any]) -> Any:
        specs = {spec.name: spec for spec in self.env.tools}
        if name not in specs:
            raise _Fault(FAULT_RUNTIME, f"unknown tool or function {name!r}")
        spec = specs[name]
        if len(args) != len(spec.parameters):
            raise _Fault(FAULT_RUNTIME,
                         f"{name} takes {len(spec.parameters)} arguments, "
                         f"got {len(args)}")
        if self.tool_calls >= self.limits.max_tool_calls:
            raise _Fault(FAULT_LIMIT,
                         f"tool budget of {self.limits.max_tool_calls} calls "
                         "exhausted")
        self.tool_calls += 1
        arguments = {pname: args[i]
                     for i, (pname, _) in enumerate(spec.parameters)}
        call = ToolCall(tool_name=name, arguments=arguments)
        try:
            rows = self.env.invoke_tool(call)
        except ToolError as exc:
            self.trace.append({"tool": name, "args": arguments,
                               "error": str(exc)})
            raise _Fault(FAULT_RUNTIME, f"tool {name} failed: {exc}")
        result: Any = dict(rows[0]) if spec.semantics == "get_record" \
            else [dict(r) for r in rows]
        self.trace.append({"tool": name, "args": arguments,
                           "rows": len(rows)})
        return result


def render_value(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, int, float)):
        return render_number(value)
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f'"{k}": {render_value(v)}' for k, v in value.items())
        return "{" + inner + "}"
    return str(value)


def eval_script(script: Script | str, env: ToolEnvironment,
                limits: SandboxLimits = SandboxLimits()) -> SandboxResult:
    """Run one script to completion; faults come back inside the result."""
    source = script.source if isinstance(script, Script) else script
    interp = _Interpreter(env, limits)
    try:
        statements = _Parser(_tokenize(source)).program()
    except _Fault as fault:
        return SandboxResult(value="", fault=SandboxFault(fault.kind,
                                                          fault.message))
    try:
        raw = interp.run(statements)
    except _Fault as fault:
        return SandboxResult(
            value="", trace=interp.trace, steps_used=interp.steps,
            tool_calls_used=interp.tool_calls,
            fault=SandboxFault(fault.kind, fault.message))
    rendered = truncate_observation(render_value(raw), limits.max_output_bytes)
    return SandboxResult(value=rendered, trace=interp.trace,
                         steps_used=interp.steps,
                         tool_calls_used=interp.tool_calls, raw_value=raw)


# --- the Coding skill --------------------------------------------------------------

def _coding_prompt(action: SkillAction, context: SkillContext) -> str:
    return "\n".join([
        "You write one short script in the sandbox language below to satisfy "
        "a computation objective. Respond with the script only.",
        "",
        GRAMMAR_REFERENCE,
        "",
        "Available tools:",
        context.env.render_tool_descriptions(),
        "",
        f"Question: {context.question}",
        f"{CODING_MARKER} {action.objective}",
    ])


def render_sandbox_outcome(result: SandboxResult) -> str:
    summary = (f"[{result.tool_calls_used} tool call"
               f"{'s' if result.tool_calls_used != 1 else ''}, "
               f"{result.steps_used} steps]")
    if result.fault is not None:
        return (f"Coding fault ({result.fault.kind}): {result.fault.message} "
                f"{summary}")
    return f"Result: {result.value} {summary}"


def exec_coding(action: SkillAction, context: SkillContext) -> SkillOutcome:
    """Ask the backend for a script, run it, observe the result or fault."""
    try:
        emission = context.backend.complete(
            user_request(_coding_prompt(action, context), model=context.model))
    except BackendUnavailable as exc:
        return SkillOutcome(
            observation=f"Coding failed before any script ran: {exc}",
            error=OutcomeError(kind=type(exc).__name__, message=str(exc)))
    source = strip_code_fences(emission)
    limits = context.sandbox_limits or SandboxLimits()
    result = eval_script(Script(source), context.env, limits)
    error = None
    if result.fault is not None:
        error = OutcomeError(kind=result.fault.kind,
                             message=result.fault.message)
    return SkillOutcome(
        observation=render_sandbox_outcome(result),
        tool_calls_made=result.tool_calls_used,
        error=error,
        payload={"script": source})
