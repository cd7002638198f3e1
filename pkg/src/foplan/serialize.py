"""Policy and value-function files, in the problem files' S-expression
grammar with ``(policy ...)`` / ``(value ...)`` top forms."""

from __future__ import annotations

from typing import Iterable

from .domains import ProblemSpec, SNode, read_sexprs, render_fluent, _parse_fluent
from .errors import ParseError
from .fovi import Policy, ValueFunction
from .states import AbstractState
from .terms import FluentTerm, Term, make_term

PolicyTriple = tuple[AbstractState, str, tuple[Term, ...]]


def _render_state_forms(state: AbstractState) -> str:
    parts = ["(pos " + " ".join(render_fluent(f) for f in state.positive) + ")"]
    for n in state.negatives:
        parts.append("(neg " + " ".join(render_fluent(f) for f in n) + ")")
    return " ".join(parts)


def _parse_state_forms(forms: Iterable[SNode], ctx: SNode) -> AbstractState:
    positive = FluentTerm()
    negatives = []
    for form in forms:
        head = form.head()
        if head == "pos":
            positive = FluentTerm(_parse_fluent(f) for f in form.items[1:])
        elif head == "neg":
            negatives.append(FluentTerm(_parse_fluent(f) for f in form.items[1:]))
        else:
            raise ParseError(f"unknown state form {head!r}", form.line, form.col)
    return AbstractState(positive, negatives)


def render_value(vf: ValueFunction) -> str:
    out = ["(value"]
    for state, val in vf.entries:
        out.append(f"  (entry {repr(val)} {_render_state_forms(state)})")
    out.append(")")
    return "\n".join(out) + "\n"


def parse_value(text: str) -> ValueFunction:
    forms = read_sexprs(text)
    if len(forms) != 1 or forms[0].head() != "value":
        raise ParseError("expected a single (value ...) form")
    entries = []
    for entry in forms[0].items[1:]:
        if entry.head() != "entry" or len(entry.items) < 2:
            raise ParseError("expected (entry <number> (pos ...) ...)", entry.line, entry.col)
        val = entry.items[1].value
        if not isinstance(val, float):
            raise ParseError("entry value must be a number", entry.line, entry.col)
        state = _parse_state_forms(entry.items[2:], entry)
        entries.append((state, val))
    return ValueFunction(entries)


def policy_triples(policy: Policy) -> list[PolicyTriple]:
    """The serializable core of a policy: state, action name, and the
    action's parameters as resolved by the chosen applicability."""
    out = []
    for state, action, app in policy.entries:
        out.append((state, action.name, app.ground_params(action.params)))
    return out


def render_policy(policy: Policy) -> str:
    out = ["(policy"]
    for state, name, params in policy_triples(policy):
        args = " ".join(p.name for p in params)
        head = f"(action {name} (args {args}))" if params else f"(action {name})"
        out.append(f"  (entry {head} {_render_state_forms(state)})")
    out.append(")")
    return "\n".join(out) + "\n"


def parse_policy(text: str) -> list[PolicyTriple]:
    forms = read_sexprs(text)
    if len(forms) != 1 or forms[0].head() != "policy":
        raise ParseError("expected a single (policy ...) form")
    out: list[PolicyTriple] = []
    for entry in forms[0].items[1:]:
        if entry.head() != "entry" or len(entry.items) < 2:
            raise ParseError("expected (entry (action ...) (pos ...) ...)", entry.line, entry.col)
        action_form = entry.items[1]
        if action_form.head() != "action":
            raise ParseError("entry needs an (action ...) form", entry.line, entry.col)
        name = action_form.items[1].value
        if not isinstance(name, str):
            raise ParseError("action name must be a symbol", action_form.line, action_form.col)
        params: tuple[Term, ...] = ()
        for form in action_form.items[2:]:
            if form.head() == "args":
                params = tuple(
                    make_term(a.value)
                    for a in form.items[1:]
                    if isinstance(a.value, str)
                )
        state = _parse_state_forms(entry.items[2:], entry)
        out.append((state, name, params))
    return out
