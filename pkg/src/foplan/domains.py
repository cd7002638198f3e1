"""Problem file format: S-expression grammar, parser, validator, renderer.

A problem file carries one ``(domain ...)`` form with objects, optional
colors, stochastic actions, a goal with its reward, an initial state, and
the discount/convergence defaults.  Negated fluent terms are written
``(not (on W X) ...)``.  Variables are uppercase-first symbols, constants
lowercase-first; probabilities, costs, and rewards are literal numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .actions import ActionSchema, NatureChoice
from .errors import ParseError, ValidationError
from .states import AbstractState
from .terms import Const, Fluent, FluentTerm, Var, make_term

_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_TOKEN_RE = re.compile(r"\(|\)|;[^\n]*|[^\s();]+")


@dataclass(frozen=True)
class SNode:
    """One S-expression node with its source position."""

    value: Union[str, float, tuple["SNode", ...]]
    line: int
    col: int

    @property
    def is_list(self) -> bool:
        return isinstance(self.value, tuple)

    @property
    def items(self) -> tuple["SNode", ...]:
        assert isinstance(self.value, tuple)
        return self.value

    def head(self) -> Optional[str]:
        if self.is_list and self.items and isinstance(self.items[0].value, str):
            return self.items[0].value
        return None


def _tokenize(text: str):
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch == "\n":
            line += 1
            col = 1
            pos += 1
            continue
        if ch.isspace():
            col += 1
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unreadable character {ch!r}", line, col)
        tok = m.group(0)
        if not tok.startswith(";"):
            yield tok, line, col
        col += len(tok)
        pos = m.end()


def read_sexprs(text: str) -> list[SNode]:
    """Parse text into top-level S-expression nodes (never raises past a
    diagnostic with position)."""
    stack: list[tuple[list[SNode], int, int]] = []
    top: list[SNode] = []
    for tok, line, col in _tokenize(text):
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SNode(tuple(items), l0, c0)
            (stack[-1][0] if stack else top).append(node)
        else:
            value: Union[str, float] = (
                float(tok) if _NUMBER_RE.fullmatch(tok) else tok
            )
            (stack[-1][0] if stack else top).append(SNode(value, line, col))
    if stack:
        raise ParseError("unclosed '('", stack[-1][1], stack[-1][2])
    return top


@dataclass(frozen=True)
class ProblemSpec:
    """A fully validated planning problem."""

    name: str
    objects: tuple[Const, ...]
    colors: tuple[tuple[str, tuple[Const, ...]], ...]
    actions: tuple[ActionSchema, ...]
    goal: AbstractState
    goal_reward: float
    init: AbstractState
    gamma: float = 1.0
    epsilon: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sorted(self.objects)))
        object.__setattr__(
            self,
            "colors",
            tuple(
                sorted((name, tuple(sorted(members))) for name, members in self.colors)
            ),
        )
        object.__setattr__(
            self, "actions", tuple(sorted(self.actions, key=lambda a: a.name))
        )
        self._validate()

    def _validate(self) -> None:
        if self.goal_reward <= 0:
            raise ValidationError(f"goal reward must be positive, got {self.goal_reward}")
        if not 0 < self.gamma <= 1:
            raise ValidationError(f"gamma must lie in (0,1], got {self.gamma}")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate action name")
        if "done" not in names:
            raise ValidationError("a 'done' action is required")
        if len(set(self.objects)) != len(self.objects):
            raise ValidationError("duplicate object")
        colored: set[Const] = set()
        declared = set(self.objects)
        for color, members in self.colors:
            for m in members:
                if m not in declared:
                    raise ValidationError(f"color {color} mentions unknown object {m}")
                if m in colored:
                    raise ValidationError(f"object {m} assigned two colors")
                colored.add(m)
        self._check_arities()

    def _check_arities(self) -> None:
        arity: dict[str, int] = {}

        def see(term: FluentTerm, where: str) -> None:
            for f in term:
                prev = arity.setdefault(f.name, f.arity)
                if prev != f.arity:
                    raise ValidationError(
                        f"fluent {f.name} used with arities {prev} and {f.arity} ({where})"
                    )

        for state, where in ((self.goal, "goal"), (self.init, "init")):
            see(state.positive, where)
            for n in state.negatives:
                see(n, where)
        for a in self.actions:
            for c in a.choices:
                for st in (c.pre, c.eff):
                    see(st.positive, a.name)
                    for n in st.negatives:
                        see(n, a.name)

    @property
    def done_action(self) -> ActionSchema:
        return next(a for a in self.actions if a.name == "done")

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def init_ground(self) -> Optional[FluentTerm]:
        """The initial state as a plain ground fluent set, when it is one."""
        if self.init.positive.is_ground():
            return self.init.positive
        return None

    def color_of(self) -> dict[Const, str]:
        return {m: name for name, members in self.colors for m in members}


def _expect(cond: bool, message: str, node: SNode) -> None:
    if not cond:
        raise ParseError(message, node.line, node.col)


def _symbol(node: SNode, what: str) -> str:
    _expect(isinstance(node.value, str), f"expected {what}", node)
    return node.value  # type: ignore[return-value]


def _number(node: SNode, what: str) -> float:
    _expect(isinstance(node.value, float), f"expected a literal number for {what}", node)
    return node.value  # type: ignore[return-value]


def _parse_fluent(node: SNode) -> Fluent:
    _expect(node.is_list and len(node.items) >= 1, "expected a fluent like (on X Y)", node)
    name = _symbol(node.items[0], "a fluent name")
    args = tuple(make_term(_symbol(a, "a fluent argument")) for a in node.items[1:])
    return Fluent(name, args)


def _parse_state_items(items: Iterable[SNode], ctx: SNode) -> AbstractState:
    positives: list[Fluent] = []
    negatives: list[FluentTerm] = []
    for item in items:
        if item.head() == "not":
            _expect(len(item.items) >= 2, "(not ...) needs at least one fluent", item)
            negatives.append(FluentTerm(_parse_fluent(f) for f in item.items[1:]))
        else:
            positives.append(_parse_fluent(item))
    try:
        return AbstractState(FluentTerm(positives), negatives)
    except ValidationError as exc:
        raise ParseError(str(exc), ctx.line, ctx.col) from exc


def _parse_choice(node: SNode) -> NatureChoice:
    items = node.items
    _expect(len(items) >= 4, "(choice name (prob p) (pre ...) (eff ...))", node)
    name = _symbol(items[1], "an outcome name")
    prob_node = next((n for n in items[2:] if n.head() == "prob"), None)
    _expect(prob_node is not None, "outcome needs a (prob ...) form", node)
    _expect(
        len(prob_node.items) == 2 and isinstance(prob_node.items[1].value, float),
        "probabilities must be literal numbers; state-dependent "
        "probabilities are not supported",
        prob_node,
    )
    prob = prob_node.items[1].value
    pre_node = next((n for n in items[2:] if n.head() == "pre"), None)
    eff_node = next((n for n in items[2:] if n.head() == "eff"), None)
    _expect(pre_node is not None, "outcome needs a (pre ...) form", node)
    _expect(eff_node is not None, "outcome needs an (eff ...) form", node)
    pre = _parse_state_items(pre_node.items[1:], pre_node)
    eff = _parse_state_items(eff_node.items[1:], eff_node)
    try:
        return NatureChoice(name, prob, pre, eff)
    except ValidationError as exc:
        raise ParseError(str(exc), node.line, node.col) from exc


def _parse_action(node: SNode) -> ActionSchema:
    items = node.items
    _expect(len(items) >= 2, "(action name ...)", node)
    name = _symbol(items[1], "an action name")
    params: tuple[Var, ...] = ()
    cost = 0.0
    choices: list[NatureChoice] = []
    for form in items[2:]:
        head = form.head()
        if head == "params":
            raw = [make_term(_symbol(p, "a parameter")) for p in form.items[1:]]
            _expect(
                all(isinstance(p, Var) for p in raw), "parameters must be variables", form
            )
            params = tuple(raw)  # type: ignore[assignment]
        elif head == "cost":
            _expect(len(form.items) == 2, "(cost n)", form)
            cost = _number(form.items[1], "cost")
        elif head == "choice":
            choices.append(_parse_choice(form))
        else:
            raise ParseError(f"unknown action form {head!r}", form.line, form.col)
    try:
        return ActionSchema(name, params, tuple(choices), cost)
    except ValidationError as exc:
        raise ParseError(str(exc), node.line, node.col) from exc


def parse_problem(text: str) -> ProblemSpec:
    """Parse and validate a problem file; diagnostics carry line/column."""
    forms = read_sexprs(text)
    if len(forms) != 1 or forms[0].head() != "domain":
        where = forms[0] if forms else SNode("", 1, 1)
        raise ParseError("expected a single (domain ...) form", where.line, where.col)
    root = forms[0]
    _expect(len(root.items) >= 2, "(domain name ...)", root)
    name = _symbol(root.items[1], "a domain name")
    objects: list[Const] = []
    colors: list[tuple[str, tuple[Const, ...]]] = []
    actions: list[ActionSchema] = []
    goal: Optional[AbstractState] = None
    goal_reward: Optional[float] = None
    init: Optional[AbstractState] = None
    gamma, epsilon = 1.0, 1e-4
    for form in root.items[2:]:
        head = form.head()
        if head == "objects":
            for o in form.items[1:]:
                term = make_term(_symbol(o, "an object"))
                _expect(isinstance(term, Const), "objects must be constants", o)
                objects.append(term)  # type: ignore[arg-type]
        elif head == "colors":
            for group in form.items[1:]:
                cname = _symbol(group.items[0], "a color name")
                members = tuple(
                    Const(_symbol(m, "a colored object")) for m in group.items[1:]
                )
                colors.append((cname, members))
        elif head == "action":
            actions.append(_parse_action(form))
        elif head == "goal":
            reward_node = next((n for n in form.items[1:] if n.head() == "reward"), None)
            _expect(reward_node is not None, "goal needs a (reward n) form", form)
            goal_reward = _number(reward_node.items[1], "reward")
            rest = [n for n in form.items[1:] if n.head() != "reward"]
            goal = _parse_state_items(rest, form)
        elif head == "init":
            init = _parse_state_items(form.items[1:], form)
        elif head == "gamma":
            gamma = _number(form.items[1], "gamma")
        elif head == "epsilon":
            epsilon = _number(form.items[1], "epsilon")
        else:
            raise ParseError(f"unknown section {head!r}", form.line, form.col)
    _expect(goal is not None and goal_reward is not None, "missing (goal ...)", root)
    _expect(init is not None, "missing (init ...)", root)
    try:
        return ProblemSpec(
            name,
            tuple(objects),
            tuple(colors),
            tuple(actions),
            goal,
            goal_reward,
            init,
            gamma,
            epsilon,
        )
    except ValidationError as exc:
        raise ParseError(str(exc), root.line, root.col) from exc


def _render_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def render_fluent(f: Fluent) -> str:
    if not f.args:
        return f"({f.name})"
    return f"({f.name} {' '.join(a.name for a in f.args)})"


def _render_state_items(state: AbstractState) -> str:
    parts = [render_fluent(f) for f in state.positive]
    for n in state.negatives:
        parts.append("(not " + " ".join(render_fluent(f) for f in n) + ")")
    return " ".join(parts)


def render_problem(spec: ProblemSpec) -> str:
    """Canonical text for a problem; rendering is deterministic and
    round-trips through ``parse_problem`` to a structurally equal spec."""
    out = [f"(domain {spec.name}"]
    out.append(f"  (objects {' '.join(o.name for o in spec.objects)})")
    if spec.colors:
        groups = " ".join(
            f"({name} {' '.join(m.name for m in members)})"
            for name, members in spec.colors
        )
        out.append(f"  (colors {groups})")
    out.append(f"  (gamma {_render_number(spec.gamma)})")
    out.append(f"  (epsilon {repr(spec.epsilon)})")
    for a in spec.actions:
        out.append(f"  (action {a.name}")
        if a.params:
            out.append(f"    (params {' '.join(p.name for p in a.params)})")
        out.append(f"    (cost {_render_number(a.cost)})")
        for c in a.choices:
            out.append(f"    (choice {c.name} (prob {repr(c.probability)})")
            out.append(f"      (pre {_render_state_items(c.pre)})")
            out.append(f"      (eff {_render_state_items(c.eff)}))")
        out[-1] += ")"
    out.append(
        f"  (goal (reward {_render_number(spec.goal_reward)}) "
        f"{_render_state_items(spec.goal)})"
    )
    out.append(f"  (init {_render_state_items(spec.init)})")
    out.append(")")
    return "\n".join(out) + "\n"
