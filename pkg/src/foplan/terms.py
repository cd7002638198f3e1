"""Fluent terms, substitutions, and all-solutions AC1 matching.

The term language is deliberately flat: arguments are variables or
constants only, fluents are applications of a fluent name to such
arguments, and a fluent term is a finite multiset of fluents joined by an
associative-commutative operator whose unit is the empty multiset.
Representing the multiset as a canonically sorted tuple absorbs the
associativity/commutativity/unit axioms, so AC1 equality is plain tuple
equality.

Matching is one-sided: variables of the pattern bind, symbols of the
target (including its variables) stay rigid.  A single extension variable
on the pattern side absorbs whatever part of the target the pattern
fluents do not cover.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union


@dataclass(frozen=True, order=True)
class Var:
    """A bindable argument symbol (uppercase-first by convention)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Const:
    """A rigid argument symbol (lowercase-first by convention)."""

    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Const]


def make_term(symbol: str) -> Term:
    """Classify a symbol: uppercase or underscore first means variable."""
    if symbol and (symbol[0].isupper() or symbol[0] == "_"):
        return Var(symbol)
    return Const(symbol)


@dataclass(frozen=True, order=True)
class ExtVar:
    """An extension variable; binds to a whole fluent term, never a fluent
    argument."""

    name: str

    def __str__(self) -> str:
        return self.name


def _term_key(t: Term) -> tuple:
    # constants sort before variables so canonical order is stable under
    # renaming of the variable suffixes
    if isinstance(t, Const):
        return (0, t.name)
    return (1, t.name)


@dataclass(frozen=True)
class Fluent:
    """One fact: a fluent name applied to variables/constants."""

    name: str
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "_key",
            (self.name, len(self.args), tuple(_term_key(a) for a in self.args)),
        )
        object.__setattr__(
            self, "_vars", frozenset(a for a in self.args if isinstance(a, Var))
        )

    @staticmethod
    def of(name: str, *args: str | Term) -> "Fluent":
        terms = tuple(a if isinstance(a, (Var, Const)) else make_term(a) for a in args)
        return Fluent(name, terms)

    @property
    def arity(self) -> int:
        return len(self.args)

    def key(self) -> tuple:
        return self._key

    def variables(self) -> frozenset[Var]:
        return self._vars

    def is_ground(self) -> bool:
        return not self._vars

    def apply(self, sub: "Substitution") -> "Fluent":
        if not self._vars:
            return self
        return Fluent(self.name, tuple(sub.term(a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(str(a) for a in self.args)})"


class FluentTerm:
    """A finite multiset of fluents in canonical (sorted) order.

    The empty multiset is the unit element; two fluent terms are AC1-equal
    exactly when their canonical tuples coincide.
    """

    __slots__ = ("fluents", "_hash", "_vars", "_counts")

    def __init__(self, fluents: Iterable[Fluent] = ()):
        object.__setattr__(self, "fluents", tuple(sorted(fluents, key=Fluent.key)))
        object.__setattr__(self, "_hash", hash(self.fluents))
        object.__setattr__(self, "_vars", None)
        object.__setattr__(self, "_counts", None)

    def __setattr__(self, *_a):  # immutable after construction
        raise AttributeError("FluentTerm is immutable")

    @staticmethod
    def of(*fluents: Fluent) -> "FluentTerm":
        return FluentTerm(fluents)

    def combine(self, *others: "FluentTerm | Fluent") -> "FluentTerm":
        parts = list(self.fluents)
        for o in others:
            if isinstance(o, Fluent):
                parts.append(o)
            else:
                parts.extend(o.fluents)
        return FluentTerm(parts)

    def variables(self) -> frozenset[Var]:
        if self._vars is None:
            out: frozenset[Var] = frozenset()
            for f in self.fluents:
                out |= f.variables()
            object.__setattr__(self, "_vars", out)
        return self._vars

    def is_ground(self) -> bool:
        return not self.variables()

    def is_empty(self) -> bool:
        return not self.fluents

    def has_duplicate_fluent(self) -> bool:
        return len(set(self.fluents)) != len(self.fluents)

    def name_counts(self) -> dict[str, int]:
        if self._counts is None:
            counts: dict[str, int] = {}
            for f in self.fluents:
                counts[f.name] = counts.get(f.name, 0) + 1
            object.__setattr__(self, "_counts", counts)
        return self._counts

    def __iter__(self) -> Iterator[Fluent]:
        return iter(self.fluents)

    def __len__(self) -> int:
        return len(self.fluents)

    def __eq__(self, other) -> bool:
        return isinstance(other, FluentTerm) and self.fluents == other.fluents

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if not self.fluents:
            return "1"
        return " o ".join(str(f) for f in self.fluents)

    def __repr__(self) -> str:
        return f"FluentTerm({self})"


EMPTY = FluentTerm()


@dataclass(frozen=True)
class Substitution:
    """An idempotent binding of variables to terms and extension variables
    to fluent terms.  Identity bindings are never stored."""

    var_items: tuple[tuple[Var, Term], ...] = ()
    ext_items: tuple[tuple[ExtVar, FluentTerm], ...] = ()

    @staticmethod
    def of(
        var_map: Optional[Mapping[Var, Term]] = None,
        ext_map: Optional[Mapping[ExtVar, FluentTerm]] = None,
    ) -> "Substitution":
        vi = tuple(
            sorted(
                ((v, t) for v, t in (var_map or {}).items() if v != t),
                key=lambda p: p[0].name,
            )
        )
        ei = tuple(sorted((ext_map or {}).items(), key=lambda p: p[0].name))
        return Substitution(vi, ei)

    @property
    def var_map(self) -> dict[Var, Term]:
        return dict(self.var_items)

    @property
    def ext_map(self) -> dict[ExtVar, FluentTerm]:
        return dict(self.ext_items)

    def term(self, t: Term) -> Term:
        if isinstance(t, Var):
            for v, val in self.var_items:
                if v == t:
                    return val
        return t

    def ext(self, e: ExtVar) -> Optional[FluentTerm]:
        for k, val in self.ext_items:
            if k == e:
                return val
        return None

    def is_empty(self) -> bool:
        return not self.var_items and not self.ext_items

    def restrict(self, variables: set[Var]) -> "Substitution":
        return Substitution(
            tuple((v, t) for v, t in self.var_items if v in variables), self.ext_items
        )

    def __str__(self) -> str:
        binds = [f"{v}->{t}" for v, t in self.var_items]
        binds += [f"{e}->{ft}" for e, ft in self.ext_items]
        return "{" + ", ".join(binds) + "}"


def apply_substitution(t: FluentTerm, sub: Substitution) -> FluentTerm:
    """Instantiate every bound variable of ``t``; unbound ones pass through."""
    if not sub.var_items or t.is_ground():
        return t
    return FluentTerm(f.apply(sub) for f in t.fluents)


def apply_pattern(core: FluentTerm, ext: Optional[ExtVar], sub: Substitution) -> FluentTerm:
    """Instantiate a pattern ``core o ext``: the extension variable expands
    to its bound multiset (the unit if bound to the empty term or unbound)."""
    out = apply_substitution(core, sub)
    if ext is not None:
        bound = sub.ext(ext)
        if bound is not None and not bound.is_empty():
            out = out.combine(bound)
    return out


@dataclass(frozen=True)
class MatchProblem:
    """A pattern (fluent term plus one extension variable) against a target.

    For completeness of the solution set the pattern's non-extension part
    and the target are expected not to share variables; shared variables
    are treated as rigid on the target side.
    """

    pattern: FluentTerm
    ext: ExtVar
    target: FluentTerm

    def solve(self) -> list[Substitution]:
        return ac1_match(self.pattern, self.target, ext=self.ext)


def _bind_args(
    pattern_fluent: Fluent, target_fluent: Fluent, binding: dict[Var, Term]
) -> Optional[dict[Var, Term]]:
    """Extend ``binding`` so the pattern fluent equals the target fluent,
    or return None.  Target arguments are rigid."""
    if pattern_fluent.name != target_fluent.name:
        return None
    if len(pattern_fluent.args) != len(target_fluent.args):
        return None
    out = binding
    copied = False
    for pa, ta in zip(pattern_fluent.args, target_fluent.args):
        if isinstance(pa, Var):
            bound = out.get(pa)
            if bound is None:
                if not copied:
                    out = dict(out)
                    copied = True
                out[pa] = ta
            elif bound != ta:
                return None
        elif pa != ta:
            return None
    return out


def substitution_sort_key(sub: Substitution) -> tuple:
    return (
        tuple((v.name, _term_key(t)) for v, t in sub.var_items),
        tuple((e.name, ft.fluents) for e, ft in sub.ext_items),
    )


def ac1_match(
    pattern: FluentTerm,
    target: FluentTerm,
    ext: Optional[ExtVar] = None,
    base: Optional[dict[Var, Term]] = None,
    first_only: bool = False,
) -> list[Substitution]:
    """All substitutions embedding ``pattern`` into ``target`` as a
    sub-multiset, with the remainder bound to ``ext``.

    When ``ext`` is None the embedding must cover the target exactly.
    ``base`` pre-binds pattern variables (binding a variable to itself
    pins it rigid).  Distinct embeddings that induce identical bindings
    are reported once; the result is sorted canonically.
    """
    tfl = target.fluents
    if len(pattern) > len(tfl):
        return []
    if ext is None and len(pattern) != len(tfl):
        return []

    # ground pattern fluents have no binding interactions: any matching
    # occurrence is as good as any other, so consume them by counting
    preused: set[int] = set()
    pfl_open: list[Fluent] = []
    occurrences: dict[Fluent, list[int]] = {}
    for i, f in enumerate(tfl):
        occurrences.setdefault(f, []).append(i)
    taken: dict[Fluent, int] = {}
    for f in pattern.fluents:
        if f.is_ground():
            k = taken.get(f, 0)
            slots = occurrences.get(f, ())
            if k >= len(slots):
                return []
            preused.add(slots[k])
            taken[f] = k + 1
        else:
            pfl_open.append(f)

    # candidate target occurrences per pattern position, by name/arity
    by_name: dict[tuple[str, int], list[int]] = {}
    for i, f in enumerate(tfl):
        by_name.setdefault((f.name, f.arity), []).append(i)
    pfl = pfl_open
    for f in pfl:
        if (f.name, f.arity) not in by_name:
            return []

    solutions: list[Substitution] = []
    seen: set[tuple] = set()

    def finish(binding: dict[Var, Term], used: set[int]) -> None:
        remainder = FluentTerm(tfl[i] for i in range(len(tfl)) if i not in used)
        if ext is None and not remainder.is_empty():
            return
        ext_map = {ext: remainder} if ext is not None else None
        sub = Substitution.of(binding, ext_map)
        key = (sub.var_items, sub.ext_items)
        if key not in seen:
            seen.add(key)
            solutions.append(sub)

    def search(remaining: list[int], binding: dict[Var, Term], used: set[int]) -> bool:
        if not remaining:
            finish(binding, used)
            return first_only
        # fail-first: pick the pattern fluent with the fewest open candidates
        best_pos = -1
        best: Optional[list[tuple[int, dict[Var, Term]]]] = None
        for pos_idx, p in enumerate(remaining):
            pf = pfl[p]
            cands: list[tuple[int, dict[Var, Term]]] = []
            for i in by_name[(pf.name, pf.arity)]:
                if i in used:
                    continue
                nb = _bind_args(pf, tfl[i], binding)
                if nb is not None:
                    cands.append((i, nb))
            if not cands:
                return False
            if best is None or len(cands) < len(best):
                best, best_pos = cands, pos_idx
                if len(cands) == 1:
                    break
        assert best is not None
        rest = remaining[:best_pos] + remaining[best_pos + 1 :]
        for i, nb in best:
            used.add(i)
            if search(rest, nb, used):
                used.discard(i)
                return True
            used.discard(i)
        return False

    search(list(range(len(pfl))), dict(base or {}), set(preused))
    solutions.sort(key=substitution_sort_key)
    return solutions


def is_instance_of(term: FluentTerm, general: FluentTerm, anchored: set[Var]) -> bool:
    """True when ``general`` specializes to ``term`` exactly, binding only
    its non-anchored variables.  Anchored variables stay fixed."""
    if len(term) != len(general):
        return False
    base = {v: v for v in general.variables() & anchored}
    return bool(ac1_match(general, term, ext=None, base=base, first_only=True))


def equal_mod_renaming(a: FluentTerm, b: FluentTerm, anchored: set[Var]) -> bool:
    """AC1 equality up to a bijective renaming of the non-anchored variables."""
    if len(a) != len(b):
        return False
    locals_a = a.variables() - anchored
    locals_b = b.variables() - anchored
    if len(locals_a) != len(locals_b):
        return False
    base = {v: v for v in a.variables() & anchored}
    for sub in ac1_match(a, b, ext=None, base=base):
        image = [sub.term(v) for v in locals_a]
        if (
            all(isinstance(t, Var) for t in image)
            and len(set(image)) == len(image)
            and set(image) == locals_b
        ):
            return True
    return False


def entails_negative(
    positive: FluentTerm,
    neg_required: FluentTerm,
    neg_known: Iterable[FluentTerm],
    theta: Substitution,
) -> list[Substitution]:
    """Witnesses that the instantiated required negative is covered by one
    of the known negatives.

    For each known negative N the equation ``(P o N o U2) sigma = (P o
    neg_required) theta`` is solved; every solution is a witness.  An empty
    result means the required negative is not derivable.
    """
    u2 = ExtVar("U2")
    target = positive.combine(apply_substitution(neg_required, theta))
    out: list[Substitution] = []
    seen: set[tuple] = set()
    for known in neg_known:
        pattern = positive.combine(known)
        for sub in ac1_match(pattern, target, ext=u2):
            key = (sub.var_items, sub.ext_items)
            if key not in seen:
                seen.add(key)
                out.append(sub)
    out.sort(key=substitution_sort_key)
    return out


def _fresh_names(
    originals: list[Var], forbidden: set[str]
) -> dict[Var, Var]:
    mapping: dict[Var, Var] = {}
    taken = set(forbidden)
    for v in originals:
        stem = v.name.rstrip("0123456789") or v.name
        k = 1
        while f"{stem}{k}" in taken:
            k += 1
        fresh = Var(f"{stem}{k}")
        taken.add(fresh.name)
        mapping[v] = fresh
    return mapping


def standardize_apart(
    t: FluentTerm, reserved: set[Var]
) -> tuple[FluentTerm, dict[Var, Var]]:
    """Rename every variable of ``t`` to a fresh one outside ``reserved``.

    The renaming is a bijection and deterministic in the inputs; a ground
    term comes back unchanged with an empty map.
    """
    originals = sorted(t.variables())
    if not originals:
        return t, {}
    forbidden = {v.name for v in reserved} | {v.name for v in originals}
    mapping = _fresh_names(originals, forbidden)
    sub = Substitution.of(mapping)
    return apply_substitution(t, sub), mapping


def rename_clashes(variables: set[Var], reserved: set[Var]) -> dict[Var, Var]:
    """Minimal renaming: fresh names only for the variables clashing with
    ``reserved``; everything else keeps its name."""
    clashing = sorted(variables & reserved)
    if not clashing:
        return {}
    forbidden = {v.name for v in reserved} | {v.name for v in variables}
    return _fresh_names(clashing, forbidden)
