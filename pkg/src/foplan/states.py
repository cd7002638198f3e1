"""Abstract states, their ground semantics, and subsumption.

An abstract state pairs a positive fluent term with a set of negated
fluent terms.  It denotes every finite set of ground fluents that embeds
the positive part under some substitution while refuting each negated
term under every extension of that substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Optional

from .errors import UniverseTooLargeError, ValidationError
from .terms import (
    Const,
    ExtVar,
    Fluent,
    FluentTerm,
    Substitution,
    Var,
    ac1_match,
    apply_substitution,
    equal_mod_renaming,
    rename_clashes,
)

_U1 = ExtVar("U1")
_U2 = ExtVar("U2")


def _anon_key(t: FluentTerm) -> tuple:
    """Renaming-invariant shape of a fluent term (variables anonymized)."""
    return tuple(
        (f.name, tuple(a.name if isinstance(a, Const) else "*" for a in f.args))
        for f in t.fluents
    )


class AbstractState:
    """A pair of one positive fluent term and finitely many negated ones.

    Construction canonicalizes: the positive part may not repeat a fluent,
    negated terms are nonempty, and negated terms equal up to renaming of
    their local variables are kept once.
    """

    __slots__ = ("positive", "negatives", "_hash")

    def __init__(self, positive: FluentTerm, negatives: Iterable[FluentTerm] = ()):
        if positive.has_duplicate_fluent():
            raise ValidationError(f"positive part repeats a fluent: {positive}")
        anchored = positive.variables()
        kept: list[FluentTerm] = []
        groups: dict[tuple, list[FluentTerm]] = {}
        for n in negatives:
            if n.is_empty():
                raise ValidationError("negated fluent term must be nonempty")
            group = groups.setdefault(_anon_key(n), [])
            if not any(equal_mod_renaming(n, k, anchored) for k in group):
                group.append(n)
                kept.append(n)
        kept.sort(key=lambda t: tuple(f.key() for f in t.fluents))
        object.__setattr__(self, "positive", positive)
        object.__setattr__(self, "negatives", tuple(kept))
        object.__setattr__(self, "_hash", hash((positive, self.negatives)))

    def __setattr__(self, *_a):
        raise AttributeError("AbstractState is immutable")

    def variables(self) -> set[Var]:
        out = self.positive.variables()
        for n in self.negatives:
            out |= n.variables()
        return out

    def rename(self, mapping: dict[Var, Var]) -> "AbstractState":
        sub = Substitution.of(mapping)
        return AbstractState(
            apply_substitution(self.positive, sub),
            (apply_substitution(n, sub) for n in self.negatives),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AbstractState)
            and self.positive == other.positive
            and self.negatives == other.negatives
        )

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        neg = ", ".join("{" + str(n) + "}" for n in self.negatives)
        return f"(P: {self.positive} | N: {neg})" if neg else f"(P: {self.positive})"

    def __repr__(self) -> str:
        return f"AbstractState({self})"


UNIVERSAL = AbstractState(FluentTerm())


@dataclass(frozen=True)
class SubsumptionWitness:
    """Substitution pair establishing one state's containment in another:
    ``theta`` embeds the subsumer's positive part, ``sigma_per_negative``
    maps each of the subsumer's negatives to the covering witness."""

    theta: Substitution
    sigma_per_negative: tuple[tuple[FluentTerm, Substitution], ...]

    @property
    def sigma(self) -> Substitution:
        """The witnesses merged into one substitution where they agree."""
        var_map: dict[Var, object] = {}
        ext_map: dict[ExtVar, FluentTerm] = {}
        ext_ok = True
        for _, s in self.sigma_per_negative:
            for v, t in s.var_items:
                var_map.setdefault(v, t)
            for e, ftm in s.ext_items:
                if e in ext_map and ext_map[e] != ftm:
                    ext_ok = False
                ext_map[e] = ftm
        return Substitution.of(var_map, ext_map if ext_ok else None)


def satisfies(ground: FluentTerm, state: AbstractState) -> bool:
    """Membership of a ground fluent set in the state's interpretation.

    Some embedding of the positive part must leave every negated term
    without any embedding of its instantiation.
    """
    for theta in ac1_match(state.positive, ground, ext=_U1):
        refuted = False
        for n in state.negatives:
            if ac1_match(
                apply_substitution(n, theta), ground, ext=_U2, first_only=True
            ):
                refuted = True
                break
        if not refuted:
            return True
    return False


def _covering_witnesses(
    p1: FluentTerm,
    negatives1: tuple[FluentTerm, ...],
    neg2_inst: FluentTerm,
    theta: Substitution,
) -> list[Substitution]:
    from .terms import entails_negative

    return entails_negative(p1, neg2_inst, negatives1, theta)


def subsumes(z1: AbstractState, z2: AbstractState) -> Optional[SubsumptionWitness]:
    """Witness that every ground instance of ``z1`` is one of ``z2``.

    Solves the positive embedding of ``z2`` into ``z1`` first, then
    requires each negative of ``z2`` to be covered by some negative of
    ``z1``.  Returns the first full witness in canonical order.
    """
    if len(z2.positive) > len(z1.positive):
        return None
    counts1 = z1.positive.name_counts()
    for name, count in z2.positive.name_counts().items():
        if count > counts1.get(name, 0):
            return None
    if z2.positive.is_ground():
        # the embedding cannot instantiate anything, so the positive part
        # must already be a sub-multiset
        available: dict[Fluent, int] = {}
        for f in z1.positive:
            available[f] = available.get(f, 0) + 1
        for f in z2.positive:
            left = available.get(f, 0)
            if left <= 0:
                return None
            available[f] = left - 1
    clashes = rename_clashes(z2.variables(), z1.variables())
    z2r = z2.rename(clashes) if clashes else z2
    for theta in ac1_match(z2r.positive, z1.positive, ext=_U1):
        sigmas: list[tuple[FluentTerm, Substitution]] = []
        ok = True
        for n2 in z2r.negatives:
            sols = _covering_witnesses(z1.positive, z1.negatives, n2, theta)
            if not sols:
                ok = False
                break
            sigmas.append((n2, sols[0]))
        if ok:
            return SubsumptionWitness(theta, tuple(sigmas))
    return None


def mutually_subsume(a: AbstractState, b: AbstractState) -> bool:
    if a is b or a == b:
        return True
    return subsumes(a, b) is not None and subsumes(b, a) is not None


def state_key(state: AbstractState) -> tuple:
    """Renaming-invariant bucket key: fluents with variables anonymized.

    Two states equal up to renaming always collide; unequal states may
    collide too, so exact identity checks go through ``mutually_subsume``.
    """
    return (
        _anon_key(state.positive),
        tuple(sorted(_anon_key(n) for n in state.negatives)),
    )


def canonical_state(state: AbstractState) -> AbstractState:
    """Rename each negative's local variables to a canonical scheme.

    Successor computation instantiates effect negatives with whatever
    fresh names the clash renaming produced, so states equal up to local
    renaming arrive as distinct syntax; canonicalizing them makes plain
    equality catch those twins.  Variables of the positive part and
    variables shared between negatives keep their names.
    """
    anchored = state.positive.variables()
    seen_in: dict[Var, int] = {}
    for n in state.negatives:
        for v in n.variables():
            seen_in[v] = seen_in.get(v, 0) + 1
    shared = {v for v, c in seen_in.items() if c > 1}
    fixed = anchored | shared
    taken = {v.name for v in fixed}
    counter = 0
    order = sorted(range(len(state.negatives)), key=lambda i: _anon_key(state.negatives[i]))
    out: list[Optional[FluentTerm]] = [None] * len(state.negatives)
    for i in order:
        n = state.negatives[i]
        mapping: dict[Var, Var] = {}
        for f in n.fluents:
            for a in f.args:
                if isinstance(a, Var) and a not in fixed and a not in mapping:
                    counter += 1
                    fresh = f"_X{counter}"
                    while fresh in taken:
                        counter += 1
                        fresh = f"_X{counter}"
                    taken.add(fresh)
                    mapping[a] = Var(fresh)
        sub = Substitution.of(mapping)
        out[i] = apply_substitution(n, sub)
    return AbstractState(state.positive, [t for t in out if t is not None])


class StateTable:
    """Set/map keyed by mutual subsumption, bucketed by ``state_key``."""

    def __init__(self, items: Iterable[AbstractState] = ()):
        self._buckets: dict[tuple, list[tuple[AbstractState, object]]] = {}
        self._order: list[AbstractState] = []
        for s in items:
            self.add(s)

    def find(self, state: AbstractState) -> Optional[AbstractState]:
        """The stored representative equal to ``state``, if any."""
        for stored, _ in self._buckets.get(state_key(state), ()):
            if stored == state or mutually_subsume(stored, state):
                return stored
        return None

    def get(self, state: AbstractState, default=None):
        for stored, value in self._buckets.get(state_key(state), ()):
            if stored == state or mutually_subsume(stored, state):
                return value
        return default

    def add(self, state: AbstractState, value=None) -> AbstractState:
        """Insert or update; returns the stored representative."""
        bucket = self._buckets.setdefault(state_key(state), [])
        for i, (stored, _) in enumerate(bucket):
            if stored == state or mutually_subsume(stored, state):
                bucket[i] = (stored, value)
                return stored
        bucket.append((state, value))
        self._order.append(state)
        return state

    def add_if_absent(self, state: AbstractState) -> AbstractState:
        """Insert when missing; returns the stored representative without
        touching any stored value."""
        bucket = self._buckets.setdefault(state_key(state), [])
        for stored, _ in bucket:
            if stored == state or mutually_subsume(stored, state):
                return stored
        bucket.append((state, None))
        self._order.append(state)
        return state

    def __contains__(self, state: AbstractState) -> bool:
        return self.find(state) is not None

    def __iter__(self):
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def items(self):
        for s in self._order:
            yield s, self.get(s)


@dataclass(frozen=True)
class GroundUniverse:
    """A finite enumeration basis: every ground fluent that may occur.

    ``argument_domains`` maps a fluent name to the candidate constants per
    argument position.
    """

    fluent_arities: tuple[tuple[str, int], ...]
    argument_domains: tuple[tuple[str, tuple[tuple[Const, ...], ...]], ...]
    fluent_cap: int = 24

    @staticmethod
    def of(
        domains: dict[str, list[list[str]]], fluent_cap: int = 24
    ) -> "GroundUniverse":
        arities = tuple(sorted((name, len(doms)) for name, doms in domains.items()))
        arg_doms = tuple(
            sorted(
                (name, tuple(tuple(Const(c) for c in dom) for dom in doms))
                for name, doms in domains.items()
            )
        )
        return GroundUniverse(arities, arg_doms, fluent_cap)

    def ground_fluents(self) -> list[Fluent]:
        out = []
        for name, doms in self.argument_domains:
            for combo in product(*doms):
                out.append(Fluent(name, combo))
        return out


def ground_interpretation(
    state: AbstractState, universe: GroundUniverse
) -> set[FluentTerm]:
    """Exactly the universe's ground states satisfying ``state``.

    Enumerates every subset of the universe's ground fluents, so it is a
    test oracle only; guarded by the universe's fluent cap.
    """
    fluents = universe.ground_fluents()
    if len(fluents) > universe.fluent_cap:
        raise UniverseTooLargeError(
            f"{len(fluents)} ground fluents exceed the cap {universe.fluent_cap}"
        )
    out = set()
    for r in range(len(fluents) + 1):
        for chosen in combinations(fluents, r):
            d = FluentTerm(chosen)
            if satisfies(d, state):
                out.add(d)
    return out
