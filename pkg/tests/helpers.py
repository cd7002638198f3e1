"""Small construction helpers shared by the test modules."""

from __future__ import annotations

import re
from itertools import permutations

from foplan.terms import (
    EMPTY,
    ExtVar,
    Fluent,
    FluentTerm,
    Substitution,
    Var,
    make_term,
)

_FLUENT_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\(([^)]*)\))?")


def fl(text: str) -> Fluent:
    """Parse one fluent like ``on(X,b)`` or ``e``."""
    m = _FLUENT_RE.fullmatch(text.strip())
    assert m, text
    name, args = m.group(1), m.group(2)
    if not args:
        return Fluent(name)
    return Fluent.of(name, *[a.strip() for a in args.split(",")])


def ft(text: str) -> FluentTerm:
    """Parse a fluent term like ``on(X,b) o e``; ``1`` is the unit."""
    text = text.strip()
    if text == "1" or not text:
        return EMPTY
    return FluentTerm(fl(part) for part in text.split(" o "))


def sub(var_map: dict[str, str] | None = None, **ext) -> Substitution:
    vm = {Var(k): make_term(v) for k, v in (var_map or {}).items()}
    em = {ExtVar(k): ft(v) for k, v in ext.items()}
    return Substitution.of(vm, em)


def brute_force_match(pattern: FluentTerm, target: FluentTerm, ext: ExtVar):
    """Independent matching oracle: enumerate every injective assignment of
    pattern fluents to target occurrences, unify argument-wise, bind the
    remainder to the extension variable."""
    n, k = len(target), len(pattern)
    found = set()
    out = []
    for chosen in permutations(range(n), k):
        binding = {}
        ok = True
        for pf, ti in zip(pattern.fluents, chosen):
            tf = target.fluents[ti]
            if pf.name != tf.name or pf.arity != tf.arity:
                ok = False
                break
            for pa, ta in zip(pf.args, tf.args):
                if isinstance(pa, Var):
                    if binding.get(pa, ta) != ta:
                        ok = False
                        break
                    binding[pa] = ta
                elif pa != ta:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        remainder = FluentTerm(
            target.fluents[i] for i in range(n) if i not in set(chosen)
        )
        s = Substitution.of(binding, {ext: remainder})
        key = (s.var_items, s.ext_items)
        if key not in found:
            found.add(key)
            out.append(s)
    return out
