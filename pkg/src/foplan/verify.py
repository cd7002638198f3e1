"""Oracle-backed verification checks bundled for the command line.

Each check grounds the problem (or a toy signature) and compares a lifted
computation against enumeration: subsumption against interpretation
inclusion, normalization against ground evaluation, the heuristic against
optimal ground values, and the search result against ground value
iteration.  Small by construction; guarded by the grounding caps.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .domains import ProblemSpec
from .errors import PlannerError
from .fovi import (
    PlannerContext,
    SolverConfig,
    backup,
    evaluate_ground,
    goal_reward_value_function,
    make_heuristic,
    normalize,
    reachable_closure,
)
from .folao import solve
from .ground import ground_problem, ground_value_iteration
from .states import (
    AbstractState,
    GroundUniverse,
    ground_interpretation,
    subsumes,
)
from .terms import Fluent, FluentTerm
from .errors import ValidationError


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _toy_universe() -> GroundUniverse:
    objs = ["a", "b"]
    places = objs + ["table"]
    return GroundUniverse.of(
        {"on": [objs, places], "holding": [objs], "e": [], "red": [objs]}
    )


def _random_abstract_state(rng: random.Random) -> AbstractState:
    names = [("on", 2), ("holding", 1), ("red", 1), ("e", 0)]
    pool = ["a", "b", "X", "Y", "Z"]

    def rand_fluent() -> Fluent:
        name, arity = rng.choice(names)
        return Fluent.of(name, *(rng.choice(pool) for _ in range(arity)))

    while True:
        try:
            pos = FluentTerm(rand_fluent() for _ in range(rng.randint(0, 2)))
            negs = [
                FluentTerm(rand_fluent() for _ in range(rng.randint(1, 2)))
                for _ in range(rng.randint(0, 2))
            ]
            return AbstractState(pos, negs)
        except ValidationError:
            continue


def check_subsumption_soundness(
    model: Optional[ProblemSpec] = None, samples: int = 300, seed: int = 2024
) -> CheckResult:
    """Whenever a witness is found, the subsumed state's ground
    interpretation is included in the subsumer's (toy two-object
    universe, exhaustive)."""
    rng = random.Random(seed)
    universe = _toy_universe()
    witnesses = 0
    for _ in range(samples):
        z1, z2 = _random_abstract_state(rng), _random_abstract_state(rng)
        if subsumes(z1, z2) is None:
            continue
        witnesses += 1
        g1 = ground_interpretation(z1, universe)
        g2 = ground_interpretation(z2, universe)
        if not g1 <= g2:
            return CheckResult(
                "subsumption-soundness",
                False,
                f"inclusion fails for {z1} vs {z2}",
            )
    return CheckResult(
        "subsumption-soundness", True, f"{witnesses} witnesses over {samples} pairs"
    )


def check_normalization_semantics(model: ProblemSpec) -> CheckResult:
    """Normalization neither changes any reachable ground state's
    evaluation nor fails to reach a fixpoint."""
    ctx = PlannerContext(model)
    mdp = ground_problem(model)
    closure = reachable_closure(ctx)
    v = goal_reward_value_function(model)
    for _ in range(2):
        v = backup(closure, ctx, model.gamma, v)
    merged = normalize(v)
    again = normalize(merged)
    if merged.entries != again.entries:
        return CheckResult("normalization-semantics", False, "not idempotent")
    for gs in mdp.states:
        before = evaluate_ground(v, gs)
        after = evaluate_ground(merged, gs)
        if before != after:
            return CheckResult(
                "normalization-semantics",
                False,
                f"evaluation changed on {gs}: {before} vs {after}",
            )
    return CheckResult(
        "normalization-semantics",
        True,
        f"{len(v)} entries -> {len(merged)}, {len(mdp.states)} ground states agree",
    )


def check_heuristic_admissibility(
    model: ProblemSpec, iteration_levels: tuple[int, ...] = (0, 5, 20)
) -> CheckResult:
    """The heuristic never undercuts optimal ground values and never
    increases across sweeps."""
    mdp = ground_problem(model)
    v_star = ground_value_iteration(mdp, 1e-9)
    ctx = PlannerContext(model)
    previous = None
    for iters in iteration_levels:
        h = make_heuristic(model, iters, ctx=ctx)
        values = [evaluate_ground(h, gs) for gs in mdp.states]
        for i, val in enumerate(values):
            if val < v_star[i] - 1e-9:
                return CheckResult(
                    "heuristic-admissibility",
                    False,
                    f"h_{iters} underestimates {mdp.states[i]}: {val} < {v_star[i]}",
                )
        if previous is not None:
            for i, (old, new) in enumerate(zip(previous, values)):
                if new > old + 1e-9:
                    return CheckResult(
                        "heuristic-admissibility",
                        False,
                        f"value increased across sweeps on {mdp.states[i]}",
                    )
        previous = values
    return CheckResult(
        "heuristic-admissibility",
        True,
        f"levels {iteration_levels} admissible on {len(mdp.states)} states",
    )


def check_value_agreement(model: ProblemSpec) -> CheckResult:
    """The search's converged value at the initial state matches ground
    value iteration within a thousandth."""
    ctx = PlannerContext(model)
    h = make_heuristic(model, 20, ctx=ctx)
    res = solve(model, SolverConfig.for_model(model), h, ctx)
    if not res.converged:
        return CheckResult("value-agreement", False, "search did not converge")
    mdp = ground_problem(model)
    v_star = ground_value_iteration(mdp, 1e-9)
    got = evaluate_ground(res.value, mdp.states[mdp.initial])
    want = float(v_star[mdp.initial])
    if abs(got - want) > 1e-3:
        return CheckResult(
            "value-agreement", False, f"initial value {got} vs oracle {want}"
        )
    return CheckResult("value-agreement", True, f"{got:.6f} vs oracle {want:.6f}")


CHECKS: dict[str, Callable[[ProblemSpec], CheckResult]] = {
    "subsumption-soundness": check_subsumption_soundness,
    "normalization-semantics": check_normalization_semantics,
    "heuristic-admissibility": check_heuristic_admissibility,
    "value-agreement": check_value_agreement,
}


def run_checks(model: ProblemSpec, names: Optional[list[str]] = None) -> list[CheckResult]:
    selected = names or list(CHECKS)
    out = []
    for name in selected:
        if name not in CHECKS:
            out.append(CheckResult(name, False, "unknown check"))
            continue
        try:
            out.append(CHECKS[name](model))
        except PlannerError as exc:
            out.append(CheckResult(name, False, str(exc)))
    return out
