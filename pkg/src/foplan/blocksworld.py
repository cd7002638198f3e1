"""Colored Blocksworld problem generator.

Blocks carry unique names and colors; the goal asks for one tower whose
color sequence matches a target arrangement, not for specific blocks.
The stochastic action set is the reconstruction used throughout this
project and is kept in this one module so it can be swapped wholesale:

* picking a block up succeeds with probability p (default 0.75); a failed
  pick from atop another block drops the block onto the table, a failed
  pick from the table leaves everything unchanged;
* putting the held block onto a clear block succeeds with probability p,
  otherwise the block falls onto the table;
* putting the held block onto the table always succeeds;
* only pick-up actions cost anything (cost 1).

Negated effects re-establish which blocks are clear; that bookkeeping is
sound because at most one block ever rests on another.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator

from .actions import ActionSchema, NatureChoice
from .domains import ProblemSpec
from .errors import ValidationError
from .states import AbstractState
from .terms import Const, Fluent, FluentTerm, Var

TABLE = Const("table")

GOAL_REWARD = 500.0
PICKUP_COST = 1.0


@dataclass(frozen=True)
class BWGeneratorConfig:
    """Shape of one random instance: block count, color multiplicities,
    seed, and the success probability shared by the risky actions."""

    blocks: int
    color_counts: tuple[tuple[str, int], ...]
    seed: int = 0
    success_probability: float = 0.75

    def __post_init__(self):
        if self.blocks < 1:
            raise ValidationError("need at least one block")
        if not self.color_counts:
            raise ValidationError("need at least one color")
        total = sum(n for _, n in self.color_counts)
        if total != self.blocks:
            raise ValidationError(
                f"color multiplicities sum to {total}, not {self.blocks}"
            )
        if any(n < 0 for _, n in self.color_counts):
            raise ValidationError("negative color multiplicity")
        if not 0 < self.success_probability < 1:
            raise ValidationError("success probability must lie strictly in (0,1)")


def blocksworld_actions(success_probability: float = 0.75) -> tuple[ActionSchema, ...]:
    """The stochastic action schemata over on/2, holding/1, and e/0."""
    p, q = success_probability, 1.0 - success_probability
    X, Y, V = Var("X"), Var("Y"), Var("V")
    W, W2, W3 = Var("W"), Var("W2"), Var("W3")

    def st(pos: list[Fluent], negs: list[list[Fluent]] = ()) -> AbstractState:
        return AbstractState(FluentTerm(pos), (FluentTerm(n) for n in negs))

    on_xy = Fluent("on", (X, Y))
    on_yv = Fluent("on", (Y, V))
    on_xt = Fluent("on", (X, TABLE))
    hold = Fluent("holding", (X,))
    e = Fluent("e")

    pickup_table_pre = st([on_xt, e], [[Fluent("on", (W, X))]])
    pickup_table = ActionSchema(
        "pickuptable",
        (X,),
        (
            NatureChoice("pickuptableS", p, pickup_table_pre, st([hold])),
            NatureChoice("pickuptableF", q, pickup_table_pre, pickup_table_pre),
        ),
        cost=PICKUP_COST,
    )

    pickup_block_pre = st([on_xy, on_yv, e], [[Fluent("on", (W, X))]])
    pickup_block = ActionSchema(
        "pickupblock",
        (X, Y),
        (
            NatureChoice(
                "pickupblockS",
                p,
                pickup_block_pre,
                st([hold, on_yv], [[Fluent("on", (W2, Y))]]),
            ),
            NatureChoice(
                "pickupblockF",
                q,
                pickup_block_pre,
                st(
                    [on_xt, on_yv, e],
                    [[Fluent("on", (W2, Y))], [Fluent("on", (W3, X))]],
                ),
            ),
        ),
        cost=PICKUP_COST,
    )

    puton_pre = st([hold, on_yv], [[Fluent("on", (W, Y))]])
    puton = ActionSchema(
        "puton",
        (X, Y),
        (
            NatureChoice(
                "putonS",
                p,
                puton_pre,
                st([on_xy, on_yv, e], [[Fluent("on", (W2, X))]]),
            ),
            NatureChoice(
                "putonF",
                q,
                puton_pre,
                st([on_xt, on_yv, e], [[Fluent("on", (W2, X))], [Fluent("on", (W3, Y))]]),
            ),
        ),
        cost=0.0,
    )

    puton_table = ActionSchema(
        "putontable",
        (X,),
        (
            NatureChoice(
                "putontableS",
                1.0,
                st([hold]),
                st([on_xt, e], [[Fluent("on", (W, X))]]),
            ),
        ),
        cost=0.0,
    )

    done = ActionSchema(
        "done",
        (),
        (NatureChoice("doneS", 1.0, st([]), st([])),),
        cost=0.0,
    )

    return (pickup_table, pickup_block, puton, puton_table, done)


def _block_names(count: int) -> list[Const]:
    return [Const(f"b{i + 1}") for i in range(count)]


def _random_towers(blocks: list[Const], rng: random.Random) -> list[list[Const]]:
    """Seeded random arrangement: place each block on the table or on the
    top of an existing tower."""
    towers: list[list[Const]] = []
    for b in rng.sample(blocks, len(blocks)):
        if towers and rng.random() < 0.5:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def initial_state(towers: list[list[Const]], colors: dict[Const, str]) -> AbstractState:
    """The abstract initial state: ground facts plus one clear-top negative
    per tower (nothing rests on a tower's top block)."""
    positives = [Fluent("e")]
    negatives: list[FluentTerm] = []
    for i, tower in enumerate(towers):
        below: Const = TABLE
        for b in tower:
            positives.append(Fluent("on", (b, below)))
            below = b
        negatives.append(FluentTerm([Fluent("on", (Var(f"W{i + 1}"), tower[-1]))]))
    for b, color in colors.items():
        positives.append(Fluent(color, (b,)))
    return AbstractState(FluentTerm(positives), negatives)


def tower_goal(color_pattern: list[str]) -> AbstractState:
    """One tower whose colors read ``color_pattern`` from top to bottom,
    with a clear top."""
    n = len(color_pattern)
    xs = [Var(f"X{i}") for i in range(n)]
    positives = [Fluent(c, (x,)) for c, x in zip(color_pattern, xs)]
    positives += [Fluent("on", (xs[i], xs[i + 1])) for i in range(n - 1)]
    positives.append(Fluent("on", (xs[-1], TABLE)))
    negative = FluentTerm([Fluent("on", (Var("Y"), xs[0]))])
    return AbstractState(FluentTerm(positives), [negative])


def generate_colored_bw(cfg: BWGeneratorConfig) -> ProblemSpec:
    """A random instance, deterministic in the config."""
    rng = random.Random(cfg.seed)
    blocks = _block_names(cfg.blocks)
    palette = [name for name, count in cfg.color_counts for _ in range(count)]
    assignment = palette[:]
    rng.shuffle(assignment)
    colors = dict(zip(blocks, assignment))
    goal_pattern = palette[:]
    rng.shuffle(goal_pattern)
    towers = _random_towers(blocks, rng)
    color_groups = tuple(
        (name, tuple(b for b in blocks if colors[b] == name))
        for name, _ in cfg.color_counts
    )
    return ProblemSpec(
        name=f"bw-{cfg.blocks}-{len(cfg.color_counts)}c-s{cfg.seed}",
        objects=tuple(blocks),
        colors=color_groups,
        actions=blocksworld_actions(cfg.success_probability),
        goal=tower_goal(goal_pattern),
        goal_reward=GOAL_REWARD,
        init=initial_state(towers, colors),
    )


def single_towers(spec: ProblemSpec) -> Iterator[FluentTerm]:
    """Every ground state stacking all blocks into one tower (gripper
    empty, colors included); the basis for goal-count checks."""
    color_of = spec.color_of()
    statics = [Fluent(color_of[b], (b,)) for b in spec.objects if b in color_of]
    statics.append(Fluent("e"))
    for order in permutations(spec.objects):
        fluents = list(statics)
        below: Const = TABLE
        for b in reversed(order):  # order reads top to bottom
            fluents.append(Fluent("on", (b, below)))
            below = b
        yield FluentTerm(fluents)


def goal_tower_count(cfg: BWGeneratorConfig) -> int:
    """Closed form for the number of single-tower states satisfying the
    generated goal: the product of the color multiplicities' factorials."""
    out = 1
    for _, count in cfg.color_counts:
        for k in range(2, count + 1):
            out *= k
    return out
