"""Command-line driver: solve, eval, verify, and generate workflows.

Exit codes are a stable contract: 0 on success, 1 on diagnostics (parse,
validation, missing files, convergence-cap), 2 on verification failure.
All randomness flows from explicit seeds.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .blocksworld import BWGeneratorConfig, generate_colored_bw
from .domains import ProblemSpec, parse_problem, render_problem
from .errors import PlannerError
from .folao import solve
from .fovi import (
    PlannerContext,
    SolverConfig,
    SweepStats,
    decider_from_triples,
    goal_reward_value_function,
    make_heuristic,
    run_value_iteration,
)
from .ground import ground_problem, simulate_policy
from .serialize import parse_policy, render_policy, render_value
from .verify import run_checks

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    """The solve-run summary, a superset of the evaluation table columns."""

    problem: str
    blocks: int
    colors: int
    mode: str
    converged: bool
    iterations: int
    residual: float
    total_time: float
    heuristic_time: float
    nas: int
    ngs: str
    norm_share: float
    total_av_reward: Optional[float] = None

    def render(self) -> str:
        reward = "n/a" if self.total_av_reward is None else f"{self.total_av_reward:.2f}"
        lines = [
            f"problem={self.problem}",
            f"blocks={self.blocks}",
            f"colors={self.colors}",
            f"mode={self.mode}",
            f"converged={str(self.converged).lower()}",
            f"iterations={self.iterations}",
            f"residual={self.residual:.6g}",
            f"total-av-reward={reward}",
            f"total-time-sec={self.total_time:.3f}",
            f"heuristic-time-sec={self.heuristic_time:.3f}",
            f"nas={self.nas}",
            f"ngs={self.ngs}",
            f"norm-time-share-pct={self.norm_share:.2f}",
        ]
        return "\n".join(lines) + "\n"


def _ground_state_count(spec: ProblemSpec) -> str:
    """Number of ground states satisfying a tower goal: the product of the
    color-class factorials, when the coloring covers every object."""
    colored = sum(len(members) for _, members in spec.colors)
    if not spec.colors or colored != len(spec.objects):
        return "n/a"
    out = 1
    for _, members in spec.colors:
        for k in range(2, len(members) + 1):
            out *= k
    return str(out)


def _write_telemetry(path: Path, sweeps: list[SweepStats]) -> None:
    rows = [SweepStats.CSV_HEADER] + [s.csv_row() for s in sweeps]
    path.write_text("\n".join(rows) + "\n")


def _load_problem(path: str) -> ProblemSpec:
    return parse_problem(Path(path).read_text())


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        spec = _load_problem(args.problem)
    except (OSError, PlannerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    heuristic_iters = args.heuristic_iters
    if args.mode == "trivial-heuristic":
        heuristic_iters = 0
    config = SolverConfig.for_model(
        spec,
        gamma=args.gamma,
        epsilon=args.epsilon,
        heuristic_iterations=heuristic_iters,
        max_outer=args.max_outer,
        inner_sweeps=args.inner_sweeps,
    )
    ctx = PlannerContext(spec)
    sweeps: list[SweepStats] = []
    t0 = time.perf_counter()
    deadline = t0 + args.time_limit if args.time_limit else None
    try:
        if args.mode == "fovi-only":
            heuristic_time = 0.0
            result = run_value_iteration(spec, config, ctx, sweep_log=sweeps)
            policy, value = result.policy, result.value
            converged, iterations, residual = (
                result.converged,
                result.sweeps,
                result.residual,
            )
            nas = result.state_count
        else:
            h0 = time.perf_counter()
            heuristic = make_heuristic(
                spec, config.heuristic_iterations, ctx=ctx, config=config,
                sweep_log=sweeps,
            )
            heuristic_time = time.perf_counter() - h0
            result = solve(spec, config, heuristic, ctx, deadline=deadline)
            policy, value = result.policy, result.value
            converged, iterations, residual = (
                result.converged,
                result.iterations,
                result.residual,
            )
            nas = result.e_size
            sweeps.extend(result.sweep_log)
    except PlannerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    total_time = time.perf_counter() - t0
    norm_time = sum(s.norm_time for s in sweeps)
    report = RunReport(
        problem=spec.name,
        blocks=len(spec.objects),
        colors=len(spec.colors),
        mode=args.mode,
        converged=converged,
        iterations=iterations,
        residual=residual,
        total_time=total_time,
        heuristic_time=heuristic_time,
        nas=nas,
        ngs=_ground_state_count(spec),
        norm_share=100.0 * norm_time / total_time if total_time > 0 else 0.0,
    )
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.problem).stem
    (outdir / f"{stem}.policy").write_text(render_policy(policy))
    (outdir / f"{stem}.value").write_text(render_value(value))
    (outdir / f"{stem}.report.txt").write_text(report.render())
    if args.telemetry:
        _write_telemetry(Path(args.telemetry), sweeps)
    print(report.render(), end="")
    if not converged:
        print("error: did not converge within the iteration cap", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        spec = _load_problem(args.problem)
        triples = parse_policy(Path(args.policy).read_text())
        mdp = ground_problem(spec)
    except (OSError, PlannerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    decide = decider_from_triples(triples)
    stats = simulate_policy(mdp, decide, args.runs, args.horizon, args.seed)
    print(stats.report())
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        spec = _load_problem(args.problem)
    except (OSError, PlannerError) as exc:
        print(f"[FAIL] validation: {exc}")
        return 2
    print(f"[PASS] validation: {spec.name}")
    results = run_checks(spec, args.check or None)
    failed = False
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"[{tag}] {res.name}: {res.detail}")
        failed = failed or not res.passed
    return 2 if failed else 0


def _parse_color_spec(text: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in text.split(","):
        count, _, name = part.strip().partition(":")
        if not name or not count.isdigit():
            raise argparse.ArgumentTypeError(
                f"bad colors spec {part!r}; expected like 4:red,3:green,1:blue"
            )
        out.append((name, int(count)))
    return tuple(out)


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        cfg = BWGeneratorConfig(
            args.blocks,
            args.colors,
            seed=args.seed,
            success_probability=args.success_prob,
        )
        spec = generate_colored_bw(cfg)
    except PlannerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    path = Path(args.output) if args.output else Path(f"{spec.name}.pfc")
    path.write_text(render_problem(spec))
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foplan",
        description="First-order MDP planner with a ground-state oracle",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="plan a problem file")
    p_solve.add_argument("--problem", required=True)
    p_solve.add_argument("--epsilon", type=float, default=None)
    p_solve.add_argument("--gamma", type=float, default=None)
    p_solve.add_argument("--heuristic-iters", type=int, default=20)
    p_solve.add_argument(
        "--mode",
        choices=["folao", "fovi-only", "trivial-heuristic"],
        default="folao",
    )
    p_solve.add_argument("--max-outer", type=int, default=None)
    p_solve.add_argument("--inner-sweeps", type=int, default=None)
    p_solve.add_argument("--output", default=".")
    p_solve.add_argument("--telemetry", default=None)
    p_solve.add_argument("--time-limit", type=float, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_eval = sub.add_parser("eval", help="simulate a solved policy")
    p_eval.add_argument("--problem", required=True)
    p_eval.add_argument("--policy", required=True)
    p_eval.add_argument("--runs", type=int, default=30)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--horizon", type=int, default=1000)
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify", help="oracle-backed checks")
    p_verify.add_argument("--problem", required=True)
    p_verify.add_argument("--check", action="append", choices=[
        "subsumption-soundness",
        "normalization-semantics",
        "heuristic-admissibility",
        "value-agreement",
    ])
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("generate", help="emit a colored Blocksworld instance")
    p_gen.add_argument("--blocks", type=int, required=True)
    p_gen.add_argument("--colors", type=_parse_color_spec, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--success-prob", type=float, default=0.75)
    p_gen.add_argument("--output", default=None)
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
