"""First-order MDP planner over fluent-calculus state descriptions.

Lifted planning: states are multisets of first-order facts plus negated
patterns, actions are stochastic schemata applied by AC1 matching, and
value iteration and heuristic search run directly on those abstract
states.  A ground-state oracle (explicit propositionalization, classical
value iteration, Monte-Carlo policy evaluation) verifies every lifted
computation at desk scale.
"""

from .actions import (
    ActionSchema,
    Applicability,
    NatureChoice,
    all_successors,
    forward_applicable,
    successor,
)
from .blocksworld import BWGeneratorConfig, generate_colored_bw
from .domains import ProblemSpec, parse_problem, render_problem
from .errors import (
    InconsistentSuccessorError,
    NoApplicableActionError,
    ParseError,
    PlannerError,
    UniverseTooLargeError,
    ValidationError,
)
from .folao import SolveResult, policy_expansion, solve
from .fovi import (
    PlannerContext,
    Policy,
    SolverConfig,
    ValueFunction,
    backup,
    evaluate,
    evaluate_ground,
    extract_policy,
    make_heuristic,
    normalize,
    residual,
    run_value_iteration,
)
from .ground import (
    GroundMDP,
    GroundState,
    ground_problem,
    ground_value_iteration,
    simulate_policy,
)
from .states import (
    AbstractState,
    GroundUniverse,
    ground_interpretation,
    satisfies,
    subsumes,
)
from .terms import (
    Const,
    ExtVar,
    Fluent,
    FluentTerm,
    Substitution,
    Var,
    ac1_match,
    apply_substitution,
    entails_negative,
    standardize_apart,
)

__version__ = "0.1.0"
