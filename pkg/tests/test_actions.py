"""Forward applicability and the lifted successor operator."""

from __future__ import annotations

import pytest

from foplan.actions import (
    ActionSchema,
    NatureChoice,
    all_successors,
    forward_applicable,
    successor,
)
from foplan.errors import InconsistentSuccessorError, ValidationError
from foplan.states import AbstractState, mutually_subsume
from foplan.terms import Var

from helpers import ft, sub


def astate(pos: str, *negs: str) -> AbstractState:
    return AbstractState(ft(pos), (ft(n) for n in negs))


def pickup_schema() -> ActionSchema:
    pre = astate("on(X,Y) o e", "on(W,X)")
    return ActionSchema(
        "pickup",
        (Var("X"), Var("Y")),
        (
            NatureChoice("pickupS", 0.75, pre, astate("holding(X)", "on(X,Y)")),
            NatureChoice("pickupF", 0.25, pre, pre),
        ),
        cost=3.0,
    )


class TestSchemaValidation:
    def test_probabilities_must_sum_to_one(self):
        pre = astate("on(X,Y) o e")
        with pytest.raises(ValidationError):
            ActionSchema(
                "a",
                (Var("X"), Var("Y")),
                (
                    NatureChoice("s", 0.75, pre, pre),
                    NatureChoice("f", 0.2, pre, pre),
                ),
            )

    def test_outcomes_share_the_precondition(self):
        with pytest.raises(ValidationError):
            ActionSchema(
                "a",
                (Var("X"),),
                (
                    NatureChoice("s", 0.5, astate("holding(X)"), astate("holding(X)")),
                    NatureChoice("f", 0.5, astate("e"), astate("e")),
                ),
            )

    def test_unbound_positive_effect_variable(self):
        with pytest.raises(ValidationError):
            ActionSchema(
                "a",
                (Var("X"),),
                (NatureChoice("s", 1.0, astate("holding(X)"), astate("on(X,Q)")),),
            )


class TestForwardApplicable:
    def test_worked_example_witness(self):
        z = astate("on(b,table) o on(X1,b) o e", "on(X2,X1)")
        apps = forward_applicable(z, pickup_schema())
        want_theta = sub({"X": "X1", "Y": "b"}, U1="on(b,table)")
        want_sigma = sub({"X2": "W"}, U2="1")
        assert any(a.theta == want_theta and a.sigma == want_sigma for a in apps)

    def test_missing_positive_precondition(self):
        assert forward_applicable(astate("holding(a)"), pickup_schema()) == []

    def test_missing_negative_cover(self):
        # no negatives in the state, so "nothing on X" cannot be derived
        z = astate("on(a,b) o e")
        assert forward_applicable(z, pickup_schema()) == []

    def test_applicable_with_general_negative(self):
        z = astate("on(a,b) o on(b,table) o e", "on(Wp,a)")
        apps = forward_applicable(z, pickup_schema())
        assert any(a.theta.term(Var("X")).name == "a" for a in apps)

    def test_state_variables_not_captured(self):
        # schema variables clash with the state's and must be renamed apart
        z = astate("on(X,table) o e", "on(W,X)")
        apps = forward_applicable(z, pickup_schema())
        assert len(apps) == 1
        x_img = apps[0].ground_params((Var("X"), Var("Y")))
        assert x_img == (Var("X"), ft("on(X,table)").fluents[0].args[1])


class TestSuccessor:
    def test_worked_example_successor(self):
        z = astate("on(b,table) o on(X1,b) o e", "on(X2,X1)")
        schema = pickup_schema()
        want_theta = sub({"X": "X1", "Y": "b"}, U1="on(b,table)")
        app = next(
            a for a in forward_applicable(z, schema) if a.theta == want_theta
        )
        succ = successor(z, schema.choices[0], app)
        assert succ == astate("holding(X1) o on(b,table)", "on(X1,b)")

    def test_noop_outcome_reproduces_state(self):
        z = astate("on(a,table) o e", "on(W,a)")
        schema = pickup_schema()
        app = forward_applicable(z, schema)[0]
        succ = successor(z, schema.choices[1], app)  # eff = pre
        assert mutually_subsume(succ, z)

    def test_duplicate_positive_raises(self):
        # effect asserts a fluent the remainder already holds
        pre = astate("holding(X)")
        schema = ActionSchema(
            "drop",
            (Var("X"),),
            (NatureChoice("dropS", 1.0, pre, astate("on(X,table) o e")),),
        )
        z = astate("holding(a) o on(a,table)")  # malformed on purpose
        app = forward_applicable(z, schema)[0]
        with pytest.raises(InconsistentSuccessorError):
            successor(z, schema.choices[0], app)


class TestAllSuccessors:
    def test_counts_cross_product(self):
        z = astate("on(a,table) o on(b,table) o e", "on(V,a)", "on(W,b)")
        entries = all_successors(z, [pickup_schema()])
        # two applicabilities (pick a, pick b) x two outcomes
        assert len(entries) == 4

    def test_deterministic_order(self):
        z = astate("on(a,table) o on(b,table) o e", "on(V,a)", "on(W,b)")
        once = all_successors(z, [pickup_schema()])
        twice = all_successors(z, [pickup_schema()])
        assert [(e.action.name, e.choice.name, e.state) for e in once] == [
            (e.action.name, e.choice.name, e.state) for e in twice
        ]
