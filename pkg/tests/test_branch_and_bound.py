import numpy as np
import pytest

from src.errors import TooManyBinariesError
from src.milp import (
    Constraint,
    MilpInstance,
    Sense,
    SolveStatus,
    SolverConfig,
    Variable,
    VarKind,
    brute_force_binary,
    solve_lp,
    solve_milp,
)

from conftest import knapsack


def binary(name):
    return Variable(name=name, upper=1.0, kind=VarKind.BINARY)


def test_knapsack_optimum():
    inst = knapsack()
    sol = solve_milp(inst)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(-14.0)
    assert sol.by_name(inst) == pytest.approx({"a": 1.0, "b": 0.0, "c": 1.0})
    assert sol.bound <= sol.objective + 1e-9


def test_knapsack_by_enumeration():
    sol = brute_force_binary(knapsack())
    assert sol.objective == pytest.approx(-14.0)
    assert sol.values == pytest.approx((1.0, 0.0, 1.0))


def test_relaxation_bounds_the_integer_optimum():
    inst = knapsack()
    assert solve_lp(inst).objective == pytest.approx(-14.5)
    assert solve_lp(inst).objective <= solve_milp(inst).objective


def test_integral_root_needs_one_node():
    # 2x2 assignment problem: the relaxation is already integral.
    cost = [1.0, 3.0, 4.0, 2.0]
    inst = MilpInstance(
        name="assign",
        variables=tuple(binary(f"x{i}{j}") for i in range(2) for j in range(2)),
        constraints=(
            Constraint(name="row0", coefficients=((0, 1.0), (1, 1.0)), sense=Sense.EQ, rhs=1.0),
            Constraint(name="row1", coefficients=((2, 1.0), (3, 1.0)), sense=Sense.EQ, rhs=1.0),
            Constraint(name="col0", coefficients=((0, 1.0), (2, 1.0)), sense=Sense.EQ, rhs=1.0),
            Constraint(name="col1", coefficients=((1, 1.0), (3, 1.0)), sense=Sense.EQ, rhs=1.0),
        ),
        objective=tuple(enumerate(cost)),
    )
    sol = solve_milp(inst)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.nodes == 1
    assert sol.objective == pytest.approx(3.0)


def test_no_integral_point_is_infeasible():
    inst = MilpInstance(
        name="half",
        variables=(binary("a"), binary("b")),
        constraints=(Constraint(name="sum", coefficients=((0, 1.0), (1, 1.0)), sense=Sense.EQ, rhs=1.5),),
        objective=((0, 1.0),),
    )
    assert solve_milp(inst).status is SolveStatus.INFEASIBLE
    assert brute_force_binary(inst).status is SolveStatus.INFEASIBLE


def test_infeasible_root_is_reported():
    inst = MilpInstance(
        name="over",
        variables=(binary("a"),),
        constraints=(Constraint(name="big", coefficients=((0, 1.0),), sense=Sense.GE, rhs=2.0),),
    )
    sol = solve_milp(inst)
    assert sol.status is SolveStatus.INFEASIBLE
    assert not sol.has_incumbent


def test_node_limit_keeps_the_open_bound():
    sol = solve_milp(knapsack(), SolverConfig(node_limit=1))
    assert sol.status is SolveStatus.NODE_LIMIT
    assert not sol.has_incumbent
    assert sol.bound == pytest.approx(-14.5)


def test_without_binaries_enumeration_is_the_lp():
    inst = MilpInstance(
        name="plain",
        variables=(Variable(name="x", upper=4.0), Variable(name="y", upper=4.0)),
        constraints=(Constraint(name="r", coefficients=((0, 1.0), (1, 2.0)), sense=Sense.LE, rhs=6.0),),
        objective=((0, -1.0), (1, -1.0)),
    )
    assert brute_force_binary(inst).objective == pytest.approx(solve_lp(inst).objective)


def test_enumeration_refuses_large_instances():
    inst = MilpInstance(name="wide", variables=tuple(binary(f"b{j}") for j in range(25)))
    with pytest.raises(TooManyBinariesError):
        brute_force_binary(inst)


def random_mixed(seed: int) -> MilpInstance:
    """Binaries gating continuous flows, with cover and capacity rows."""
    rng = np.random.default_rng(seed)
    nb, nc = 8, 4
    variables = [binary(f"z{j}") for j in range(nb)]
    variables += [Variable(name=f"f{j}", upper=10.0) for j in range(nc)]
    constraints = []
    for j in range(nc):
        # f_j <= 10 * z_j
        constraints.append(
            Constraint(name=f"gate{j}", coefficients=((j, -10.0), (nb + j, 1.0)), sense=Sense.LE, rhs=0.0)
        )
    weights = rng.uniform(1, 5, nb)
    constraints.append(
        Constraint(
            name="budget",
            coefficients=tuple((j, float(w)) for j, w in enumerate(weights)),
            sense=Sense.LE,
            rhs=float(weights.sum() / 2),
        )
    )
    constraints.append(
        Constraint(
            name="demand",
            coefficients=tuple((nb + j, 1.0) for j in range(nc)),
            sense=Sense.GE,
            rhs=12.0,
        )
    )
    objective = [(j, float(v)) for j, v in enumerate(rng.uniform(-3, 3, nb))]
    objective += [(nb + j, float(v)) for j, v in enumerate(rng.uniform(0.1, 1, nc))]
    return MilpInstance(
        name=f"mixed{seed}",
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=tuple(objective),
    )


@pytest.mark.parametrize("seed", range(8))
def test_matches_enumeration_on_random_instances(seed):
    inst = random_mixed(seed)
    exact = brute_force_binary(inst)
    sol = solve_milp(inst, SolverConfig(relative_gap=1e-9))
    assert sol.status is exact.status
    if exact.status is SolveStatus.OPTIMAL:
        assert sol.objective == pytest.approx(exact.objective, abs=1e-6)
        assert inst.max_violation(sol.value_array()) <= 1e-6
        x = sol.value_array()[inst.binary_indices()]
        assert np.all(np.isin(x, (0.0, 1.0)))


def test_deterministic():
    inst = random_mixed(3)
    first, second = solve_milp(inst), solve_milp(inst)
    assert first.values == second.values
    assert first.nodes == second.nodes


def test_max_violation_measures_every_row_sense():
    inst = knapsack()
    # 5 + 4 + 3 = 12 against a capacity of 8, scaled by 1 + 8.
    assert inst.max_violation(np.ones(3)) == pytest.approx(4 / 9)
    assert inst.max_violation(np.array([1.0, 0.0, 1.0])) == 0.0

    mixed = MilpInstance(
        name="senses",
        variables=(Variable(name="x", upper=10.0), Variable(name="y", upper=10.0)),
        constraints=(
            Constraint(name="ge", coefficients=((0, 1.0),), sense=Sense.GE, rhs=3.0),
            Constraint(name="eq", coefficients=((0, 1.0), (1, 1.0)), sense=Sense.EQ, rhs=5.0),
        ),
    )
    assert mixed.max_violation(np.array([3.0, 2.0])) == 0.0
    assert mixed.max_violation(np.array([1.0, 4.0])) == pytest.approx(2 / 4)
    assert mixed.max_violation(np.array([3.0, 4.0])) == pytest.approx(2 / 6)


def test_enumeration_keeps_slack_inequalities():
    # The optimum a=1, b=0 leaves the row a + b <= 2 slack.
    inst = MilpInstance(
        name="slack",
        variables=(binary("a"), binary("b")),
        constraints=(Constraint(name="cap", coefficients=((0, 1.0), (1, 1.0)), sense=Sense.LE, rhs=2.0),),
        objective=((0, -1.0), (1, 1.0)),
    )
    exact = brute_force_binary(inst)
    assert exact.status is SolveStatus.OPTIMAL
    assert exact.values == pytest.approx((1.0, 0.0))
    assert solve_milp(inst).objective == pytest.approx(exact.objective)
