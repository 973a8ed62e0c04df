"""Model compilation, validation diagnostics and topological order."""

import pytest

from safetybn.errors import ArityError, CycleError, PartitionError, UnboundedSupport, UnknownParent
from safetybn.graph import (
    ExpressionCpd,
    ModelSpec,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
    build_model,
    ranked_midpoints,
    topological_order,
    validate_model,
)

E = ExpressionCpd.parse


def pfd_chain() -> ModelSpec:
    return ModelSpec(
        nodes=(
            Node("p", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
            Node("demands", NodeKind.INTEGER, bounds=(0, 1e9), cpd=E("Uniform(0, 1E9)")),
            Node(
                "observed",
                NodeKind.INTEGER,
                parents=("demands", "p"),
                cpd=E("Binomial(demands, p)"),
            ),
        ),
        title="pfd",
    )


def test_pfd_chain_compiles_in_declaration_order():
    model = build_model(pfd_chain())
    assert model.order == ("p", "demands", "observed")
    assert model.supports["p"] == (0.0, 1.0)


def test_single_uniform_root():
    model = build_model(
        ModelSpec((Node("x", NodeKind.CONTINUOUS, cpd=E("Uniform(0, 1)")),))
    )
    assert model.supports["x"] == (0.0, 1.0)


def test_cycle_reported_with_members():
    spec = ModelSpec(
        nodes=(
            Node("A", NodeKind.CONTINUOUS, bounds=(0, 1), parents=("B",), cpd=E("Arithmetic(B)")),
            Node("B", NodeKind.CONTINUOUS, bounds=(0, 1), parents=("A",), cpd=E("Arithmetic(A)")),
        )
    )
    with pytest.raises(CycleError) as err:
        build_model(spec)
    assert set(err.value.cycle) == {"A", "B"}


def test_unknown_parent():
    spec = ModelSpec(
        nodes=(Node("x", NodeKind.CONTINUOUS, parents=("ghost",), cpd=E("Arithmetic(ghost)")),)
    )
    with pytest.raises(UnknownParent):
        build_model(spec)


def test_expression_referencing_undeclared_parent():
    spec = ModelSpec(
        nodes=(
            Node("a", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
            Node("x", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Arithmetic(a * 2)")),
        )
    )
    with pytest.raises(ArityError):
        build_model(spec)


def test_unbounded_support_rejected():
    spec = ModelSpec(
        nodes=(
            Node("x", NodeKind.CONTINUOUS, bounds=(0, 2), cpd=E("Uniform(0, 2)")),
            Node("y", NodeKind.CONTINUOUS, parents=("x",), cpd=E("Arithmetic(1 / x)")),
        )
    )
    with pytest.raises(UnboundedSupport):
        build_model(spec)  # x's support includes 0, so 1/x is unbounded


def test_partition_must_cover_states_exactly():
    with pytest.raises(PartitionError):
        build_model(
            ModelSpec(
                nodes=(
                    Node("s", NodeKind.LABELLED, states=("a", "b"), cpd=TableCpd(((0.5, 0.5),))),
                    Node(
                        "x",
                        NodeKind.CONTINUOUS,
                        bounds=(0, 1),
                        parents=("s",),
                        cpd=PartitionedCpd.parse("s", {"a": "Uniform(0, 1)"}),
                    ),
                )
            )
        )


def test_boolean_states_fixed():
    with pytest.raises(ArityError):
        build_model(
            ModelSpec(
                (Node("b", NodeKind.BOOLEAN, states=("no", "yes"), cpd=TableCpd(((0.5, 0.5),))),)
            )
        )


def test_ranked_midpoints_for_five_states():
    assert ranked_midpoints(5).tolist() == [0.1, 0.3, 0.5, 0.7, 0.9]


def test_validation_flags_bad_table_row():
    spec = ModelSpec(
        nodes=(Node("s", NodeKind.LABELLED, states=("a", "b"), cpd=TableCpd(((0.4, 0.5),))),)
    )
    model = build_model(spec)
    report = validate_model(model)
    assert any(d.code == "NormalizationError" for d in report.errors)


def test_validation_warns_wide_unbounded_integer():
    model = build_model(pfd_chain())
    report = validate_model(model)
    assert any(d.code == "UnboundedIntegerWarning" for d in report.warnings)
    assert not report.errors


def test_topological_order_stable_for_disconnected_roots():
    spec = ModelSpec(
        nodes=(
            Node("z_first", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
            Node("a_second", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
        )
    )
    assert topological_order(build_model(spec)) == ("z_first", "a_second")


def test_children_follow_parents_with_declaration_tie_break():
    spec = ModelSpec(
        nodes=(
            Node("child", NodeKind.CONTINUOUS, bounds=(0, 1), parents=("root",),
                 cpd=E("Arithmetic(root)")),
            Node("root", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
            Node("other", NodeKind.CONTINUOUS, bounds=(0, 1), cpd=E("Uniform(0, 1)")),
        )
    )
    # child cannot precede root; 'child' (declared first) then beats 'other'
    assert topological_order(build_model(spec)) == ("root", "child", "other")


def test_rebuild_is_deterministic():
    m1 = build_model(pfd_chain())
    m2 = build_model(pfd_chain())
    assert m1.order == m2.order
    assert m1.supports == m2.supports
