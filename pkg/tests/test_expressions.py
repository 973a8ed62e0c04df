"""Expression language: parsing, evaluation, masses, moments, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import binom, norm

from safetybn import expressions as ex
from safetybn.errors import (
    ArityError,
    DegenerateTruncation,
    DivideByZero,
    ExpressionSyntaxError,
    MissingParentValue,
    ParameterDomainError,
    UnknownFunction,
)


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------


def test_parse_binomial_of_parents():
    ast = ex.parse_expression("Binomial(demands, p)")
    assert isinstance(ast, ex.Dist) and ast.name == "binomial"
    assert ast.args == (ex.ParentRef("demands"), ex.ParentRef("p"))


def test_parse_wmean_equal_weights():
    ast = ex.parse_expression("wmean(1.0, a, 1.0, b)")
    assert isinstance(ast, ex.WMean)
    assert len(ast.pairs) == 2
    assert ast.pairs[0] == (ex.Constant(1.0), ex.ParentRef("a"))


def test_parse_nested_min_arithmetic():
    ast = ex.parse_expression("min(1.0, 100.0*(major + 0.5*minor))")
    assert isinstance(ast, ex.MinMax) and ast.op == "min"
    assert ex.parents_of(ast) == {"major", "minor"}


def test_function_names_case_insensitive():
    assert ex.parse_expression("TNORMAL(0, 1, 0, 1)") == ex.parse_expression("tnormal(0,1,0,1)")


def test_scientific_notation():
    ast = ex.parse_expression("Uniform(0, 1E9)")
    assert ast.args[1] == ex.Constant(1e9)


def test_precedence_and_unary_minus():
    ast = ex.parse_expression("1 - 2 * -3")
    assert ex.evaluate_deterministic(ast, {}) == pytest.approx(7.0)


def test_comparison_parse():
    ast = ex.parse_expression("a <= 0.011")
    assert isinstance(ast, ex.Comparison) and ast.op == "<="


def test_syntax_error_position():
    with pytest.raises(ExpressionSyntaxError) as err:
        ex.parse_expression("1 + $")
    assert err.value.position == 4


def test_unknown_function():
    with pytest.raises(UnknownFunction):
        ex.parse_expression("weibull(1, 2)")


def test_arity_errors():
    with pytest.raises(ArityError):
        ex.parse_expression("Normal(1)")
    with pytest.raises(ArityError):
        ex.parse_expression("wmean(1.0, a, 2.0)")
    with pytest.raises(ArityError):
        ex.parse_expression("if(a > 0, 1)")
    with pytest.raises(ExpressionSyntaxError):
        ex.parse_expression("")


@st.composite
def expression_asts(draw, depth=0):
    """Random well-formed ASTs over a small parent pool."""
    leaf = st.one_of(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(ex.Constant),
        st.sampled_from(["a", "b", "c_1"]).map(ex.ParentRef),
    )
    if depth >= 3:
        return draw(leaf)
    sub = expression_asts(depth=depth + 1)
    branch = st.one_of(
        leaf,
        st.tuples(st.sampled_from("+-*/"), sub, sub).map(lambda t: ex.Binary(*t)),
        # the parser folds unary minus over constants, so only non-constant
        # operands are parser-reachable
        sub.map(
            lambda e: ex.Unary("-", e)
            if not isinstance(e, ex.Constant)
            else ex.Constant(-e.value)
        ),
        st.tuples(st.sampled_from(["min", "max"]), st.tuples(sub, sub)).map(
            lambda t: ex.MinMax(t[0], t[1])
        ),
        st.tuples(sub, sub).map(lambda t: ex.WMean(((ex.Constant(1.0), t[0]), (ex.Constant(2.0), t[1])))),
        st.tuples(st.sampled_from(["<=", "<", ">=", ">", "=="]), sub, sub).map(
            lambda t: ex.Comparison(*t)
        ),
        st.tuples(sub, sub).map(lambda t: ex.Dist("normal", t)),
        sub.map(lambda e: ex.Dist("arithmetic", (e,))),
    )
    return draw(branch)


@settings(max_examples=150, deadline=None)
@given(expression_asts())
def test_pretty_print_round_trip(ast):
    assert ex.parse_expression(ex.pretty(ast)) == ast


# ----------------------------------------------------------------------
# Deterministic evaluation
# ----------------------------------------------------------------------


def test_risk_control_formula():
    ast = ex.parse_expression("(1 - C) * E")
    assert ex.evaluate_deterministic(ast, {"C": 0.5, "E": 0.08}) == pytest.approx(0.04)


def test_injury_product():
    ast = ex.parse_expression("h * i")
    assert ex.evaluate_deterministic(ast, {"h": 0.18, "i": 0.08}) == pytest.approx(0.0144)


def test_wmean_of_equal_values():
    ast = ex.parse_expression("wmean(1, x, 1, y)")
    assert ex.evaluate_deterministic(ast, {"x": 0.1, "y": 0.1}) == pytest.approx(0.1)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=100, allow_nan=False),
    st.floats(min_value=-5, max_value=5),
    st.floats(min_value=-5, max_value=5),
)
def test_wmean_invariant_under_weight_scaling(c, x, y):
    base = ex.parse_expression("wmean(1.0, x, 3.0, y)")
    scaled = ex.WMean(
        (
            (ex.Constant(c), ex.ParentRef("x")),
            (ex.Constant(3.0 * c), ex.ParentRef("y")),
        )
    )
    env = {"x": x, "y": y}
    assert ex.evaluate_deterministic(base, env) == pytest.approx(
        ex.evaluate_deterministic(scaled, env), rel=1e-9, abs=1e-12
    )


def test_divide_by_zero():
    with pytest.raises(DivideByZero):
        ex.evaluate_deterministic(ex.parse_expression("1 / x"), {"x": 0.0})


def test_missing_parent():
    with pytest.raises(MissingParentValue):
        ex.evaluate_deterministic(ex.parse_expression("x + 1"), {})


def test_distribution_rejected_in_deterministic_eval():
    with pytest.raises(ParameterDomainError):
        ex.evaluate_deterministic(ex.parse_expression("Normal(0, 1)"), {})


def test_if_and_comparison_numeric_semantics():
    ast = ex.parse_expression("if(a <= b, 10, 20)")
    assert ex.evaluate_deterministic(ast, {"a": 1, "b": 2}) == 10
    assert ex.evaluate_deterministic(ast, {"a": 3, "b": 2}) == 20


def test_evaluate_broadcasts_arrays():
    ast = ex.parse_expression("(1 - C) * E")
    out = ex.evaluate_deterministic(ast, {"C": np.array([0.0, 0.5]), "E": 0.08})
    assert np.allclose(out, [0.08, 0.04])


# ----------------------------------------------------------------------
# Truncated normal moments
# ----------------------------------------------------------------------


def test_tnormal_moments_against_mills_ratio():
    mean, var, cdf = ex.tnormal_moments(0.01, 0.001, 0.0, 1.0)
    sd = math.sqrt(0.001)
    alpha = (0 - 0.01) / sd
    expected = 0.01 + sd * norm.pdf(alpha) / (1 - norm.cdf(alpha))
    assert mean == pytest.approx(expected, rel=1e-9)
    assert mean == pytest.approx(0.0292, abs=2e-4)  # the figure's 0.03


def test_tnormal_symmetric_truncation():
    mean, var, _ = ex.tnormal_moments(0.5, 0.001, 0.0, 1.0)
    assert mean == pytest.approx(0.5, abs=1e-12)


def test_tnormal_top_state_mass():
    _, _, cdf = ex.tnormal_moments(1.0, 0.001, 0.0, 1.0)
    assert 1.0 - float(cdf(0.8)) >= 0.97


@pytest.mark.parametrize(
    "mu,var,lo,hi",
    [(0.01, 0.001, 0.0, 1.0), (0.5, 0.04, 0.0, 1.0), (-2.0, 1.0, 0.0, 3.0), (10, 4, 8, 11)],
)
def test_tnormal_moments_match_quadrature(mu, var, lo, hi):
    mean, variance, _ = ex.tnormal_moments(mu, var, lo, hi)
    sd = math.sqrt(var)
    z = norm.cdf((hi - mu) / sd) - norm.cdf((lo - mu) / sd)
    m1 = integrate.quad(lambda x: x * norm.pdf(x, mu, sd) / z, lo, hi)[0]
    m2 = integrate.quad(lambda x: x * x * norm.pdf(x, mu, sd) / z, lo, hi)[0]
    assert mean == pytest.approx(m1, rel=1e-6)
    assert variance == pytest.approx(m2 - m1 * m1, rel=1e-6)


def test_tnormal_degenerate_truncation():
    with pytest.raises(DegenerateTruncation):
        ex.tnormal_moments(0.0, 1e-6, 5.0, 6.0)


# ----------------------------------------------------------------------
# Interval masses
# ----------------------------------------------------------------------


def test_binomial_point_interval_is_pmf():
    ast = ex.parse_expression("Binomial(1000, 0.01)")
    assert ex.interval_mass(ast, {}, (10, 10)) == pytest.approx(binom.pmf(10, 1000, 0.01), rel=1e-12)


def test_exponential_interval_matches_cdf():
    ast = ex.parse_expression("Exponential(0.01)")
    assert ex.interval_mass(ast, {}, (0, 10)) == pytest.approx(1 - math.exp(-0.1), rel=1e-12)


@pytest.mark.parametrize(
    "text,support",
    [
        ("Uniform(0, 1)", (0.0, 1.0)),
        ("Normal(0, 1)", (-8.0, 8.0)),
        ("TNormal(0.5, 0.04, 0, 1)", (0.0, 1.0)),
        ("Exponential(0.5)", (0.0, 80.0)),
        ("Gamma(3, 0.5)", (0.0, 200.0)),
        ("Binomial(100, 0.3)", (0.0, 100.0)),
    ],
)
def test_partition_masses_sum_to_one(text, support):
    ast = ex.parse_expression(text)
    if text.startswith("Binomial"):
        # closed integer cells partitioning 0..100
        cuts = [0, 3, 10, 42, 100]
        cells = [(cuts[i] + (1 if i else 0), cuts[i + 1]) for i in range(len(cuts) - 1)]
        cells[0] = (0, 3)
        total = sum(ex.interval_mass(ast, {}, c) for c in cells)
    else:
        edges = np.linspace(support[0], support[1], 33)
        total = sum(
            ex.interval_mass(ast, {}, (edges[i], edges[i + 1])) for i in range(len(edges) - 1)
        )
    assert total == pytest.approx(1.0, abs=1e-9)


def test_full_support_interval_is_one():
    ast = ex.parse_expression("Normal(3, 4)")
    assert ex.interval_mass(ast, {}, (-1e9, 1e9)) == pytest.approx(1.0, abs=1e-12)


def test_parameter_domain_error():
    with pytest.raises(ParameterDomainError):
        ex.interval_mass(ex.parse_expression("Exponential(-1)"), {}, (0, 1))
    with pytest.raises(ParameterDomainError):
        ex.sample_value(
            ex.parse_expression("Binomial(10, p)"), {"p": 1.5}, np.random.default_rng(0)
        )


# ----------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------


def test_exponential_sample_mean():
    rng = np.random.default_rng(1)
    draws = ex.sample_value(ex.parse_expression("Exponential(0.01)"), {}, rng, size=1_000_000)
    assert abs(draws.mean() - 100.0) < 1.0  # law of large numbers, se ~ 0.1


def test_uniform_sample_support():
    rng = np.random.default_rng(2)
    draws = ex.sample_value(ex.parse_expression("Uniform(0, 1)"), {}, rng, size=10_000)
    assert draws.min() >= 0.0 and draws.max() <= 1.0


def test_tnormal_sample_mean_matches_moments():
    rng = np.random.default_rng(3)
    draws = ex.sample_value(
        ex.parse_expression("TNormal(0.01, 0.001, 0, 1)"), {}, rng, size=1_000_000
    )
    mean, _, _ = ex.tnormal_moments(0.01, 0.001, 0, 1)
    assert abs(draws.mean() - mean) < 1e-3
    assert abs(draws.mean() - 0.0292) < 1e-3


def test_sampling_deterministic_for_fixed_seed():
    a = ex.sample_value(ex.parse_expression("Gamma(2, 3)"), {}, np.random.default_rng(7), size=10)
    b = ex.sample_value(ex.parse_expression("Gamma(2, 3)"), {}, np.random.default_rng(7), size=10)
    assert np.array_equal(a, b)


def test_sample_histogram_converges_to_interval_masses():
    # 32-interval partition: per-interval error < 5e-3 at 1e6 samples
    ast = ex.parse_expression("Gamma(4, 2)")
    rng = np.random.default_rng(11)
    draws = ex.sample_value(ast, {}, rng, size=1_000_000)
    edges = np.linspace(0.0, 12.0, 33)
    hist, _ = np.histogram(draws, bins=edges)
    frac = hist / len(draws)
    masses = [ex.interval_mass(ast, {}, (edges[i], edges[i + 1])) for i in range(32)]
    assert np.max(np.abs(frac - np.asarray(masses))) < 5e-3
