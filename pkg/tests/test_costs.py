import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commlab import fixtures as fx
from commlab.core_info import Event, JointTable, kl_divergence, tv_distance
from commlab.costs import (
    gamma_cost,
    point_costs,
    point_costs_csv,
    standardization_loss_audit,
    standardize,
    standardize_with_record,
    theta_cost,
)
from commlab.errors import NonAbsolutelyContinuous, UnreachablePrefix
from commlab.protocol import (
    Kind,
    Protocol,
    and_function,
    RoundMeta,
    Sender,
    compose,
    condition_protocol,
    information_cost,
    output_stats,
)
from commlab.suites import pointwise_linearity_gaps, random_partial_rectangle_protocol

seeds = st.integers(min_value=0, max_value=2**64 - 1)
BITS = ("0", "1")


@pytest.fixture
def p1_and_zero(p1):
    return condition_protocol(p1, Event.equals("M2", "0"))


class TestStandardize:
    def test_p1_is_fixed_point(self, p1, mu_uniform):
        assert standardize(p1, mu_uniform).joint == p1.joint

    def test_conditioned_p1(self, p1_and_zero, mu_uniform):
        rec = standardize_with_record(p1_and_zero, mu_uniform)
        assert rec.extended_contexts == 1
        eta = rec.protocol
        assert eta.kind is Kind.STANDARD
        assert eta.joint[("1", "1", "0", "1", "0")] == Fraction(1, 8)
        assert eta.input_marginal() == mu_uniform

    def test_strict_refuses_extension(self, p1_and_zero, mu_uniform):
        with pytest.raises(UnreachablePrefix):
            standardize(p1_and_zero, mu_uniform, strict=True)

    @given(seeds)
    def test_idempotent(self, seed):
        p, mu = fx.random_conditioned_protocol(fx.rng_for(seed))
        eta = standardize(p, mu)
        assert standardize(eta, mu).joint == eta.joint


class TestTheta:
    def test_p1_zero(self, p1, mu_uniform):
        assert theta_cost(p1, mu_uniform).total == pytest.approx(0.0, abs=1e-12)

    def test_conditioned_p1_value(self, p1_and_zero, mu_uniform):
        assert theta_cost(p1_and_zero, mu_uniform).total == pytest.approx(math.log2(4 / 3), abs=1e-12)

    @given(seeds)
    def test_theta_equals_kl_to_standardization(self, seed):
        p, mu = fx.random_conditioned_protocol(fx.rng_for(seed), rounds=3)
        eta = standardize(p, mu)
        assert abs(theta_cost(p, mu, verify=False).total - kl_divergence(p.joint, eta.joint)) <= 1e-9

    def test_support_violation(self, p1):
        mu = JointTable([("X", BITS), ("Y", BITS)], {("0", "0"): Fraction(1, 2), ("0", "1"): Fraction(1, 2)})
        with pytest.raises(NonAbsolutelyContinuous):
            theta_cost(p1, mu)


class TestGamma:
    def test_p1_sides(self, p1, mu_uniform):
        g = gamma_cost(p1, mu_uniform)
        assert g.alice == pytest.approx(1.0)
        assert g.bob == pytest.approx(0.5)

    @given(seeds)
    def test_equals_ic_for_standard(self, seed):
        p = fx.random_standard_protocol(fx.rng_for(seed), rounds=3)
        assert abs(gamma_cost(p, p.input_marginal()).total - information_cost(p)) <= 1e-9

    @given(seeds)
    def test_at_least_ic(self, seed):
        p, mu = fx.random_conditioned_protocol(fx.rng_for(seed))
        assert gamma_cost(p, mu).total >= information_cost(p) - 1e-9


class TestPointwiseLinearity:
    @given(seeds)
    def test_theta_and_gamma_split(self, seed):
        p, base = random_partial_rectangle_protocol(fx.rng_for(seed))
        gt, ga, gb, rect = pointwise_linearity_gaps(p, base)
        assert gt <= 1e-9
        assert ga <= 1e-9
        assert gb <= 1e-9
        assert rect == 0


class TestYRightPlacement:
    """Moving Y_R from the first message into public randomness does not
    change the information cost of a standard product-input protocol."""

    @given(seeds)
    def test_ic_equivalence(self, seed):
        from commlab.decompose import binary_decompose

        rng = fx.rng_for(seed)
        p = fx.random_standard_protocol(rng, fx.random_mu(rng), ("0", "1"), rounds=2)
        pi0, _ = binary_decompose(p)
        j = p.joint
        ix = j.indices(("X0", "Y0"))
        iy1 = j.index("Y1")
        m = j.indices(p.m_names)
        rounds = (RoundMeta(0, Sender.PUBLIC, tuple(compose(a, b) for a in BITS for b in p.rounds[0].alphabet)),)
        rounds += p.rounds[1:]

        def key(k):
            return (k[ix[0]], k[ix[1]], compose(k[iy1], k[m[0]])) + tuple(k[i] for i in m[1:])

        variables = [("X0", BITS), ("Y0", BITS)] + [(f"M{r.index}", r.alphabet) for r in rounds]
        public = Protocol(j.pushforward(variables, key), rounds, Kind.GENERALIZED, p.output_round, ("0",))
        assert information_cost(public) == pytest.approx(information_cost(pi0), abs=1e-9)


class TestLossAudit:
    def test_standard_is_tight(self, p1, mu_uniform, f_and):
        rep = standardization_loss_audit(p1, mu_uniform, f_and)
        assert rep.passed
        c = rep.get("error of standardization <= error + tv")
        assert c.lhs == c.rhs == 0

    def test_conditioned_p1_slack(self, p1_and_zero, mu_uniform, f_and):
        rep = standardization_loss_audit(p1_and_zero, mu_uniform, f_and)
        assert rep.passed
        c = rep.get("error of standardization <= error + tv")
        assert c.lhs == Fraction(1, 8)
        assert c.rhs == Fraction(1, 2)

    @given(seeds)
    def test_error_bound_exact(self, seed):
        p, mu = fx.random_conditioned_protocol(fx.rng_for(seed))
        f = and_function()
        eta = standardize(p, mu)
        assert output_stats(eta, f).error_prob <= output_stats(p, f).error_prob + tv_distance(p.joint, eta.joint)


def test_point_costs_csv(p1, mu_uniform):
    text = point_costs_csv(p1, point_costs(p1, mu_uniform))
    lines = text.strip().splitlines()
    assert lines[0] == "X,Y,M0,M1,M2,mass_num,mass_den,theta,gamma_A,gamma_B"
    assert len(lines) == 5
