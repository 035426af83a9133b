import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commlab import fixtures as fx
from commlab.constructions import (
    boost_majority,
    coupled_draw,
    coupled_mismatch_exact,
    embed_single,
    majority_error,
    naive_xor,
)
from commlab.core_info import JointTable, tv_distance
from commlab.errors import AlphabetMismatch, EvenT, NonProductInput
from commlab.protocol import (
    BITS,
    Kind,
    and_function,
    information_cost,
    output_stats,
    validate_standard,
    xor_function,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)


def bern(p0, name="A"):
    return JointTable.from_weights([(name, BITS)], {("0",): Fraction(p0), ("1",): 1 - Fraction(p0)})


class TestNaiveXor:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_advantage_multiplies(self, n, f_and):
        q = naive_xor(fx.noisy_protocol(), n)
        assert output_stats(q, f_and).advantage_exact == Fraction(9, 10) ** n

    @pytest.mark.parametrize("n", [2, 3])
    def test_ic_additive(self, n):
        base = fx.noisy_protocol()
        q = naive_xor(base, n)
        assert information_cost(q) == pytest.approx(n * information_cost(base), abs=1e-9)

    def test_result_is_standard(self):
        q = naive_xor(fx.p1(), 2)
        assert q.kind is Kind.STANDARD
        assert validate_standard(q).passed
        assert q.coords == ("0", "1")

    def test_zero_copies(self):
        with pytest.raises(ValueError):
            naive_xor(fx.p1(), 0)

    def test_needs_single_coordinate(self):
        with pytest.raises(AlphabetMismatch):
            naive_xor(naive_xor(fx.p1(), 2), 2)


class TestEmbedding:
    @pytest.mark.parametrize("builder", [fx.p1, fx.noisy_protocol])
    def test_error_preserved(self, builder, f_and):
        p = naive_xor(builder(), 2)
        emb = embed_single(p, f_and)
        assert output_stats(emb.eta, f_and).error_prob == output_stats(p, f_and).error_prob
        for pj in emb.per_j_protocols:
            assert output_stats(pj, f_and).error_prob == output_stats(p, f_and).error_prob

    def test_ic_budget(self, f_and):
        p = naive_xor(fx.p1(), 2)
        emb = embed_single(p, f_and)
        assert sum(emb.per_j) <= information_cost(p) + 2 * p.coordinate_count + 1e-9
        assert information_cost(emb.eta) == pytest.approx(sum(emb.per_j) / 2, abs=1e-9)

    def test_eta_is_standard_single_coordinate(self, f_and):
        emb = embed_single(naive_xor(fx.noisy_protocol(), 3), f_and)
        assert validate_standard(emb.eta).passed
        assert emb.eta.input_marginal() == fx.uniform_mu()

    def test_xor_function(self):
        f = xor_function()
        p = naive_xor(fx.noisy_protocol(f), 2)
        emb = embed_single(p, f)
        assert output_stats(emb.eta, f).error_prob == output_stats(p, f).error_prob

    def test_non_product_input(self, f_and):
        mu = JointTable.from_weights(
            [("X0", BITS), ("X1", BITS), ("Y0", BITS), ("Y1", BITS)],
            {("0", "0", "0", "0"): 1, ("1", "1", "1", "1"): 1},
        )
        p = fx.random_standard_protocol(fx.rng_for(3), mu=mu, coords=("0", "1"))
        with pytest.raises(NonProductInput):
            embed_single(p, f_and)


class TestBoost:
    def test_three_copies(self, f_and):
        boosted = boost_majority(fx.noisy_protocol(), 3)
        err = output_stats(boosted, f_and).error_prob
        assert err == majority_error(Fraction(1, 20), 3) == Fraction(29, 4000)
        assert information_cost(boosted) <= 3 * information_cost(fx.noisy_protocol()) + 1e-9

    def test_one_copy_is_identity_error(self, f_and):
        assert output_stats(boost_majority(fx.noisy_protocol(), 1), f_and).error_prob == Fraction(1, 20)

    @pytest.mark.parametrize("T", [0, 2, 4, -1])
    def test_even_or_nonpositive(self, T):
        with pytest.raises(EvenT):
            boost_majority(fx.noisy_protocol(), T)

    @pytest.mark.parametrize("err,T,want", [(Fraction(1, 2), 3, Fraction(1, 2)), (0, 5, 0), (Fraction(1, 10), 1, Fraction(1, 10))])
    def test_majority_error(self, err, T, want):
        assert majority_error(err, T) == want


class TestCoupling:
    def test_bernoulli_exact(self):
        res = coupled_mismatch_exact(bern(Fraction(1, 2)), bern(Fraction(3, 4)))
        assert res.exact_mismatch == Fraction(2, 5)
        assert res.tv == Fraction(1, 2)

    def test_identical_distributions(self):
        assert coupled_mismatch_exact(bern(Fraction(1, 3)), bern(Fraction(1, 3))).exact_mismatch == 0

    def test_disjoint_supports(self):
        assert coupled_mismatch_exact(bern(1), bern(0)).exact_mismatch == 1

    @given(seeds)
    def test_mismatch_at_most_tv(self, seed):
        rng = fx.rng_for(seed)
        k = int(rng.integers(2, 6))
        mu = fx.random_table(rng, [k], ("A",))
        nu = fx.random_table(rng, [k], ("A",))
        res = coupled_mismatch_exact(mu, nu)
        assert res.exact_mismatch <= tv_distance(mu, nu)

    def test_draws_deterministic(self):
        a, b = bern(Fraction(1, 2)), bern(Fraction(1, 4))
        r1 = coupled_draw(a, b, 7, 500)
        r2 = coupled_draw(a, b, 7, 500)
        r3 = coupled_draw(a, b, 8, 500)
        assert r1.samples == r2.samples
        assert r1.samples != r3.samples

    def test_draws_match_exact(self):
        a, b = bern(Fraction(1, 2)), bern(Fraction(1, 4))
        n = 100_000
        res = coupled_draw(a, b, 1, n)
        m = float(res.exact_mismatch)
        sigma = math.sqrt(m * (1 - m) / n)
        assert abs(res.empirical_mismatch - m) <= 3 * sigma
        # the two outputs disagree exactly when the atoms differ: |1/2 - 1/4|
        assert abs(res.empirical_atom_mismatch - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)
        assert abs(res.marginal_b[("0",)] - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            coupled_mismatch_exact(bern(Fraction(1, 2)), bern(Fraction(1, 2), "B"))

    def test_count_positive(self):
        with pytest.raises(ValueError):
            coupled_draw(bern(Fraction(1, 2)), bern(Fraction(1, 2)), 0, 0)
