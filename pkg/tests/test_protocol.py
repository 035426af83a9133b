import json
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commlab import fixtures as fx
from commlab.core_info import Event, JointTable
from commlab.errors import (
    AlphabetMismatch,
    MalformedKernel,
    MalformedTable,
    NonAbsolutelyContinuous,
    NotStandard,
    OddCoordinateCount,
)
from commlab.protocol import (
    BITS,
    FunctionTable,
    Kind,
    RoundMeta,
    Sender,
    SplitSpec,
    StandardSpec,
    TableKernel,
    and_function,
    append_message,
    bit_of,
    compile_standard,
    compose,
    condition_protocol,
    coordinate_labels,
    deterministic,
    dumps_protocol,
    information_cost,
    information_cost_terms,
    load_protocol,
    loads_protocol,
    output_stats,
    partial_rectangle_check,
    rectangle_check,
    require_standard,
    spec_of,
    validate_standard,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)


def random_protocol(seed, **kw):
    rng = fx.rng_for(seed)
    return fx.random_standard_protocol(rng, rounds=int(rng.integers(1, 4)), **kw)


class TestHelpers:
    @pytest.mark.parametrize("n,labels", [(1, ("",)), (2, ("0", "1")), (4, ("00", "01", "10", "11"))])
    def test_coordinate_labels(self, n, labels):
        assert coordinate_labels(n) == labels

    @pytest.mark.parametrize("symbol,bit", [("0", 0), ("1", 1), (compose("1", "0"), 0), (compose("0", "a", "1"), 1)])
    def test_bit_of_reads_last_component(self, symbol, bit):
        assert bit_of(symbol) == bit

    def test_split_halves(self):
        assert SplitSpec("").halves(("0", "1")) == (("0",), ("1",))
        assert SplitSpec("1").halves(("10", "11")) == (("10",), ("11",))

    def test_split_odd(self):
        with pytest.raises(OddCoordinateCount):
            SplitSpec("").halves(("0", "1", "2"))


class TestFunctionTable:
    def test_and_values(self):
        f = and_function()
        assert [f(x, y) for x in BITS for y in BITS] == [0, 0, 0, 1]

    def test_xor_power(self):
        g = and_function().xor_power(2)
        assert g(("1", "1"), ("1", "0")) == 1
        assert g(("1", "1"), ("1", "1")) == 0

    def test_json_roundtrip(self):
        f = and_function()
        assert FunctionTable.from_json(json.loads(json.dumps(f.to_json()))) == f

    @pytest.mark.parametrize(
        "doc",
        [
            {"x_alphabet": ["0"], "y_alphabet": ["0"], "values": [[2]]},
            {"x_alphabet": ["0", "1"], "y_alphabet": ["0"], "values": [[0]]},
            {"x_alphabet": ["0"], "values": [[0]]},
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(MalformedTable):
            FunctionTable.from_json(doc)


class TestP1:
    def test_joint(self, p1):
        assert len(p1.joint) == 4
        assert set(p1.joint.masses.values()) == {Fraction(1, 4)}

    def test_information_cost(self, p1):
        # Alice reveals X (1 bit); Bob's AND reveals Y only when X = 1 (1/2 bit)
        a, b = information_cost_terms(p1)
        assert a == pytest.approx(1.0, abs=1e-9)
        assert b == pytest.approx(0.5, abs=1e-9)
        assert information_cost(p1) == pytest.approx(1.5, abs=1e-9)

    def test_error_and_advantage(self, p1, f_and):
        st_ = output_stats(p1, f_and)
        assert st_.error_prob == 0
        assert st_.advantage_exact == 1

    def test_standard_and_rectangle(self, p1, mu_uniform):
        assert validate_standard(p1).passed
        assert rectangle_check(p1, mu_uniform).passed


class TestCompile:
    def rounds(self, senders=(Sender.ALICE,)):
        return [RoundMeta(0, Sender.PUBLIC, ("0",))] + [
            RoundMeta(i, s, BITS) for i, s in enumerate(senders, start=1)
        ]

    def test_parity_enforced(self, mu_uniform):
        send = deterministic(lambda i, p: i[0])
        with pytest.raises(MalformedKernel):
            compile_standard(StandardSpec(mu_uniform, {"0": 1}, self.rounds((Sender.BOB,)), [send]))

    def test_row_must_sum_to_one(self, mu_uniform):
        half = lambda i, p: {"0": Fraction(1, 2)}
        with pytest.raises(MalformedKernel):
            compile_standard(StandardSpec(mu_uniform, {"0": 1}, self.rounds(), [half]))

    def test_symbol_outside_alphabet(self, mu_uniform):
        bad = deterministic(lambda i, p: "2")
        with pytest.raises(AlphabetMismatch):
            compile_standard(StandardSpec(mu_uniform, {"0": 1}, self.rounds(), [bad]))

    def test_missing_table_row(self, mu_uniform):
        k = TableKernel({(("0",), None): {"0": 1}})
        with pytest.raises(MalformedKernel):
            compile_standard(StandardSpec(mu_uniform, {"0": 1}, self.rounds(), [k]))

    def test_missing_inputs_have_zero_mass(self):
        mu = JointTable([("X", BITS), ("Y", BITS)], {("0", "0"): Fraction(1, 2), ("1", "1"): Fraction(1, 2)})
        p = fx.p1(mu)
        assert len(p.joint) == 2

    @given(seeds)
    def test_roundtrip(self, seed):
        p = random_protocol(seed)
        assert compile_standard(spec_of(p)).joint == p.joint

    @given(seeds)
    def test_compiled_has_rectangle_property(self, seed):
        p = random_protocol(seed)
        assert rectangle_check(p, p.input_marginal()).passed
        assert validate_standard(p).passed

    @given(seeds)
    def test_ic_at_most_message_length(self, seed):
        p = random_protocol(seed, msg_size=3)
        assert information_cost(p) <= sum(math.log2(len(r.alphabet)) for r in p.rounds) + 1e-9

    @given(seeds)
    def test_disadvantage_twice_likely_bit_error(self, seed):
        p = random_protocol(seed)
        s = output_stats(p, and_function())
        assert s.disadvantage_exact == 2 * min(s.error_prob, 1 - s.error_prob)


class TestGeneralized:
    def test_conditioned_flagged_generalized(self, p1):
        q = condition_protocol(p1, Event.equals("M2", "0"))
        assert q.kind is Kind.GENERALIZED
        with pytest.raises(NotStandard):
            require_standard(q)

    def test_message_depending_on_other_input(self):
        q = fx.coin_matches_bob()
        rep = validate_standard(q)
        assert not rep.passed
        with pytest.raises(NotStandard):
            require_standard(q.with_joint(q.joint, Kind.STANDARD))

    def test_probability_one_event_is_identity(self, p1):
        e = Event.where(p1.joint, ("X",), lambda x: True)
        assert condition_protocol(p1, e).joint == p1.joint

    def test_non_rectangle_detected(self, mu_uniform):
        p = fx.constant_protocol()
        q = condition_protocol(p, Event.where(p.joint, ("X", "Y"), lambda x, y: x == y))
        rep = rectangle_check(q, mu_uniform)
        assert not rep.passed
        assert rep.checks[0].lhs == 2

    def test_rectangle_outside_mu_support(self, p1):
        mu = JointTable([("X", BITS), ("Y", BITS)], {("0", "0"): 1})
        with pytest.raises(NonAbsolutelyContinuous):
            rectangle_check(p1, mu)

    def test_conditioning_on_rectangle_keeps_property(self, p1, mu_uniform):
        q = condition_protocol(p1, Event.where(p1.joint, ("X", "Y"), lambda x, y: x == "1" and y == "1"))
        assert rectangle_check(q, mu_uniform).passed


class TestPartialRectangle:
    def test_standard_xor_passes(self):
        assert partial_rectangle_check(fx.noisy_xor_protocol(2)).passed

    def test_measurable_conditioning_passes(self):
        p = fx.noisy_xor_protocol(2)
        w = Event.where(p.joint, ("X0", "Y1", "M2"), lambda a, b, c: a == "1" or c == "0")
        assert partial_rectangle_check(condition_protocol(p, w)).passed

    def test_cross_conditioning_fails(self):
        from commlab.constructions import naive_xor

        p = naive_xor(fx.constant_protocol(), 2)
        q = condition_protocol(p, Event.where(p.joint, ("X1", "Y0"), lambda a, b: a == b))
        rep = partial_rectangle_check(q)
        assert not rep.passed
        assert rep.checks[0].lhs == Fraction(1, 4)


class TestAppend:
    def test_answer_bit_moves_output_round(self, mu_uniform):
        p = fx.coin_protocol()
        q = append_message(p, Sender.BOB, lambda y: {y: 1}, BITS, ("Y",))
        assert q.output_round == 2
        assert q.kind is Kind.STANDARD
        assert output_stats(q, and_function()).error_prob == Fraction(1, 4)

    def test_reading_other_input_generalizes(self):
        p = fx.coin_protocol()
        q = append_message(p, Sender.ALICE, lambda y: {y: 1}, BITS, ("Y",))
        assert q.kind is Kind.GENERALIZED


class TestFiles:
    def kernel_doc(self):
        mu = fx.uniform_mu().to_json()
        return {
            "mu": mu,
            "rounds": [
                {"index": 0, "sender": "public", "alphabet": ["0"]},
                {"index": 1, "sender": "alice", "alphabet": ["0", "1"]},
            ],
            "kernels": [
                {"rows": [{"input": ["0"], "dist": {"0": "1"}}, {"input": ["1"], "dist": {"0": "1/2", "1": "1/2"}}]}
            ],
        }

    def test_kernel_form(self):
        p = load_protocol(self.kernel_doc())
        assert p.kind is Kind.STANDARD
        assert p.joint[("1", "0", "0", "1")] == Fraction(1, 8)

    def test_joint_form_roundtrip(self, p1):
        q = loads_protocol(dumps_protocol(p1))
        assert q.joint == p1.joint
        assert q.kind is Kind.STANDARD

    def test_joint_claimed_standard_is_verified(self):
        doc = fx.coin_matches_bob().to_json()
        doc["kind"] = "standard"
        with pytest.raises(NotStandard):
            load_protocol(doc)

    def test_malformed_json(self):
        with pytest.raises(MalformedTable):
            loads_protocol("{")

    def test_joint_not_summing_to_one(self, p1):
        doc = p1.to_json()
        doc["joint"]["masses"][0]["p"] = "1/2"
        with pytest.raises(MalformedTable):
            load_protocol(doc)

    def test_missing_field(self):
        doc = self.kernel_doc()
        del doc["rounds"]
        with pytest.raises(MalformedTable):
            load_protocol(doc)
