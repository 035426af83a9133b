"""Property suites run by ``commlab verify``.

Each suite evaluates one family of identities or inequalities over built-in
fixtures and seeded random instances. A statement checked on many instances
becomes a single check that reports its worst instance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import fixtures as fx
from .constructions import (
    boost_majority,
    coupled_draw,
    coupled_mismatch_exact,
    embed_single,
    majority_error,
    naive_xor,
)
from .core_info import (
    BitVar,
    Event,
    JointTable,
    advantage,
    binary_entropy,
    entropy,
    expected_conditional_kl,
    kl_divergence,
    mutual_information,
    tv_distance,
)
from .costs import gamma_cost, point_costs, standardization_loss_audit, standardize, theta_cost
from .decompose import (
    audit_tree,
    binary_decompose,
    conditional_decompose,
    decomposition_maps,
    finalize_leaf,
    node_mu,
    recursive_decompose,
    select_good_leaf,
)
from .errors import CommLabError, MalformedKernel, NonAbsolutelyContinuous, NotStandard
from .protocol import (
    BITS,
    Kind,
    RoundMeta,
    Sender,
    SplitSpec,
    StandardSpec,
    TableKernel,
    and_function,
    compile_standard,
    condition_protocol,
    information_cost,
    output_stats,
    partial_rectangle_check,
    rectangle_check,
    spec_of,
    validate_standard,
)
from .report import VerdictReport, holds

TOL = 1e-9

__all__ = [
    "TOL",
    "NEGATIVE_CONTROLS",
    "aggregate",
    "core_info_suite",
    "protocol_suite",
    "costs_suite",
    "linearity_suite",
    "decompose_suite",
    "constructions_suite",
    "coupling_suite",
    "negative_control_suite",
    "run_all",
    "random_partial_rectangle_protocol",
    "pointwise_linearity_gaps",
]


def aggregate(rep: VerdictReport, name: str, items, relation: str = "<=", tol: float = TOL):
    """Add one check for ``lhs relation rhs`` over all (lhs, rhs, label) items,
    showing the instance with the least slack."""
    items = list(items)
    if not items:
        return rep.flag(name, False, detail="no instances")

    def slack(item):
        lhs, rhs = float(item[0]), float(item[1])
        if relation == "<=":
            return rhs - lhs
        if relation == ">=":
            return lhs - rhs
        return -abs(lhs - rhs)

    failing = [it for it in items if not holds(it[0], relation, it[1], tol)]
    worst = failing[0] if failing else min(items, key=slack)
    detail = f"{len(items)} instances; {'counterexample' if failing else 'tightest'}: {worst[2]}"
    return rep.compare(name, worst[0], relation, worst[1], tol, detail)


# -- core_info ------------------------------------------------------------

def _random_sizes(rng, k: int, low: int = 2, high: int = 4) -> List[int]:
    return [int(v) for v in rng.integers(low, high + 1, size=k)]


def core_info_suite(seed: int = fx.DEFAULT_SEED, count: int = 200) -> VerdictReport:
    """Chain rule, subadditivity, nonnegativity, Pinsker, the conditioning
    lemma for mutual information and both KL conditioning lemmas."""
    rng = fx.rng_for(seed)
    rep = VerdictReport("core_info")
    chain, sub, sub_eq, mi_nn, kl_nn, pinsker, mi_cond, kl_cond, kl_cond_exp, adv = ([] for _ in range(10))
    for i in range(count):
        t = fx.random_table(rng, _random_sizes(rng, 3), ("X", "Y", "Z"))
        label = f"table {i}"
        lhs = mutual_information(t, ("X", "Y"), ("Z",))
        rhs = mutual_information(t, ("X",), ("Z",)) + mutual_information(t, ("Y",), ("Z",), ("X",))
        chain.append((lhs, rhs, label))
        sub.append((entropy(t, ("X", "Y")), entropy(t, ("X",)) + entropy(t, ("Y",)), label))
        prod = t.marginal(("X",)).product(t.marginal(("Y",)))
        sub_eq.append((entropy(prod, ("X", "Y")), entropy(prod, ("X",)) + entropy(prod, ("Y",)), label))
        mi_nn.append((mutual_information(t, ("X",), ("Y",), ("Z",)), 0.0, label))

        q = fx.random_table(rng, [len(a) for a in t.alphabets], t.names, zero_prob=0.0)
        kl = kl_divergence(t, q)
        kl_nn.append((kl, 0.0, label))
        pinsker.append((float(tv_distance(t, q)), math.sqrt(2 * math.log(2) * kl), label))

        e = fx.random_event(rng, t, [n for n in t.names if rng.random() < 0.6] or ["Z"])
        pe = t.probability(e)
        te = t.condition(e)
        h = binary_entropy(pe)
        mi_cond.append(
            (mutual_information(te, ("X",), ("Y",), ("Z",)),
             (mutual_information(t, ("X",), ("Y",), ("Z",)) + h) / float(pe), label)
        )
        eta = fx.random_table(rng, [len(t.alphabet("X"))], ("X",), zero_prob=0.0)
        kl_cond.append((kl_divergence(te, eta, ("X",)), (kl_divergence(t, eta, ("X",)) + h) / float(pe), label))
        kl_cond_exp.append(
            (expected_conditional_kl(te, eta, ("X",), ("Y",)),
             (expected_conditional_kl(t, eta, ("X",), ("Y",)) + h) / float(pe), label)
        )
    for i in range(max(count // 2, 1)):
        a = Fraction(int(rng.integers(0, 21)), 20)
        b = Fraction(int(rng.integers(0, 21)), 20)
        t = JointTable.from_weights(
            [("B1", BITS), ("B2", BITS)],
            {("0", "0"): a * b, ("0", "1"): a * (1 - b), ("1", "0"): (1 - a) * b, ("1", "1"): (1 - a) * (1 - b)},
        )
        b1, b2 = BitVar.variable("B1"), BitVar.variable("B2")
        lhs = advantage(t, b1 ^ b2, exact=True)
        rhs = advantage(t, b1, exact=True) * advantage(t, b2, exact=True)
        adv.append((lhs, rhs, f"Pr(B1=0)={a}, Pr(B2=0)={b}"))
    aggregate(rep, "core_info.chain_rule", chain, "==")
    aggregate(rep, "core_info.subadditivity", sub, "<=")
    aggregate(rep, "core_info.subadditivity_tight_on_products", sub_eq, "==")
    aggregate(rep, "core_info.mi_nonnegative", mi_nn, ">=")
    aggregate(rep, "core_info.kl_nonnegative", kl_nn, ">=")
    aggregate(rep, "core_info.pinsker", pinsker, "<=")
    aggregate(rep, "core_info.mi_conditioning_loss", mi_cond, "<=")
    aggregate(rep, "core_info.kl_conditioning_loss", kl_cond, "<=")
    aggregate(rep, "core_info.expected_kl_conditioning_loss", kl_cond_exp, "<=")
    aggregate(rep, "core_info.xor_advantage_multiplies", adv, "==", 0.0)
    return rep


# -- protocol -------------------------------------------------------------

def protocol_suite(seed: int = fx.DEFAULT_SEED, count: int = 30) -> VerdictReport:
    rng = fx.rng_for(seed)
    rep = VerdictReport("protocol")
    p1 = fx.p1()
    f = and_function()
    rep.eq("protocol.p1_information_cost", information_cost(p1), 1.5, TOL)
    rep.eq("protocol.p1_error", output_stats(p1, f).error_prob, Fraction(0))
    roundtrip, rect, ic_len, disadv = [], [], [], []
    for i in range(count):
        p = fx.random_standard_protocol(rng, rounds=int(rng.integers(1, 4)), msg_size=int(rng.integers(2, 4)))
        label = f"protocol {i}"
        again = compile_standard(spec_of(p))
        roundtrip.append((int(again.joint != p.joint), 0, label))
        rect.append((rectangle_check(p, p.input_marginal()).checks[0].lhs, Fraction(0), label))
        length = sum(math.log2(len(r.alphabet)) for r in p.rounds)
        ic_len.append((information_cost(p), length, label))
        st = output_stats(p, f)
        bit = 1 - st.error_prob if 2 * st.error_prob > 1 else st.error_prob
        disadv.append((st.disadvantage_exact, 2 * bit, label))
    aggregate(rep, "protocol.compile_roundtrip", roundtrip, "==", 0.0)
    aggregate(rep, "protocol.standard_has_rectangle_property", rect, "==", 0.0)
    aggregate(rep, "protocol.ic_at_most_message_length", ic_len, "<=")
    aggregate(rep, "protocol.disadvantage_twice_error_of_likely_bit", disadv, "==", 0.0)
    # partial rectangle: (X0, Y1, M)-measurable conditioning keeps it, {X1 = Y0} breaks it
    p = fx.noisy_xor_protocol(2)
    w = Event.where(p.joint, ("X0", "Y1", "M1"), lambda a, b, c: a == "1" or b == "0")
    rep.eq(
        "protocol.partial_rectangle_after_measurable_conditioning",
        partial_rectangle_check(condition_protocol(p, w)).checks[0].lhs,
        Fraction(0),
    )
    silent = naive_xor(fx.constant_protocol(), 2)
    bad = condition_protocol(silent, Event.where(silent.joint, ("X1", "Y0"), lambda a, b: a == b))
    v = partial_rectangle_check(bad).checks[0].lhs
    rep.flag("protocol.partial_rectangle_detects_dependence", v > 0, detail=f"violation {v}")
    return rep


# -- costs ----------------------------------------------------------------

def costs_suite(seed: int = fx.DEFAULT_SEED, count: int = 50) -> VerdictReport:
    """theta = KL to the standardization, idempotence, and the exact error
    part of the standardization loss."""
    rng = fx.rng_for(seed)
    rep = VerdictReport("costs")
    f = and_function()
    p1 = fx.p1()
    mu = fx.uniform_mu()
    rep.flag("costs.p1_standardization_is_identity", standardize(p1, mu).joint == p1.joint)
    rep.eq("costs.p1_theta_zero", theta_cost(p1, mu).total, 0.0, TOL)
    rep.eq("costs.p1_gamma_equals_ic", gamma_cost(p1, mu).total, information_cost(p1), TOL)
    dkl, idem, err, gamma_ic = [], [], [], []
    for i in range(count):
        p, mu_i = fx.random_conditioned_protocol(rng, rounds=int(rng.integers(1, 4)))
        label = f"protocol {i}"
        eta = standardize(p, mu_i)
        dkl.append((theta_cost(p, mu_i, verify=False).total, kl_divergence(p.joint, eta.joint), label))
        idem.append((int(standardize(eta, mu_i).joint != eta.joint), 0, label))
        st = standardization_loss_audit(p, mu_i, f)
        c = st.get("error of standardization <= error + tv")
        err.append((c.lhs, c.rhs, label))
        s = fx.random_standard_protocol(rng)
        gamma_ic.append((gamma_cost(s, s.input_marginal()).total, information_cost(s), f"standard {i}"))
    aggregate(rep, "costs.theta_equals_kl_to_standardization", dkl, "==")
    aggregate(rep, "costs.standardize_idempotent", idem, "==", 0.0)
    aggregate(rep, "costs.standardization_error_loss", err, "<=", 0.0)
    aggregate(rep, "costs.gamma_equals_ic_for_standard", gamma_ic, "==")
    return rep


def random_partial_rectangle_protocol(rng, max_tries: int = 20):
    """A standard protocol on two coordinates over a random product input
    distribution, conditioned on a random (X0, Y1, M)-measurable event.
    Returns (protocol, base mu)."""
    for _ in range(max_tries):
        base = fx.random_mu(rng, full_support=rng.random() < 0.5)
        p = fx.random_standard_protocol(rng, base, ("0", "1"), rounds=int(rng.integers(1, 4)))
        names = ["X0", "Y1"] + [m for m in p.m_names if rng.random() < 0.7]
        w = fx.random_event(rng, p.joint, names, keep=0.7)
        q = condition_protocol(p, w)
        if partial_rectangle_check(q).passed:
            return q, base
    raise RuntimeError("could not generate a protocol with the partial rectangle property")


def pointwise_linearity_gaps(p, base) -> Tuple[float, float, float, Fraction]:
    """Max pointwise gaps |theta - theta0 - theta1|, and the same for both
    gamma sides, plus the worse rectangle violation of the two halves."""
    split = SplitSpec.for_coords(p.coords)
    left, right = split.halves(p.coords)
    mu, mu0, mu1 = node_mu(base, p.coords), node_mu(base, left), node_mu(base, right)
    pi0, pi1 = binary_decompose(p, split)
    key0, key1 = decomposition_maps(p, split)
    whole = {pc.assignment: pc for pc in point_costs(p, mu)}
    c0 = {pc.assignment: pc for pc in point_costs(pi0, mu0)}
    c1 = {pc.assignment: pc for pc in point_costs(pi1, mu1)}
    gt = ga = gb = 0.0
    for key, pc in whole.items():
        a, b = c0[key0(key)], c1[key1(key)]
        gt = max(gt, abs(pc.theta - a.theta - b.theta))
        ga = max(ga, abs(pc.gamma_A - a.gamma_A - b.gamma_A))
        gb = max(gb, abs(pc.gamma_B - a.gamma_B - b.gamma_B))
    rect = max(rectangle_check(pi0, mu0).checks[0].lhs, rectangle_check(pi1, mu1).checks[0].lhs)
    return gt, ga, gb, rect


def linearity_suite(seed: int = fx.DEFAULT_SEED, count: int = 20) -> VerdictReport:
    rng = fx.rng_for(seed)
    rep = VerdictReport("linearity")
    th, ga, gb, rect = [], [], [], []
    for i in range(count):
        p, base = random_partial_rectangle_protocol(rng)
        t, a, b, r = pointwise_linearity_gaps(p, base)
        label = f"protocol {i} ({len(p.joint)} points)"
        th.append((t, 0.0, label))
        ga.append((a, 0.0, label))
        gb.append((b, 0.0, label))
        rect.append((r, Fraction(0), label))
    aggregate(rep, "costs.pointwise_theta_linearity", th, "==")
    aggregate(rep, "costs.pointwise_gamma_A_linearity", ga, "==")
    aggregate(rep, "costs.pointwise_gamma_B_linearity", gb, "==")
    aggregate(rep, "decompose.halves_inherit_rectangle_property", rect, "==", 0.0)
    return rep


# -- decompose ------------------------------------------------------------

def decompose_suite(full: bool = True) -> VerdictReport:
    """One level on noisy AND-XOR over two coordinates, the full recursion on
    four (when ``full``), the exact tree, and leaf finalization."""
    rep = VerdictReport("decompose")
    f = and_function()
    mu = fx.uniform_mu()
    t2 = recursive_decompose(fx.noisy_xor_protocol(2), f, mu)
    rep.extend(audit_tree(t2), "decompose.n2.")
    exact = recursive_decompose(fx.exact_xor_protocol(4), f, mu)
    rep.extend(audit_tree(exact), "decompose.exact_n4.")
    rep.flag("decompose.exact_n4.all_chi_one", all(x.chi == 1 for x in exact.nodes.values()))
    leaf = finalize_leaf(exact, select_good_leaf(exact))
    rep.eq("decompose.exact_n4.leaf_error", leaf.error, Fraction(0))
    if full:
        t4 = recursive_decompose(fx.noisy_xor_protocol(4), f, mu)
        rep.extend(audit_tree(t4), "decompose.n4.")
        S = select_good_leaf(t4)
        rep.extend(finalize_leaf(t4, S).audit, f"decompose.n4.leaf_{S}.")
    return rep


# -- constructions --------------------------------------------------------

def constructions_suite() -> VerdictReport:
    rep = VerdictReport("constructions")
    f = and_function()
    noisy = fx.noisy_protocol()
    rep.eq("constructions.noisy_copy_advantage", output_stats(noisy, f).advantage_exact, Fraction(9, 10))
    for n in (2, 4):
        q = naive_xor(noisy, n)
        rep.eq(f"constructions.naive_n{n}_advantage", output_stats(q, f).advantage_exact, Fraction(9, 10) ** n)
        rep.le(f"constructions.naive_n{n}_ic_additive", information_cost(q), n * information_cost(noisy) + 1, TOL)
    p = naive_xor(fx.p1(), 2)
    emb = embed_single(p, f)
    rep.eq("constructions.embedding_error", output_stats(emb.eta, f).error_prob, output_stats(p, f).error_prob)
    rep.le("constructions.embedding_ic_sum", sum(emb.per_j), information_cost(p) + 2 * p.coordinate_count, TOL)
    rep.eq("constructions.embedding_ic_average", information_cost(emb.eta), sum(emb.per_j) / len(emb.per_j), TOL)
    boosted = boost_majority(noisy, 3)
    rep.eq("constructions.boost_error_closed_form", output_stats(boosted, f).error_prob, majority_error(Fraction(1, 20), 3))
    rep.eq("constructions.boost_error_value", output_stats(boosted, f).error_prob, Fraction(29, 4000))
    rep.le("constructions.boost_ic", information_cost(boosted), 3 * information_cost(noisy), TOL)
    return rep


def _bern(name: str, p0: Fraction) -> JointTable:
    return JointTable.from_weights([(name, BITS)], {("0",): p0, ("1",): 1 - p0})


def coupling_suite(seed: int = fx.DEFAULT_SEED, count: int = 100, draws: int = 100_000) -> VerdictReport:
    rng = fx.rng_for(seed)
    rep = VerdictReport("coupling")
    a, b = _bern("A", Fraction(1, 2)), _bern("A", Fraction(1, 4))
    exact = coupled_mismatch_exact(a, b)
    rep.eq("coupling.bernoulli_mismatch", exact.exact_mismatch, Fraction(2, 5))
    pairs = []
    for i in range(count):
        k = int(rng.integers(2, 6))
        mu = fx.random_table(rng, [k], ("A",))
        nu = fx.random_table(rng, [k], ("A",))
        pairs.append((coupled_mismatch_exact(mu, nu).exact_mismatch, tv_distance(mu, nu), f"pair {i}"))
    aggregate(rep, "coupling.mismatch_at_most_tv", pairs, "<=", 0.0)
    drawn = coupled_draw(a, b, seed, draws)
    again = coupled_draw(a, b, seed, draws)
    rep.flag("coupling.deterministic_per_seed", drawn.samples == again.samples)
    m = float(exact.exact_mismatch)
    sigma = math.sqrt(m * (1 - m) / draws)
    rep.le("coupling.empirical_mismatch_3sigma", abs(drawn.empirical_mismatch - m), 3 * sigma, 0.0)
    rep.le("coupling.atom_mismatch_at_most_index_mismatch", drawn.empirical_atom_mismatch, m + 3 * sigma, 0.0)
    for side, table, marg in (("a", a, drawn.marginal_a), ("b", b, drawn.marginal_b)):
        for atom, q in sorted(table.masses.items()):
            q = float(q)
            sd = math.sqrt(q * (1 - q) / draws)
            rep.le(f"coupling.marginal_{side}_{atom[0]}_3sigma", abs(marg.get(atom, 0.0) - q), 3 * sd, 0.0)
    return rep


# -- negative controls ----------------------------------------------------

@dataclass(frozen=True)
class _Control:
    check: str
    expect: type
    build: Callable[[], object]


def _broken_chi():
    t = recursive_decompose(fx.noisy_xor_protocol(2), and_function(), fx.uniform_mu())
    t.nodes["0"].chi = Fraction(1, 2)
    return audit_tree(t)


def _non_rectangle():
    p = fx.constant_protocol()
    q = condition_protocol(p, Event.where(p.joint, ("X", "Y"), lambda x, y: x == y))
    return rectangle_check(q, fx.uniform_mu())


def _kernel_row():
    rounds = [RoundMeta(0, Sender.PUBLIC, ("0",)), RoundMeta(1, Sender.ALICE, BITS)]
    bad = TableKernel({(("0",), None): {"0": Fraction(1, 2)}, (("1",), None): {"1": Fraction(1)}})
    return compile_standard(StandardSpec(fx.uniform_mu(), {"0": 1}, rounds, [bad]))


def _generalized_as_standard():
    q = fx.coin_matches_bob()
    return recursive_decompose(q.with_joint(q.joint, Kind.STANDARD), and_function(), fx.uniform_mu())


def _support_violation():
    mu = JointTable.from_weights(
        [("X", BITS), ("Y", BITS)], {("0", "0"): 1, ("0", "1"): 1, ("1", "0"): 1}
    )
    return theta_cost(fx.p1(), mu)


NEGATIVE_CONTROLS: Dict[str, _Control] = {
    "chi": _Control("decompose.node.chi_recursion[∅]", VerdictReport, _broken_chi),
    "rectangle": _Control("protocol.rectangle_check", VerdictReport, _non_rectangle),
    "kernel": _Control("protocol.kernel_rows_sum_to_one", MalformedKernel, _kernel_row),
    "generalized": _Control("decompose.requires_standard_protocol", NotStandard, _generalized_as_standard),
    "support": _Control("costs.protocol_inputs_within_mu_support", NonAbsolutelyContinuous, _support_violation),
}


def negative_control_suite(inject: Sequence[str] = ()) -> VerdictReport:
    """Run every corrupted fixture. Normally each one must be caught, which
    is a pass. An injected control is instead treated as a genuine fixture,
    so the check it violates is reported as failed."""
    rep = VerdictReport("negative controls")
    for name, ctl in sorted(NEGATIVE_CONTROLS.items()):
        caught, detail = False, ""
        expected = () if ctl.expect is VerdictReport else ctl.expect
        try:
            out = ctl.build()
            if isinstance(out, VerdictReport):
                bad = out.failures()
                caught = bool(bad)
                detail = bad[0].line() if bad else "no failing check"
        except expected as exc:
            caught, detail = True, f"{type(exc).__name__}: {exc}"
        except CommLabError as exc:
            detail = f"unexpected {type(exc).__name__}: {exc}"
        if name in inject:
            rep.flag(ctl.check, not caught, detail=f"injected fixture '{name}': {detail}")
        else:
            rep.flag(f"negative_control.{name}", caught, detail=detail)
    return rep


def run_all(seed: int = fx.DEFAULT_SEED, inject: Sequence[str] = (), full: bool = True) -> VerdictReport:
    rep = VerdictReport("verify")
    for part in (
        core_info_suite(seed),
        protocol_suite(seed),
        costs_suite(seed),
        linearity_suite(seed),
        decompose_suite(full),
        constructions_suite(),
        coupling_suite(seed),
        negative_control_suite(inject),
    ):
        rep.extend(part)
    return rep
