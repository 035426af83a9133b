"""Acceptance criteria, one test each. Every test prints a single
``PASS``/``FAIL criterion N`` line (visible without ``-s``) and fails if the
property or the runtime budget is violated."""
import math
import time
from fractions import Fraction

import pytest

from commlab import fixtures as fx
from commlab import suites
from commlab.constructions import (
    boost_majority,
    coupled_mismatch_exact,
    embed_single,
    naive_xor,
)
from commlab.core_info import BitVar, JointTable, advantage
from commlab.costs import standardize, theta_cost
from commlab.decompose import audit_tree, finalize_leaf, recursive_decompose, select_good_leaf
from commlab.protocol import BITS, and_function, information_cost, output_stats

TOL = 1e-9


@pytest.fixture
def verdict(capsys):
    """Call with (number, summary, failures, elapsed, budget)."""

    def emit(number, summary, failures, elapsed, budget):
        if elapsed >= budget:
            failures = list(failures) + [f"runtime {elapsed:.2f} s exceeds {budget} s"]
        status = "PASS" if not failures else "FAIL"
        line = f"{status} criterion {number}: {summary} ({elapsed:.2f} s)"
        if failures:
            line += " -- " + "; ".join(failures[:3])
        with capsys.disabled():
            print("\n" + line)
        assert not failures, line

    return emit


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def report_failures(rep):
    return [c.line() for c in rep.failures()]


def test_criterion_01_information_theory(verdict):
    rep, dt = timed(lambda: suites.core_info_suite(count=200))
    names = {c.name for c in rep.checks}
    missing = {
        "core_info.chain_rule", "core_info.subadditivity", "core_info.mi_nonnegative",
        "core_info.kl_nonnegative", "core_info.pinsker", "core_info.mi_conditioning_loss",
        "core_info.kl_conditioning_loss", "core_info.expected_kl_conditioning_loss",
    } - names
    fails = report_failures(rep) + [f"missing {m}" for m in sorted(missing)]
    verdict(1, "information-theory identities on 200 seeded tables", fails, dt, 10)


def test_criterion_02_xor_advantage(verdict):
    def run():
        rng = fx.rng_for(fx.DEFAULT_SEED)
        fails = []
        for i in range(100):
            a, b = Fraction(int(rng.integers(0, 101)), 100), Fraction(int(rng.integers(0, 101)), 100)
            t = JointTable.from_weights(
                [("B1", BITS), ("B2", BITS)],
                {("0", "0"): a * b, ("0", "1"): a * (1 - b), ("1", "0"): (1 - a) * b, ("1", "1"): (1 - a) * (1 - b)},
            )
            b1, b2 = BitVar.variable("B1"), BitVar.variable("B2")
            lhs = advantage(t, b1 ^ b2)
            rhs = advantage(t, b1) * advantage(t, b2)
            if abs(lhs - rhs) > 1e-12:
                fails.append(f"pair {i}: {lhs} != {rhs}")
        f = and_function()
        copy = output_stats(fx.noisy_protocol(), f).advantage_exact
        both = output_stats(naive_xor(fx.noisy_protocol(), 2), f).advantage_exact
        if copy != Fraction(9, 10):
            fails.append(f"per-copy advantage {copy}")
        if both != Fraction(81, 100):
            fails.append(f"n=2 advantage {both}")
        return fails

    fails, dt = timed(run)
    verdict(2, "xor advantage multiplies on 100 pairs; naive n=2 advantage 81/100", fails, dt, 1)


def test_criterion_03_p1(verdict):
    def run():
        p = fx.p1()
        mu = fx.uniform_mu()
        fails = []
        ic = information_cost(p)
        if abs(ic - 1.5) > TOL:
            fails.append(f"IC {ic}")
        if output_stats(p, and_function()).error_prob != 0:
            fails.append("nonzero error")
        if standardize(p, mu).joint != p.joint:
            fails.append("standardization changed P1")
        th = theta_cost(p, mu).total
        if abs(th) > TOL:
            fails.append(f"theta {th}")
        return fails

    fails, dt = timed(run)
    verdict(3, "P1 has IC 1.5, error 0, is its own standardization, theta 0", fails, dt, 1)


def test_criterion_04_theta_is_kl(verdict):
    rep, dt = timed(lambda: suites.costs_suite(count=50))
    c = rep.get("costs.theta_equals_kl_to_standardization")
    fails = [c.line()] if c is None or not c.passed else []
    if c is not None and not c.detail.startswith("50 instances"):
        fails.append(f"expected 50 instances, got {c.detail}")
    verdict(4, "theta equals KL to the standardization on 50 generalized protocols", fails, dt, 30)


def test_criterion_05_pointwise_linearity(verdict):
    rep, dt = timed(lambda: suites.linearity_suite(count=20))
    verdict(5, "pointwise theta/gamma linearity and rectangle inheritance on 20 protocols",
            report_failures(rep), dt, 60)


def test_criterion_06_one_level(verdict):
    def run():
        t = recursive_decompose(fx.noisy_xor_protocol(2), and_function(), fx.uniform_mu())
        root, s0, s1 = t.nodes[""], t.nodes["0"], t.nodes["1"]
        a = t.alpha
        fails = []
        gap = max(abs(float(r.z - r.a0 * r.a1)) for r in root.za.rows.values())
        if gap > TOL:
            fails.append(f"Z != A0 A1 by {gap}")
        ez = float(root.EZ_W)
        bound = 2 / (1 + math.sqrt(float(a))) * (1 - ez)
        if float(s0.eps + s1.eps) > bound + TOL:
            fails.append(f"eps sum {float(s0.eps + s1.eps)} > {bound}")
        p_low = (1 - float(root.eps) - float(a)) / (ez - float(a))
        if float(root.p) < p_low - TOL:
            fails.append(f"p {float(root.p)} < {p_low}")
        if ez < 1 - float(root.eps) - TOL:
            fails.append(f"E[Z|W] {ez} < 1 - eps")
        return fails

    fails, dt = timed(run)
    verdict(6, "one-level conditional decomposition on noisy AND xor 2", fails, dt, 10)


@pytest.fixture(scope="module")
def noisy_tree4():
    return timed(lambda: recursive_decompose(fx.noisy_xor_protocol(4), and_function(), fx.uniform_mu()))


def test_criterion_07_full_recursion(verdict, noisy_tree4):
    t, build = noisy_tree4
    rep, dt = timed(lambda: audit_tree(t))
    prefixes = ("a.", "b.", "c.", "d.", "e.", "f.", "g.", "h.", "i.")
    missing = [p for p in prefixes if not any(c.name.startswith(p) for c in rep.checks)]
    chi = rep.get("e.sum_chi_leaves")
    fails = report_failures(rep) + [f"no checks for item {m}" for m in missing]
    if chi is None or chi.tol != 0:
        fails.append("sum of leaf chi not compared exactly")
    verdict(7, f"audit items (a)-(i) on the AND xor 4 tree, {len(rep.checks)} checks", fails, build + dt, 300)


def test_criterion_08_finalize_leaf(verdict, noisy_tree4):
    t, _ = noisy_tree4

    def run():
        leaf = finalize_leaf(t, select_good_leaf(t))
        return leaf

    leaf, dt = timed(run)
    names = [c.name for c in leaf.audit.checks]
    fails = report_failures(leaf.audit)
    if "leaf.error_le_half_eps_plus_tv" not in names:
        fails.append("error bound not checked")
    if not any(n.startswith("information cost of standardization") for n in names):
        fails.append("IC bound not checked")
    verdict(8, f"finalized leaf {leaf.S} error and IC bounds", fails, dt, 30)


def test_criterion_09_embedding(verdict):
    def run():
        f = and_function()
        p = naive_xor(fx.p1(), 2)
        emb = embed_single(p, f)
        fails = []
        if output_stats(emb.eta, f).error_prob != 0:
            fails.append("eta has nonzero error")
        total = sum(emb.per_j)
        if total > information_cost(p) + 2 * p.coordinate_count + TOL:
            fails.append(f"sum of IC(pi_j) {total} too large")
        if abs(information_cost(emb.eta) - total / len(emb.per_j)) > TOL:
            fails.append("IC(eta) is not the average")
        return fails

    fails, dt = timed(run)
    verdict(9, "embedding of naive_xor(P1, 2)", fails, dt, 10)


def test_criterion_10_boosting(verdict):
    def run():
        f = and_function()
        p = fx.noisy_protocol()
        b = boost_majority(p, 3)
        fails = []
        err = output_stats(b, f).error_prob
        if err != Fraction(29, 4000):
            fails.append(f"error {err}")
        if information_cost(b) > 3 * information_cost(p) + TOL:
            fails.append("IC exceeds 3 IC(p)")
        return fails

    fails, dt = timed(run)
    verdict(10, "majority of 3 copies has error 29/4000", fails, dt, 5)


def test_criterion_11_coupling(verdict):
    rep, dt = timed(lambda: suites.coupling_suite(count=100, draws=100_000))
    b = JointTable.from_weights([("A", BITS)], {("0",): Fraction(1, 2), ("1",): Fraction(1, 2)})
    q = JointTable.from_weights([("A", BITS)], {("0",): Fraction(1, 4), ("1",): Fraction(3, 4)})
    fails = report_failures(rep)
    if coupled_mismatch_exact(b, q).exact_mismatch != Fraction(2, 5):
        fails.append("Bernoulli mismatch is not 2/5")
    verdict(11, "coupling mismatch, 100 seeded pairs, 1e5 draws within 3 sigma", fails, dt, 10)


def test_criterion_12_negative_controls(verdict):
    rep, dt = timed(suites.negative_control_suite)
    fails = report_failures(rep)
    if len(rep.checks) != 5:
        fails.append(f"expected 5 controls, got {len(rep.checks)}")
    verdict(12, "five corrupted fixtures are all rejected", fails, dt, 5)
