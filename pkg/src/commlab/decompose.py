"""Binary and conditional decomposition of protocols, the recursive
decomposition tree, and its audit.

A node ``S`` (a binary string) owns the coordinates whose labels start with
``S``. Its protocol is split along the next label bit: the left child
receives Bob's right-half input inside its first message, the right child
receives Alice's left-half input inside its public randomness.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .core_info import (
    Event,
    JointTable,
    binary_entropy,
    ci_violation,
    format_fraction,
    mutual_information,
    tv_distance,
)
from .costs import gamma_cost, standardization_loss_audit, standardize, theta_cost
from .errors import (
    BudgetExceeded,
    DegenerateConditioning,
    DisadvantageTooLarge,
    NoQualifyingLeaf,
    NonPowerOfTwo,
    NonProductInput,
    RectangleViolation,
)
from .protocol import (
    BITS,
    FunctionTable,
    Kind,
    Protocol,
    RoundMeta,
    Sender,
    SplitSpec,
    compose,
    append_message,
    condition_protocol,
    information_cost,
    m_name,
    output_stats,
    partial_rectangle_check,
    rectangle_check,
    require_standard,
    x_name,
    y_name,
)
from .report import VerdictReport

__all__ = [
    "SplitSpec",
    "ZARow",
    "ZATable",
    "DecompositionNode",
    "DecompositionTree",
    "FinalizedLeaf",
    "binary_decompose",
    "decomposition_maps",
    "advantage_table",
    "conditional_decompose",
    "recursive_decompose",
    "leaf_distribution",
    "audit_tree",
    "select_good_leaf",
    "finalize_leaf",
    "tree_csv",
    "node_mu",
    "DEFAULT_MAX_ENTRIES",
]

DEFAULT_MAX_ENTRIES = 5_000_000


def _names(coords, fn):
    return tuple(fn(c) for c in coords)


def _product_alphabet(alphabets) -> Tuple[str, ...]:
    return tuple(compose(*parts) for parts in itertools.product(*alphabets))


def binary_decompose(p: Protocol, split: Optional[SplitSpec] = None) -> Tuple[Protocol, Protocol]:
    """Split ``p`` into a left and a right protocol.

    Left:  inputs (X_L, Y_L), transcript (M0, Y_R∘M1, M2, ..., Mr).
    Right: inputs (X_R, Y_R), transcript (X_L∘M0, M1, ..., Mr).

    With no message rounds, the left protocol gets a new Alice round
    carrying Y_R alone. Composite symbols keep the original message last.
    """
    pi0, pi1, _, _ = _decomposition(p, split)
    return pi0, pi1


def decomposition_maps(p: Protocol, split: Optional[SplitSpec] = None):
    """Functions sending a full key of ``p`` to the matching keys of the
    left and right protocols of :func:`binary_decompose`."""
    _, _, key0, key1 = _decomposition(p, split)
    return key0, key1


def _decomposition(p: Protocol, split: Optional[SplitSpec]):
    split = split or SplitSpec.for_coords(p.coords)
    left, right = split.halves(p.coords)
    j = p.joint
    xl, yl = _names(left, x_name), _names(left, y_name)
    xr, yr = _names(right, x_name), _names(right, y_name)
    g_xl, g_yl, g_xr, g_yr = j.getter(xl), j.getter(yl), j.getter(xr), j.getter(yr)
    g_m = j.getter(p.m_names)
    r = p.r
    yr_alph = [j.alphabet(n) for n in yr]
    xl_alph = [j.alphabet(n) for n in xl]

    if r >= 1:
        first = p.rounds[1]
        rounds0 = (p.rounds[0], RoundMeta(1, first.sender, _product_alphabet(yr_alph + [first.alphabet]))) + p.rounds[2:]
    else:
        rounds0 = (p.rounds[0], RoundMeta(1, Sender.ALICE, _product_alphabet(yr_alph)))
    rounds1 = (RoundMeta(0, Sender.PUBLIC, _product_alphabet(xl_alph + [p.rounds[0].alphabet])),) + p.rounds[1:]

    def key0(key):
        m = g_m(key)
        if r >= 1:
            msgs = (m[0], compose(*g_yr(key), m[1])) + m[2:]
        else:
            msgs = (m[0], compose(*g_yr(key)))
        return g_xl(key) + g_yl(key) + msgs

    def key1(key):
        m = g_m(key)
        return g_xr(key) + g_yr(key) + (compose(*g_xl(key), m[0]),) + m[1:]

    vars0 = [(n, j.alphabet(n)) for n in xl + yl] + [(m_name(t.index), t.alphabet) for t in rounds0]
    vars1 = [(n, j.alphabet(n)) for n in xr + yr] + [(m_name(t.index), t.alphabet) for t in rounds1]
    pi0 = Protocol(j.pushforward(vars0, key0), rounds0, Kind.GENERALIZED, p.output_round, left)
    pi1 = Protocol(j.pushforward(vars1, key1), rounds1, Kind.GENERALIZED, p.output_round, right)
    return pi0, pi1, key0, key1


# -- advantage tables -----------------------------------------------------

@dataclass(frozen=True)
class ZARow:
    mass: Fraction
    z: Fraction
    a0: Fraction
    a1: Fraction
    q0: Fraction  # Pr(f over left half = 0 | row)
    q1: Fraction  # Pr(f over right half = 0 | row)


@dataclass(frozen=True)
class ZATable:
    """Advantages of f-XOR over the node, its left half, and its right half,
    conditioned on each row (X_L, Y_R, M)."""

    names: Tuple[str, ...]
    rows: Dict[Tuple[str, ...], ZARow]

    def max_product_gap(self) -> Fraction:
        return max((abs(r.z - r.a0 * r.a1) for r in self.rows.values()), default=Fraction(0))

    def expect(self, attr: str, accepted=None) -> Fraction:
        """E[attr | row in accepted] (all rows when ``accepted`` is None)."""
        num, den = Fraction(0), Fraction(0)
        for key, row in self.rows.items():
            if accepted is None or key in accepted:
                num += row.mass * getattr(row, attr)
                den += row.mass
        return num / den


def _xor_bit(p: Protocol, f: FunctionTable, coords):
    """Evaluator of f-XOR over ``coords`` on full keys of p's joint."""
    ix = p.joint.indices(_names(coords, x_name))
    iy = p.joint.indices(_names(coords, y_name))
    pairs = list(zip(ix, iy))

    def bit(key):
        b = 0
        for a, c in pairs:
            b ^= f(key[a], key[c])
        return b

    return bit


def advantage_table(p: Protocol, f: FunctionTable, split: Optional[SplitSpec] = None) -> ZATable:
    """Rows (X_L, Y_R, M) with Z, A0, A1 as exact rationals.

    Requires X_R independent of Y_L given the row, which makes Z = A0 A1.
    """
    split = split or SplitSpec.for_coords(p.coords)
    left, right = split.halves(p.coords)
    rep = partial_rectangle_check(p, None, split)
    if not rep.passed:
        c = rep.checks[0]
        raise RectangleViolation(f"partial rectangle property fails: {c.detail}", magnitude=c.lhs)
    names = _names(left, x_name) + _names(right, y_name) + p.m_names
    get = p.joint.getter(names)
    f0 = _xor_bit(p, f, left)
    f1 = _xor_bit(p, f, right)
    acc: Dict[Tuple, List[Fraction]] = defaultdict(lambda: [Fraction(0)] * 4)
    for key, q in p.joint.items():
        a = acc[get(key)]
        b0, b1 = f0(key), f1(key)
        a[0] += q
        if b0 == 0:
            a[1] += q
        if b1 == 0:
            a[2] += q
        if b0 == b1:
            a[3] += q
    rows = {}
    for key, (mass, z0, z1, zz) in acc.items():
        q0, q1, qz = z0 / mass, z1 / mass, zz / mass
        rows[key] = ZARow(mass, abs(2 * qz - 1), abs(2 * q0 - 1), abs(2 * q1 - 1), q0, q1)
    return ZATable(names, rows)


# -- nodes and trees ------------------------------------------------------

@dataclass
class DecompositionNode:
    S: str
    protocol: Protocol
    mu: JointTable
    eps: Fraction
    info: float
    theta: float
    gamma: float
    gamma_alice: float
    gamma_bob: float
    chi: Fraction
    rectangle: Fraction
    p: Optional[Fraction] = None
    W: Optional[Event] = None
    Lambda: float = 0.0
    za: Optional[ZATable] = None
    EZ_W: Optional[Fraction] = None
    EA0_W: Optional[Fraction] = None
    EA1_W: Optional[Fraction] = None
    partial_rect_given_W: Optional[Fraction] = None
    theta_given_W: Optional[float] = None
    gamma_given_W: Optional[float] = None
    remove_W: List[Tuple[int, float]] = field(default_factory=list)
    b_info: Dict[str, float] = field(default_factory=dict)
    b_independence: Dict[str, Fraction] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.S)

    @property
    def eps_float(self) -> float:
        return float(self.eps)


@dataclass
class DecompositionTree:
    nodes: Dict[str, DecompositionNode]
    f: FunctionTable
    mu: JointTable
    alpha: Fraction
    eps: Fraction
    m: int
    tol: float = 1e-9

    @property
    def n(self) -> int:
        return 2 ** self.m

    @property
    def tau(self) -> float:
        return -math.log2((1 + math.sqrt(self.alpha)) / 2)

    def level(self, k: int) -> List[DecompositionNode]:
        return [self.nodes[S] for S in _strings(k)]

    def leaves(self) -> List[DecompositionNode]:
        return self.level(self.m)

    def potential(self, node: DecompositionNode) -> float:
        """phi_S + psi_S / eps with a natural logarithm in phi_S."""
        phi = 2.0 ** (-node.depth) * -math.log(node.chi) if node.chi > 0 else math.inf
        psi = ((1 + math.sqrt(self.alpha)) / 2) ** node.depth * float(node.eps)
        return phi + (psi / float(self.eps) if self.eps else 0.0)


def _strings(k: int) -> List[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=k)]


def node_mu(mu: JointTable, coords: Sequence[str]) -> JointTable:
    """mu on each of ``coords`` independently, over X<c>..., Y<c>...."""
    base = mu.reorder(("X", "Y"))
    out = None
    for c in coords:
        part = base.rename({"X": x_name(c), "Y": y_name(c)})
        out = part if out is None else out.product(part)
    return out.reorder(_names(coords, x_name) + _names(coords, y_name))


def _make_node(S, protocol, mu, f, chi, tol) -> DecompositionNode:
    mu_s = node_mu(mu, protocol.coords)
    eps = output_stats(protocol, f).disadvantage_exact
    th = theta_cost(protocol, mu_s, verify=False)
    ga = gamma_cost(protocol, mu_s)
    rect = rectangle_check(protocol, mu_s).checks[0].lhs
    return DecompositionNode(
        S=S,
        protocol=protocol,
        mu=mu_s,
        eps=eps,
        info=information_cost(protocol),
        theta=th.total,
        gamma=ga.total,
        gamma_alice=ga.alice,
        gamma_bob=ga.bob,
        chi=chi,
        rectangle=rect,
    )


def _remove_w_terms(p: Protocol, cond: Protocol) -> List[Tuple[int, float]]:
    """Per round i: E over the conditioned protocol of
    D(cond(M_i | own input, M_<i) || p(M_i | own input, M_<i))."""
    out = []
    for r in p.rounds[1:]:
        names = p.inputs_of(r.sender) + p.m_names[: r.index + 1]
        num = p.joint.marginal_masses(names)
        den = p.joint.marginal_masses(names[:-1])
        num_w = cond.joint.marginal_masses(names)
        den_w = cond.joint.marginal_masses(names[:-1])
        total = math.fsum(
            float(q) * math.log2((q / den_w[k[:-1]]) / (num[k] / den[k[:-1]])) for k, q in num_w.items()
        )
        out.append((r.index, total))
    return out


def _more_likely_bit_kernel(tp: Protocol, f: FunctionTable, sender: Sender):
    """Kernel for the more likely value of f-XOR over tp's coordinates given
    the sender's input and tp's transcript (ties go to 0)."""
    reads = tp.inputs_of(sender) + tp.m_names
    get = tp.joint.getter(reads)
    fb = _xor_bit(tp, f, tp.coords)
    zero: Dict[Tuple, Fraction] = defaultdict(Fraction)
    total: Dict[Tuple, Fraction] = defaultdict(Fraction)
    for key, q in tp.joint.items():
        ctx = get(key)
        total[ctx] += q
        if fb(key) == 0:
            zero[ctx] += q
    choice = {ctx: "0" if 2 * zero[ctx] >= t else "1" for ctx, t in total.items()}
    return reads, (lambda *ctx: {choice[ctx]: Fraction(1)})


def conditional_decompose(
    node: DecompositionNode,
    f: FunctionTable,
    alpha: Fraction,
    tol: float = 1e-9,
    verify: bool = True,
) -> Tuple[DecompositionNode, DecompositionNode]:
    """Condition the node on W = {Z >= alpha}, split it, and append the more
    likely answer bit to each half (Alice for the left, Bob for the right).

    Fills the node's conditioning fields and returns the two children.
    """
    p = node.protocol
    split = SplitSpec(node.S)
    za = advantage_table(p, f, split)
    accepted = frozenset(k for k, row in za.rows.items() if row.z >= alpha)
    p_s = sum((za.rows[k].mass for k in accepted), Fraction(0))
    if p_s == 0:
        raise DegenerateConditioning(f"node {node.S or '∅'}: no row has Z >= alpha = {alpha}", node=node.S)
    W = Event(za.names, accepted)
    cond = condition_protocol(p, W)
    t0, t1 = binary_decompose(cond, split)
    reads0, k0 = _more_likely_bit_kernel(t0, f, Sender.ALICE)
    reads1, k1 = _more_likely_bit_kernel(t1, f, Sender.BOB)
    c0 = append_message(t0, Sender.ALICE, k0, BITS, reads0)
    c1 = append_message(t1, Sender.BOB, k1, BITS, reads1)

    node.p = p_s
    node.W = W
    node.za = za
    node.EZ_W = za.expect("z", accepted)
    node.EA0_W = za.expect("a0", accepted)
    node.EA1_W = za.expect("a1", accepted)
    if verify:
        node.partial_rect_given_W = partial_rectangle_check(cond, None, split).checks[0].lhs
        node.theta_given_W = theta_cost(cond, node.mu, verify=False).total
        node.gamma_given_W = gamma_cost(cond, node.mu).total
        node.remove_W = _remove_w_terms(p, cond)
    children = []
    for label, tp, child, sender in ((node.S + "0", t0, c0, Sender.ALICE), (node.S + "1", t1, c1, Sender.BOB)):
        ch = _make_node(label, child, _base_mu_of(node), f, p_s * node.chi, tol)
        if verify:
            b = (m_name(child.r),)
            node.b_info[label] = mutual_information(child.joint, b, tp.m_names, child.input_names)
            other = child.inputs_of(sender.other)
            node.b_independence[label] = ci_violation(child.joint, b, other, child.inputs_of(sender) + tp.m_names)[0]
        children.append(ch)
    return children[0], children[1]


def _base_mu_of(node: DecompositionNode) -> JointTable:
    c = node.protocol.coords[0]
    return node.mu.marginal((x_name(c), y_name(c))).rename({x_name(c): "X", y_name(c): "Y"})


def _base_mu(p: Protocol, mu: JointTable) -> JointTable:
    if set(mu.names) == {"X", "Y"}:
        return mu.reorder(("X", "Y"))
    if set(mu.names) != set(p.input_names):
        raise NonProductInput(f"mu over {mu.names} matches neither one coordinate nor {p.input_names}")
    c = p.coords[0]
    base = mu.marginal((x_name(c), y_name(c))).rename({x_name(c): "X", y_name(c): "Y"})
    if node_mu(base, p.coords).masses != mu.marginal_masses(p.input_names):
        raise NonProductInput("mu is not an i.i.d. product across coordinates")
    return base


def recursive_decompose(
    p: Protocol,
    f: FunctionTable,
    mu: JointTable,
    alpha: Optional[Fraction] = None,
    max_entries: int = DEFAULT_MAX_ENTRIES,
    tol: float = 1e-9,
    verify: bool = True,
) -> DecompositionTree:
    """Apply conditional decomposition level by level down to single coordinates.

    ``mu`` is the single-coordinate input distribution (over X, Y) or its
    n-fold product over p's inputs. ``alpha`` defaults to 1 - 2 eps with eps
    the measured disadvantage of ``p``.
    """
    require_standard(p)
    n = p.coordinate_count
    if n & (n - 1):
        raise NonPowerOfTwo(f"{n} coordinates is not a power of two")
    m = n.bit_length() - 1
    if len(p.joint) > max_entries:
        raise BudgetExceeded(f"joint has {len(p.joint)} support points, budget {max_entries}")
    base = _base_mu(p, mu)
    root = _make_node("", p, base, f, Fraction(1), tol)
    eps = root.eps
    if eps >= Fraction(1, 2):
        raise DisadvantageTooLarge(f"measured disadvantage {eps} is not below 1/2")
    if alpha is None:
        alpha = 1 - 2 * eps
    alpha = Fraction(alpha)
    nodes = {"": root}
    for k in range(m):
        for S in _strings(k):
            c0, c1 = conditional_decompose(nodes[S], f, alpha, tol, verify)
            for c in (c0, c1):
                if len(c.protocol.joint) > max_entries:
                    raise BudgetExceeded(
                        f"node {c.S} has {len(c.protocol.joint)} support points, budget {max_entries}"
                    )
                nodes[c.S] = c
    tree = DecompositionTree(nodes, f, base, alpha, eps, m, tol)
    for node in nodes.values():
        node.Lambda = tree.potential(node)
    return tree


def leaf_distribution(t: DecompositionTree) -> Dict[str, Fraction]:
    leaves = t.leaves()
    total = sum((x.chi for x in leaves), Fraction(0))
    return {x.S: x.chi / total for x in leaves}


def _expect_d(t: DecompositionTree, attr: str) -> float:
    d = leaf_distribution(t)
    return math.fsum(float(d[S]) * float(getattr(t.nodes[S], attr)) for S in d)


def audit_tree(t: DecompositionTree, tol: Optional[float] = None) -> VerdictReport:
    """Evaluate every per-node and per-level inequality of the decomposition."""
    tol = t.tol if tol is None else tol
    rep = VerdictReport("decomposition audit")
    eps = t.eps
    sa = math.sqrt(t.alpha)
    shrink = 2 / (1 + sa)
    name = lambda S: S or "∅"
    internal = [t.nodes[S] for k in range(t.m) for S in _strings(k)]

    # (a) level sums of disadvantages
    for k in range(t.m + 1):
        total = math.fsum(float(x.eps) for x in t.level(k))
        rep.le(f"a.level_{k}.sum_eps", total, shrink**k * float(eps), tol)
    # (b)
    for S, x in sorted(t.nodes.items()):
        rep.le(f"b.eps_le_root[{name(S)}]", x.eps, eps, detail="exact")
    # (c), (d)
    for x in internal:
        num = 1 - x.eps - t.alpha
        den = x.EZ_W - t.alpha
        if den > 0:
            rep.ge(f"c.p_lower_bound[{name(x.S)}]", x.p, num / den, detail="exact")
        else:
            rep.flag(f"c.p_lower_bound[{name(x.S)}]", num <= 0, detail=f"denominator 0, numerator {num}")
        rep.ge(f"d.EZ_given_W[{name(x.S)}]", x.EZ_W, 1 - x.eps, detail="exact")
    # (e) potentials and total chi
    lam = {S: t.potential(x) for S, x in t.nodes.items()}
    for x in internal:
        rep.le(f"e.potential[{name(x.S)}]", lam[x.S + "0"] + lam[x.S + "1"], lam[x.S], tol)
    rep.eq("e.potential_root_is_1", lam[""], 1.0 if eps else 0.0, tol)
    sum_chi = sum((x.chi for x in t.leaves()), Fraction(0))
    rep.ge("e.sum_chi_leaves", sum_chi, t.n / math.e, 0.0, detail=f"sum chi = {format_fraction(sum_chi)}")
    # (f) recurrences
    for x in internal:
        h = binary_entropy(x.p)
        a, b = t.nodes[x.S + "0"], t.nodes[x.S + "1"]
        rep.le(f"f.theta_recurrence[{name(x.S)}]", a.theta + b.theta, (x.theta + h) / float(x.p), tol)
        rep.le(f"f.gamma_recurrence[{name(x.S)}]", a.gamma + b.gamma, (x.gamma + 2 * h) / float(x.p) + 4, tol)
    # (g) pattern sums
    sum_h = math.fsum(binary_entropy(x.p) for x in internal)
    root = t.nodes[""]
    lhs_theta = math.fsum(float(x.chi) * x.theta for x in t.leaves())
    lhs_gamma = math.fsum(float(x.chi) * x.gamma for x in t.leaves())
    theta_bound = root.theta + sum_h
    gamma_bound = root.gamma + 2 * sum_h + 4 * (2**t.m - 1)
    rep.le("g.theta_pattern", lhs_theta, theta_bound, tol)
    rep.le("g.gamma_pattern", lhs_gamma, gamma_bound, tol)
    # (h)
    for S, x in sorted(t.nodes.items()):
        rep.ge(f"h.gamma_ge_ic[{name(S)}]", x.gamma, x.info, tol)
    # (i) expectations under the leaf distribution
    denom = t.n / math.e
    rep.le("i.expected_eps", _expect_d(t, "eps"), math.e * float(eps) * t.n ** (t.tau - 1), tol)
    rep.le("i.expected_theta", _expect_d(t, "theta"), theta_bound / denom, tol)
    rep.le("i.expected_gamma", _expect_d(t, "gamma"), gamma_bound / denom, tol)
    rep.le("i.expected_ic", _expect_d(t, "info"), gamma_bound / denom, tol)

    # per-node structure
    rep.eq("node.chi_root", root.chi, Fraction(1))
    rep.eq("root.theta_zero", root.theta, 0.0, tol)
    rep.eq("root.gamma_eq_ic", root.gamma, root.info, tol)
    for S, x in sorted(t.nodes.items()):
        rep.eq(f"node.rectangle[{name(S)}]", x.rectangle, Fraction(0))
    for x in internal:
        S = name(x.S)
        a, b = t.nodes[x.S + "0"], t.nodes[x.S + "1"]
        rep.eq(f"node.chi_recursion[{S}]", max(abs(a.chi - x.p * x.chi), abs(b.chi - x.p * x.chi)), Fraction(0))
        rep.eq(f"node.Z_eq_A0A1[{S}]", float(x.za.max_product_gap()), 0.0, tol)
        rep.le(f"node.eps_sum_bound[{S}]", float(a.eps + b.eps), shrink * float(1 - x.EZ_W), tol)
        rep.eq(f"node.child_eps_from_advantage[{x.S}0]", a.eps, 1 - x.EA0_W)
        rep.eq(f"node.child_eps_from_advantage[{x.S}1]", b.eps, 1 - x.EA1_W)
        if x.partial_rect_given_W is not None:
            rep.eq(f"node.partial_rectangle_given_W[{S}]", x.partial_rect_given_W, Fraction(0))
            h = binary_entropy(x.p)
            rep.eq(f"node.theta_split_identity[{S}]", a.theta + b.theta, x.theta_given_W, tol)
            rep.le(f"node.theta_conditioning[{S}]", x.theta_given_W, (x.theta + h) / float(x.p), tol)
            rep.le(f"node.gamma_split[{S}]", a.gamma + b.gamma, x.gamma_given_W + 4, tol)
            rep.le(f"node.gamma_conditioning[{S}]", x.gamma_given_W, (x.gamma + 2 * h) / float(x.p), tol)
            for i, v in x.remove_W:
                rep.ge(f"node.remove_W[{S}].round_{i}", v, 0.0, tol)
            for child, v in sorted(x.b_info.items()):
                rep.le(f"node.answer_bit_info_le_1[{child}]", v, 1.0, tol)
            for child, v in sorted(x.b_independence.items()):
                rep.eq(f"node.answer_bit_sender_side[{child}]", v, Fraction(0))
    return rep


def select_good_leaf(
    t: DecompositionTree,
    eps_mult: float = 100.0,
    info_mult: float = 100.0,
    theta_mult: float = 100.0,
) -> str:
    """The lexicographically smallest leaf whose disadvantage, information
    cost and theta-cost are each within the given multiple of their
    expectation under the leaf distribution."""
    e_eps, e_info, e_theta = _expect_d(t, "eps"), _expect_d(t, "info"), _expect_d(t, "theta")
    tol = t.tol
    best, best_score = None, math.inf
    for x in sorted(t.leaves(), key=lambda v: v.S):
        ok = (
            float(x.eps) <= eps_mult * e_eps + tol
            and x.info <= info_mult * e_info + tol
            and x.theta <= theta_mult * e_theta + tol
        )
        if ok:
            return x.S
        ratios = [
            float(x.eps) / (e_eps or 1) / eps_mult,
            x.info / (e_info or 1) / info_mult,
            x.theta / (e_theta or 1) / theta_mult,
        ]
        if max(ratios) < best_score:
            best, best_score = x.S, max(ratios)
    raise NoQualifyingLeaf(f"no leaf meets the thresholds; closest is {best}", best=best)


@dataclass(frozen=True)
class FinalizedLeaf:
    S: str
    eta: Protocol
    audit: VerdictReport
    error: Fraction
    ic: float


def finalize_leaf(
    t: DecompositionTree, S: str, mu: Optional[JointTable] = None, f: Optional[FunctionTable] = None,
    tol: Optional[float] = None,
) -> FinalizedLeaf:
    """Standardize leaf ``S`` against mu and audit the losses."""
    tol = t.tol if tol is None else tol
    if len(S) != t.m:
        raise ValueError(f"{S!r} is not a leaf of a depth-{t.m} tree")
    node = t.nodes[S]
    f = f or t.f
    mu_s = node_mu(mu if mu is not None else t.mu, node.protocol.coords)
    pi = node.protocol
    eta = standardize(pi, mu_s)
    rep = VerdictReport("leaf standardization")
    rep.extend(standardization_loss_audit(pi, mu_s, f, tol))
    tv = tv_distance(pi.joint, eta.joint)
    err = output_stats(eta, f).error_prob
    rep.le("leaf.error_le_half_eps_plus_tv", err, node.eps / 2 + tv, detail="exact")
    rep.flag(
        "leaf.eta_input_marginal_is_mu",
        eta.joint.marginal_masses(eta.input_names) == mu_s.marginal_masses(eta.input_names),
    )
    ic = information_cost(eta)
    return FinalizedLeaf(S, eta, rep, err, ic)


def tree_csv(t: DecompositionTree) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S", "depth", "eps", "I", "Theta", "Gamma", "p_num", "p_den", "chi_num", "chi_den", "Lambda"])
    for k in range(t.m + 1):
        for x in t.level(k):
            p = ("", "") if x.p is None else (x.p.numerator, x.p.denominator)
            w.writerow(
                [x.S or "∅", x.depth, repr(float(x.eps)), repr(x.info), repr(x.theta), repr(x.gamma), *p,
                 x.chi.numerator, x.chi.denominator, repr(t.potential(x))]
            )
    return buf.getvalue()
