"""Standardization, theta-cost and gamma-cost of (generalized) protocols."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core_info import JointTable, binary_entropy, format_fraction, kl_divergence, tv_distance
from .errors import InvariantFailure, NonAbsolutelyContinuous, UnreachablePrefix
from .protocol import (
    FunctionTable,
    Kind,
    Protocol,
    Sender,
    information_cost,
    m_name,
    output_stats,
)
from .report import VerdictReport

__all__ = [
    "PointCost",
    "ThetaCost",
    "GammaCost",
    "Standardization",
    "standardize",
    "standardize_with_record",
    "theta_cost",
    "gamma_cost",
    "point_costs",
    "point_costs_csv",
    "standardization_loss_audit",
]


@dataclass(frozen=True)
class PointCost:
    assignment: Tuple[str, ...]
    mass: Fraction
    theta: float = 0.0
    gamma_A: float = 0.0
    gamma_B: float = 0.0


@dataclass(frozen=True)
class ThetaCost:
    total: float
    points: Tuple[PointCost, ...]


@dataclass(frozen=True)
class GammaCost:
    total: float
    alice: float
    bob: float
    points: Tuple[PointCost, ...]


@dataclass(frozen=True)
class Standardization:
    protocol: Protocol
    extended_contexts: int


def _input_masses(p: Protocol, mu: JointTable) -> Dict[Tuple[str, ...], Fraction]:
    names = p.input_names
    if set(mu.names) != set(names):
        raise NonAbsolutelyContinuous(f"mu over {mu.names} does not cover inputs {names}")
    return mu.marginal_masses(names)


def _round_rows(p: Protocol):
    """For each round i >= 1: map (sender input, prefix) -> list of (symbol, prob)."""
    k = p.coordinate_count
    out = []
    for r in p.rounds[1:]:
        own = p.inputs_of(r.sender)
        names = own + p.m_names[: r.index + 1]
        num = p.joint.marginal_masses(names)
        den = p.joint.marginal_masses(names[:-1])
        rows: Dict[Tuple, List[Tuple[str, Fraction]]] = defaultdict(list)
        for key, q in num.items():
            ctx = key[:-1]
            rows[ctx].append((key[-1], q / den[ctx]))
        out.append((r, dict(rows)))
    return out


def standardize_with_record(p: Protocol, mu: JointTable, strict: bool = False) -> Standardization:
    """Rebuild ``p`` from its sender-side kernels over input distribution ``mu``.

    Kernel contexts that ``mu`` reaches but ``p`` never does get a uniform row
    over the round alphabet; the number of such contexts is recorded. With
    ``strict=True`` they raise :class:`UnreachablePrefix` instead.
    """
    k = p.coordinate_count
    mum = _input_masses(p, mu)
    public = p.joint.marginal_masses((m_name(0),))
    frontier: Dict[Tuple[str, ...], Fraction] = {}
    for xy, w in mum.items():
        for (m0,), q in public.items():
            frontier[xy + (m0,)] = w * q
    extended = 0
    for r, rows in _round_rows(p):
        alice = r.sender is Sender.ALICE
        uniform = [(s, Fraction(1, len(r.alphabet))) for s in r.alphabet]
        seen_missing = set()
        nxt: Dict[Tuple[str, ...], Fraction] = defaultdict(Fraction)
        for key, w in frontier.items():
            own = key[:k] if alice else key[k : 2 * k]
            ctx = own + key[2 * k :]
            row = rows.get(ctx)
            if row is None:
                if strict:
                    raise UnreachablePrefix(f"round {r.index}: context {ctx} unreachable under the protocol")
                if ctx not in seen_missing:
                    seen_missing.add(ctx)
                    extended += 1
                row = uniform
            for s, q in row:
                nxt[key + (s,)] += w * q
        frontier = dict(nxt)
    joint = JointTable._trusted(p.joint.names, p.joint.alphabets, frontier)
    return Standardization(Protocol(joint, p.rounds, Kind.STANDARD, p.output_round, p.coords), extended)


def standardize(p: Protocol, mu: JointTable, strict: bool = False) -> Protocol:
    return standardize_with_record(p, mu, strict).protocol


def _log2_ratio(a: Fraction, b: Fraction) -> float:
    return math.log2(a / b)


def _pointwise_theta(p: Protocol, mu: JointTable) -> Dict[Tuple[str, ...], float]:
    """theta at each support point:
    log pi(x,y|m0)/mu(x,y) + sum_i log pi(m_i|x,y,m_<i)/pi(m_i|own,m_<i)."""
    k = p.coordinate_count
    mum = _input_masses(p, mu)
    j = p.joint
    m0 = m_name(0)
    p_xym0 = j.marginal_masses(p.input_names + (m0,))
    p_m0 = j.marginal_masses((m0,))
    # full-context prefixes pi(x,y,m_<=i)
    full = [p_xym0]
    for i in range(1, p.r + 1):
        full.append(j.marginal_masses(p.input_names + p.m_names[: i + 1]))
    own_num = []
    for r in p.rounds[1:]:
        names = p.inputs_of(r.sender) + p.m_names[: r.index + 1]
        own_num.append((r.sender is Sender.ALICE, j.marginal_masses(names), j.marginal_masses(names[:-1])))
    out = {}
    for key in j.masses:
        xy = key[: 2 * k]
        w = mum.get(xy)
        if not w:
            raise NonAbsolutelyContinuous(f"inputs {xy} have positive protocol mass but mu = 0")
        t = _log2_ratio(p_xym0[key[: 2 * k + 1]] / p_m0[(key[2 * k],)], w)
        for i, (alice, num, den) in enumerate(own_num, start=1):
            c = 2 * k + i  # length of the full context through round i - 1
            full_cond = full[i][key[: c + 1]] / full[i - 1][key[:c]]
            own = key[:k] if alice else key[k : 2 * k]
            msgs = key[2 * k : c + 1]
            own_cond = num[own + msgs] / den[own + msgs[:-1]]
            t += _log2_ratio(full_cond, own_cond)
        out[key] = t
    return out


def _pointwise_gamma(p: Protocol, mu: JointTable) -> Dict[Tuple[str, ...], Tuple[float, float]]:
    """(log pi(x|y,m)/mu(x|y), log pi(y|x,m)/mu(y|x)) at each support point."""
    k = p.coordinate_count
    mum = _input_masses(p, mu)
    mu_x: Dict[Tuple, Fraction] = defaultdict(Fraction)
    mu_y: Dict[Tuple, Fraction] = defaultdict(Fraction)
    for xy, q in mum.items():
        mu_x[xy[:k]] += q
        mu_y[xy[k:]] += q
    j = p.joint
    p_ym = j.marginal_masses(p.y_names + p.m_names)
    p_xm = j.marginal_masses(p.x_names + p.m_names)
    out = {}
    for key, q in j.items():
        xy = key[: 2 * k]
        w = mum.get(xy)
        if not w:
            raise NonAbsolutelyContinuous(f"inputs {xy} have positive protocol mass but mu = 0")
        m = key[2 * k :]
        x, y = key[:k], key[k : 2 * k]
        ga = _log2_ratio(q / p_ym[y + m], w / mu_y[y])
        gb = _log2_ratio(q / p_xm[x + m], w / mu_x[x])
        out[key] = (ga, gb)
    return out


def _weighted_total(p: Protocol, values: Mapping[Tuple, float]) -> float:
    return math.fsum(float(q) * values[key] for key, q in p.joint.items())


def theta_cost(p: Protocol, mu: JointTable, verify: bool = True, tol: float = 1e-9) -> ThetaCost:
    """Expected pointwise theta-cost. With ``verify`` the total is cross-checked
    against the KL divergence to the standardization."""
    pts = _pointwise_theta(p, mu)
    total = _weighted_total(p, pts)
    if verify:
        eta = standardize(p, mu)
        kl = kl_divergence(p.joint, eta.joint)
        if abs(kl - total) > tol:
            raise InvariantFailure(f"theta {total} disagrees with KL to the standardization {kl}")
    points = tuple(PointCost(key, q, theta=pts[key]) for key, q in sorted(p.joint.items()))
    return ThetaCost(total, points)


def gamma_cost(p: Protocol, mu: JointTable) -> GammaCost:
    pts = _pointwise_gamma(p, mu)
    alice = math.fsum(float(q) * pts[key][0] for key, q in p.joint.items())
    bob = math.fsum(float(q) * pts[key][1] for key, q in p.joint.items())
    points = tuple(
        PointCost(key, q, gamma_A=pts[key][0], gamma_B=pts[key][1]) for key, q in sorted(p.joint.items())
    )
    return GammaCost(alice + bob, alice, bob, points)


def point_costs(p: Protocol, mu: JointTable) -> List[PointCost]:
    th = _pointwise_theta(p, mu)
    ga = _pointwise_gamma(p, mu)
    return [
        PointCost(key, q, th[key], ga[key][0], ga[key][1]) for key, q in sorted(p.joint.items())
    ]


def point_costs_csv(p: Protocol, points: Sequence[PointCost]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(p.joint.names) + ["mass_num", "mass_den", "theta", "gamma_A", "gamma_B"])
    for pc in points:
        w.writerow(
            list(pc.assignment)
            + [pc.mass.numerator, pc.mass.denominator, repr(pc.theta), repr(pc.gamma_A), repr(pc.gamma_B)]
        )
    return buf.getvalue()


def standardization_loss_audit(
    p: Protocol, mu: JointTable, f: FunctionTable, tol: float = 1e-9
) -> VerdictReport:
    """Compare the standardization eta of ``p`` with ``p`` itself.

    Checks error_mu(eta) <= error(p) + t and
    IC(eta) <= IC(p) + 2 H(min(t, 1/2)) + t log2(|X||Y|), with t the
    unhalved total variation between the two joints.
    """
    rec = standardize_with_record(p, mu)
    eta = rec.protocol
    rep = VerdictReport("standardization loss")
    ell = kl_divergence(p.joint, eta.joint)
    t = tv_distance(p.joint, eta.joint)
    rho = output_stats(p, f).error_prob
    err_eta = output_stats(eta, f).error_prob
    ic_p = information_cost(p)
    ic_eta = information_cost(eta)
    size = 1
    for n in p.input_names:
        size *= len(p.joint.alphabet(n))
    rep.eq("kl to standardization (ell) is finite and nonnegative", min(ell, 0.0), 0.0, tol, detail=f"ell = {ell!r}")
    rep.le("error of standardization <= error + tv", err_eta, rho + t, detail=f"t = {format_fraction(t)}")
    bound = ic_p + 2 * binary_entropy(min(t, Fraction(1, 2))) + float(t) * math.log2(size)
    # the looser form would use sqrt(2 ln2 ell) >= t in place of t
    rep.le(
        "information cost of standardization <= IC + 2H(min(t,1/2)) + t log|X||Y|",
        ic_eta,
        bound,
        tol,
        detail=f"t = {float(t)!r}; sqrt(2 ln2 ell) = {math.sqrt(2 * math.log(2) * max(ell, 0.0))!r}",
    )
    rep.flag(
        "standardization kernels extended on unreachable contexts",
        True,
        detail=f"{rec.extended_contexts} contexts extended uniformly",
    )
    return rep
