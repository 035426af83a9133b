"""Protocol constructions: naive XOR, single-coordinate embedding, majority
boosting, and correlated sampling of two distributions."""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_info import JointTable, tv_distance
from .errors import AlphabetMismatch, EvenT, NonProductInput
from .protocol import (
    BITS,
    FunctionTable,
    Kind,
    Protocol,
    RoundMeta,
    Sender,
    bit_of,
    compose,
    coordinate_labels,
    information_cost,
    m_name,
    require_standard,
    x_name,
    y_name,
)

__all__ = [
    "naive_xor",
    "Embedding",
    "embed_single",
    "boost_majority",
    "majority_error",
    "CouplingResult",
    "coupled_mismatch_exact",
    "coupled_draw",
]


def _product_alphabet(alphabets: Sequence[Sequence[str]]) -> Tuple[str, ...]:
    return tuple(compose(*parts) for parts in itertools.product(*alphabets))


def _answer_sender(rounds: Sequence[RoundMeta]) -> Sender:
    last = rounds[-1].sender
    return Sender.ALICE if last is Sender.PUBLIC else last.other


def _single(p: Protocol) -> None:
    if p.coordinate_count != 1:
        raise AlphabetMismatch("expected a single-coordinate protocol")


def naive_xor(p: Protocol, n: int) -> Protocol:
    """Run ``n`` independent copies of ``p`` one after another, then announce
    the XOR of their answers.

    Copy ``j`` runs on coordinate ``j``; its public randomness is folded
    into a composite M0 and its rounds keep their original senders.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    require_standard(p)
    _single(p)
    coords = coordinate_labels(n)
    r = p.r
    rounds = [RoundMeta(0, Sender.PUBLIC, _product_alphabet([p.rounds[0].alphabet] * n))]
    for _ in range(n):
        for meta in p.rounds[1:]:
            rounds.append(RoundMeta(len(rounds), meta.sender, meta.alphabet))
    rounds.append(RoundMeta(len(rounds), _answer_sender(rounds), BITS))
    out = p.output_round
    masses: Dict[Tuple[str, ...], Fraction] = {}
    support = list(p.joint.items())
    for combo in itertools.product(support, repeat=n):
        xs = tuple(k[0] for k, _ in combo)
        ys = tuple(k[1] for k, _ in combo)
        m0 = compose(*(k[2] for k, _ in combo))
        msgs: List[str] = []
        ans = 0
        w = Fraction(1)
        for k, q in combo:
            msgs.extend(k[3 : 3 + r])
            ans ^= bit_of(k[2 + out])
            w *= q
        masses[xs + ys + (m0,) + tuple(msgs) + (str(ans),)] = w
    names = [x_name(c) for c in coords] + [y_name(c) for c in coords] + [m_name(i) for i in range(len(rounds))]
    alph = [p.joint.alphabet("X")] * n + [p.joint.alphabet("Y")] * n + [m.alphabet for m in rounds]
    joint = JointTable._trusted(names, alph, masses)
    return Protocol(joint, rounds, Kind.STANDARD, len(rounds) - 1, coords)


def _product_check(p: Protocol) -> JointTable:
    """Return the per-coordinate input distribution, or raise NonProductInput."""
    inputs = p.input_marginal()
    base = None
    product = None
    for c in p.coords:
        mc = p.joint.marginal((x_name(c), y_name(c))).rename({x_name(c): "X", y_name(c): "Y"})
        if base is None:
            base = mc
        elif mc.masses != base.masses:
            raise NonProductInput(f"coordinate {c!r} has a different input distribution")
        part = mc.rename({"X": x_name(c), "Y": y_name(c)})
        product = part if product is None else product.product(part)
    if product.marginal_masses(p.input_names) != inputs.masses:
        raise NonProductInput("input distribution is not a product across coordinates")
    return base


@dataclass(frozen=True)
class Embedding:
    eta: Protocol
    per_j: Tuple[float, ...]
    per_j_protocols: Tuple[Protocol, ...]


def embed_single(p: Protocol, f: FunctionTable) -> Embedding:
    """Embed a single (x, y) into a uniformly random coordinate of ``p``.

    The index J, X_{<J} and Y_{>J} become public randomness, the remaining
    fills are private (integrated out), and after ``p`` runs Alice sends
    f-XOR over coordinates after J, Bob sends it over coordinates before J,
    and Alice announces the corrected answer.
    """
    require_standard(p)
    _product_check(p)
    n = p.coordinate_count
    k = n
    r = p.r
    out = p.output_round
    fx = lambda xs, ys: _xor_eval(f, xs, ys)
    pieces: List[Dict[Tuple[str, ...], Fraction]] = []
    m0_alphabet = set()
    for j in range(n):
        piece: Dict[Tuple[str, ...], Fraction] = defaultdict(Fraction)
        for key, q in p.joint.items():
            xs, ys = key[:k], key[k : 2 * k]
            m = key[2 * k :]
            m0 = compose(str(j), *xs[:j], *ys[j + 1 :], m[0])
            m0_alphabet.add(m0)
            c_a = fx(xs[j + 1 :], ys[j + 1 :])
            c_b = fx(xs[:j], ys[:j])
            ans = bit_of(m[out]) ^ c_a ^ c_b
            piece[(xs[j], ys[j], m0) + m[1:] + (str(c_a), str(c_b), str(ans))] += q
        pieces.append(dict(piece))
    rounds = [RoundMeta(0, Sender.PUBLIC, tuple(sorted(m0_alphabet)))]
    rounds += [RoundMeta(i, meta.sender, meta.alphabet) for i, meta in enumerate(p.rounds[1:], start=1)]
    rounds += [
        RoundMeta(r + 1, Sender.ALICE, BITS),
        RoundMeta(r + 2, Sender.BOB, BITS),
        RoundMeta(r + 3, Sender.ALICE, BITS),
    ]
    names = ["X", "Y"] + [m_name(i) for i in range(len(rounds))]
    alph = [p.joint.alphabet(x_name(p.coords[0])), p.joint.alphabet(y_name(p.coords[0]))] + [
        m.alphabet for m in rounds
    ]
    mixture: Dict[Tuple[str, ...], Fraction] = defaultdict(Fraction)
    per_protocols = []
    for piece in pieces:
        per_protocols.append(
            Protocol(JointTable._trusted(names, alph, piece), rounds, Kind.STANDARD, r + 3, ("",))
        )
        for key, q in piece.items():
            mixture[key] += q / n
    eta = Protocol(JointTable._trusted(names, alph, dict(mixture)), rounds, Kind.STANDARD, r + 3, ("",))
    per_j = tuple(information_cost(pj) for pj in per_protocols)
    return Embedding(eta, per_j, tuple(per_protocols))


def _xor_eval(f: FunctionTable, xs, ys) -> int:
    b = 0
    for x, y in zip(xs, ys):
        b ^= f(x, y)
    return b


def boost_majority(p: Protocol, T: int) -> Protocol:
    """Run ``T`` independent copies of ``p`` on the same input and announce
    the majority answer."""
    if T < 1 or T % 2 == 0:
        raise EvenT(f"T must be odd and positive, got {T}")
    require_standard(p)
    _single(p)
    r = p.r
    out = p.output_round
    rounds = [RoundMeta(0, Sender.PUBLIC, _product_alphabet([p.rounds[0].alphabet] * T))]
    for _ in range(T):
        for meta in p.rounds[1:]:
            rounds.append(RoundMeta(len(rounds), meta.sender, meta.alphabet))
    rounds.append(RoundMeta(len(rounds), _answer_sender(rounds), BITS))
    by_input: Dict[Tuple[str, str], List[Tuple[Tuple[str, ...], Fraction]]] = defaultdict(list)
    mu: Dict[Tuple[str, str], Fraction] = defaultdict(Fraction)
    for key, q in p.joint.items():
        by_input[key[:2]].append((key[2:], q))
        mu[key[:2]] += q
    masses: Dict[Tuple[str, ...], Fraction] = {}
    for xy, transcripts in by_input.items():
        w_xy = mu[xy]
        cond = [(m, q / w_xy) for m, q in transcripts]
        for combo in itertools.product(cond, repeat=T):
            w = w_xy
            ones = 0
            msgs: List[str] = []
            for m, q in combo:
                w *= q
                ones += bit_of(m[out])
                msgs.extend(m[1 : 1 + r])
            maj = "1" if 2 * ones > T else "0"
            key = xy + (compose(*(m[0] for m, _ in combo)),) + tuple(msgs) + (maj,)
            masses[key] = masses.get(key, Fraction(0)) + w
    names = ["X", "Y"] + [m_name(i) for i in range(len(rounds))]
    alph = [p.joint.alphabet("X"), p.joint.alphabet("Y")] + [m.alphabet for m in rounds]
    joint = JointTable._trusted(names, alph, masses)
    return Protocol(joint, rounds, Kind.STANDARD, len(rounds) - 1, ("",))


def majority_error(err: Fraction, T: int) -> Fraction:
    """Probability that the majority of T independent answers, each wrong
    with probability ``err``, is wrong."""
    err = Fraction(err)
    return sum(
        (comb(T, i) * err**i * (1 - err) ** (T - i) for i in range(T // 2 + 1, T + 1)),
        Fraction(0),
    )


# -- correlated sampling --------------------------------------------------

@dataclass(frozen=True)
class CouplingResult:
    """``exact_mismatch`` is Pr(i != i') for the first acceptance indices of
    the two samplers; Pr(a != a') never exceeds it."""

    exact_mismatch: Fraction
    tv: Fraction
    samples: Optional[Tuple[Tuple[Tuple[str, ...], Tuple[str, ...]], ...]] = None
    seed: Optional[int] = None
    empirical_mismatch: Optional[float] = None
    marginal_a: Optional[Dict[Tuple[str, ...], float]] = None
    marginal_b: Optional[Dict[Tuple[str, ...], float]] = None
    empirical_atom_mismatch: Optional[float] = None


def _aligned(mu: JointTable, nu: JointTable):
    if mu.variables != nu.variables:
        raise AlphabetMismatch("coupled distributions must share variables and alphabets")
    atoms = sorted(mu.masses.keys() | nu.masses.keys())
    return atoms


def coupled_mismatch_exact(mu: JointTable, nu: JointTable) -> CouplingResult:
    """Exact Pr(a != a') of the rejection-sampling coupling:
    sum |mu - nu| / sum max(mu, nu)."""
    atoms = _aligned(mu, nu)
    diff = sum((abs(mu[a] - nu[a]) for a in atoms), Fraction(0))
    union = sum((max(mu[a], nu[a]) for a in atoms), Fraction(0))
    return CouplingResult(diff / union, tv_distance(mu, nu))


def _first_accept(idx: np.ndarray, rho: np.ndarray, weights: np.ndarray):
    """Per row: (accepted atom, position in the block), or (-1, -1)."""
    hit = rho < weights[idx]
    first = np.argmax(hit, axis=1)
    rows = np.arange(hit.shape[0])
    found = hit[rows, first]
    return np.where(found, idx[rows, first], -1), np.where(found, first, -1)


def coupled_draw(mu: JointTable, nu: JointTable, seed: int, count: int) -> CouplingResult:
    """Draw ``count`` coupled pairs (a, a') from a shared stream of
    (atom, threshold) proposals.

    Each pair uses its own sequence of uniform atoms a_i and thresholds
    rho_i in [0, 1); a is the first a_i with rho_i < mu(a_i) and a' the first
    with rho_i < nu(a_i). The generator is numpy's PCG64 seeded with
    ``seed``, so results are identical across runs.
    """
    if count < 1:
        raise ValueError("count must be positive")
    atoms = _aligned(mu, nu)
    wa = np.array([float(mu[a]) for a in atoms])
    wb = np.array([float(nu[a]) for a in atoms])
    rng = np.random.Generator(np.random.PCG64(seed))
    batch = max(16, 4 * len(atoms))
    res_a = np.full(count, -1)
    res_b = np.full(count, -1)
    pos_a = np.full(count, -1)
    pos_b = np.full(count, -1)
    pending = np.arange(count)
    offset = 0
    # an unresolved row continues its own proposal sequence in the next block
    while pending.size:
        idx = rng.integers(0, len(atoms), size=(pending.size, batch))
        rho = rng.random((pending.size, batch))
        got_a, at_a = _first_accept(idx, rho, wa)
        got_b, at_b = _first_accept(idx, rho, wb)
        fill_a = (res_a[pending] < 0) & (got_a >= 0)
        fill_b = (res_b[pending] < 0) & (got_b >= 0)
        res_a[pending[fill_a]] = got_a[fill_a]
        res_b[pending[fill_b]] = got_b[fill_b]
        pos_a[pending[fill_a]] = at_a[fill_a] + offset
        pos_b[pending[fill_b]] = at_b[fill_b] + offset
        offset += batch
        pending = pending[(res_a[pending] < 0) | (res_b[pending] < 0)]
    samples = tuple((atoms[i], atoms[j]) for i, j in zip(res_a.tolist(), res_b.tolist()))
    ca = np.bincount(res_a, minlength=len(atoms)) / count
    cb = np.bincount(res_b, minlength=len(atoms)) / count
    exact = coupled_mismatch_exact(mu, nu)
    return CouplingResult(
        exact.exact_mismatch,
        exact.tv,
        samples,
        seed,
        float(np.mean(pos_a != pos_b)),
        {a: float(ca[i]) for i, a in enumerate(atoms)},
        {a: float(cb[i]) for i, a in enumerate(atoms)},
        float(np.mean(res_a != res_b)),
    )
