"""Exact-rational joint distributions over named variables and the usual
information measures on them.

Masses are :class:`fractions.Fraction`; logarithmic quantities are float bits.
Zero-mass assignments are never stored, which realizes the ``0 log 0 = 0``
convention everywhere.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from operator import itemgetter
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    MalformedTable,
    NonAbsolutelyContinuous,
    OutOfRange,
    UnknownVariable,
    ZeroProbabilityEvent,
)

Rational = Fraction
Key = Tuple[str, ...]

__all__ = [
    "Rational",
    "as_fraction",
    "format_fraction",
    "JointTable",
    "Event",
    "BitVar",
    "entropy",
    "mutual_information",
    "kl_divergence",
    "expected_conditional_kl",
    "tv_distance",
    "binary_entropy",
    "advantage",
    "condition_table",
    "ci_violation",
]


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` / decimal strings to a Fraction.

    Floats are rejected: a binary float rarely denotes the rational the
    caller had in mind.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedTable(f"not a rational: {value!r}") from exc
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def format_fraction(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _getter(indices: Sequence[int]) -> Callable[[Key], Key]:
    if len(indices) == 0:
        return lambda key: ()
    if len(indices) == 1:
        i = indices[0]
        return lambda key: (key[i],)
    return itemgetter(*indices)


class JointTable:
    """A probability table over ordered named variables with finite alphabets.

    Only positive masses are stored. Construction validates alphabets,
    non-negativity and that the masses sum to exactly 1.
    """

    __slots__ = ("_names", "_alphabets", "_masses", "_index")

    def __init__(
        self,
        variables: Iterable[Tuple[str, Sequence[str]]],
        masses: Mapping[Sequence[str], object],
    ):
        variables = [(str(n), tuple(a)) for n, a in variables]
        names = tuple(n for n, _ in variables)
        if len(set(names)) != len(names):
            raise MalformedTable(f"duplicate variable names in {names}")
        alphabets = tuple(a for _, a in variables)
        for n, a in variables:
            if len(set(a)) != len(a):
                raise MalformedTable(f"duplicate symbols in alphabet of {n}")
        alpha_sets = [set(a) for a in alphabets]
        clean: Dict[Key, Fraction] = {}
        for key, p in masses.items():
            key = tuple(key)
            if len(key) != len(names):
                raise MalformedTable(f"assignment {key} has wrong arity for {names}")
            for sym, allowed, n in zip(key, alpha_sets, names):
                if sym not in allowed:
                    raise MalformedTable(f"symbol {sym!r} not in alphabet of {n}")
            q = as_fraction(p)
            if q < 0:
                raise MalformedTable(f"negative mass at {key}")
            if q:
                clean[key] = clean.get(key, Fraction(0)) + q
        total = sum(clean.values(), Fraction(0))
        if total != 1:
            raise MalformedTable(f"masses sum to {total}, not 1")
        self._init(names, alphabets, clean)

    def _init(self, names, alphabets, masses):
        self._names = names
        self._alphabets = alphabets
        self._masses = masses
        self._index = {n: i for i, n in enumerate(names)}

    @classmethod
    def _trusted(cls, names, alphabets, masses) -> "JointTable":
        """Build without validation; callers guarantee positivity and unit sum."""
        t = cls.__new__(cls)
        t._init(tuple(names), tuple(tuple(a) for a in alphabets), masses)
        return t

    @classmethod
    def from_weights(cls, variables, weights: Mapping[Sequence[str], object]) -> "JointTable":
        """Normalize non-negative rational weights into a table."""
        w = {tuple(k): as_fraction(v) for k, v in weights.items()}
        total = sum(w.values(), Fraction(0))
        if total <= 0:
            raise MalformedTable("weights have zero total")
        return cls(variables, {k: v / total for k, v in w.items()})

    @classmethod
    def point(cls, variables, key) -> "JointTable":
        return cls(variables, {tuple(key): 1})

    @classmethod
    def uniform(cls, variables) -> "JointTable":
        variables = [(n, tuple(a)) for n, a in variables]
        keys = _product([a for _, a in variables])
        q = Fraction(1, len(keys))
        return cls(variables, {k: q for k in keys})

    # -- structure -------------------------------------------------------
    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    @property
    def alphabets(self) -> Tuple[Tuple[str, ...], ...]:
        return self._alphabets

    @property
    def variables(self) -> Tuple[Tuple[str, Tuple[str, ...]], ...]:
        return tuple(zip(self._names, self._alphabets))

    @property
    def masses(self) -> Mapping[Key, Fraction]:
        return self._masses

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariable(f"unknown variable {name!r}; have {self._names}") from None

    def indices(self, names: Iterable[str]) -> Tuple[int, ...]:
        return tuple(self.index(n) for n in names)

    def alphabet(self, name: str) -> Tuple[str, ...]:
        return self._alphabets[self.index(name)]

    def getter(self, names: Sequence[str]) -> Callable[[Key], Key]:
        """A function projecting a full key onto ``names`` (as a tuple)."""
        return _getter(self.indices(names))

    def __len__(self) -> int:
        return len(self._masses)

    def items(self):
        return self._masses.items()

    def __getitem__(self, key) -> Fraction:
        return self._masses.get(tuple(key), Fraction(0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointTable):
            return NotImplemented
        return (
            self._names == other._names
            and self._alphabets == other._alphabets
            and self._masses == other._masses
        )

    def __hash__(self):
        return hash((self._names, frozenset(self._masses.items())))

    def __repr__(self) -> str:
        return f"JointTable({list(self._names)}, support={len(self._masses)})"

    # -- transforms ------------------------------------------------------
    def marginal_masses(self, names: Sequence[str]) -> Dict[Key, Fraction]:
        get = self.getter(names)
        out: Dict[Key, Fraction] = defaultdict(Fraction)
        for key, p in self._masses.items():
            out[get(key)] += p
        return dict(out)

    def marginal(self, names: Sequence[str]) -> "JointTable":
        names = tuple(names)
        alph = [self.alphabet(n) for n in names]
        return JointTable._trusted(names, alph, self.marginal_masses(names))

    def reorder(self, names: Sequence[str]) -> "JointTable":
        names = tuple(names)
        if sorted(names) != sorted(self._names):
            raise UnknownVariable(f"reorder needs a permutation of {self._names}")
        return self.marginal(names)

    def probability(self, event: "Event") -> Fraction:
        test = event.tester(self)
        return sum((p for k, p in self._masses.items() if test(k)), Fraction(0))

    def condition(self, event: "Event") -> "JointTable":
        test = event.tester(self)
        kept = {k: p for k, p in self._masses.items() if test(k)}
        z = sum(kept.values(), Fraction(0))
        if z == 0:
            raise ZeroProbabilityEvent(f"event over {event.names} has probability 0")
        if z == 1:
            return JointTable._trusted(self._names, self._alphabets, kept)
        return JointTable._trusted(self._names, self._alphabets, {k: p / z for k, p in kept.items()})

    def pushforward(
        self, variables: Sequence[Tuple[str, Sequence[str]]], fn: Callable[[Key], Key]
    ) -> "JointTable":
        """Image of the table under a deterministic map of full keys."""
        out: Dict[Key, Fraction] = defaultdict(Fraction)
        for key, p in self._masses.items():
            out[fn(key)] += p
        names = [n for n, _ in variables]
        alph = [a for _, a in variables]
        return JointTable._trusted(names, alph, dict(out))

    def rename(self, mapping: Mapping[str, str]) -> "JointTable":
        names = tuple(mapping.get(n, n) for n in self._names)
        if len(set(names)) != len(names):
            raise MalformedTable(f"rename produces duplicate names {names}")
        return JointTable._trusted(names, self._alphabets, self._masses)

    def product(self, other: "JointTable") -> "JointTable":
        """Independent product; variable names must be disjoint."""
        clash = set(self._names) & set(other._names)
        if clash:
            raise MalformedTable(f"product of tables sharing variables {sorted(clash)}")
        masses = {a + b: p * q for a, p in self._masses.items() for b, q in other._masses.items()}
        return JointTable._trusted(self._names + other._names, self._alphabets + other._alphabets, masses)

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "variables": [{"name": n, "alphabet": list(a)} for n, a in self.variables],
            "masses": [
                {"assignment": list(k), "p": format_fraction(p)}
                for k, p in sorted(self._masses.items())
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, doc) -> "JointTable":
        try:
            variables = [(v["name"], [str(s) for s in v["alphabet"]]) for v in doc["variables"]]
            masses: Dict[Key, Fraction] = {}
            for entry in doc["masses"]:
                key = tuple(str(s) for s in entry["assignment"])
                if key in masses:
                    raise MalformedTable(f"assignment {key} listed twice")
                masses[key] = as_fraction(str(entry["p"]))
        except (KeyError, TypeError) as exc:
            raise MalformedTable(f"malformed table document: {exc}") from exc
        return cls(variables, masses)

    @classmethod
    def loads(cls, text: str) -> "JointTable":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedTable(f"invalid JSON: {exc}") from exc
        return cls.from_json(doc)


def _product(alphabets: Sequence[Sequence[str]]):
    keys = [()]
    for a in alphabets:
        keys = [k + (s,) for k in keys for s in a]
    return keys


@dataclass(frozen=True)
class Event:
    """A set of accepted assignments to a subset of a table's variables."""

    names: Tuple[str, ...]
    accepted: frozenset

    @classmethod
    def of(cls, names: Sequence[str], accepted: Iterable[Sequence[str]]) -> "Event":
        return cls(tuple(names), frozenset(tuple(a) for a in accepted))

    @classmethod
    def where(cls, table: JointTable, names: Sequence[str], predicate: Callable[..., bool]) -> "Event":
        """Accept the supported assignments of ``names`` where ``predicate(*values)`` holds."""
        names = tuple(names)
        seen = table.marginal_masses(names)
        return cls(names, frozenset(k for k in seen if predicate(*k)))

    @classmethod
    def equals(cls, name: str, symbol: str) -> "Event":
        return cls((name,), frozenset({(symbol,)}))

    def tester(self, table: JointTable) -> Callable[[Key], bool]:
        get = table.getter(self.names)
        acc = self.accepted
        return lambda key: get(key) in acc

    def complement(self, table: JointTable) -> "Event":
        seen = table.marginal_masses(self.names)
        return Event(self.names, frozenset(k for k in seen if k not in self.accepted))


@dataclass(frozen=True)
class BitVar:
    """A {0,1}-valued function of named variables.

    ``fn`` receives the values of ``names`` positionally and returns 0 or 1.
    """

    names: Tuple[str, ...]
    fn: Callable[..., int]

    @classmethod
    def variable(cls, name: str) -> "BitVar":
        return cls((name,), lambda s: int(s))

    @classmethod
    def of_function(cls, f, x_names: Sequence[str], y_names: Sequence[str]) -> "BitVar":
        """XOR over coordinates of ``f(x_i, y_i)``; ``f`` is any callable on symbol pairs."""
        x_names, y_names = tuple(x_names), tuple(y_names)
        if len(x_names) != len(y_names):
            raise UnknownVariable("x_names and y_names must pair up")
        k = len(x_names)

        def xor_f(*vals):
            b = 0
            for i in range(k):
                b ^= f(vals[i], vals[k + i])
            return b

        return cls(x_names + y_names, xor_f)

    def __xor__(self, other: "BitVar") -> "BitVar":
        names = self.names + tuple(n for n in other.names if n not in self.names)
        ia = [names.index(n) for n in self.names]
        ib = [names.index(n) for n in other.names]
        f, g = self.fn, other.fn
        return BitVar(names, lambda *v: f(*(v[i] for i in ia)) ^ g(*(v[i] for i in ib)))

    def evaluator(self, table: JointTable) -> Callable[[Key], int]:
        get = table.getter(self.names)
        fn = self.fn
        return lambda key: fn(*get(key))


# -- measures ------------------------------------------------------------

def _check_disjoint(*groups):
    seen = set()
    for g in groups:
        for n in g:
            if n in seen:
                raise UnknownVariable(f"variable {n!r} appears in more than one argument")
            seen.add(n)


def _entropy_of(masses: Iterable[Fraction]) -> float:
    arr = np.fromiter((float(p) for p in masses), dtype=float)
    arr = arr[arr > 0]
    return float(-(arr * np.log2(arr)).sum())


def entropy(t: JointTable, vars: Sequence[str], given: Sequence[str] = ()) -> float:
    """H(vars | given) in bits."""
    vars, given = tuple(vars), tuple(given)
    _check_disjoint(vars, given)
    joint = _entropy_of(t.marginal_masses(vars + given).values())
    if not given:
        return joint
    return joint - _entropy_of(t.marginal_masses(given).values())


def mutual_information(
    t: JointTable, a: Sequence[str], b: Sequence[str], given: Sequence[str] = ()
) -> float:
    """I(a : b | given) in bits."""
    a, b, given = tuple(a), tuple(b), tuple(given)
    _check_disjoint(a, b, given)
    h = lambda names: _entropy_of(t.marginal_masses(names).values())
    return h(a + given) + h(b + given) - h(a + b + given) - h(given)


def _aligned_marginals(p: JointTable, q: JointTable, vars):
    vars = tuple(p.names if vars is None else vars)
    return vars, p.marginal_masses(vars), q.marginal_masses(vars)


def kl_divergence(p: JointTable, q: JointTable, vars: Optional[Sequence[str]] = None) -> float:
    """D(p(vars) || q(vars)) in bits; ``vars`` defaults to all of p's variables."""
    vars, pm, qm = _aligned_marginals(p, q, vars)
    total = 0.0
    for key, pp in pm.items():
        qq = qm.get(key)
        if not qq:
            raise NonAbsolutelyContinuous(f"p{key} > 0 but q{key} = 0 over {vars}")
        total += float(pp) * math.log2(pp / qq)
    return total


def expected_conditional_kl(
    p: JointTable, q: JointTable, x: Sequence[str], y: Sequence[str]
) -> float:
    """E_{y~p} D(p(x | y) || q(x)), where q is a table containing ``x``."""
    x, y = tuple(x), tuple(y)
    pxy = p.marginal_masses(y + x)
    py = p.marginal_masses(y)
    qx = q.marginal_masses(x)
    k = len(y)
    total = 0.0
    for key, pp in pxy.items():
        qq = qx.get(key[k:])
        if not qq:
            raise NonAbsolutelyContinuous(f"q{key[k:]} = 0 on p's support")
        total += float(pp) * math.log2(pp / py[key[:k]] / qq)
    return total


def tv_distance(p: JointTable, q: JointTable, vars: Optional[Sequence[str]] = None) -> Fraction:
    """Unhalved total variation: the exact sum of |p - q|."""
    vars, pm, qm = _aligned_marginals(p, q, vars)
    total = Fraction(0)
    for key in pm.keys() | qm.keys():
        total += abs(pm.get(key, 0) - qm.get(key, 0))
    return total


def binary_entropy(p) -> float:
    if isinstance(p, float):
        if not 0.0 <= p <= 1.0:
            raise OutOfRange(f"binary entropy argument {p} outside [0, 1]")
        x = p
    else:
        q = as_fraction(p)
        if not 0 <= q <= 1:
            raise OutOfRange(f"binary entropy argument {q} outside [0, 1]")
        x = float(q)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def advantage(t: JointTable, b: BitVar, given: Optional[Event] = None, exact: bool = False):
    """|2 Pr(b = 0) - 1|, optionally conditioned on an event."""
    if given is not None:
        t = t.condition(given)
    ev = b.evaluator(t)
    p0 = sum((p for k, p in t.items() if ev(k) == 0), Fraction(0))
    adv = abs(2 * p0 - 1)
    return adv if exact else float(adv)


def condition_table(t: JointTable, e: Event) -> JointTable:
    return t.condition(e)


def ci_violation(
    t: JointTable, a: Sequence[str], b: Sequence[str], given: Sequence[str] = ()
) -> Tuple[Fraction, Optional[Key]]:
    """Exact max over supported contexts of |p(a,b|c) - p(a|c) p(b|c)|.

    Returns the violation and a witness key (c, a, b) or ``None`` when the
    conditional independence holds exactly.
    """
    a, b, c = tuple(a), tuple(b), tuple(given)
    _check_disjoint(a, b, c)
    pabc = t.marginal_masses(c + a + b)
    pac = t.marginal_masses(c + a)
    pbc = t.marginal_masses(c + b)
    pc = t.marginal_masses(c)
    nc = len(c)
    a_by_c: Dict[Key, list] = defaultdict(list)
    b_by_c: Dict[Key, list] = defaultdict(list)
    for key in pac:
        a_by_c[key[:nc]].append(key[nc:])
    for key in pbc:
        b_by_c[key[:nc]].append(key[nc:])
    worst, witness = Fraction(0), None
    for ctx, z in pc.items():
        for av in a_by_c[ctx]:
            qa = pac[ctx + av]
            for bv in b_by_c[ctx]:
                joint = pabc.get(ctx + av + bv, Fraction(0))
                # compare z*p(abc) with p(ac)p(bc), scaled back to conditionals
                diff = abs(joint * z - qa * pbc[ctx + bv])
                if diff:
                    v = diff / (z * z)
                    if v > worst:
                        worst, witness = v, ctx + av + bv
    return worst, witness
