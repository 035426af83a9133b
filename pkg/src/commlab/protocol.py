"""Two-party protocols as joint tables over inputs and transcript rounds.

A protocol over coordinates ``c`` has input variables ``X<c>`` (Alice) and
``Y<c>`` (Bob), followed by rounds ``M0`` (public randomness), ``M1`` ... ``Mr``.
Coordinate labels are binary strings; a single-coordinate protocol uses the
empty label, so its inputs are just ``X`` and ``Y``.
"""
from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core_info import (
    BitVar,
    Event,
    JointTable,
    as_fraction,
    ci_violation,
    format_fraction,
    mutual_information,
)
from .errors import (
    AlphabetMismatch,
    MalformedKernel,
    MalformedTable,
    NonAbsolutelyContinuous,
    NonPowerOfTwo,
    NotStandard,
    OddCoordinateCount,
)
from .report import VerdictReport

BITS = ("0", "1")
JOIN = "∘"


class Sender(str, enum.Enum):
    PUBLIC = "public"
    ALICE = "alice"
    BOB = "bob"

    @property
    def other(self) -> "Sender":
        if self is Sender.ALICE:
            return Sender.BOB
        if self is Sender.BOB:
            return Sender.ALICE
        raise ValueError("public round has no opposite sender")


class Kind(str, enum.Enum):
    STANDARD = "standard"
    GENERALIZED = "generalized"


def x_name(label: str) -> str:
    return "X" + label


def y_name(label: str) -> str:
    return "Y" + label


def m_name(i: int) -> str:
    return f"M{i}"


def compose(*parts: str) -> str:
    """Join symbols into one composite symbol."""
    return JOIN.join(parts)


def split_symbol(symbol: str) -> Tuple[str, ...]:
    return tuple(symbol.split(JOIN))


def bit_of(symbol: str) -> int:
    """The answer bit carried by a (possibly composite) output symbol.

    Composite symbols always keep the original message as their last part.
    """
    return int(symbol.rsplit(JOIN, 1)[-1])


def coordinate_labels(n: int) -> Tuple[str, ...]:
    """Binary labels of equal width for ``n`` coordinates (empty for n = 1)."""
    if n < 1:
        raise ValueError("need at least one coordinate")
    width = (n - 1).bit_length()
    return tuple(format(i, f"0{width}b") if width else "" for i in range(n))


@dataclass(frozen=True)
class RoundMeta:
    index: int
    sender: Sender
    alphabet: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sender", Sender(self.sender))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))

    def to_json(self) -> dict:
        return {"index": self.index, "sender": self.sender.value, "alphabet": list(self.alphabet)}


@dataclass(frozen=True)
class FunctionTable:
    """Truth table of f: X x Y -> {0,1}.

    ``arity`` is the number of coordinates; for arity > 1 the symbols are
    tuples of per-coordinate symbols (see :meth:`xor_power`).
    """

    x_alphabet: Tuple
    y_alphabet: Tuple
    values: Mapping
    arity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x_alphabet", tuple(self.x_alphabet))
        object.__setattr__(self, "y_alphabet", tuple(self.y_alphabet))
        vals = dict(self.values)
        for x in self.x_alphabet:
            for y in self.y_alphabet:
                if (x, y) not in vals:
                    raise MalformedTable(f"function table missing entry ({x!r}, {y!r})")
                if vals[(x, y)] not in (0, 1):
                    raise MalformedTable(f"function value at ({x!r}, {y!r}) is not a bit")
        object.__setattr__(self, "values", vals)

    def __call__(self, x, y) -> int:
        try:
            return self.values[(x, y)]
        except KeyError:
            raise AlphabetMismatch(f"({x!r}, {y!r}) outside the function's domain") from None

    @classmethod
    def from_callable(cls, x_alphabet, y_alphabet, fn) -> "FunctionTable":
        return cls(x_alphabet, y_alphabet, {(x, y): int(fn(x, y)) for x in x_alphabet for y in y_alphabet})

    def xor_power(self, n: int) -> "FunctionTable":
        """Table of the XOR of ``n`` independent evaluations, over n-tuples."""
        if self.arity != 1:
            raise ValueError("xor_power applies to single-coordinate tables")
        xs, ys = [()], [()]
        for _ in range(n):
            xs = [a + (s,) for a in xs for s in self.x_alphabet]
            ys = [a + (s,) for a in ys for s in self.y_alphabet]
        values = {}
        for x in xs:
            for y in ys:
                b = 0
                for xi, yi in zip(x, y):
                    b ^= self.values[(xi, yi)]
                values[(x, y)] = b
        return FunctionTable(tuple(xs), tuple(ys), values, arity=n)

    def to_json(self) -> dict:
        if self.arity != 1:
            raise ValueError("only single-coordinate tables serialize")
        return {
            "x_alphabet": list(self.x_alphabet),
            "y_alphabet": list(self.y_alphabet),
            "values": [[self.values[(x, y)] for y in self.y_alphabet] for x in self.x_alphabet],
        }

    @classmethod
    def from_json(cls, doc) -> "FunctionTable":
        try:
            xa = [str(s) for s in doc["x_alphabet"]]
            ya = [str(s) for s in doc["y_alphabet"]]
            rows = doc["values"]
            if len(rows) != len(xa) or any(len(r) != len(ya) for r in rows):
                raise MalformedTable("function table shape does not match its alphabets")
            values = {(x, y): int(rows[i][j]) for i, x in enumerate(xa) for j, y in enumerate(ya)}
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedTable):
                raise
            raise MalformedTable(f"malformed function table: {exc}") from exc
        return cls(xa, ya, values)


def and_function() -> FunctionTable:
    return FunctionTable.from_callable(BITS, BITS, lambda x, y: int(x == "1" and y == "1"))


def xor_function() -> FunctionTable:
    return FunctionTable.from_callable(BITS, BITS, lambda x, y: int(x != y))


@dataclass(frozen=True)
class SplitSpec:
    """Split a node's coordinates by the bit following ``prefix``."""

    prefix: str = ""

    def halves(self, coords: Sequence[str]) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
        if len(coords) % 2:
            raise OddCoordinateCount(f"{len(coords)} coordinates cannot be split in half")
        k = len(self.prefix)
        if any(not c.startswith(self.prefix) or len(c) <= k for c in coords):
            raise NonPowerOfTwo(f"coordinates {coords} are not all extensions of {self.prefix!r}")
        left = tuple(c for c in coords if c[k] == "0")
        right = tuple(c for c in coords if c[k] == "1")
        if len(left) != len(right):
            raise NonPowerOfTwo(f"coordinates {coords} do not split evenly after {self.prefix!r}")
        return left, right

    @classmethod
    def for_coords(cls, coords: Sequence[str]) -> "SplitSpec":
        """The split at the longest common prefix of the labels."""
        prefix = coords[0] if coords else ""
        for c in coords[1:]:
            while not c.startswith(prefix):
                prefix = prefix[:-1]
        if len(coords) > 1 and prefix in coords:
            prefix = prefix[:-1]
        return cls(prefix)


@dataclass(frozen=True)
class Protocol:
    """A joint table over (X vars, Y vars, M0..Mr) plus round metadata.

    The kind flag records what the protocol claims to be; use
    :func:`validate_standard` or :func:`require_standard` to check a claim.
    """

    joint: JointTable
    rounds: Tuple[RoundMeta, ...]
    kind: Kind = Kind.STANDARD
    output_round: Optional[int] = None
    coords: Tuple[str, ...] = ("",)

    def __post_init__(self):
        object.__setattr__(self, "rounds", tuple(self.rounds))
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.output_round is None:
            object.__setattr__(self, "output_round", len(self.rounds) - 1)
        if not self.rounds or self.rounds[0].sender is not Sender.PUBLIC:
            raise MalformedTable("round 0 must exist and be public")
        for i, r in enumerate(self.rounds):
            if r.index != i:
                raise MalformedTable(f"round {i} carries index {r.index}")
            if i and r.sender is Sender.PUBLIC:
                raise MalformedTable(f"round {i} must be sent by Alice or Bob")
        expected = self.x_names + self.y_names + self.m_names
        if self.joint.names != expected:
            raise MalformedTable(f"joint variables {self.joint.names} != expected {expected}")
        for r in self.rounds:
            if self.joint.alphabet(m_name(r.index)) != r.alphabet:
                raise AlphabetMismatch(f"round {r.index} alphabet disagrees with the joint")
        if not 0 <= self.output_round < len(self.rounds):
            raise MalformedTable(f"output round {self.output_round} out of range")
        if any(s.rsplit(JOIN, 1)[-1] not in BITS for s in self.rounds[self.output_round].alphabet):
            raise AlphabetMismatch("output round must carry a bit")

    @property
    def x_names(self) -> Tuple[str, ...]:
        return tuple(x_name(c) for c in self.coords)

    @property
    def y_names(self) -> Tuple[str, ...]:
        return tuple(y_name(c) for c in self.coords)

    @property
    def input_names(self) -> Tuple[str, ...]:
        return self.x_names + self.y_names

    @property
    def m_names(self) -> Tuple[str, ...]:
        return tuple(m_name(r.index) for r in self.rounds)

    @property
    def r(self) -> int:
        return len(self.rounds) - 1

    @property
    def coordinate_count(self) -> int:
        return len(self.coords)

    def inputs_of(self, sender: Sender) -> Tuple[str, ...]:
        return self.x_names if sender is Sender.ALICE else self.y_names

    def input_marginal(self) -> JointTable:
        return self.joint.marginal(self.input_names)

    def with_joint(self, joint: JointTable, kind: Optional[Kind] = None) -> "Protocol":
        return replace(self, joint=joint, kind=self.kind if kind is None else kind)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "coords": list(self.coords),
            "output_round": self.output_round,
            "rounds": [r.to_json() for r in self.rounds],
            "mu": self.input_marginal().to_json(),
            "joint": self.joint.to_json(),
        }


# -- standard specs and compilation ---------------------------------------

Kernel = Callable[[Tuple[str, ...], Tuple[str, ...]], Mapping[str, object]]


class TableKernel:
    """A kernel given by explicit rows keyed by (sender input, prefix).

    A row keyed with prefix ``None`` applies to every prefix not listed
    explicitly.
    """

    def __init__(self, rows: Mapping[Tuple[Tuple[str, ...], Optional[Tuple[str, ...]]], Mapping[str, object]]):
        self.rows = {
            (tuple(i), None if p is None else tuple(p)): {s: as_fraction(q) for s, q in d.items()}
            for (i, p), d in rows.items()
        }

    def __call__(self, inputs, prefix):
        row = self.rows.get((inputs, prefix))
        if row is None:
            row = self.rows.get((inputs, None))
        if row is None:
            raise MalformedKernel(f"no kernel row for input {inputs} and prefix {prefix}")
        return row


def deterministic(fn: Callable[[Tuple[str, ...], Tuple[str, ...]], str]) -> Kernel:
    """A kernel that sends ``fn(inputs, prefix)`` with probability 1."""
    return lambda inputs, prefix: {fn(inputs, prefix): Fraction(1)}


@dataclass(frozen=True)
class StandardSpec:
    """Input distribution, public randomness, and per-round sender kernels.

    ``rounds`` lists every round including round 0; ``kernels[i - 1]`` is the
    kernel of round i, called as ``kernel(sender_input, prefix)`` where
    ``sender_input`` is the tuple of the sender's coordinate symbols and
    ``prefix`` is ``(m0, ..., m_{i-1})``.
    """

    mu: JointTable
    public: Mapping[str, object]
    rounds: Sequence[RoundMeta]
    kernels: Sequence[Kernel]
    output_round: Optional[int] = None
    coords: Tuple[str, ...] = ("",)


def _check_row(row: Mapping[str, object], alphabet, where: str) -> Dict[str, Fraction]:
    clean = {}
    allowed = set(alphabet)
    for s, q in row.items():
        q = as_fraction(q)
        if s not in allowed:
            raise AlphabetMismatch(f"{where}: symbol {s!r} not in round alphabet")
        if q < 0:
            raise MalformedKernel(f"{where}: negative probability {q} for {s!r}")
        if q:
            clean[s] = q
    total = sum(row_q for row_q in clean.values())
    if total != 1:
        raise MalformedKernel(f"{where}: row sums to {total}, not 1")
    return clean


def compile_standard(spec: StandardSpec) -> Protocol:
    """Materialize pi(M0) mu(X,Y) prod_i kernel_i as an exact joint."""
    coords = tuple(spec.coords)
    xn = tuple(x_name(c) for c in coords)
    yn = tuple(y_name(c) for c in coords)
    rounds = tuple(spec.rounds)
    if len(spec.kernels) != len(rounds) - 1:
        raise MalformedKernel(f"{len(rounds) - 1} message rounds but {len(spec.kernels)} kernels")
    for r in rounds[1:]:
        expected = Sender.ALICE if r.index % 2 else Sender.BOB
        if r.sender is not expected:
            raise MalformedKernel(f"round {r.index} should be sent by {expected.value}")
    mu = spec.mu.marginal(xn + yn) if set(spec.mu.names) == set(xn + yn) else None
    if mu is None:
        raise AlphabetMismatch(f"input distribution over {spec.mu.names}, expected {xn + yn}")
    public = _check_row(spec.public, rounds[0].alphabet, "public randomness")
    k = len(coords)
    frontier: Dict[Tuple[str, ...], Fraction] = {}
    for xy, w in mu.items():
        for m0, q in public.items():
            frontier[xy + (m0,)] = w * q
    for r, kernel in zip(rounds[1:], spec.kernels):
        rows: Dict[Tuple, Dict[str, Fraction]] = {}
        nxt: Dict[Tuple[str, ...], Fraction] = defaultdict(Fraction)
        alice = r.sender is Sender.ALICE
        for key, w in frontier.items():
            inputs = key[:k] if alice else key[k : 2 * k]
            prefix = key[2 * k :]
            ctx = (inputs, prefix)
            row = rows.get(ctx)
            if row is None:
                row = _check_row(kernel(inputs, prefix), r.alphabet, f"round {r.index}, context {ctx}")
                rows[ctx] = row
            for s, q in row.items():
                nxt[key + (s,)] += w * q
        frontier = dict(nxt)
    variables = list(mu.variables) + [(m_name(r.index), r.alphabet) for r in rounds]
    joint = JointTable._trusted([n for n, _ in variables], [a for _, a in variables], frontier)
    return Protocol(joint, rounds, Kind.STANDARD, spec.output_round, coords)


def validate_standard(p: Protocol) -> VerdictReport:
    """Check that each round is independent of the non-sender's input given
    the sender's input and the earlier rounds (and M0 of both inputs)."""
    rep = VerdictReport("standard-protocol structure")
    v, w = ci_violation(p.joint, (m_name(0),), p.input_names, ())
    rep.eq("round 0: M0 independent of inputs", v, Fraction(0), detail=_witness(w))
    for r in p.rounds[1:]:
        own = p.inputs_of(r.sender)
        other = p.inputs_of(r.sender.other)
        prefix = p.m_names[: r.index]
        v, w = ci_violation(p.joint, (m_name(r.index),), other, own + prefix)
        rep.eq(
            f"round {r.index}: M{r.index} independent of {r.sender.other.value}'s input",
            v,
            Fraction(0),
            detail=_witness(w),
        )
    return rep


def _witness(w) -> str:
    return "" if w is None else f"witness {w}"


def require_standard(p: Protocol) -> Protocol:
    """Raise :class:`NotStandard` unless ``p`` is flagged and verified standard."""
    if p.kind is not Kind.STANDARD:
        raise NotStandard("protocol is flagged generalized")
    rep = validate_standard(p)
    if not rep.passed:
        bad = rep.failures()[0]
        raise NotStandard(f"protocol flagged standard fails {bad.name} ({bad.detail})")
    return p


def kernels_of(p: Protocol) -> List[Dict[Tuple, Dict[str, Fraction]]]:
    """Read back the sender-side kernels pi(M^i | sender input, M^{<i}).

    Entry ``i - 1`` maps ``(sender input, prefix)`` to the row of round i.
    """
    k = p.coordinate_count
    out = []
    for r in p.rounds[1:]:
        own = p.inputs_of(r.sender)
        names = own + p.m_names[: r.index + 1]
        num = p.joint.marginal_masses(names)
        den = p.joint.marginal_masses(names[:-1])
        rows: Dict[Tuple, Dict[str, Fraction]] = defaultdict(dict)
        for key, q in num.items():
            ctx = key[:-1]
            rows[(ctx[:k], ctx[k:])][key[-1]] = q / den[ctx]
        out.append(dict(rows))
    return out


def spec_of(p: Protocol) -> StandardSpec:
    """A StandardSpec reproducing ``p`` from its own kernels and input marginal."""
    tables = kernels_of(p)
    public = {k[0]: q for k, q in p.joint.marginal_masses((m_name(0),)).items()}
    return StandardSpec(
        p.input_marginal(),
        public,
        p.rounds,
        [TableKernel(t) for t in tables],
        p.output_round,
        p.coords,
    )


# -- measures on protocols ------------------------------------------------

def information_cost_terms(p: Protocol) -> Tuple[float, float]:
    """(I(M+ : X | Y M0), I(M+ : Y | X M0)) in bits."""
    m0 = (m_name(0),)
    mplus = p.m_names[1:]
    if not mplus:
        return 0.0, 0.0
    a = mutual_information(p.joint, mplus, p.x_names, p.y_names + m0)
    b = mutual_information(p.joint, mplus, p.y_names, p.x_names + m0)
    return a, b


def information_cost(p: Protocol) -> float:
    a, b = information_cost_terms(p)
    return a + b


def function_bit(p: Protocol, f: FunctionTable) -> BitVar:
    """f (XORed over coordinates) as a BitVar on p's inputs."""
    xs, ys = p.x_names, p.y_names
    if f.arity == 1:
        for n in xs:
            if not set(p.joint.alphabet(n)) <= set(f.x_alphabet):
                raise AlphabetMismatch(f"alphabet of {n} not covered by the function")
        for n in ys:
            if not set(p.joint.alphabet(n)) <= set(f.y_alphabet):
                raise AlphabetMismatch(f"alphabet of {n} not covered by the function")
        return BitVar.of_function(f, xs, ys)
    if f.arity != len(xs):
        raise AlphabetMismatch(f"function on {f.arity} coordinates, protocol on {len(xs)}")
    n = len(xs)
    return BitVar(xs + ys, lambda *v: f(tuple(v[:n]), tuple(v[n:])))


def output_bit(p: Protocol) -> BitVar:
    return BitVar((m_name(p.output_round),), bit_of)


@dataclass(frozen=True)
class OutputStats:
    """Exact error and advantage of the output bit against f."""

    error_prob: Fraction
    advantage_exact: Fraction

    @property
    def advantage(self) -> float:
        return float(self.advantage_exact)

    @property
    def disadvantage_exact(self) -> Fraction:
        return 1 - self.advantage_exact

    @property
    def disadvantage(self) -> float:
        return float(self.disadvantage_exact)


def output_stats(p: Protocol, f: FunctionTable) -> OutputStats:
    fb = function_bit(p, f)
    wrong = fb ^ output_bit(p)
    ev = wrong.evaluator(p.joint)
    err = sum((q for key, q in p.joint.items() if ev(key)), Fraction(0))
    return OutputStats(err, abs(1 - 2 * err))


def error_under(p: Protocol, f: FunctionTable) -> Fraction:
    return output_stats(p, f).error_prob


def condition_protocol(p: Protocol, e: Event) -> Protocol:
    return p.with_joint(p.joint.condition(e), Kind.GENERALIZED)


def append_message(
    p: Protocol,
    sender: Sender,
    kernel: Callable[..., Mapping[str, object]],
    alphabet: Sequence[str] = BITS,
    reads: Optional[Sequence[str]] = None,
) -> Protocol:
    """Append a final round sent by ``sender``.

    ``kernel`` is called with the values of ``reads`` (default: every variable
    of ``p``) and returns the distribution of the new message. The protocol
    keeps its kind only when the kernel reads nothing beyond the sender's
    input and the transcript.
    """
    sender = Sender(sender)
    alphabet = tuple(alphabet)
    reads = tuple(p.joint.names if reads is None else reads)
    get = p.joint.getter(reads)
    idx = p.r + 1
    rows: Dict[Tuple, Dict[str, Fraction]] = {}
    masses: Dict[Tuple[str, ...], Fraction] = {}
    for key, w in p.joint.items():
        ctx = get(key)
        row = rows.get(ctx)
        if row is None:
            row = _check_row(kernel(*ctx), alphabet, f"appended round, context {ctx}")
            rows[ctx] = row
        for s, q in row.items():
            masses[key + (s,)] = w * q
    meta = RoundMeta(idx, sender, alphabet)
    joint = JointTable._trusted(
        p.joint.names + (m_name(idx),), p.joint.alphabets + (alphabet,), masses
    )
    allowed = set(p.inputs_of(sender)) | set(p.m_names)
    kind = p.kind if set(reads) <= allowed else Kind.GENERALIZED
    out_round = idx if all(s.rsplit(JOIN, 1)[-1] in BITS for s in alphabet) else p.output_round
    return Protocol(joint, p.rounds + (meta,), kind, out_round, p.coords)


# -- rectangle properties -------------------------------------------------

def _input_masses(p: Protocol, mu: JointTable) -> Dict[Tuple[str, ...], Fraction]:
    names = p.input_names
    if set(mu.names) != set(names):
        raise AlphabetMismatch(f"input distribution over {mu.names}, protocol inputs {names}")
    return mu.marginal_masses(names)


def rectangle_check(p: Protocol, mu: JointTable) -> VerdictReport:
    """Test whether pi = mu(X,Y) g1(X,M) g2(Y,M) for some g1, g2.

    For each transcript m, h(x,y) = pi(x,y,m)/mu(x,y) must vanish exactly
    outside X+ x Y+ (rows and columns where h is somewhere positive) and be
    rank one on each connected piece of its positive support.
    """
    rep = VerdictReport("rectangle property")
    mum = _input_masses(p, mu)
    k = p.coordinate_count
    by_m: Dict[Tuple, Dict[Tuple, Fraction]] = defaultdict(dict)
    for key, q in p.joint.items():
        xy = key[: 2 * k]
        w = mum.get(xy)
        if not w:
            raise NonAbsolutelyContinuous(f"protocol puts mass on inputs {xy} outside the support of mu")
        by_m[key[2 * k :]][xy] = q / w
    # supp(mu) as adjacency lists
    mu_rows: Dict[Tuple, List[Tuple]] = defaultdict(list)
    for xy in mum:
        mu_rows[xy[:k]].append(xy[k:])
    worst = Fraction(0)
    failing = 0
    witness = None
    for m, h in by_m.items():
        viol, wit = _rank_one_violation(h, mu_rows, k)
        if viol:
            failing += 1
            if viol > worst:
                worst, witness = viol, (m, wit)
    rep.eq(
        "rectangle factorization",
        worst,
        Fraction(0),
        detail=f"{failing} of {len(by_m)} transcripts fail" + (f"; witness {witness}" if witness else ""),
    )
    return rep


def _rank_one_violation(h: Mapping[Tuple, Fraction], mu_rows, k) -> Tuple[Fraction, Optional[Tuple]]:
    xs = {xy[:k] for xy in h}
    ys = {xy[k:] for xy in h}
    top = max(h.values())
    # zeros of h inside X+ x Y+ on supp(mu) rule out any factorization
    for x in xs:
        for y in mu_rows[x]:
            if y in ys and (x + y) not in h:
                return top, x + y
    adj: Dict[Tuple, List[Tuple]] = defaultdict(list)
    for xy in h:
        adj[("x", xy[:k])].append(("y", xy[k:]))
        adj[("y", xy[k:])].append(("x", xy[:k]))
    g: Dict[Tuple, Fraction] = {}
    worst, witness = Fraction(0), None
    for start in adj:
        if start in g:
            continue
        g[start] = Fraction(1)
        stack = [start]
        while stack:
            node = stack.pop()
            for nb in adj[node]:
                xy = node[1] + nb[1] if node[0] == "x" else nb[1] + node[1]
                if nb not in g:
                    g[nb] = h[xy] / g[node]
                    stack.append(nb)
                else:
                    d = abs(h[xy] - g[node] * g[nb])
                    if d > worst:
                        worst, witness = d, xy
    return worst, witness


def partial_rectangle_check(
    p: Protocol, mu: Optional[JointTable] = None, split: Optional[SplitSpec] = None
) -> VerdictReport:
    """Check X_right independent of Y_left given (X_left, Y_right, M) exactly.

    ``mu`` is accepted for symmetry with :func:`rectangle_check`; only its
    support is consulted, to confirm absolute continuity.
    """
    split = split or SplitSpec.for_coords(p.coords)
    left, right = split.halves(p.coords)
    if mu is not None:
        mum = _input_masses(p, mu)
        for xy in p.joint.marginal_masses(p.input_names):
            if xy not in mum:
                raise NonAbsolutelyContinuous(f"protocol inputs {xy} outside the support of mu")
    x0 = tuple(x_name(c) for c in left)
    x1 = tuple(x_name(c) for c in right)
    y0 = tuple(y_name(c) for c in left)
    y1 = tuple(y_name(c) for c in right)
    v, w = ci_violation(p.joint, x1, y0, x0 + y1 + p.m_names)
    rep = VerdictReport("partial rectangle property")
    rep.eq("X_right independent of Y_left given X_left, Y_right, M", v, Fraction(0), detail=_witness(w))
    return rep


# -- files ----------------------------------------------------------------

def load_protocol(doc) -> Protocol:
    """Build a protocol from its JSON document (``kernels`` or ``joint`` form)."""
    try:
        rounds = tuple(
            RoundMeta(int(r["index"]), Sender(r["sender"]), [str(s) for s in r["alphabet"]])
            for r in doc["rounds"]
        )
        coords = tuple(doc.get("coords", [""]))
        output_round = doc.get("output_round")
        if "joint" in doc:
            joint = JointTable.from_json(doc["joint"])
            kind = Kind(doc.get("kind", "generalized"))
            p = Protocol(joint, rounds, kind, output_round, coords)
            if "mu" in doc:
                mu = JointTable.from_json(doc["mu"])
                if set(mu.names) != set(p.input_names):
                    raise AlphabetMismatch(f"mu over {mu.names}, protocol inputs {p.input_names}")
            if kind is Kind.STANDARD:
                require_standard(p)
            return p
        mu = JointTable.from_json(doc["mu"])
        public = {str(s): as_fraction(str(q)) for s, q in doc.get("public", {rounds[0].alphabet[0]: "1"}).items()}
        kernels = []
        for entry in doc["kernels"]:
            rows = {}
            for row in entry["rows"]:
                prefix = row.get("prefix")
                rows[(tuple(row["input"]), None if prefix is None else tuple(prefix))] = {
                    str(s): as_fraction(str(q)) for s, q in row["dist"].items()
                }
            kernels.append(TableKernel(rows))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (MalformedTable, MalformedKernel, AlphabetMismatch, NotStandard)):
            raise
        raise MalformedTable(f"malformed protocol document: {exc}") from exc
    return compile_standard(StandardSpec(mu, public, rounds, kernels, output_round, coords))


def loads_protocol(text: str) -> Protocol:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedTable(f"invalid JSON: {exc}") from exc
    return load_protocol(doc)


def dumps_protocol(p: Protocol) -> str:
    return json.dumps(p.to_json(), indent=2)
