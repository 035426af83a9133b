"""Built-in protocols and seeded generators used by the test suites and the
``verify`` command.

All randomness comes from numpy's PCG64 seeded with a 64-bit integer;
``DEFAULT_SEED`` is the documented default.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .core_info import Event, JointTable
from .protocol import (
    BITS,
    FunctionTable,
    Protocol,
    RoundMeta,
    Sender,
    StandardSpec,
    and_function,
    compile_standard,
    condition_protocol,
    deterministic,
    x_name,
    y_name,
)
from .constructions import naive_xor

DEFAULT_SEED = 0x9E3779B97F4A7C15

__all__ = [
    "DEFAULT_SEED",
    "rng_for",
    "uniform_mu",
    "product_mu",
    "p1",
    "noisy_protocol",
    "constant_protocol",
    "coin_protocol",
    "coin_matches_bob",
    "noisy_xor_protocol",
    "exact_xor_protocol",
    "random_table",
    "random_mu",
    "random_standard_protocol",
    "random_event",
    "random_conditioned_protocol",
]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def uniform_mu(alphabet: Sequence[str] = BITS) -> JointTable:
    return JointTable.uniform([("X", alphabet), ("Y", alphabet)])


def product_mu(mu: JointTable, coords: Sequence[str]) -> JointTable:
    """mu on each coordinate independently, over variables X<c>..., Y<c>...."""
    base = mu.reorder(("X", "Y"))
    out = None
    for c in coords:
        part = base.rename({"X": x_name(c), "Y": y_name(c)})
        out = part if out is None else out.product(part)
    names = tuple(x_name(c) for c in coords) + tuple(y_name(c) for c in coords)
    return out.reorder(names)


def _two_round(mu: JointTable, second, public=None) -> Protocol:
    rounds = [
        RoundMeta(0, Sender.PUBLIC, ("0",)),
        RoundMeta(1, Sender.ALICE, mu.alphabet("X")),
        RoundMeta(2, Sender.BOB, BITS),
    ]
    send_x = deterministic(lambda inputs, prefix: inputs[0])
    return compile_standard(StandardSpec(mu, public or {"0": 1}, rounds, [send_x, second]))


def p1(mu: Optional[JointTable] = None) -> Protocol:
    """Alice announces X, Bob answers AND(X, Y)."""
    f = and_function()
    mu = mu or uniform_mu()
    answer = deterministic(lambda inputs, prefix: str(f(prefix[1], inputs[0])))
    return _two_round(mu, answer)


def noisy_protocol(
    f: Optional[FunctionTable] = None, rate=Fraction(1, 20), mu: Optional[JointTable] = None
) -> Protocol:
    """Alice announces X; Bob answers f(X, Y), flipped with probability ``rate``."""
    f = f or and_function()
    mu = mu or uniform_mu(f.x_alphabet)
    rate = Fraction(rate)

    def answer(inputs, prefix):
        b = f(prefix[1], inputs[0])
        return {str(b): 1 - rate, str(1 - b): rate}

    return _two_round(mu, answer)


def constant_protocol(symbol: str = "0", mu: Optional[JointTable] = None) -> Protocol:
    """Alice announces a fixed bit regardless of her input."""
    mu = mu or uniform_mu()
    rounds = [RoundMeta(0, Sender.PUBLIC, ("0",)), RoundMeta(1, Sender.ALICE, BITS)]
    return compile_standard(StandardSpec(mu, {"0": 1}, rounds, [deterministic(lambda i, p: symbol)]))


def coin_protocol(mu: Optional[JointTable] = None) -> Protocol:
    """Alice sends a fair coin that ignores her input."""
    mu = mu or uniform_mu()
    rounds = [RoundMeta(0, Sender.PUBLIC, ("0",)), RoundMeta(1, Sender.ALICE, BITS)]
    coin = lambda inputs, prefix: {"0": Fraction(1, 2), "1": Fraction(1, 2)}
    return compile_standard(StandardSpec(mu, {"0": 1}, rounds, [coin]))


def coin_matches_bob() -> Protocol:
    """The coin protocol conditioned on the coin equalling Bob's input; its
    only message then depends on Bob's input."""
    p = coin_protocol()
    return condition_protocol(p, Event.where(p.joint, ("Y", "M1"), lambda y, m: y == m))


def noisy_xor_protocol(n: int, rate=Fraction(1, 20), f: Optional[FunctionTable] = None) -> Protocol:
    return naive_xor(noisy_protocol(f, rate), n)


def exact_xor_protocol(n: int, f: Optional[FunctionTable] = None) -> Protocol:
    return naive_xor(noisy_protocol(f, 0), n)


# -- seeded generators ----------------------------------------------------

def _weights(rng: np.random.Generator, size: int, zero_prob: float = 0.25, high: int = 6):
    w = rng.integers(1, high + 1, size=size)
    w[rng.random(size) < zero_prob] = 0
    if not w.any():
        w[rng.integers(0, size)] = 1
    return [int(v) for v in w]


def random_table(
    rng: np.random.Generator, sizes: Sequence[int], names: Optional[Sequence[str]] = None, zero_prob: float = 0.25
) -> JointTable:
    """A table with small-integer weights (some zero) over the given alphabet sizes."""
    names = names or [f"V{i}" for i in range(len(sizes))]
    variables = [(n, tuple(str(s) for s in range(k))) for n, k in zip(names, sizes)]
    keys = [()]
    for _, a in variables:
        keys = [k + (s,) for k in keys for s in a]
    w = _weights(rng, len(keys), zero_prob)
    return JointTable.from_weights(variables, dict(zip(keys, w)))


def random_mu(rng: np.random.Generator, x_size: int = 2, y_size: int = 2, full_support: bool = False) -> JointTable:
    t = random_table(rng, (x_size, y_size), ("X", "Y"), 0.0 if full_support else 0.2)
    return t


def _random_row(rng, alphabet, zero_prob=0.3):
    w = _weights(rng, len(alphabet), zero_prob, high=4)
    total = sum(w)
    return {s: Fraction(v, total) for s, v in zip(alphabet, w) if v}


def random_standard_protocol(
    rng: np.random.Generator,
    mu: Optional[JointTable] = None,
    coords: Tuple[str, ...] = ("",),
    rounds: int = 2,
    msg_size: int = 2,
    public_size: int = 1,
) -> Protocol:
    """A standard protocol with random rational kernels; the last round is a bit."""
    if mu is None:
        mu = random_mu(rng)
    if set(mu.names) == {"X", "Y"} and coords != ("",):
        mu = product_mu(mu, coords)
    metas = [RoundMeta(0, Sender.PUBLIC, tuple(str(i) for i in range(public_size)))]
    for i in range(1, rounds + 1):
        size = 2 if i == rounds else msg_size
        metas.append(RoundMeta(i, Sender.ALICE if i % 2 else Sender.BOB, tuple(str(s) for s in range(size))))
    cache = {}

    def kernel_for(meta):
        def kernel(inputs, prefix):
            key = (meta.index, inputs, prefix)
            if key not in cache:
                cache[key] = _random_row(rng, meta.alphabet)
            return cache[key]

        return kernel

    public = _random_row(rng, metas[0].alphabet, 0.0)
    spec = StandardSpec(mu, public, metas, [kernel_for(m) for m in metas[1:]], coords=coords)
    return compile_standard(spec)


def random_event(
    rng: np.random.Generator, table: JointTable, names: Sequence[str], keep: float = 0.6
) -> Event:
    """A random non-empty set of supported assignments of ``names``."""
    seen = sorted(table.marginal_masses(tuple(names)))
    mask = rng.random(len(seen)) < keep
    if not mask.any():
        mask[rng.integers(0, len(seen))] = True
    return Event.of(names, [k for k, m in zip(seen, mask) if m])


def random_conditioned_protocol(
    rng: np.random.Generator, names: Optional[Sequence[str]] = None, **kwargs
) -> Tuple[Protocol, JointTable]:
    """A random standard protocol conditioned on a random event; returns the
    generalized protocol and the original input distribution."""
    p = random_standard_protocol(rng, **kwargs)
    mu = p.input_marginal()
    if names is None:
        pool = list(p.joint.names)
        k = int(rng.integers(1, min(3, len(pool)) + 1))
        names = [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))]
    e = random_event(rng, p.joint, names)
    return condition_protocol(p, e), mu
