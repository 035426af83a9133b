"""Command-line entry point: ``commlab <command> [options]``.

Exit codes: 0 success, 1 failed invariant or check, 2 input error,
3 degenerate mathematical condition.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from . import fixtures as fx
from .constructions import (
    boost_majority,
    coupled_draw,
    coupled_mismatch_exact,
    embed_single,
    majority_error,
    naive_xor,
)
from .core_info import JointTable, as_fraction, format_fraction
from .costs import gamma_cost, point_costs, point_costs_csv, theta_cost
from .decompose import (
    DEFAULT_MAX_ENTRIES,
    audit_tree,
    finalize_leaf,
    node_mu,
    recursive_decompose,
    select_good_leaf,
    tree_csv,
)
from .errors import CommLabError, InputError, MalformedTable, NonPowerOfTwo, OutOfRange
from .protocol import (
    FunctionTable,
    Protocol,
    and_function,
    dumps_protocol,
    information_cost,
    loads_protocol,
    output_stats,
    xor_function,
)
from .report import VerdictReport
from .suites import NEGATIVE_CONTROLS, run_all

__all__ = ["ExperimentConfig", "build_parser", "main"]

BUILDERS = ("p1", "noisy", "exact")
FUNCTIONS = {"and": and_function, "xor": xor_function}


@dataclass(frozen=True)
class ExperimentConfig:
    function: FunctionTable
    mu: Optional[JointTable]
    protocol: Optional[Protocol]
    n: int
    alpha: Optional[Fraction]
    tol: float
    seed: int
    out: Optional[Path]
    max_entries: int

    def __post_init__(self):
        if not self.tol > 0:
            raise OutOfRange(f"tolerance must be positive, got {self.tol}")
        if self.n < 1:
            raise OutOfRange(f"n must be positive, got {self.n}")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _load_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise MalformedTable(f"{path}: invalid JSON: {exc}") from exc


def _function(spec: str) -> FunctionTable:
    if spec in FUNCTIONS:
        return FUNCTIONS[spec]()
    return FunctionTable.from_json(_load_json(spec))


def _build(builder: str, n: int, rate: Fraction, f: FunctionTable, mu: Optional[JointTable]) -> Protocol:
    if builder == "p1":
        base = fx.p1(mu)
    else:
        base = fx.noisy_protocol(f, rate if builder == "noisy" else Fraction(0), mu)
    return base if n == 1 else naive_xor(base, n)


def config_from_args(args) -> ExperimentConfig:
    f = _function(getattr(args, "function", "and") or "and")
    mu = JointTable.loads(_read(args.mu)) if getattr(args, "mu", None) else None
    n = getattr(args, "n", None) or 1
    protocol = None
    if getattr(args, "protocol", None):
        protocol = loads_protocol(_read(args.protocol))
    elif getattr(args, "builder", None):
        if mu is not None and set(mu.names) != {"X", "Y"}:
            raise InputError("builders take a single-coordinate mu over X, Y")
        protocol = _build(args.builder, n, as_fraction(args.rate), f, mu)
    alpha = as_fraction(args.alpha) if getattr(args, "alpha", None) else None
    return ExperimentConfig(
        function=f,
        mu=mu,
        protocol=protocol,
        n=n,
        alpha=alpha,
        tol=args.tol,
        seed=args.seed,
        out=Path(args.out) if args.out else None,
        max_entries=args.max_entries,
    )


def _input_mu(cfg: ExperimentConfig, p: Protocol) -> JointTable:
    """mu over p's inputs: the given table (one coordinate is lifted to a
    product), or p's own input marginal."""
    if cfg.mu is None:
        return p.input_marginal()
    if set(cfg.mu.names) == {"X", "Y"} and p.coords != ("",):
        return node_mu(cfg.mu, p.coords)
    return cfg.mu


def _write(cfg: ExperimentConfig, name: str, text: str) -> None:
    if cfg.out is None:
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / name).write_text(text, encoding="utf-8")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _fraction_doc(q: Fraction) -> dict:
    return {"value": float(q), "exact": format_fraction(q)}


def _require_protocol(cfg: ExperimentConfig) -> Protocol:
    if cfg.protocol is None:
        raise InputError("give --protocol FILE or --builder NAME")
    return cfg.protocol


def _print_report(rep: VerdictReport, out=None) -> None:
    out = out or sys.stdout
    for line in rep.lines():
        print(line, file=out)
    failed = rep.failures()
    print(f"{len(rep.checks) - len(failed)}/{len(rep.checks)} checks passed", file=out)


# -- commands -------------------------------------------------------------

def cmd_ic(cfg: ExperimentConfig) -> int:
    p = _require_protocol(cfg)
    mu = _input_mu(cfg, p)
    st = output_stats(p, cfg.function)
    ic = information_cost(p)
    th = theta_cost(p, mu, tol=cfg.tol)
    ga = gamma_cost(p, mu)
    doc = {
        "information_cost": ic,
        "error": _fraction_doc(st.error_prob),
        "advantage": _fraction_doc(st.advantage_exact),
        "theta": th.total,
        "gamma": ga.total,
        "gamma_alice": ga.alice,
        "gamma_bob": ga.bob,
        "kind": p.kind.value,
        "coordinates": p.coordinate_count,
    }
    print(f"information cost: {ic!r}")
    print(f"error: {format_fraction(st.error_prob)} ({float(st.error_prob)!r})")
    print(f"advantage: {format_fraction(st.advantage_exact)}")
    print(f"theta: {th.total!r}")
    print(f"gamma: {ga.total!r} (alice {ga.alice!r}, bob {ga.bob!r})")
    _write(cfg, "ic.json", _dumps(doc))
    _write(cfg, "point_costs.csv", point_costs_csv(p, point_costs(p, mu)))
    return 0


def cmd_decompose(cfg: ExperimentConfig) -> int:
    p = _require_protocol(cfg)
    n = p.coordinate_count
    if n & (n - 1):
        raise NonPowerOfTwo(f"{n} coordinates is not a power of two")
    mu = cfg.mu if cfg.mu is not None else _single_mu(p)
    tree = recursive_decompose(p, cfg.function, mu, cfg.alpha, cfg.max_entries, cfg.tol)
    rep = audit_tree(tree, cfg.tol)
    S = select_good_leaf(tree)
    leaf = finalize_leaf(tree, S, tree.mu, cfg.function, cfg.tol)
    rep.extend(leaf.audit, f"leaf_{S}.")
    _print_report(rep)
    print(f"alpha: {format_fraction(tree.alpha)}")
    print(f"selected leaf: {S}")
    print(f"leaf error: {format_fraction(leaf.error)}")
    print(f"leaf information cost: {leaf.ic!r}")
    _write(cfg, "tree.csv", tree_csv(tree))
    doc = rep.to_json()
    doc.update(
        alpha=_fraction_doc(tree.alpha),
        epsilon=_fraction_doc(tree.eps),
        tau=tree.tau,
        selected_leaf=S,
        leaf_error=_fraction_doc(leaf.error),
        leaf_information_cost=leaf.ic,
    )
    _write(cfg, "audit.json", _dumps(doc))
    _write(cfg, "leaf_protocol.json", dumps_protocol(leaf.eta) + "\n")
    return 0 if rep.passed else 1


def _single_mu(p: Protocol) -> JointTable:
    c = p.coords[0]
    x, y = ("X", "Y") if c == "" else (f"X{c}", f"Y{c}")
    return p.input_marginal().marginal((x, y)).rename({x: "X", y: "Y"})


def cmd_verify(cfg: ExperimentConfig, inject: Sequence[str] = (), quick: bool = False) -> int:
    rep = run_all(cfg.seed, inject, full=not quick)
    _print_report(rep)
    _write(cfg, "verify.json", rep.dumps() + "\n")
    failed = rep.failures()
    for c in failed:
        print(f"FAILED {c.name}: {c.detail}", file=sys.stderr)
    return 0 if not failed else 1


def cmd_embed(cfg: ExperimentConfig) -> int:
    p = _require_protocol(cfg)
    f = cfg.function
    emb = embed_single(p, f)
    n = p.coordinate_count
    ic_p = information_cost(p)
    ic_eta = information_cost(emb.eta)
    rep = VerdictReport("embedding")
    rep.eq("embedding.error_preserved", output_stats(emb.eta, f).error_prob, output_stats(p, f).error_prob)
    rep.le("embedding.ic_sum_le_ic_plus_2n", sum(emb.per_j), ic_p + 2 * n, cfg.tol)
    rep.eq("embedding.ic_is_average", ic_eta, sum(emb.per_j) / n, cfg.tol)
    rep.le("embedding.ic_le_ic_over_n_plus_2", ic_eta, ic_p / n + 2, cfg.tol)
    _print_report(rep)
    for j, v in enumerate(emb.per_j):
        print(f"IC(pi_{j}): {v!r}")
    print(f"IC(eta): {ic_eta!r}; IC(p)/n: {ic_p / n!r}; measured constant: {ic_eta - ic_p / n!r}")
    doc = rep.to_json()
    doc.update(per_j=list(emb.per_j), ic_eta=ic_eta, ic_p=ic_p, measured_constant=ic_eta - ic_p / n)
    _write(cfg, "embed.json", _dumps(doc))
    _write(cfg, "eta.json", dumps_protocol(emb.eta) + "\n")
    return 0 if rep.passed else 1


def cmd_naive(cfg: ExperimentConfig) -> int:
    base = _require_protocol(cfg)
    if base.coordinate_count != 1:
        raise InputError("naive takes a single-coordinate protocol")
    q = naive_xor(base, cfg.n) if cfg.n > 1 else base
    st_base = output_stats(base, cfg.function)
    st = output_stats(q, cfg.function)
    ic = information_cost(q)
    rep = VerdictReport("naive")
    rep.eq("naive.advantage_multiplies", st.advantage_exact, st_base.advantage_exact ** cfg.n)
    rep.le("naive.ic_additive", ic, cfg.n * information_cost(base) + 1, cfg.tol)
    _print_report(rep)
    print(f"advantage: {format_fraction(st.advantage_exact)}")
    print(f"information cost: {ic!r}")
    doc = rep.to_json()
    doc.update(advantage=_fraction_doc(st.advantage_exact), information_cost=ic, n=cfg.n)
    _write(cfg, "naive.json", _dumps(doc))
    _write(cfg, "protocol.json", dumps_protocol(q) + "\n")
    return 0 if rep.passed else 1


def cmd_boost(cfg: ExperimentConfig, T: int) -> int:
    p = _require_protocol(cfg)
    b = boost_majority(p, T)
    err = output_stats(p, cfg.function).error_prob
    err_b = output_stats(b, cfg.function).error_prob
    rep = VerdictReport("boost")
    rep.eq("boost.error_closed_form", err_b, majority_error(err, T))
    rep.le("boost.ic_le_T_ic", information_cost(b), T * information_cost(p), cfg.tol)
    _print_report(rep)
    print(f"boosted error: {format_fraction(err_b)} ({float(err_b)!r})")
    doc = rep.to_json()
    doc.update(T=T, error=_fraction_doc(err_b), information_cost=information_cost(b))
    _write(cfg, "boost.json", _dumps(doc))
    return 0 if rep.passed else 1


def cmd_couple(cfg: ExperimentConfig, nu_path: Optional[str], bern, draws: int) -> int:
    if bern:
        p, q = (as_fraction(v) for v in bern)
        for v in (p, q):
            if not 0 <= v <= 1:
                raise OutOfRange(f"Bernoulli parameter {v} outside [0, 1]")
        mu = JointTable.from_weights([("A", ("0", "1"))], {("0",): 1 - p, ("1",): p})
        nu = JointTable.from_weights([("A", ("0", "1"))], {("0",): 1 - q, ("1",): q})
    else:
        if cfg.mu is None or not nu_path:
            raise InputError("give --mu and --nu table files, or --bern P Q")
        mu, nu = cfg.mu, JointTable.loads(_read(nu_path))
    exact = coupled_mismatch_exact(mu, nu)
    res = coupled_draw(mu, nu, cfg.seed, draws)
    print(f"exact mismatch: {format_fraction(exact.exact_mismatch)}")
    print(f"tv distance: {format_fraction(exact.tv)}")
    print(f"empirical mismatch: {res.empirical_mismatch!r} over {draws} draws (seed {cfg.seed})")
    print(f"empirical atom mismatch: {res.empirical_atom_mismatch!r}")
    doc = {
        "exact_mismatch": _fraction_doc(exact.exact_mismatch),
        "tv": _fraction_doc(exact.tv),
        "draws": draws,
        "seed": cfg.seed,
        "empirical_mismatch": res.empirical_mismatch,
        "empirical_atom_mismatch": res.empirical_atom_mismatch,
        "marginal_a": {"∘".join(k): v for k, v in sorted(res.marginal_a.items())},
        "marginal_b": {"∘".join(k): v for k, v in sorted(res.marginal_b.items())},
    }
    _write(cfg, "coupling.json", _dumps(doc))
    if cfg.out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "a", "a_prime"])
        for i, (a, b) in enumerate(res.samples):
            w.writerow([i, "∘".join(a), "∘".join(b)])
        _write(cfg, "samples.csv", buf.getvalue())
    return 0


# -- parser ---------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-9, help="float tolerance (default 1e-9)")
    p.add_argument("--seed", type=_seed, default=fx.DEFAULT_SEED, help="64-bit seed")
    p.add_argument("--out", help="directory for reports")
    p.add_argument("--max-entries", type=int, default=DEFAULT_MAX_ENTRIES, help="joint support budget")


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--protocol", help="protocol JSON file")
    g.add_argument("--builder", choices=BUILDERS, help="built-in protocol")
    p.add_argument("--rate", default="1/20", help="per-coordinate noise rate of the noisy builder")
    p.add_argument("--n", type=int, default=1, help="number of coordinates for builders")
    p.add_argument("--function", default="and", help="'and', 'xor' or a function table JSON file")
    p.add_argument("--mu", help="input distribution JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ic", help="information cost, error, theta and gamma of a protocol")
    _add_source(p)
    _add_common(p)

    p = sub.add_parser("decompose", help="recursive decomposition with the full audit")
    _add_source(p)
    p.add_argument("--alpha", help="conditioning threshold as a rational (default 1 - 2 eps)")
    _add_common(p)

    p = sub.add_parser("verify", help="run every property suite")
    p.add_argument("--inject", action="append", default=[], choices=sorted(NEGATIVE_CONTROLS),
                   help="treat a corrupted fixture as genuine (repeatable)")
    p.add_argument("--quick", action="store_true", help="skip the four-coordinate recursion")
    _add_common(p)

    p = sub.add_parser("embed", help="embed one input into a random coordinate")
    _add_source(p)
    _add_common(p)

    p = sub.add_parser("naive", help="naive XOR protocol from a single-coordinate protocol")
    _add_source(p)
    _add_common(p)

    p = sub.add_parser("boost", help="majority of T independent runs")
    _add_source(p)
    p.add_argument("--T", type=int, default=3, help="odd number of copies")
    _add_common(p)

    p = sub.add_parser("couple", help="correlated sampling of two distributions")
    p.add_argument("--mu", help="first table JSON file")
    p.add_argument("--nu", help="second table JSON file")
    p.add_argument("--bern", nargs=2, metavar=("P", "Q"), help="compare Bernoulli(P) with Bernoulli(Q)")
    p.add_argument("--draws", type=int, default=100_000)
    _add_common(p)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "naive":
            n, args.n = args.n, 1
            cfg = config_from_args(args)
            cfg = replace(cfg, n=n)
        else:
            cfg = config_from_args(args)
        if args.command == "ic":
            return cmd_ic(cfg)
        if args.command == "decompose":
            return cmd_decompose(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.inject, args.quick)
        if args.command == "embed":
            return cmd_embed(cfg)
        if args.command == "naive":
            return cmd_naive(cfg)
        if args.command == "boost":
            return cmd_boost(cfg, args.T)
        return cmd_couple(cfg, args.nu, args.bern, args.draws)
    except CommLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
