"""Command-line entry point: ``rmflab <subcommand> [options]``.

Output is CSV (canonical) or JSON, an array of row objects with the same
fields. Exit codes: 0 ok, 1 invariant failure, 2 invalid input, 3 budget
exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bounds, model, moments, sieve, squaresets, verify
from .errors import InternalConsistencyError, InvalidArgument, RMFError
from .model import ModelSpec
from .parallel import default_threads

MODELS = (model.RADEMACHER, model.SYMMETRIC_FINITE, model.MOBIUS)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgument(f"{self.prog}: {message}")


# -- argument helpers ----------------------------------------------------------------


def _argtype(fn):
    # argparse only shows the message of ArgumentTypeError
    def wrapped(text):
        try:
            return fn(text)
        except InvalidArgument as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    wrapped.__name__ = fn.__name__
    return wrapped


def int_list(text: str) -> list[int]:
    """'10,100,1e3' -> [10, 100, 1000]; 'a:b' expands to the doubling grid a, 2a, ... <= b."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = (_int(x) for x in part.split(":", 1))
            if lo < 1 or hi < lo:
                raise InvalidArgument(f"bad range {part!r}")
            v = lo
            while v <= hi:
                out.append(v)
                v *= 2
        elif part:
            out.append(_int(part))
    if not out:
        raise InvalidArgument(f"empty list {text!r}")
    return out


def n_list(text: str) -> list[int]:
    out = int_list(text)
    if min(out) < 1:
        raise InvalidArgument(f"n must be >= 1, got {min(out)}")
    return out


def n_value(text: str) -> int:
    return n_list(text)[0] if "," not in text else _fail(f"expected a single n, got {text!r}")


def _fail(msg):
    raise InvalidArgument(msg)


def float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InvalidArgument(f"not a list of numbers: {text!r}") from None


def _int(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        raise InvalidArgument(f"not an integer: {text!r}") from None
    if not v.is_integer():
        raise InvalidArgument(f"not an integer: {text!r}")
    return int(v)


def _cell(v):
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        return int(v)
    return v


def write_rows(rows: list[dict], fmt: str, dest) -> None:
    rows = [{k: _cell(v) for k, v in r.items()} for r in rows]
    if fmt == "json":
        dest.write(json.dumps(rows, indent=1) + "\n")
        return
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    w = csv.DictWriter(dest, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def _tables(n: int, args) -> sieve.SieveTables:
    return sieve.load_or_build(max(int(n), 2), getattr(args, "sieve_cache", None))


def _spec(args) -> ModelSpec:
    if args.model_file:
        spec, seed = model.load_model_config(args.model_file)
        if seed is not None and args.seed_given is False:
            args.seed = seed
        return spec
    if args.model == model.SYMMETRIC_FINITE:
        if not args.support:
            raise InvalidArgument("--model symmetric-finite needs --support v:q,...")
        return ModelSpec.symmetric_finite(model.parse_support(args.support))
    if args.support:
        raise InvalidArgument("--support only applies to --model symmetric-finite")
    return ModelSpec.mobius_deterministic() if args.model == model.MOBIUS else ModelSpec.rademacher()


# -- subcommands -----------------------------------------------------------------------


def cmd_sieve(args) -> list[dict]:
    grid = args.n
    t = _tables(max(grid), args)
    rows = []
    for n in grid:
        q = sieve.squarefree_count(t, n)
        row = {
            "n": n,
            "squarefree_count": q,
            "density": q / n,
            "six_over_pi2": 6 / math.pi**2,
            "prime_count": t.prime_count(n),
            "tail_prime_count": sieve.tail_prime_count(t, n),
            "pnt_tail_estimate": sieve.pnt_tail_estimate(n) if n > 1 else 0.0,
            "method": "exact",
        }
        if args.psi_y:
            row["y"] = args.psi_y
            row["psi"] = sieve.smooth_count(t, n, args.psi_y)
        rows.append(row)
    return rows


def cmd_simulate(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(max(args.n), args)
    S = model.simulate_partial_sums(spec, t, args.n, args.paths, args.seed, args.threads)
    method = "exact" if not spec.is_random else "realization"
    return [
        {"path": p, "n": n, "value": S[p, g], "method": method, "model": spec.family, "seed": args.seed}
        for p in range(args.paths)
        for g, n in enumerate(args.n)
    ]


def cmd_decompose(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(args.n, args)
    if spec.is_random:
        path = model.sample_path(spec, t, args.seed, args.path, args.n)
    else:
        path = model.fixed_path(t, -1.0, args.n)
    head, parts = model.martingale_decomposition(path, t, args.n)
    inside, _ = model.delta_split(t, args.n, args.reading)
    other = "log-of-cube" if args.reading == "cube-of-log" else "cube-of-log"
    alt, _ = model.delta_split(t, args.n, other)
    if alt != inside:
        print(f"note: Delta_n under the {other} reading is {alt} (using {args.reading}: {inside})", file=sys.stderr)
    inside = set(inside)
    rows = [{"block": "theta1", "value": head, "in_delta": "", "sup_norm": 1 if spec.is_random else ""}]
    for p, v in parts.items():
        row = {"block": p, "value": v, "in_delta": int(p in inside)}
        if args.sup_norms:
            row["sup_norm"] = model.sup_norm_Mp(spec, t, args.n, p, args.budget)
        rows.append(row)
    total = model.partial_sums(path, t, [args.n])[0]
    if head + sum(parts.values()) != total:
        raise InternalConsistencyError("decomposition does not sum to S_n")
    rows.append({"block": "S_n", "value": total, "in_delta": "", "sup_norm": ""})
    for r in rows:
        r.update(n=args.n, seed=args.seed, path=args.path, model=spec.family)
    return rows


def cmd_badsets(args) -> list[dict]:
    t = _tables(max(args.n), args)
    rows = []
    for n in args.n:
        if args.method == "cross-check":
            m = squaresets.build_exponent_matrix(t, n)
            dists = [
                squaresets.badset_counts_kernel(m, threads=args.threads),
                squaresets.badset_counts_macwilliams(m, threads=args.threads),
            ]
            if m.s <= 20:
                dists.append(squaresets.brute_force_badsets(t, n))
            agree = all(d.same_counts(dists[0]) for d in dists)
            for d in dists:
                rows.extend(_badset_rows(d, agree=int(agree), even_only=args.even_only))
            if not agree:
                raise InternalConsistencyError(f"bad-set counts disagree at n={n}")
        else:
            rows.extend(_badset_rows(squaresets.badset_counts(t, n, args.method, args.threads), even_only=args.even_only))
    return rows


def _badset_rows(d, agree=None, even_only=False):
    out = []
    for w, c in d.counts.items():
        if even_only and w % 2:
            continue
        row = {"n": d.n, "2k": w, "B": c, "method": d.method, "rank": d.rank, "nullity": d.nullity}
        if agree is not None:
            row["agree"] = agree
        out.append(row)
    return out


def _report_rows(reports) -> list[dict]:
    return [r.row() for r in reports]


def _exact_ok(t, n, budget):
    return t.prime_count(n // 2) <= budget


def cmd_moments(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(max(args.n), args)
    rows = []
    exact = args.method == "exact" or (args.method == "auto" and spec.family == model.RADEMACHER and all(_exact_ok(t, n, args.budget) for n in args.n))
    if exact:
        for n in args.n:
            for r in args.r:
                if spec.family == model.MOBIUS:
                    v = Fraction(int(model.partial_sums(model.fixed_path(t, -1.0, n), t, [n])[0]) ** (2 * r))
                else:
                    v = moments.exact_moment_enumeration(t, n, r, spec, args.budget)
                rows.append(moments.MomentReport(n, f"2r={2 * r}", v, 0, moments.ENUMERATION).row())
    else:
        rows = _report_rows(moments.mc_moments(spec, t, args.n, args.r, args.paths, args.seed, args.threads))
    return rows


def cmd_tails(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(args.n, args)
    if args.method == "exact":
        moments._require_rademacher(spec)
        d = moments.exact_distribution(t, args.n, args.budget)
        return [moments.MomentReport(args.n, f"t0={t0:g}", d.prob_at_least(t0), 0, moments.ENUMERATION).row() for t0 in args.t0]
    return _report_rows(moments.mc_tail(spec, t, args.n, args.t0, args.paths, args.seed, args.threads))


def _a_rule(text: str):
    if text in moments.A_RULES:
        return text
    return moments.formula_normalizer(text)


def cmd_charfn(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(max(args.n), args)
    rule = _a_rule(args.a_rule)
    if args.method == "exact":
        moments._require_rademacher(spec)
        a = moments.normalizer(rule)
        rows = []
        for n in args.n:
            an = a(n)
            if not an > 0:
                raise InvalidArgument(f"a_n evaluates to {an} at n={n}")
            c, s = moments.exact_charfn(t, n, args.t / an, args.budget)
            rows.append(moments.MomentReport(n, f"t={args.t:g};a_n={an:.6g}", c, 0, moments.ENUMERATION).row() | {"sin": s})
        return rows
    return _report_rows(moments.mc_charfn_decay(spec, t, args.n, args.t, rule, args.paths, args.seed, args.threads))


def cmd_growth(args) -> list[dict]:
    spec = _spec(args)
    t = _tables(args.n_max, args)
    rep = moments.path_growth_report(spec, t, args.n_max, args.eps, args.paths, args.seed, args.quantiles, args.threads)
    rows = [
        {"n_max": rep.n_max, "eps": rep.eps, "quantity": f"q{q:g}", "value": v, "method": moments.MONTE_CARLO, "paths": rep.paths, "seed": rep.seed}
        for q, v in rep.quantiles.items()
    ]
    rows += [
        {"n_max": rep.n_max, "eps": rep.eps, "quantity": f"argmax_n={n}", "value": c, "method": moments.MONTE_CARLO, "paths": rep.paths, "seed": rep.seed}
        for n, c in rep.argmax_counts.items()
    ]
    return rows


BOUNDS = (
    "m_n", "variance", "momthm2", "momthm2-proof", "momthm", "concent", "concent-v", "momcor",
    "harper", "hypercontractive", "ass", "integral", "l3", "g-sign", "ck-argmax", "azuma",
)


def _params(args) -> bounds.BoundParams:
    over = {}
    for item in args.param or []:
        if "=" not in item:
            raise InvalidArgument(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            over[k.strip()] = float(v)
        except ValueError:
            raise InvalidArgument(f"--param {k}: not a number: {v!r}") from None
    try:
        return bounds.BoundParams(**over)
    except TypeError as e:
        raise InvalidArgument(f"unknown bound parameter: {e}") from None


def cmd_bounds(args) -> list[dict]:
    p = _params(args)
    which = args.which
    rows = []
    grid = args.grid or []
    need_t = max([*grid, 2, 100 if which == "hypercontractive" else 2])
    t = _tables(need_t, args) if which in ("momthm2", "momthm2-proof", "momcor", "harper", "hypercontractive", "ass", "l3", "variance", "azuma", "momthm") else None

    def emit(inputs: str, value, comparison=None, flags=""):
        row = {"bound": which, "inputs": inputs, "value": value, "comparison": "" if comparison is None else comparison}
        row["ratio"] = "" if comparison is None else bounds.ratio(float(value), comparison)
        row["flags"] = flags
        rows.append(row)

    if which in ("integral",):
        for beta in args.beta or [2, 10, 100, 1e4, 1e6]:
            I, r = bounds.integral_I(beta)
            emit(f"beta={beta:g}", I, None, f"I/ln(beta)={r!r}")
        return rows
    if which == "g-sign":
        for n in grid:
            rep = bounds.g_sign_changes(n)
            emit(f"n={n}", rep.sign_changes, None, f"root={rep.root!r}")
        return rows
    if which == "ck-argmax":
        for n in grid:
            rep = bounds.ck_profile_argmax(n)
            emit(f"n={n}", rep.argmax, rep.claimed, f"stationary={rep.stationary!r}")
        return rows
    if not grid:
        raise InvalidArgument(f"--which {which} needs --grid")
    spec = ModelSpec.rademacher()
    for n in grid:
        if which == "m_n":
            emit(f"M={args.M:g},n={n}", bounds.m_n(args.M, n, p))
        elif which == "variance":
            lo, hi = bounds.variance_sandwich(args.a, args.b, n, p)
            q = sieve.squarefree_count(t, n)
            emit(f"a={args.a:g},b={args.b:g},n={n},side=lower", lo, q, "" if lo <= q else "violated")
            emit(f"a={args.a:g},b={args.b:g},n={n},side=upper", hi, q, "" if q <= hi else "violated")
        elif which in ("momthm2", "momthm2-proof"):
            fn = bounds.momthm2_bound if which == "momthm2" else bounds.momthm2_bound_proof_variant
            for k in args.k:
                cmp_ = moments.exact_moment_enumeration(t, n, k) if _exact_ok(t, n, 25) else None
                emit(f"n={n},k={k},M={args.M:g}", fn(p, n, k, args.M), cmp_)
        elif which == "momthm":
            for q in args.q:
                cmp_ = math.sqrt(sieve.squarefree_count(t, n)) if q == 2 else None
                emit(f"n={n},q={q:g},M={args.M:g}", bounds.momthm_bound(p, n, q, args.M), cmp_)
        elif which in ("concent", "concent-v"):
            fn = bounds.concent_bound if which == "concent" else bounds.concent_bound_v
            for t0 in args.t0 or [0.0]:
                u, b = fn(p, n, t0, args.M)
                emit(f"n={n},t0={t0:g},M={args.M:g}", b, None, f"u_n={u!r}")
        elif which == "momcor":
            d = squaresets.badset_counts(t, n, threads=args.threads)
            for k in args.k:
                emit(f"n={n},k={k}", bounds.momcor_bound(p, n, k), d.B(k))
        elif which == "harper":
            d = squaresets.badset_counts(t, n, threads=args.threads)
            for k in args.k:
                f = bounds.harper_badset_bound(p, n, k)
                emit(f"n={n},k={k}", f.value, d.B(k), _flag(f))
        elif which == "hypercontractive":
            for q in args.q:
                emit(f"n={n},q={q:g}", bounds.hypercontractive_bound(t, n, q), bounds.momthm_bound(p, n, 2 * q, args.M), "comparison=momthm(2q)")
        elif which == "ass":
            d = squaresets.badset_counts(t, n, threads=args.threads)
            a_n = moments.normalizer(_a_rule(args.a_rule))(n)
            for tv in args.t or [0.5]:
                emit(f"n={n},t={tv:g},a_n={a_n:.6g}", bounds.assumption_ass_sum(d, n, tv, a_n, args.M, p))
        elif which == "l3":
            for q in t.primes_upto(n):
                f = bounds.l3_supnorm_bound(n, int(q), args.M, p)
                sup = model.sup_norm_Mp(spec, t, n, int(q), args.budget)
                emit(f"n={n},p={int(q)}", f.value, sup, _flag(f))
        elif which == "azuma":
            split = bounds.azuma_split(spec, t, n)
            for lam in args.lam or [0.1, 0.5, 1.0, 2.0]:
                exact = moments.exact_mgf(t, n, lam)
                emit(f"n={n},lambda={lam:g},V={split.variance_proxy:g}", bounds.azuma_mgf_bound(split, lam), exact,
                     "" if exact <= bounds.azuma_mgf_bound(split, lam) else "violated")
                emit(f"n={n},lambda={lam:g},V={split.variance_proxy:g},shifted", bounds.azuma_mgf_bound_shifted(split, lam), exact,
                     "" if exact <= bounds.azuma_mgf_bound_shifted(split, lam) else "violated")
    return rows


def _flag(f: bounds.Flagged) -> str:
    if f.in_hypothesis:
        return f.note
    return "out-of-hypothesis" + (f"; {f.note}" if f.note else "")


def cmd_dickman(args) -> list[dict]:
    rows = []
    t = _tables(args.x, args) if args.x else None
    for u in args.u:
        row = {"u": u, "rho": sieve.dickman_rho(u, args.step), "step": args.step, "method": "quadrature"}
        if t is not None and u >= 1:
            y = max(2, math.ceil(args.x ** (1 / u)))
            psi = sieve.smooth_count(t, args.x, y)
            u_eff = math.log(args.x) / math.log(y)
            row |= {"x": args.x, "y": y, "u_eff": u_eff, "psi": psi, "psi_ratio": psi / (args.x * sieve.dickman_rho(u_eff, args.step))}
        rows.append(row)
    return rows


def cmd_verify(args) -> list[dict]:
    results = verify.run_suite(args.level, args.seed, args.threads)
    args.failed = not all(r.passed for r in results)
    return [r.row() for r in results]


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file of option defaults")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $RMFLAB_THREADS or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--seed", type=_argtype(_int), default=0)
    common.add_argument("--sieve-cache", help="binary sieve table cache file")

    def mod(paths=1000, budget=moments.ENUM_BUDGET):
        # parent parsers share their actions, so each subcommand gets its own copy
        m = _Parser(add_help=False)
        m.add_argument("--model", choices=MODELS, default=model.RADEMACHER)
        m.add_argument("--support", help="symmetric finite support as v:q,... (e.g. --support=-2:1/2,2:1/2)")
        m.add_argument("--model-file", help="model config file (family, support, seed, override.<p>)")
        m.add_argument("--paths", type=_argtype(_int), default=paths)
        m.add_argument("--budget", type=int, default=budget, help="log2 enumeration budget")
        return m

    parser = _Parser(prog="rmflab", description="Random multiplicative function experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sieve", parents=[common], help="squarefree counts, prime counts, psi(x,y)")
    p.add_argument("--n", type=_argtype(n_list), required=True)
    p.add_argument("--psi-y", type=_argtype(_int))
    p.set_defaults(func=cmd_sieve)

    p = sub.add_parser("simulate", parents=[common, mod(paths=1)], help="partial sums S_n along sample paths")
    p.add_argument("--n", type=_argtype(n_list), required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", parents=[common, mod(budget=20)], help="split S_n by largest prime factor")
    p.add_argument("--n", type=_argtype(n_value), required=True)
    p.add_argument("--path", type=_argtype(_int), default=0)
    p.add_argument("--reading", choices=("cube-of-log", "log-of-cube"), default="cube-of-log")
    p.add_argument("--sup-norms", action="store_true", help="add exact sup norms of each M_p(n)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("badsets", parents=[common], help="weight distribution of square-product subsets")
    p.add_argument("--n", type=_argtype(n_list), required=True)
    p.add_argument("--method", choices=("auto", "kernel", "macwilliams", "brute", "cross-check"), default="auto")
    p.add_argument("--even-only", action="store_true")
    p.set_defaults(func=cmd_badsets)

    p = sub.add_parser("moments", parents=[common, mod()], help="E[S_n^(2r)]")
    p.add_argument("--n", type=_argtype(n_list), required=True)
    p.add_argument("--r", type=_argtype(int_list), default=[1, 2])
    p.add_argument("--method", choices=("auto", "exact", "monte-carlo"), default="auto")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("tails", parents=[common, mod()], help="P(S_n >= t0)")
    p.add_argument("--n", type=_argtype(n_value), required=True)
    p.add_argument("--t0", type=_argtype(float_list), required=True)
    p.add_argument("--method", choices=("exact", "monte-carlo"), default="monte-carlo")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("charfn", parents=[common, mod()], help="E[cos(t S_n / a_n)]")
    p.add_argument("--n", type=_argtype(n_list), required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--a-rule", default="sqrt-n-over-log-n", help=f"one of {', '.join(moments.A_RULES)} or a formula in n")
    p.add_argument("--method", choices=("exact", "monte-carlo"), default="monte-carlo")
    p.set_defaults(func=cmd_charfn)

    p = sub.add_parser("growth", parents=[common, mod()], help="quantiles of sup_n n^(-1/2-eps) |S_n|")
    p.add_argument("--n-max", type=_argtype(n_value), required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--quantiles", type=_argtype(float_list), default=[0.5, 0.9, 0.99])
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("bounds", parents=[common], help="evaluate a closed-form bound on a grid")
    p.add_argument("--which", choices=BOUNDS, required=True)
    p.add_argument("--grid", type=_argtype(n_list))
    p.add_argument("--param", action="append", help="override a constant, e.g. --param C1=10")
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--k", type=_argtype(int_list), default=[2])
    p.add_argument("--q", type=_argtype(float_list), default=[2.0])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--t0", type=_argtype(float_list))
    p.add_argument("--t", type=_argtype(float_list))
    p.add_argument("--lam", type=_argtype(float_list))
    p.add_argument("--beta", type=_argtype(float_list))
    p.add_argument("--a-rule", default="sqrt-n")
    p.add_argument("--budget", type=int, default=20)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("dickman", parents=[common], help="Dickman rho and psi(x,y) ratios")
    p.add_argument("--u", type=_argtype(float_list), required=True)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--x", type=_argtype(_int))
    p.set_defaults(func=cmd_dickman)

    p = sub.add_parser("verify", parents=[common], help="cross-module invariant suite")
    p.add_argument("--level", choices=verify.LEVELS, default="quick")
    p.set_defaults(func=cmd_verify)
    return parser


def _config_argv(argv: list[str]) -> list[str]:
    """Splice ``--config`` file entries in front of the explicit options so the command line wins."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    try:
        conf = model.parse_key_values(Path(known.config).read_text())
    except OSError as e:
        raise InvalidArgument(f"cannot read config {known.config}: {e.strerror}") from None
    if not rest:
        raise InvalidArgument("missing subcommand")
    extra = []
    for k, v in conf.items():
        flag = "--" + k.replace("_", "-")
        if v.lower() in ("true", "yes") and k.replace("_", "-") in ("sup-norms", "even-only"):
            extra.append(flag)
        else:
            extra += [flag, v]
    return [rest[0], *extra, *rest[1:]]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _config_argv(argv)
        args = build_parser().parse_args(argv)
        args.seed_given = "--seed" in argv
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise InvalidArgument("--threads must be >= 1")
        if hasattr(args, "paths") and args.paths < 1:
            raise InvalidArgument("--paths must be >= 1")
        args.failed = False
        rows = args.func(args)
        buf = io.StringIO()
        write_rows(rows, args.format, buf)
        if args.output:
            Path(args.output).write_text(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return 1 if args.failed else 0
    except RMFError as e:
        print(f"rmflab: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
