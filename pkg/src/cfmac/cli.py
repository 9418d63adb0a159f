"""Command-line front end emitting CSV tables and JSON documents."""

from __future__ import annotations

import argparse
import ast
import io
import json
import math
import operator
import sys

import numpy as np

from . import __version__
from . import comp_rate, dirty_mac, k_user, two_user
from .channel import ChannelConfig

CSV_VERSION = "cfmac-csv/1"
JSON_VERSION = "cfmac-json/1"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class Infeasible(Exception):
    """Raised after output was prepared but the computation has no admissible result."""

    def __init__(self, msg, text=""):
        super().__init__(msg)
        self.text = text


# ---------------------------------------------------------------------------
# expression parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": math.sqrt, "log2": math.log2, "exp": math.exp}
_CONSTS = {"pi": math.pi, "e": math.e}


def parse_expr(text: str) -> float:
    """Evaluate a numeric expression such as ``1+sqrt(2)`` or ``4/3``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ValueError(f"unsupported element in {text!r}")

    try:
        return float(ev(tree))
    except (ArithmeticError, ValueError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from exc


def _split_top(text: str, sep: str) -> list:
    """Split on ``sep`` outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_vector(text: str, field: str, length: int | None = None) -> np.ndarray:
    try:
        vals = np.array([parse_expr(p) for p in _split_top(text, ",")])
    except ValueError as exc:
        raise UsageError(f"--{field}: {exc}") from exc
    if length is not None and vals.size != length:
        raise UsageError(f"--{field}: expected {length} values, got {vals.size}")
    return vals


def parse_scalar(text: str, field: str) -> float:
    try:
        return parse_expr(text)
    except ValueError as exc:
        raise UsageError(f"--{field}: {exc}") from exc


def parse_int_vector(text: str, field: str, length: int | None = None) -> np.ndarray:
    v = parse_vector(text, field, length)
    if np.any(v != np.round(v)):
        raise UsageError(f"--{field}: entries must be integers")
    return np.round(v).astype(int)


def parse_matrix(text: str, field: str) -> np.ndarray:
    rows = [parse_int_vector(r, field) for r in text.split(";")]
    if len({r.size for r in rows}) != 1:
        raise UsageError(f"--{field}: rows have different lengths")
    return np.vstack(rows)


def parse_range(text: str, field: str) -> np.ndarray:
    """``lo:step:hi`` (inclusive), ``lo..hi`` for integers, or a comma list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            return np.arange(int(lo), int(hi) + 1)
        except ValueError as exc:
            raise UsageError(f"--{field}: bad integer range {text!r}") from exc
    parts = _split_top(text, ":")
    if len(parts) == 3:
        try:
            lo, step, hi = (parse_expr(p) for p in parts)
        except ValueError as exc:
            raise UsageError(f"--{field}: {exc}") from exc
        if not step > 0 or hi < lo:
            raise UsageError(f"--{field}: need step > 0 and hi >= lo")
        n = int(math.floor((hi - lo) / step + 1e-9))
        return lo + step * np.arange(n + 1)
    return parse_vector(text, field)


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _num(x):
    """JSON-safe number rounded to 12 significant digits; non-finite become None."""
    x = float(x)
    return float(fmt(x)) if math.isfinite(x) else None


def manifest(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output") and not k.startswith("_")}
    return {"subcommand": args.command, "version": __version__, "params": params, "seeds": getattr(args, "_seeds", [])}


def csv_text(args, header, rows, notes=()) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION} {json.dumps(manifest(args), sort_keys=True)}\n")
    for n in notes:
        buf.write(f"# {n}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else str(v) for v in r) + "\n")
    return buf.getvalue()


def json_text(args, doc) -> str:
    doc = {"schema": JSON_VERSION, "manifest": manifest(args), **doc}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _cfg(h, P):
    try:
        return ChannelConfig(h, P)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_compute_rate(args) -> str:
    h = parse_vector(args.h, "h")
    a = parse_int_vector(args.a, "a", h.size)
    beta = parse_vector(args.beta, "beta", h.size) if args.beta else np.ones(h.size)
    cfg = _cfg(h, parse_scalar(args.p, "p"))
    try:
        rt = comp_rate.computation_rate_tuple(cfg, a, beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    raw = comp_rate.raw_computation_rates(cfg, a, beta)
    al = comp_rate.optimal_alpha(cfg, a, beta)
    doc = {
        "rates": [_num(r) for r in rt.rates],
        "binding": rt.binding,
        "alpha_star": _num(al),
        "noise_power": _num(comp_rate.equivalent_noise_power(cfg, a, beta, al)),
        "clamped": [bool(a[k] != 0 and raw[k] < 0) for k in range(h.size)],
    }
    return json_text(args, doc)


def _choice(a, b, field):
    try:
        return two_user.TwoSumChoice(tuple(a), tuple(b))
    except ValueError as exc:
        raise UsageError(f"--{field}: {exc}") from exc


def cmd_two_user(args) -> str:
    h1, h2, P = parse_scalar(args.h1, "h1"), parse_scalar(args.h2, "h2"), parse_scalar(args.p, "p")
    cfg = _cfg([h1, h2], P)
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    label = two_user.classify(cfg)
    header = ["beta2", "R1", "R2", "binding1", "binding2", "case"]
    rows = []
    if args.a or args.b:
        if not (args.a and args.b):
            raise UsageError("--a and --b must be given together")
        choice = _choice(parse_int_vector(args.a, "a", 2), parse_int_vector(args.b, "b", 2), "b")
        lo, hi = parse_vector(args.beta2_range, "beta2-range", 2)
        for b2 in np.linspace(lo, hi, args.samples):
            if b2 == 0:
                continue
            rt = two_user.message_rates_two_sums(cfg, choice, (1.0, b2))
            if rt.feasible:
                rows.append((b2, rt.rates[0], rt.rates[1], rt.binding[0], rt.binding[1], label.case))
        return csv_text(args, header, rows, notes=[f"case={label.case} A={fmt(label.A_value)} choice={choice}"])
    if label.case == two_user.SINGLE_USER:
        raise UsageError("a channel gain is zero; nothing to sweep")
    curve = two_user.dominant_face_sweep(cfg, args.samples)
    note = f"case={label.case} A={fmt(label.A_value)}"
    if curve.empty:
        raise Infeasible("no dominant-face point is reachable (case I)", csv_text(args, header, [], notes=[note]))
    wanted = {"A1": [two_user.A1], "A2": [two_user.A2], "both": [two_user.A1, two_user.A2]}[args.choice]
    for choice in wanted:
        seg = curve.meta["segments"][str(choice)]
        tag = "A1" if choice == two_user.A1 else "A2"
        for b2 in seg["beta2"]:
            rt = two_user.message_rates_two_sums(cfg, choice, (1.0, b2))
            rows.append((b2, rt.rates[0], rt.rates[1], f"{tag}:{rt.binding[0]}", f"{tag}:{rt.binding[1]}", label.case))
    rows.sort(key=lambda r: (r[0], r[3]))
    return csv_text(args, header, rows, notes=[note])


def cmd_k_user(args) -> str:
    P = parse_scalar(args.p, "p")
    if args.family:
        h = parse_vector(args.h, "h", 3) if args.h else np.ones(3)
        cfg = _cfg(h, P)
        grid = parse_range(args.grid, "grid")
        curve = k_user.three_user_family_sweep(cfg, grid, include_alt=args.alt)
        rows = [(p[0], p[1], p[2], int(s)) for p, s in zip(curve.points, curve.meta["source"])]
        notes = [f"matrix{i}={json.dumps(m)}" for i, m in enumerate(curve.meta["matrices"])]
        return csv_text(args, ["R1", "R2", "R3", "matrix"], rows, notes=notes)
    if not args.h or not args.A:
        raise UsageError("--h and --A are required unless --family is given")
    h = parse_vector(args.h, "h")
    cfg = _cfg(h, P)
    Aint = parse_matrix(args.A, "A")
    if Aint.shape != (h.size, h.size):
        raise UsageError(f"--A: expected a {h.size}x{h.size} matrix")
    beta = parse_vector(args.beta, "beta", h.size) if args.beta else np.ones(h.size)
    try:
        A = k_user.CoefficientMatrix(Aint)
    except ValueError as exc:
        raise Infeasible(str(exc)) from exc
    rt = k_user.message_rates_k(cfg, A, beta)
    diag = k_user.prediction_factor(cfg, A, beta).diag
    resid = k_user.sum_rate_identity_check(cfg, A, beta)
    if args.check_identity:
        print(f"sum-rate identity residual={resid:.3e}", file=sys.stderr)
    doc = {
        "rates": [_num(r) for r in rt.rates],
        "binding": rt.binding,
        "L_diag": [_num(d) for d in diag],
        "det": int(A.det),
        "residual": _num(resid),
    }
    return json_text(args, doc)


def _k_values(text):
    ks = parse_range(text, "k").astype(int)
    if np.any(ks < 2) or np.any(ks > 8):
        raise UsageError("--k values must lie in 2..8")
    return ks


def cmd_sym_capacity(args) -> str:
    ks = _k_values(args.k)
    P = parse_scalar(args.p, "p")
    if not P > 0:
        raise UsageError("--p must be positive")
    width = int(ks.max())
    header = ["K", "P"] + [f"beta{i}" for i in range(1, width + 1)] + ["feasible", "rate"]
    rows = []
    args._seeds = [args.seed]
    for K in ks:
        res = k_user.sym_equalize_betas(int(K), P, seed=args.seed)
        betas = [fmt(b) for b in res.beta] if res.found else ["" for _ in range(K)]
        betas += [""] * (width - K)
        rows.append([int(K), P] + betas + [res.status, res.rate if res.found else ""])
    return csv_text(args, header, rows)


def cmd_p_star(args) -> str:
    ks = _k_values(args.k)
    if args.tol < 1e-3:
        raise UsageError("--tol must be at least 1e-3")
    out = []
    for K in ks:
        try:
            lo, hi = k_user.p_star(int(K), tol=args.tol, ceiling=args.ceiling)
        except RuntimeError as exc:
            raise Infeasible(str(exc)) from exc
        out.append({"K": int(K), "lo": _num(lo), "hi": _num(hi)})
    return json_text(args, {"tol": args.tol, "intervals": out})


def _dirty_cfg(args):
    P = parse_vector(args.p, "p")
    if P.size == 1:
        P = np.repeat(P, 2)
    Q = parse_vector(args.q, "q") if getattr(args, "q", None) else np.zeros(2)
    if Q.size == 1:
        Q = np.repeat(Q, 2)
    try:
        return dirty_mac.DirtyConfig(P, Q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_dirty_region(args) -> str:
    dcfg = _dirty_cfg(args)
    if args.max_coeff < 1:
        raise UsageError("--max-coeff must be at least 1")
    curve = dirty_mac.dirty_region_sweep(dcfg, max_coeff=args.max_coeff, budget=args.budget, n_dirs=args.directions)
    return csv_text(args, ["R1", "R2"], curve.points.tolist())


def cmd_dirty_symmetric(args) -> str:
    P = parse_scalar(args.p, "p")
    if not P > 0:
        raise UsageError("--p must be positive")
    alphas = parse_range(args.alpha, "alpha")
    if np.any(alphas < 0):
        raise UsageError("--alpha values must be nonnegative")
    res = dirty_mac.symmetric_rate_curves(P, alphas, max_coeff=args.max_coeff, budget=args.budget)
    rows = [(r["alpha"], r["two_sum"], r["single_sum"], r["upper"], f"{r['a']}|{r['b']}".replace(" ", "")) for r in res]
    return csv_text(args, ["alpha", "two_sum", "single_sum", "upper", "coefficients"], rows)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfmac", description="Compute-and-forward rates for Gaussian multiple-access channels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-o", "--output", help="write to a file instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("compute-rate", help="computation rates of one integer sum")
    s.add_argument("--h", required=True, help="channel gains, comma separated")
    s.add_argument("--p", required=True, help="power")
    s.add_argument("--a", required=True, help="integer coefficients")
    s.add_argument("--beta", help="scaling factors (default all 1)")
    s.set_defaults(func=cmd_compute_rate)

    s = sub.add_parser("two-user", help="two-sum sweeps for the 2-user MAC")
    s.add_argument("--h1", required=True)
    s.add_argument("--h2", required=True)
    s.add_argument("--p", required=True)
    s.add_argument("--a", help="first sum (with --b: sweep a given pair)")
    s.add_argument("--b", help="second sum")
    s.add_argument("--beta2-range", default="0.05,4", help="lo,hi for --a/--b sweeps")
    s.add_argument("--choice", choices=["A1", "A2", "both"], default="both")
    s.add_argument("--samples", type=int, default=two_user.DEFAULT_SAMPLES)
    s.set_defaults(func=cmd_two_user)

    s = sub.add_parser("k-user", help="K-user rates for a coefficient matrix")
    s.add_argument("--h", help="channel gains")
    s.add_argument("--p", required=True)
    s.add_argument("--A", help="rows separated by ';', entries by ','")
    s.add_argument("--beta")
    s.add_argument("--check-identity", action="store_true", help="report the sum-rate identity residual on stderr")
    s.add_argument("--family", action="store_true", help="sweep the 3-user coefficient family instead")
    s.add_argument("--alt", action="store_true", help="include the alternative family in --family sweeps")
    s.add_argument("--grid", default="0.5:0.05:3", help="beta2/beta3 values for --family")
    s.set_defaults(func=cmd_k_user)

    s = sub.add_parser("sym-capacity", help="scaling factors reaching the symmetric capacity")
    s.add_argument("--k", required=True, help="K or a range like 2..6")
    s.add_argument("--p", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sym_capacity)

    s = sub.add_parser("p-star", help="bracket the power threshold for the symmetric capacity")
    s.add_argument("--k", required=True)
    s.add_argument("--tol", type=float, default=0.01)
    s.add_argument("--ceiling", type=float, default=100.0)
    s.set_defaults(func=cmd_p_star)

    s = sub.add_parser("dirty-region", help="achievable region of the dirty MAC")
    s.add_argument("--p", required=True, help="P1,P2")
    s.add_argument("--q", default="0,0", help="Q1,Q2")
    s.add_argument("--max-coeff", type=int, default=5)
    s.add_argument("--budget", type=int, default=300)
    s.add_argument("--directions", type=int, default=64)
    s.set_defaults(func=cmd_dirty_region)

    s = sub.add_parser("dirty-symmetric", help="symmetric rates of the dirty MAC versus Q/P")
    s.add_argument("--p", required=True, help="common power P1 = P2")
    s.add_argument("--alpha", default="0:0.5:4.5", help="values of Q/P")
    s.add_argument("--max-coeff", type=int, default=2)
    s.add_argument("--budget", type=int, default=dirty_mac.DEFAULT_BUDGET)
    s.set_defaults(func=cmd_dirty_symmetric)
    return p


def _emit(args, text):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except UsageError as exc:
        print(f"cfmac {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        if exc.text:
            _emit(args, exc.text)
        print(f"cfmac {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"cfmac {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    _emit(args, text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
