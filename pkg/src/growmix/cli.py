"""Command-line interface: build systems, sweep the mixing rate, run the checks.

Exit codes: 0 success (all checks hold), 1 some check violated, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import models, theorems
from .dynamics import trajectory, write_trajectory_csv
from .errors import GrowMixError
from .mlcore import (
    ConservationClass,
    DiagonalGrowth,
    GrowthMixingSystem,
    conservation_class,
    validate_ml,
)
from .spectral import spab
from .structure import blockwise_derivative, blockwise_spab, frobenius_normal_form, is_irreducible

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
VERIFY_STYLES = ("ConservativeStochastic", "Lossy", "GeneralML", "Reducible")
MONOTONE_GRID = tuple(0.25 * k for k in range(41))
HETEROGENEITY_GRID = (1e-3, 1e-2, 0.1, 1.0, 10.0)


class UsageError(Exception):
    pass


# -- parsing helpers ---------------------------------------------------------

def parse_grid(spec: str) -> list[float]:
    """``start:step:stop`` (inclusive) or ``geom:start:factor:count``."""
    parts = spec.split(":")
    try:
        if parts[0] == "geom":
            if len(parts) != 4:
                raise ValueError
            start, factor, count = float(parts[1]), float(parts[2]), int(parts[3])
            if not (start > 0 and factor > 1 and count >= 1):
                raise UsageError(f"geometric grid needs start > 0, factor > 1, count >= 1: {spec!r}")
            return [start * factor**k for k in range(count)]
        if len(parts) != 3:
            raise ValueError
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad grid spec {spec!r}; use start:step:stop or geom:start:factor:count") from None
    if not (step > 0 and stop >= start and start >= 0):
        raise UsageError(f"grid needs step > 0, stop >= start >= 0: {spec!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


def parse_vector(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad vector {text!r}; use comma-separated numbers") from None


def parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"bad range {text!r}; use lo:hi") from None
    if not 2 <= lo <= hi:
        raise UsageError("n-range needs 2 <= lo <= hi")
    return lo, hi


def _read_json(path: str):
    try:
        text = Path(path).read_text() if path != "-" else sys.stdin.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_system(path: str) -> GrowthMixingSystem:
    data = _read_json(path)
    try:
        return GrowthMixingSystem.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a system document ({exc})") from None


def load_matrix(path: str) -> np.ndarray:
    data = _read_json(path)
    entries = data.get("entries") if isinstance(data, dict) else data
    try:
        return np.array(entries, dtype=float)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: not a matrix ({exc})") from None


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


# -- model -------------------------------------------------------------------

def build_model(kind: str, params: dict) -> GrowthMixingSystem:
    """Build a system from a scenario: ``{"model": kind, ...parameters}``."""
    def growth(n, key="d"):
        d = params.get(key)
        return DiagonalGrowth(np.zeros(n) if d is None else d)

    def stochastic():
        P = np.array(params["P"], dtype=float)
        return P.T if params.get("transpose") else P

    if kind == "diffusion1d":
        n = int(params.get("n", len(params.get("g") or []) or 3))
        g = params.get("g")
        g = np.zeros(n) if g is None else np.asarray(g, dtype=float)
        if g.size != n:
            raise UsageError(f"g has {g.size} values but n = {n}")
        return models.discretize_diffusion_1d(g, float(params.get("m", 1.0)), float(params.get("h", 1.0)),
                                              params.get("boundary", "dirichlet"))
    if kind == "markov":
        P = stochastic()
        return GrowthMixingSystem(growth(P.shape[0]), models.continuous_mixing(P))
    if kind == "karlin":
        P = stochastic()
        D = growth(P.shape[0])
        return GrowthMixingSystem(D, models.karlin_discrete_analog(P, D))
    if kind == "limit":
        alpha = np.asarray(params["alpha"], dtype=float)
        return GrowthMixingSystem(growth(alpha.size), models.limit_family(alpha))
    if kind == "random":
        return models.random_system(int(params.get("n", 4)), params.get("style", "ConservativeStochastic"),
                                    int(params.get("seed", 42)))
    if kind == "custom":
        A = validate_ml(params["A"]["entries"] if isinstance(params["A"], dict) else params["A"])
        return GrowthMixingSystem(growth(A.n), A)
    raise UsageError(f"unknown model kind {kind!r}")


def cmd_model(args) -> int:
    if args.scenario:
        data = _read_json(args.scenario)
        if not isinstance(data, dict) or "model" not in data:
            raise UsageError(f"{args.scenario}: scenario needs a 'model' key")
        system = build_model(data["model"], data)
    else:
        if args.kind is None:
            raise UsageError("give a model kind or --scenario FILE")
        params: dict = {"transpose": args.transpose}
        if args.n is not None:
            params["n"] = args.n
        if args.h is not None:
            params["h"] = args.h
        if args.m is not None:
            params["m"] = args.m
        if args.boundary:
            params["boundary"] = args.boundary
        if args.g:
            params["g"] = parse_vector(args.g)
        if args.d:
            params["d"] = parse_vector(args.d)
        if args.alpha:
            params["alpha"] = parse_vector(args.alpha)
        if args.P:
            params["P"] = load_matrix(args.P)
        if args.A:
            params["A"] = load_matrix(args.A)
        params["style"] = args.style
        params["seed"] = args.seed
        needs = {"markov": "P", "karlin": "P", "limit": "alpha", "custom": "A"}
        if args.kind in needs and needs[args.kind] not in params:
            raise UsageError(f"model {args.kind} needs --{needs[args.kind]}")
        system = build_model(args.kind, params)
    out, close = _open_out(args.out)
    try:
        out.write(system.to_json() + "\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

SWEEP_COLUMNS = ["m", "spab", "derivative", "d_right", "bound_spabA", "min_D", "max_D", "argmax_block",
                 "near_tie_flag"]


def sweep_rows(system: GrowthMixingSystem, grid, tol: float = 1e-12) -> list[dict]:
    spab_A = spab(system.A, tol=tol)
    lo, hi = float(system.D.d.min()), float(system.D.d.max())
    rows = []
    for m in grid:
        bw = blockwise_spab(system, m, tol=tol)
        bd = blockwise_derivative(system, m, tol=tol)
        rows.append({
            "m": m,
            "spab": bw.spab,
            "derivative": bd.derivative,
            "d_right": bd.right,
            "bound_spabA": spab_A,
            "min_D": lo,
            "max_D": hi,
            "argmax_block": ";".join(str(h) for h in sorted(bw.argmax_blocks)),
            "near_tie_flag": int(bd.near_tie or len(bw.argmax_blocks) > 1),
        })
    return rows


def cmd_sweep(args) -> int:
    system = load_system(args.system)
    grid = parse_grid(args.grid)
    rows = sweep_rows(system, grid, tol=args.tol)
    out, close = _open_out(args.out)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([
                _fmt(row[c]) if c not in ("argmax_block", "near_tie_flag") else row[c] for c in SWEEP_COLUMNS
            ])
    finally:
        if close:
            out.close()
    return EXIT_OK


# -- verify ------------------------------------------------------------------

def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def verify_instance(system: GrowthMixingSystem, rng: np.random.Generator) -> list[theorems.Verdict]:
    """Run every applicable check on one system, drawing check parameters from ``rng``."""
    A, D = system.A, system.D
    m = float(rng.uniform(0.05, 5.0))
    beta = float(rng.uniform(1.5, 10.0))
    m1, m2 = (float(x) for x in rng.uniform(0.0, 5.0, 2))
    a = float(rng.uniform(0.1, 0.9))
    w = float(rng.uniform(0.2, 0.8))
    alpha = rng.dirichlet(np.ones(system.n))
    out = []
    if is_irreducible(A):
        out.append(theorems.check_basic_inequality(A, D))
        out.append(theorems.check_corollary_basic(A, D))
        out.append(theorems.check_convexity_derived(A, D, beta))
        out.append(theorems.check_sums([A.scale(w), A.scale(1 - w)], D, "Right"))
        out.append(theorems.check_flip(A))
        out.append(theorems.check_convexity_in_m(system, m1, m2, a))
    out.append(theorems.check_main_derivative_bound(system, m))
    cls = conservation_class(A)
    if cls is ConservationClass.CONSERVATIVE:
        out.append(theorems.check_monotone_decrease(system, MONOTONE_GRID))
    elif cls is ConservationClass.LOSSY:
        out.append(theorems.check_lossy_strict(system, MONOTONE_GRID))
    spab_A = spab(A)
    if abs(spab_A) <= theorems.SPAB_ZERO_TOL:
        out.append(theorems.check_bounds(system, m))
    if spab_A <= theorems.SPAB_ZERO_TOL:
        for m_star in (m, 0.1 * m, 1e-3):
            if spab(system.materialize(m_star)) > 0:
                out.append(theorems.check_stability_monotone(system, m_star, m_hi=1e3))
                break
    limit_sys = GrowthMixingSystem(D, models.limit_family(alpha))
    out.append(theorems.check_limit(limit_sys, theorems.limit_target(limit_sys, alpha)))
    out.append(theorems.check_heterogeneity(system, HETEROGENEITY_GRID))
    return out


def _verify_job(job):
    index, seed, style, lo, hi = job
    s = instance_seed(seed, index)
    rng = np.random.default_rng(s)
    n = int(rng.integers(lo, hi + 1))
    system = models.random_system(n, style, s)
    return [v.to_record(seed=s) for v in verify_instance(system, rng)]


def cmd_verify(args) -> int:
    lo, hi = parse_range(args.n_range)
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        styles = VERIFY_STYLES if args.style.lower() == "all" else (models.Style.parse(args.style).value,)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    jobs = [(i, args.seed, styles[i % len(styles)], lo, hi) for i in range(args.count)]
    if args.jobs > 1 and jobs:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_verify_job, jobs, chunksize=8))
    else:
        results = [_verify_job(job) for job in jobs]

    min_gap: dict[str, float] = {}
    all_hold = True
    out, close = _open_out(args.out)
    try:
        for index, records in enumerate(results):
            for rec in records:
                rec["instance"] = index
                out.write(json.dumps(rec) + "\n")
                all_hold &= rec["holds"]
                min_gap[rec["check"]] = min(min_gap.get(rec["check"], math.inf), rec["gap"])
        summary = {"summary": {"count": args.count, "all_hold": all_hold, "min_gap": min_gap}}
        out.write(json.dumps(summary) + "\n")
    finally:
        if close:
            out.close()
    return EXIT_OK if all_hold else EXIT_VIOLATION


# -- structure / trajectory --------------------------------------------------

def cmd_structure(args) -> int:
    system = load_system(args.system)
    form = frobenius_normal_form(system.A)
    doc = form.to_dict()
    doc["conservation"] = conservation_class(system.A).value
    print(json.dumps(doc))
    return EXIT_OK


def cmd_trajectory(args) -> int:
    system = load_system(args.system)
    x0 = parse_vector(args.x0) if args.x0 else [1.0] * system.n
    rows = trajectory(system, args.m, x0, parse_grid(args.times))
    out, close = _open_out(args.out)
    try:
        write_trajectory_csv(rows, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="growmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="emit a system JSON document")
    p.add_argument("kind", nargs="?", choices=["diffusion1d", "markov", "karlin", "limit", "random", "custom"])
    p.add_argument("--scenario", help="scenario JSON file ({'model': kind, ...})")
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--m", type=float, help="nominal mixing rate")
    p.add_argument("--boundary", choices=["dirichlet", "neumann"])
    p.add_argument("--g", help="diffusion growth profile, comma-separated")
    p.add_argument("--d", help="growth rates, comma-separated")
    p.add_argument("--alpha", help="limit-family weights, comma-separated")
    p.add_argument("--P", help="column-stochastic matrix file")
    p.add_argument("--transpose", action="store_true", help="P file is row-stochastic")
    p.add_argument("--A", help="mixing pattern matrix file (custom)")
    p.add_argument("--style", default="ConservativeStochastic")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("sweep", help="tabulate spab(D + mA) over a grid of m")
    p.add_argument("--system", required=True)
    p.add_argument("--grid", required=True, help="start:step:stop or geom:start:factor:count")
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run every check on seeded random instances")
    p.add_argument("--style", default="all")
    p.add_argument("--n-range", default="2:8")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("structure", help="Frobenius normal form of a system's mixing pattern")
    p.add_argument("--system", required=True)
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("trajectory", help="x(t) = exp(F(m) t) x0 as CSV")
    p.add_argument("--system", required=True)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--x0")
    p.add_argument("--times", required=True, help="grid spec for t")
    p.add_argument("--out")
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"growmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GrowMixError, KeyError, ValueError) as exc:
        print(f"growmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
