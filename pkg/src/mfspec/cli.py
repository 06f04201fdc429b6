"""Command-line front end.

Scalar results go to stdout as JSON (sorted keys); grids and sample
reports as CSV, or to ``--out`` (CSV plus a ``.json`` sibling for grids).
Module errors exit with status 2 and a JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import MfspecError
from .geometry import carpet_catalog, load_ifs
from .gibbs_metric import WeakGibbsMetric, full_dimension
from .potentials import LocallyConstant, load_potential
from .pressure import pressure_bracket, pressure_exact
from .sft import _read_json, load_sft
from .spectrum import SpectralProblem, alpha_grid, spectrum_grid

REFERENCE = {
    "s2": np.log(5) / np.log(3),
    "s0_3x3": 2.0,
    "brooks15": 2.0,
}


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _model(args):
    """``(sft, potential, metric)`` from ``--model`` plus overrides.

    The model document holds the shift (``A``) and may embed ``potential``
    and ``metric`` documents; ``--potential``/``--metric`` replace them.
    Defaults: digit potential (symbol 2) and the standard metric.
    """
    if args.model is None:
        doc = {"A": [[1, 1], [1, 1]]}
    else:
        doc = _read_json(args.model)
    sft = load_sft(doc)
    pdoc = _read_json(args.potential) if args.potential else doc.get("potential", {"kind": "digit", "symbol": 2})
    mdoc = _read_json(args.metric) if args.metric else doc.get("metric", {"kind": "standard"})
    return sft, load_potential(pdoc, sft), WeakGibbsMetric(load_potential(mdoc, sft))


def _ifs(args):
    if args.carpet:
        return carpet_catalog(args.carpet)
    if args.ifs:
        return load_ifs(args.ifs)
    raise ValueError("an IFS is required: pass --carpet or --ifs")


def _eps(raw):
    if raw in ("auto", "sqrt"):
        return raw
    return float(raw)


def _floats(raw):
    return [float(t) for t in raw.split(",") if t.strip()]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(obj, out=None):
    text = json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_text(text, out=None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_pressure(args):
    sft, pot, _ = _model(args)
    if pot.d != 1:
        raise ValueError("pressure needs a scalar potential")
    res = {"n": args.n}
    if isinstance(pot, LocallyConstant):
        res["exact"] = pressure_exact(sft, pot)
    br = pressure_bracket(sft, pot, args.n)
    res.update({"lower": br.lo, "upper": br.hi, "log_Z": br.log_Z, "kappa": br.kappa})
    if "exact" in res:
        res["contains_exact"] = br.contains(res["exact"], 1e-12)
    _emit(res, args.out)


def cmd_balls(args):
    _, _, metric = _model(args)
    _emit(full_dimension(metric, args.n), args.out)


def cmd_spectrum(args):
    sft, pot, metric = _model(args)
    prob = SpectralProblem(sft, metric, pot, args.k)
    raw = str(args.alpha_grid)
    if "," in raw or "." in raw:
        alphas = np.array(_floats(raw))
        if prob.d > 1:
            alphas = alphas.reshape(-1, prob.d)
    else:
        alphas = alpha_grid(prob.hull, int(raw))
    grid = spectrum_grid(sft, metric, pot, alphas, n=args.n, eps=_eps(args.eps), k=args.k, threads=args.threads)
    if args.out:
        out = Path(args.out)
        out.write_text(grid.to_csv())
        out.with_suffix(".json").write_text(grid.to_json() + "\n")
    else:
        sys.stdout.write(grid.to_csv())


def _target(args, sft):
    """Constant target (comma list) or a table document ``{"N", "table"}``."""
    from .localized import LocalizedTarget
    from .sft import parse_word

    if args.xi.lstrip().startswith("{") or args.xi.endswith(".json"):
        doc = _read_json(args.xi)
        N = int(doc["N"])
        table = {parse_word(k, sft.m): v for k, v in doc["table"].items()}
        rows = np.array([np.atleast_1d(table[w]) for w in sft.block(N).words], dtype=float)
        return LocalizedTarget(sft, N, rows, None, bool(doc.get("interval_image", False)))
    return LocalizedTarget.constant(sft, _floats(args.xi))


def cmd_fdim(args):
    from .geometry import identity_potential
    from .localized import LocalizedTarget, localized_dimension

    if args.carpet or args.ifs:
        ifs = _ifs(args)
        sft, metric = ifs.sft, ifs.metric
        k = 1 if ifs.homogeneous else args.k
        pot = identity_potential(ifs, k)
        if args.xi in (None, "identity"):
            target = LocalizedTarget.from_ifs(ifs, args.depth)
        else:
            target = _target(args, sft)
    else:
        if args.xi in (None, "identity"):
            raise ValueError("xi = identity needs --carpet or --ifs")
        sft, pot, metric = _model(args)
        k = args.k
        target = _target(args, sft)
    _emit(localized_dimension(sft, metric, pot, target, k), args.out)


def cmd_fixedset(args):
    from .localized import fixed_point_set_dimension

    ifs = _ifs(args)
    res = fixed_point_set_dimension(ifs, k=args.k, depth=args.depth)
    key = (args.carpet or "").strip().lower()
    ref = REFERENCE.get(key)
    if ref is None and key.startswith("times_m"):
        ref = 1.0 * ifs.dim
    if ref is not None:
        res["reference"] = ref
        res["abs_error"] = abs(res["value"] - ref)
    res["carpet"] = ifs.name
    _emit(res, args.out)


def cmd_moran(args):
    from .localized import moran_batch

    sft, pot, metric = _model(args)
    target = _target(args, sft)
    blocks = [int(b) for b in args.blocks.split(",")] if args.blocks else [1000 * 2 ** j for j in range(7)]
    seeds = list(range(args.seed, args.seed + args.runs))
    reps = moran_batch(sft, pot, target, blocks, seeds, threads=args.threads, metric=metric,
                       k=args.k if args.k else None, record_at=[args.record] if args.record else ())
    if args.runs == 1:
        _emit_text(reps[0].to_csv(), args.out)
        return
    rows = []
    for r in reps:
        last = r.records[-1]
        rows.append({"seed": r.seed, "n": last["n"], "deviation": last["deviation"],
                     "local_dim": last["local_dim"], "mass_error": r.mass_error, "flags": r.flags})
    _emit({"runs": rows, "blocks": blocks}, args.out)


def cmd_check(args):
    from .checks import run_checks

    rep = run_checks(instances=args.instances, seed=args.seed)
    total = sum(v["violations"] for v in rep.values())
    for v in rep.values():
        v.pop("seconds")
    _emit({"properties": rep, "violations": total}, args.out)
    return 1 if total else 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="mfspec", description="Multifractal spectra of almost additive potentials.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n=24, k=4, depth=6):
        sp.add_argument("--model", help="shift model JSON (may embed 'potential' and 'metric')")
        sp.add_argument("--potential", help="potential JSON")
        sp.add_argument("--metric", help="metric potential JSON")
        sp.add_argument("--n", type=int, default=n)
        sp.add_argument("--k", type=int, default=k)
        sp.add_argument("--depth", type=int, default=depth)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out", help="output file (stdout when omitted)")

    sp = sub.add_parser("pressure", help="exact pressure and the finite-n bracket")
    common(sp, n=12)
    sp.set_defaults(func=cmd_pressure)

    sp = sub.add_parser("balls", help="cover count, counting dimension and Bowen root")
    common(sp)
    sp.set_defaults(func=cmd_balls)

    sp = sub.add_parser("spectrum", help="spectrum grid as CSV (and JSON with --out)")
    common(sp)
    sp.add_argument("--alpha-grid", default="64", help="number of grid points or a comma list of alphas")
    sp.add_argument("--eps", default="auto", help="auto, sqrt or a number")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("fdim", help="dimension of a localized level set")
    common(sp, depth=3)
    sp.add_argument("--xi", help="constant alpha (comma list), 'identity', or a table JSON")
    sp.add_argument("--carpet", help="catalog IFS")
    sp.add_argument("--ifs", help="IFS JSON")
    sp.set_defaults(func=cmd_fdim)

    sp = sub.add_parser("fixedset", help="dimension of the fixed points in asymptotic average")
    common(sp)
    sp.add_argument("--carpet", help="catalog IFS")
    sp.add_argument("--ifs", help="IFS JSON")
    sp.set_defaults(func=cmd_fixedset)

    sp = sub.add_parser("moran", help="Moran sampler report")
    common(sp, k=0)
    sp.add_argument("--xi", default="0.3", help="constant target (comma list) or a table JSON")
    sp.add_argument("--blocks", help="comma list of block lengths")
    sp.add_argument("--runs", type=int, default=1, help="number of consecutive seeds")
    sp.add_argument("--record", type=int, default=100000, help="extra n at which to record")
    sp.set_defaults(func=cmd_moran)

    sp = sub.add_parser("check", help="randomized invariant suite")
    sp.add_argument("--instances", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except MfspecError as e:
        sys.stderr.write(json.dumps({"error": e.code, "message": str(e)}, sort_keys=True) + "\n")
        return 2
    except (ValueError, KeyError, OSError) as e:
        sys.stderr.write(json.dumps({"error": "invalid_input", "message": str(e)}, sort_keys=True) + "\n")
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
