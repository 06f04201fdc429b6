"""Counting spectrum, conditional variational spectrum and their diagnostics.

``E(alpha) = sup{h(mu) / -Psi_*(mu) : Phi_*(mu) = alpha}`` is computed over
order-``k`` Markov measures through the dual

    E(alpha) = inf_q T(q),    P(q . (phi - alpha) + T(q) psi) = 0,

and cross-checked with a direct maximization over stationary edge flows.
``T`` is convex with gradient ``(Phi_* - alpha) / |Psi_*|`` evaluated at the
equilibrium state of ``q . (phi - alpha) + T psi``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import DualPrimalGap, Infeasible, ModelError
from .gibbs_metric import cover_classes
from .potentials import discretize
from .pressure import Perron, perron
from .sft import cycle_mean_hull


# ---------------------------------------------------------------------------
# the order-k problem
# ---------------------------------------------------------------------------

class SpectralProblem:
    """Tables of ``phi`` and ``psi`` on the order-``k`` block graph.

    Parameters
    ----------
    sft : Sft
    metric : WeakGibbsMetric
    potential : Potential
        Discretized to window ``k`` when it is not already locally constant
        with a smaller window.
    k : int
    """

    def __init__(self, sft, metric, potential, k):
        self.sft = sft
        self.metric = metric
        self.k = int(k)
        self.potential = discretize(potential, self.k)
        self.psi = discretize(metric.psi, self.k)
        self.block = sft.block(self.k)
        self.F = self.potential.table_on(self.block)
        self.g = self.psi.table_on(self.block)[:, 0]
        if not (self.g < 0).all():
            raise ModelError("discretized metric potential must be negative")
        self.d = self.F.shape[1]
        self._hull = None

    @property
    def hull(self):
        if self._hull is None:
            self._hull = cycle_mean_hull(self.sft, self.F, k=self.k)
        return self._hull

    def functionals(self, per: Perron, f):
        pi = per.pi
        return {
            "h": float(per.log_lambda - pi @ f),
            "phi_star": pi @ self.F,
            "psi_star": float(pi @ self.g),
        }

    def solve_T(self, q, alpha, warm=None, tol=1e-15, max_iter=200):
        """Root ``T`` of ``P(q . (phi - alpha) + T psi) = 0`` by Newton from ``T = 0``.

        ``G`` is convex and decreasing in ``T``, so the iterates approach the
        root from the left after at most one step.
        """
        base = (self.F - alpha) @ q
        T = 0.0
        per = warm
        for _ in range(max_iter):
            f = base + T * self.g
            per = perron(self.block, f, warm=per)
            G = per.log_lambda
            dG = float(per.pi @ self.g)
            step = G / dG
            T -= step
            if abs(step) <= tol * max(1.0, abs(T)):
                break
        f = base + T * self.g
        per = perron(self.block, f, warm=per)
        return T, per, f

    def T_and_grad(self, q, alpha, warm=None):
        T, per, f = self.solve_T(q, alpha, warm)
        fn = self.functionals(per, f)
        grad = (fn["phi_star"] - alpha) / abs(fn["psi_star"])
        return T, grad, per, fn


@dataclass
class SpectrumPoint:
    """One dual solve with its primal witness."""

    alpha: np.ndarray
    alpha_used: np.ndarray
    clamped: bool
    e_hat: float
    q_star: np.ndarray
    witness_h: float
    witness_phi: np.ndarray
    witness_psi: float
    in_L: bool
    in_riL: bool
    evaluations: int = 0

    @property
    def witness_gap(self):
        return float(np.linalg.norm(self.witness_phi - self.alpha_used))

    @property
    def witness_ratio(self):
        return self.witness_h / abs(self.witness_psi)


def _solve_1d(prob, alpha, warm):
    evals = [0]
    cache = {}

    def gap(q):
        T, grad, per, fn = prob.T_and_grad(np.array([q]), alpha, cache.get("per", warm))
        cache["per"] = per
        cache[q] = (T, fn)
        evals[0] += 1
        return float(grad[0])

    g0 = gap(0.0)
    if g0 == 0.0:
        return np.array([0.0]), cache[0.0], evals[0]
    step = -1.0 if g0 > 0 else 1.0
    a, ga = 0.0, g0
    b = step
    gb = gap(b)
    while np.sign(gb) == np.sign(ga):
        a, ga = b, gb
        b *= 2.0
        if abs(b) > 1e9:
            raise DualPrimalGap(f"no sign change of Phi_* - alpha up to |q| = {abs(b):.3g}")
        gb = gap(b)
    lo, hi = (a, b) if a < b else (b, a)
    q = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    if q not in cache:
        gap(q)
    return np.array([q]), cache[q], evals[0]


def _solve_nd(prob, alpha, basis, warm, gtol):
    """Minimize the convex ``T`` over ``q = basis.T @ y``."""
    r = basis.shape[0]
    state = {"per": warm, "n": 0}

    def fun(y):
        T, grad, per, fn = prob.T_and_grad(basis.T @ y, alpha, state["per"])
        state["per"] = per
        state["n"] += 1
        state["last"] = (y.copy(), T, fn)
        return T, basis @ grad

    res = minimize(fun, np.zeros(r), jac=True, method="BFGS", options={"gtol": gtol, "maxiter": 2000})
    y = res.x
    # Newton polish with a finite-difference Hessian of the analytic gradient
    for _ in range(30):
        T, gr = fun(y)
        if np.linalg.norm(gr) <= gtol:
            break
        h = 1e-5 * max(1.0, float(np.linalg.norm(y)))
        H = np.empty((r, r))
        for i in range(r):
            e = np.zeros(r)
            e[i] = h
            H[:, i] = (fun(y + e)[1] - fun(y - e)[1]) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            step = -np.linalg.solve(H + 1e-14 * np.eye(r), gr)
        except np.linalg.LinAlgError:
            step = -gr
        t = 1.0
        while t > 1e-8:
            Tn, _ = fun(y + t * step)
            if Tn <= T + 1e-4 * t * (gr @ step):
                break
            t *= 0.5
        y = y + t * step
    Tf, gr = fun(y)
    _, T, fn = state["last"]
    return basis.T @ y, (T, fn), state["n"]


def variational_spectrum(prob: SpectralProblem, alpha, tol=1e-6, warm=None, strict=True, gtol=1e-11):
    """``E(alpha)`` on order-``k`` Markov measures by the dual.

    Points within ``1e-9`` of the relative boundary of ``L_Phi`` are pulled
    toward the centroid by ``1 - 1e-9`` (reported as ``clamped``).

    Raises
    ------
    Infeasible
        ``alpha`` outside the order-``k`` hull.
    DualPrimalGap
        the witness misses ``alpha`` by more than ``tol`` (only if ``strict``).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (prob.d,):
        raise ValueError(f"alpha must have {prob.d} coordinates")
    hull = prob.hull
    if not hull.contains(alpha):
        raise Infeasible(f"alpha={alpha.tolist()} lies outside L_Phi at k={prob.k}")
    riL = hull.in_relative_interior(alpha)
    a_used, clamped = hull.clamp(alpha)
    if hull.dim == 0:
        T, per, f = prob.solve_T(np.zeros(prob.d), a_used, warm)
        q = np.zeros(prob.d)
        fn = prob.functionals(per, f)
        evals = 1
    elif prob.d == 1:
        q, (T, fn), evals = _solve_1d(prob, a_used, warm)
    else:
        q, (T, fn), evals = _solve_nd(prob, a_used, hull.basis, warm, gtol)
    pt = SpectrumPoint(alpha=alpha, alpha_used=a_used, clamped=clamped, e_hat=float(T), q_star=np.asarray(q),
                       witness_h=fn["h"], witness_phi=np.asarray(fn["phi_star"]), witness_psi=fn["psi_star"],
                       in_L=True, in_riL=riL, evaluations=evals)
    if strict and pt.witness_gap > tol:
        raise DualPrimalGap(f"witness average misses alpha by {pt.witness_gap:.3g} at alpha={alpha.tolist()}")
    return pt


def spectrum_maximum(prob: SpectralProblem):
    """``max E = t*`` (Bowen root of the discretized psi) and its maximizer."""
    alpha0 = np.zeros(prob.d)
    T, per, f = prob.solve_T(np.zeros(prob.d), alpha0)
    fn = prob.functionals(per, f)
    return float(T), np.asarray(fn["phi_star"])


def l_phi(sft, potential, k):
    """``L_Phi`` of the window-``k`` discretization (a :class:`CycleHull`)."""
    pot = discretize(potential, k)
    return cycle_mean_hull(sft, pot.table_on(sft.block(k)), k=k)


# ---------------------------------------------------------------------------
# primal oracle
# ---------------------------------------------------------------------------

def primal_spectrum(prob: SpectralProblem, alpha, restarts=4, seed=0):
    """Direct maximization of ``h / -Psi_*`` over stationary edge flows.

    Independent of the dual: SLSQP over the flow polytope of the order-``k``
    graph with the linear constraint ``Phi_* = alpha``. Meant for small
    graphs (tens of edges).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    b = prob.block
    E = len(b.src)
    Fe = prob.F[b.src]
    ge = prob.g[b.src]
    n = b.n
    inc = np.zeros((n, E))
    inc[b.src, np.arange(E)] += 1.0
    inc[b.dst, np.arange(E)] -= 1.0

    def entropy(x):
        pi = np.bincount(b.src, weights=x, minlength=n)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(x > 0, x * np.log(x / pi[b.src]), 0.0)
        return -float(t.sum()), pi

    def obj(x):
        h, pi = entropy(x)
        ps = float(x @ ge)
        with np.errstate(divide="ignore", invalid="ignore"):
            dh = -np.log(np.maximum(x, 1e-300) / np.maximum(pi[b.src], 1e-300))
        R = h / -ps
        dR = (dh * -ps + h * ge) / ps ** 2
        return -R, -dR

    cons = [
        {"type": "eq", "fun": lambda x: np.r_[x.sum() - 1.0, inc[1:] @ x, Fe.T @ x - alpha],
         "jac": lambda x: np.vstack([np.ones(E), inc[1:], Fe.T])},
    ]
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        x0 = np.full(E, 1.0 / E) if r == 0 else rng.dirichlet(np.ones(E))
        res = minimize(obj, x0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * E, constraints=cons,
                       options={"ftol": 1e-15, "maxiter": 1000})
        x = np.maximum(res.x, 0.0)
        viol = float(np.abs(cons[0]["fun"](x)).max())
        if viol > 1e-8:
            continue
        val = -obj(x)[0]
        if best is None or val > best[0]:
            best = (val, x, viol)
    if best is None:
        raise Infeasible("primal oracle found no feasible flow")
    return {"value": best[0], "flow": best[1], "violation": best[2]}


# ---------------------------------------------------------------------------
# counting spectrum
# ---------------------------------------------------------------------------

def auto_eps(metric, potential, n):
    """Resolution-matched radius: the spread of ``phi`` over the shortest cover length."""
    spread = float(np.max(potential.phi_max - potential.phi_min))
    lmin = int(np.ceil(n / abs(metric.psi_min) - 1e-12))
    return spread / max(lmin, 1)


def sqrt_eps(n):
    return max(0.25 / np.sqrt(n), 0.02)


def resolve_eps(eps, metric, potential, n):
    if eps is None or eps == "auto":
        return auto_eps(metric, potential, n)
    if eps == "sqrt":
        return sqrt_eps(n)
    return float(eps)


def counting_spectrum(sft, metric, potential, alpha, n, eps="auto", classes=None):
    """``f(alpha, n, eps)`` and ``log f / n`` (``-inf`` when ``f = 0``)."""
    eps = resolve_eps(eps, metric, potential, n)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if classes is None:
        classes = cover_classes(metric, n, potential)
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    f = classes.count_near(alpha, eps)
    with np.errstate(divide="ignore"):
        lam = np.log(f) / n
    if alpha.shape[0] == 1:
        return float(f[0]), float(lam[0])
    return f, lam


DEFAULT_SCHEDULE = [8, 12, 16, 20, 24]


def lambda_estimate(sft, metric, potential, alpha, schedule=None, eps="sqrt"):
    """Run ``counting_spectrum`` along a schedule of ``(n, eps)`` pairs.

    ``schedule`` entries may be plain ``n`` (eps rule applied) or ``(n, eps)``.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    rows = []
    for item in schedule:
        n, e = (item if isinstance(item, tuple) else (item, eps))
        e = resolve_eps(e, metric, potential, n)
        f, lam = counting_spectrum(sft, metric, potential, alpha, n, e)
        rows.append({"n": n, "eps": e, "f": f, "lambda": lam})
    return {"lambda_hat": rows[-1]["lambda"], "table": rows}


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{float(x):.17g}"


@dataclass
class SpectrumGrid:
    """Sampled spectrum on an alpha grid."""

    alphas: np.ndarray
    lambda_hat: np.ndarray
    e_hat: np.ndarray
    in_L: np.ndarray
    in_riL: np.ndarray
    q_star: np.ndarray
    witness_gap: np.ndarray
    clamped: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.alphas.shape[1]

    def argmax(self):
        """Grid argmax of ``e_hat``; the smallest alpha wins ties."""
        v = np.where(np.isfinite(self.e_hat), self.e_hat, -np.inf)
        best = np.flatnonzero(v == v.max())
        order = np.lexsort(self.alphas[best].T[::-1])
        return int(best[order[0]])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        acols = ["alpha"] if self.d == 1 else [f"alpha{i + 1}" for i in range(self.d)]
        qcols = ["q_star"] if self.d == 1 else [f"q_star{i + 1}" for i in range(self.d)]
        w.writerow(acols + ["lambda_hat", "e_hat", "in_L", "in_riL"] + qcols + ["witness_gap", "clamped"])
        for i in range(len(self.alphas)):
            w.writerow([_fmt(a) for a in self.alphas[i]] + [_fmt(self.lambda_hat[i]), _fmt(self.e_hat[i]),
                        int(self.in_L[i]), int(self.in_riL[i])] + [_fmt(q) for q in self.q_star[i]]
                       + [_fmt(self.witness_gap[i]), int(self.clamped[i])])
        return buf.getvalue()

    def to_json(self):
        def clean(x):
            x = float(x)
            return x if np.isfinite(x) else None

        rows = []
        for i in range(len(self.alphas)):
            rows.append({
                "alpha": [float(a) for a in self.alphas[i]],
                "lambda_hat": clean(self.lambda_hat[i]),
                "e_hat": clean(self.e_hat[i]),
                "in_L": bool(self.in_L[i]),
                "in_riL": bool(self.in_riL[i]),
                "q_star": [clean(q) for q in self.q_star[i]],
                "witness_gap": clean(self.witness_gap[i]),
                "clamped": bool(self.clamped[i]),
            })
        return json.dumps({"meta": self.meta, "points": rows}, indent=1, sort_keys=True)


def spectrum_grid(sft, metric, potential, alphas, n=24, eps="auto", k=4, count=True, tol=1e-6, threads=1):
    """Evaluate ``Lambda_hat`` and ``E_hat`` on every grid point.

    With ``threads > 1`` the dual solves run in a thread pool; every result
    is written to its own grid index, so the output does not depend on
    scheduling.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    prob = SpectralProblem(sft, metric, potential, k)
    N, d = alphas.shape
    lam = np.full(N, np.nan)
    e = np.full(N, np.nan)
    inL = np.zeros(N, bool)
    riL = np.zeros(N, bool)
    q = np.full((N, d), np.nan)
    gap = np.full(N, np.nan)
    clamped = np.zeros(N, bool)
    eps_v = resolve_eps(eps, metric, potential, n)
    if count:
        classes = cover_classes(metric, n, potential)
        f = classes.count_near(alphas, eps_v)
        with np.errstate(divide="ignore"):
            lam = np.log(f) / n
    def solve(a):
        try:
            return variational_spectrum(prob, a, tol=tol, strict=False)
        except Infeasible:
            return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        prob.hull  # build once before the workers share it
        with ThreadPoolExecutor(threads) as ex:
            points = list(ex.map(solve, alphas))
    else:
        points = [solve(a) for a in alphas]
    for i, pt in enumerate(points):
        if pt is None:
            continue
        inL[i] = True
        riL[i] = pt.in_riL
        e[i] = pt.e_hat
        q[i] = pt.q_star if pt.q_star.shape == (d,) else np.nan
        gap[i] = pt.witness_gap
        clamped[i] = pt.clamped
    tstar, amax = spectrum_maximum(prob)
    meta = {
        "n": n, "eps": eps_v, "eps_rule": eps if isinstance(eps, str) else "fixed", "k": k,
        "bowen_root": tstar, "alpha_max": amax.tolist(),
        "hull_vertices": prob.hull.vertices.tolist(),
        "norm": "operator 2-norm",
    }
    return SpectrumGrid(alphas, lam, e, inL, riL, q, gap, clamped, meta)


def alpha_grid(hull, points):
    """Uniform grid over ``L_Phi``, endpoints included.

    In 1-d ``points`` values; for ``d >= 2`` a ``points``-per-axis product
    grid over the bounding box, restricted to the hull.
    """
    if hull.d == 1:
        lo, hi = hull.interval
        return np.linspace(lo, hi, int(points))
    lo = hull.vertices.min(axis=0)
    hi = hull.vertices.max(axis=0)
    axes = [np.linspace(a, b, int(points)) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, hull.d)
    return grid[[hull.contains(a) for a in grid]]


def refine_grid_max(prob: SpectralProblem, alphas, values, xatol=1e-12):
    """Maximize ``E_hat`` between the grid neighbours of the grid argmax (1-d).

    Bounded golden-section search on the dual values only; returns
    ``(alpha, value)``, never below the grid maximum.
    """
    from scipy.optimize import minimize_scalar

    a = np.asarray(alphas, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    v = np.where(np.isfinite(v), v, -np.inf)
    i = int(np.argmax(v))
    lo, hi = a[max(i - 1, 0)], a[min(i + 1, len(a) - 1)]
    if hi <= lo:
        return float(a[i]), float(v[i])

    def neg(t):
        try:
            return -variational_spectrum(prob, [t], strict=False).e_hat
        except Infeasible:
            return np.inf

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    if -res.fun > v[i]:
        return float(res.x), float(-res.fun)
    return float(a[i]), float(v[i])


# ---------------------------------------------------------------------------
# weak concavity
# ---------------------------------------------------------------------------

def quasi_concavity(values, tol):
    """Check ``v[j] >= min(v[i], v[l]) - tol`` for all ``i < j < l``."""
    v = np.asarray(values, dtype=float)
    N = len(v)
    worst = None
    for j in range(1, N - 1):
        i = int(np.argmax(v[:j]))
        l = j + 1 + int(np.argmax(v[j + 1:]))
        short = min(v[i], v[l]) - v[j]
        if short > tol and (worst is None or short > worst[0]):
            worst = (float(short), (i, j, l))
    return {"pass": worst is None, "witness": None if worst is None else worst[1],
            "violation": 0.0 if worst is None else worst[0]}


def monotone_from_max(values, tol):
    v = np.asarray(values, dtype=float)
    top = int(np.flatnonzero(v == v.max())[0])
    bad = []
    for i in range(top):
        if v[i + 1] < v[i] - tol:
            bad.append((i, i + 1))
    for i in range(top, len(v) - 1):
        if v[i + 1] > v[i] + tol:
            bad.append((i, i + 1))
    return {"pass": not bad, "argmax": top, "witness": bad[:5]}


def _weak_concavity(alphas, values, c, tol, pairs, rng):
    a = np.asarray(alphas, dtype=float)
    v = np.asarray(values, dtype=float)
    N = len(a)
    lams = np.array([0.25, 0.5, 0.75])
    gam = np.exp(np.linspace(-np.log(c), np.log(c), 9)) if c > 1 else np.array([1.0])
    fails = []
    idx = [(i, j) for i in range(N) for j in range(i + 1, N)]
    if len(idx) > pairs:
        idx = [idx[t] for t in rng.choice(len(idx), pairs, replace=False)]
    for i, j in idx:
        ok = False
        for g1 in gam:
            for g2 in gam:
                pts = (lams * g1 * a[i] + (1 - lams) * g2 * a[j]) / (lams * g1 + (1 - lams) * g2)
                lhs = lams * v[i] + (1 - lams) * v[j]
                if np.all(lhs <= np.interp(pts, a, v) + tol):
                    ok = True
                    break
            if ok:
                break
        if not ok:
            fails.append((i, j))
    return fails


def weak_concavity_check(alphas, values, c=None, tol=0.02, pairs=400, seed=0,
                         c_candidates=(1.0, 1.25, 1.5, 2.0, 3.0, 4.0)):
    """Quasi-concavity, monotonicity from the maximum and a weak-concavity search.

    ``c=None`` scans ``c_candidates`` and reports the smallest passing one.
    Only finite values are used.
    """
    a = np.asarray(alphas, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    keep = np.isfinite(v)
    a, v = a[keep], v[keep]
    order = np.argsort(a)
    a, v = a[order], v[order]
    rng = np.random.default_rng(seed)
    cands = [c] if c is not None else list(c_candidates)
    wc = {"pass": False, "c": None, "witness": None}
    for cc in cands:
        fails = _weak_concavity(a, v, cc, tol, pairs, rng)
        if not fails:
            wc = {"pass": True, "c": cc, "witness": None}
            break
        wc = {"pass": False, "c": cc, "witness": fails[:5]}
    qc = quasi_concavity(v, tol)
    if qc["witness"] is not None:
        qc["witness_alpha"] = [float(a[t]) for t in qc["witness"]]
    return {"quasi_concave": qc, "monotone_from_max": monotone_from_max(v, tol), "weakly_concave": wc}


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log(p), 0.0) + np.where(p < 1, (1 - p) * np.log(1 - p), 0.0))
    return h


__all__ = [
    "SpectralProblem", "SpectrumPoint", "SpectrumGrid", "variational_spectrum", "primal_spectrum",
    "spectrum_maximum", "refine_grid_max", "l_phi", "counting_spectrum", "lambda_estimate", "spectrum_grid", "alpha_grid",
    "weak_concavity_check", "quasi_concavity", "monotone_from_max", "auto_eps", "sqrt_eps", "binary_entropy",
]
