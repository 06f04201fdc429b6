"""Localized level sets, fixed points in asymptotic average, Moran sampling.

``E_Phi(xi) = {x : phi_n(x)/n -> xi(x)}`` has dimension
``sup{E(alpha) : alpha in xi(Sigma_A)}`` under the usual hypotheses; the
functions here evaluate that supremum on a finite encoding of ``xi`` and
build the concatenated measures whose typical points realize it.
"""

from __future__ import annotations

import bisect
import csv
import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from .errors import EmptyIntersection, Infeasible
from .geometry import IfsSpec, cell_points, identity_potential
from .pressure import markov_from_perron, perron
from .spectrum import SpectralProblem, spectrum_maximum, variational_spectrum


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

@dataclass
class LocalizedTarget:
    """``xi`` encoded as one value per admissible ``N``-word.

    ``oscillation`` is the largest change of ``xi`` between a depth-``N``
    cell and its children (when the generating function is known).
    ``interval_image`` asserts that ``xi(Sigma_A)`` fills the convex hull of
    the sampled values, which licenses refinement between samples.
    """

    sft: object
    N: int
    table: np.ndarray
    oscillation: float | None = None
    interval_image: bool = False

    def __post_init__(self):
        self.table = np.atleast_2d(np.asarray(self.table, dtype=float))
        if self.table.shape[0] == 1 and self.sft.block(self.N).n != 1:
            self.table = self.table.T if self.table.shape[1] == self.sft.block(self.N).n else self.table
        if self.table.shape[0] != self.sft.block(self.N).n:
            raise ValueError("target table must have one row per admissible N-word")

    @property
    def d(self):
        return self.table.shape[1]

    @classmethod
    def constant(cls, sft, alpha):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        return cls(sft, 1, np.tile(alpha, (sft.m, 1)), 0.0, True)

    @classmethod
    def from_function(cls, sft, N, fn, interval_image=False):
        """Table ``fn(w)`` over ``N``-words; oscillation probed one level deeper."""
        words = sft.block(N).words
        tab = np.vstack([np.atleast_1d(np.asarray(fn(w), dtype=float)) for w in words])
        idx = sft.block(N).index
        osc = 0.0
        for v in sft.block(N + 1).words:
            val = np.atleast_1d(np.asarray(fn(v), dtype=float))
            osc = max(osc, float(np.linalg.norm(val - tab[idx[v[:N]]])))
        return cls(sft, N, tab, osc, interval_image)

    @classmethod
    def from_ifs(cls, ifs: IfsSpec, N, fn=None, interval_image=True):
        """``xi = fn(chi(x))`` sampled at the attractor points of depth-``N`` cells."""
        fn = fn or (lambda p: p)
        _, pts = cell_points(ifs, N)
        tab = np.vstack([np.atleast_1d(fn(p)) for p in pts])
        _, deeper = cell_points(ifs, N + 1)
        parent = np.repeat(np.arange(len(pts)), ifs.N)
        dv = np.vstack([np.atleast_1d(fn(p)) for p in deeper])
        osc = float(np.linalg.norm(dv - tab[parent], axis=1).max())
        return cls(ifs.sft, N, tab, osc, interval_image)

    def value(self, w):
        w = tuple(w)
        if len(w) < self.N:
            w = w + self.sft.min_extension(w, self.N - len(w))
        return self.table[self.sft.block(self.N).index[w[:self.N]]]

    def image(self):
        return np.unique(self.table, axis=0)


# ---------------------------------------------------------------------------
# localized dimension
# ---------------------------------------------------------------------------

def _safe_spectrum(prob, a):
    try:
        return variational_spectrum(prob, a, strict=False)
    except Infeasible:
        return None


def localized_dimension(sft, metric, potential, target: LocalizedTarget, k, exhaustive_limit=64):
    """``sup{E(alpha) : alpha in xi(Sigma_A) n L_Phi}`` on the sampled image.

    With at most ``exhaustive_limit`` image points every one is evaluated;
    beyond that (``d = 1``) quasi-concavity reduces the search to the two
    samples bracketing the spectrum maximizer. With ``interval_image`` the
    best sample is refined by golden section (``d = 1``) or Nelder-Mead
    inside the sample hull (``d >= 2``).
    """
    prob = SpectralProblem(sft, metric, potential, k)
    hull = prob.hull
    img = target.image()
    inside = np.array([hull.contains(a) for a in img])
    if not inside.any():
        raise EmptyIntersection("no sampled value of xi lies in L_Phi")
    cand = img[inside]
    tstar, amax = spectrum_maximum(prob)
    if prob.d == 1 and len(cand) > exhaustive_limit:
        x = cand[:, 0]
        below = x[x <= amax[0]]
        above = x[x >= amax[0]]
        picks = ([below.max()] if len(below) else []) + ([above.min()] if len(above) else [])
        cand = np.array(picks)[:, None]
    results = [(pt.e_hat, pt) for pt in (_safe_spectrum(prob, a) for a in cand) if pt is not None]
    best_val, best = max(results, key=lambda t: t[0])
    best_alpha = best.alpha
    refined = False
    if target.interval_image and len(img) > 1:
        if prob.d == 1:
            lo, hi = float(cand[:, 0].min()), float(cand[:, 0].max())
            x0 = float(best_alpha[0])
            others = np.sort(cand[:, 0])
            i = int(np.searchsorted(others, x0))
            a = others[max(i - 1, 0)]
            b = others[min(i + 1, len(others) - 1)]
            a, b = max(a, lo), min(b, hi)
            if b > a:
                res = minimize_scalar(lambda t: -(_val(prob, [t])), bounds=(a, b), method="bounded",
                                      options={"xatol": 1e-12})
                if -res.fun > best_val:
                    best_val, best_alpha, refined = -res.fun, np.array([res.x]), True
        else:
            best_val, best_alpha, refined = _polish_nd(prob, cand, best_alpha, best_val)
    riL = bool(hull.in_relative_interior(best_alpha))
    hyp = bool(inside.all()) if prob.d == 1 else riL
    return {
        "value": float(best_val),
        "alpha": np.asarray(best_alpha, dtype=float),
        "in_riL": riL,
        "hypothesis_verified": hyp,
        "refined": refined,
        "candidates": int(len(cand)),
        "outside_L": int((~inside).sum()),
        "spectrum_max": tstar,
        "alpha_max": amax,
        "k": k,
    }


def _val(prob, a):
    pt = _safe_spectrum(prob, np.asarray(a, dtype=float))
    return -np.inf if pt is None else pt.e_hat


def _polish_nd(prob, cand, x0, v0):
    from scipy.optimize import minimize
    from scipy.spatial import Delaunay

    try:
        tri = Delaunay(cand)
    except Exception:
        return v0, x0, False

    def neg(a):
        if tri.find_simplex(a) < 0:
            return 1e6
        return -_val(prob, a)

    res = minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400})
    if -res.fun > v0:
        return float(-res.fun), res.x, True
    return v0, x0, False


# ---------------------------------------------------------------------------
# fixed points in asymptotic average
# ---------------------------------------------------------------------------

def _project_hull(V, a):
    big = 1e3 * max(1.0, float(np.abs(V).max()))
    M = np.vstack([V.T, big * np.ones(len(V))])
    lam, _ = nnls(M, np.r_[a, big])
    lam = lam / lam.sum()
    return lam @ V


def fixed_point_set_dimension(ifs: IfsSpec, k=4, depth=6, tol=1e-9, max_cells=200_000, reduce=True):
    """``sup{E(alpha) : alpha in J}`` for the identity potential, by branch and bound.

    Lower bounds are spectrum values at attractor points of cells; the
    upper bound for a cell ``f_w(J)`` uses weak duality: for the dual
    vector ``q`` of the point of the cell hull nearest the spectrum
    maximizer, ``E <= T_q(v)`` with ``v`` the hull vertex minimizing
    ``q . v``. Cells deeper than ``depth`` are not split; their bounds
    are reported as the residual bracket.

    For a homogeneous IFS every window of the identity table has the same
    invariant-measure averages as ``fix f_{x_1}``, so with ``reduce`` the
    problem is solved at window 1 with no change in value.
    """
    k_eff = 1 if (reduce and ifs.homogeneous) else k
    prob = SpectralProblem(ifs.sft, ifs.metric, identity_potential(ifs, k_eff), k_eff)
    tstar, amax = spectrum_maximum(prob)
    fix = ifs.fixed_points

    def cell_geometry(w):
        pts = np.vstack([ifs.apply(w, p) for p in fix])
        point = ifs.apply(w, fix[w[-1]])
        return pts, point

    def bound(V):
        p = _project_hull(V, amax)
        if np.linalg.norm(p - amax) <= 1e-12:
            return tstar
        pt = _safe_spectrum(prob, p)
        if pt is None:
            return tstar
        q = pt.q_star
        v = V[int(np.argmin(V @ q))]
        T, _, _ = prob.solve_T(q, v)
        return min(max(float(T), pt.e_hat), tstar)

    best_val, best_alpha = -np.inf, None
    heap = []
    explored = 0
    if ifs.tiles:
        # the attractor is the hull of the fixed points, which contains alpha_max
        best_val, best_alpha = tstar, amax
    if best_val >= tstar - tol:
        return _fixed_report(best_val, best_alpha, best_val, tstar, amax, explored, k, k_eff, depth)
    for j in range(ifs.N):
        w = (j,)
        V, point = cell_geometry(w)
        val = _val(prob, point)
        explored += 1
        if val > best_val:
            best_val, best_alpha = val, point
        heapq.heappush(heap, (-bound(V), w))
    residual = -np.inf
    while heap:
        negub, w = heapq.heappop(heap)
        ub = -negub
        if ub <= best_val + tol:
            break
        if len(w) >= depth or explored >= max_cells:
            residual = max(residual, ub)
            continue
        for j in range(ifs.N):
            v = w + (j,)
            V, point = cell_geometry(v)
            val = _val(prob, point)
            explored += 1
            if val > best_val:
                best_val, best_alpha = val, point
            heapq.heappush(heap, (-bound(V), v))
    return _fixed_report(best_val, best_alpha, max(best_val, residual), tstar, amax, explored, k, k_eff, depth)


def _fixed_report(val, alpha, upper, tstar, amax, cells, k, k_eff, depth):
    return {
        "value": float(val),
        "alpha": np.asarray(alpha),
        "upper": float(upper),
        "full_dimension": float(tstar),
        "alpha_max": amax,
        "is_full": bool(val >= tstar - 1e-9),
        "cells": cells,
        "k": k,
        "k_effective": k_eff,
        "depth": depth,
    }


# ---------------------------------------------------------------------------
# Moran sampler
# ---------------------------------------------------------------------------

@dataclass
class MoranSampleReport:
    """Sample path of the concatenated measure and its diagnostics."""

    seed: int
    sequence: np.ndarray
    boundaries: list
    records: list
    mass_error: float
    flags: list = field(default_factory=list)
    nets: list = field(default_factory=list)

    def deviation_at(self, n):
        for r in self.records:
            if r["n"] == n:
                return r["deviation"]
        raise KeyError(n)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "deviation", "log_rho", "log_diam", "local_dim"])
        for r in self.records:
            w.writerow([r["n"], f"{r['deviation']:.17g}", f"{r['log_rho']:.17g}", f"{r['log_diam']:.17g}",
                        f"{r['local_dim']:.17g}"])
        return buf.getvalue()


class _Chain:
    """Sampling tables of one order-``k`` Markov measure."""

    def __init__(self, mu):
        b = mu.block
        self.mu = mu
        self.dst = b.dst.tolist()
        self.ptr = b.indptr.tolist()
        self.cum = []
        for s in range(b.n):
            lo, hi = self.ptr[s], self.ptr[s + 1]
            c = np.cumsum(mu.edge_p[lo:hi])
            c[-1] = 1.0
            self.cum.append(c.tolist())
        self.logp = np.log(mu.edge_p)
        self.log_pi = np.log(mu.pi)

    def run(self, state, u):
        """Advance from ``state`` with uniforms ``u``; returns states and log-probabilities."""
        cum, ptr, dst = self.cum, self.ptr, self.dst
        states = []
        logs = []
        for x in u:
            row = cum[state]
            i = bisect.bisect_right(row, x)
            if i == len(row):
                i -= 1
            p = row[i] - (row[i - 1] if i else 0.0)
            state = dst[ptr[state] + i]
            states.append(state)
            logs.append(p)
        return state, states, np.log(np.asarray(logs))


def _net_point(hull, xi, level, j0):
    mesh = 2.0 ** (-(level + j0))
    lo = hull.vertices.min(axis=0)
    a = lo + mesh * np.round((xi - lo) / mesh)
    if not hull.in_relative_interior(a):
        a = hull.clamp(hull.project(a), shrink=mesh)[0]
    return a


def moran_sampler(sft, potential, target: LocalizedTarget, block_lengths, seed=0, metric=None, k=None,
                  j0=6, g0=None, record_at=(), min_block=8, cache=None):
    """Sample one point of the Moran construction.

    At stage ``j`` the net point ``alpha_w`` nearest to ``xi`` at the current
    prefix (mesh ``2^-(j + j0)`` over ``L_Phi``) selects the equilibrium
    Markov measure realizing ``E(alpha_w)``; the next ``L_j`` symbols are
    drawn from it, conditioned on the last ``k``-word. Stage ``j`` uses the
    generator ``SeedSequence([seed, j])``.

    ``cache`` (a dict) may be shared between calls on the same model to
    reuse the spectral problem and the equilibrium chains.
    """
    if metric is None:
        from .gibbs_metric import WeakGibbsMetric

        metric = WeakGibbsMetric.standard(sft)
    k = k or max(potential.window, metric.psi.window)
    cache = {} if cache is None else cache
    prob = cache.get("problem")
    if prob is None or prob.k != k:
        prob = cache["problem"] = SpectralProblem(sft, metric, potential, k)
        cache["chains"] = {}
    hull = prob.hull
    block = prob.block
    L = [int(x) for x in block_lengths]
    flags = []
    if any(l < max(min_block, k + 1) for l in L):
        flags.append("schedule_too_fast")
    if any(b < a for a, b in zip(L, L[1:])):
        flags.append("schedule_not_monotone")
    chains = cache["chains"]

    def chain_for(alpha):
        key = tuple(np.round(alpha, 15))
        ch = chains.get(key)
        if ch is None:
            pt = variational_spectrum(prob, alpha, strict=False)
            q, T = pt.q_star, pt.e_hat
            f = (prob.F - pt.alpha_used) @ q + T * prob.g
            ch = _Chain(markov_from_perron(block, f, perron(block, f)))
            chains[key] = ch
        return ch

    g0 = g0 or max(k, target.N)
    rng0 = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    start_alpha = _net_point(hull, target.table.mean(axis=0), 0, j0)
    ch0 = chain_for(start_alpha)
    s = int(rng0.choice(block.n, p=ch0.mu.pi))
    seq_states = [s]
    _, sts, _ = ch0.run(s, rng0.random(g0 - k))
    seq_states += sts
    symbols = list(block.words[s]) + [block.words[t][-1] for t in sts]
    state = seq_states[-1]
    inc_logs = [np.zeros(len(symbols))]
    blocks = []
    nets = []
    for j, Lj in enumerate(L, start=1):
        xi = target.value(symbols)
        alpha = _net_point(hull, xi, j, j0)
        ch = chain_for(alpha)
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        start_state = state
        state, sts, lp = ch.run(state, rng.random(Lj))
        symbols += [block.words[t][-1] for t in sts]
        inc_logs.append(lp)
        blocks.append((start_state, sts, ch))
        nets.append(alpha.tolist())
    seq = np.asarray(symbols, dtype=np.int64)
    log_rho = np.concatenate([[0.0], np.cumsum(np.concatenate(inc_logs))[g0:]])
    # log_rho[i] = log rho([x | g0 + i])

    # per-block recomputation of the mass from the measure's own tables
    recomputed = []
    mass_err = 0.0
    for j, (start_state, sts, ch) in enumerate(blocks, start=1):
        b = ch.mu.block
        prev = start_state
        terms = []
        for t in sts:
            lo = b.indptr[prev]
            e = lo + int(np.searchsorted(b.dst[lo:b.indptr[prev + 1]], t))
            terms.append(ch.logp[e])
            prev = t
        # nu([t_w v]) = mu([t_w v]) / mu([t_w])
        recomputed.append((ch.log_pi[start_state] + math.fsum(terms)) - ch.log_pi[start_state])
        incremental = math.fsum(np.concatenate(inc_logs[1:j + 1]))
        mass_err = max(mass_err, abs(math.fsum(recomputed) - incremental))

    # Birkhoff sums and diameters along the path
    pk = potential.lifted(k) if potential.window < k else potential
    idx = sft.block(pk.window).index
    W = pk.window
    win_vals = pk.table[[idx[tuple(symbols[t:t + W])] for t in range(len(symbols) - W + 1)]]
    cum_phi = np.vstack([np.zeros(pk.d), np.cumsum(win_vals, axis=0)])
    psi = metric.psi
    Wp = psi.window
    idxp = sft.block(Wp).index
    pv = psi.table[[idxp[tuple(symbols[t:t + Wp])] for t in range(len(symbols) - Wp + 1)], 0]
    cum_psi = np.r_[0.0, np.cumsum(pv)]
    tails = psi._tail_bounds()
    xi_x = target.value(symbols)

    total = len(symbols)
    boundaries = list(np.cumsum([g0] + L))
    ns = sorted(set([b for b in boundaries if b > g0] + [int(n) for n in record_at if g0 < n <= total - W + 1]))
    records = []
    for n in ns:
        n = int(min(n, total - W + 1))
        avg = cum_phi[n] / n
        dev = float(np.linalg.norm(avg - xi_x))
        fixed = cum_psi[n - Wp + 1] if n >= Wp else 0.0
        tail = tails[tuple(symbols[n - Wp + 1:n])][1][0] if Wp > 1 else 0.0
        log_diam = float(fixed + tail)
        lr = float(log_rho[n - g0])
        records.append({"n": n, "deviation": dev, "log_rho": lr, "log_diam": log_diam,
                        "local_dim": lr / log_diam if log_diam != 0 else float("nan")})
    return MoranSampleReport(seed=seed, sequence=seq, boundaries=[int(b) for b in boundaries],
                             records=records, mass_error=float(mass_err), flags=flags, nets=nets)


def moran_batch(sft, potential, target, block_lengths, seeds, threads=1, **kw):
    """:func:`moran_sampler` over several seeds; reports come back in seed order."""
    cache = {}
    first = moran_sampler(sft, potential, target, block_lengths, seed=seeds[0], cache=cache, **kw)
    rest = list(seeds[1:])
    run = lambda s: moran_sampler(sft, potential, target, block_lengths, seed=s, cache=cache, **kw)
    if threads > 1 and rest:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return [first] + list(ex.map(run, rest))
    return [first] + [run(s) for s in rest]
