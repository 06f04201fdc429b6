"""Weak Gibbs metrics, their ball covers ``B_n`` and the full dimension.

A cylinder ``[w]`` has diameter ``Psi[w] = exp(sup psi_|w| on [w])`` and
``B_n`` collects the words with ``Psi[w] <= e^{-n} < Psi[w*]``.

Two ways of producing ``B_n`` are offered. :func:`ball_cover` lists the
words (DFS over the prefix tree, capped). :func:`cover_classes` never
lists them: for locally constant ``psi`` (and optionally a locally constant
``phi`` to be counted against) words are grouped by their last ``K - 1``
symbols and their accumulated sums, which is all the cover test and the
counting test look at.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_COVER_CAP, budget
from .errors import BudgetExceeded, ModelError
from .potentials import LocallyConstant, Potential
from .pressure import pressure_exact


def tie_tol(n):
    return 1e-12 * max(1.0, float(n))


class WeakGibbsMetric:
    """Metric ``d_Psi`` induced by a negative scalar potential.

    Parameters
    ----------
    psi : Potential
        Scalar potential with ``Psi_max < 0``.
    """

    def __init__(self, psi: Potential):
        if psi.d != 1:
            raise ModelError("metric potential must be scalar")
        if not float(psi.phi_max[0]) < 0:
            raise ModelError(f"metric potential needs Psi_max < 0, got {float(psi.phi_max[0])}")
        self.psi = psi
        self.sft = psi.sft

    @classmethod
    def standard(cls, sft):
        """``psi = -log m``, so that ``Psi[w] = m^{-|w|}``."""
        return cls(LocallyConstant.constant(sft, -np.log(sft.m), "standard"))

    @property
    def psi_max(self):
        return float(self.psi.phi_max[0])

    @property
    def psi_min(self):
        return float(self.psi.phi_min[0])

    @property
    def C1(self):
        return 1.0 / abs(self.psi_min)

    @property
    def C2(self):
        return 1.0 + 1.0 / abs(self.psi_max)

    def log_diameter(self, w):
        return float(self.psi.upper(w)[0])

    def diameter(self, w):
        return float(np.exp(self.log_diameter(w)))


def cylinder_diameter(metric, w):
    """``Psi[w]``."""
    return metric.diameter(w)


# ---------------------------------------------------------------------------
# explicit covers
# ---------------------------------------------------------------------------

def ball_cover(metric, n, cap=None):
    """``B_n(Psi)`` as a lexicographically ordered list of words."""
    if n < 0:
        raise ValueError("n must be >= 0")
    cap = budget(DEFAULT_COVER_CAP) if cap is None else cap
    sft = metric.sft
    psi = metric.psi
    thr = -n + tie_tol(n)
    succ = sft.successors
    out = []
    if isinstance(psi, LocallyConstant):
        k = psi.window
        idx = sft.block(k).index
        f = psi.table[:, 0]
        tails = psi._tail_bounds()

        def upper(w, fixed):
            if len(w) >= k - 1:
                return fixed + tails[w[len(w) - k + 1:] if k > 1 else ()][1][0]
            return float(psi.upper(w)[0])

        stack = [((s,), f[s] if k == 1 else 0.0) for s in reversed(range(sft.m))]
        while stack:
            w, fixed = stack.pop()
            if upper(w, fixed) <= thr:
                out.append(w)
                if len(out) > cap:
                    raise BudgetExceeded(f"B_{n} has more than {cap} words")
                continue
            for a in reversed(succ[w[-1]]):
                v = w + (a,)
                fv = fixed + f[idx[v[-k:]]] if len(v) >= k else fixed
                stack.append((v, fv))
        return out
    stack = [(s,) for s in reversed(range(sft.m))]
    while stack:
        w = stack.pop()
        if metric.log_diameter(w) <= thr:
            out.append(w)
            if len(out) > cap:
                raise BudgetExceeded(f"B_{n} has more than {cap} words")
            continue
        stack.extend(w + (a,) for a in reversed(succ[w[-1]]))
    return out


# ---------------------------------------------------------------------------
# aggregated covers
# ---------------------------------------------------------------------------

@dataclass
class CoverClasses:
    """``B_n`` grouped into classes of words sharing length and sums.

    ``lo``/``hi`` bound ``phi_|u|`` on each cylinder (coordinate box) and
    ``counts`` holds the number of words in each class (float, exact
    below ``2**53``).
    """

    n: int
    lengths: np.ndarray
    log_diam: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    counts: np.ndarray

    @property
    def total(self):
        return float(self.counts.sum())

    def averages(self):
        L = self.lengths[:, None].astype(float)
        return self.lo / L, self.hi / L

    def distances(self, alphas):
        """Distance from each ``alpha`` (rows) to each class box of averages."""
        a = np.atleast_2d(np.asarray(alphas, dtype=float))
        lo, hi = self.averages()
        gap = np.maximum(lo[None, :, :] - a[:, None, :], 0.0) + np.maximum(a[:, None, :] - hi[None, :, :], 0.0)
        return np.sqrt((gap ** 2).sum(axis=2))

    def count_near(self, alphas, eps):
        """``f(alpha, n, eps)`` for each alpha: words whose box meets the open ball."""
        dist = self.distances(alphas)
        return ((dist < eps - 1e-12) * self.counts[None, :]).sum(axis=1)


def _lift_pair(metric, potential):
    sft = metric.sft
    pots = [metric.psi] + ([potential] if potential is not None else [])
    for p in pots:
        if not isinstance(p, LocallyConstant):
            return None
    K = max(2, max(p.window for p in pots))
    return K, [p.lifted(K) for p in pots]


def cover_classes(metric, n, potential=None, cap=None, key_tol=1e-9):
    """Aggregated ``B_n``; falls back to :func:`ball_cover` when not locally constant."""
    cap = budget(DEFAULT_COVER_CAP) if cap is None else cap
    sft = metric.sft
    lifted = _lift_pair(metric, potential)
    if lifted is None:
        return _classes_from_words(metric, n, potential, cap)
    K, pots = lifted
    psi = pots[0]
    phi = pots[1] if potential is not None else None
    d = phi.d if phi is not None else 1
    thr = -n + tie_tol(n)
    out_len, out_ld, out_lo, out_hi, out_c = [], [], [], [], []

    # short words are checked one by one
    frontier = [(s,) for s in range(sft.m)]
    for _ in range(K - 2):
        nxt = []
        for w in frontier:
            ld = float(psi.upper(w)[0])
            if ld <= thr:
                lo, hi = phi.eval_on_cylinder(w) if phi is not None else (np.zeros(d), np.zeros(d))
                out_len.append(len(w))
                out_ld.append(ld)
                out_lo.append(lo)
                out_hi.append(hi)
                out_c.append(1.0)
            else:
                nxt.extend(w + (a,) for a in sft.successors[w[-1]])
        frontier = nxt

    sb = sft.block(K - 1)
    bK = sft.block(K)
    edge_word = np.asarray([bK.index[sb.words[s] + (sb.words[t][-1],)]
                            for s, t in zip(sb.src, sb.dst)], dtype=np.int64)
    psiK = psi.table[:, 0]
    phiK = phi.table if phi is not None else np.zeros((bK.n, d))
    tp = psi._tail_bounds()
    t_psi = np.array([tp[u][1][0] for u in sb.words])
    if phi is not None:
        tf = phi._tail_bounds()
        t_lo = np.vstack([tf[u][0] for u in sb.words])
        t_hi = np.vstack([tf[u][1] for u in sb.words])
    else:
        t_lo = t_hi = np.zeros((sb.n, d))

    state = np.asarray([sb.index[w] for w in frontier], dtype=np.int64)
    s_psi = np.zeros(len(state))
    s_phi = np.zeros((len(state), d))
    cnt = np.ones(len(state))
    length = K - 1
    while len(state):
        ld = s_psi + t_psi[state]
        done = ld <= thr
        if done.any():
            out_len.append(np.full(int(done.sum()), length))
            out_ld.append(ld[done])
            out_lo.append(s_phi[done] + t_lo[state[done]])
            out_hi.append(s_phi[done] + t_hi[state[done]])
            out_c.append(cnt[done])
        keep = ~done
        state, s_psi, s_phi, cnt = state[keep], s_psi[keep], s_phi[keep], cnt[keep]
        if not len(state):
            break
        # expand along the order-(K-1) edges
        starts = sb.indptr[state]
        deg = sb.indptr[state + 1] - starts
        parent = np.repeat(np.arange(len(state)), deg)
        edges = np.repeat(starts - np.cumsum(np.r_[0, deg[:-1]]), deg) + np.arange(deg.sum())
        word = edge_word[edges]
        state = sb.dst[edges]
        s_psi = s_psi[parent] + psiK[word]
        s_phi = s_phi[parent] + phiK[word]
        cnt = cnt[parent]
        length += 1
        # merge equal classes
        q = np.column_stack([state.astype(float),
                             np.round(s_psi / key_tol),
                             np.round(s_phi / key_tol)])
        _, first, inv = np.unique(q, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        cnt = np.bincount(inv, weights=cnt)
        state, s_psi, s_phi = state[first], s_psi[first], s_phi[first]
        if len(state) > cap:
            raise BudgetExceeded(f"more than {cap} cover classes at length {length}")
    return _pack(n, out_len, out_ld, out_lo, out_hi, out_c, d)


def _pack(n, lens, lds, los, his, cs, d):
    def cat(parts, shape):
        parts = [np.asarray(p, dtype=float).reshape(shape) for p in parts]
        return np.concatenate(parts) if parts else np.zeros((0,) + shape[1:])

    return CoverClasses(
        n=n,
        lengths=cat(lens, (-1,)).astype(np.int64),
        log_diam=cat(lds, (-1,)),
        lo=cat(los, (-1, d)),
        hi=cat(his, (-1, d)),
        counts=cat(cs, (-1,)),
    )


def _classes_from_words(metric, n, potential, cap):
    words = ball_cover(metric, n, cap)
    d = potential.d if potential is not None else 1
    lens, lds, los, his = [], [], [], []
    for w in words:
        lens.append(len(w))
        lds.append(metric.log_diameter(w))
        if potential is not None:
            lo, hi = potential.eval_on_cylinder(w)
        else:
            lo = hi = np.zeros(d)
        los.append(lo)
        his.append(hi)
    return _pack(n, lens, lds, los, his, [np.ones(len(words))], d)


def cover_count(metric, n, cap=None):
    """``#B_n(Psi)`` without listing the words."""
    return cover_classes(metric, n, cap=cap).total


# ---------------------------------------------------------------------------
# full dimension
# ---------------------------------------------------------------------------

def bowen_root(metric, xtol=1e-15):
    """Root ``t*`` of ``P(t psi) = 0`` (psi locally constant)."""
    psi = metric.psi
    if not isinstance(psi, LocallyConstant):
        raise ModelError("the Bowen root needs a locally constant psi")
    sft = metric.sft
    h = pressure_exact(sft, psi.scaled(0.0))
    hi = 1.01 * h / abs(metric.psi_max) + 1e-9
    return brentq(lambda t: pressure_exact(sft, psi.scaled(t)), 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def full_dimension(metric, n_max, cap=None):
    """Counting estimate ``log #B_n / n`` at ``n_max`` and the Bowen root."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    count = cover_count(metric, n_max, cap)
    D_hat = float(np.log(count) / n_max)
    out = {
        "n": n_max,
        "count": count,
        "D_hat": D_hat,
        "upper_bound": (1.0 + 1.0 / abs(metric.psi_max)) * float(np.log(metric.sft.m)),
        "C1": metric.C1,
        "C2": metric.C2,
    }
    if isinstance(metric.psi, LocallyConstant):
        out["bowen_root"] = float(bowen_root(metric))
    return out


def load_metric(source, sft):
    from .potentials import load_potential

    return WeakGibbsMetric(load_potential(source, sft))
