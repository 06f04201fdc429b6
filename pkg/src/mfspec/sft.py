"""Topologically mixing subshifts of finite type and their word combinatorics.

Symbols are 0-based internally (``0..m-1``); anything read from or written to
disk uses 1-based symbols. Words are plain tuples of ints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull

from .config import DEFAULT_CYCLE_BUDGET, budget
from .errors import GraphTooLarge, InadmissibleWord, ModelError, NotPrimitive

Word = tuple


# ---------------------------------------------------------------------------
# word notation
# ---------------------------------------------------------------------------

def parse_word(text, m=None):
    """Parse an external 1-based word into an internal tuple.

    ``"21221"`` is read digit by digit; a comma separated form such as
    ``"10,2,3"`` is needed once the alphabet has ten or more symbols.
    """
    text = str(text).strip()
    if text == "":
        return ()
    if "," in text or " " in text:
        parts = [p for p in text.replace(",", " ").split() if p]
        w = tuple(int(p) - 1 for p in parts)
    else:
        if m is not None and m > 9:
            raise ValueError(f"word {text!r} is ambiguous for alphabet size {m}; use commas")
        w = tuple(int(c) - 1 for c in text)
    if any(s < 0 for s in w) or (m is not None and any(s >= m for s in w)):
        raise ValueError(f"word {text!r} uses symbols outside 1..{m}")
    return w


def format_word(w, m=None):
    if m is not None and m > 9:
        return ",".join(str(s + 1) for s in w)
    return "".join(str(s + 1) for s in w)


# ---------------------------------------------------------------------------
# primitivity and connecting words
# ---------------------------------------------------------------------------

def _as_01(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelError(f"transition matrix must be square, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise ModelError("transition matrix entries must be 0 or 1")
    return A.astype(np.int64)


def check_primitive(A, max_exponent=64):
    """Smallest ``p0 <= max_exponent`` with ``A**p0`` entrywise positive.

    Powers are taken in the boolean semiring, so there is no overflow.
    """
    B = _as_01(A) > 0
    P = B.copy()
    Bi = B.astype(np.int64)
    for p in range(1, int(max_exponent) + 1):
        if P.all():
            return p
        P = (P.astype(np.int64) @ Bi) > 0
    raise NotPrimitive(f"A^p has a zero entry for every p <= {max_exponent}")


def _connecting_words(A, p0):
    m = A.shape[0]
    Ab = A > 0
    # reach[r][s, j]: a path of exactly r edges leads from s to j
    Ai = Ab.astype(np.int64)
    reach = [np.eye(m, dtype=bool)]
    for _ in range(p0 + 1):
        reach.append((reach[-1].astype(np.int64) @ Ai) > 0)
    W = {}
    for i in range(m):
        for j in range(m):
            prev, w = i, []
            for t in range(1, p0 + 1):
                rest = p0 - t + 1
                for s in range(m):
                    if Ab[prev, s] and reach[rest][s, j]:
                        w.append(s)
                        prev = s
                        break
                else:  # pragma: no cover - excluded by primitivity
                    raise NotPrimitive(f"no connecting word for ({i + 1},{j + 1})")
            W[(i, j)] = tuple(w)
    return W


def build_connecting_words(sft):
    """Lexicographically smallest ``w(i,j)`` of length ``p0`` per symbol pair."""
    return _connecting_words(sft.A, sft.p0)


# ---------------------------------------------------------------------------
# the shift itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Sft:
    A: np.ndarray
    p0: int
    W: dict
    _blocks: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_matrix(cls, A, max_p0=64):
        A = _as_01(A)
        if A.shape[0] < 2:
            raise ModelError("alphabet size must be at least 2")
        if not (A.sum(axis=1) > 0).all() or not (A.sum(axis=0) > 0).all():
            raise ModelError("every row and column of A needs a 1")
        p0 = check_primitive(A, max_p0)
        A = A.copy()
        A.setflags(write=False)
        return cls(A=A, p0=p0, W=_connecting_words(A, p0))

    @classmethod
    def full(cls, m):
        return cls.from_matrix(np.ones((m, m), dtype=np.int64))

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def successors(self):
        s = self._blocks.get("succ")
        if s is None:
            s = [tuple(int(j) for j in np.flatnonzero(row)) for row in self.A]
            self._blocks["succ"] = s
        return s

    def is_admissible(self, w):
        if len(w) == 0:
            return True
        if any((s < 0 or s >= self.m) for s in w):
            return False
        A = self.A
        return all(A[a, b] for a, b in zip(w[:-1], w[1:]))

    def require(self, w):
        w = tuple(int(s) for s in w)
        if not self.is_admissible(w):
            raise InadmissibleWord(f"word {format_word(w, self.m)} is not admissible")
        return w

    def words(self, n):
        return enumerate_words(self, n)

    def count_words(self, n):
        """Number of admissible words of length ``n`` (exact integer)."""
        if n <= 0:
            return 1
        A = [[int(v) for v in row] for row in self.A]
        vec = [1] * self.m
        for _ in range(n - 1):
            vec = [sum(A[i][j] * vec[j] for j in range(self.m)) for i in range(self.m)]
        return sum(vec)

    def connect(self, u, v):
        """``u . w(u_last, v_first) . v``; both words must be non-empty."""
        return tuple(u) + self.W[(u[-1], v[0])] + tuple(v)

    def min_extension(self, w, length):
        """Lexicographically smallest admissible continuation of ``w``."""
        out = []
        prev = w[-1] if len(w) else None
        for _ in range(length):
            s = 0 if prev is None else self.successors[prev][0]
            out.append(s)
            prev = s
        return tuple(out)

    def block(self, k):
        """Order-``k`` higher-block graph, cached on the shift."""
        b = self._blocks.get(k)
        if b is None:
            b = HigherBlock(self, k)
            self._blocks[k] = b
        return b

    def to_dict(self):
        return {"m": self.m, "A": self.A.tolist(), "max_p0": self.p0}


def load_sft(source):
    """Build an :class:`Sft` from a JSON path, JSON text or a parsed dict."""
    doc = _read_json(source)
    if "A" not in doc:
        raise ModelError("shift model needs an 'A' matrix")
    A = np.asarray(doc["A"])
    if "m" in doc and int(doc["m"]) != A.shape[0]:
        raise ModelError(f"m={doc['m']} does not match A of size {A.shape[0]}")
    return Sft.from_matrix(A, int(doc.get("max_p0", 64)))


def _read_json(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        with open(source) as fh:
            return json.load(fh)
    return json.loads(source)


def enumerate_words(sft, n) -> Iterator[Word]:
    """Yield the admissible words of length ``n`` in lexicographic order."""
    if n < 1:
        raise ValueError("word length must be >= 1")
    succ = sft.successors
    word = []
    iters = [iter(range(sft.m))]
    while iters:
        s = next(iters[-1], None)
        if s is None:
            iters.pop()
            if word:
                word.pop()
            continue
        word.append(s)
        if len(word) == n:
            yield tuple(word)
            word.pop()
        else:
            iters.append(iter(succ[s]))


# ---------------------------------------------------------------------------
# higher-block recoding
# ---------------------------------------------------------------------------

class HigherBlock:
    """Graph whose vertices are the admissible ``k``-words.

    ``u -> v`` is an edge when ``v = u[1:] + (a,)`` and ``u + (a,)`` is
    admissible. Edges are stored sorted by source.
    """

    def __init__(self, sft, k):
        if k < 1:
            raise ValueError("block order must be >= 1")
        self.sft = sft
        self.k = k
        self.words = list(enumerate_words(sft, k))
        self.index = {w: i for i, w in enumerate(self.words)}
        src, dst = [], []
        succ = sft.successors
        for i, u in enumerate(self.words):
            for a in succ[u[-1]]:
                src.append(i)
                dst.append(self.index[u[1:] + (a,)])
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.n = len(self.words)
        self.adjacency = sp.csr_matrix(
            (np.ones(len(src)), (self.src, self.dst)), shape=(self.n, self.n))
        self.indptr = np.searchsorted(self.src, np.arange(self.n + 1))
        # appended symbol of each edge
        self.edge_symbol = np.asarray([self.words[j][-1] for j in dst], dtype=np.int64)
        self._prefix = {}

    def prefix_index(self, window):
        """Index of ``u[:window]`` in the order-``window`` block, per vertex."""
        if window > self.k:
            raise ValueError("window exceeds block order")
        idx = self._prefix.get(window)
        if idx is None:
            other = self.sft.block(window)
            idx = np.asarray([other.index[u[:window]] for u in self.words], dtype=np.int64)
            self._prefix[window] = idx
        return idx

    def last_symbols(self):
        return np.asarray([u[-1] for u in self.words], dtype=np.int64)

    def first_symbols(self):
        return np.asarray([u[0] for u in self.words], dtype=np.int64)

    def cycle_word(self, cycle):
        """Periodic symbol block traced by a vertex cycle."""
        return tuple(self.words[v][0] for v in cycle)


# ---------------------------------------------------------------------------
# mean cycles
# ---------------------------------------------------------------------------

def _karp_min(n, src, dst, w):
    """Karp's minimum mean cycle; returns ``(mean, vertex cycle)``."""
    D = np.full((n + 1, n), np.inf)
    D[0] = 0.0
    pred = np.full((n + 1, n), -1, dtype=np.int64)
    for k in range(1, n + 1):
        cand = D[k - 1][src] + w
        best = np.full(n, np.inf)
        np.minimum.at(best, dst, cand)
        hit = np.flatnonzero(np.isfinite(cand) & (cand == best[dst]))
        pred[k, dst[hit]] = hit
        D[k] = best
    finite = np.isfinite(D[n])
    with np.errstate(invalid="ignore"):
        ks = np.arange(n)[:, None]
        ratios = (D[n][None, :] - D[:n]) / (n - ks)
    ratios[~np.isfinite(D[:n])] = -np.inf
    vals = ratios.max(axis=0)
    vals[~finite] = np.inf
    v = int(np.argmin(vals))
    lam = float(vals[v])
    # walk back n edges from (n, v); a critical cycle sits on this walk
    walk = [v]
    node = v
    for k in range(n, 0, -1):
        e = pred[k, node]
        node = int(src[e])
        walk.append(node)
    walk.reverse()
    best_cycle, best_mean = None, np.inf
    last = {}
    edge_w = {}
    for e in range(len(src)):
        key = (int(src[e]), int(dst[e]))
        edge_w[key] = min(edge_w.get(key, np.inf), float(w[e]))
    for pos, node in enumerate(walk):
        if node in last:
            cyc = walk[last[node]:pos]
            mean = sum(edge_w[(cyc[i], cyc[(i + 1) % len(cyc)])] for i in range(len(cyc))) / len(cyc)
            if mean < best_mean:
                best_mean, best_cycle = mean, cyc
        last[node] = pos
    return lam, best_cycle


def _evaluate_policy(succ, pw):
    n = len(succ)
    state = [0] * n
    eta = [0.0] * n
    x = [0.0] * n
    for s in range(n):
        if state[s]:
            continue
        path = []
        u = s
        while state[u] == 0:
            state[u] = 1
            path.append(u)
            u = succ[u]
        if state[u] == 1:
            i = path.index(u)
            cyc = path[i:]
            mean = sum(pw[c] for c in cyc) / len(cyc)
            x[cyc[0]] = 0.0
            eta[cyc[0]] = mean
            for c in reversed(cyc[1:]):
                eta[c] = mean
                x[c] = pw[c] - mean + x[succ[c]]
            for c in cyc:
                state[c] = 2
            path = path[:i]
        for c in reversed(path):
            eta[c] = eta[succ[c]]
            x[c] = pw[c] - eta[c] + x[succ[c]]
            state[c] = 2
    return np.asarray(eta), np.asarray(x)


def _segment_argmax(values, src, n, mask=None):
    """Per-source argmax edge (first on ties); -1 where no edge qualifies."""
    vals = values if mask is None else np.where(mask, values, -np.inf)
    order = np.lexsort((np.arange(len(vals)), -vals, src))
    first = np.full(n, -1, dtype=np.int64)
    starts = np.r_[True, src[order][1:] != src[order][:-1]]
    first[src[order][starts]] = order[starts]
    if mask is not None:
        bad = first >= 0
        bad[bad] = ~np.isfinite(vals[first[bad]])
        first[bad] = -1
    return first


def _howard_max(n, src, dst, w, tol=1e-12, max_iter=100_000):
    """Howard policy iteration for the maximum mean cycle."""
    scale = max(1.0, float(np.abs(w).max()) if len(w) else 1.0)
    eps = tol * scale
    pol = _segment_argmax(w, src, n)
    dst_l = dst.tolist()
    for _ in range(max_iter):
        succ = [dst_l[e] for e in pol]
        pw = w[pol].tolist()
        eta, x = _evaluate_policy(succ, pw)
        eta_d = eta[dst]
        cand = _segment_argmax(eta_d, src, n)
        gain = eta[dst[cand]] - eta
        upd = gain > eps
        if upd.any():
            pol = np.where(upd, cand, pol)
            continue
        same = eta_d >= eta[src] - eps
        val = w - eta[src] + x[dst]
        cand = _segment_argmax(val, src, n, mask=same)
        ok = cand >= 0
        gain = np.full(n, -np.inf)
        gain[ok] = val[cand[ok]] - x[ok]
        upd = gain > eps * max(1.0, float(np.abs(x).max()))
        if not upd.any():
            break
        pol = np.where(upd, cand, pol)
    v = int(np.argmax(eta))
    succ = dst[pol]
    seen = {}
    node, pos = v, 0
    walk = []
    while node not in seen:
        seen[node] = pos
        walk.append(node)
        node = int(succ[node])
        pos += 1
    cyc = walk[seen[node]:]
    return float(eta[v]), cyc


KARP_LIMIT = 256


def max_mean_cycle(block, weights, method="auto"):
    """Maximum mean of ``weights`` (one value per vertex) over cycles.

    Returns ``(mean, cycle)`` where ``cycle`` lists vertex indices; the
    mean is recomputed from the cycle so it replays exactly.
    """
    weights = np.asarray(weights, dtype=float)
    ew = weights[block.src]
    if method == "auto":
        method = "karp" if block.n <= KARP_LIMIT else "howard"
    if method == "karp":
        _, cyc = _karp_min(block.n, block.src, block.dst, -ew)
    elif method == "howard":
        _, cyc = _howard_max(block.n, block.src, block.dst, ew)
    else:
        raise ValueError(f"unknown mean-cycle method {method!r}")
    return float(np.mean(weights[cyc])), list(cyc)


def min_mean_cycle(block, weights, method="auto"):
    mean, cyc = max_mean_cycle(block, -np.asarray(weights, dtype=float), method)
    return float(np.mean(np.asarray(weights, dtype=float)[cyc])), cyc


# ---------------------------------------------------------------------------
# the region of cycle means
# ---------------------------------------------------------------------------

@dataclass
class CycleHull:
    """Convex hull of cycle means, with its affine hull and facets.

    Facets are stored in affine-hull coordinates ``y = (a - origin) @ basis.T``
    as ``normals @ y <= offsets``.
    """

    d: int
    vertices: np.ndarray
    cycles: list
    origin: np.ndarray
    basis: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    tol: float = 1e-9

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def interval(self):
        if self.d != 1:
            raise ValueError("interval only defined for d = 1")
        v = self.vertices[:, 0]
        return float(v.min()), float(v.max())

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def _local(self, a):
        a = np.asarray(a, dtype=float).reshape(self.d)
        off = a - self.origin
        y = self.basis @ off if self.dim else np.zeros(0)
        resid = off - self.basis.T @ y if self.dim else off
        return y, float(np.linalg.norm(resid))

    def in_affine_hull(self, a, tol=None):
        tol = self.tol if tol is None else tol
        return self._local(a)[1] <= tol * max(1.0, self.scale)

    @property
    def scale(self):
        return float(np.abs(self.vertices).max()) if len(self.vertices) else 1.0

    def margin(self, a):
        """Signed distance to the relative boundary (positive inside)."""
        y, resid = self._local(a)
        if self.dim == 0:
            return -resid
        m = float(np.min(self.offsets - self.normals @ y))
        return m if resid <= self.tol * max(1.0, self.scale) else min(m, -resid)

    def contains(self, a, tol=None):
        tol = self.tol if tol is None else tol
        return self.margin(a) >= -tol * max(1.0, self.scale)

    def in_relative_interior(self, a, tol=None):
        tol = self.tol if tol is None else tol
        return self.dim > 0 and self.margin(a) > tol * max(1.0, self.scale)

    def clamp(self, a, tol=None, shrink=1e-9):
        """Move points within ``tol`` of the relative boundary inward.

        Returns ``(a', clamped)``; ``a'`` is ``a`` shrunk toward the vertex
        centroid by the factor ``1 - shrink``.
        """
        a = np.asarray(a, dtype=float).reshape(self.d)
        if self.in_relative_interior(a, tol) or self.dim == 0:
            return a, False
        c = self.centroid
        return c + (1.0 - shrink) * (a - c), True

    def project(self, a):
        """Closest point of the hull to ``a`` (Euclidean)."""
        from scipy.optimize import nnls

        a = np.asarray(a, dtype=float).reshape(self.d)
        V = self.vertices
        big = 1e3 * max(1.0, self.scale)
        M = np.vstack([V.T, big * np.ones(len(V))])
        rhs = np.r_[a, big]
        lam, _ = nnls(M, rhs)
        lam = lam / lam.sum()
        return lam @ V


def _affine_frame(P, tol):
    origin = P.mean(axis=0)
    X = P - origin
    if len(P) == 1:
        return origin, np.zeros((0, P.shape[1])), np.zeros((0, P.shape[1]))
    _, S, Vt = np.linalg.svd(X, full_matrices=True)
    scale = max(1.0, float(np.abs(P).max()))
    r = int((S > tol * scale).sum())
    return origin, Vt[:r], Vt[r:]


def _facets(P, origin, basis):
    r = basis.shape[0]
    if r == 0:
        return np.zeros((0, 0)), np.zeros(0)
    Y = (P - origin) @ basis.T
    if r == 1:
        y = Y[:, 0]
        return np.array([[1.0], [-1.0]]), np.array([y.max(), -y.min()])
    hull = ConvexHull(Y)
    eq = hull.equations
    return eq[:, :-1], -eq[:, -1]


def _hull_vertices(P, origin, basis):
    r = basis.shape[0]
    if r == 0:
        return np.array([0])
    Y = (P - origin) @ basis.T
    if r == 1:
        return np.unique([int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))])
    return np.asarray(ConvexHull(Y).vertices)


def _weight_table(block, weight):
    """Normalize a weight specification to an ``(n_vertices, d)`` array."""
    from .potentials import Potential

    if isinstance(weight, Potential):
        return weight.table_on(block)
    if isinstance(weight, dict):
        rows = [np.atleast_1d(np.asarray(weight[w], dtype=float)) for w in block.words]
        return np.vstack(rows)
    if callable(weight):
        return np.vstack([np.atleast_1d(np.asarray(weight(w), dtype=float)) for w in block.words])
    arr = np.asarray(weight, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] != block.n:
        raise ValueError(f"weight table has {arr.shape[0]} rows, block has {block.n} vertices")
    return arr


def _hull_from_points(points, cycles, tol):
    P = np.asarray(points, dtype=float)
    origin, basis, _ = _affine_frame(P, tol)
    keep = _hull_vertices(P, origin, basis)
    V = P[keep]
    cyc = [cycles[i] for i in keep]
    normals, offsets = _facets(V, origin, basis)
    return CycleHull(d=P.shape[1], vertices=V, cycles=cyc, origin=origin, basis=basis,
                     normals=normals, offsets=offsets, tol=tol)


def _support_hull(block, table, tol, max_rounds=10_000):
    d = table.shape[1]
    found = {}

    def query(direction):
        _, cyc = max_mean_cycle(block, table @ direction)
        p = table[cyc].mean(axis=0)
        key = tuple(np.round(p / max(tol, 1e-15)).astype(np.int64))
        new = key not in found
        if new:
            found[key] = (p, block.cycle_word(cyc))
        return p, new

    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        query(e)
        query(-e)
    for _ in range(max_rounds):
        P = np.array([v[0] for v in found.values()])
        origin, basis, comp = _affine_frame(P, tol)
        added = False
        for o in comp:
            for sgn in (1.0, -1.0):
                p, new = query(sgn * o)
                if new and abs((p - origin) @ o) > tol * max(1.0, float(np.abs(P).max())):
                    added = True
        if added:
            continue
        if basis.shape[0] == 0:
            break
        Vidx = _hull_vertices(P, origin, basis)
        normals, offsets = _facets(P[Vidx], origin, basis)
        for nrm, off in zip(normals, offsets):
            direction = nrm @ basis
            p, new = query(direction)
            reach = float((p - origin) @ direction)
            if new and reach > off + tol * max(1.0, float(np.abs(P).max())):
                added = True
        if not added:
            break
    pts = [v[0] for v in found.values()]
    cycles = [v[1] for v in found.values()]
    return _hull_from_points(pts, cycles, tol)


def _enumerated_hull(block, table, tol, cap):
    import networkx as nx

    G = nx.DiGraph()
    G.add_nodes_from(range(block.n))
    G.add_edges_from(zip(block.src.tolist(), block.dst.tolist()))
    pts, cycles = [], []
    for count, cyc in enumerate(nx.simple_cycles(G), start=1):
        if count > cap:
            raise GraphTooLarge(
                f"more than {cap} simple cycles in the order-{block.k} graph; lower k")
        pts.append(table[cyc].mean(axis=0))
        cycles.append(block.cycle_word(cyc))
    return _hull_from_points(pts, cycles, tol)


def cycle_mean_hull(sft, weight, k=1, method="auto", cycle_budget=None, tol=1e-9):
    """Region of cycle means of a weight on the order-``k`` block graph.

    ``weight`` is a Potential, a dict ``k-word -> vector``, a callable on
    ``k``-words, or an array aligned with ``sft.block(k).words``.

    For ``d = 1`` the interval endpoints come from min/max mean cycles. For
    ``d >= 2`` the default ``"support"`` method grows the exact hull by
    support queries (each one a max mean cycle); ``"enumerate"`` lists
    every simple cycle and fails with GraphTooLarge past the budget.
    """
    block = sft.block(k)
    table = _weight_table(block, weight)
    d = table.shape[1]
    if method == "enumerate":
        cap = budget(DEFAULT_CYCLE_BUDGET) if cycle_budget is None else cycle_budget
        return _enumerated_hull(block, table, tol, cap)
    if d == 1:
        lo, cmin = min_mean_cycle(block, table[:, 0])
        hi, cmax = max_mean_cycle(block, table[:, 0])
        pts = [np.array([lo]), np.array([hi])]
        cycles = [block.cycle_word(cmin), block.cycle_word(cmax)]
        if hi - lo <= tol * max(1.0, abs(hi), abs(lo)):
            pts, cycles = pts[:1], cycles[:1]
        return _hull_from_points(pts, cycles, tol)
    if method not in ("auto", "support"):
        raise ValueError(f"unknown hull method {method!r}")
    return _support_hull(block, table, tol)


def cyclic_mean(table_fn: Callable, period, k):
    """Mean of a window-``k`` function along the periodic point ``period^inf``."""
    p = len(period)
    ext = tuple(period) * (1 + (k + p - 1) // p)
    vals = [np.atleast_1d(np.asarray(table_fn(ext[t:t + k]), dtype=float)) for t in range(p)]
    return np.mean(vals, axis=0)
