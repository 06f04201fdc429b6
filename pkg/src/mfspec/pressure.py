"""Topological pressure and equilibrium Markov measures.

For a locally constant ``phi`` of window ``k`` the pressure is the log of
the Perron value of ``B[u, v] = exp(phi(u))`` on the order-``k`` block
graph. Almost additive inputs only get a rigorous bracket from the
partition sums ``Z_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, ModelError, WindowMismatch
from .potentials import LocallyConstant, MatrixCocycle, Potential, variation
from .sft import HigherBlock, enumerate_words

DENSE_LIMIT = 64


@dataclass
class Perron:
    """Perron data of a weighted block matrix.

    ``log_lambda`` is the pressure; ``r`` and ``l`` are the right and left
    Perron vectors (positive, ``l @ r = 1``); ``pi = l * r``.
    """

    log_lambda: float
    r: np.ndarray
    l: np.ndarray
    iterations: int = 0

    @property
    def pi(self):
        p = self.l * self.r
        return p / p.sum()


def _dense_perron(block, f):
    fmax = float(f.max())
    B = np.zeros((block.n, block.n))
    B[block.src, block.dst] = np.exp(f[block.src] - fmax)
    vals, vecs = np.linalg.eig(B)
    i = int(np.argmax(vals.real))
    lam = float(vals[i].real)
    r = np.abs(vecs[:, i].real)
    valsT, vecsT = np.linalg.eig(B.T)
    j = int(np.argmax(valsT.real))
    l = np.abs(vecsT[:, j].real)
    # one refinement step tidies the tiny negative/imaginary noise
    r = B @ r / lam
    l = B.T @ l / lam
    l = l / (l @ r)
    return Perron(float(np.log(lam) + fmax), r, l, 0)


def _adjacency(block):
    A = getattr(block, "_adj_csr", None)
    if A is None:
        A = block.adjacency.tocsr()
        block._adj_csr = A
        block._adjT_csr = A.T.tocsr()
    return A, block._adjT_csr


def _power(matvec, n, x0, rtol, max_iter):
    """Power iteration with Collatz-Wielandt stopping; returns (lam, x, its)."""
    x = np.ones(n) if x0 is None else np.maximum(np.asarray(x0, dtype=float), 1e-300)
    x = x / x.sum()
    for it in range(1, max_iter + 1):
        y = matvec(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = y / x
        lo, hi = float(ratio.min()), float(ratio.max())
        x = y / y.sum()
        if hi - lo <= rtol * hi:
            return 0.5 * (lo + hi), x, it
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def perron(block: HigherBlock, f, warm: Perron | None = None, rtol=1e-13, max_iter=100_000):
    """Perron value and vectors of ``B[u, v] = exp(f[u])`` on block edges."""
    f = np.asarray(f, dtype=float)
    if f.shape != (block.n,):
        raise ValueError(f"need one log-weight per block vertex ({block.n})")
    if block.n <= DENSE_LIMIT:
        return _dense_perron(block, f)
    fmax = float(f.max())
    w = np.exp(f - fmax)
    A, AT = _adjacency(block)
    try:
        lam, r, it1 = _power(lambda x: w * (A @ x), block.n, None if warm is None else warm.r, rtol, max_iter)
        _, l, it2 = _power(lambda y: AT @ (w * y), block.n, None if warm is None else warm.l, rtol, max_iter)
    except ConvergenceError:
        B = sp.csr_matrix((w[block.src], (block.src, block.dst)), shape=(block.n, block.n))
        vals, vecs = spla.eigs(B, k=1, which="LM")
        lam = float(vals[0].real)
        r = np.abs(vecs[:, 0].real)
        _, vecsT = spla.eigs(B.T.tocsr(), k=1, which="LM")
        l = np.abs(vecsT[:, 0].real)
        it1 = it2 = max_iter
    l = l / (l @ r)
    return Perron(float(np.log(lam) + fmax), r, l, it1 + it2)


def log_weights(potential, block):
    """Scalar log-weights of a potential on the vertices of ``block``."""
    if not isinstance(potential, LocallyConstant):
        raise ModelError("exact pressure needs a locally constant potential; discretize first")
    t = potential.table_on(block)
    if t.shape[1] != 1:
        raise ModelError("pressure needs a scalar potential")
    return t[:, 0]


def pressure_exact(sft, potential, k=None):
    """``P(T, phi)`` for a scalar locally constant potential."""
    k = potential.window if k is None else k
    block = sft.block(k)
    return perron(block, log_weights(potential, block)).log_lambda


# ---------------------------------------------------------------------------
# partition sums and the bracket
# ---------------------------------------------------------------------------

def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else float(out.ravel()[0])


def cocycle_log_norms(cocycle: MatrixCocycle, n):
    """``log ||M_w||`` for every admissible ``n``-word, in lexicographic order."""
    sft = cocycle.sft
    mats = np.stack(cocycle.matrices)
    D = cocycle.dim
    prods = mats.copy()
    scale = np.zeros(sft.m)
    last = np.arange(sft.m)
    for _ in range(n - 1):
        kids_parent, kids_sym = [], []
        for i, s in enumerate(last):
            for a in sft.successors[s]:
                kids_parent.append(i)
                kids_sym.append(a)
        kids_parent = np.asarray(kids_parent)
        kids_sym = np.asarray(kids_sym)
        prods = np.einsum("nij,njk->nik", mats[kids_sym], prods[kids_parent])
        scale = scale[kids_parent]
        mx = prods.reshape(len(prods), -1).max(axis=1)
        prods /= mx[:, None, None]
        scale = scale + np.log(mx)
        last = kids_sym
    norms = np.linalg.norm(prods, ord=2, axis=(1, 2)) if D > 2 else np.array(
        [np.linalg.norm(P, 2) for P in prods])
    return scale + np.log(norms)


def log_partition_sum(sft, potential: Potential, n):
    """``log Z_n`` with ``Z_n = sum_{|w| = n} Phi[w]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(potential, MatrixCocycle):
        return _logsumexp(cocycle_log_norms(potential, n))
    if isinstance(potential, LocallyConstant) and potential.d == 1:
        k = potential.window
        if n < k:
            return _logsumexp(np.array([potential.upper(w)[0] for w in enumerate_words(sft, n)]))
        block = sft.block(k)
        f = potential.table[:, 0]
        tails = potential._tail_bounds()
        t_hi = np.array([tails[u[1:]][1][0] if k > 1 else 0.0 for u in block.words])
        A, AT = _adjacency(block)
        # v[u]: log of the sum over words of the current length ending in u
        v = f.copy()
        for _ in range(n - k):
            m = v.max()
            v = np.log(np.maximum(AT @ np.exp(v - m), 1e-300)) + m + f
        return _logsumexp(v + t_hi)
    return _logsumexp(np.array([potential.upper(w)[0] for w in enumerate_words(sft, n)]))


@dataclass
class PressureBracket:
    lo: float
    hi: float
    n: int
    log_Z: float
    C: float
    variation_n: float
    kappa: float

    def contains(self, p, tol=0.0):
        return self.lo - tol <= p <= self.hi + tol

    def as_dict(self):
        return dict(self.__dict__)


def pressure_bracket(sft, potential, n):
    """Rigorous ``[P_lo, P_hi]`` from ``Z_n``.

    ``P_hi = (log Z_n + C) / n`` follows from subadditivity of
    ``log Z_n + C``. Gluing ``n``-words with the connecting words gives
    ``Z`` superadditive up to ``kappa = 2C + ||Phi||_n - p0 Phi_min``, hence
    ``P_lo = (log Z_n - kappa) / (n + p0)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if potential.d != 1:
        raise ModelError("pressure needs a scalar potential")
    logZ = log_partition_sum(sft, potential, n)
    C = float(potential.C[0])
    var = variation(potential, n)
    kappa = 2 * C + var - sft.p0 * float(potential.phi_min[0])
    return PressureBracket(lo=(logZ - kappa) / (n + sft.p0), hi=(logZ + C) / n, n=n,
                           log_Z=logZ, C=C, variation_n=var, kappa=kappa)


# ---------------------------------------------------------------------------
# Markov measures
# ---------------------------------------------------------------------------

@dataclass
class MarkovMeasure:
    """Stationary order-``k`` Markov measure on the block graph.

    ``edge_p`` is aligned with ``block.src``/``block.dst``.
    """

    block: HigherBlock
    edge_p: np.ndarray
    pi: np.ndarray

    @property
    def k(self):
        return self.block.k

    @classmethod
    def from_edge_weights(cls, block, weights):
        """Normalize positive edge weights row-wise; ``pi`` by a linear solve."""
        w = np.asarray(weights, dtype=float)
        rows = np.bincount(block.src, weights=w, minlength=block.n)
        p = w / rows[block.src]
        return cls(block, p, stationary(block, p))

    def transition_matrix(self):
        return sp.csr_matrix((self.edge_p, (self.block.src, self.block.dst)), shape=(self.block.n, self.block.n))

    def entropy(self):
        p = self.edge_p
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(p), 0.0)
        return float(-np.sum(self.pi[self.block.src] * plogp))

    def average(self, potential):
        """``Phi_*(mu) = sum_u pi(u) phi(u)``."""
        if not isinstance(potential, LocallyConstant):
            raise ModelError("averages are exact for locally constant potentials only")
        if potential.window > self.k:
            raise WindowMismatch(f"potential window {potential.window} exceeds measure order {self.k}")
        return self.pi @ potential.table_on(self.block)

    def check(self, tol=1e-12):
        rows = np.bincount(self.block.src, weights=self.edge_p, minlength=self.block.n)
        flow = np.bincount(self.block.dst, weights=self.pi[self.block.src] * self.edge_p, minlength=self.block.n)
        return {
            "row_sum_error": float(np.abs(rows - 1).max()),
            "stationarity_error": float(np.abs(flow - self.pi).max()),
            "min_pi": float(self.pi.min()),
            "ok": bool(np.abs(rows - 1).max() <= tol and np.abs(flow - self.pi).max() <= tol and self.pi.min() > 0),
        }


def stationary(block, edge_p):
    n = block.n
    P = sp.csr_matrix((edge_p, (block.src, block.dst)), shape=(n, n))
    M = (P.T - sp.identity(n)).tolil()
    M[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    if n <= 2000:
        pi = np.linalg.solve(M.toarray(), rhs)
    else:
        pi = spla.spsolve(M.tocsc(), rhs)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def markov_from_perron(block, f, per: Perron):
    p = np.exp(f[block.src] - per.log_lambda) * per.r[block.dst] / per.r[block.src]
    # remove the last bit of rounding so rows sum to one
    rows = np.bincount(block.src, weights=p, minlength=block.n)
    p = p / rows[block.src]
    return MarkovMeasure(block, p, per.pi)


def equilibrium_markov(sft, potential, k=None):
    """Equilibrium state of a scalar locally constant potential as an order-``k`` chain."""
    k = potential.window if k is None else k
    if potential.window > k:
        raise WindowMismatch(f"potential window {potential.window} exceeds order {k}")
    block = sft.block(k)
    f = log_weights(potential, block)
    return markov_from_perron(block, f, perron(block, f))


def measure_functionals(measure: MarkovMeasure, potentials):
    """Entropy and ``Phi_*`` for each potential."""
    return {"h": measure.entropy(), "averages": [measure.average(p) for p in potentials]}


def random_markov(block, rng, concentration=1.0):
    """Random full-support Markov measure (Gamma edge weights)."""
    w = rng.gamma(concentration, size=len(block.src)) + 1e-3
    return MarkovMeasure.from_edge_weights(block, w)
