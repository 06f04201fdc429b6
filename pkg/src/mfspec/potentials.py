"""Almost additive potentials with exact evaluation on cylinders.

Three kinds are supported:

* :class:`LocallyConstant` -- additive, ``phi_n = S_n phi`` with ``phi`` read
  off a table indexed by admissible ``k``-words (vector valued);
* :class:`MatrixCocycle` -- ``phi_n(x) = log ||M_{x_n} ... M_{x_1}||`` for
  strictly positive matrices (scalar);
* :class:`Discretized` -- the additive window-``k`` approximation of any of
  the above, ``phi~_k(w) = phi_k(x_w) / k``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ModelError, WindowMismatch
from .sft import HigherBlock, Sft, _read_json, enumerate_words, parse_word


class Potential:
    """Common interface.

    Attributes
    ----------
    sft : Sft
        The shift the potential lives on.
    d : int
        Value dimension.
    C : ndarray, shape (d,)
        Almost-additivity constant per coordinate.
    """

    sft: Sft
    d: int
    window = None

    def eval_on_cylinder(self, w):
        """Return ``(lo, hi)``, the inf and sup of ``phi_|w|`` over ``[w]``."""
        raise NotImplementedError

    def table_on(self, block: HigherBlock):
        raise WindowMismatch(f"{type(self).__name__} is not locally constant")

    @property
    def C(self):
        return np.zeros(self.d)

    @property
    def phi_max(self):
        return self._phi1_range()[1] + self.C

    @property
    def phi_min(self):
        return self._phi1_range()[0] - self.C

    @property
    def norm(self):
        """``||Phi||``: Euclidean norm of the per-coordinate ``|Phi_max| v |Phi_min|``."""
        per = np.maximum(np.abs(self.phi_max), np.abs(self.phi_min))
        return float(np.linalg.norm(per))

    def _phi1_range(self):
        lo = np.full(self.d, np.inf)
        hi = np.full(self.d, -np.inf)
        for s in range(self.sft.m):
            a, b = self.eval_on_cylinder((s,))
            lo = np.minimum(lo, a)
            hi = np.maximum(hi, b)
        return lo, hi

    def upper(self, w):
        """``log Phi[w]``: the sup of ``phi_|w|`` on ``[w]``."""
        return self.eval_on_cylinder(w)[1]

    def is_locally_constant(self):
        return self.window is not None


# ---------------------------------------------------------------------------
# locally constant additive potentials
# ---------------------------------------------------------------------------

class LocallyConstant(Potential):
    """Additive potential with a window-``k`` table.

    Parameters
    ----------
    sft : Sft
    k : int
        Window length.
    table : array_like, shape (n_k, d)
        One row per admissible ``k``-word, in the order of
        ``sft.block(k).words``.
    """

    def __init__(self, sft, k, table, name=None):
        self.sft = sft
        self.window = int(k)
        block = sft.block(self.window)
        table = np.asarray(table, dtype=float)
        if table.ndim == 1:
            table = table[:, None]
        if table.shape[0] != block.n:
            raise ModelError(f"table has {table.shape[0]} rows, expected {block.n} admissible {k}-words")
        if not np.isfinite(table).all():
            raise ModelError("potential table must be finite")
        table.setflags(write=False)
        self.table = table
        self.d = table.shape[1]
        self.name = name or "locally_constant"
        self._tails = None

    # constructors -------------------------------------------------------

    @classmethod
    def from_function(cls, sft, k, fn, name=None):
        words = sft.block(k).words
        return cls(sft, k, np.vstack([np.atleast_1d(np.asarray(fn(w), dtype=float)) for w in words]), name)

    @classmethod
    def from_dict(cls, sft, k, mapping, name=None):
        """``mapping`` keys are internal word tuples."""
        missing = [w for w in sft.block(k).words if w not in mapping]
        if missing:
            raise ModelError(f"table misses {len(missing)} admissible {k}-words")
        return cls.from_function(sft, k, lambda w: mapping[w], name)

    @classmethod
    def per_symbol(cls, sft, values, name=None):
        vals = np.asarray(values, dtype=float)
        if vals.shape[0] != sft.m:
            raise ModelError("need one value per symbol")
        return cls(sft, 1, vals, name)

    @classmethod
    def constant(cls, sft, c, name=None):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(sft, 1, np.tile(c, (sft.m, 1)), name or "constant")

    @classmethod
    def digit(cls, sft, symbol=1, name=None):
        """Indicator of internal symbol ``symbol`` (``1`` is the external "2")."""
        v = np.zeros(sft.m)
        v[symbol] = 1.0
        return cls(sft, 1, v, name or "digit")

    # evaluation ---------------------------------------------------------

    def value(self, w):
        """Table value of a ``k``-word."""
        return self.table[self.sft.block(self.window).index[tuple(w)]]

    def _tail_bounds(self):
        """Per (k-1)-word: range of the k-1 windows that reach past the word."""
        if self._tails is None:
            k = self.window
            tails = {}
            if k == 1:
                tails[()] = (np.zeros(self.d), np.zeros(self.d))
            else:
                for u in enumerate_words(self.sft, k - 1):
                    lo = np.full(self.d, np.inf)
                    hi = np.full(self.d, -np.inf)
                    for e in _extensions(self.sft, u, k - 1):
                        x = u + e
                        s = sum(self.value(x[t:t + k]) for t in range(k - 1))
                        lo = np.minimum(lo, s)
                        hi = np.maximum(hi, s)
                    tails[u] = (lo, hi)
            self._tails = tails
        return self._tails

    def fixed_sum(self, w):
        """Sum of the windows lying fully inside ``w``."""
        k = self.window
        n = len(w)
        if n < k:
            return np.zeros(self.d)
        idx = self.sft.block(k).index
        rows = [idx[w[t:t + k]] for t in range(n - k + 1)]
        return self.table[rows].sum(axis=0)

    def eval_on_cylinder(self, w):
        w = self.sft.require(w)
        n, k = len(w), self.window
        if n == 0:
            raise ModelError("cylinder word must be non-empty")
        if n >= k - 1:
            fixed = self.fixed_sum(w)
            tlo, thi = self._tail_bounds()[w[n - k + 1:] if k > 1 else ()]
            return fixed + tlo, fixed + thi
        lo = np.full(self.d, np.inf)
        hi = np.full(self.d, -np.inf)
        for e in _extensions(self.sft, w, k - 1):
            x = w + e
            s = sum(self.value(x[t:t + k]) for t in range(n))
            lo = np.minimum(lo, s)
            hi = np.maximum(hi, s)
        return lo, hi

    def birkhoff(self, x, n):
        """``S_n phi`` along a finite sequence of length ``>= n + k - 1``."""
        k = self.window
        idx = self.sft.block(k).index
        return self.table[[idx[tuple(x[t:t + k])] for t in range(n)]].sum(axis=0)

    def _phi1_range(self):
        return self.table.min(axis=0), self.table.max(axis=0)

    def table_on(self, block):
        if self.window > block.k:
            raise WindowMismatch(f"window {self.window} exceeds block order {block.k}")
        return self.table[block.prefix_index(self.window)]

    def coordinate(self, j):
        return LocallyConstant(self.sft, self.window, self.table[:, j], f"{self.name}[{j}]")

    def scaled(self, a):
        return LocallyConstant(self.sft, self.window, a * self.table, self.name)

    def lifted(self, k):
        """Same potential written on a window ``k >= window`` table."""
        if k == self.window:
            return self
        return LocallyConstant(self.sft, k, self.table_on(self.sft.block(k)), self.name)

    def __repr__(self):
        return f"LocallyConstant(name={self.name!r}, k={self.window}, d={self.d})"


def combine(terms, sft=None):
    """Linear combination ``sum c_i phi_i`` of scalar locally constant potentials.

    ``terms`` is a list of ``(coefficient, potential)`` pairs; the result uses
    the largest window.
    """
    k = max(p.window for _, p in terms)
    sft = sft or terms[0][1].sft
    block = sft.block(k)
    total = np.zeros((block.n, terms[0][1].d))
    for c, p in terms:
        total += np.asarray(c) * p.table_on(block)
    return LocallyConstant(sft, k, total)


def stack(potentials, name=None):
    """Vector potential whose coordinates are the given potentials."""
    k = max(p.window for p in potentials)
    sft = potentials[0].sft
    block = sft.block(k)
    return LocallyConstant(sft, k, np.hstack([p.table_on(block) for p in potentials]), name)


def _extensions(sft, w, length):
    """Admissible continuations of ``w`` of the given length."""
    if length == 0:
        yield ()
        return
    succ = sft.successors
    start = succ[w[-1]] if len(w) else range(sft.m)
    for s in start:
        for rest in _extensions(sft, (s,), length - 1):
            yield (s,) + rest


# ---------------------------------------------------------------------------
# matrix cocycles
# ---------------------------------------------------------------------------

def _opnorm(M):
    """Operator 2-norm; closed form for 2x2."""
    if M.shape == (2, 2):
        a, b, c, e = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
        s = a * a + b * b + c * c + e * e
        det = a * e - b * c
        return float(np.sqrt(0.5 * (s + np.sqrt(max(s * s - 4.0 * det * det, 0.0)))))
    return float(np.linalg.norm(M, 2))


class MatrixCocycle(Potential):
    """``phi_n(x) = log ||M_{x_n} ... M_{x_1}||`` for positive matrices.

    The value depends on ``x|n`` only, so evaluation on cylinders is exact
    and ``||Phi||_n = 0``. The almost-additivity constant is
    ``C = log(D^2 kappa)`` with ``kappa`` the largest ratio
    ``M_{l r} / M_{l' r}`` over symbols, which bounds the loss in
    ``||QR|| >= ||Q|| ||R|| / (D^2 kappa)``.
    """

    d = 1

    def __init__(self, sft, matrices, name=None):
        self.sft = sft
        mats = [np.asarray(M, dtype=float) for M in matrices]
        if len(mats) != sft.m:
            raise ModelError(f"need {sft.m} matrices, got {len(mats)}")
        D = mats[0].shape[0]
        for M in mats:
            if M.shape != (D, D):
                raise ModelError("cocycle matrices must be square and of equal size")
            if not (M > 0).all():
                raise ModelError("cocycle matrices must be strictly positive")
        self.matrices = mats
        self.dim = D
        kappa = max(float((M[:, None, :] / M[None, :, :]).max()) for M in mats)
        self._C = np.array([np.log(D * D * kappa)])
        self.name = name or "cocycle"

    @property
    def C(self):
        return self._C

    def log_norm(self, w):
        """``log ||M_{w_n} ... M_{w_1}||``, rescaled to avoid overflow."""
        P = np.eye(self.dim)
        acc = 0.0
        for s in w:
            P = self.matrices[s] @ P
            scale = P.max()
            P /= scale
            acc += np.log(scale)
        return acc + np.log(_opnorm(P))

    def eval_on_cylinder(self, w):
        w = self.sft.require(w)
        if len(w) == 0:
            raise ModelError("cylinder word must be non-empty")
        v = np.array([self.log_norm(w)])
        return v, v.copy()

    def log_norms(self, n):
        """``log`` norms of all admissible ``n``-words, enumeration order."""
        words = list(enumerate_words(self.sft, n))
        return words, np.array([self.log_norm(w) for w in words])

    def __repr__(self):
        return f"MatrixCocycle(name={self.name!r}, D={self.dim})"


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

class Discretized(LocallyConstant):
    """Window-``k`` additive approximation ``phi~_k(w) = phi_k(x_w)/k``.

    ``x_w`` is ``w`` followed by the lexicographically smallest admissible
    continuation. The a-priori bound on ``|phi_n - S_n phi~_k|`` is
    available through :meth:`error_bound`.
    """

    def __init__(self, source, k):
        self.source = source
        sft = source.sft
        tail = getattr(source, "window", None) or 1
        rows = []
        for w in sft.block(k).words:
            x = w + sft.min_extension(w, max(tail - 1, 0))
            rows.append(_exact_value(source, x, k) / k)
        super().__init__(sft, k, np.vstack(rows), name=f"{getattr(source, 'name', 'potential')}^({k})")
        self.source_variation_k = variation(source, k)

    def error_bound(self, n):
        """``d (n/k |C| + 5 k ||Phi|| + ||Phi||_k n / k)`` for the source."""
        src = self.source
        k = self.window
        C = float(np.linalg.norm(src.C))
        return src.d * (n / k * C + 5 * k * src.norm + self.source_variation_k * n / k)


def _exact_value(source, x, n):
    """``phi_n`` at a point whose first ``n + window - 1`` symbols are ``x``."""
    if isinstance(source, LocallyConstant):
        return source.birkhoff(x, n)
    if isinstance(source, MatrixCocycle):
        return np.array([source.log_norm(x[:n])])
    lo, hi = source.eval_on_cylinder(x)
    return hi


def discretize(potential, k):
    """Window-``k`` approximation; returns the input when its window is ``<= k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(potential, LocallyConstant) and potential.window <= k:
        return potential
    return Discretized(potential, k)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def variation(potential, n):
    """``||Phi||_n = sup_{x|n = y|n} |phi_n(x) - phi_n(y)|`` (Euclidean over coordinates).

    Exact for scalar potentials; for vector potentials the coordinate box
    diagonal is reported, an upper bound.
    """
    if isinstance(potential, MatrixCocycle):
        return 0.0
    if isinstance(potential, LocallyConstant):
        k = potential.window
        if k == 1:
            return 0.0
        tails = potential._tail_bounds()
        if n >= k - 1:
            spread = np.max([hi - lo for lo, hi in tails.values()], axis=0)
            return float(np.linalg.norm(spread))
    spread = np.zeros(potential.d)
    for w in enumerate_words(potential.sft, n):
        lo, hi = potential.eval_on_cylinder(w)
        spread = np.maximum(spread, hi - lo)
    return float(np.linalg.norm(spread))


def function_variation(potential, n):
    """Variation of the one-step function ``phi`` over ``n``-cylinders."""
    if isinstance(potential, LocallyConstant):
        k = potential.window
        if n >= k:
            return 0.0
        block = potential.sft.block(k)
        groups = {}
        for w, row in zip(block.words, potential.table):
            lo, hi = groups.get(w[:n], (row, row))
            groups[w[:n]] = (np.minimum(lo, row), np.maximum(hi, row))
        return float(max(np.linalg.norm(hi - lo) for lo, hi in groups.values()))
    return float("nan")


def potential_constants(potential, probe_depth):
    """Constants of ``potential``: ``C``, ``Phi_max``, ``Phi_min`` and ``||Phi||_1..n``."""
    if probe_depth < 1:
        raise ValueError("probe_depth must be >= 1")
    return {
        "C": potential.C.tolist(),
        "phi_max": potential.phi_max.tolist(),
        "phi_min": potential.phi_min.tolist(),
        "norm": potential.norm,
        "variation": [variation(potential, n) for n in range(1, probe_depth + 1)],
        "function_variation": [function_variation(potential, n) for n in range(1, probe_depth + 1)],
    }


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def load_potential(source, sft):
    """Load a potential or metric document.

    Accepted forms::

        {"kind": "locally_constant", "k": 1, "d": 1, "table": {"1": [0], "2": [1]}}
        {"kind": "cocycle", "matrices": {"1": [[2, 1], [1, 1]], "2": [[1, 1], [1, 2]]}}
        {"kind": "standard"}                      # psi = -log m
        {"kind": "digit", "symbol": 2}
    """
    doc = _read_json(source)
    kind = doc.get("kind")
    name = doc.get("name")
    if kind == "locally_constant":
        k = int(doc["k"])
        table = {}
        for key, val in doc["table"].items():
            table[parse_word(key, sft.m)] = np.atleast_1d(np.asarray(val, dtype=float))
        pot = LocallyConstant.from_dict(sft, k, table, name)
        if "d" in doc and int(doc["d"]) != pot.d:
            raise ModelError(f"declared d={doc['d']} but table rows have length {pot.d}")
        return pot
    if kind == "cocycle":
        mats = doc["matrices"]
        return MatrixCocycle(sft, [mats[str(s + 1)] for s in range(sft.m)], name)
    if kind == "standard":
        return LocallyConstant.constant(sft, -np.log(sft.m), name or "standard")
    if kind == "digit":
        return LocallyConstant.digit(sft, int(doc.get("symbol", 2)) - 1, name)
    raise ModelError(f"unknown potential kind {kind!r}")


def potential_to_dict(pot):
    from .sft import format_word

    if isinstance(pot, MatrixCocycle):
        return {"kind": "cocycle", "matrices": {str(s + 1): M.tolist() for s, M in enumerate(pot.matrices)}}
    words = pot.sft.block(pot.window).words
    return {"kind": "locally_constant", "k": pot.window, "d": pot.d,
            "table": {format_word(w, pot.sft.m): row.tolist() for w, row in zip(words, pot.table)}}


def dumps(pot):
    return json.dumps(potential_to_dict(pot), indent=1)


__all__ = [
    "Potential", "LocallyConstant", "MatrixCocycle", "Discretized", "discretize",
    "potential_constants", "variation", "function_variation", "combine", "stack",
    "load_potential", "potential_to_dict",
]
