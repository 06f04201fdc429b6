"""Self-similar realizations: coding maps, carpets, ``x m`` maps.

An IFS here is a list of similitudes ``f_j(x) = rho_j x + c_j`` without
rotation, coded by the full shift on ``N`` symbols. The metric potential is
``psi = log rho_{x_1}`` and the identity potential ``chi`` (the coding map
itself) enters through a window-``k`` table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, UnknownCatalogEntry
from .gibbs_metric import WeakGibbsMetric
from .potentials import LocallyConstant
from .sft import Sft, _read_json


@dataclass(frozen=True, eq=False)
class IfsSpec:
    """Similitudes ``x -> rho_j x + c_j``.

    Attributes
    ----------
    rho : ndarray, shape (N,)
    c : ndarray, shape (N, dim)
    sosc : bool
        Declared strong open set condition.
    name : str
    """

    rho: np.ndarray
    c: np.ndarray
    sosc: bool = True
    name: str = "ifs"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if c.shape[0] != rho.shape[0]:
            raise ModelError("need one translation per ratio")
        if not ((rho > 0) & (rho < 1)).all():
            raise ModelError("contraction ratios must lie in (0, 1)")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "c", c)

    @property
    def N(self):
        return len(self.rho)

    @property
    def dim(self):
        return self.c.shape[1]

    @property
    def homogeneous(self):
        return bool(np.allclose(self.rho, self.rho[0], rtol=0, atol=1e-15))

    @property
    def fixed_points(self):
        return self.c / (1.0 - self.rho)[:, None]

    @property
    def sft(self):
        s = self._cache.get("sft")
        if s is None:
            s = Sft.full(self.N)
            self._cache["sft"] = s
        return s

    @property
    def psi(self):
        return LocallyConstant.per_symbol(self.sft, np.log(self.rho), f"log_rho[{self.name}]")

    @property
    def metric(self):
        return WeakGibbsMetric(self.psi)

    @property
    def diam0(self):
        """Diameter of the convex hull of the attractor (that of the fixed points)."""
        P = self.fixed_points
        return float(max(np.linalg.norm(a - b) for a, b in itertools.combinations(P, 2))) if self.N > 1 else 0.0

    @property
    def similarity_dimension(self):
        from scipy.optimize import brentq

        return float(brentq(lambda s: np.sum(self.rho ** s) - 1.0, 0.0, 64.0, xtol=1e-15))

    @property
    def tiles(self):
        """Images of the hull tile it (``sum rho^dim = 1`` under the open set condition).

        Then the attractor is the convex hull of the fixed points.
        """
        return bool(self.sosc and abs(float(np.sum(self.rho ** self.dim)) - 1.0) < 1e-12)

    def apply(self, w, x):
        """``f_{w_1} o ... o f_{w_n}(x)``."""
        x = np.asarray(x, dtype=float)
        for j in reversed(w):
            x = self.rho[j] * x + self.c[j]
        return x

    def anchor(self, kind, w=()):
        if kind == "first":
            return self.fixed_points[0]
        if kind == "centroid":
            return self.fixed_points.mean(axis=0)
        if kind == "tail":
            if not len(w):
                raise ValueError("tail anchor needs a non-empty word")
            return self.fixed_points[w[-1]]
        raise ValueError(f"unknown anchor {kind!r}")


def coding_map(ifs: IfsSpec, w, anchor="first"):
    """Point ``f_w(v0)`` and the cell diameter ``prod rho_{w_t} * diam0``.

    ``anchor`` selects ``v0``: ``"first"`` (fixed point of ``f_1``),
    ``"centroid"`` (mean of the fixed points) or ``"tail"`` (fixed point of
    ``f_{w_n}``, which puts the point on the attractor).
    """
    w = tuple(int(s) for s in w)
    v0 = ifs.anchor(anchor, w)
    return ifs.apply(w, v0), float(np.prod(ifs.rho[list(w)]) * ifs.diam0)


def periodic_point(ifs: IfsSpec, period):
    """Coding of ``period^inf``: the fixed point of ``f_period``."""
    a = 1.0
    b = np.zeros(ifs.dim)
    for j in reversed(period):
        b = ifs.rho[j] * b + ifs.c[j]
        a = ifs.rho[j] * a
    return b / (1.0 - a)


def _compose_tables(ifs, k):
    """Scale and offset of ``f_w`` for all ``k``-words (enumeration order)."""
    words = ifs.sft.block(k).words
    W = np.asarray(words, dtype=np.int64)
    scale = np.ones(len(words))
    off = np.zeros((len(words), ifs.dim))
    for t in range(k - 1, -1, -1):
        j = W[:, t]
        off = ifs.rho[j][:, None] * off + ifs.c[j]
        scale = ifs.rho[j] * scale
    return W, scale, off


def identity_potential(ifs: IfsSpec, k):
    """Window-``k`` table of ``chi`` with the tail anchor.

    ``chi_k(w) = f_{w_1..w_{k-1}}(fix f_{w_k})``. For a homogeneous IFS this
    differs from ``chi`` by a coboundary, so every invariant-measure average
    of ``chi_k`` equals that of ``chi``. The pointwise error is at most the
    diameter of a depth-``k`` cell.
    """
    W, scale, off = _compose_tables(ifs, k)
    fix = ifs.fixed_points[W[:, -1]]
    vals = off + scale[:, None] * fix
    # f_w(fix f_{w_k}) = f_{w_1..w_{k-1}}(fix f_{w_k}) since f_{w_k} fixes it
    return LocallyConstant(ifs.sft, k, vals, f"chi_{k}[{ifs.name}]")


def cell_points(ifs: IfsSpec, depth):
    """Tail-anchored points of all depth cells, which lie on the attractor."""
    W, scale, off = _compose_tables(ifs, depth)
    return W, off + scale[:, None] * ifs.fixed_points[W[:, -1]]


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _grid_maps(m, cells):
    rho = np.full(len(cells), 1.0 / m)
    c = np.asarray(cells, dtype=float) / m
    return rho, c


# squares (x, y, side) of a 15-square tiling of the 37 x 37 square
BROOKS15 = [
    (0, 0, 19), (19, 0, 18), (19, 18, 1), (20, 18, 3), (23, 18, 8), (31, 18, 6),
    (0, 19, 18), (18, 19, 2), (18, 21, 5), (18, 26, 11), (31, 24, 1), (31, 25, 1),
    (32, 24, 5), (29, 29, 8), (29, 26, 3),
]


def _brooks():
    side = 37.0
    rho = np.array([s / side for _, _, s in BROOKS15])
    c = np.array([[x / side, y / side] for x, y, _ in BROOKS15])
    return rho, c


def times_m(*ms):
    """``x -> (m_1 x_1, ..., m_d x_d) mod 1`` as an IFS (needs equal ``m`` to stay self-similar)."""
    if len(set(ms)) != 1:
        raise ModelError("only equal multipliers give a similarity IFS")
    m = ms[0]
    cells = list(itertools.product(range(m), repeat=len(ms)))
    rho, c = _grid_maps(m, cells)
    return IfsSpec(rho, c, True, f"times_{'x'.join(map(str, ms))}")


def carpet_catalog(name):
    """Named IFS: ``s0_3x3``, ``s1``, ``s2``, ``brooks15``, ``times_m(m1,...)``."""
    key = name.strip().lower().replace(" ", "")
    if key in ("s0", "s0_3x3"):
        return IfsSpec(*_grid_maps(3, list(itertools.product(range(3), repeat=2))), True, "s0_3x3")
    if key == "s1":
        return IfsSpec(*_grid_maps(3, [(0, 0), (0, 2), (2, 0), (2, 2)]), True, "s1")
    if key == "s2":
        return IfsSpec(*_grid_maps(3, [(0, 0), (0, 2), (2, 0), (2, 2), (1, 1)]), True, "s2")
    if key == "brooks15":
        return IfsSpec(*_brooks(), True, "brooks15")
    if key.startswith("times_m"):
        inner = key[len("times_m"):].strip("()")
        ms = [int(t) for t in inner.replace("x", ",").split(",") if t]
        if not ms:
            raise UnknownCatalogEntry(f"times_m needs multipliers, got {name!r}")
        return times_m(*ms)
    raise UnknownCatalogEntry(f"unknown carpet {name!r}")


CATALOG = ("s0_3x3", "s1", "s2", "brooks15", "times_m(3)", "times_m(3,3)")


def load_ifs(source):
    """IFS from ``{"maps": [{"rho": r, "c": [...]}, ...], "sosc": true}``."""
    doc = _read_json(source)
    if "catalog" in doc:
        return carpet_catalog(doc["catalog"])
    maps = doc.get("maps")
    if not maps:
        raise ModelError("IFS document needs a non-empty 'maps' list")
    rho = [float(m["rho"]) for m in maps]
    c = [list(np.atleast_1d(m["c"])) for m in maps]
    return IfsSpec(np.array(rho), np.array(c, dtype=float), bool(doc.get("sosc", True)), doc.get("name", "ifs"))


# ---------------------------------------------------------------------------
# weak Gibbs reparametrization
# ---------------------------------------------------------------------------

def gibbs_reparametrize(alpha, rho):
    """Potential level ``alpha`` to local dimension ``alpha / log rho``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return np.asarray(alpha, dtype=float) / np.log(rho)


def gibbs_unparametrize(dim, rho):
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return np.asarray(dim, dtype=float) * np.log(rho)


def reparametrize_interval(lo, hi, rho):
    """Image of ``[lo, hi]`` under ``alpha -> alpha / log rho`` (order flips)."""
    a, b = gibbs_reparametrize(lo, rho), gibbs_reparametrize(hi, rho)
    return float(min(a, b)), float(max(a, b))


def normalized_gibbs_potential(sft, phi):
    """``phi - P(phi)`` so that the pressure vanishes."""
    from .pressure import pressure_exact

    P = pressure_exact(sft, phi)
    return LocallyConstant(sft, phi.window, phi.table - P, f"{phi.name}-P")
