"""Randomized invariant suite.

Each property draws its own random instances (shift, potential, metric,
words) from a seeded generator and reports the number of violations and
the first violating instance.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import Infeasible, NotPrimitive
from .gibbs_metric import WeakGibbsMetric, ball_cover, cover_classes, tie_tol
from .potentials import LocallyConstant, MatrixCocycle, variation
from .pressure import pressure_exact, random_markov
from .sft import Sft, check_primitive
from .spectrum import SpectralProblem, primal_spectrum, variational_spectrum


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_sft(rng, m_max=3):
    m = int(rng.integers(2, m_max + 1))
    while True:
        A = (rng.random((m, m)) < 0.7).astype(np.int8)
        try:
            check_primitive(A)
        except NotPrimitive:
            continue
        return Sft.from_matrix(A)


def random_lc(rng, sft, k_max=3, d_max=2, lo=-1.0, hi=1.0):
    k = int(rng.integers(1, k_max + 1))
    d = int(rng.integers(1, d_max + 1))
    n = sft.block(k).n
    return LocallyConstant(sft, k, rng.uniform(lo, hi, size=(n, d)))


def random_cocycle(rng, sft, D=2):
    return MatrixCocycle(sft, [rng.uniform(0.2, 2.0, size=(D, D)) for _ in range(sft.m)])


def random_potential(rng, sft):
    return random_cocycle(rng, sft) if rng.random() < 0.3 else random_lc(rng, sft)


def random_metric(rng, sft, k_max=2):
    k = int(rng.integers(1, k_max + 1))
    n = sft.block(k).n
    return WeakGibbsMetric(LocallyConstant(sft, k, -rng.uniform(0.3, 1.5, size=(n, 1))))


def random_word(rng, sft, n):
    w = [int(rng.integers(sft.m))]
    for _ in range(n - 1):
        succ = sft.successors[w[-1]]
        w.append(int(succ[rng.integers(len(succ))]))
    return tuple(w)


# ---------------------------------------------------------------------------
# properties (each returns None or a violation description)
# ---------------------------------------------------------------------------

def prop_almost_additive(rng):
    sft = random_sft(rng)
    pot = random_potential(rng, sft)
    u = random_word(rng, sft, int(rng.integers(1, 7)))
    v = random_word(rng, sft, int(rng.integers(1, 7)))
    w = sft.connect(u, v)
    head = w[:len(w) - len(v)]
    lo, hi = pot.eval_on_cylinder(w)
    lu, hu = pot.eval_on_cylinder(head)
    lv, hv = pot.eval_on_cylinder(v)
    C = pot.C
    tol = 1e-9
    if (hi > hu + hv + C + tol).any() or (lo < lu + lv - C - tol).any():
        return {"words": [head, v], "joint": [lo.tolist(), hi.tolist()]}
    n = len(w)
    if (lo < n * pot.phi_min - tol).any() or (hi > n * pot.phi_max + tol).any():
        return {"max_min": w}
    return None


def prop_product_sandwich(rng):
    sft = random_sft(rng)
    pot = random_potential(rng, sft)
    w = random_word(rng, sft, int(rng.integers(2, 10)))
    cut = int(rng.integers(1, len(w)))
    u, v = w[:cut], w[cut:]
    C = pot.C
    var = np.array([variation(pot.coordinate(j), len(u)) if hasattr(pot, "coordinate") else variation(pot, len(u))
                    for j in range(pot.d)])
    Puv, Pu, Pv = pot.upper(w), pot.upper(u), pot.upper(v)
    tol = 1e-9
    if (Puv > C + Pu + Pv + tol).any() or (Puv < Pu + Pv - C - var - tol).any():
        return {"u": u, "v": v, "log": [Puv.tolist(), Pu.tolist(), Pv.tolist()]}
    return None


def prop_cover(rng):
    sft = random_sft(rng)
    metric = random_metric(rng, sft)
    n = int(rng.integers(1, 7))
    words = ball_cover(metric, n)
    psi = metric.psi
    tol = tie_tol(n) + 1e-12
    ws = set(words)
    for w in words:
        for j in range(1, len(w)):
            if w[:j] in ws:
                return {"prefix": [w[:j], w]}
        if not metric.C1 * n - 1e-9 <= len(w) <= metric.C2 * n + 1e-9:
            return {"length": w}
        ld = metric.log_diameter(w)
        lower = -float(psi.C[0]) - variation(psi, len(w)) + metric.psi_min - n
        if not lower - 1e-9 <= ld <= -n + tol:
            return {"diameter": w, "log_diam": ld}
    depth = max(len(w) for w in words)
    for _ in range(20):
        x = random_word(rng, sft, depth)
        hits = sum(x[:j] in ws for j in range(1, depth + 1))
        if hits != 1:
            return {"cover": x, "hits": hits}
    return None


def prop_variational(rng):
    sft = random_sft(rng)
    pot = random_lc(rng, sft, d_max=1)
    k = pot.window + int(rng.integers(0, 2))
    mu = random_markov(sft.block(k), rng, concentration=float(rng.uniform(0.3, 3.0)))
    lhs = mu.entropy() + float(mu.average(pot)[0])
    P = pressure_exact(sft, pot)
    if lhs > P + 1e-10:
        return {"h_plus_avg": lhs, "P": P}
    return None


def _counting_instance(rng):
    sft = random_sft(rng)
    metric = random_metric(rng, sft)
    pot = random_lc(rng, sft, k_max=2)
    n = int(rng.integers(3, 9))
    cls = cover_classes(metric, n, pot)
    a = rng.uniform(pot.phi_min, pot.phi_max)
    return metric, pot, n, cls, a


def prop_f_monotone(rng):
    _, pot, n, cls, a = _counting_instance(rng)
    eps = np.sort(rng.uniform(0.0, 1.0, size=4))
    f = [float(cls.count_near(a[None, :], e)[0]) for e in eps]
    if any(y < x for x, y in zip(f, f[1:])):
        return {"eps": eps.tolist(), "f": f}
    return None


def prop_lambda_le_d(rng):
    _, pot, n, cls, a = _counting_instance(rng)
    f = float(cls.count_near(a[None, :], float(rng.uniform(0.01, 1.0)))[0])
    if f == 0:
        return None
    lam = np.log(f) / n
    D = np.log(cls.total) / n
    if lam > D + 2.0 / n + 1e-12:
        return {"lambda": lam, "D": D, "n": n}
    return None


def prop_dual_ge_primal(rng):
    A = np.array([[1, 1], [1, 1]]) if rng.random() < 0.5 else np.array([[1, 1], [1, 0]])
    sft = Sft.from_matrix(A)
    k = int(rng.integers(1, 3))
    pot = LocallyConstant(sft, k, rng.uniform(-1, 1, size=(sft.block(k).n, 1)))
    metric = WeakGibbsMetric(LocallyConstant(sft, 1, -rng.uniform(0.3, 1.5, size=(sft.m, 1))))
    prob = SpectralProblem(sft, metric, pot, k)
    lo, hi = prob.hull.interval
    a = lo + (hi - lo) * rng.uniform(0.05, 0.95)
    try:
        dual = variational_spectrum(prob, [a]).e_hat
        primal = primal_spectrum(prob, [a], restarts=2, seed=int(rng.integers(1 << 31)))["value"]
    except Infeasible:
        return None
    if primal > dual + 1e-6:
        return {"alpha": a, "dual": dual, "primal": primal}
    return None


PROPERTIES = {
    "almost_additivity": prop_almost_additive,
    "product_sandwich": prop_product_sandwich,
    "cover_bounds": prop_cover,
    "variational_inequality": prop_variational,
    "f_monotone_in_eps": prop_f_monotone,
    "lambda_le_D": prop_lambda_le_d,
    "dual_ge_primal": prop_dual_ge_primal,
}


def run_checks(instances=500, seed=0, only=None):
    """Run every property on ``instances`` random instances.

    Returns ``{name: {"instances", "violations", "witness", "seconds"}}``.
    Property ``i`` uses the generator ``SeedSequence([seed, i])``.
    """
    report = {}
    for i, (name, prop) in enumerate(PROPERTIES.items()):
        if only and name not in only:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        t0 = time.perf_counter()
        bad = 0
        witness = None
        for _ in range(instances):
            r = prop(rng)
            if r is not None:
                bad += 1
                witness = witness or r
        report[name] = {"instances": instances, "violations": bad, "witness": witness,
                        "seconds": time.perf_counter() - t0}
    return report
