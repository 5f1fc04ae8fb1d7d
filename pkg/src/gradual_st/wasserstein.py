"""Bottleneck (W-infinity) transport between finitely supported measures.

The Kantorovich value is the smallest threshold ``tau`` such that the
bipartite graph with edges of cost <= tau carries a full transport plan. For
each candidate ``tau`` (the distinct pairwise distances) feasibility is a
max-flow problem on integer-scaled masses; equal-count uniform measures use
a perfect-matching test instead. The Kantorovich value lower-bounds the
Monge (transport-map) value, and the two agree whenever a map exists.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching, maximum_flow
from scipy.spatial.distance import cdist

from .distributions import DataError, DiscreteDistribution

__all__ = [
    "PrecisionError",
    "AssumptionViolation",
    "winf_discrete",
    "winf_coupling",
    "winf_bruteforce",
    "rho_conditional",
    "class_distances",
    "gradual_shift_gate",
]

MAX_DENOMINATOR = 10**6
INT32_MAX = 2**31 - 1
MASS_TOL = 1e-12


class PrecisionError(ArithmeticError):
    pass


class AssumptionViolation(ValueError):
    pass


def _measure(P) -> tuple[np.ndarray, np.ndarray]:
    """Accept a DiscreteDistribution (its X-marginal) or a (points, masses) pair."""
    if isinstance(P, DiscreteDistribution):
        return P.marginal()
    x, m = P
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    m = np.asarray(m, float)
    if x.shape[0] != m.shape[0] or x.shape[0] == 0:
        raise DataError("need one mass per point and at least one point")
    if np.any(m <= 0):
        raise DataError("masses must be positive")
    return x, m


def _check_balanced(mp, mq):
    sp, sq = float(mp.sum()), float(mq.sum())
    if abs(sp - 1.0) > 1e-9 or abs(sq - 1.0) > 1e-9:
        raise DataError(f"unbalanced masses: totals {sp!r} and {sq!r}, both must be 1")


def _integer_masses(mp, mq) -> tuple[np.ndarray, np.ndarray, int]:
    fp = [Fraction(float(v)).limit_denominator(MAX_DENOMINATOR) for v in mp]
    fq = [Fraction(float(v)).limit_denominator(MAX_DENOMINATOR) for v in mq]
    lcd = 1
    for f in fp + fq:
        lcd = lcd * f.denominator // math.gcd(lcd, f.denominator)
        if lcd > INT32_MAX:
            raise PrecisionError(
                f"common denominator exceeds 2^31 - 1 after including denominator {f.denominator}"
            )
    ip = np.array([int(f * lcd) for f in fp], dtype=np.int64)
    iq = np.array([int(f * lcd) for f in fq], dtype=np.int64)
    if ip.sum() != iq.sum():
        # rationalisation drifted; absorb the residual in the largest atom of the lighter side
        diff = int(ip.sum() - iq.sum())
        if abs(diff) > max(1, len(ip) + len(iq)):
            raise DataError(f"masses do not balance after rationalisation (difference {diff}/{lcd})")
        if diff > 0:
            iq[np.argmax(iq)] += diff
        else:
            ip[np.argmax(ip)] -= diff
    return ip, iq, lcd


def _is_uniform_pair(mp, mq) -> bool:
    n = len(mp)
    return n == len(mq) and np.allclose(mp, 1.0 / n, rtol=0, atol=MASS_TOL) and np.allclose(mq, 1.0 / n, rtol=0, atol=MASS_TOL)


def _flow_graph(cost, tau, ip, iq, big):
    n, m = cost.shape
    src, sink = 0, n + m + 1
    rows, cols, caps = [], [], []
    rows += [src] * n
    cols += list(range(1, n + 1))
    caps += ip.tolist()
    ii, jj = np.nonzero(cost <= tau)
    rows += (ii + 1).tolist()
    cols += (jj + n + 1).tolist()
    caps += [big] * len(ii)
    rows += list(range(n + 1, n + m + 1))
    cols += [sink] * m
    caps += iq.tolist()
    size = n + m + 2
    g = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(size, size))
    return g, src, sink


def _feasible_flow(cost, tau, ip, iq, total):
    g, s, t = _flow_graph(cost, tau, ip, iq, int(total))
    res = maximum_flow(g, s, t)
    return res.flow_value == total, res


def _feasible_matching(cost, tau):
    g = csr_matrix((cost <= tau).astype(np.int8))
    match = maximum_bipartite_matching(g, perm_type="column")
    return bool(np.all(match >= 0)), match


def winf_coupling(P, Q) -> tuple[float, np.ndarray]:
    """W-infinity distance and an optimal coupling (rows: atoms of P, columns: atoms of Q)."""
    xp, mp = _measure(P)
    xq, mq = _measure(Q)
    if xp.shape[1] != xq.shape[1]:
        raise DataError("measures live in different dimensions")
    _check_balanced(mp, mq)
    cost = cdist(xp, xq)
    levels = np.unique(cost)
    if levels[0] == levels[-1] and len(levels) == 1:
        coupling = np.outer(mp, mq)
        return float(levels[0]), coupling

    if _is_uniform_pair(mp, mq):
        n = len(mp)

        def test(tau):
            return _feasible_matching(cost, tau)

        def to_coupling(match):
            c = np.zeros((n, n))
            c[match, np.arange(n)] = 1.0 / n
            return c
    else:
        ip, iq, lcd = _integer_masses(mp, mq)
        total = int(ip.sum())

        def test(tau):
            return _feasible_flow(cost, tau, ip, iq, total)

        def to_coupling(res):
            n, m = cost.shape
            f = res.flow.toarray()[1 : n + 1, n + 1 : n + m + 1]
            return np.maximum(f, 0) / lcd

    # smallest feasible level; feasibility is monotone in tau
    lo, hi = 0, len(levels) - 1
    ok, best = test(levels[hi])
    if not ok:
        raise DataError("no feasible coupling at the largest distance; masses are inconsistent")
    while lo < hi:
        mid = (lo + hi) // 2
        ok, res = test(levels[mid])
        if ok:
            hi, best = mid, res
        else:
            lo = mid + 1
    return float(levels[hi]), to_coupling(best)


def winf_discrete(P, Q) -> float:
    """Kantorovich W-infinity distance between two finitely supported measures on R^d.

    ``P`` and ``Q`` are :class:`DiscreteDistribution` objects (their X-marginals
    are used) or ``(points, masses)`` pairs.
    """
    return winf_coupling(P, Q)[0]


def winf_bruteforce(P, Q) -> float:
    """Reference W-infinity by exhaustive Hall-condition checks.

    A plan using only edges of cost <= tau exists iff every subset A of P's
    atoms satisfies ``P(A) <= Q(N(A))``; all subsets are enumerated, so this
    is restricted to at most 8 atoms in total.
    """
    xp, mp = _measure(P)
    xq, mq = _measure(Q)
    if len(mp) + len(mq) > 8:
        raise ValueError("brute-force oracle limited to 8 atoms in total")
    _check_balanced(mp, mq)
    cost = cdist(xp, xq)
    n = len(mp)
    subsets = [s for k in range(1, n + 1) for s in itertools.combinations(range(n), k)]
    for tau in sorted(set(cost.ravel().tolist())):
        adj = cost <= tau
        if all(mp[list(s)].sum() <= mq[adj[list(s)].any(axis=0)].sum() + 1e-12 for s in subsets):
            return float(tau)
    raise DataError("no feasible threshold found")


def class_distances(P: DiscreteDistribution, Q: DiscreteDistribution, no_label_shift: bool = True) -> dict:
    """Per-class W-infinity distances between the class conditionals of P and Q."""
    if no_label_shift:
        for y in (1, -1):
            if abs(P.class_mass(y) - Q.class_mass(y)) > MASS_TOL:
                raise AssumptionViolation(
                    f"label marginals differ: P(Y={y:+d}) = {P.class_mass(y)!r}, Q(Y={y:+d}) = {Q.class_mass(y)!r}"
                )
    out = {}
    for y in (1, -1):
        try:
            cp, cq = P.conditional(y), Q.conditional(y)
        except DataError as e:
            raise DataError(f"both classes must be present on both sides: {e}") from None
        out[y] = winf_discrete(cp, cq)
    return out


def rho_conditional(P: DiscreteDistribution, Q: DiscreteDistribution, no_label_shift: bool = True) -> float:
    """Largest class-conditional W-infinity distance between P and Q."""
    d = class_distances(P, Q, no_label_shift)
    return max(d.values())


def gradual_shift_gate(dists, R: float, rho_max: float) -> tuple[bool, list[float]]:
    """Check that consecutive distributions satisfy rho <= rho_max < 1/R.

    Returns the verdict and the list of consecutive rho values.
    """
    if not rho_max < 1.0 / R:
        return False, []
    rhos = [rho_conditional(a, b) for a, b in zip(dists[:-1], dists[1:])]
    return all(r <= rho_max + 1e-12 for r in rhos), rhos
