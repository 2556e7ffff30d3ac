"""Existence / uniqueness / recovery condition checkers.

All checkers are pure predicates over scalars (coherences, Kruskal ranks,
rank, order), decoupled from tensors, so they can be tested exhaustively on
grids.  Strictness at the boundaries matters and is preserved: the
existence product bound is strict, the uniqueness and combined bounds are
non-strict.  Non-strict comparisons carry a 1e-12 relative slack so that
mathematically exact equalities are not lost to floating-point rounding.
"""

from __future__ import annotations

import math

import numpy as np

_BOUNDARY_RTOL = 1e-12


def _le(a: float, b: float) -> bool:
    return a <= b + _BOUNDARY_RTOL * max(1.0, abs(a), abs(b))


def _ge(a: float, b: float) -> bool:
    return a >= b - _BOUNDARY_RTOL * max(1.0, abs(a), abs(b))


def _check_mus(mus, lo: float = 0.0) -> np.ndarray:
    m = np.asarray(mus, dtype=np.float64)
    if m.ndim != 1 or m.size < 1:
        raise ValueError("need a nonempty list of per-mode coherences")
    if np.any(m < lo) or np.any(m > 1.0):
        raise ValueError(f"coherences must lie in [{lo}, 1]")
    return m


def _check_r(r: int) -> int:
    r = int(r)
    if r < 1:
        raise ValueError("rank r must be >= 1")
    return r


def existence_condition(mus, r: int) -> bool:
    """Best rank-r approximation exists if prod(mu_k) < 1/(r-1) (strict).

    The case r = 1 always has a solution (the set of separable functions
    is closed), so this returns True.
    """
    m = _check_mus(mus)
    r = _check_r(r)
    if r == 1:
        return True
    return bool(np.prod(m) < 1.0 / (r - 1))


def uniqueness_condition(mus, r: int) -> bool:
    """Rank-retaining decomposition is essentially unique if
    sum_k 1/mu_k >= 2r + d - 1 (equivalently sum omega_k >= 2r - 1).

    A zero coherence contributes 1/mu = inf and therefore satisfies the
    condition outright.
    """
    m = _check_mus(mus)
    r = _check_r(r)
    d = m.size
    with np.errstate(divide="ignore"):
        total = float(np.sum(np.where(m > 0, 1.0 / np.where(m > 0, m, 1.0), np.inf)))
    return _ge(total, 2 * r + d - 1)


def existence_uniqueness_condition(mus, r: int) -> bool:
    """Combined bound: (prod mu_k)^(1/d) <= d / (2r + d - 1), d >= 3.

    For d <= 2 the underlying uniqueness inequality can never hold (the
    Kruskal rank of r vectors cannot exceed r), so this rejects.
    """
    m = _check_mus(mus)
    r = _check_r(r)
    d = m.size
    if d < 3:
        raise ValueError(
            "combined existence/uniqueness requires d >= 3; Kruskal-type "
            "uniqueness is unattainable for d <= 2"
        )
    gm = float(np.prod(m)) ** (1.0 / d)
    return _le(gm, d / (2 * r + d - 1))


def sufficient_sum(mus, r: int) -> bool:
    """Stronger sufficient condition: sum mu_k <= d^2 / (2r + d - 1)."""
    m = _check_mus(mus)
    r = _check_r(r)
    d = m.size
    if d < 3:
        raise ValueError("sufficient conditions require d >= 3")
    return _le(float(np.sum(m)), d * d / (2 * r + d - 1))


def sufficient_sumsq(mus, r: int) -> bool:
    """Stronger sufficient condition: sum mu_k^2 <= d (d/(2r+d-1))^2."""
    m = _check_mus(mus)
    r = _check_r(r)
    d = m.size
    if d < 3:
        raise ValueError("sufficient conditions require d >= 3")
    thresh = d / (2 * r + d - 1)
    return _le(float(np.sum(m * m)), d * thresh * thresh)


def kruskal_condition(kranks, r: int) -> bool:
    """Kruskal uniqueness: 2r + d - 1 <= sum_k krank_k (integer exact)."""
    ks = [int(k) for k in kranks]
    if len(ks) < 1 or any(k < 0 for k in ks):
        raise ValueError("kranks must be nonnegative integers, one per mode")
    r = _check_r(r)
    return 2 * r + len(ks) - 1 <= sum(ks)


def expected_rank(dims) -> int:
    """ceil(prod n_k / (1 - d + sum n_k)), the generic rank heuristic."""
    ns = [int(n) for n in dims]
    if len(ns) < 1 or any(n < 1 for n in ns):
        raise ValueError("dims must be positive integers")
    denom = 1 - len(ns) + sum(ns)
    if denom <= 0:
        raise ValueError("degenerate dimension count: 1 - d + sum(n_k) <= 0")
    num = math.prod(ns)
    return -(-num // denom)


def kruskal_simple_bound(n1: int, n2: int) -> int:
    """r_max = n1 + n2 - 2 for full-rank loadings with n1, n2 <= r <= n3."""
    n1, n2 = int(n1), int(n2)
    if n1 < 1 or n2 < 1:
        raise ValueError("subarray sizes must be positive")
    return n1 + n2 - 2


def temlyakov_condition(r: int, mu: float, t: float) -> bool:
    """Exact greedy recovery condition: r < (t/(1+t)) (1 + 1/mu) (strict).

    mu = 0 (orthonormal dictionary) satisfies the condition for every
    finite r.
    """
    r = _check_r(r)
    if not (0.0 < t <= 1.0):
        raise ValueError("weakness parameter t must lie in (0, 1]")
    if mu < 0.0 or mu >= 1.0:
        raise ValueError("dictionary coherence must lie in [0, 1)")
    if mu == 0.0:
        return True
    return r < (t / (1.0 + t)) * (1.0 + 1.0 / mu)


def coercivity_lower_bound(weights, mus) -> float:
    """[1 - (r-1) prod mu_k] * ||lambda||_2^2.

    Guaranteed lower bound on ||sum_p lambda_p phi_1p (x) ... (x) phi_dp||^2
    for any factor sets with per-mode coherences at most mu_k.  A negative
    value (bound vacuous) is returned as-is.
    """
    w = np.asarray(weights, dtype=np.complex128).ravel()
    m = _check_mus(mus)
    r = w.size
    if r < 1:
        raise ValueError("need at least one weight")
    lam2 = float(np.sum(np.abs(w) ** 2))
    return (1.0 - (r - 1) * float(np.prod(m))) * lam2


GREEDY_BOUND_KINDS = ("gms", "tropp", "det", "liv")


def greedy_bound_check(kind: str, r: int, mu: float):
    """Greedy (t = 1) approximation bound factors under coherence.

    Returns (factor, iterate) when the named bound's hypothesis holds at
    (r, mu), else None:

    - gms:   r < mu^-1 / 32        -> (8 sqrt(r), r)
    - tropp: r < mu^-1 / 3         -> (sqrt(1 + 6r), r)
    - det:   r <= mu^(-2/3) / 20   -> (24, ceil(r ln r))
    - liv:   r <= mu^-1 / 20       -> (3, 2r)

    The 'det' iterate index uses the natural logarithm (the analysis
    convention; the base is not pinned down in the source results).
    """
    r = _check_r(r)
    if not (0.0 < mu < 1.0):
        raise ValueError("coherence must lie in (0, 1)")
    if kind == "gms":
        if r < 1.0 / (32.0 * mu):
            return (8.0 * math.sqrt(r), r)
        return None
    if kind == "tropp":
        if r < 1.0 / (3.0 * mu):
            return (math.sqrt(1.0 + 6.0 * r), r)
        return None
    if kind == "det":
        if _le(r, mu ** (-2.0 / 3.0) / 20.0):
            return (24.0, int(math.ceil(r * math.log(r))))
        return None
    if kind == "liv":
        if _le(r, 1.0 / (20.0 * mu)):
            return (3.0, 2 * r)
        return None
    raise ValueError(f"unknown bound kind {kind!r}; expected {GREEDY_BOUND_KINDS}")


def condition_report(mus, r: int, kranks=None) -> dict:
    """All condition verdicts with the numbers on both sides of each
    inequality, ready for JSON serialization."""
    m = _check_mus(mus)
    r = _check_r(r)
    d = m.size
    prod = float(np.prod(m))
    with np.errstate(divide="ignore"):
        invsum = float(np.sum(np.where(m > 0, 1.0 / np.where(m > 0, m, 1.0), np.inf)))
    report = {
        "d": d,
        "r": r,
        "mus": [float(x) for x in m],
        "existence": {
            "holds": existence_condition(m, r),
            "lhs_product": prod,
            "rhs": math.inf if r == 1 else 1.0 / (r - 1),
            "strict": True,
        },
        "uniqueness": {
            "holds": uniqueness_condition(m, r),
            "lhs_inverse_sum": invsum,
            "rhs": float(2 * r + d - 1),
            "strict": False,
        },
    }
    if d >= 3:
        thresh = d / (2 * r + d - 1)
        report["existence_uniqueness"] = {
            "holds": existence_uniqueness_condition(m, r),
            "lhs_geometric_mean": prod ** (1.0 / d),
            "rhs": thresh,
            "strict": False,
        }
        report["sufficient_sum"] = {
            "holds": sufficient_sum(m, r),
            "lhs_sum": float(np.sum(m)),
            "rhs": d * d / (2 * r + d - 1),
            "strict": False,
        }
        report["sufficient_sumsq"] = {
            "holds": sufficient_sumsq(m, r),
            "lhs_sum_squares": float(np.sum(m * m)),
            "rhs": d * thresh * thresh,
            "strict": False,
        }
    else:
        note = "requires d >= 3 (unattainable for d <= 2)"
        report["existence_uniqueness"] = {"holds": False, "note": note}
        report["sufficient_sum"] = {"holds": False, "note": note}
        report["sufficient_sumsq"] = {"holds": False, "note": note}
    if kranks is not None:
        report["kruskal"] = {
            "holds": kruskal_condition(kranks, r),
            "lhs": float(2 * r + d - 1),
            "rhs_krank_sum": float(sum(int(k) for k in kranks)),
            "kranks": [int(k) for k in kranks],
        }
    return report
