"""Dense hypermatrix core: rank-1 terms, CP models, canonical form, equality.

A hypermatrix is an ordinary complex :class:`numpy.ndarray` stored in C order,
i.e. row-major lexicographic with mode 1 slowest.  Every flattening in this
package uses that single convention.

A CP model is a weighted sum of separable (rank-1) terms

    T = sum_p  w_p * phi_1p (x) phi_2p (x) ... (x) phi_dp

with real positive weights sorted in descending order and unit-norm factor
columns.  All types are immutable after construction and all operations are
pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12

_EINSUM_LETTERS = "abcdefghijklmnopqstuvwxyz"  # 'r' reserved for the rank axis


def _as_complex(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.complex128))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def frobenius(t) -> float:
    """Frobenius (L2) norm of a hypermatrix."""
    return float(np.linalg.norm(np.asarray(t).ravel()))


def inner_product(f, g) -> complex:
    """Hilbert inner product <f, g> = sum f * conj(g) over matching dims.

    For rank-1 inputs this equals the product of the per-mode inner
    products.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape:
        raise ValueError(f"dimension mismatch: {f.shape} vs {g.shape}")
    return complex(np.vdot(g.ravel(), f.ravel()))


def rank1_outer(factors) -> np.ndarray:
    """Outer product of d vectors: entry (i_1..i_d) = prod_k phi_k(i_k)."""
    if len(factors) == 0:
        raise ValueError("need at least one factor vector")
    vecs = [_as_complex(v) for v in factors]
    for v in vecs:
        if v.ndim != 1 or v.size == 0:
            raise ValueError("factors must be nonempty vectors")
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out


def _einsum_spec(d: int) -> str:
    if d > len(_EINSUM_LETTERS):
        raise ValueError(f"order {d} exceeds supported maximum")
    modes = _EINSUM_LETTERS[:d]
    return "r," + ",".join(m + "r" for m in modes) + "->" + modes


def evaluate_terms(weights, factors) -> np.ndarray:
    """Evaluate sum_p weights[p] * (col p of each factor matrix) outer."""
    factors = [_as_complex(f) for f in factors]
    w = _as_complex(np.atleast_1d(weights))
    r = w.shape[0]
    for f in factors:
        if f.ndim != 2 or f.shape[1] != r:
            raise ValueError("each factor matrix needs one column per term")
    if r == 0:
        return np.zeros(tuple(f.shape[0] for f in factors), dtype=np.complex128)
    return np.einsum(_einsum_spec(len(factors)), w, *factors, optimize=True)


@dataclass(frozen=True)
class CPModel:
    """Canonical-form CP model: descending positive weights, unit columns.

    ``factors[k]`` has shape (n_k, r); column p is the mode-k factor of
    term p.  ``dropped_terms`` counts zero terms removed by
    :func:`canonicalize`.
    """

    weights: np.ndarray
    factors: tuple
    dropped_terms: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        facs = tuple(_as_complex(f) for f in self.factors)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        r = w.shape[0]
        if len(facs) < 1:
            raise ValueError("need at least one mode")
        for f in facs:
            if f.ndim != 2 or f.shape[1] != r:
                raise ValueError("factor matrices must be n_k x r")
            if f.shape[0] < 1:
                raise ValueError("empty mode")
        if r > 0:
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")
            if np.any(np.diff(w) > 0):
                raise ValueError("weights must be sorted in descending order")
            for f in facs:
                norms = np.linalg.norm(f, axis=0)
                if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
                    raise ValueError("factor columns must have unit norm")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "factors", tuple(_readonly(f) for f in facs))

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)


def cp_evaluate(model: CPModel) -> np.ndarray:
    """Evaluate a CP model into a dense hypermatrix."""
    return evaluate_terms(model.weights, model.factors)


def canonicalize(weights, factors) -> CPModel:
    """Bring weighted rank-1 terms to canonical form.

    Accepts complex weights and factor columns of arbitrary nonzero norm.
    Column norms and weight phases are absorbed into real positive weights,
    which are then stable-sorted in descending order.  Zero terms (zero
    weight or a zero factor column) are dropped and counted in
    ``dropped_terms``.

    Phase convention: within each term, each of the first d-1 factors is
    multiplied by the unimodulus scalar that makes its largest-magnitude
    entry real positive; the accumulated inverse phase is folded into the
    last factor.  This picks a deterministic representative of the
    unimodulus orbit.  The evaluated tensor is unchanged.
    """
    w = _as_complex(np.atleast_1d(weights))
    facs = [_as_complex(f) for f in factors]
    r = w.shape[0]
    d = len(facs)
    if d < 1:
        raise ValueError("need at least one mode")
    for f in facs:
        if f.ndim != 2 or f.shape[1] != r:
            raise ValueError("each factor matrix needs one column per term")

    mags = np.empty(r)
    cols = [np.empty_like(f) for f in facs]
    keep = np.ones(r, dtype=bool)
    for p in range(r):
        mag = abs(w[p])
        phase = w[p] / mag if mag > 0 else 0.0
        for k in range(d):
            c = facs[k][:, p]
            nrm = np.linalg.norm(c)
            if nrm == 0.0:
                mag = 0.0
                break
            mag *= nrm
            u = c / nrm
            if k < d - 1:
                top = u[np.argmax(np.abs(u))]
                ph = top / abs(top)
                u = u / ph
                phase = phase * ph
            else:
                u = u * phase
            cols[k][:, p] = u
        if mag == 0.0:
            keep[p] = False
        mags[p] = mag

    idx = [p for p in np.argsort(-mags[keep], kind="stable")]
    kept = np.flatnonzero(keep)[idx]
    return CPModel(
        weights=mags[kept],
        factors=tuple(c[:, kept] for c in cols),
        dropped_terms=int(r - keep.sum()),
    )


def _align_phases(m1: CPModel, m2: CPModel, p: int, q: int, tol: float) -> bool:
    """True if term p of m1 matches term q of m2 up to unimodulus scalings
    whose phases sum to zero mod 2pi, each mode aligned within tol."""
    d = m1.order
    zs = np.array(
        [np.vdot(m2.factors[k][:, q], m1.factors[k][:, p]) for k in range(d)]
    )
    mags = np.abs(zs)
    if np.any(mags < 1e-15):
        return False
    units = zs / mags
    # smallest per-mode correction distributing the phase-sum constraint
    excess = np.angle(np.prod(units))
    thetas = np.angle(units) - excess / d
    for k in range(d):
        resid = np.linalg.norm(
            m1.factors[k][:, p] - np.exp(1j * thetas[k]) * m2.factors[k][:, q]
        )
        if resid > tol:
            return False
    return True


def _match_block(ok: np.ndarray) -> bool:
    """Backtracking search for a perfect matching in a boolean matrix."""
    n = ok.shape[0]
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        for j in range(n):
            if ok[i, j] and not used[j]:
                used[j] = True
                if extend(i + 1):
                    return True
                used[j] = False
        return False

    return extend(0)


def essentially_equal(m1: CPModel, m2: CPModel, tol: float) -> bool:
    """Test whether two canonical CP models are essentially the same.

    True iff ranks agree, weights agree within tol, and the terms can be
    matched (permuting only inside blocks of equal weights, block detection
    tolerance = tol) so that all factors align via per-term unimodulus
    scalings e^{i theta_kp} with sum_k theta_kp = 0 mod 2pi, each mode
    within tol.
    """
    if not isinstance(m1, CPModel) or not isinstance(m2, CPModel):
        raise ValueError("essentially_equal expects canonical CPModel inputs")
    if m1.dims != m2.dims:
        raise ValueError(f"dimension mismatch: {m1.dims} vs {m2.dims}")
    if m1.rank != m2.rank:
        return False
    r = m1.rank
    if r == 0:
        return True
    if np.max(np.abs(m1.weights - m2.weights)) > tol:
        return False

    # blocks of (near-)equal weights in the common descending order
    splits = [0]
    for p in range(1, r):
        if m1.weights[p - 1] - m1.weights[p] > tol:
            splits.append(p)
    splits.append(r)

    for b0, b1 in zip(splits[:-1], splits[1:]):
        block = range(b0, b1)
        ok = np.array(
            [[_align_phases(m1, m2, p, q, tol) for q in block] for p in block]
        )
        if not _match_block(ok):
            return False
    return True


def multilinear_action(matrices, tensor) -> np.ndarray:
    """Apply one square matrix per mode: (M_1,..,M_d) . T.

    Entry (a, b, c, ...) = sum_{ijk..} M1[a,i] M2[b,j] M3[c,k] ... T[ijk..].
    On a rank-1 tensor u (x) v (x) w this yields (M1 u) (x) (M2 v) (x) (M3 w).
    """
    t = _as_complex(tensor)
    if len(matrices) != t.ndim:
        raise ValueError("need exactly one matrix per mode")
    for k, m in enumerate(matrices):
        m = _as_complex(m)
        n = t.shape[k]
        if m.shape != (n, n):
            raise ValueError(f"mode {k}: expected {(n, n)} matrix, got {m.shape}")
        t = np.moveaxis(np.tensordot(m, t, axes=(1, k)), 0, k)
    return t


def random_unit_columns(n: int, r: int, rng) -> np.ndarray:
    """n x r complex matrix with i.i.d. Gaussian unit-normalized columns."""
    m = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return m / np.linalg.norm(m, axis=0)
