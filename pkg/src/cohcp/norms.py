"""Tensor spectral norm, nuclear norm sandwich bounds, and fixtures.

The spectral norm sup |<T, phi_1 (x) ... (x) phi_d>| over unit vectors is
estimated from below by multi-start alternating maximization; the witness
certifies the reported value.  The nuclear norm is bracketed: any exact
finite decomposition sum lambda_p certifies an upper bound, and duality
|<T, g>| <= ||T||_sigma ||g||_* turns candidate tensors g into lower
bounds.  The lower bound inherits the accuracy of the spectral estimate in
its denominator; on the fixtures used here the maximization converges to
machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CPModel,
    canonicalize,
    cp_evaluate,
    evaluate_terms,
    frobenius,
    inner_product,
    random_unit_columns,
)

_LETTERS = "abcdefghijklmnopqstuvwxyz"


@dataclass(frozen=True)
class NormCertificate:
    """Spectral value with witness, nuclear sandwich, certification flag.

    ``spectral`` is a certified lower bound on the spectral norm,
    reproducible as |<T, witness>|.  ``nuclear_lower <= nuclear_upper``
    bracket the nuclear norm; ``certified`` means the bracket is tighter
    than the configured tolerance.
    """

    spectral: float
    spectral_witness: tuple | None
    nuclear_lower: float | None = None
    nuclear_upper: float | None = None
    upper_witness: CPModel | None = None
    certified: bool = False


@dataclass(frozen=True)
class NormConfig:
    tol: float = 1e-3            # relative certification tolerance
    size_cap: int = 256          # refuse tensors with more entries
    restarts: int = 64
    sweep_tol: float = 1e-12
    max_sweeps: int = 500
    seed: int = 0
    search: bool = True          # run the penalized decomposition search
    max_terms: int | None = None
    als_sweeps: int = 120
    fit_tol: float = 1e-9        # residual acceptance for upper bounds
    candidates: tuple = ()       # known CPModel decompositions of T


def _mode_update_spec(d: int, k: int) -> str:
    modes = _LETTERS[:d]
    ins = [modes] + [modes[j] + "r" for j in range(d) if j != k]
    return ",".join(ins) + "->" + modes[k] + "r"


def _alternating_spectral(t: np.ndarray, restarts: int, tol: float,
                          max_sweeps: int, rng) -> tuple:
    """Batched alternating maximization of |<T, phi_1 (x) .. (x) phi_d>|.

    All restarts are updated in lockstep; each mode update replaces the
    mode-k vector by the normalized contraction of T against the other
    modes, which increases the objective monotonically.
    """
    d = t.ndim
    dims = t.shape
    vecs = [random_unit_columns(n, restarts, rng) for n in dims]
    specs = [_mode_update_spec(d, k) for k in range(d)]
    vals = np.zeros(restarts)
    for _ in range(max_sweeps):
        prev = vals
        for k in range(d):
            others = [vecs[j].conj() for j in range(d) if j != k]
            c = np.einsum(specs[k], t, *others, optimize=True)
            nrm = np.linalg.norm(c, axis=0)
            safe = np.where(nrm > 0, nrm, 1.0)
            vecs[k] = np.where(nrm > 0, c / safe, vecs[k])
            vals = nrm
        if np.max(vals - prev) <= tol * max(1.0, float(np.max(vals))):
            break
    best = int(np.argmax(vals))
    witness = tuple(v[:, best].copy() for v in vecs)
    # reproducible certified value
    value = abs(inner_product(t, evaluate_terms([1.0], [w[:, None] for w in witness])))
    return value, witness


def spectral_norm(tensor, restarts: int = 64, tol: float = 1e-12,
                  max_sweeps: int = 500, seed: int = 0) -> NormCertificate:
    """Best |<T, phi_1 (x) ... (x) phi_d>| over unit vectors found by
    multi-start alternating maximization.

    The value is a certified lower bound on the spectral norm; for
    matrices it matches the largest singular value.  The zero tensor
    returns 0 with no witness.
    """
    t = np.asarray(tensor, dtype=np.complex128)
    if frobenius(t) == 0.0:
        return NormCertificate(spectral=0.0, spectral_witness=None)
    rng = np.random.default_rng(seed)
    value, witness = _alternating_spectral(t, restarts, tol, max_sweeps, rng)
    return NormCertificate(spectral=value, spectral_witness=witness)


def _vector_terms(v: np.ndarray) -> list:
    """l1 decomposition of a vector into weighted unit basis vectors."""
    terms = []
    for i, x in enumerate(v):
        a = abs(x)
        if a > 0.0:
            e = np.zeros(v.shape[0], dtype=np.complex128)
            e[i] = x / a
            terms.append((a, [e]))
    return terms


def _matrix_terms(m: np.ndarray) -> list:
    """Exact SVD decomposition of a matrix; sum of weights = nuclear norm."""
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    terms = []
    for i, sv in enumerate(s):
        if sv > 0.0:
            # A = sum_i s_i outer(u_i, vh_i): the vh row already carries
            # the conjugate of the right singular vector
            terms.append((float(sv), [u[:, i], vh[i, :]]))
    return terms


def _slice_terms(t: np.ndarray) -> list:
    """Exact decomposition by slicing the best mode, recursively.

    Any exact decomposition certifies a nuclear-norm upper bound; slicing
    one mode into basis vectors and decomposing each slice exactly is a
    cheap closed-form choice (exact SVD at the matrix level).
    """
    if t.ndim == 1:
        return _vector_terms(t)
    if t.ndim == 2:
        return _matrix_terms(t)
    best = None
    for k in range(t.ndim):
        total = 0.0
        terms = []
        for i in range(t.shape[k]):
            sl = np.take(t, i, axis=k)
            for w, vecs in _slice_terms(sl):
                e = np.zeros(t.shape[k], dtype=np.complex128)
                e[i] = 1.0
                terms.append((w, vecs[:k] + [e] + vecs[k:]))
                total += w
        if best is None or total < best[0]:
            best = (total, terms)
    return best[1]


def _terms_to_model(terms, dims) -> CPModel:
    r = len(terms)
    weights = np.array([w for w, _ in terms], dtype=np.complex128)
    factors = [np.zeros((n, r), dtype=np.complex128) for n in dims]
    for p, (_, vecs) in enumerate(terms):
        for k, v in enumerate(vecs):
            factors[k][:, p] = v
    return canonicalize(weights, factors)


def _soft_threshold(rho: complex, kappa: float) -> complex:
    a = abs(rho)
    if a <= kappa:
        return 0.0
    return rho * (1.0 - kappa / a)


def _l1_weight_solve(gram: np.ndarray, b: np.ndarray, pen: float,
                     iters: int = 60) -> np.ndarray:
    """Coordinate descent for min ||f - sum c_p g_p||^2 + pen * sum |c_p|."""
    r = b.shape[0]
    c = np.linalg.lstsq(gram, b, rcond=None)[0]
    for _ in range(iters):
        for p in range(r):
            rho = b[p] - gram[p, :] @ c + gram[p, p] * c[p]
            c[p] = _soft_threshold(rho, pen / 2.0) / gram[p, p].real
    return c


def _khatri_rao_but(factors, k: int) -> np.ndarray:
    """Khatri-Rao product of all factor matrices except mode k, ordered to
    match the C-order unfolding of the remaining modes."""
    kr = None
    r = factors[0].shape[1]
    for j, fj in enumerate(factors):
        if j == k:
            continue
        kr = fj if kr is None else (kr[:, None, :] * fj[None, :, :]).reshape(-1, r)
    return kr


def _term_correlations(t: np.ndarray, factors) -> np.ndarray:
    """b_p = <T, phi_1p (x) ... (x) phi_dp> for all terms p at once."""
    d = t.ndim
    modes = _LETTERS[:d]
    spec = modes + "," + ",".join(m + "r" for m in modes) + "->r"
    return np.einsum(spec, t, *[f.conj() for f in factors], optimize=True)


def _term_gram(factors) -> np.ndarray:
    """Gram matrix M_pq = <g_q, g_p> of the unit rank-1 terms."""
    r = factors[0].shape[1]
    gram = np.ones((r, r), dtype=np.complex128)
    for f in factors:
        gram *= f.conj().T @ f
    return gram


def _penalized_fit(t: np.ndarray, r: int, cfg: NormConfig, rng) -> tuple | None:
    """Search an exact rank-r fit with small weight sum.

    Alternating least squares on the factors interleaved with an
    l1-penalized weight re-solve under a decreasing penalty, then an exact
    final weight solve.  Only decompositions meeting the residual tolerance
    produce upper bounds.  Returns (weight_sum, model, residual) or None.
    """
    dims = t.shape
    d = t.ndim
    tnorm = frobenius(t)
    factors = [random_unit_columns(n, r, rng) for n in dims]
    lam = np.ones(r, dtype=np.complex128)
    unfolds = [np.moveaxis(t, k, 0).reshape(dims[k], -1) for k in range(d)]
    pen = 0.1 * tnorm
    rounds = 14
    for _ in range(rounds):
        for _ in range(max(2, cfg.als_sweeps // rounds)):
            for k in range(d):
                z = _khatri_rao_but(factors, k)
                c = np.linalg.lstsq(z, unfolds[k].T, rcond=None)[0].T
                nrm = np.linalg.norm(c, axis=0)
                keep = nrm > 1e-300
                lam = np.where(keep, nrm, 0.0).astype(np.complex128)
                factors[k] = np.where(keep[None, :], c / np.where(keep, nrm, 1.0),
                                      factors[k])
        gram = _term_gram(factors) + 1e-12 * np.eye(r)
        b = _term_correlations(t, factors)
        lam = _l1_weight_solve(gram, b, pen)
        pen *= 0.3
    # exact final weight solve (penalty off)
    gram = _term_gram(factors)
    b = _term_correlations(t, factors)
    lam = np.linalg.lstsq(gram, b, rcond=None)[0]
    resid = frobenius(t - evaluate_terms(lam, factors))
    if resid <= cfg.fit_tol * max(1.0, tnorm):
        live = np.abs(lam) > 0
        if not np.any(live):
            return None
        model = canonicalize(lam[live], [f[:, live] for f in factors])
        # rigorous slack for the accepted residual
        value = float(np.sum(model.weights)) + resid * math.sqrt(t.size)
        return value, model, resid
    return None


def nuclear_norm_bounds(tensor, cfg: NormConfig | None = None) -> NormCertificate:
    """Sandwich the nuclear norm between duality lower and decomposition
    upper bounds.

    Lower: max over candidate tensors g of |<T, g>| / ||g||_sigma, always
    including g = T (giving ||T||_F^2 / ||T||_sigma) and the spectral
    witness (giving ||T||_sigma itself); exact polar dual for matrices.
    Upper: min over exact decompositions found - the matrix SVD, mode-slice
    decompositions, user-supplied candidate models, and an optional
    penalized search over increasing rank.  ``certified`` when the gap
    is within ``cfg.tol`` relative.
    """
    cfg = cfg or NormConfig()
    t = np.asarray(tensor, dtype=np.complex128)
    if t.size > cfg.size_cap:
        raise ValueError(
            f"nuclear_norm_bounds refused: {t.size} entries exceeds cap "
            f"{cfg.size_cap} (raise NormConfig.size_cap explicitly)"
        )
    tnorm = frobenius(t)
    if tnorm == 0.0:
        raise ValueError("nuclear norm bounds undefined for the zero tensor")
    rng = np.random.default_rng(cfg.seed)
    sigma, witness = _alternating_spectral(
        t, cfg.restarts, cfg.sweep_tol, cfg.max_sweeps, rng)

    lower = max(sigma, tnorm * tnorm / sigma)
    if t.ndim == 2:
        u, s, vh = np.linalg.svd(t, full_matrices=False)
        polar = u @ vh
        lower = max(lower, abs(inner_product(t, polar)))

    # upper bounds from exact decompositions
    slice_model = _terms_to_model(_slice_terms(t), t.shape)
    upper = float(np.sum(slice_model.weights))
    upper_witness = slice_model
    for cand in cfg.candidates:
        resid = frobenius(t - cp_evaluate(cand))
        if resid <= cfg.fit_tol * max(1.0, tnorm):
            val = float(np.sum(cand.weights)) + resid * math.sqrt(t.size)
            if val < upper:
                upper, upper_witness = val, cand
    if cfg.search and t.ndim >= 3:
        max_terms = cfg.max_terms
        if max_terms is None:
            max_terms = min(t.size // max(t.shape), 8)
        for r in range(1, max_terms + 1):
            got = _penalized_fit(t, r, cfg, rng)
            if got is not None and got[0] < upper:
                upper, upper_witness = got[0], got[1]

    certified = True
    if lower > upper:
        if lower - upper <= 1e-9 * max(1.0, upper):
            lower = upper  # numerical ties collapse to the upper bound
        else:
            certified = False
    certified = certified and (upper - lower) <= cfg.tol * max(upper, 1e-300)
    return NormCertificate(
        spectral=sigma,
        spectral_witness=witness,
        nuclear_lower=lower,
        nuclear_upper=upper,
        upper_witness=upper_witness,
        certified=bool(certified),
    )


def duality_gap_check(f, g, cfg: NormConfig | None = None) -> float:
    """||f||_sigma * (nuclear upper of g) - |<f, g>|; >= -1e-9 must hold."""
    cfg = cfg or NormConfig()
    spec = spectral_norm(f, restarts=cfg.restarts, tol=cfg.sweep_tol,
                         max_sweeps=cfg.max_sweeps, seed=cfg.seed)
    nuc = nuclear_norm_bounds(g, cfg)
    return spec.spectral * nuc.nuclear_upper - abs(inner_product(f, g))


MATMUL_SIZE_CAP = 4


def mat_mult_tensor(n: int) -> np.ndarray:
    """Matrix multiplication tensor T_n in C^{n^2 x n^2 x n^2}.

    Entry ((i,j), (k,l), (m,p)) is 1 exactly when j = k, l = m, p = i
    (the trace-of-product pattern), so there are n^3 ones.
    """
    n = int(n)
    if n < 1 or n > MATMUL_SIZE_CAP:
        raise ValueError(f"matrix multiplication fixture capped at n <= {MATMUL_SIZE_CAP}")
    t = np.zeros((n * n, n * n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                t[i * n + j, j * n + k, k * n + i] = 1.0
    return t


def mat_mult_decomposition(n: int) -> CPModel:
    """Standard n^3-term decomposition of T_n with unit matrix-unit factors.

    Every weight is 1, so the weight sum n^3 certifies the nuclear-norm
    upper bound that is in fact exact for T_n.
    """
    n = int(n)
    if n < 1 or n > MATMUL_SIZE_CAP:
        raise ValueError(f"matrix multiplication fixture capped at n <= {MATMUL_SIZE_CAP}")
    r = n ** 3
    f1 = np.zeros((n * n, r), dtype=np.complex128)
    f2 = np.zeros((n * n, r), dtype=np.complex128)
    f3 = np.zeros((n * n, r), dtype=np.complex128)
    col = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                f1[i * n + j, col] = 1.0
                f2[j * n + k, col] = 1.0
                f3[k * n + i, col] = 1.0
                col += 1
    return CPModel(weights=np.ones(r), factors=(f1, f2, f3))


def strassen_decomposition() -> CPModel:
    """Seven-term decomposition of T_2, certifying rank(T_2) <= 7.

    Together with the certified nuclear norm 8 of T_2 this witnesses that
    the nuclear norm can exceed rank times spectral norm for d = 3.
    """
    x = np.array([
        [1, 0, 0, 1],    # A11 + A22
        [0, 0, 1, 1],    # A21 + A22
        [1, 0, 0, 0],    # A11
        [0, 0, 0, 1],    # A22
        [1, 1, 0, 0],    # A11 + A12
        [-1, 0, 1, 0],   # A21 - A11
        [0, 1, 0, -1],   # A12 - A22
    ], dtype=np.complex128).T
    y = np.array([
        [1, 0, 0, 1],    # B11 + B22
        [1, 0, 0, 0],    # B11
        [0, 1, 0, -1],   # B12 - B22
        [-1, 0, 1, 0],   # B21 - B11
        [0, 0, 0, 1],    # B22
        [1, 1, 0, 0],    # B11 + B12
        [0, 0, 1, 1],    # B21 + B22
    ], dtype=np.complex128).T
    # transposed contribution patterns of each product in the output
    z = np.array([
        [1, 0, 0, 1],    # C11 + C22
        [0, 1, 0, -1],   # C21 - C22
        [0, 0, 1, 1],    # C12 + C22
        [1, 1, 0, 0],    # C11 + C21
        [-1, 0, 1, 0],   # C12 - C11
        [0, 0, 0, 1],    # C22
        [1, 0, 0, 0],    # C11
    ], dtype=np.complex128).T
    return canonicalize(np.ones(7), [x, y, z])
