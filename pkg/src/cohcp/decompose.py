"""Greedy and alternating solvers for low-rank multilinear decomposition.

Contains the weakly orthogonal greedy algorithm over a finite dictionary of
separable atoms, its continuous counterpart driven by best rank-1
selection, a coherence-constrained / Tychonoff-regularized alternating
least squares solver, and the explicit rank-2 sequence witnessing that a
best rank-r approximation can fail to exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    canonicalize,
    cp_evaluate,
    evaluate_terms,
    frobenius,
    inner_product,
    rank1_outer,
    random_unit_columns,
)
from .norms import _alternating_spectral, _khatri_rao_but, _term_correlations, _term_gram


class Dictionary:
    """Finite dictionary of unit-norm separable atoms stored as factor
    tuples (never materialized as dense tensors).

    Atom inner products use the per-mode product formula, so the dictionary
    coherence is max over distinct atom pairs of prod_k |<phi_k, psi_k>|.
    """

    def __init__(self, atoms):
        if len(atoms) == 0:
            raise ValueError("dictionary must contain at least one atom")
        d = len(atoms[0])
        norm_atoms = []
        for atom in atoms:
            if len(atom) != d:
                raise ValueError("all atoms must have the same number of modes")
            vecs = []
            for v in atom:
                v = np.asarray(v, dtype=np.complex128)
                nrm = np.linalg.norm(v)
                if v.ndim != 1 or nrm == 0.0:
                    raise ValueError("atom factors must be nonzero vectors")
                vecs.append(v / nrm)
            norm_atoms.append(tuple(vecs))
        self.atoms = tuple(norm_atoms)
        self.order = d
        self.dims = tuple(len(v) for v in self.atoms[0])
        for atom in self.atoms:
            if tuple(len(v) for v in atom) != self.dims:
                raise ValueError("all atoms must share the same mode dimensions")
        self._stacks = tuple(
            np.stack([atom[k] for atom in self.atoms], axis=1) for k in range(d)
        )
        gram = np.ones((len(self.atoms), len(self.atoms)), dtype=np.complex128)
        for s in self._stacks:
            gram *= s.conj().T @ s
        self.gram = gram
        off = np.abs(gram).copy()
        np.fill_diagonal(off, 0.0)
        self.mu = float(np.max(off)) if len(self.atoms) > 1 else 0.0

    def __len__(self):
        return len(self.atoms)

    def correlations(self, tensor) -> np.ndarray:
        """<T, g> for every atom g, via one batched contraction."""
        return _term_correlations(np.asarray(tensor, dtype=np.complex128),
                                  self._stacks)

    def atom_tensor(self, index: int) -> np.ndarray:
        return rank1_outer(self.atoms[index])


@dataclass
class GreedyResult:
    """Selection trace of a greedy run.

    ``residuals[m]`` is the residual norm after m iterations
    (``residuals[0] = ||f||``); the sequence is non-increasing because the
    projection spaces are nested.
    """

    selected: list
    coefficients: np.ndarray
    residuals: list
    converged: bool
    flags: list = field(default_factory=list)


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, flags: list):
    try:
        cond = np.linalg.cond(gram)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e12:
        if "singular_gram_pseudoinverse" not in flags:
            flags.append("singular_gram_pseudoinverse")
        return np.linalg.pinv(gram, rcond=1e-12) @ rhs
    return np.linalg.solve(gram, rhs)


def woga(tensor, dictionary: Dictionary, t: float = 1.0,
         max_iter: int | None = None, tol: float = 1e-12) -> GreedyResult:
    """Weakly orthogonal greedy algorithm over a finite dictionary.

    Per iteration: select the first atom g_m whose correlation with the
    current residual reaches t times the maximum; orthogonally project the
    original f onto span(g_1, .., g_m) by solving the Gram system; deflate.
    Stops when the residual norm drops to ``tol`` or after ``max_iter``
    iterations (default: dictionary size).
    """
    if not (0.0 < t <= 1.0):
        raise ValueError("weakness parameter t must lie in (0, 1]")
    f = np.asarray(tensor, dtype=np.complex128)
    if f.shape != dictionary.dims:
        raise ValueError(f"tensor dims {f.shape} do not match dictionary {dictionary.dims}")
    if max_iter is None:
        max_iter = len(dictionary)

    fnorm2 = frobenius(f) ** 2
    b_all = dictionary.correlations(f)
    selected: list = []
    flags: list = []
    coeffs = np.zeros(0, dtype=np.complex128)
    residuals = [math.sqrt(fnorm2)]
    converged = residuals[0] <= tol
    m = 0
    while not converged and m < max_iter:
        # residual correlations without materializing the residual
        if selected:
            res_corr = b_all - dictionary.gram[:, selected] @ coeffs
        else:
            res_corr = b_all
        scores = np.abs(res_corr)
        threshold = t * float(np.max(scores))
        if threshold <= 0.0:
            flags.append("residual_orthogonal_to_dictionary")
            break
        pick = int(np.argmax(scores >= threshold))
        selected.append(pick)
        sub = np.ix_(selected, selected)
        gram = dictionary.gram[sub]
        rhs = b_all[selected]
        coeffs = _solve_gram(gram, rhs, flags)
        # materialized residual: the Gram identity ||f||^2 - <h_m, f>
        # cancels catastrophically once the fit is nearly exact
        stacks = [np.stack([dictionary.atoms[i][k] for i in selected], axis=1)
                  for k in range(f.ndim)]
        residuals.append(frobenius(f - evaluate_terms(coeffs, stacks)))
        converged = residuals[-1] <= tol
        m += 1
    return GreedyResult(selected=selected, coefficients=coeffs,
                        residuals=residuals, converged=converged, flags=flags)


def best_rank1(tensor, restarts: int = 32, tol: float = 1e-13,
               max_sweeps: int = 500, seed: int = 0):
    """Best separable (rank-1) approximation: the spectral-norm witness.

    Returns (weight, factors) with unit factors maximizing
    |<T, phi_1 (x) ... (x) phi_d>| and weight equal to that value.
    """
    f = np.asarray(tensor, dtype=np.complex128)
    if frobenius(f) == 0.0:
        raise ValueError("best rank-1 term undefined for the zero tensor")
    rng = np.random.default_rng(seed)
    value, witness = _alternating_spectral(f, restarts, tol, max_sweeps, rng)
    return value, witness


def oga_continuous(tensor, r: int, restarts: int = 32, tol: float = 1e-12,
                   seed: int = 0):
    """Greedy rank-1 deflation with joint reprojection, r terms.

    Baseline only: atom selection over the continuous separable manifold,
    orthogonal projection of f onto the span of all selected rank-1 terms,
    deflation.  Deflation alone carries no optimality guarantee for d >= 3;
    early stop (flagged) on three consecutive stagnating iterations.

    Returns (CPModel, GreedyResult); ``selected`` holds the factor tuples.
    """
    f = np.asarray(tensor, dtype=np.complex128)
    if r < 1:
        raise ValueError("r must be >= 1")
    fnorm2 = frobenius(f) ** 2
    atoms: list = []
    flags: list = []
    residuals = [math.sqrt(fnorm2)]
    coeffs = np.zeros(0, dtype=np.complex128)
    residual = f
    stagnant = 0
    for m in range(r):
        if residuals[-1] <= tol:
            break
        weight, factors = best_rank1(residual, restarts=restarts,
                                     seed=seed + m)
        atoms.append(factors)
        stacks = [np.stack([a[k] for a in atoms], axis=1)
                  for k in range(f.ndim)]
        gram = _term_gram(stacks)
        rhs = _term_correlations(f, stacks)
        coeffs = _solve_gram(gram, rhs, flags)
        residual = f - evaluate_terms(coeffs, stacks)
        residuals.append(frobenius(residual))
        if residuals[-2] - residuals[-1] < tol * max(1.0, residuals[0]):
            stagnant += 1
            if stagnant >= 3:
                flags.append("stagnation_early_stop")
                break
        else:
            stagnant = 0
    stacks = [np.stack([a[k] for a in atoms], axis=1) for k in range(f.ndim)]
    model = canonicalize(coeffs, stacks)
    result = GreedyResult(selected=atoms, coefficients=coeffs,
                          residuals=residuals,
                          converged=residuals[-1] <= tol, flags=flags)
    return model, result


def random_incoherent_dictionary(dims, n_atoms: int, mu_max: float = 0.09,
                                 seed: int = 0, jitter: float = 0.015,
                                 max_tries: int = 50) -> Dictionary:
    """Random separable-atom dictionary with measured coherence below mu_max.

    Plain i.i.d. atoms in small dimensions are far too coherent, so atoms
    are built from random per-mode unitary bases at distinct index tuples
    (pairwise orthogonal before perturbation) and then jittered; the
    measured coherence scales with ``jitter``.  Draws are repeated
    deterministically until the measured coherence clears ``mu_max``.
    """
    dims = tuple(int(n) for n in dims)
    total = math.prod(dims)
    if n_atoms > total:
        raise ValueError(f"cannot place {n_atoms} distinct atoms in {dims}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        bases = []
        for n in dims:
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            bases.append(np.linalg.qr(g)[0])
        flat = rng.choice(total, size=n_atoms, replace=False)
        tuples = [np.unravel_index(ix, dims) for ix in flat]
        atoms = []
        for tup in tuples:
            vecs = []
            for k, n in enumerate(dims):
                g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                v = bases[k][:, tup[k]] + jitter * g
                vecs.append(v / np.linalg.norm(v))
            atoms.append(tuple(vecs))
        dictionary = Dictionary(atoms)
        if dictionary.mu < mu_max:
            return dictionary
    raise ValueError(
        f"could not reach dictionary coherence < {mu_max} in {max_tries} draws"
    )


ORTHO_NONE = "none"
ORTHO_PER_MODE = "per-mode"
ORTHO_SEPARABLE = "separable"


@dataclass(frozen=True)
class SolverConfig:
    """Configuration of the constrained alternating solver.

    Exactly one constraint regime may be active: per-mode coherence caps,
    Tychonoff weight regularization, or orthogonality (per-mode = every
    factor set orthonormal; separable = one mode orthonormal, which makes
    the rank-1 terms mutually orthogonal).
    """

    r: int
    coherence_caps: tuple | None = None
    tychonoff_lambda: float = 0.0
    orthogonality: str = ORTHO_NONE
    max_iter: int = 2000
    tol: float = 1e-10
    seed: int = 0
    init: str = "greedy"  # "greedy" (rank-1 deflation warm start) or "random"

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("target rank must be >= 1")
        active = [
            self.coherence_caps is not None,
            self.tychonoff_lambda > 0.0,
            self.orthogonality != ORTHO_NONE,
        ]
        if sum(active) > 1:
            raise ValueError("at most one constraint regime may be active")
        if self.coherence_caps is not None:
            caps = tuple(float(c) for c in self.coherence_caps)
            if any(not (0.0 < c <= 1.0) for c in caps):
                raise ValueError("coherence caps must lie in (0, 1]")
            object.__setattr__(self, "coherence_caps", caps)
        if self.tychonoff_lambda < 0.0:
            raise ValueError("tychonoff_lambda must be >= 0")
        if self.orthogonality not in (ORTHO_NONE, ORTHO_PER_MODE, ORTHO_SEPARABLE):
            raise ValueError(f"unknown orthogonality regime {self.orthogonality!r}")


@dataclass
class AlsDiagnostics:
    loss_trace: list
    final_residual: float
    achieved_mus: list
    converged: bool
    n_iter: int
    flags: list = field(default_factory=list)


def _project_coherence(v: np.ndarray, cap: float, max_passes: int = 20,
                       flags: list | None = None) -> np.ndarray:
    """Restore the per-mode coherence cap by pairwise rotations.

    Repeatedly takes the worst offending pair and rotates both columns
    symmetrically apart within their 2-D span until |<u, w>| equals the
    cap; passes are capped, with a flag if still infeasible.
    """
    v = v.copy()
    r = v.shape[1]
    if r < 2:
        return v
    for _ in range(max_passes):
        gram = np.abs(v.conj().T @ v)
        np.fill_diagonal(gram, 0.0)
        worst = float(np.max(gram))
        if worst <= cap + 1e-12:
            return v
        p, q = divmod(int(np.argmax(gram)), r)
        u, w = v[:, p], v[:, q]
        ip = np.vdot(u, w)
        phase = ip / abs(ip)
        w_al = w * phase.conjugate()  # now the pair inner product is real positive
        c = min(float(np.real(np.vdot(u, w_al))), 1.0 - 1e-15)
        # the pair spans a real plane; rotate both away from the bisector
        # until the angle matches the cap
        half_target = math.acos(max(min(cap, 1.0), -1.0)) / 2.0
        bis = u + w_al
        bis = bis / np.linalg.norm(bis)
        perp = w_al - np.vdot(bis, w_al) * bis
        pn = np.linalg.norm(perp)
        if pn < 1e-14:
            # collinear pair: split along a deterministic orthogonal direction
            base = np.zeros_like(u)
            base[int(np.argmin(np.abs(u)))] = 1.0
            perp = base - np.vdot(bis, base) * bis
            pn = np.linalg.norm(perp)
        perp = perp / pn
        v[:, p] = math.cos(half_target) * bis - math.sin(half_target) * perp
        v[:, q] = (math.cos(half_target) * bis + math.sin(half_target) * perp) * phase
        v[:, p] /= np.linalg.norm(v[:, p])
        v[:, q] /= np.linalg.norm(v[:, q])
    if flags is not None and "coherence_projection_incomplete" not in flags:
        flags.append("coherence_projection_incomplete")
    return v


def _init_factors(f, r, d, dims, cfg, flags):
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "greedy":
        try:
            model, _ = oga_continuous(f, r, restarts=16, seed=cfg.seed)
        except ValueError:
            flags.append("greedy_init_failed_fallback_random")
        else:
            r0 = model.rank
            if r0 == r:
                return [np.array(fac) for fac in model.factors], \
                    model.weights.astype(np.complex128)
            if 0 < r0 < r:
                # pad the greedy warm start with fresh random components
                facs = [np.hstack([np.array(fac), random_unit_columns(n, r - r0, rng)])
                        for fac, n in zip(model.factors, dims)]
                lam = np.concatenate([
                    model.weights.astype(np.complex128),
                    np.full(r - r0, 1e-3 * max(model.weights[0], 1e-12),
                            dtype=np.complex128),
                ])
                flags.append("greedy_init_padded")
                return facs, lam
            flags.append("greedy_init_degenerate_fallback_random")
    return [random_unit_columns(n, r, rng) for n in dims], \
        np.ones(r, dtype=np.complex128)


def constrained_als(tensor, cfg: SolverConfig):
    """Alternating least squares for min ||f - sum_p lambda_p (x)_k phi_kp||^2,
    optionally Tychonoff-regularized (+ lam_reg sum |lambda_p|^2), with
    coherence caps enforced by post-update projection or orthogonality
    enforced by Procrustes updates.

    Per sweep, each mode solves an exact (ridge) least-squares block, so
    the objective trace is monotone non-increasing in the unconstrained and
    Tychonoff regimes.  Weight positivity is a representation choice and is
    restored by canonicalization after convergence.

    Returns (CPModel, AlsDiagnostics).
    """
    f = np.asarray(tensor, dtype=np.complex128)
    if not np.all(np.isfinite(f.real)) or not np.all(np.isfinite(f.imag)):
        raise ValueError("tensor contains non-finite entries")
    d = f.ndim
    dims = f.shape
    r = cfg.r
    if r > f.size:
        raise ValueError(f"rank {r} exceeds tensor size {f.size}")
    flags: list = []
    if cfg.coherence_caps is not None:
        if len(cfg.coherence_caps) != d:
            raise ValueError("need one coherence cap per mode")
        prod_caps = float(np.prod(cfg.coherence_caps))
        if r > 1 and prod_caps >= 1.0 / (r - 1):
            flags.append("existence_condition_violated_by_caps")
    ortho_mode = None
    if cfg.orthogonality == ORTHO_PER_MODE:
        if r > min(dims):
            raise ValueError("per-mode orthogonality needs r <= min(n_k)")
    elif cfg.orthogonality == ORTHO_SEPARABLE:
        ortho_mode = int(np.argmax(dims))
        if r > dims[ortho_mode]:
            raise ValueError("separable orthogonality needs r <= max(n_k)")

    factors, lam = _init_factors(f, r, d, dims, cfg, flags)
    unfolds = [np.moveaxis(f, k, 0).reshape(dims[k], -1) for k in range(d)]
    lam_reg = cfg.tychonoff_lambda

    def objective() -> float:
        res = frobenius(f - evaluate_terms(lam, factors)) ** 2
        if lam_reg > 0:
            res += lam_reg * float(np.sum(np.abs(lam) ** 2))
        return res

    loss_trace = [objective()]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        for k in range(d):
            z = _khatri_rao_but(factors, k)
            if cfg.orthogonality != ORTHO_NONE and (
                    cfg.orthogonality == ORTHO_PER_MODE or k == ortho_mode):
                # Procrustes: min ||X_k - Q diag(lam) Z^T|| over unitary-column Q
                m = unfolds[k] @ z.conj() @ np.diag(lam.conj())
                uu, _, vv = np.linalg.svd(m, full_matrices=False)
                factors[k] = uu @ vv
            else:
                if lam_reg > 0:
                    # ridge block: (Z^H Z + reg I) C^T = (X Z-bar)^T
                    g = z.conj().T @ z + lam_reg * np.eye(r)
                    c = np.linalg.solve(g, (unfolds[k] @ z.conj()).T).T
                else:
                    c = np.linalg.lstsq(z, unfolds[k].T, rcond=None)[0].T
                nrm = np.linalg.norm(c, axis=0)
                dead = nrm <= 1e-300
                if np.any(dead):
                    if "dead_component_reseeded" not in flags:
                        flags.append("dead_component_reseeded")
                    rng = np.random.default_rng(cfg.seed + 977 + it)
                    c[:, dead] = random_unit_columns(dims[k], int(dead.sum()), rng) \
                        * (1e-6 * max(np.max(nrm), 1e-6))
                    nrm = np.linalg.norm(c, axis=0)
                lam = nrm.astype(np.complex128)
                factors[k] = c / nrm
            if cfg.coherence_caps is not None:
                cap = cfg.coherence_caps[k]
                mu_k = _mode_mu(factors[k])
                if mu_k > cap:
                    factors[k] = _project_coherence(factors[k], cap, flags=flags)
        # global weight re-solve
        gram = _term_gram(factors)
        rhs = _term_correlations(f, factors)
        if lam_reg > 0:
            lam = np.linalg.solve(gram + lam_reg * np.eye(r), rhs)
        else:
            lam = _solve_gram(gram, rhs, flags)
        loss_trace.append(objective())
        prev, cur = loss_trace[-2], loss_trace[-1]
        if abs(prev - cur) <= cfg.tol * max(1.0, prev):
            converged = True
            break

    model = canonicalize(lam, factors)
    achieved = [_mode_mu(np.asarray(fk)) for fk in model.factors]
    diag = AlsDiagnostics(
        loss_trace=loss_trace,
        final_residual=frobenius(f - cp_evaluate(model)),
        achieved_mus=achieved,
        converged=converged,
        n_iter=it,
        flags=flags,
    )
    return model, diag


def _mode_mu(v: np.ndarray) -> float:
    if v.shape[1] < 2:
        return 0.0
    g = np.abs(v.conj().T @ v)
    np.fill_diagonal(g, 0.0)
    return float(np.max(g))


def divergence_witness(phis, psis, ns):
    """Explicit nonexistence mechanism: rank-2 approximants of a rank-3
    target whose loss vanishes while the leading weight diverges.

    From per-mode linearly independent pairs (phi_k, psi_k), builds the
    rank-3 target

        f = psi_1 (x) phi_2 (x) phi_3 + phi_1 (x) psi_2 (x) phi_3
            + phi_1 (x) phi_2 (x) psi_3

    and, per n, the rank-2 approximant

        f_n = n (phi_1 + psi_1/n) (x) (phi_2 + psi_2/n) (x) (phi_3 + psi_3/n)
              - n phi_1 (x) phi_2 (x) phi_3.

    Returns a list of records (n, loss, max_weight, mode coherences
    mu(g_k, h_k) of the two normalized rank-2 factors per mode): the loss
    decays as O(1/n), the weight grows as n, and every mode coherence
    approaches 1.
    """
    if len(phis) != 3 or len(psis) != 3:
        raise ValueError("need exactly three (phi_k, psi_k) pairs")
    phis = [np.asarray(v, dtype=np.complex128) for v in phis]
    psis = [np.asarray(v, dtype=np.complex128) for v in psis]
    for k in range(3):
        pair = np.stack([phis[k], psis[k]], axis=1)
        s = np.linalg.svd(pair, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            raise ValueError(f"mode {k}: phi and psi are linearly dependent")
    target = (
        rank1_outer([psis[0], phis[1], phis[2]])
        + rank1_outer([phis[0], psis[1], phis[2]])
        + rank1_outer([phis[0], phis[1], psis[2]])
    )
    records = []
    for n in ns:
        n = int(n)
        if n < 1:
            raise ValueError("n values must be positive")
        mixed = [phis[k] + psis[k] / n for k in range(3)]
        f_n = n * rank1_outer(mixed) - n * rank1_outer(phis)
        loss = frobenius(target - f_n)
        weight = n * float(np.prod([np.linalg.norm(v) for v in mixed]))
        mus = []
        for k in range(3):
            g = mixed[k] / np.linalg.norm(mixed[k])
            h = phis[k] / np.linalg.norm(phis[k])
            mus.append(abs(inner_product(g, h)))
        records.append({
            "n": n,
            "loss": float(loss),
            "max_weight": float(weight),
            "mode_coherences": mus,
        })
    return records
