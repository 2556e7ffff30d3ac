import math

import numpy as np
import pytest

from cohcp.coherence import coherence
from cohcp.conditions import coercivity_lower_bound, temlyakov_condition
from cohcp.core import (
    canonicalize,
    cp_evaluate,
    essentially_equal,
    evaluate_terms,
    frobenius,
    inner_product,
    rank1_outer,
    random_unit_columns,
)
from cohcp.decompose import (
    Dictionary,
    SolverConfig,
    best_rank1,
    constrained_als,
    divergence_witness,
    oga_continuous,
    random_incoherent_dictionary,
    woga,
)
from cohcp.norms import spectral_norm


def orthonormal_atoms(rng, dims=(3, 3, 3), count=3):
    qs = [np.linalg.qr(rng.standard_normal((n, count))
                       + 1j * rng.standard_normal((n, count)))[0] for n in dims]
    return [tuple(q[:, i] for q in qs) for i in range(count)]


def planted_combination(dictionary, indices, coeffs):
    stacks = [np.stack([dictionary.atoms[i][k] for i in indices], axis=1)
              for k in range(dictionary.order)]
    return evaluate_terms(coeffs, stacks)


class TestDictionary:
    def test_atoms_normalized(self):
        rng = np.random.default_rng(0)
        raw = [tuple(3.0 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
                     for _ in range(3)) for _ in range(5)]
        d = Dictionary(raw)
        for i in range(5):
            assert abs(frobenius(d.atom_tensor(i)) - 1.0) < 1e-12

    def test_mu_matches_materialized_atoms(self):
        rng = np.random.default_rng(1)
        d = Dictionary([tuple(rng.standard_normal(3) + 1j * rng.standard_normal(3)
                              for _ in range(3)) for _ in range(6)])
        direct = 0.0
        for p in range(6):
            for q in range(p + 1, 6):
                ip = inner_product(d.atom_tensor(p), d.atom_tensor(q))
                direct = max(direct, abs(ip))
        assert abs(d.mu - direct) < 1e-12

    def test_correlations_match_direct(self):
        rng = np.random.default_rng(2)
        d = Dictionary([tuple(rng.standard_normal(3) + 1j * rng.standard_normal(3)
                              for _ in range(3)) for _ in range(4)])
        f = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
        got = d.correlations(f)
        for i in range(4):
            assert abs(got[i] - inner_product(f, d.atom_tensor(i))) < 1e-12

    def test_incoherent_generator(self):
        d = random_incoherent_dictionary((4, 4, 4), 40, mu_max=0.09, seed=3)
        assert len(d) == 40
        assert 0.0 < d.mu < 0.09


class TestWoga:
    def test_single_atom(self):
        rng = np.random.default_rng(4)
        d = Dictionary([tuple(rng.standard_normal(3) + 1j * rng.standard_normal(3)
                              for _ in range(3)) for _ in range(5)])
        f = 2.0 * d.atom_tensor(3)
        res = woga(f, d, t=1.0)
        assert res.selected[0] == 3
        assert res.residuals[1] < 1e-12
        assert res.converged

    def test_orthonormal_dictionary_exact_coefficients(self):
        rng = np.random.default_rng(5)
        d = Dictionary(orthonormal_atoms(rng))
        f = planted_combination(d, [0, 1], np.array([2.0, 1.0]))
        res = woga(f, d, t=1.0)
        assert sorted(res.selected) == [0, 1]
        # descending selection: strongest atom first
        assert res.selected == [0, 1]
        assert np.allclose(sorted(np.abs(res.coefficients))[::-1], [2.0, 1.0],
                           atol=1e-10)
        assert res.residuals[-1] < 1e-10

    def test_temlyakov_exact_recovery_planted(self):
        d = random_incoherent_dictionary((4, 4, 4), 40, mu_max=0.09, seed=6)
        rng = np.random.default_rng(7)
        idx = rng.choice(40, 5, replace=False)
        coeffs = (0.5 + rng.random(5)) * np.exp(2j * np.pi * rng.random(5))
        f = planted_combination(d, idx, coeffs)
        assert temlyakov_condition(5, d.mu, 1.0)
        res = woga(f, d, t=1.0, max_iter=5)
        assert sorted(res.selected) == sorted(idx.tolist())
        assert res.residuals[-1] <= 1e-10 * frobenius(f)

    def test_residuals_non_increasing(self):
        rng = np.random.default_rng(8)
        d = Dictionary([tuple(rng.standard_normal(3) + 1j * rng.standard_normal(3)
                              for _ in range(3)) for _ in range(12)])
        f = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
        res = woga(f, d, t=0.8, max_iter=8)
        diffs = np.diff(res.residuals)
        assert np.all(diffs <= 1e-10)

    def test_weak_selection_still_decreases(self):
        rng = np.random.default_rng(9)
        d = Dictionary([tuple(rng.standard_normal(4) + 1j * rng.standard_normal(4)
                              for _ in range(3)) for _ in range(10)])
        f = planted_combination(d, [1, 4, 7], np.array([1.0, 0.8, 0.6]))
        res = woga(f, d, t=0.5, max_iter=10)
        assert res.residuals[-1] < res.residuals[0]

    def test_t_domain(self):
        rng = np.random.default_rng(10)
        d = Dictionary([tuple(rng.standard_normal(2) + 1j * rng.standard_normal(2)
                              for _ in range(3)) for _ in range(2)])
        with pytest.raises(ValueError):
            woga(np.zeros((2, 2, 2)), d, t=0.0)


class TestBestRank1:
    def test_exact_rank1(self):
        rng = np.random.default_rng(11)
        vecs = [random_unit_columns(n, 1, rng)[:, 0] for n in (3, 2, 4)]
        weight, factors = best_rank1(3.0 * rank1_outer(vecs))
        assert abs(weight - 3.0) < 1e-10
        recon = weight * rank1_outer(factors)
        assert frobenius(recon - 3.0 * rank1_outer(vecs)) < 1e-8

    def test_matrix_top_pair(self):
        weight, factors = best_rank1(np.diag([3.0, 1.0]).astype(complex))
        assert abs(weight - 3.0) < 1e-10
        assert abs(abs(factors[0][0]) - 1.0) < 1e-8

    def test_agrees_with_spectral_norm(self):
        rng = np.random.default_rng(12)
        t = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
        weight, _ = best_rank1(t, restarts=32, seed=1)
        cert = spectral_norm(t, restarts=32, seed=2)
        assert abs(weight - cert.spectral) < 1e-8 * max(1.0, cert.spectral)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            best_rank1(np.zeros((2, 2)))


class TestOgaContinuous:
    def test_rank1_recovery(self):
        rng = np.random.default_rng(13)
        vecs = [random_unit_columns(n, 1, rng)[:, 0] for n in (3, 3, 3)]
        f = 2.0 * rank1_outer(vecs)
        model, res = oga_continuous(f, 1)
        assert res.residuals[-1] < 1e-10
        assert model.rank == 1
        assert abs(model.weights[0] - 2.0) < 1e-8

    def test_orthogonally_decomposable_exact(self):
        rng = np.random.default_rng(14)
        qs = [np.linalg.qr(rng.standard_normal((4, 3))
                           + 1j * rng.standard_normal((4, 3)))[0] for _ in range(3)]
        truth = canonicalize(np.array([3.0, 2.0, 1.0]), qs)
        f = cp_evaluate(truth)
        model, res = oga_continuous(f, 3)
        assert res.residuals[-1] < 1e-8
        assert essentially_equal(model, truth, 1e-6)

    def test_matrix_matches_svd_tail(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        s = np.linalg.svd(a, compute_uv=False)
        for r in (1, 2, 3):
            _, res = oga_continuous(a, r, restarts=48)
            tail = math.sqrt(float(np.sum(s[r:] ** 2)))
            assert abs(res.residuals[-1] - tail) < 1e-8 * max(1.0, tail)


class TestSolverConfig:
    def test_single_regime_enforced(self):
        with pytest.raises(ValueError):
            SolverConfig(r=2, coherence_caps=(0.5, 0.5, 0.5), tychonoff_lambda=0.1)
        with pytest.raises(ValueError):
            SolverConfig(r=2, tychonoff_lambda=0.1, orthogonality="per-mode")

    def test_cap_domain(self):
        with pytest.raises(ValueError):
            SolverConfig(r=2, coherence_caps=(0.0, 0.5, 0.5))
        with pytest.raises(ValueError):
            SolverConfig(r=2, coherence_caps=(0.5, 1.5, 0.5))


class TestConstrainedAls:
    def test_exact_orthonormal_recovery(self):
        rng = np.random.default_rng(16)
        qs = [np.linalg.qr(rng.standard_normal((5, 3))
                           + 1j * rng.standard_normal((5, 3)))[0] for _ in range(3)]
        truth = canonicalize(np.array([3.0, 2.0, 1.0]), qs)
        f = cp_evaluate(truth)
        model, diag = constrained_als(
            f, SolverConfig(r=3, coherence_caps=(1.0, 1.0, 1.0), seed=0))
        assert diag.final_residual < 1e-10
        assert essentially_equal(model, truth, 1e-6)

    def test_noisy_recovery_with_margins(self):
        rng = np.random.default_rng(17)
        # well-separated factors with coherences within the combined bound
        qs = []
        for n in (6, 6, 6):
            q = np.linalg.qr(rng.standard_normal((n, 2))
                             + 1j * rng.standard_normal((n, 2)))[0]
            qs.append(q)
        truth = canonicalize(np.array([2.0, 1.0]), qs)
        f = cp_evaluate(truth)
        noise = rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape)
        noise *= 0.01 * frobenius(f) / frobenius(noise)
        model, diag = constrained_als(f + noise, SolverConfig(r=2, seed=0))
        assert essentially_equal(model, truth, 0.05)

    def test_tychonoff_trace_monotone(self):
        rng = np.random.default_rng(18)
        f = rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4))
        _, diag = constrained_als(
            f, SolverConfig(r=3, tychonoff_lambda=0.05, seed=1, init="random",
                            max_iter=300))
        tr = np.array(diag.loss_trace)
        assert np.all(np.diff(tr) <= 1e-9 * max(1.0, tr[0]))

    def test_unconstrained_trace_monotone(self):
        rng = np.random.default_rng(19)
        f = rng.standard_normal((4, 3, 4)) + 1j * rng.standard_normal((4, 3, 4))
        _, diag = constrained_als(
            f, SolverConfig(r=2, seed=2, init="random", max_iter=200))
        tr = np.array(diag.loss_trace)
        assert np.all(np.diff(tr) <= 1e-9 * max(1.0, tr[0]))

    def test_nonexistence_target_capped_weights_bounded(self):
        e1 = np.array([1.0, 0.0], dtype=complex)
        e2 = np.array([0.0, 1.0], dtype=complex)
        target = (rank1_outer([e2, e1, e1]) + rank1_outer([e1, e2, e1])
                  + rank1_outer([e1, e1, e2]))
        caps = (0.9, 0.9, 0.9)
        prod = 0.9 ** 3
        for seed in range(10):
            model, diag = constrained_als(
                target, SolverConfig(r=2, coherence_caps=caps, seed=seed,
                                     max_iter=800))
            assert all(mu <= 0.9 + 1e-6 for mu in diag.achieved_mus)
            # coercivity confines the weights on any loss level set
            level = frobenius(cp_evaluate(model))
            bound = level ** 2 / (1.0 - prod)
            assert float(np.sum(model.weights ** 2)) <= bound + 1e-6

    def test_nonexistence_target_uncapped_weights_grow(self):
        e1 = np.array([1.0, 0.0], dtype=complex)
        e2 = np.array([0.0, 1.0], dtype=complex)
        target = (rank1_outer([e2, e1, e1]) + rank1_outer([e1, e2, e1])
                  + rank1_outer([e1, e1, e2]))
        tops = []
        for iters in (50, 400, 3200):
            model, _ = constrained_als(
                target, SolverConfig(r=2, seed=0, max_iter=iters, tol=0.0))
            tops.append(model.weights[0])
        assert tops[0] < tops[1] < tops[2]

    def test_coercivity_invariant_on_outputs(self):
        rng = np.random.default_rng(20)
        f = rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4))
        model, diag = constrained_als(f, SolverConfig(r=2, seed=3, max_iter=100))
        mus = [min(m, 1.0) for m in diag.achieved_mus]
        lhs = frobenius(cp_evaluate(model)) ** 2
        assert lhs >= coercivity_lower_bound(model.weights, mus) - 1e-9

    def test_per_mode_orthogonality(self):
        rng = np.random.default_rng(21)
        qs = [np.linalg.qr(rng.standard_normal((5, 2))
                           + 1j * rng.standard_normal((5, 2)))[0] for _ in range(3)]
        truth = canonicalize(np.array([2.0, 1.0]), qs)
        f = cp_evaluate(truth)
        model, diag = constrained_als(
            f, SolverConfig(r=2, orthogonality="per-mode", seed=0))
        assert diag.final_residual < 1e-8
        for fk in model.factors:
            gram = np.asarray(fk).conj().T @ np.asarray(fk)
            assert np.allclose(gram, np.eye(2), atol=1e-8)

    def test_separable_orthogonality(self):
        rng = np.random.default_rng(22)
        qs = [np.linalg.qr(rng.standard_normal((n, 2))
                           + 1j * rng.standard_normal((n, 2)))[0]
              for n in (3, 3, 6)]
        truth = canonicalize(np.array([2.0, 1.0]), qs)
        f = cp_evaluate(truth)
        model, diag = constrained_als(
            f, SolverConfig(r=2, orthogonality="separable", seed=0))
        assert diag.final_residual < 1e-8
        # the widest mode carries the orthogonality
        fk = np.asarray(model.factors[2])
        assert np.allclose(fk.conj().T @ fk, np.eye(2), atol=1e-8)

    def test_rejects_nonfinite(self):
        bad = np.full((2, 2, 2), np.nan, dtype=complex)
        with pytest.raises(ValueError):
            constrained_als(bad, SolverConfig(r=1))

    def test_rejects_oversized_rank(self):
        with pytest.raises(ValueError):
            constrained_als(np.ones((2, 2)), SolverConfig(r=5))


class TestDivergenceWitness:
    def test_matches_entrywise_formulas(self):
        rng = np.random.default_rng(23)
        phis = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(3)]
        psis = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(3)]
        n = 10
        recs = divergence_witness(phis, psis, [n])
        # independent entrywise oracle of both displayed expressions
        target = np.zeros((3, 3, 3), dtype=complex)
        f_n = np.zeros((3, 3, 3), dtype=complex)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    target[i, j, k] = (psis[0][i] * phis[1][j] * phis[2][k]
                                       + phis[0][i] * psis[1][j] * phis[2][k]
                                       + phis[0][i] * phis[1][j] * psis[2][k])
                    f_n[i, j, k] = (n * (phis[0][i] + psis[0][i] / n)
                                    * (phis[1][j] + psis[1][j] / n)
                                    * (phis[2][k] + psis[2][k] / n)
                                    - n * phis[0][i] * phis[1][j] * phis[2][k])
        oracle_loss = frobenius(target - f_n)
        assert abs(recs[0]["loss"] - oracle_loss) < 1e-12 * max(1.0, oracle_loss)
        oracle_weight = n * float(np.prod(
            [np.linalg.norm(phis[k] + psis[k] / n) for k in range(3)]))
        assert abs(recs[0]["max_weight"] - oracle_weight) < 1e-12 * oracle_weight

    def test_loss_halves_when_n_doubles(self):
        e1 = np.array([1.0, 0.0], dtype=complex)
        e2 = np.array([0.0, 1.0], dtype=complex)
        recs = divergence_witness([e1] * 3, [e2] * 3, [32, 64, 128])
        for a, b in zip(recs[:-1], recs[1:]):
            ratio = a["loss"] / b["loss"]
            assert abs(ratio - 2.0) < 0.2

    def test_coherences_approach_one(self):
        e1 = np.array([1.0, 0.0], dtype=complex)
        e2 = np.array([0.0, 1.0], dtype=complex)
        for rec in divergence_witness([e1] * 3, [e2] * 3, [8, 16, 64]):
            n = rec["n"]
            assert min(rec["mode_coherences"]) >= 1.0 - 5.0 / n

    def test_rejects_dependent_pairs(self):
        v = np.array([1.0, 1.0], dtype=complex)
        with pytest.raises(ValueError, match="dependent"):
            divergence_witness([v] * 3, [2.0 * v, v, v], [4])
