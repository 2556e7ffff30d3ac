"""Command-line surface: reproducible, scriptable runs with JSON reports.

Every run is deterministic given its flags and seed; reports are versioned
JSON with numbers carrying 17 significant digits (excluding the timestamp
field, byte-identical across repeated runs).  Exit codes: 0 success,
2 validation error, 3 numerical non-convergence (the uncertified result is
still written).
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys

import numpy as np

from . import __version__
from .coherence import coherence, krank_lower_bound, kruskal_rank_bruteforce
from .conditions import condition_report, temlyakov_condition
from .core import frobenius
from .decompose import (
    Dictionary,
    SolverConfig,
    constrained_als,
    divergence_witness,
    oga_continuous,
    random_incoherent_dictionary,
    woga,
)
from .htns import read_htns, write_htns
from .norms import NormConfig, mat_mult_decomposition, mat_mult_tensor, nuclear_norm_bounds
from .simulate import (
    ArrayScene,
    CdmaScene,
    PathSet,
    effective_codes,
    has_resolvent_triad,
    simulate_array,
    simulate_cdma,
    simulate_fluorescence,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3


class ValidationError(Exception):
    pass


# ---------------------------------------------------------------- reports


def _num(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if float(x) == int(x) and abs(x) < 1e15:
        return format(x, ".1f")
    return format(x, ".17g")


def _serialize(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return f"[{_num(obj.real)}, {_num(obj.imag)}]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _serialize(obj.tolist())
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_serialize(v)}"
                          for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_serialize(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def render_report(payload: dict) -> str:
    body = {"report_version": 1,
            "generator": f"cohcp {__version__}",
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    body.update(payload)
    return _serialize(body) + "\n"


def _emit(report: dict, out: str | None) -> None:
    text = render_report(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _complex_matrix(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(np.complex128)
    raise ValidationError("expected a matrix of numbers or [re, im] pairs")


def _model_payload(model) -> dict:
    return {
        "r": model.rank,
        "dims": list(model.dims),
        "weights": [float(w) for w in model.weights],
        "factors": [f for f in model.factors],
        "dropped_terms": model.dropped_terms,
    }


def _parse_float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------- commands


def _cmd_coherence(args) -> int:
    mat = read_htns(args.input)
    if mat.ndim != 2:
        raise ValidationError("coherence expects an HTNS1 factor matrix (d = 2)")
    rep = coherence(mat)
    r = mat.shape[1]
    out = {
        "command": "coherence",
        "n": mat.shape[0],
        "r": r,
        "mu": rep.mu,
        "omega": rep.omega,
        "argpair": list(rep.argpair) if rep.argpair else None,
    }
    if rep.mu > 0:
        out["krank_lower_bound"] = krank_lower_bound(rep)
    else:
        out["krank_lower_bound"] = r
        out["note"] = "orthonormal set: krank = r, coherence bound not applicable"
    if r <= args.budget:
        out["krank_bruteforce"] = kruskal_rank_bruteforce(mat, budget=args.budget)
        out["spark"] = out["krank_bruteforce"] + 1
    else:
        out["krank_bruteforce"] = None
        out["note_krank"] = f"r={r} exceeds brute-force budget {args.budget}"
    _emit(out, args.out)
    return EXIT_OK


def _cmd_check(args) -> int:
    if args.mus:
        mus = _parse_float_list(args.mus)
    elif args.factors:
        mus = [coherence(read_htns(p)).mu for p in args.factors]
    else:
        raise ValidationError("check needs --mus or --factors")
    if args.d is not None and args.d != len(mus):
        raise ValidationError(f"--d {args.d} does not match {len(mus)} coherences")
    kranks = [int(k) for k in _parse_float_list(args.kranks)] if args.kranks else None
    report = condition_report(mus, args.r, kranks=kranks)
    report["command"] = "check"
    _emit(report, args.out)
    return EXIT_OK


def _parse_fixture(text: str):
    kind, _, arg = text.partition(":")
    if kind != "matmul":
        raise ValidationError(f"unknown fixture {text!r}; expected matmul:n")
    try:
        n = int(arg)
    except ValueError:
        raise ValidationError(f"bad fixture size in {text!r}")
    return mat_mult_tensor(n), (mat_mult_decomposition(n),)


def _cmd_norms(args) -> int:
    candidates = ()
    if args.fixture:
        tensor, candidates = _parse_fixture(args.fixture)
    elif args.input:
        tensor = read_htns(args.input)
    else:
        raise ValidationError("norms needs --input or --fixture")
    cfg = NormConfig(
        tol=args.tol,
        size_cap=args.size_cap,
        restarts=args.restarts,
        seed=args.seed,
        search=not args.no_search,
        candidates=candidates,
    )
    cert = nuclear_norm_bounds(tensor, cfg)
    out = {
        "command": "norms",
        "dims": list(tensor.shape),
        "spectral": cert.spectral,
        "spectral_witness": list(cert.spectral_witness) if cert.spectral_witness else None,
        "nuclear_lower": cert.nuclear_lower,
        "nuclear_upper": cert.nuclear_upper,
        "certified": cert.certified,
        "upper_witness": _model_payload(cert.upper_witness) if cert.upper_witness else None,
    }
    _emit(out, args.out)
    return EXIT_OK if cert.certified else EXIT_NOT_CONVERGED


def _load_dictionary(path: str) -> Dictionary:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "atoms" not in doc:
        raise ValidationError("dictionary JSON must contain an 'atoms' list")
    atoms = []
    for atom in doc["atoms"]:
        vecs = []
        for vec in atom:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim == 2 and arr.shape[1] == 2:
                vecs.append(arr[:, 0] + 1j * arr[:, 1])
            elif arr.ndim == 1:
                vecs.append(arr.astype(np.complex128))
            else:
                raise ValidationError("atom vectors must be numbers or [re, im] pairs")
        atoms.append(tuple(vecs))
    return Dictionary(atoms)


def _cmd_decompose(args) -> int:
    f = read_htns(args.input)
    exit_code = EXIT_OK
    out: dict = {"command": "decompose", "method": args.method,
                 "dims": list(f.shape), "seed": args.seed}
    if args.method == "als":
        caps = tuple(_parse_float_list(args.caps)) if args.caps else None
        cfg = SolverConfig(
            r=args.rank,
            coherence_caps=caps,
            tychonoff_lambda=args.tychonoff,
            orthogonality=args.ortho,
            max_iter=args.max_iter,
            tol=args.tol,
            seed=args.seed,
        )
        model, diag = constrained_als(f, cfg)
        out.update(_model_payload(model))
        out["residual"] = diag.final_residual
        out["relative_residual"] = diag.final_residual / max(frobenius(f), 1e-300)
        out["achieved_coherences"] = diag.achieved_mus
        out["converged"] = diag.converged
        out["n_iter"] = diag.n_iter
        out["flags"] = diag.flags
        out["conditions"] = condition_report(diag.achieved_mus, model.rank or 1)
        if not diag.converged:
            exit_code = EXIT_NOT_CONVERGED
    elif args.method == "oga":
        model, res = oga_continuous(f, args.rank, seed=args.seed, tol=args.tol)
        out.update(_model_payload(model))
        out["residuals"] = res.residuals
        out["residual"] = res.residuals[-1]
        out["converged"] = res.converged
        out["flags"] = res.flags
        mus = [coherence(np.asarray(fk)).mu if model.rank > 1 else 0.0
               for fk in model.factors]
        out["achieved_coherences"] = mus
        out["conditions"] = condition_report(mus, model.rank or 1)
    elif args.method == "woga":
        if not args.dictionary:
            raise ValidationError("woga needs --dict with a dictionary JSON file")
        dictionary = _load_dictionary(args.dictionary)
        res = woga(f, dictionary, t=args.t, max_iter=args.max_iter, tol=args.tol)
        out["selected"] = res.selected
        out["coefficients"] = res.coefficients
        out["residuals"] = res.residuals
        out["converged"] = res.converged
        out["flags"] = res.flags
        out["dictionary_mu"] = dictionary.mu
        out["temlyakov_condition_r"] = temlyakov_condition(
            max(args.rank, 1), dictionary.mu, args.t) if dictionary.mu < 1 else False
        if not res.converged:
            exit_code = EXIT_NOT_CONVERGED
    else:
        raise ValidationError(f"unknown method {args.method!r}")
    _emit(out, args.out)
    return exit_code


def _signals_from_spec(spec, n3_default: int, r: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if isinstance(spec, dict):
        kind = spec.get("kind", "gaussian")
        n3 = int(spec.get("n_samples", n3_default))
        if kind == "qpsk":
            sym = rng.integers(0, 4, size=(n3, r))
            sig = np.exp(1j * (math.pi / 4 + math.pi / 2 * sym))
        elif kind == "gaussian":
            sig = (rng.standard_normal((n3, r))
                   + 1j * rng.standard_normal((n3, r))) / math.sqrt(2)
        else:
            raise ValidationError(f"unknown signal kind {kind!r}")
        norms = spec.get("norms")
        if norms is not None:
            sig = sig / np.linalg.norm(sig, axis=0) * np.asarray(norms, dtype=float)
        return sig
    return _complex_matrix(spec)


def _cmd_simulate(args) -> int:
    with open(args.scene) as fh:
        doc = json.load(fh)
    out: dict = {"command": "simulate", "kind": args.kind, "seed": args.seed,
                 "noise_std": args.noise_std}
    if args.kind == "array":
        scene = ArrayScene(
            b=np.asarray(doc["positions"], dtype=float),
            delta=np.asarray(doc["translations"], dtype=float),
            pulsation=float(doc["pulsation"]),
            celerity=float(doc["celerity"]),
        )
        directions = np.asarray(doc["directions"], dtype=float)
        directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        signals = _signals_from_spec(doc.get("signals", {}), 64,
                                     directions.shape[0], args.seed + 1)
        paths = PathSet(directions=directions, signals=signals)
        tensor, truth = simulate_array(scene, paths, args.noise_std, args.seed)
        out["resolvent_triad"] = has_resolvent_triad(scene.b, scene.wavelength)
        out["wavelength"] = scene.wavelength
    elif args.kind == "cdma":
        gains = _complex_matrix(doc["gains"])
        symbols = _complex_matrix(doc["symbols"])
        if "codes" in doc:
            codes = _complex_matrix(doc["codes"])
        else:
            codes = effective_codes(_complex_matrix(doc["spreading"]),
                                    _complex_matrix(doc["impulse"]))
        scene = CdmaScene(gains=gains, symbols=symbols, codes=codes)
        tensor, truth = simulate_cdma(scene, args.noise_std, args.seed)
    elif args.kind == "fluorescence":
        tensor, truth, likeness = simulate_fluorescence(
            np.asarray(doc["concentrations"], dtype=float),
            np.asarray(doc["excitation"], dtype=float),
            np.asarray(doc["emission"], dtype=float),
            args.noise_std, args.seed)
        out["likeness"] = likeness
    else:
        raise ValidationError(f"unknown simulation kind {args.kind!r}")
    mus = [coherence(np.asarray(fk)).mu if truth.rank > 1 else 0.0
           for fk in truth.factors]
    out["dims"] = list(tensor.shape)
    out["truth_coherences"] = mus
    out["conditions"] = condition_report(mus, truth.rank or 1)
    out["truth"] = _model_payload(truth)
    if args.out_tensor:
        write_htns(args.out_tensor, tensor)
        out["tensor_file"] = args.out_tensor
    _emit(out, args.out)
    return EXIT_OK


def _cmd_demo_nonexistence(args) -> int:
    e1 = np.array([1.0, 0.0], dtype=complex)
    e2 = np.array([0.0, 1.0], dtype=complex)
    ns = [2 ** k for k in range(0, max(1, args.nmax).bit_length())]
    ns = [n for n in ns if n <= args.nmax]
    if ns[-1] != args.nmax:
        ns.append(args.nmax)
    records = divergence_witness([e1] * 3, [e2] * 3, ns)
    out = {
        "command": "demo-nonexistence",
        "description": (
            "rank-2 approximants of a rank-3 target: the fit error decays "
            "as 1/n while the leading weight grows as n, so no best rank-2 "
            "approximation exists and all mode coherences approach 1"
        ),
        "table": records,
        "loss_times_n": [r["loss"] * r["n"] for r in records],
        "weight_over_n": [r["max_weight"] / r["n"] for r in records],
    }
    _emit(out, args.out)
    return EXIT_OK


def _cmd_demo_recovery(args) -> int:
    dictionary = random_incoherent_dictionary((4, 4, 4), 40, mu_max=0.09,
                                              seed=args.seed)
    rng = np.random.default_rng(args.seed + 1)
    idx = rng.choice(len(dictionary), 5, replace=False)
    coef = (0.5 + rng.random(5)) * np.exp(2j * math.pi * rng.random(5))
    stacks = [np.stack([dictionary.atoms[i][k] for i in idx], axis=1)
              for k in range(3)]
    from .core import evaluate_terms
    f = evaluate_terms(coef, stacks)
    res = woga(f, dictionary, t=1.0, max_iter=5)
    out = {
        "command": "demo-recovery",
        "dictionary_mu": dictionary.mu,
        "planted_atoms": sorted(int(i) for i in idx),
        "temlyakov_condition": temlyakov_condition(5, dictionary.mu, 1.0),
        "selected": res.selected,
        "residuals": res.residuals,
        "relative_residual": res.residuals[-1] / frobenius(f),
        "exact_recovery": bool(res.residuals[-1] <= 1e-10 * frobenius(f)),
    }
    _emit(out, args.out)
    return EXIT_OK if out["exact_recovery"] else EXIT_NOT_CONVERGED


def _cmd_bench(args) -> int:
    import time

    rng = np.random.default_rng(0)
    t = rng.standard_normal((8, 8, 8)) + 1j * rng.standard_normal((8, 8, 8))
    timings = {}
    t0 = time.perf_counter()
    for _ in range(50):
        from .norms import spectral_norm as _sn
        _sn(t, restarts=8, max_sweeps=100)
    timings["spectral_norm_8x8x8_ms"] = (time.perf_counter() - t0) / 50 * 1e3
    v = rng.standard_normal((16, 8)) + 1j * rng.standard_normal((16, 8))
    v /= np.linalg.norm(v, axis=0)
    t0 = time.perf_counter()
    for _ in range(200):
        coherence(v)
    timings["coherence_16x8_ms"] = (time.perf_counter() - t0) / 200 * 1e3
    t0 = time.perf_counter()
    for _ in range(50):
        kruskal_rank_bruteforce(v)
    timings["krank_bruteforce_16x8_ms"] = (time.perf_counter() - t0) / 50 * 1e3
    out = {"command": "bench", "timings": timings}
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cohcp",
        description="Coherence-bounded low-rank CP decomposition toolkit",
    )
    p.add_argument("--version", action="version", version=f"cohcp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coherence", help="coherence / Kruskal-rank report of a factor matrix")
    c.add_argument("--input", required=True, help="HTNS1 factor matrix (d = 2)")
    c.add_argument("--budget", type=int, default=14)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_coherence)

    c = sub.add_parser("check", help="evaluate all condition checkers")
    c.add_argument("--mus", help="comma-separated per-mode coherences")
    c.add_argument("--factors", nargs="*", help="HTNS1 factor matrices to measure")
    c.add_argument("--r", type=int, required=True)
    c.add_argument("--d", type=int)
    c.add_argument("--kranks", help="comma-separated per-mode Kruskal ranks")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_check)

    c = sub.add_parser("norms", help="spectral norm and nuclear norm sandwich")
    c.add_argument("--input", help="HTNS1 tensor")
    c.add_argument("--fixture", help="matmul:n generates the matrix multiplication tensor")
    c.add_argument("--restarts", type=int, default=64)
    c.add_argument("--tol", type=float, default=1e-3)
    c.add_argument("--size-cap", type=int, default=256)
    c.add_argument("--no-search", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_norms)

    c = sub.add_parser("decompose", help="greedy or alternating decomposition")
    c.add_argument("--input", required=True, help="HTNS1 tensor")
    c.add_argument("--rank", type=int, required=True)
    c.add_argument("--method", choices=["als", "oga", "woga"], default="als")
    c.add_argument("--caps", help="comma-separated per-mode coherence caps")
    c.add_argument("--tychonoff", type=float, default=0.0)
    c.add_argument("--ortho", choices=["none", "per-mode", "separable"], default="none")
    c.add_argument("--dict", dest="dictionary", help="atoms JSON file (woga)")
    c.add_argument("--t", type=float, default=1.0, help="weakness parameter (woga)")
    c.add_argument("--max-iter", type=int, default=2000)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_decompose)

    c = sub.add_parser("simulate", help="physical forward models")
    c.add_argument("--kind", choices=["array", "cdma", "fluorescence"], required=True)
    c.add_argument("--scene", required=True, help="scene description JSON")
    c.add_argument("--noise-std", type=float, default=0.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-tensor", help="write the observation tensor (HTNS1)")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("demo-nonexistence", help="divergence witness table")
    c.add_argument("--nmax", type=int, default=64)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_demo_nonexistence)

    c = sub.add_parser("demo-recovery", help="exact greedy recovery demo")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_demo_recovery)

    c = sub.add_parser("bench", help="micro-benchmarks of the core operations")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags, matching the validation code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValidationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
