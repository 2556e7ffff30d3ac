"""Physical forward models generating tensors with known ground truth.

Structured antenna arrays (reference subarray plus translations),
polarization diversity, synchronous CDMA, and fluorescence spectroscopy.
Each simulator returns the observation tensor together with the canonical
CP model it was built from, so recovery can be verified end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coherence import coherence
from .core import canonicalize, cp_evaluate

POSITION_TOL = 1e-9


@dataclass(frozen=True)
class ArrayScene:
    """Structured sensor array: reference sensors b_i plus translations
    Delta_j (Delta_1 = 0 so the reference subarray is subarray 1), with
    wave pulsation (rad/s) and celerity (m/s)."""

    b: np.ndarray           # (n1, 3) sensor positions, meters
    delta: np.ndarray       # (n2, 3) subarray translations, meters
    pulsation: float        # omega_wave
    celerity: float

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b, dtype=np.float64))
        delta = np.atleast_2d(np.asarray(self.delta, dtype=np.float64))
        if b.ndim != 2 or b.shape[1] != 3 or b.shape[0] < 1:
            raise ValueError("b must be an (n1, 3) array of positions")
        if delta.ndim != 2 or delta.shape[1] != 3 or delta.shape[0] < 1:
            raise ValueError("delta must be an (n2, 3) array of translations")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(delta))):
            raise ValueError("positions must be finite")
        if np.linalg.norm(delta[0]) > POSITION_TOL:
            raise ValueError("the first translation must be zero (reference subarray)")
        if not (self.pulsation > 0 and self.celerity > 0):
            raise ValueError("pulsation and celerity must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "delta", delta)

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi * self.celerity / self.pulsation

    @property
    def wavenumber(self) -> float:
        return self.pulsation / self.celerity


@dataclass(frozen=True)
class PathSet:
    """Propagation paths: unit directions (r, 3), per-path signal time
    series as columns of an (n3, r) matrix, optional polarization angles
    (alpha_p, beta_p) per path."""

    directions: np.ndarray
    signals: np.ndarray
    polarization: np.ndarray | None = None

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        s = np.asarray(self.signals, dtype=np.complex128)
        if d.shape[1] != 3 or d.shape[0] < 1:
            raise ValueError("directions must be (r, 3)")
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("directions must be unit vectors")
        if s.ndim != 2 or s.shape[1] != d.shape[0]:
            raise ValueError("signals must be (n3, r), one column per path")
        if self.polarization is not None:
            pol = np.atleast_2d(np.asarray(self.polarization, dtype=np.float64))
            if pol.shape != (d.shape[0], 2):
                raise ValueError("polarization must be (r, 2) angle pairs")
            for alpha, beta in pol:
                _check_polarization_angles(alpha, beta, strict_alpha=True)
            object.__setattr__(self, "polarization", pol)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "signals", s)

    @property
    def r(self) -> int:
        return self.directions.shape[0]


def steering_vectors(scene: ArrayScene, directions) -> tuple:
    """Unit-norm steering columns for reference sensors and translations.

    u_p(i) = exp(j (omega/C) b_i . d_p) / sqrt(n1),
    v_p(j) = exp(j (omega/C) Delta_j . d_p) / sqrt(n2).
    """
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if d.shape[1] != 3:
        raise ValueError("directions must be (r, 3)")
    norms = np.linalg.norm(d, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("directions must be unit vectors")
    k = scene.wavenumber
    u = np.exp(1j * k * (scene.b @ d.T)) / math.sqrt(scene.b.shape[0])
    v = np.exp(1j * k * (scene.delta @ d.T)) / math.sqrt(scene.delta.shape[0])
    return u, v


def _complex_noise(rng, shape, std: float) -> np.ndarray:
    if std == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    scale = std / math.sqrt(2.0)
    return rng.normal(scale=scale, size=shape) + 1j * rng.normal(scale=scale, size=shape)


def simulate_array(scene: ArrayScene, paths: PathSet, noise_std: float = 0.0,
                   seed: int = 0):
    """Narrow-band far-field observation tensor of shape (n1, n2, n3).

    s_{i,j}(k) = sum_p sigma_p(t_k) exp(j (omega/C)(b_i + Delta_j) . d_p)
    plus circular complex Gaussian noise of the given per-entry std.

    Returns (tensor, truth) where truth is the canonical CP model of the
    noiseless tensor: unit steering and signal columns, so the weights are
    sqrt(n1 n2) ||sigma_p||.
    """
    u, v = steering_vectors(scene, paths.directions)
    signorms = np.linalg.norm(paths.signals, axis=0)
    if np.any(signorms == 0):
        raise ValueError("every path needs a nonzero signal")
    w = paths.signals / signorms
    n1, n2 = scene.b.shape[0], scene.delta.shape[0]
    lam = signorms * math.sqrt(n1 * n2)
    truth = canonicalize(lam.astype(np.complex128), [u, v, w])
    clean = cp_evaluate(truth)
    rng = np.random.default_rng(seed)
    return clean + _complex_noise(rng, clean.shape, noise_std), truth


def is_resolvent(points, v, wavelength: float) -> bool:
    """True iff some pairwise difference b_k - b_l equals v and
    0 < ||v|| < wavelength / 2 (both inequalities strict)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if not (0.0 < nv < wavelength / 2.0):
        return False
    diffs = pts[:, None, :] - pts[None, :, :]
    return bool(np.any(np.linalg.norm(diffs - v, axis=2) <= POSITION_TOL))


def resolvent_directions(points, wavelength: float) -> np.ndarray:
    """All pairwise differences qualifying as resolvent directions."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, 3)
    lens = np.linalg.norm(diffs, axis=1)
    mask = (lens > POSITION_TOL) & (lens < wavelength / 2.0)
    return diffs[mask]


def has_resolvent_triad(points, wavelength: float) -> bool:
    """True iff the points are resolvent w.r.t. three linearly independent
    directions (which makes steering-vector collinearity equivalent to
    direction equality)."""
    dirs = resolvent_directions(points, wavelength)
    if dirs.shape[0] < 3:
        return False
    return bool(np.linalg.matrix_rank(dirs, tol=1e-9) == 3)


@dataclass(frozen=True)
class CollinearityResult:
    value: float
    separation_guaranteed: bool


def collinearity_check(scene: ArrayScene, d_p, d_q) -> CollinearityResult:
    """|<u_p, u_q>| of the reference-subarray steering vectors.

    When the sensor set is resolvent w.r.t. three independent directions,
    the value is 1 exactly when d_p = d_q; otherwise the result carries no
    separation guarantee and is flagged accordingly.
    """
    u, _ = steering_vectors(scene, np.stack([np.asarray(d_p, dtype=np.float64),
                                             np.asarray(d_q, dtype=np.float64)]))
    value = float(abs(np.vdot(u[:, 1], u[:, 0])))
    return CollinearityResult(
        value=value,
        separation_guaranteed=has_resolvent_triad(scene.b, scene.wavelength),
    )


def _check_polarization_angles(alpha: float, beta: float,
                               strict_alpha: bool = False) -> None:
    # orientation acts mod pi; scene data keeps the principal domain
    if strict_alpha and not (-math.pi / 2 < alpha <= math.pi / 2):
        raise ValueError("orientation angle alpha must lie in (-pi/2, pi/2]")
    if not math.isfinite(alpha):
        raise ValueError("orientation angle alpha must be finite")
    if beta == 0.0:
        raise ValueError("ellipticity beta = 0 rejected: polarization must be "
                         "neither linear nor circular")
    if not (-math.pi / 4 < beta < math.pi / 4):
        raise ValueError("ellipticity beta must lie in (-pi/4, 0) or (0, pi/4)")


def direction_triad(theta: float, phi: float) -> tuple:
    """Right orthonormal triad (d, e, f) for azimuth theta, elevation phi."""
    d = np.array([math.cos(theta) * math.cos(phi),
                  math.sin(theta) * math.cos(phi),
                  math.sin(phi)])
    e = np.array([-math.sin(theta), math.cos(theta), 0.0])
    f = np.array([-math.cos(theta) * math.sin(phi),
                  -math.sin(theta) * math.sin(phi),
                  math.cos(phi)])
    return d, e, f


def polarization_gain(alpha: float, beta: float) -> np.ndarray:
    """g = Q(alpha) (cos beta, j sin beta): orientation/ellipticity gain."""
    _check_polarization_angles(alpha, beta)
    q = np.array([[math.cos(alpha), math.sin(alpha)],
                  [-math.sin(alpha), math.cos(alpha)]])
    h = np.array([math.cos(beta), 1j * math.sin(beta)])
    return q @ h


def polarization_vector(theta: float, phi: float, alpha: float,
                        beta: float) -> np.ndarray:
    """Unit six-component electromagnetic response v = B g.

    B = (1/sqrt 2) [[e, f], [f, -e]] built from the direction triad;
    g carries orientation alpha and ellipticity beta.
    """
    _, e, f = direction_triad(theta, phi)
    b = np.zeros((6, 2))
    b[:3, 0], b[:3, 1] = e, f
    b[3:, 0], b[3:, 1] = f, -e
    b /= math.sqrt(2.0)
    return b @ polarization_gain(alpha, beta)


@dataclass(frozen=True)
class CdmaScene:
    """Synchronous CDMA mixing data: antenna gains (m, r), transmitted
    symbols (n_sym, r), effective codes (n_chip, r)."""

    gains: np.ndarray
    symbols: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.gains, dtype=np.complex128)
        s = np.asarray(self.symbols, dtype=np.complex128)
        b = np.asarray(self.codes, dtype=np.complex128)
        if a.ndim != 2 or s.ndim != 2 or b.ndim != 2:
            raise ValueError("gains, symbols, codes must be matrices")
        if not (a.shape[1] == s.shape[1] == b.shape[1]):
            raise ValueError("gains, symbols, codes need one column per user")
        object.__setattr__(self, "gains", a)
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "codes", b)


def effective_codes(spreading, impulse) -> np.ndarray:
    """Effective code columns B_kp = sum_t H_p(k - t) C_p(t).

    Plain full convolution of each spreading sequence with its channel
    impulse response; guard-chip handling is out of scope.
    """
    c = np.asarray(spreading, dtype=np.complex128)
    h = np.asarray(impulse, dtype=np.complex128)
    if c.ndim != 2 or h.ndim != 2 or c.shape[1] != h.shape[1]:
        raise ValueError("spreading and impulse need one column per user")
    r = c.shape[1]
    out = np.stack([np.convolve(h[:, p], c[:, p]) for p in range(r)], axis=1)
    return out


def simulate_cdma(scene: CdmaScene, noise_std: float = 0.0, seed: int = 0):
    """Received CDMA tensor T_{ijk} = sum_p A_ip S_jp B_kp + noise.

    Returns (tensor, truth) with the canonical ground-truth model.
    """
    a, s, b = scene.gains, scene.symbols, scene.codes
    na = np.linalg.norm(a, axis=0)
    ns = np.linalg.norm(s, axis=0)
    nb = np.linalg.norm(b, axis=0)
    if np.any(na * ns * nb == 0):
        raise ValueError("every user needs nonzero gains, symbols, and codes")
    lam = (na * ns * nb).astype(np.complex128)
    truth = canonicalize(lam, [a / na, s / ns, b / nb])
    clean = cp_evaluate(truth)
    rng = np.random.default_rng(seed)
    return clean + _complex_noise(rng, clean.shape, noise_std), truth


def simulate_fluorescence(concentrations, excitation, emission,
                          noise_std: float = 0.0, seed: int = 0):
    """Fluorescence data tensor sum_p x_p (x) y_p (x) z_p + noise.

    All inputs must be nonnegative (concentrations and spectral
    intensities).  Returns (tensor, truth, likeness) where likeness maps
    each mode coherence to its reading: concentration likeness of the
    substances across samples, absorbance (excitation) likeness, and
    fluorescence (emission) likeness.
    """
    x = np.asarray(concentrations, dtype=np.float64)
    y = np.asarray(excitation, dtype=np.float64)
    z = np.asarray(emission, dtype=np.float64)
    for name, m in (("concentrations", x), ("excitation", y), ("emission", z)):
        if m.ndim != 2:
            raise ValueError(f"{name} must be a matrix with one column per substance")
        if np.any(m < 0):
            raise ValueError(f"{name} must be nonnegative")
    if not (x.shape[1] == y.shape[1] == z.shape[1]):
        raise ValueError("need one column per substance in every mode")
    nx, ny, nz = (np.linalg.norm(m, axis=0) for m in (x, y, z))
    if np.any(nx * ny * nz == 0):
        raise ValueError("every substance needs nonzero columns in all modes")
    lam = (nx * ny * nz).astype(np.complex128)
    truth = canonicalize(lam, [x / nx, y / ny, z / nz])
    likeness = {
        "concentration_likeness": coherence(x / nx).mu if x.shape[1] > 1 else 0.0,
        "absorbance_likeness": coherence(y / ny).mu if y.shape[1] > 1 else 0.0,
        "fluorescence_likeness": coherence(z / nz).mu if z.shape[1] > 1 else 0.0,
    }
    clean = cp_evaluate(truth)
    rng = np.random.default_rng(seed)
    return clean + _complex_noise(rng, clean.shape, noise_std), truth, likeness


def fibonacci_sphere(count: int) -> np.ndarray:
    """Deterministic near-uniform unit direction grid (count, 3)."""
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    ang = golden * i
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=1)


def _grid_size_for_resolution(resolution_deg: float) -> int:
    # mean spacing of N Fibonacci points is ~ sqrt(4 pi / N) radians
    s = math.radians(resolution_deg)
    return max(int(math.ceil(4.0 * math.pi / (s * s))), 16)


@dataclass
class DoaEstimate:
    direction: np.ndarray
    score: float
    ambiguous: bool = False
    alternates: list = field(default_factory=list)
    separation_guaranteed: bool = True


def _tangent_basis(d: np.ndarray) -> tuple:
    a = np.zeros(3)
    a[int(np.argmin(np.abs(d)))] = 1.0
    t1 = np.cross(d, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(d, t1)


def _refine_direction(scene: ArrayScene, u_col: np.ndarray, d0: np.ndarray,
                      step0: float, steps: int = 20) -> tuple:
    def score(d):
        u, _ = steering_vectors(scene, d[None, :])
        return float(abs(np.vdot(u[:, 0], u_col)))

    d = d0 / np.linalg.norm(d0)
    best = score(d)
    step = step0
    for _ in range(steps):
        t1, t2 = _tangent_basis(d)
        improved = False
        for dd in (t1, -t1, t2, -t2):
            cand = d + step * dd
            cand /= np.linalg.norm(cand)
            sc = score(cand)
            if sc > best:
                best, d = sc, cand
                improved = True
        if not improved:
            step *= 0.5
    return d, best


def doa_estimate(u_est: np.ndarray, scene: ArrayScene,
                 grid_resolution_deg: float = 1.0, refine_steps: int = 20,
                 ambiguity_tol: float = 1e-6):
    """Direction-of-arrival estimates for estimated steering columns.

    Grid search over a Fibonacci-sphere direction grid at the requested
    resolution maximizing |<u(d), u_est_p>|, followed by deterministic
    local ascent.  If a second, well-separated grid maximum scores within
    ``ambiguity_tol`` of the best one, both are refined and reported with
    the ``ambiguous`` flag set (mirror-symmetric arrays do this).
    Estimates carry no separation guarantee (flagged) when the scene lacks
    a resolvent triad.
    """
    u_est = np.asarray(u_est, dtype=np.complex128)
    if u_est.ndim == 1:
        u_est = u_est[:, None]
    if u_est.shape[0] != scene.b.shape[0]:
        raise ValueError("steering estimates do not match the sensor count")
    guaranteed = has_resolvent_triad(scene.b, scene.wavelength)
    grid = fibonacci_sphere(_grid_size_for_resolution(grid_resolution_deg))
    ug, _ = steering_vectors(scene, grid)
    cols = u_est / np.linalg.norm(u_est, axis=0)
    scores = np.abs(ug.conj().T @ cols)  # (grid, r)
    sep = 3.0 * math.radians(grid_resolution_deg)
    step0 = math.radians(grid_resolution_deg)
    out = []
    for p in range(cols.shape[1]):
        sc = scores[:, p]
        best_i = int(np.argmax(sc))
        d_best, s_best = _refine_direction(scene, cols[:, p], grid[best_i],
                                           step0, refine_steps)
        near = sc >= sc[best_i] - ambiguity_tol
        angles = np.arccos(np.clip(grid @ grid[best_i], -1.0, 1.0))
        rivals = np.flatnonzero(near & (angles > sep))
        alternates = []
        if rivals.size:
            j = rivals[int(np.argmax(sc[rivals]))]
            d_alt, s_alt = _refine_direction(scene, cols[:, p], grid[j],
                                             step0, refine_steps)
            alternates.append(DoaEstimate(direction=d_alt, score=s_alt,
                                          separation_guaranteed=guaranteed))
        out.append(DoaEstimate(direction=d_best, score=s_best,
                               ambiguous=bool(alternates),
                               alternates=alternates,
                               separation_guaranteed=guaranteed))
    return out
