"""Jump-diffusion model declarations and coefficient validation.

A model is the dynamics

    dX_t = b(X_t) dt + sigma(X_t) dW_t + gamma(X_{t-}) z Ntilde(dt, dz)

with a finite-activity jump measure nu = intensity * (mark distribution),
compensated so the jump integral is a martingale.  Coefficients are numpy
callables vectorized over a leading batch axis; presets additionally carry
numba-compiled scalar versions that the simulator uses as a fast path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import InfiniteMomentError, ModelEvaluationError

__all__ = [
    "MomentEstimate",
    "JumpLaw",
    "ModelSpec",
    "CoefficientBounds",
    "validate_model",
    "levy_moments",
    "get_preset",
    "PRESETS",
]


@dataclass(frozen=True)
class MomentEstimate:
    """A nu-integral with an attached quadrature / Monte Carlo error bound."""

    value: float | np.ndarray
    error: float

    def __float__(self):
        return float(self.value)


@dataclass
class JumpLaw:
    """Finite-activity Levy measure nu = intensity * F for a mark law F.

    ``jump_sampler(rng, n)`` returns (n, dim) marks with law F.  ``mean_mark``
    is the nu-integral of z (so it scales with the intensity); symmetric laws
    set it to exactly zero.  ``exp_moment_rate`` asserts the exponential
    moment assumption with the given rate when set.  ``moment_oracle``
    overrides the default Monte Carlo nu-integrator.
    """

    intensity: float
    dim: int = 1
    jump_sampler: Optional[Callable] = None
    mean_mark: np.ndarray | str = "numeric"
    moment_oracle: Optional[Callable] = None
    exp_moment_rate: Optional[float] = None
    name: str = "custom"
    # analytic second/third absolute moments of nu when known (incl. intensity)
    nu2: Optional[float] = None
    nu3: Optional[float] = None
    mc_draws: int = 400_000
    mc_seed: int = 1234

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be nonnegative")
        if self.intensity > 0 and self.jump_sampler is None:
            raise ValueError("positive intensity requires a jump sampler")
        if isinstance(self.mean_mark, str):
            if self.mean_mark != "numeric":
                raise ValueError("mean_mark must be a vector or 'numeric'")
            if self.intensity == 0:
                self.mean_mark = np.zeros(self.dim)
            else:
                self.mean_mark = np.asarray(
                    self.moment(lambda z: z).value, dtype=float)
        else:
            self.mean_mark = np.atleast_1d(np.asarray(self.mean_mark, dtype=float))
            if self.mean_mark.shape != (self.dim,):
                raise ValueError("mean_mark has wrong dimension")

    def moment(self, phi, n_draws: Optional[int] = None,
               seed: Optional[int] = None) -> MomentEstimate:
        """nu-integral of phi, i.e. intensity * E_F[phi(Z)].

        Uses the configured oracle if present, otherwise plain Monte Carlo
        with a standard-error estimate.  phi maps (n, dim) to (n,) or (n, k).
        """
        if self.intensity == 0.0:
            return MomentEstimate(0.0, 0.0)
        if self.moment_oracle is not None:
            return self.moment_oracle(phi)
        n = n_draws or self.mc_draws
        rng = np.random.default_rng(self.mc_seed if seed is None else seed)
        z = self.jump_sampler(rng, n)
        vals = np.asarray(phi(z), dtype=float)
        mean = vals.mean(axis=0)
        se = float(np.max(np.atleast_1d(vals.std(axis=0)))) / math.sqrt(n)
        value = self.intensity * (float(mean) if mean.ndim == 0 else mean)
        return MomentEstimate(value, self.intensity * se)

    # ------------------------------------------------------------------
    # built-in laws

    @classmethod
    def none(cls, dim: int = 1) -> "JumpLaw":
        return cls(intensity=0.0, dim=dim, mean_mark=np.zeros(dim),
                   exp_moment_rate=1.0, name="none", nu2=0.0, nu3=0.0)

    @classmethod
    def gaussian(cls, intensity: float, dim: int = 1, scale: float = 1.0) -> "JumpLaw":
        def sampler(rng, n):
            return rng.normal(0.0, scale, size=(n, dim))

        # E||Z||^k for Z ~ N(0, scale^2 I_d): scale^k 2^{k/2} Gamma((d+k)/2)/Gamma(d/2)
        def absmom(k):
            return scale**k * 2 ** (k / 2) * math.gamma((dim + k) / 2) / math.gamma(dim / 2)

        return cls(intensity=intensity, dim=dim, jump_sampler=sampler,
                   mean_mark=np.zeros(dim), exp_moment_rate=1.0,
                   name=f"gaussian(scale={scale:g})",
                   nu2=intensity * absmom(2), nu3=intensity * absmom(3))

    @classmethod
    def two_point(cls, intensity: float, a: float = 1.0) -> "JumpLaw":
        def sampler(rng, n):
            return a * (2.0 * rng.integers(0, 2, size=(n, 1)) - 1.0)

        return cls(intensity=intensity, dim=1, jump_sampler=sampler,
                   mean_mark=np.zeros(1), exp_moment_rate=1.0,
                   name=f"two_point(a={a:g})",
                   nu2=intensity * a**2, nu3=intensity * abs(a) ** 3)

    @classmethod
    def point_mass(cls, intensity: float, z) -> "JumpLaw":
        z = np.atleast_1d(np.asarray(z, dtype=float))

        def sampler(rng, n):
            return np.tile(z, (n, 1))

        nz = float(np.linalg.norm(z))
        return cls(intensity=intensity, dim=z.shape[0], jump_sampler=sampler,
                   mean_mark=intensity * z, exp_moment_rate=1.0,
                   name=f"point_mass(z={z.tolist()})",
                   nu2=intensity * nz**2, nu3=intensity * nz**3)

    @classmethod
    def uniform(cls, intensity: float, low: float, high: float) -> "JumpLaw":
        def sampler(rng, n):
            return rng.uniform(low, high, size=(n, 1))

        mean = intensity * (low + high) / 2.0

        # \int |z|^k / (high-low) dz over [low, high]
        def absmoment(k):
            def anti(t):
                return abs(t) ** (k + 1) / (k + 1) * (1.0 if t >= 0 else -1.0)
            return (anti(high) - anti(low)) / (high - low)

        return cls(intensity=intensity, dim=1, jump_sampler=sampler,
                   mean_mark=np.array([mean]), exp_moment_rate=1.0,
                   name=f"uniform({low:g},{high:g})",
                   nu2=intensity * absmoment(2), nu3=intensity * absmoment(3))

    @classmethod
    def pareto(cls, intensity: float, tail_index: float, scale: float = 1.0,
               symmetric: bool = True) -> "JumpLaw":
        """Marks with |Z|/scale ~ Pareto(tail_index) on [1, inf); random sign
        when symmetric.  Has a third moment iff tail_index > 3, never an
        exponential moment."""
        if tail_index <= 0:
            raise ValueError("tail index must be positive")

        def sampler(rng, n):
            mag = scale * rng.pareto(tail_index, size=(n, 1)) + scale
            if symmetric:
                sign = 2.0 * rng.integers(0, 2, size=(n, 1)) - 1.0
                return sign * mag
            return mag

        def absmoment(k):
            if tail_index <= k:
                return math.inf
            return scale**k * tail_index / (tail_index - k)

        mean = np.zeros(1) if symmetric else np.array([intensity * absmoment(1)])
        return cls(intensity=intensity, dim=1, jump_sampler=sampler,
                   mean_mark=mean, exp_moment_rate=None,
                   name=f"pareto(b={tail_index:g})",
                   nu2=intensity * absmoment(2), nu3=intensity * absmoment(3))


@dataclass(frozen=True)
class LevyMoments:
    nu2: MomentEstimate
    nu3: MomentEstimate
    mean: MomentEstimate


def levy_moments(law: JumpLaw, n_draws: Optional[int] = None,
                 seed: Optional[int] = None) -> LevyMoments:
    """(nu_2, nu_3, m_nu): second and third absolute nu-moments and the mark
    mean, each with error estimates; analytic values carry zero error."""
    if law.intensity == 0.0:
        z = MomentEstimate(0.0, 0.0)
        return LevyMoments(z, z, MomentEstimate(np.zeros(law.dim), 0.0))

    if law.nu2 is not None:
        nu2 = MomentEstimate(law.nu2, 0.0)
    else:
        nu2 = law.moment(lambda z: np.linalg.norm(z, axis=-1) ** 2, n_draws, seed)
    if law.nu3 is not None:
        nu3 = MomentEstimate(law.nu3, 0.0)
    else:
        nu3 = law.moment(lambda z: np.linalg.norm(z, axis=-1) ** 3, n_draws, seed)
    mean = MomentEstimate(np.asarray(law.mean_mark, dtype=float), 0.0)

    for name, est in (("nu2", nu2), ("nu3", nu3)):
        if not np.all(np.isfinite(np.atleast_1d(est.value))):
            raise InfiniteMomentError(f"moment {name} of the jump measure is not finite")
    return LevyMoments(nu2, nu3, mean)


# ---------------------------------------------------------------------------
# model spec


@dataclass
class ModelSpec:
    """Coefficients and jump law of the dynamics, plus optional metadata.

    ``drift`` maps (..., d) -> (..., d); ``dispersion`` and ``jump_coeff`` map
    (..., d) -> (..., d, d).  ``initial_law(rng)`` draws a starting point.
    ``jit_coeffs`` optionally holds numba scalar kernels (see simulate);
    ``stationary_density``, ``kappa`` and ``eta0`` are preset metadata used by
    the experiment harness.
    """

    dim: int
    drift: Callable
    dispersion: Callable
    jump_coeff: Callable
    jump_law: JumpLaw
    initial_law: Optional[Callable] = None
    name: str = "custom"
    kappa: Optional[float] = None
    eta0: Optional[float] = None
    stationary_density: Optional[Callable] = None
    analytic_bounds: Optional["CoefficientBounds"] = None
    jit_coeffs: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.jump_law.dim != self.dim:
            raise ValueError("jump law dimension does not match the model")
        if self.initial_law is None:
            d = self.dim
            self.initial_law = lambda rng: np.zeros(d)

    def gamma_is_zero(self) -> bool:
        return self.jump_law.intensity == 0.0 or bool(
            np.all(self.jump_coeff(np.zeros((1, self.dim))) == 0.0))


@dataclass(frozen=True)
class CoefficientBounds:
    """Empirical coefficient bounds over a probe grid, plus assumption flags."""

    a_sup: float
    a_jj_sup: tuple
    gamma_sup: float
    gamma_min: float
    b_sup_D: float
    dissipativity_ok: bool
    ellipticity_ok: bool
    eta0_hat: float
    probe_count: int
    probe_seed: int

    def __post_init__(self):
        if not (0.0 <= self.gamma_min <= self.gamma_sup):
            raise ValueError("need 0 <= gamma_min <= gamma_sup")


def _probe_points(region, n, d, seed):
    lows, highs = (np.atleast_1d(np.asarray(v, dtype=float)) for v in region)
    if lows.shape != (d,) or highs.shape != (d,) or np.any(highs <= lows):
        raise ValueError("probe region must be a nonempty box (lows, highs)")
    m = int(2 ** math.ceil(math.log2(max(n, 2))))
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    pts = sampler.random(m)[:n]
    return lows + pts * (highs - lows)


def validate_model(spec: ModelSpec, probe_region, probe_count: int = 256,
                   seed: int = 0) -> CoefficientBounds:
    """Probe the coefficients on a low-discrepancy grid and report empirical
    bounds.  Probable ellipticity / dissipativity violations are flagged, not
    rejected; non-finite coefficient values raise immediately."""
    d = spec.dim
    if probe_count < 2**d:
        raise ValueError(f"probe_count must be at least 2^d = {2**d}")
    pts = _probe_points(probe_region, probe_count, d, seed)

    b = np.asarray(spec.drift(pts), dtype=float)
    sig = np.asarray(spec.dispersion(pts), dtype=float)
    gam = np.asarray(spec.jump_coeff(pts), dtype=float)
    for name, arr in (("drift", b), ("dispersion", sig), ("jump_coeff", gam)):
        bad = ~np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1)
        if bad.any():
            idx = int(np.argmax(bad))
            raise ModelEvaluationError(
                f"{name} returned a non-finite value at x={pts[idx].tolist()}")

    a = np.einsum("nij,nkj->nik", sig, sig)
    eigs = np.linalg.eigvalsh(a)
    sv_a = np.linalg.norm(a, ord=2, axis=(1, 2))
    sv_g = np.linalg.svd(gam, compute_uv=False)

    norms = np.linalg.norm(pts, axis=1)
    inner = np.einsum("ni,ni->n", pts, b)
    outer = norms >= 0.5 * norms.max()
    with np.errstate(invalid="ignore"):
        ratios = -inner[outer] / norms[outer]
    eta0_hat = float(ratios.min()) if outer.any() else 0.0

    return CoefficientBounds(
        a_sup=float(sv_a.max()),
        a_jj_sup=tuple(float(v) for v in a[:, range(d), range(d)].max(axis=0)),
        gamma_sup=float(sv_g[:, 0].max()),
        gamma_min=float(sv_g[:, -1].min()),
        b_sup_D=float(np.linalg.norm(b, axis=1).max()),
        dissipativity_ok=eta0_hat > 0.0,
        ellipticity_ok=bool(eigs.min() > 0.0),
        eta0_hat=eta0_hat,
        probe_count=probe_count,
        probe_seed=seed,
    )


# ---------------------------------------------------------------------------
# presets


def _const_matrix_fn(mat):
    mat = np.asarray(mat, dtype=float)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(mat, x.shape[:-1] + mat.shape).copy()

    return fn


def _linear_drift_fn(A):
    A = np.asarray(A, dtype=float)

    def fn(x):
        return np.asarray(x, dtype=float) @ A.T

    return fn


_JIT_CACHE: dict = {}


def _try_jit_linear(A, sigma, gamma):
    """Numba scalar kernels (x, out) for linear drift and constant matrices.

    Cached by matrix content: reusing the same dispatcher objects lets the
    simulator driver compile once per distinct model instead of per call.
    """
    try:
        from numba import njit
    except ImportError:                                        # pragma: no cover
        return None
    A = np.ascontiguousarray(A, dtype=float)
    S = np.ascontiguousarray(sigma, dtype=float)
    G = np.ascontiguousarray(gamma, dtype=float)
    key = (A.tobytes(), S.tobytes(), G.tobytes(), A.shape[0])
    if key in _JIT_CACHE:
        return _JIT_CACHE[key]

    @njit(nogil=True, cache=False)
    def drift(x, out):
        for i in range(A.shape[0]):
            acc = 0.0
            for j in range(A.shape[1]):
                acc += A[i, j] * x[j]
            out[i] = acc

    @njit(nogil=True, cache=False)
    def dispersion(x, out):
        for i in range(S.shape[0]):
            for j in range(S.shape[1]):
                out[i, j] = S[i, j]

    @njit(nogil=True, cache=False)
    def jump_coeff(x, out):
        for i in range(G.shape[0]):
            for j in range(G.shape[1]):
                out[i, j] = G[i, j]

    _JIT_CACHE[key] = (drift, dispersion, jump_coeff)
    return _JIT_CACHE[key]


def _gauss_density(var_diag):
    var = np.atleast_1d(np.asarray(var_diag, dtype=float))

    def rho(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x**2 / (2.0 * var), axis=-1)
        norm = np.prod(np.sqrt(2.0 * math.pi * var))
        return np.exp(-q) / norm

    return rho


def _jump_ou_density(sigma2, gamma, intensity, mark_scale):
    """Stationary density of dX = -X dt + sigma dW + gamma dJ (compound
    Poisson Gaussian jumps) by inverting the exact characteristic function.

    log E exp(iuX) = -sigma^2 u^2/4 - (lam/2) Ein(gamma^2 s^2 u^2 / 2),
    with Ein(a) = gammaE + log a + E1(a).
    """
    from scipy.special import exp1

    euler_gamma = 0.5772156649015329

    def log_cf(u):
        a = gamma**2 * mark_scale**2 * u**2 / 2.0
        ein = np.where(a > 1e-12, euler_gamma + np.log(np.maximum(a, 1e-300))
                       + exp1(np.maximum(a, 1e-300)), a)
        return -sigma2 * u**2 / 4.0 - intensity / 2.0 * ein

    nodes, weights = np.polynomial.legendre.leggauss(400)
    U = 40.0
    u = (nodes + 1.0) * (U / 2.0)
    w = weights * (U / 2.0)
    cf = np.exp(log_cf(u))

    def rho(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])[:, 0]
        vals = (np.cos(np.outer(flat, u)) @ (w * cf)) / math.pi
        return vals.reshape(x.shape[:-1])

    return rho


def _make_linear_model(name, A, sigma, gamma, law, kappa, eta0,
                       initial_law, stationary_density):
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    sigma = np.asarray(sigma, dtype=float)
    gamma_m = np.asarray(gamma, dtype=float)
    sv_g = np.linalg.svd(gamma_m, compute_uv=False)
    a = sigma @ sigma.T
    # analytic bounds; b_sup quoted for the standard probe box [-3, 3]^d
    bounds = CoefficientBounds(
        a_sup=float(np.linalg.norm(a, ord=2)),
        a_jj_sup=tuple(float(v) for v in np.diag(a)),
        gamma_sup=float(sv_g.max()),
        gamma_min=float(sv_g.min()),
        b_sup_D=float(np.linalg.norm(A, ord=2) * 3.0 * math.sqrt(d)),
        dissipativity_ok=True,
        ellipticity_ok=True,
        eta0_hat=float(np.min(np.linalg.eigvalsh((A + A.T) / -2.0))),
        probe_count=0,
        probe_seed=0,
    )
    return ModelSpec(
        dim=d,
        drift=_linear_drift_fn(A),
        dispersion=_const_matrix_fn(sigma),
        jump_coeff=_const_matrix_fn(gamma_m),
        jump_law=law,
        initial_law=initial_law,
        name=name,
        kappa=kappa,
        eta0=eta0,
        stationary_density=stationary_density,
        analytic_bounds=bounds,
        jit_coeffs=_try_jit_linear(A, sigma, gamma_m),
    )


def _ou1d():
    return _make_linear_model(
        "ou1d", A=[[-1.0]], sigma=[[1.0]], gamma=[[0.0]],
        law=JumpLaw.none(1), kappa=1.0, eta0=1.0,
        initial_law=lambda rng: rng.normal(0.0, math.sqrt(0.5), size=1),
        stationary_density=_gauss_density([0.5]))


def _jump_ou1d():
    return _make_linear_model(
        "jump-ou1d", A=[[-1.0]], sigma=[[1.0]], gamma=[[0.5]],
        law=JumpLaw.gaussian(1.0, dim=1), kappa=1.0, eta0=1.0,
        initial_law=lambda rng: np.array([1.0]),
        stationary_density=_jump_ou_density(1.0, 0.5, 1.0, 1.0))


def _jump_ou1d_pareto():
    return _make_linear_model(
        "jump-ou1d-pareto", A=[[-1.0]], sigma=[[1.0]], gamma=[[0.5]],
        law=JumpLaw.pareto(1.0, tail_index=3.5), kappa=1.0, eta0=1.0,
        initial_law=lambda rng: np.array([1.0]),
        stationary_density=None)


def _aniso2d():
    return _make_linear_model(
        "aniso2d", A=[[-1.0, 0.0], [0.0, -4.0]], sigma=np.eye(2),
        gamma=np.zeros((2, 2)), law=JumpLaw.none(2), kappa=1.0, eta0=1.0,
        initial_law=lambda rng: rng.normal(0.0, 1.0, size=2) * np.sqrt([0.5, 0.125]),
        stationary_density=_gauss_density([0.5, 0.125]))


PRESETS = {
    "ou1d": _ou1d,
    "jump-ou1d": _jump_ou1d,
    "jump-ou1d-pareto": _jump_ou1d_pareto,
    "aniso2d": _aniso2d,
}


def get_preset(name: str) -> ModelSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return factory()
