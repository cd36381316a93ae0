"""Gaussian-process regression with an additive prior-mean adjustment,
expected-improvement acquisition, multivariate-Gaussian conditioning, and a
sequential model-based optimization loop over a bounded box.

The surrogate is a GP with a squared-exponential kernel (one length scale
per input dimension).  An optional radial-bump adjustment function kappa(x)
shifts the prior mean to encode prior beliefs about promising regions;
setting it to None (or giving it no centers) recovers plain GP regression.
Hyperparameters are chosen by maximizing the log marginal likelihood with
multi-start L-BFGS-B on inputs scaled to the unit box and standardized
outputs; the fitted model stores everything in original units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import qmc

from .errors import ConfigError, DomainError, NumericalError

# Default hyperparameter bounds, applied on the unit-box / standardized scale.
LENGTH_SCALE_BOUNDS = (1e-3, 10.0)
SIGNAL_VARIANCE_BOUNDS = (1e-6, 10.0)
NOISE_VARIANCE_BOUNDS = (1e-10, 1.0)
N_RESTARTS = 8


@dataclass(frozen=True)
class HyperBounds:
    """Search box for gp_fit hyperparameters (unit-box / standardized scale)."""

    signal_variance: tuple[float, float] = SIGNAL_VARIANCE_BOUNDS
    length_scale: tuple[float, float] = LENGTH_SCALE_BOUNDS
    noise_variance: tuple[float, float] = NOISE_VARIANCE_BOUNDS

    def __post_init__(self) -> None:
        for lo, hi in (self.signal_variance, self.length_scale, self.noise_variance):
            if not 0 < lo < hi:
                raise ConfigError(f"invalid hyperparameter bound ({lo}, {hi})")

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Kernel:
    """Squared-exponential covariance with per-dimension length scales."""

    signal_variance: float
    length_scales: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.signal_variance <= 0:
            raise DomainError(f"signal_variance {self.signal_variance} must be > 0")
        if any(l <= 0 for l in self.length_scales):
            raise DomainError("length scales must be > 0")

    @property
    def dim(self) -> int:
        return len(self.length_scales)


def kernel_eval(kernel: Kernel, x: Sequence[float], x2: Sequence[float]) -> float:
    """sigma_f^2 * exp(-0.5 * sum(((x_i - x2_i) / l_i)^2))."""
    xa, xb = np.asarray(x, float), np.asarray(x2, float)
    if xa.shape != (kernel.dim,) or xb.shape != (kernel.dim,):
        raise DomainError(
            f"points must be {kernel.dim}-dimensional, got {xa.shape} and {xb.shape}"
        )
    scaled = (xa - xb) / np.asarray(kernel.length_scales)
    return kernel.signal_variance * math.exp(-0.5 * float(scaled @ scaled))


def _gram(kernel: Kernel, xa: np.ndarray, xb: np.ndarray | None = None) -> np.ndarray:
    ell = np.asarray(kernel.length_scales)
    a = xa / ell
    b = a if xb is None else xb / ell
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return kernel.signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class ConditioningFn:
    """Additive prior-mean adjustment kappa(x) = alpha * u(x), where u is a
    sum of radial bumps anchored at prior-belief points.

    With no centers, kappa is identically zero.
    """

    alpha: float
    centers: tuple[tuple[float, ...], ...] = ()
    widths: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        m = len(self.centers)
        if len(self.widths) != m or len(self.weights) != m:
            raise ConfigError("centers, widths, and weights must have equal length")
        if any(w <= 0 for w in self.widths):
            raise ConfigError("bump widths must be > 0")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, float))
        if not self.centers:
            return np.zeros(len(pts))
        centers = np.asarray(self.centers, float)
        widths = np.asarray(self.widths, float)
        weights = np.asarray(self.weights, float)
        sq = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        bumps = np.exp(-0.5 * sq / widths**2)
        return self.alpha * bumps @ weights


def _kappa(conditioning: ConditioningFn | None, x: np.ndarray) -> np.ndarray:
    if conditioning is None:
        return np.zeros(len(np.atleast_2d(x)))
    return conditioning(x)


@dataclass
class GpModel:
    """Fitted GP: data, kernel, noise, adjusted prior mean, cached Cholesky."""

    x_train: np.ndarray
    y_train: np.ndarray
    kernel: Kernel
    noise_variance: float
    prior_mean: float
    conditioning: ConditioningFn | None
    chol: np.ndarray = field(repr=False)
    alpha_vec: np.ndarray = field(repr=False)
    jitter: float
    log_marginal_likelihood: float

    @classmethod
    def build(
        cls,
        x_train: np.ndarray,
        y_train: np.ndarray,
        kernel: Kernel,
        noise_variance: float,
        prior_mean: float | None = None,
        conditioning: ConditioningFn | None = None,
    ) -> "GpModel":
        """Factorize and cache a model with the given hyperparameters."""
        x = np.atleast_2d(np.asarray(x_train, float))
        y = np.asarray(y_train, float).ravel()
        if len(x) != len(y):
            raise DomainError(f"|X| = {len(x)} but |y| = {len(y)}")
        if noise_variance < 0:
            raise DomainError(f"noise_variance {noise_variance} must be >= 0")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NumericalError(
                "covariance matrix not positive definite: training data "
                "contains non-finite values"
            )
        mean_adjust = _kappa(conditioning, x)
        if prior_mean is None:
            prior_mean = float(np.mean(y - mean_adjust))
        residual = y - mean_adjust - prior_mean
        gram = _gram(kernel, x)
        chol, jitter = _chol_with_escalation(gram, noise_variance, kernel.signal_variance)
        alpha_vec = cho_solve((chol, True), residual)
        lml = (
            -0.5 * float(residual @ alpha_vec)
            - float(np.sum(np.log(np.diag(chol))))
            - 0.5 * len(y) * _LOG_2PI
        )
        return cls(x, y, kernel, noise_variance, prior_mean, conditioning,
                   chol, alpha_vec, jitter, lml)

    @property
    def prior_variance(self) -> float:
        return self.kernel.signal_variance


def _chol_with_escalation(
    gram: np.ndarray, noise_variance: float, signal_variance: float
) -> tuple[np.ndarray, float]:
    n = len(gram)
    if not np.all(np.isfinite(gram)):
        raise NumericalError(
            f"covariance matrix not positive definite: non-finite entries "
            f"(n={n}); check the inputs for inf/nan"
        )
    jitter = 0.0
    for attempt in range(8):
        try:
            chol, _ = cho_factor(
                gram + (noise_variance + jitter) * np.eye(n), lower=True
            )
            return np.tril(chol), jitter
        except np.linalg.LinAlgError:
            jitter = signal_variance * 10.0 ** (-12 + 2 * attempt)
    raise NumericalError(
        f"covariance matrix not positive definite after jitter escalation "
        f"(n={n}, noise_variance={noise_variance:g}, last jitter={jitter:g}); "
        f"the inputs may contain duplicates with zero noise"
    )


def gp_posterior(model: GpModel, x) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at one point (d,) or a batch (m, d).

    mean(x) = m_c(x) + k(x, X) (K + s2 I)^-1 (y - m_c(X)), with m_c the
    adjusted prior mean; the variance is floored at zero.
    """
    pts = np.asarray(x, float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != model.kernel.dim:
        raise DomainError(f"query points must be {model.kernel.dim}-dimensional")
    k_star = _gram(model.kernel, pts, model.x_train)
    mean = model.prior_mean + _kappa(model.conditioning, pts) + k_star @ model.alpha_vec
    v = solve_triangular(model.chol, k_star.T, lower=True)
    var = np.maximum(model.kernel.signal_variance - np.sum(v * v, axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(
    x_train: np.ndarray,
    y_train: np.ndarray,
    kernel: Kernel,
    noise_variance: float,
    prior_mean: float | None = None,
    conditioning: ConditioningFn | None = None,
) -> float:
    """LML of the data under the given hyperparameters (original units)."""
    return GpModel.build(
        x_train, y_train, kernel, noise_variance, prior_mean, conditioning
    ).log_marginal_likelihood


def _neg_lml_and_grad(theta: np.ndarray, sqd: np.ndarray, y: np.ndarray):
    """Negative LML and gradient wrt theta = log [sf2, l_1..d, sn2].

    sqd holds per-dimension squared input differences, shape (n, n, d);
    y is the centered, standardized target.
    """
    n, _, d = sqd.shape
    sf2 = math.exp(theta[0])
    ell2 = np.exp(2.0 * theta[1 : 1 + d])
    sn2 = math.exp(theta[-1])
    k_se = sf2 * np.exp(-0.5 * np.sum(sqd / ell2, axis=2))
    k_full = k_se + sn2 * np.eye(n)
    try:
        chol, _ = cho_factor(k_full, lower=True)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros_like(theta)
    alpha = cho_solve((chol, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(np.tril(chol))))) \
        - 0.5 * n * _LOG_2PI
    k_inv = cho_solve((chol, True), np.eye(n))
    m = np.outer(alpha, alpha) - k_inv
    grad = np.empty_like(theta)
    grad[0] = 0.5 * float(np.sum(m * k_se))
    for j in range(d):
        grad[1 + j] = 0.5 * float(np.sum(m * (k_se * sqd[:, :, j] / ell2[j])))
    grad[-1] = 0.5 * float(np.trace(m)) * sn2
    return -lml, -grad


def gp_fit(
    x_train: np.ndarray,
    y_train: np.ndarray,
    conditioning: ConditioningFn | None = None,
    hyper_bounds: HyperBounds | None = None,
    input_bounds: Sequence[tuple[float, float]] | None = None,
    n_restarts: int = N_RESTARTS,
    initial: tuple[Kernel, float] | None = None,
    seed: int = 0,
) -> GpModel:
    """Fit kernel and noise hyperparameters by maximum marginal likelihood.

    Inputs are scaled to the unit box (using input_bounds, or the data range)
    and outputs standardized for the search; the returned model carries the
    equivalent original-scale hyperparameters.  `initial` warm-starts the
    first of the multi-start local searches.
    """
    x = np.atleast_2d(np.asarray(x_train, float))
    y = np.asarray(y_train, float).ravel()
    n, d = x.shape
    if n != len(y):
        raise DomainError(f"|X| = {n} but |y| = {len(y)}")
    if n < 2:
        raise DomainError("gp_fit requires at least 2 observations")

    if input_bounds is None:
        lo, hi = x.min(axis=0), x.max(axis=0)
    else:
        bounds_arr = np.asarray(input_bounds, float)
        lo, hi = bounds_arr[:, 0], bounds_arr[:, 1]
    width = np.where(hi > lo, hi - lo, 1.0)
    x_scaled = (x - lo) / width

    mean_adjust = _kappa(conditioning, x)
    residual = y - mean_adjust
    center = float(np.mean(residual))
    sd = float(np.std(residual - center))
    if sd <= 0 or not math.isfinite(sd):
        sd = 1.0
    y_scaled = (residual - center) / sd

    diff = x_scaled[:, None, :] - x_scaled[None, :, :]
    sqd = diff * diff

    hb = hyper_bounds or HyperBounds()
    log_bounds = (
        [tuple(math.log(b) for b in hb.signal_variance)]
        + [tuple(math.log(b) for b in hb.length_scale)] * d
        + [tuple(math.log(b) for b in hb.noise_variance)]
    )
    starts = []
    if initial is not None:
        kern0, noise0 = initial
        start = np.concatenate((
            [math.log(kern0.signal_variance / sd**2)],
            np.log(np.asarray(kern0.length_scales) / width),
            [math.log(max(noise0 / sd**2, hb.noise_variance[0]))],
        ))
        starts.append(start)
    starts.append(np.concatenate(([0.0], np.full(d, math.log(0.3)), [math.log(1e-4)])))
    rng = np.random.default_rng(seed)
    lo_b = np.array([b[0] for b in log_bounds])
    hi_b = np.array([b[1] for b in log_bounds])
    while len(starts) < n_restarts:
        starts.append(rng.uniform(lo_b, hi_b))
    starts = [np.clip(s, lo_b, hi_b) for s in starts[:max(n_restarts, 1)]]

    best_theta, best_val = None, np.inf
    for start in starts:
        res = minimize(
            _neg_lml_and_grad, start, args=(sqd, y_scaled),
            method="L-BFGS-B", jac=True, bounds=log_bounds,
            options={"maxiter": 200},
        )
        if res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None:
        raise NumericalError("marginal-likelihood optimization failed for every start")

    sf2 = math.exp(best_theta[0]) * sd**2
    ell = np.exp(best_theta[1 : 1 + d]) * width
    sn2 = math.exp(best_theta[-1]) * sd**2
    kernel = Kernel(sf2, tuple(float(l) for l in ell))
    return GpModel.build(x, y, kernel, sn2, prior_mean=center, conditioning=conditioning)


def condition_mvn(
    mean: Sequence[float],
    cov: np.ndarray,
    observed: Mapping[int, float],
) -> tuple[np.ndarray, np.ndarray]:
    """Condition a multivariate Gaussian on exact values for some coordinates.

    Returns the mean and covariance of the unobserved coordinates (in their
    original order): mu_a + S_ab S_bb^-1 (x_b - mu_b) and
    S_aa - S_ab S_bb^-1 S_ba.
    """
    mu = np.asarray(mean, float)
    sigma = np.asarray(cov, float)
    dim = len(mu)
    if sigma.shape != (dim, dim):
        raise DomainError(f"cov shape {sigma.shape} does not match mean length {dim}")
    if not observed:
        raise DomainError("observed map must not be empty")
    obs_idx = sorted(observed)
    if any(i < 0 or i >= dim for i in obs_idx):
        raise DomainError(f"observed indices {obs_idx} outside 0..{dim - 1}")
    if len(obs_idx) >= dim:
        raise DomainError("observed indices must be a proper subset of the coordinates")
    free_idx = [i for i in range(dim) if i not in observed]
    x_b = np.array([observed[i] for i in obs_idx], float)

    s_aa = sigma[np.ix_(free_idx, free_idx)]
    s_ab = sigma[np.ix_(free_idx, obs_idx)]
    s_bb = sigma[np.ix_(obs_idx, obs_idx)]
    try:
        chol, _ = cho_factor(s_bb, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "observed-block covariance is singular; add a diagonal nugget"
        ) from None
    gain = cho_solve((chol, True), s_ab.T).T
    cond_mean = mu[free_idx] + gain @ (x_b - mu[obs_idx])
    cond_cov = s_aa - gain @ s_ab.T
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    return cond_mean, cond_cov


def expected_improvement(
    model: GpModel, x, f_best: float, direction: str = "maximize"
) -> float | np.ndarray:
    """Closed-form expected improvement over the incumbent f_best."""
    mean, var = gp_posterior(model, x)
    return _ei_from_moments(np.asarray(mean), np.asarray(var), f_best, direction)


def _ei_from_moments(mean, var, f_best: float, direction: str):
    if direction not in ("maximize", "minimize"):
        raise ConfigError(f"direction {direction!r} not 'maximize' or 'minimize'")
    improve = mean - f_best if direction == "maximize" else f_best - mean
    sd = np.sqrt(var)
    out = np.maximum(improve, 0.0)
    positive = sd > 0
    if np.any(positive):
        z = np.where(positive, improve / np.where(positive, sd, 1.0), 0.0)
        pdf = np.exp(-0.5 * z * z) / _SQRT_2PI
        ei = improve * ndtr(z) + sd * pdf
        out = np.where(positive, ei, out)
    return float(out) if np.ndim(out) == 0 else out


def probability_of_improvement(
    model: GpModel, x, f_best: float, direction: str = "maximize"
) -> float | np.ndarray:
    """Phi(z): probability that x improves on the incumbent."""
    mean, var = gp_posterior(model, x)
    mean, var = np.asarray(mean), np.asarray(var)
    improve = mean - f_best if direction == "maximize" else f_best - mean
    sd = np.sqrt(var)
    with np.errstate(divide="ignore"):
        z = np.where(sd > 0, improve / np.where(sd > 0, sd, 1.0), np.where(improve > 0, np.inf, -np.inf))
    out = ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BoConfig:
    """Search box, budget, and seeds for one optimization run."""

    bounds: tuple[tuple[float, float], ...]
    budget: int
    initial_design: int = 8
    acquisition: str = "ei"     # "ei" or "pi"
    seed: int = 0               # drives the design and candidate generation
    objective_seed: int = 0     # common-random-numbers seed for noisy objectives

    def __post_init__(self) -> None:
        if not self.bounds:
            raise ConfigError("bounds must not be empty")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ConfigError(f"invalid bound ({lo}, {hi}): lo must be < hi")
        if self.initial_design < 2:
            raise ConfigError(f"initial_design {self.initial_design} must be >= 2")
        if self.budget < self.initial_design:
            raise ConfigError(
                f"budget {self.budget} must be >= initial_design {self.initial_design}"
            )
        if self.acquisition not in ("ei", "pi"):
            raise ConfigError(f"acquisition {self.acquisition!r} not 'ei' or 'pi'")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])


class ObjectiveError(NumericalError):
    """Objective evaluation failed; .history holds the points seen so far."""

    def __init__(self, message: str, history: list[tuple[np.ndarray, float]]):
        super().__init__(message)
        self.history = history


def _acquisition_values(model: GpModel, pts: np.ndarray, f_best: float,
                        acquisition: str, direction: str) -> np.ndarray:
    if acquisition == "ei":
        return np.asarray(expected_improvement(model, pts, f_best, direction))
    return np.asarray(probability_of_improvement(model, pts, f_best, direction))


def propose_next(
    model: GpModel,
    cfg: BoConfig,
    f_best: float | None = None,
    direction: str = "maximize",
    seed: int | None = None,
    n_candidates: int = 512,
    refine_top: int = 8,
) -> np.ndarray:
    """Acquisition argmax over the box: a scrambled-Sobol candidate sweep
    followed by local refinement of the best candidates.

    Deterministic for a fixed seed.  Ties within 1e-12 of the maximum break
    toward the lexicographically smallest point; if the acquisition is zero
    everywhere (no predicted improvement), the candidate with the best
    posterior mean is returned instead.
    """
    if f_best is None:
        f_best = float(np.max(model.y_train) if direction == "maximize"
                       else np.min(model.y_train))
    sampler = qmc.Sobol(cfg.dim, scramble=True, seed=cfg.seed if seed is None else seed)
    base = sampler.random_base2(max(1, math.ceil(math.log2(n_candidates))))
    candidates = cfg.lo + base * (cfg.hi - cfg.lo)
    acq = _acquisition_values(model, candidates, f_best, cfg.acquisition, direction)

    if float(np.max(acq)) <= 1e-16:
        mean, _ = gp_posterior(model, candidates)
        order = np.argsort(mean)
        pick = order[-1] if direction == "maximize" else order[0]
        return candidates[pick].copy()

    pool_pts = [candidates]
    pool_acq = [acq]
    top = np.argsort(acq)[-refine_top:]
    box = [(float(l), float(h)) for l, h in cfg.bounds]

    def neg_acq(z: np.ndarray) -> float:
        return -float(_acquisition_values(
            model, z[None, :], f_best, cfg.acquisition, direction)[0])

    for idx in top:
        res = minimize(neg_acq, candidates[idx], method="L-BFGS-B", bounds=box)
        z = np.clip(res.x, cfg.lo, cfg.hi)
        pool_pts.append(z[None, :])
        pool_acq.append(np.array([-res.fun]))

    all_pts = np.vstack(pool_pts)
    all_acq = np.concatenate(pool_acq)
    best = float(np.max(all_acq))
    tied = np.flatnonzero(all_acq >= best - 1e-12)
    lex = np.lexsort(all_pts[tied].T[::-1])
    return all_pts[tied[lex[0]]].copy()


@dataclass(frozen=True)
class BoResult:
    best_x: np.ndarray
    best_y: float
    history: tuple[tuple[np.ndarray, float], ...]


def bo_run(
    objective: Callable[[np.ndarray], float],
    cfg: BoConfig,
    conditioning: ConditioningFn | None = None,
    direction: str = "maximize",
) -> BoResult:
    """Sequential optimization: a Latin-hypercube initial design, then
    fit-propose-evaluate until the evaluation budget is exhausted.

    Deterministic given (cfg.seed, cfg.objective_seed); the objective must be
    a deterministic function of x (noisy simulators should fix a
    common-random-numbers seed, see cfg.objective_seed).
    """
    history: list[tuple[np.ndarray, float]] = []

    def evaluate(pt: np.ndarray) -> float:
        try:
            val = float(objective(pt))
        except Exception as exc:
            raise ObjectiveError(
                f"objective evaluation failed at {pt.tolist()}: {exc}", history
            ) from exc
        if not math.isfinite(val):
            raise ObjectiveError(
                f"objective returned non-finite value {val} at {pt.tolist()}", history
            )
        history.append((pt.copy(), val))
        return val

    design = qmc.LatinHypercube(cfg.dim, seed=cfg.seed)
    init_pts = cfg.lo + design.random(cfg.initial_design) * (cfg.hi - cfg.lo)
    for pt in init_pts:
        evaluate(pt)

    prev: tuple[Kernel, float] | None = None
    for iteration in range(cfg.initial_design, cfg.budget):
        x_obs = np.array([p for p, _ in history])
        y_obs = np.array([v for _, v in history])
        model = gp_fit(
            x_obs, y_obs, conditioning,
            input_bounds=cfg.bounds,
            n_restarts=N_RESTARTS if prev is None else 3,
            initial=prev,
            seed=cfg.seed,
        )
        prev = (model.kernel, model.noise_variance)
        step_seed = int(np.random.SeedSequence(
            entropy=cfg.seed, spawn_key=(iteration,)).generate_state(1)[0])
        x_next = propose_next(model, cfg, direction=direction, seed=step_seed)
        evaluate(x_next)

    values = np.array([v for _, v in history])
    best = int(np.argmax(values) if direction == "maximize" else np.argmin(values))
    return BoResult(history[best][0].copy(), float(values[best]),
                    tuple((p.copy(), v) for p, v in history))
