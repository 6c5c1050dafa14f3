"""Self-contained Hamiltonian Monte Carlo with a diagonal mass matrix:
position-Verlet leapfrog (half step in position, full step in momentum,
half step in position), Metropolis correction, dual-averaging step-size
adaptation toward a target acceptance rate, optional mass estimation from
warmup variances, and autocorrelation-based chain diagnostics.

Randomness comes from a counter-based Philox generator keyed as
(seed, chain_index), so chains are reproducible and independent whether
they run sequentially or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE_ENERGY = 1000.0   # |dH| beyond this flags the proposal divergent


@dataclass
class HMCConfig:
    step_size: float = 0.1
    n_leapfrog: int = 32
    target_accept: float = 0.8
    n_warmup: int = 1000
    n_draws: int = 1000
    seed: int = 0
    chain_index: int = 0
    mass: np.ndarray | None = None     # diagonal of the momentum covariance
    adapt_mass: bool = False
    init_step_search: bool = True
    # fraction by which the step is uniformly jittered each iteration; kills
    # the near-periodic trapping a fixed trajectory length suffers on targets
    # whose oscillation period divides the integration time
    step_jitter: float = 0.2
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.step_size <= 0 or self.n_leapfrog < 1:
            raise ValueError("step size and leapfrog count must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.n_warmup < 0 or self.n_draws < 0:
            raise ValueError("warmup and draw counts must be nonnegative")
        if not 0.0 <= self.step_jitter < 1.0:
            raise ValueError("step jitter must lie in [0, 1)")
        if self.mass is not None and np.any(np.asarray(self.mass) <= 0):
            raise ValueError("mass diagonal must be strictly positive")


@dataclass
class Chain:
    draws: np.ndarray                  # (n_draws, dim) unconstrained states
    accept_flags: np.ndarray
    accept_probs: np.ndarray
    energies: np.ndarray
    divergence_flags: np.ndarray
    adapted_step_size: float
    mass: np.ndarray
    warmup_divergences: int = 0

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accept_flags)) if len(self.accept_flags) else 0.0


class TrajectoryDivergence(Exception):
    """Non-finite state or gradient mid-trajectory; carries the partial point."""

    def __init__(self, q: np.ndarray, p: np.ndarray, step: int):
        self.q, self.p, self.step = q, p, step
        super().__init__(f"trajectory diverged at leapfrog step {step}")


def leapfrog(grad_fn, q: np.ndarray, p: np.ndarray, step_size: float,
             n_steps: int, mass_inv: np.ndarray | None = None
             ) -> tuple[np.ndarray, np.ndarray]:
    """Integrate n_steps of the half-q / full-p / half-q splitting.

    ``grad_fn(q)`` returns the gradient of the log posterior.  Deterministic,
    time reversible (negate p and integrate back), with O(step^2) energy
    error.  Raises :class:`TrajectoryDivergence` on non-finite values.
    """
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    minv = np.ones_like(q) if mass_inv is None else mass_inv
    q += 0.5 * step_size * minv * p
    for step in range(n_steps):
        g = grad_fn(q)
        if not np.all(np.isfinite(g)):
            raise TrajectoryDivergence(q, p, step)
        p += step_size * g
        scale = step_size if step < n_steps - 1 else 0.5 * step_size
        q += scale * minv * p
        if not np.all(np.isfinite(q)):
            raise TrajectoryDivergence(q, p, step)
    return q, p


def _kinetic(p: np.ndarray, mass_inv: np.ndarray) -> float:
    return 0.5 * float(np.sum(p * p * mass_inv))


def find_reasonable_step_size(value_and_grad, q: np.ndarray, step_size: float,
                              mass: np.ndarray, rng: np.random.Generator) -> float:
    """Double or halve the step until a single step crosses 50% acceptance."""
    mass_inv = 1.0 / mass
    grad_fn = lambda x: value_and_grad(x)[1]
    p0 = rng.normal(size=q.shape) * np.sqrt(mass)
    h0 = -value_and_grad(q)[0] + _kinetic(p0, mass_inv)

    def log_ratio(eps):
        try:
            q1, p1 = leapfrog(grad_fn, q, p0, eps, 1, mass_inv)
        except TrajectoryDivergence:
            return -np.inf
        v1 = value_and_grad(q1)[0]
        if not np.isfinite(v1):
            return -np.inf
        return h0 - (-v1 + _kinetic(p1, mass_inv))

    eps = step_size
    direction = 1.0 if log_ratio(eps) > math.log(0.5) else -1.0
    for _ in range(50):
        eps_next = eps * 2.0 ** direction
        if direction * log_ratio(eps_next) <= direction * math.log(0.5):
            break
        eps = eps_next
    return eps


class _DualAveraging:
    """Nesterov-style averaging of log step sizes toward a target acceptance."""

    def __init__(self, step_size: float, target: float,
                 gamma: float = 0.05, t0: float = 10.0, kappa: float = 0.75):
        self.mu = math.log(10.0 * step_size)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.m = 0
        self.log_eps = math.log(step_size)

    def update(self, accept_prob: float) -> float:
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        w = self.m ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def averaged(self) -> float:
        return math.exp(self.log_eps_bar)


def hmc_sample(value_and_grad, config: HMCConfig) -> Chain:
    """Run one chain: dual-averaged warmup, then fixed-step sampling.

    ``value_and_grad(q)`` returns (log posterior, gradient).  Momentum is
    resampled every iteration from N(0, mass); proposals are accepted with
    the Metropolis ratio min(1, exp(H0 - H1)); a proposal with |dH| above
    the divergence threshold (or a non-finite trajectory) is rejected and
    flagged.  Identical (config, target) pairs give identical chains.
    """
    if config.init is None:
        raise ValueError("config.init must provide the starting state")
    q = np.array(config.init, dtype=float)
    dim = q.shape[0]
    rng = np.random.Generator(np.random.Philox(
        key=np.array([config.seed % 2 ** 64, config.chain_index], dtype=np.uint64)))

    mass = np.ones(dim) if config.mass is None else np.asarray(config.mass, dtype=float).copy()
    mass_inv = 1.0 / mass
    value, _ = value_and_grad(q)
    if not np.isfinite(value):
        raise ValueError("log posterior is not finite at the initial state")

    eps = config.step_size
    if config.n_warmup > 0 and config.init_step_search:
        eps = find_reasonable_step_size(value_and_grad, q, eps, mass, rng)
    averager = _DualAveraging(eps, config.target_accept)
    grad_fn = lambda x: value_and_grad(x)[1]

    n_total = config.n_warmup + config.n_draws
    draws = np.empty((config.n_draws, dim))
    accept_flags = np.zeros(config.n_draws, dtype=bool)
    accept_probs = np.zeros(config.n_draws)
    energies = np.empty(config.n_draws)
    div_flags = np.zeros(config.n_draws, dtype=bool)
    warmup_div = 0
    warmup_accepts = 0

    # with mass adaptation, warmup splits at the midpoint: variances of the
    # second quarter of phase one become the new mass diagonal
    mass_switch = config.n_warmup // 2 if (config.adapt_mass and config.n_warmup >= 40) else None
    window: list[np.ndarray] = []

    for it in range(n_total):
        warmup = it < config.n_warmup
        p0 = rng.normal(size=dim) * np.sqrt(mass)
        h0 = -value + _kinetic(p0, mass_inv)
        eps_it = eps * (1.0 + config.step_jitter * rng.uniform(-1.0, 1.0))
        diverged = False
        delta = -np.inf
        h1 = h0
        try:
            q_new, p_new = leapfrog(grad_fn, q, p0, eps_it, config.n_leapfrog, mass_inv)
            v_new, _ = value_and_grad(q_new)
            h1 = -v_new + _kinetic(p_new, mass_inv)
            delta = h0 - h1
            if not np.isfinite(delta) or abs(delta) > DIVERGENCE_ENERGY:
                diverged = True
                delta = -np.inf
        except TrajectoryDivergence:
            diverged = True
        accept_prob = 0.0 if diverged else min(1.0, math.exp(min(delta, 0.0)))

        accepted = bool(rng.uniform() < accept_prob)
        if accepted:
            q, value = q_new, v_new

        if warmup:
            warmup_div += int(diverged)
            warmup_accepts += int(accepted)
            eps = averager.update(accept_prob)
            if mass_switch is not None:
                if mass_switch // 2 <= it < mass_switch:
                    window.append(q.copy())
                if it == mass_switch - 1 and len(window) >= 10:
                    var = np.var(np.asarray(window), axis=0, ddof=1)
                    floor = max(var.max(), 1e-12) * 1e-8
                    mass = 1.0 / np.maximum(var, floor)
                    mass_inv = 1.0 / mass
                    eps = find_reasonable_step_size(value_and_grad, q, eps, mass, rng) \
                        if config.init_step_search else averager.averaged
                    averager = _DualAveraging(eps, config.target_accept)
            if it == config.n_warmup - 1:
                eps = averager.averaged
                if config.n_warmup >= 20 and warmup_div == config.n_warmup:
                    raise RuntimeError(
                        f"every warmup iteration diverged (step size {eps:.3e}); "
                        "the target may be ill-posed at the initial state")
        else:
            k = it - config.n_warmup
            draws[k] = q
            accept_flags[k] = accepted
            accept_probs[k] = accept_prob
            energies[k] = h1 if accepted else h0
            div_flags[k] = diverged

    return Chain(draws=draws, accept_flags=accept_flags, accept_probs=accept_probs,
                 energies=energies, divergence_flags=div_flags,
                 adapted_step_size=eps, mass=mass, warmup_divergences=warmup_div)


# ---------------------------------------------------------------------------
# diagnostics

def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n].real
    return acov / n


def effective_sample_size(chains: np.ndarray) -> float:
    """Autocorrelation ESS for one coordinate, chains shaped (C, N).

    Uses the combined-chain correlation estimate with Geyer's initial
    monotone positive-pair truncation.  Degenerate zero-variance input
    returns 1.0.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    C, N = chains.shape
    if N < 4:
        return float(N * C)
    acov = np.stack([_autocov(c) for c in chains])
    mean_acov = acov.mean(axis=0)
    W = float(np.mean([c.var(ddof=1) for c in chains]))
    if C > 1:
        B_over_n = float(np.var(chains.mean(axis=1), ddof=1))
        var_plus = W * (N - 1) / N + B_over_n
    else:
        var_plus = W * (N - 1) / N + W / N
    if var_plus <= 0 or not np.isfinite(var_plus):
        return 1.0
    rho = 1.0 - (W - mean_acov) / var_plus
    rho[0] = 1.0
    # Geyer pairs: stop at the first negative pair, enforce non-increase
    tau = 0.0
    prev = np.inf
    for k in range(0, (N - 1) // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        tau += pair
        prev = pair
    tau = max(2.0 * tau - 1.0, 1.0 / N)
    return float(C * N / tau)


def split_rhat(chains: np.ndarray) -> float:
    """Split potential scale reduction for one coordinate, chains (C, N)."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    C, N = chains.shape
    half = N // 2
    if half < 2:
        return float("nan")
    splits = np.concatenate([chains[:, :half], chains[:, N - half:]], axis=0)
    m, n = splits.shape
    means = splits.mean(axis=1)
    W = float(np.mean(splits.var(axis=1, ddof=1)))
    B = n * float(np.var(means, ddof=1))
    if W <= 0:
        return 1.0
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


@dataclass
class Diagnostics:
    acceptance_rate: float
    ess: np.ndarray
    rhat: np.ndarray
    flags: list[str] = field(default_factory=list)


def diagnostics(chains) -> Diagnostics:
    """Per-coordinate ESS and split R-hat over one or more chains.

    Degenerate inputs (identical chains, zero-variance coordinates) are
    reported in ``flags`` rather than passed off as healthy.
    """
    if not chains:
        raise ValueError("need at least one chain")
    arrs = [c.draws if isinstance(c, Chain) else np.asarray(c, dtype=float) for c in chains]
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ValueError("chains must share (n_draws, dim)")
    stacked = np.stack(arrs)                       # (C, N, dim)
    C, N, dim = stacked.shape
    flags = []
    for i in range(C):
        for j in range(i + 1, C):
            if np.array_equal(stacked[i], stacked[j]):
                flags.append(f"identical-chains:{i},{j}")
    ess = np.empty(dim)
    rhat = np.empty(dim)
    for k in range(dim):
        coord = stacked[:, :, k]
        if np.allclose(coord, coord.ravel()[0]):
            flags.append(f"zero-variance:{k}")
            ess[k] = 1.0
            rhat[k] = float("nan")
            continue
        ess[k] = effective_sample_size(coord)
        rhat[k] = split_rhat(coord)
    rates = [c.acceptance_rate for c in chains if isinstance(c, Chain)]
    rate = float(np.mean(rates)) if rates else float("nan")
    return Diagnostics(acceptance_rate=rate, ess=ess, rhat=rhat, flags=flags)
