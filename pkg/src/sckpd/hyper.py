"""Data-driven prior centering: digamma/trigamma, the Gamma-shape root
solve, targets extracted from a sample covariance, and the variance solve
for the strict-lower normal priors.

The construction centers the factor prior so that, a priori,
``E[log det(D1 (x) D2)]`` matches the log-determinant target and the
expected squared Frobenius norms of the diagonal and strict-lower parts
match their targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cholgeom import NotPositiveDefiniteError, cholesky, diag_vector, strict_lower

# asymptotic tail coefficients, valid after shifting the argument above 10
_PSI0_TAIL = (1 / 12., -1 / 120., 1 / 252., -1 / 240., 1 / 132., -691 / 32760., 1 / 12.)
_PSI1_TAIL = (1 / 6., -1 / 30., 1 / 42., -1 / 30., 5 / 66., -691 / 2730., 7 / 6.)
_SHIFT = 10.0


def digamma(x: float) -> float:
    """psi_0(x) for x > 0 via upward recurrence and the asymptotic series."""
    x = float(x)
    if x <= 0:
        raise ValueError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    s = 0.0
    p = inv2
    for b in _PSI0_TAIL:
        s += b * p
        p *= inv2
    return acc + math.log(x) - 0.5 / x - s


def trigamma(x: float) -> float:
    """psi_1(x) for x > 0; companion to :func:`digamma` for Newton steps."""
    x = float(x)
    if x <= 0:
        raise ValueError(f"trigamma requires x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    s = inv + 0.5 * inv2
    p = inv * inv2
    for b in _PSI1_TAIL:
        s += b * p
        p *= inv2
    return acc + s


def shape_residual(a: float, c: float) -> float:
    """|a^2 + a - c exp(2 psi_0(a))|, the quantity the shape solve drives down."""
    return abs(a * a + a - c * math.exp(2.0 * digamma(a)))


def solve_a(c: float, tol: float = 1e-10, return_residuals: bool = False):
    """Gamma shape minimizing |a^2 + a - c exp(2 psi_0(a))|.

    For c > 1 there is a unique root; iteration runs on the equivalent
    log form g(a) = log(a^2 + a) - 2 psi_0(a) - log c (bracketed bisection,
    then Newton safeguarded against leaving the bracket), which stays well
    conditioned where the raw residual cancels catastrophically.  For
    c <= 1 no root exists (exp(2 psi_0(a)) < a^2 for all a > 0) and the
    objective infimum sits at a -> 0+, so the boundary minimizer a = tol/4
    is returned; its residual is ~tol/4.
    """
    c = float(c)
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    history: list[float] = []

    def g(a: float) -> float:
        return math.log(a * a + a) - 2.0 * digamma(a) - math.log(c)

    if c <= 1.0:
        a = tol / 4.0
        history.append(shape_residual(a, c))
        return (a, history) if return_residuals else a

    lo, hi = 1e-8, 10.0
    glo, ghi = g(lo), g(hi)
    while glo * ghi > 0 and hi < 1e12:
        lo, glo = hi, ghi
        hi *= 10.0
        ghi = g(hi)
    if glo * ghi > 0:
        raise ValueError(f"no sign change for c={c} within [1e-8, 1e12]")

    best = None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        res = shape_residual(mid, c)
        if best is None or res < best[1]:
            best = (mid, res)
        history.append(best[1])
        if glo * gm <= 0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if best[1] < tol or hi - lo < 1e-15 * hi:
            break

    x = best[0]
    for _ in range(50):
        if shape_residual(x, c) < tol:
            break
        gx = g(x)
        dgx = (2 * x + 1) / (x * x + x) - 2.0 * trigamma(x)
        step = gx / dgx
        xn = x - step
        if not (lo <= xn <= hi) or not np.isfinite(xn):
            xn = 0.5 * (lo + hi)
        if g(xn) * glo <= 0:
            hi = xn
        else:
            lo, glo = xn, g(xn)
        x = xn
        res = shape_residual(x, c)
        if res < best[1]:
            best = (x, res)
        history.append(best[1])

    a, res = best
    if res >= tol:
        raise ValueError(
            f"shape solve stalled at residual {res:.3e} (tol {tol:.1e}); "
            f"c={c} is too close to 1 for double precision")
    return (a, history) if return_residuals else a


@dataclass(frozen=True)
class PriorTargets:
    """Centering constants measured from the sample covariance factor."""

    chol_log_det: float      # log det of the covariance Cholesky factor
    diag_energy: float       # squared Frobenius norm of its diagonal
    lower_energy: float      # squared Frobenius norm of its strict lower part
    lower_ratio: float       # d1(d1-1) / (d2(d2-1))
    n_lower1: float          # d1(d1-1)/2, strict-lower entry count in mode 1
    d1: int
    d2: int

    def __post_init__(self):
        if self.diag_energy <= 0:
            raise ValueError("diagonal energy target must be positive")
        if self.lower_energy < 0:
            raise ValueError("lower energy target must be nonnegative")
        expect_ratio = self.d1 * (self.d1 - 1) / (self.d2 * (self.d2 - 1))
        expect_m1 = self.d1 * (self.d1 - 1) / 2
        if not (math.isclose(self.lower_ratio, expect_ratio, rel_tol=1e-12)
                and math.isclose(self.n_lower1, expect_m1, rel_tol=1e-12)):
            raise ValueError("lower_ratio / n_lower1 inconsistent with dims")


def make_targets(chol_log_det: float, diag_energy: float, lower_energy: float,
                 d1: int, d2: int) -> PriorTargets:
    if min(d1, d2) < 2:
        raise ValueError("both mode dimensions must be at least 2")
    return PriorTargets(
        chol_log_det=float(chol_log_det),
        diag_energy=float(diag_energy),
        lower_energy=float(lower_energy),
        lower_ratio=d1 * (d1 - 1) / (d2 * (d2 - 1)),
        n_lower1=d1 * (d1 - 1) / 2,
        d1=int(d1), d2=int(d2))


def prior_targets_from_sample(S: np.ndarray, d1: int, d2: int) -> PriorTargets:
    """Targets from the Cholesky factor of a d1*d2 x d1*d2 sample covariance.

    A rank-deficient sample covariance raises; add diagonal jitter yourself
    if that is acceptable for your data (it is never applied silently).
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (d1 * d2, d1 * d2):
        raise ValueError(f"expected a {d1 * d2} x {d1 * d2} covariance, got {S.shape}")
    try:
        L = cholesky(S)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(exc.order) from ValueError(
            "sample covariance is rank deficient; consider adding diagonal jitter "
            "before computing prior targets")
    diag = diag_vector(L)
    return make_targets(
        chol_log_det=float(np.sum(np.log(diag))),
        diag_energy=float(np.sum(diag ** 2)),
        lower_energy=float(np.sum(strict_lower(L) ** 2)),
        d1=d1, d2=d2)


def solve_beta(targets: PriorTargets) -> float:
    """Nonnegative variance for the strict-lower normal priors.

    Root of  sqrt(F_D) M1 (1 + 1/c) b + (M1^2 / c) b^2 = F_L  in b, where
    F_D/F_L are the diagonal/lower energy targets, M1 the mode-1 strict
    lower count and c the count ratio.  The plug-back identity is the
    correctness check.
    """
    m1 = targets.n_lower1
    c = targets.lower_ratio
    quad = m1 * m1 / c
    lin = math.sqrt(targets.diag_energy) * m1 * (1.0 + 1.0 / c)
    disc = lin * lin + 4.0 * quad * targets.lower_energy
    assert disc >= 0.0, "discriminant cannot be negative for valid targets"
    return (-lin + math.sqrt(disc)) / (2.0 * quad)


def diag_prior_rate(a_i: float, chol_log_det: float, d1: int, d2: int) -> float:
    """Gamma rate making E[log X] equal chol_log_det / (2 d1 d2)."""
    if a_i <= 0:
        raise ValueError("shape must be positive")
    return math.exp(digamma(a_i) - chol_log_det / (2.0 * d1 * d2))


@dataclass(frozen=True)
class SolvedHyper:
    """Solved hyperparameters for one target set."""

    shape1: float
    shape2: float
    rate1: float
    rate2: float
    lower_variance: float    # variance scale for strict-lower normal priors
    residual: float          # worst |a^2 + a - c exp(2 psi_0(a))| over modes
    c1: float                # raw shape targets, before any clamping
    c2: float

    @property
    def degenerate(self) -> bool:
        """True when either shape target fell in the rootless c <= 1 regime."""
        return self.c1 <= 1.0 or self.c2 <= 1.0


DEGENERATE_CLAMP = 1.05


def solve_hyper(targets: PriorTargets, tol: float = 1e-10,
                degenerate_policy: str = "clamp") -> SolvedHyper:
    """Solve both Gamma shapes, their rates, and the lower-prior variance.

    The shape targets are c_i = sqrt(F_D)/d_i * exp(-gamma/(d1 d2)), which
    makes E[norm(D_i)_F^2] land on sqrt(F_D) once the shape equation holds;
    together with the rate choice this centers the diagonal determinant
    and energy simultaneously.

    A target c_i <= 1 asks for less dispersion than a point mass can give
    (E[X^2] >= exp(2 E[log X]) for any distribution), which the shape
    equation cannot reach; under the default "clamp" policy the shape is
    solved at c = 1.05 instead, the nearest proper tight prior, and
    ``degenerate`` is set.  Policy "error" raises instead.
    """
    if degenerate_policy not in ("clamp", "error"):
        raise ValueError("degenerate_policy must be 'clamp' or 'error'")
    gd = targets.chol_log_det
    scale = math.exp(-gd / (targets.d1 * targets.d2))
    c1 = math.sqrt(targets.diag_energy) / targets.d1 * scale
    c2 = math.sqrt(targets.diag_energy) / targets.d2 * scale
    if (c1 <= 1.0 or c2 <= 1.0) and degenerate_policy == "error":
        raise ValueError(
            f"shape targets c1={c1:.4g}, c2={c2:.4g} must exceed 1; the sample "
            "covariance factor's diagonal is too homogeneous for the centering")
    c1_eff = max(c1, DEGENERATE_CLAMP)
    c2_eff = max(c2, DEGENERATE_CLAMP)
    a1 = solve_a(c1_eff, tol)
    a2 = solve_a(c2_eff, tol)
    return SolvedHyper(
        shape1=a1,
        shape2=a2,
        rate1=diag_prior_rate(a1, gd, targets.d1, targets.d2),
        rate2=diag_prior_rate(a2, gd, targets.d1, targets.d2),
        lower_variance=solve_beta(targets),
        residual=max(shape_residual(a1, c1_eff), shape_residual(a2, c2_eff)),
        c1=c1, c2=c2)
