"""Closed-form scaling-law predictions and power-law fitting.

The exponent bundle (tau, sigma, D, c) fixes everything: the quanta
exponent alpha = (3 - tau)/(tau - 2), the optimal capacity-allocation
exponent b = (c/D - alpha)/(c/D + 1), the break rank k_br solving
b*N = k_br*(1 - k_br**-b), and the model- and data-scaling losses (up to
an overall constant). Natural logarithms throughout.
"""

import math
from dataclasses import dataclass, field

import numpy as np

B_DEGENERATE = 1e-6  # |b| below this uses the k*ln(k) = N limit
_KBR_RTOL = 1e-13


@dataclass(frozen=True)
class TheoryParams:
    """Critical exponents and the model-class constant.

    Defaults are the mean-field (d >= 6) percolation values with a
    piecewise-constant approximator: tau=5/2, sigma=1/2, D=4, c=2.
    """

    tau: float = 2.5
    sigma_exp: float = 0.5
    D: float = 4.0
    c: float = 2.0
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.tau <= 2.0:
            raise ValueError(f"tau={self.tau} must exceed 2")
        if self.D <= 0 or self.c <= 0:
            raise ValueError("c and D must be positive")
        object.__setattr__(self, "alpha", alpha_from_tau(self.tau))
        if self.alpha <= 0:
            raise ValueError(f"tau={self.tau} gives alpha={self.alpha} <= 0")

    @property
    def c_over_d(self) -> float:
        return self.c / self.D

    @classmethod
    def from_alpha(cls, alpha: float, c_over_d: float, D: float = 4.0):
        """Build params from (alpha, c/D) directly; tau = (3+2a)/(1+a)."""
        if alpha <= 0:
            raise ValueError(f"alpha={alpha} must be positive")
        tau = (3.0 + 2.0 * alpha) / (1.0 + alpha)
        return cls(tau=tau, D=D, c=c_over_d * D)


@dataclass(frozen=True)
class DofAllocation:
    """Optimal per-rank capacity assignment n_k = a*k**(b-1) below k_br."""

    N: float
    b: float
    k_br: float
    a: float

    def n(self, k) -> np.ndarray:
        """Capacity for rank(s) k; zero at and beyond the break rank."""
        k = np.asarray(k, dtype=np.float64)
        out = self.a * np.power(k, self.b - 1.0)
        return np.where(k < self.k_br, out, 0.0)


def alpha_from_tau(tau: float) -> float:
    """Quanta exponent alpha = (3 - tau)/(tau - 2)."""
    if tau <= 2.0:
        raise ValueError(f"tau={tau} must exceed 2")
    return (3.0 - tau) / (tau - 2.0)


def allocation_exponent(c_over_d: float, alpha: float) -> float:
    """Allocation exponent b = (c/D - alpha)/(c/D + 1)."""
    if c_over_d <= 0:
        raise ValueError(f"c/D={c_over_d} must be positive")
    if alpha <= 0:
        raise ValueError(f"alpha={alpha} must be positive")
    return (c_over_d - alpha) / (c_over_d + 1.0)


def _kbr_residual(k: float, N: float, b: float) -> float:
    if abs(b) < B_DEGENERATE:
        return k * math.log(k) - N
    return k * (1.0 - k ** (-b)) - b * N


def solve_kbr(N: float, b: float) -> float:
    """Break rank solving b*N = k_br*(1 - k_br**-b) on (1, N+1].

    For |b| < 1e-6 the degenerate limit k*ln(k) = N is solved instead.
    Bisection on the monotone bracket, converged to relative ~1e-13.
    """
    if N < 2:
        raise ValueError(f"N={N} must be >= 2")
    if b >= 1.0:
        raise ValueError(f"b={b} must be < 1")
    lo, hi = 1.0, float(N) + 1.0
    f_lo = _kbr_residual(lo, N, b)  # 0 at k=1 for the non-degenerate form
    f_hi = _kbr_residual(hi, N, b)
    if f_lo == 0.0:
        f_lo = -f_hi  # orient the bracket away from the trivial zero
    if f_lo * f_hi > 0:
        raise ValueError(f"no bracket for k_br at N={N}, b={b}")
    increasing = f_hi > 0
    while hi - lo > _KBR_RTOL * lo:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = _kbr_residual(mid, N, b)
        if (f_mid > 0) == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def kbr_asymptotic(N: float, b: float) -> float:
    """The matching limiting form for k_br: b ~ 1, |b| ~ 0, or b < -1."""
    if abs(b) < B_DEGENERATE:
        return N / math.log(N / math.log(N))
    if b > 0:
        return float(N)
    ab = abs(b)
    return (ab * N) ** (1.0 / (1.0 + ab))


def dof_allocation(N: float, b: float, k_br: float | None = None) -> DofAllocation:
    """Capacity allocation with a normalized so the discrete sum equals N.

    The continuum normalization a = b*N/(k_br**b - 1) (see
    normalization_continuum) overshoots the discrete sum by O(a/2) for
    steeply decaying allocations, so a is fixed against
    sum_{k<k_br} k**(b-1) = N directly.
    """
    if k_br is None:
        k_br = solve_kbr(N, b)
    if k_br <= 1.0:
        raise ValueError(f"k_br={k_br} must exceed 1")
    ks = np.arange(1, math.ceil(k_br))
    ks = ks[ks < k_br]
    a = float(N) / float(np.power(ks.astype(np.float64), b - 1.0).sum())
    return DofAllocation(N=float(N), b=b, k_br=float(k_br), a=a)


def normalization_continuum(N: float, b: float, k_br: float) -> float:
    """Continuum normalization a = b*N/(k_br**b - 1); a = N/ln(k_br) at b ~ 0."""
    if abs(b) < B_DEGENERATE:
        return N / math.log(k_br)
    return b * N / (k_br**b - 1.0)


def model_loss(N, params: TheoryParams = TheoryParams()):
    """Model-scaling loss (N/k_br + 1/alpha) * k_br**-alpha, up to a constant."""
    alpha = params.alpha
    b = allocation_exponent(params.c_over_d, alpha)
    scalar = np.isscalar(N)
    Ns = np.atleast_1d(np.asarray(N, dtype=np.float64))
    out = np.empty_like(Ns)
    for i, n in enumerate(Ns):
        kbr = solve_kbr(n, b)
        out[i] = (n / kbr + 1.0 / alpha) * kbr ** (-alpha)
    return float(out[0]) if scalar else out


def model_loss_asymptotic(N, params: TheoryParams, branch: str):
    """Limiting diagnostics for model_loss (not substitutes).

    branch="quanta":   (1 + 1/alpha) * N**-alpha        (c/D >> alpha)
    branch="manifold": (alpha/(c/D+1))**-(c/D+1)
                       * (1 + alpha**-1 N**(-alpha/(1+alpha))) * N**-c/D
                                                        (c/D << alpha)
    """
    alpha = params.alpha
    cd = params.c_over_d
    N = np.asarray(N, dtype=np.float64)
    if branch == "quanta":
        return (1.0 + 1.0 / alpha) * N ** (-alpha)
    if branch == "manifold":
        pref = (alpha / (cd + 1.0)) ** (-(cd + 1.0))
        corr = 1.0 + (1.0 / alpha) * N ** (-alpha / (1.0 + alpha))
        return pref * corr * N ** (-cd)
    raise ValueError(f"unknown branch {branch!r}")


def data_loss(D_size, params: TheoryParams = TheoryParams()):
    """Data-scaling loss, up to a constant; switches to the equal-exponent
    logarithmic form when c/D == alpha/(1+alpha)."""
    alpha = params.alpha
    cd = params.c_over_d
    ad = alpha / (1.0 + alpha)
    D_size = np.asarray(D_size, dtype=np.float64)
    if np.any(D_size < 2):
        raise ValueError("dataset size must be >= 2")
    if abs(cd - ad) <= 1e-9:
        pref = alpha ** (-cd - 1.0)
        out = pref * (1.0 + cd * math.log(alpha) + cd * np.log(D_size)) * D_size ** (-cd)
    else:
        t1 = alpha ** (-ad - 1.0) / (1.0 - ad / cd) * D_size ** (-ad)
        t2 = alpha ** (-cd - 1.0) / (1.0 - cd / ad) * D_size ** (-cd)
        out = t1 + t2
    return float(out) if out.ndim == 0 else out


def task_loss_reduction(p: float, L: float, R_s) -> np.ndarray:
    """Per-task loss change log(1+delta) + delta/(1+delta)*log(p)/(1-p),
    with delta = (1-p)*R_s/(p*L). Vanishes at R_s -> 0 and R_s = L."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} must lie strictly inside (0, 1)")
    R_s = np.asarray(R_s, dtype=np.float64)
    if np.any(R_s < 0) or np.any(R_s > L):
        raise ValueError("R_s must lie in [0, L]")
    delta = (1.0 - p) * R_s / (p * L)
    out = np.log1p(delta) + delta / (1.0 + delta) * math.log(p) / (1.0 - p)
    return float(out) if out.ndim == 0 else out


def task_loss_reduction_linear(p: float, L: float, R_s) -> np.ndarray:
    """First-order form (1 - p + log p)/(p*L) * R_s."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} must lie strictly inside (0, 1)")
    R_s = np.asarray(R_s, dtype=np.float64)
    out = (1.0 - p + math.log(p)) / (p * L) * R_s
    return float(out) if out.ndim == 0 else out


class PowerLawFitError(ValueError):
    """Raised for unusable power-law fit input."""


def power_law_fit(x, y) -> tuple[float, float, float]:
    """Least-squares fit of y = C * x**beta in log-log space.

    Returns (C, beta, stderr_beta). Needs >= 3 strictly positive points
    with nondegenerate x spread.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise PowerLawFitError("x and y must be 1-D arrays of equal length")
    if np.any(x <= 0) or np.any(y <= 0):
        raise PowerLawFitError("power-law fit requires strictly positive data")
    if x.size < 3:
        raise PowerLawFitError(f"need at least 3 points, got {x.size}")
    lx = np.log(x)
    ly = np.log(y)
    sxx = np.sum((lx - lx.mean()) ** 2)
    if sxx <= 0:
        raise PowerLawFitError("degenerate fit: no spread in x")
    beta = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    logC = float(ly.mean() - beta * lx.mean())
    resid = ly - (logC + beta * lx)
    dof = x.size - 2
    stderr = float(np.sqrt(np.sum(resid**2) / dof / sxx))
    return math.exp(logC), beta, stderr


def local_slope(fn, x: float, half_decades: float = 0.25) -> float:
    """Log-log slope of fn about x, from points half a window either side."""
    x1 = x * 10 ** (-half_decades)
    x2 = x * 10 ** (half_decades)
    y1 = fn(x1)
    y2 = fn(x2)
    return math.log(y2 / y1) / math.log(x2 / x1)
