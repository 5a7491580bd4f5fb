"""Exact bias-correction iterations and the bound calculators.

Stationary iteration: f^(j+1) = f^(j) + (f - S f^(j)), whose bias after k
steps is -(Id-S)^(k+1) f.  Scheduled iteration: G_j = G_(j-1) +
eta_j*(f - S G_(j-1)), with bias Prod_i (Id - eta_i S)(S f - f).  With step
sizes eta_i = (falling(N,i)/N^i)^(-1) the i-th factor kills the i-block
level, so k = m steps with N >= m leave exactly zero bias.

Everything here is coefficient-space algebra on MomentPolynomial; nothing
draws samples.  Bound calculators work in log space so they survive inputs
far beyond double range.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from .lattice import falling_factorial
from .moments import (
    InfeasibleError,
    MomentPolynomial,
    MomentTable,
    evaluate,
    reachable_blocks,
)
from .resampling import (
    apply_S,
    one_norm_id_minus_S,
    one_norm_id_minus_scaled,
    sampling_matrix,
)


class StepSchedule:
    """A sample size together with step sizes eta_1..eta_k."""

    def __init__(self, n, etas):
        self.n = n
        self.etas = tuple(etas)
        if any(eta <= 0 for eta in self.etas):
            raise ValueError("step sizes must be positive")

    @classmethod
    def default(cls, n, k):
        """eta_i = N^i (N-i)! / N!, the reciprocal level-i diagonal weight."""
        if k > n:
            raise InfeasibleError(
                f"default schedule needs k <= N, got k={k} steps at N={n}"
            )
        return cls(n, [Fraction(n**i, falling_factorial(n, i)) for i in range(1, k + 1)])

    @classmethod
    def unit(cls, n, k):
        return cls(n, [Fraction(1)] * k)

    def __len__(self):
        return len(self.etas)

    def __iter__(self):
        return iter(self.etas)

    def __getitem__(self, i):
        return self.etas[i]

    def __repr__(self):
        return f"StepSchedule(N={self.n}, etas={self.etas})"


# -- iterations ------------------------------------------------------------------

def richardson_debias(F, n, k):
    """k corrected steps, recursion form."""
    if k < 0:
        raise ValueError(f"step count must be nonnegative, got {k}")
    g = F
    for _ in range(k):
        g = g + (F - apply_S(g, n))
    return g


def richardson_neumann(F, n, k):
    """Same estimator as the partial sum sum_{i<=k} (Id-S)^i f.

    Deliberately a second, independent route; tests compare the two.
    """
    if k < 0:
        raise ValueError(f"step count must be nonnegative, got {k}")
    total = F
    p = F
    for _ in range(k):
        p = p - apply_S(p, n)
        total = total + p
    return total


def nonstationary_debias(F, n, schedule):
    """Scheduled steps G_j = G_(j-1) + eta_j*(f - S G_(j-1)), G_0 = f."""
    if len(schedule) < 1:
        raise InfeasibleError("schedule must contain at least one step")
    g = F
    for eta in schedule:
        g = g + eta * (F - apply_S(g, n))
    return g


# -- exact bias trajectories -------------------------------------------------------

@dataclass(frozen=True)
class BiasRecord:
    k: int
    estimator: MomentPolynomial
    signed_bias: object
    abs_bias: object
    bound: float


@dataclass(frozen=True)
class BiasReport:
    n: int
    mode: str
    target: object
    records: tuple

    def rows(self):
        """(k, signed_bias, abs_bias, bound) per iteration."""
        return [(r.k, r.signed_bias, r.abs_bias, r.bound) for r in self.records]


def exact_bias(F, n, k, population, mode="stationary", schedule=None):
    """Bias trajectory of the iterates against an analytic population.

    Signed bias at step j is evaluate(S g_j - f, population); the bound
    column is mu_inf * f_one * ||Id-S||_1^(j+1) for the stationary mode and
    the running product of scheduled factor norms otherwise.  The population
    table must cover every block the terms of F can merge into.
    """
    if not isinstance(population, MomentTable):
        raise TypeError("population must be a MomentTable")
    if mode not in ("stationary", "schedule"):
        raise ValueError(f"unknown mode {mode!r}")
    m = F.max_order()
    mu_inf = max(
        (abs(population.moment(b)) for b in reachable_blocks(F)), default=0
    )
    f_one = sum(abs(c) for c in F.terms.values())
    target = evaluate(F, population)

    if mode == "schedule":
        if schedule is None:
            schedule = StepSchedule.default(n, k)
        etas = list(schedule)
    else:
        etas = [None] * k

    S = sampling_matrix(m, n) if m >= 1 else None
    base_norm = one_norm_id_minus_S(m, n) if m >= 1 else Fraction(0)

    records = []
    g = F
    bound = mu_inf * f_one * base_norm
    for j in range(len(etas) + 1):
        signed = evaluate(apply_S(g, n), population) - target
        records.append(
            BiasRecord(
                k=j, estimator=g, signed_bias=signed, abs_bias=abs(signed),
                bound=float(bound),
            )
        )
        if j == len(etas):
            break
        if mode == "schedule":
            eta = etas[j]
            g = g + eta * (F - apply_S(g, n))
            factor = one_norm_id_minus_scaled(S, eta) if S else Fraction(0)
        else:
            g = g + (F - apply_S(g, n))
            factor = base_norm
        bound = bound * factor
    return BiasReport(n=n, mode=mode, target=target, records=tuple(records))


# -- bound calculators --------------------------------------------------------------

def bias_bound(m, n, k, mu_inf, f_one):
    """mu_inf * f_one * (2(1 - falling(N,m)/N^m))^(k+1)."""
    if m < 1 or n < 1 or k < 0:
        raise ValueError("need m, N >= 1 and k >= 0")
    return mu_inf * f_one * one_norm_id_minus_S(m, n) ** (k + 1)


def _check_gammas(gammas):
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("gamma sequence is empty")
    if any(g < 0 for g in gammas):
        raise ValueError("gamma sequence must be nonnegative")
    if any(a < b for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma sequence must be nonincreasing")
    return gammas


def _cut_index(n):
    return math.ceil(math.sqrt(n / 8))


def _safe_exp(x):
    # a bound beyond double range carries no information; saturate instead of raising
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def general_bound(gammas, n):
    """(k_star, bound) from a tail-mass sequence gamma_0 >= gamma_1 >= ...

    k_star = floor(log2(gamma_0/gamma_cut)/2) and bound =
    sqrt(16 * gamma_0 * gamma_cut), where cut = ceil(sqrt(N/8)).
    """
    gammas = _check_gammas(gammas)
    cut = _cut_index(n)
    if cut >= len(gammas):
        raise ValueError(
            f"gamma sequence of length {len(gammas)} has no index {cut} = ceil(sqrt(N/8))"
        )
    g0, gc = gammas[0], gammas[cut]
    if gc == 0 or g0 == 0:
        return math.inf if gc == 0 and g0 > 0 else 0, 0.0
    k_star = math.floor(0.5 * (math.log2(g0) - math.log2(gc)))
    bound = 4.0 * math.exp(0.5 * (math.log(g0) + math.log(gc)))
    return k_star, bound


def general_bound_at(gammas, n, k):
    """Two-term tradeoff gamma_0/2^(k+1) + 2^(k+1)*gamma_cut at a given k."""
    gammas = _check_gammas(gammas)
    cut = _cut_index(n)
    if cut >= len(gammas):
        raise ValueError(
            f"gamma sequence of length {len(gammas)} has no index {cut} = ceil(sqrt(N/8))"
        )
    return gammas[0] / 2 ** (k + 1) + 2 ** (k + 1) * gammas[cut]


def bandlimited_bound(d, theta, n):
    """(k, bound) for a bandlimited function of a sub-Gaussian mean.

    Requires N >= 8(8 d theta + 1)^2 so the high-order tail contracts.
    All products are assembled from logs; (4 d theta)^(4 d theta) alone
    overflows doubles near d*theta ~ 40.
    """
    if d < 1 or theta <= 0:
        raise ValueError("need d >= 1 and theta > 0")
    if n < 8 * (8 * d * theta + 1) ** 2:
        raise ValueError(
            f"N={n} below the required 8*(8*d*theta+1)^2 = {8 * (8 * d * theta + 1) ** 2:.6g}"
        )
    x = 4 * d * theta
    t = math.log(8 * d * theta) + x * math.log(x)
    log_head = t + math.log1p(math.exp(-t)) if t > 0 else math.log1p(math.exp(t))
    root = math.sqrt(n / 8)
    log_ratio = math.log(x) - math.log(root)
    k = math.floor(0.5 * (log_head - root * log_ratio))
    log_bound = math.log(4) + log_head + math.sqrt(n / 32) * log_ratio
    return k, _safe_exp(log_bound)


def neumann_trace_bound(sigma, n):
    """(k, bound) for the trace of an inverted random-matrix mean.

    k = floor(-sqrt(N/8) * log(sigma)); bound = 4 sigma^sqrt(N/32)/(1-sigma).
    """
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0,1), got {sigma}")
    if n < 1:
        raise ValueError("N must be positive")
    k = math.floor(-math.sqrt(n / 8) * math.log(sigma))
    # sigma^sqrt(N/32) <= 1 and 4/(1-sigma) stays within double range, so the
    # direct product is safe and exact at round powers where exp(log .) is not
    bound = 4 / (1 - sigma) * sigma ** math.sqrt(n / 32)
    return k, bound
