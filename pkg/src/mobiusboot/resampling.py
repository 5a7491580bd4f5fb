"""The resampling expectation operator on moment-polynomial coefficients.

One round of drawing N rows with replacement sends the coefficient at a
partition to its coarsenings: duplicate row indices merge blocks.  The matrix
S over LatticeIndex order has entry(pi, sigma) = falling(N,#pi)/N^{#sigma} for
sigma <= pi and 0 otherwise.  Every column sums to exactly 1 (the weights
enumerate all index draws), and every row at a partition with more than N
blocks is zero, since no N-sample respects that many distinct blocks.

S factors through the order incidence as S = R.zeta.C^{-1} with
R = diag(falling(N,#pi)) and C = diag(N^{#pi}), which is what makes one
resampling round a Moebius-inversion step in disguise.
"""

import math
from fractions import Fraction

from .lattice import (
    DEFAULT_CAP,
    DimensionError,
    LatticeIndex,
    _rgs_strings,
    coarsenings,
    enumerate_partitions,
    falling_factorial,
    stirling2,
    zeta_matrix,
)
from .moments import MomentPolynomial


class SamplingMatrix:
    """Exact Bell(m) x Bell(m) matrix of the resampling operator."""

    def __init__(self, m, n, index, entries):
        self.m = m
        self.n = n
        self.index = index
        self.entries = entries

    def entry(self, pi, sigma):
        return self.entries[self.index.position(pi)][self.index.position(sigma)]

    def matvec(self, vec):
        n = len(self.index)
        vec = list(vec)
        if len(vec) != n:
            raise DimensionError(f"vector of length {len(vec)} against Bell({self.m}) = {n}")
        return [
            sum(row[j] * vec[j] for j in range(n) if row[j]) for row in self.entries
        ]

    def __repr__(self):
        return f"SamplingMatrix(m={self.m}, N={self.n})"


def sampling_matrix(m, n, cap=DEFAULT_CAP):
    """Build S for order m and sample size n."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    index = LatticeIndex(m, enumerate_partitions(m, cap))
    size = len(index)
    entries = [[Fraction(0)] * size for _ in range(size)]
    for j, sigma in enumerate(index):
        denom = n ** sigma.block_count
        for pi in coarsenings(sigma):
            entries[index.position(pi)][j] = Fraction(
                falling_factorial(n, pi.block_count), denom
            )
    return SamplingMatrix(m, n, index, entries)


def factorization(m, n, cap=DEFAULT_CAP):
    """Diagonal factors (R, C, check) with S = R.zeta.C^{-1}.

    R carries falling(N,#pi) on the zeta's row side, C carries N^{#pi} on the
    column side; the diagonals do not commute past zeta, so the orientation
    matters.  check is the exact entrywise comparison and must always be True.
    """
    S = sampling_matrix(m, n, cap)
    zeta = zeta_matrix(m, cap)
    R = [Fraction(falling_factorial(n, pi.block_count)) for pi in S.index]
    C = [Fraction(n ** pi.block_count) for pi in S.index]
    size = len(S.index)
    check = all(
        S.entries[i][j] == R[i] * zeta.entries[i][j] / C[j]
        for i in range(size)
        for j in range(size)
    )
    return R, C, check


def apply_S(F, n):
    """One resampling round on a polynomial, term by term.

    Each term's coefficient spreads over the merges of its blocks with weight
    falling(N,#merged)/N^{#blocks}; labels ride along.  Never materializes the
    full lattice over positions, so it scales with the support of F.
    """
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    out = {}
    for term, coeff in F.terms.items():
        k = term.block_count
        denom = n**k
        for grouping in _rgs_strings(k):
            merged = term.merge(grouping)
            w = Fraction(falling_factorial(n, merged.block_count), denom)
            if not w:
                continue
            out[merged] = out.get(merged, 0) + coeff * w
    return MomentPolynomial(F.d, out, exact=F.exact)


class ReducedMatrix:
    """m x m level-sum compression of S, indexed by block counts 1..m."""

    def __init__(self, m, n, entries):
        self.m = m
        self.n = n
        self.entries = entries

    def entry(self, i, j):
        if not (1 <= i <= self.m and 1 <= j <= self.m):
            raise DimensionError(f"levels run 1..{self.m}, got ({i}, {j})")
        return self.entries[i - 1][j - 1]

    def matvec(self, vec):
        vec = list(vec)
        if len(vec) != self.m:
            raise DimensionError(f"level vector of length {len(vec)}, expected {self.m}")
        return [
            sum(row[j] * vec[j] for j in range(self.m) if row[j])
            for row in self.entries
        ]

    def __repr__(self):
        return f"ReducedMatrix(m={self.m}, N={self.n})"


def reduced_matrix(m, n):
    """entry(i,j) = stirling2(j,i) * falling(N,i) / N^j for i <= j, else 0.

    A partition with j blocks has stirling2(j,i) coarsenings with i blocks,
    all receiving the same weight, which is why S acts on level sums.
    """
    if m < 1 or n < 1:
        raise ValueError("m and N must be positive")
    entries = [
        [
            Fraction(stirling2(j, i) * falling_factorial(n, i), n**j) if i <= j else Fraction(0)
            for j in range(1, m + 1)
        ]
        for i in range(1, m + 1)
    ]
    return ReducedMatrix(m, n, entries)


def level_sums(vec, index):
    """Sum coefficient-vector entries by block count; levels 1..m."""
    vec = list(vec)
    if len(vec) != len(index):
        raise DimensionError(f"vector of length {len(vec)} against Bell({index.m})")
    out = [0] * index.m
    for v, pi in zip(vec, index):
        out[pi.block_count - 1] += v
    return out


def poly_level_sums(F, m):
    """Level sums of a polynomial's coefficients by block count."""
    out = [0] * m
    for term, coeff in F.terms.items():
        if not 1 <= term.block_count <= m:
            raise DimensionError(f"term with {term.block_count} blocks outside levels 1..{m}")
        out[term.block_count - 1] += coeff
    return out


# -- norms and convergence ratios ----------------------------------------------

def one_norm_id_minus_S(m, n, exact=True):
    """Closed form for the operator 1-norm of Id - S.

    2(1 - falling(N,m)/N^m) for m <= N, and exactly 2 otherwise: the worst
    column is the finest partition's, whose diagonal weight is smallest.
    With exact=False the product is evaluated as a sum of logs, usable for m
    far beyond the lattice cap.
    """
    if m < 1 or n < 1:
        raise ValueError("m and N must be positive")
    if exact:
        return 2 * (1 - gamma_ratio(m, n))
    if m > n:
        return 2.0
    return -2.0 * math.expm1(log_gamma_ratio(m, n))


def one_norm_direct(m, n, cap=DEFAULT_CAP):
    """Max column 1-norm of Id - S from the explicit matrix."""
    S = sampling_matrix(m, n, cap)
    size = len(S.index)
    best = Fraction(0)
    for j in range(size):
        total = sum(abs((1 if i == j else 0) - S.entries[i][j]) for i in range(size))
        best = max(best, total)
    return best


def one_norm_id_minus_scaled(S, eta):
    """Max column 1-norm of Id - eta*S for a built sampling matrix."""
    size = len(S.index)
    best = 0
    for j in range(size):
        total = sum(abs((1 if i == j else 0) - eta * S.entries[i][j]) for i in range(size))
        best = max(best, total)
    return best


def gamma_ratio(m, n):
    """falling(N,m)/N^m as an exact Fraction; 0 when m > N."""
    if m < 1 or n < 1:
        raise ValueError("m and N must be positive")
    return Fraction(falling_factorial(n, m), n**m)


def log_gamma_ratio(m, n):
    """log(falling(N,m)/N^m) as a float; -inf when m > N."""
    if m > n:
        return -math.inf
    return sum(math.log1p(-i / n) for i in range(m))


def linear_regime_check(m, alpha):
    """Whether N = max(ceil(alpha*m^2), m+1) keeps the per-step contraction.

    True iff falling(N,m)/N^m >= exp(-1/4)*exp(-1/alpha) at that N, the
    regime where each iteration at least halves the bias norm.
    """
    if m < 1 or alpha <= 0:
        raise ValueError("m positive and alpha > 0 required")
    n = max(math.ceil(alpha * m * m), m + 1)
    return log_gamma_ratio(m, n) >= -0.25 - 1.0 / alpha
