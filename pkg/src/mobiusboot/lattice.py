"""Set partition lattice: enumeration, refinement order, zeta/Mobius matrices.

Partitions of {0..m-1} are stored as restricted growth strings (RGS): position
i carries the index of its block, blocks numbered by first appearance.  The
lattice is ordered by refinement (sigma <= pi iff every block of sigma lies
inside a block of pi) and linearised finest-first so that every matrix moving
mass from finer to coarser partitions comes out lower triangular.

All combinatorics (Bell, Stirling, falling factorials) are exact integers.
"""

from functools import lru_cache
from math import perm

DEFAULT_CAP = 10  # Bell(10) = 115975 dense lattice elements


class CapExceededError(ValueError):
    """Requested lattice size is outside the configured dense cap."""


class DimensionError(ValueError):
    """Objects over different ground sets were mixed."""


# -- exact combinatorics ------------------------------------------------------

@lru_cache(maxsize=None)
def bell(m):
    """Number of set partitions of an m-element set."""
    if m < 0:
        raise ValueError(f"bell() needs m >= 0, got {m}")
    if m == 0:
        return 1
    # Bell triangle
    row = [1]
    for _ in range(m - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


@lru_cache(maxsize=None)
def stirling2(n, k):
    """Number of set partitions of an n-element set into exactly k blocks."""
    if n < 0 or k < 0:
        raise ValueError(f"stirling2() needs nonnegative arguments, got ({n}, {k})")
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def falling_factorial(N, k):
    """N (N-1) ... (N-k+1); zero when k > N."""
    return perm(N, k)


# -- partitions ---------------------------------------------------------------

class Partition:
    """A set partition of {0..m-1} in canonical RGS form.

    Hashable and immutable; two partitions are equal iff their restricted
    growth strings are equal.
    """

    __slots__ = ("rgs",)

    def __init__(self, rgs):
        rgs = tuple(rgs)
        if not rgs:
            raise ValueError("Partition needs at least one position")
        seen = 0
        for v in rgs:
            if not 0 <= v <= seen:
                raise ValueError(f"not a restricted growth string: {rgs}")
            if v == seen:
                seen += 1
        object.__setattr__(self, "rgs", rgs)

    def __setattr__(self, name, value):
        raise AttributeError("Partition is immutable")

    @classmethod
    def from_blocks(cls, blocks, m=None):
        """Build from an iterable of disjoint position blocks covering {0..m-1}."""
        blocks = [sorted(b) for b in blocks]
        positions = sorted(p for b in blocks for p in b)
        if m is None:
            m = len(positions)
        if positions != list(range(m)):
            raise ValueError(f"blocks {blocks} do not partition range({m})")
        rgs = [0] * m
        for label, block in enumerate(sorted(blocks)):  # sort by least element
            for p in block:
                rgs[p] = label
        return cls(rgs)

    @classmethod
    def finest(cls, m):
        return cls(range(m))

    @classmethod
    def coarsest(cls, m):
        return cls([0] * m)

    @property
    def m(self):
        return len(self.rgs)

    @property
    def block_count(self):
        return max(self.rgs) + 1

    @property
    def blocks(self):
        """Blocks as tuples of positions, ordered by least element."""
        out = [[] for _ in range(self.block_count)]
        for pos, label in enumerate(self.rgs):
            out[label].append(pos)
        return tuple(tuple(b) for b in out)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.rgs == other.rgs

    def __hash__(self):
        return hash(self.rgs)

    def __repr__(self):
        return f"Partition({format_partition(self)!r})"


def format_partition(pi):
    """Render as 1-based blocks joined by '|', e.g. '13|2|4'."""
    return "|".join("".join(str(p + 1) for p in b) for b in pi.blocks)


def parse_partition(text, m=None):
    """Parse the '13|2|4' block format back into a Partition.

    Elements are single digits except '10', whose digits cannot clash with
    anything else because elements are 1-based; that covers the default cap.
    """
    blocks = []
    for part in text.split("|"):
        if not part:
            raise ValueError(f"empty block in partition text {text!r}")
        block = []
        i = 0
        while i < len(part):
            ch = part[i]
            if not ch.isdigit():
                raise ValueError(f"bad character {ch!r} in partition text {text!r}")
            if ch == "1" and i + 1 < len(part) and part[i + 1] == "0":
                block.append(9)
                i += 2
            elif ch == "0":
                raise ValueError(f"elements are 1-based in {text!r}")
            else:
                block.append(int(ch) - 1)
                i += 1
        blocks.append(block)
    return Partition.from_blocks(blocks, m=m)


def refines(sigma, pi):
    """True iff every block of sigma is contained in some block of pi."""
    if sigma.m != pi.m:
        raise DimensionError(f"partition sizes differ: {sigma.m} vs {pi.m}")
    block_image = [-1] * sigma.block_count
    for pos in range(sigma.m):
        s, p = sigma.rgs[pos], pi.rgs[pos]
        if block_image[s] == -1:
            block_image[s] = p
        elif block_image[s] != p:
            return False
    return True


def _rgs_strings(m):
    """All restricted growth strings of length m, lexicographic."""
    out = []
    rgs = [0] * m

    def grow(i, width):
        if i == m:
            out.append(tuple(rgs))
            return
        for v in range(width + 1):
            rgs[i] = v
            grow(i + 1, width + (v == width))

    grow(0, 0)
    return out


class LatticeIndex:
    """Linear order on all of Pi(m): decreasing block count, then lex on RGS.

    The finest partition comes first and the coarsest last, making the zeta
    and sampling matrices lower triangular.
    """

    def __init__(self, m, partitions):
        self.m = m
        self.partitions = tuple(partitions)
        self._position = {p: i for i, p in enumerate(self.partitions)}

    def __len__(self):
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def __getitem__(self, i):
        return self.partitions[i]

    def position(self, pi):
        try:
            return self._position[pi]
        except KeyError:
            raise DimensionError(f"{pi!r} is not an element of Pi({self.m})") from None


def _check_cap(m, cap):
    if m < 1 or m > cap:
        raise CapExceededError(
            f"m={m} outside supported range 1..{cap} "
            f"(Bell({m}) = {bell(max(m, 0))} partitions)"
        )


@lru_cache(maxsize=None)
def _enumerate_cached(m):
    parts = [Partition(r) for r in _rgs_strings(m)]
    parts.sort(key=lambda p: (-p.block_count, p.rgs))
    return LatticeIndex(m, parts)


def enumerate_partitions(m, cap=DEFAULT_CAP):
    """All Bell(m) partitions of {0..m-1} in canonical order."""
    _check_cap(m, cap)
    return _enumerate_cached(m)


def coarsenings(pi):
    """All partitions pi_tilde with pi <= pi_tilde, pi included.

    Produced by merging blocks of pi along every set partition of its block
    set; the count is Bell(#pi).
    """
    k = pi.block_count
    out = []
    for grouping in _rgs_strings(k):
        merged = [0] * pi.m
        relabel = {}
        for pos in range(pi.m):
            g = grouping[pi.rgs[pos]]
            if g not in relabel:
                relabel[g] = len(relabel)
            merged[pos] = relabel[g]
        out.append(Partition(merged))
    return out


def cover_edges(index):
    """Hasse diagram edges (finer, coarser) of the refinement order.

    pi is covered by exactly the partitions obtained by merging two of its
    blocks.
    """
    edges = []
    for pi in index:
        k = pi.block_count
        for a in range(k):
            for b in range(a + 1, k):
                merged = [0] * pi.m
                relabel = {}
                for pos in range(pi.m):
                    lab = pi.rgs[pos]
                    if lab == b:
                        lab = a
                    if lab not in relabel:
                        relabel[lab] = len(relabel)
                    merged[pos] = relabel[lab]
                edges.append((pi, Partition(merged)))
    return edges


# -- incidence matrices -------------------------------------------------------

class IncidenceMatrix:
    """Dense Bell(m) x Bell(m) integer matrix over a LatticeIndex."""

    def __init__(self, index, entries, kind):
        self.index = index
        self.entries = entries
        self.kind = kind

    @property
    def m(self):
        return self.index.m

    def entry(self, sigma, pi):
        return self.entries[self.index.position(sigma)][self.index.position(pi)]


def zeta_matrix(m, cap=DEFAULT_CAP):
    """0/1 incidence matrix of refinement: entry(sigma, pi) = 1 iff pi <= sigma.

    Under the finest-first order this is lower triangular with unit diagonal;
    the coarsest partition's row is all ones.
    """
    index = enumerate_partitions(m, cap)
    n = len(index)
    entries = [[0] * n for _ in range(n)]
    for col, pi in enumerate(index):
        for coarse in coarsenings(pi):
            entries[index.position(coarse)][col] = 1
    return IncidenceMatrix(index, entries, "zeta")


def mobius_matrix(m, cap=DEFAULT_CAP):
    """Exact integer inverse of the zeta matrix, by forward substitution."""
    zeta = zeta_matrix(m, cap)
    n = len(zeta.index)
    z = zeta.entries
    inv = [[0] * n for _ in range(n)]
    for j in range(n):
        inv[j][j] = 1
        for i in range(j + 1, n):
            acc = 0
            for k in range(j, i):
                if z[i][k]:
                    acc += inv[k][j]
            inv[i][j] = -acc
    return IncidenceMatrix(zeta.index, inv, "mobius")
