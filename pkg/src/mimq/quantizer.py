"""Conditional pmfs, mutual information, the sign-major order and the optimal
sequential deterministic quantizer (SDQ), plus BPSK-AWGN channel discretization.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.special import ndtr, ndtri

PMF_TOL = 1e-12
TIE_TOL = 1e-13


class AlphabetTooSmallError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """P(symbol | X=0) and P(symbol | X=1) over an ordered finite alphabet.

    Index 0 is the symbol most in favour of ``X=0`` when the alphabet is in its
    canonical order.
    """

    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        p0 = np.ascontiguousarray(self.p0, dtype=np.float64)
        p1 = np.ascontiguousarray(self.p1, dtype=np.float64)
        if p0.ndim != 1 or p0.shape != p1.shape:
            raise ValueError("p0 and p1 must be 1-D arrays of equal length")
        if p0.size == 0:
            raise ValueError("empty pmf")
        if (p0 < 0).any() or (p1 < 0).any():
            raise ValueError("negative probability")
        if abs(p0.sum() - 1.0) > 1e-9 or abs(p1.sum() - 1.0) > 1e-9:
            raise ValueError(f"pmf does not sum to 1 (sums {p0.sum()!r}, {p1.sum()!r})")
        p0.setflags(write=False)
        p1.setflags(write=False)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @property
    def size(self) -> int:
        return self.p0.size

    def mi(self, prior: float = 0.5) -> float:
        return mutual_information(self, prior)

    def mirrored(self) -> "ConditionalPmf":
        """The pmf seen under a bit flip: index k of X=0 becomes index size-1-k of X=1."""
        return ConditionalPmf(self.p1[::-1].copy(), self.p0[::-1].copy())

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.p0 - self.p1[::-1])) <= tol)

    def __eq__(self, other):
        if not isinstance(other, ConditionalPmf):
            return NotImplemented
        return np.array_equal(self.p0, other.p0) and np.array_equal(self.p1, other.p1)

    __hash__ = None

    def normalized(self) -> "ConditionalPmf":
        """Rescale each conditional to sum to one, removing accumulated rounding drift."""
        return ConditionalPmf(self.p0 / self.p0.sum(), self.p1 / self.p1.sum())

    @staticmethod
    def average(pmfs: Sequence["ConditionalPmf"]) -> "ConditionalPmf":
        p0 = np.mean([p.p0 for p in pmfs], axis=0)
        p1 = np.mean([p.p1 for p in pmfs], axis=0)
        return ConditionalPmf(p0, p1)


def sgn(x) -> int:
    """Sign with ``sgn(0) = +1``."""
    return -1 if x < 0 else 1


def sgn_array(x) -> np.ndarray:
    return np.where(np.asarray(x) < 0, -1, 1)


def succ_compare(a: int, b: int) -> int:
    """Sign-major comparison: ``1`` if a ≻ b, ``0`` if equal, ``-1`` if b ≻ a.

    a ≻ b when a is non-negative and b negative, or when both share a sign and a < b.
    For CN inner messages this is descending LLR order: small positive
    magnitudes are the most reliable zeros.
    """
    sa, sb = sgn(a), sgn(b)
    if sa != sb:
        return 1 if sa > sb else -1
    if a == b:
        return 0
    return 1 if a < b else -1


def succ_key(values, max_mag: int) -> np.ndarray:
    """Integer key that sorts ascending in ≻-descending order for |values| ≤ max_mag."""
    v = np.asarray(values, dtype=np.int64)
    return np.where(v >= 0, v, 2 * max_mag + 1 + v)


@dataclass(frozen=True, eq=False)
class SignedAlphabet:
    """Distinct signed integers in strictly ≻-decreasing order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        if v.size > 1:
            key = succ_key(v, int(np.abs(v).max()))
            if not (np.diff(key) > 0).all():
                raise ValueError("alphabet is not strictly ≻-decreasing")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class ThresholdSet:
    """Quantizer boundaries ``γ_1, γ_2, ...``; each is the last member of its group.

    With ``ordering='plain'`` a value x maps to the number of thresholds strictly
    greater than x, so x ≥ γ_1 gives index 0. With ``ordering='sign-major'`` the
    same rule is applied under ≻. ``ordering='index'`` holds ascending positions
    into an alphabet that has no values attached.
    """

    gammas: np.ndarray
    ordering: str = "plain"

    def __post_init__(self):
        if self.ordering not in ("plain", "sign-major", "index"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        g = np.asarray(self.gammas)
        if g.ndim != 1:
            raise ValueError("thresholds must be 1-D")
        if g.size > 1:
            if self.ordering == "plain":
                ok = (np.diff(g) < 0).all()
            elif self.ordering == "index":
                ok = (np.diff(g) > 0).all()
            else:
                ok = (np.diff(succ_key(g, int(np.abs(g).max()))) > 0).all()
            if not ok:
                raise ValueError("thresholds not strictly decreasing under their ordering")
        object.__setattr__(self, "gammas", g)

    def __len__(self):
        return self.gammas.size

    def index(self, x, max_mag: int | None = None) -> np.ndarray:
        x = np.asarray(x)
        if self.ordering == "plain":
            # count of gammas > x; gammas descending
            return self.gammas.size - np.searchsorted(self.gammas[::-1], x, side="right")
        if self.ordering == "index":
            return np.searchsorted(self.gammas, x, side="left")
        if max_mag is None:
            max_mag = int(max(np.abs(self.gammas).max(initial=0), np.abs(x).max(initial=0)))
        keys = succ_key(self.gammas, max_mag)
        return np.searchsorted(keys, succ_key(x, max_mag), side="left")

    def tolist(self):
        return self.gammas.tolist()

    def __eq__(self, other):
        if not isinstance(other, ThresholdSet):
            return NotImplemented
        return self.ordering == other.ordering and np.array_equal(self.gammas, other.gammas)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dmc:
    """Quantized BPSK-AWGN channel: output pmf, LLR thresholds and design σ."""

    pmf: ConditionalPmf
    llr_thresholds: np.ndarray
    sigma: float

    def __post_init__(self):
        t = np.asarray(self.llr_thresholds, dtype=np.float64)
        if t.size != self.pmf.size - 1:
            raise ValueError("need size-1 thresholds")
        if t.size > 1 and not (np.diff(t) < 0).all():
            raise ValueError("llr_thresholds not strictly decreasing")
        object.__setattr__(self, "llr_thresholds", t)

    @property
    def q_m(self) -> int:
        return int(self.pmf.size).bit_length() - 1


# --------------------------------------------------------------- information


def mutual_information(pmf: ConditionalPmf, prior: float = 0.5) -> float:
    """I(X; Z) in bits for a binary input with P(X=0) = prior."""
    if not 0.0 <= prior <= 1.0:
        raise ValueError("prior must lie in [0, 1]")
    p0, p1 = pmf.p0, pmf.p1
    pz = np.maximum(prior * p0 + (1.0 - prior) * p1, 1e-300)
    t0 = np.where(p0 > 0, prior * p0 * np.log2(np.maximum(p0, 1e-300) / pz), 0.0)
    t1 = np.where(p1 > 0, (1.0 - prior) * p1 * np.log2(np.maximum(p1, 1e-300) / pz), 0.0)
    return float(max(t0.sum() + t1.sum(), 0.0))


# ------------------------------------------------------------------- SDQ (DP)


@numba.njit(cache=True, inline="always")
def _group_cost(a, b, pa, pb):
    # contribution of one output symbol with masses a = P(z|0), b = P(z|1)
    m = pa * a + pb * b
    out = 0.0
    if a > 0.0:
        out += pa * a * np.log2(a / max(m, 1e-300))
    if b > 0.0:
        out += pb * b * np.log2(b / max(m, 1e-300))
    return out


@numba.njit(cache=True)
def _cost_rows(c0, c1, pa, pb):
    """Packed upper-triangular group costs: row i holds cost(i..e) for e = i..n-1."""
    n = c0.size - 1
    off = np.empty(n + 1, dtype=np.int64)
    off[0] = 0
    for i in range(n):
        off[i + 1] = off[i] + (n - i)
    cost = np.empty(off[n])
    for i in range(n):
        base = off[i] - i
        for e in range(i, n):
            cost[base + e] = _group_cost(c0[e + 1] - c0[i], c1[e + 1] - c1[i], pa, pb)
    return cost, off


@numba.njit(cache=True, fastmath={"nnan", "ninf", "reassoc"})
def _sdq_dp(cost, off, n, k, tol):
    """Suffix DP over packed group costs into ``k`` contiguous groups.

    Returns the lexicographically smallest vector of group end indices among
    partitions within ``tol`` of the maximum.
    """
    neg = -1e300
    # best[i, g]: best value for splitting suffix [i, n) into g groups; infeasible
    # entries stay at -1e300 and can never win
    best = np.full((n + 1, k + 1), neg)
    best[n, 0] = 0.0
    v = np.empty(k + 1)
    for i in range(n - 1, -1, -1):
        base = off[i] - i
        v[:] = neg
        for e in range(i, n):
            c = cost[base + e]
            nxt = best[e + 1]
            for g in range(1, k + 1):
                cand = c + nxt[g - 1]
                if cand > v[g]:
                    v[g] = cand
        best[i, 1:] = v[1:]
    ends = np.empty(k, dtype=np.int64)
    start = 0
    for g in range(k, 1, -1):
        target = best[start, g] - tol
        base = off[start] - start
        chosen = n - g
        for e in range(start, n - g + 1):
            if cost[base + e] + best[e + 1, g - 1] >= target:
                chosen = e
                break
        ends[k - g] = chosen
        start = chosen + 1
    ends[k - 1] = n - 1
    return ends, best[0, k]


@numba.njit(cache=True)
def _sdq_two(c0, c1, pa, pb, tol):
    n = c0.size - 1
    tot0, tot1 = c0[n], c1[n]
    vals = np.empty(n - 1)
    for e in range(n - 1):
        a, b = c0[e + 1], c1[e + 1]
        vals[e] = _group_cost(a, b, pa, pb) + _group_cost(tot0 - a, tot1 - b, pa, pb)
    v = vals.max()
    for e in range(n - 1):
        if vals[e] >= v - tol:
            return e, v
    return n - 2, v


def sdq_partition(p0: np.ndarray, p1: np.ndarray, k: int, prior: float = 0.5, tol: float = TIE_TOL):
    """Group end indices (into ``p0``) of the optimal k-group contiguous partition.

    Zero-mass symbols are ignored by the search and end up in the following
    group. Returns ``(ends, value)``.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    keep = np.flatnonzero((p0 + p1) > 0)
    if keep.size < k:
        raise AlphabetTooSmallError(
            f"alphabet too small: {keep.size} symbols with mass for {k} groups")
    c0 = np.concatenate(([0.0], np.cumsum(p0[keep])))
    c1 = np.concatenate(([0.0], np.cumsum(p1[keep])))
    if k == 1:
        ends_c = np.array([keep.size - 1])
        value = _group_cost(c0[-1], c1[-1], prior, 1.0 - prior)
    elif k == 2:
        e, value = _sdq_two(c0, c1, prior, 1.0 - prior, tol)
        ends_c = np.array([e, keep.size - 1])
    else:
        cost, off = _cost_rows(c0, c1, prior, 1.0 - prior)
        ends_c, value = _sdq_dp(cost, off, keep.size, k, tol)
    ends = keep[ends_c]
    ends[-1] = p0.size - 1
    return ends, float(value)


def group_pmf(pmf: ConditionalPmf, ends: np.ndarray) -> ConditionalPmf:
    """Sum a pmf over contiguous groups whose last indices are ``ends``."""
    starts = np.concatenate(([0], np.asarray(ends[:-1]) + 1))
    return ConditionalPmf(np.add.reduceat(pmf.p0, starts), np.add.reduceat(pmf.p1, starts))


@dataclass(frozen=True)
class SdqResult:
    thresholds: ThresholdSet
    pmf: ConditionalPmf
    mi: float
    ends: np.ndarray


def optimal_sdq(pmf: ConditionalPmf, out_bits: int, values=None, ordering: str = "plain",
                prior: float = 0.5) -> SdqResult:
    """MI-maximizing partition of an ordered alphabet into ``2**out_bits`` groups.

    Parameters
    ----------
    pmf : ConditionalPmf
        Input pmf, already in canonical (descending LLR or ≻) order.
    out_bits : int
        Output resolution q_m.
    values : array_like, optional
        Alphabet values; the thresholds are the values of each group's last
        member. Without values the thresholds are the positions themselves
        (ordering ``'index'``).
    ordering : {'plain', 'sign-major'}
        Ordering tag attached to the returned thresholds.

    Returns
    -------
    SdqResult
        Threshold set, group-summed pmf, achieved MI and group end indices.
    """
    k = 1 << out_bits
    if pmf.size < k:
        raise AlphabetTooSmallError(f"alphabet too small: {pmf.size} < {k}")
    ends, _ = sdq_partition(pmf.p0, pmf.p1, k, prior)
    if values is None:
        values = np.arange(pmf.size)
        ordering = "index"
    values = np.asarray(values)
    # the last member with mass of each group
    mass = (pmf.p0 + pmf.p1) > 0
    gam = []
    start = 0
    for e in ends[:-1]:
        idx = np.flatnonzero(mass[start:e + 1])
        gam.append(values[start + idx[-1]] if idx.size else values[e])
        start = e + 1
    qpmf = group_pmf(pmf, ends)
    return SdqResult(ThresholdSet(np.asarray(gam), ordering), qpmf, mutual_information(qpmf, prior), ends)


def brute_force_sdq(pmf: ConditionalPmf, out_bits: int, prior: float = 0.5) -> float:
    """Exhaustive search over all contiguous partitions; returns the best MI."""
    from itertools import combinations

    k = 1 << out_bits
    n = pmf.size
    best = -1.0
    for cuts in combinations(range(n - 1), k - 1):
        ends = np.array(list(cuts) + [n - 1])
        best = max(best, mutual_information(group_pmf(pmf, ends), prior))
    return best


# ----------------------------------------------------------- AWGN discretization


def awgn_grid(sigma: float, bins: int = 2000, tail: float = 1e-12):
    """Symmetric fine discretization of the BPSK-AWGN output.

    Edges are the ``bins`` equal-mass quantiles of N(+1, σ²), their mirror
    images and 0; the outer bins absorb the tails beyond the point where the
    N(+1, σ²) tail mass drops below ``tail``. Bins are listed by descending y.

    Returns ``(edges, pmf)`` with ``edges`` descending (the bin boundaries).
    """
    y = 1.0 + sigma * ndtri(np.arange(1, bins) / bins)
    lim = 1.0 + sigma * ndtri(1.0 - tail)
    half = np.abs(y)
    half = np.unique(np.concatenate((half[(half > 0) & (half < lim)], [lim])))
    edges = np.concatenate((half[::-1], [0.0], -half))
    # mass of N(+1, σ²) in each descending bin, via survival functions for accuracy
    upper = np.concatenate(([np.inf], edges))
    lower = np.concatenate((edges, [-np.inf]))
    p0 = _gauss_mass(lower, upper, 1.0, sigma)
    p0 = p0 / p0.sum()
    p1 = p0[::-1].copy()
    return edges, ConditionalPmf(p0, p1)


def _gauss_mass(lo, hi, mu, sigma):
    zl = (lo - mu) / sigma
    zh = (hi - mu) / sigma
    # upper-tail differences are accurate where both ends are above the mean
    up = ndtr(-zl) - ndtr(-zh)
    dn = ndtr(zh) - ndtr(zl)
    return np.where(zl > 0, up, dn)


def quantize_awgn_channel(sigma: float, q_m: int, bins: int = 2000) -> Dmc:
    """Optimal ``q_m``-bit quantizer of the BPSK-AWGN channel at noise std ``sigma``.

    The grid is symmetric about y = 0, so every partition has a mirror image
    with equal MI. The search is restricted to partitions symmetric about 0:
    the positive half is split into ``2**(q_m-1)`` groups and mirrored, which
    pins the middle threshold to exactly 0 and makes the output pmf symmetric.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not 1 <= q_m <= 8:
        raise ValueError("q_m must be in 1..8")
    edges, fine = awgn_grid(sigma, bins)
    nhalf = fine.size // 2
    half_ends, _ = sdq_partition(fine.p0[:nhalf], fine.p1[:nhalf], 1 << (q_m - 1))
    ends = np.concatenate((half_ends, fine.size - 2 - half_ends[-2::-1], [fine.size - 1]))
    # boundary between groups k and k+1 is the lower edge of bin ends[k]
    y_thr = edges[ends[:-1]]
    pmf = group_pmf(fine, ends)
    return Dmc(pmf, 2.0 * y_thr / sigma**2, float(sigma))


def dmc_from_thresholds(llr_thresholds, sigma: float) -> Dmc:
    """BPSK-AWGN channel quantized at given (strictly decreasing) LLR thresholds,
    with exact Gaussian cell masses."""
    t = np.asarray(llr_thresholds, dtype=np.float64)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = t * sigma**2 / 2.0
    upper = np.concatenate(([np.inf], y))
    lower = np.concatenate((y, [-np.inf]))
    p0 = _gauss_mass(lower, upper, 1.0, sigma)
    p1 = _gauss_mass(lower, upper, -1.0, sigma)
    return Dmc(ConditionalPmf(p0 / p0.sum(), p1 / p1.sum()), t, float(sigma))
