"""MIM density evolution for flooding decoders: reconstruction tables, CN/VN
pmf evolution, per-iteration LUT construction and the design-noise search.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .code import DegreeDistribution
from .quantizer import (
    ConditionalPmf,
    Dmc,
    SignedAlphabet,
    ThresholdSet,
    mutual_information,
    optimal_sdq,
    quantize_awgn_channel,
    succ_key,
)

FAMILIES = ("QBP", "QMS", "LQMS")
EPS_CONV = 1e-4


class DegeneratePmfError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IterationLuts:
    """LUTs of one decoding iteration. ``phi_c``/``gamma_c`` exist for QBP only."""

    phi_v: np.ndarray
    phi_ch: np.ndarray
    gamma_v: ThresholdSet
    gamma_e: int
    phi_c: np.ndarray | None = None
    gamma_c: ThresholdSet | None = None

    def __post_init__(self):
        for name in ("phi_v", "phi_ch", "phi_c"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=np.int64))
        object.__setattr__(self, "gamma_e", int(self.gamma_e))

    def __eq__(self, other):
        if not isinstance(other, IterationLuts):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a.gammas if isinstance(a, ThresholdSet) else a),
                                  np.asarray(b.gammas if isinstance(b, ThresholdSet) else b))

        return (same(self.phi_v, other.phi_v) and same(self.phi_ch, other.phi_ch)
                and same(self.gamma_v, other.gamma_v) and self.gamma_e == other.gamma_e
                and same(self.phi_c, other.phi_c) and same(self.gamma_c, other.gamma_c))

    __hash__ = None


@dataclass(frozen=True)
class IterationStats:
    """DE diagnostics of one iteration: MI of the C2V and V2C messages and the
    hard-decision error probability."""

    mi_s: float
    mi_r: float
    pe: float


@dataclass(eq=False)
class DecoderSpec:
    """Complete decoder description produced by the designers."""

    family: str
    q_m: int
    q_c: int
    q_v: int
    sigma_d: float
    channel: Dmc
    iterations: list
    metadata: dict = field(default_factory=dict)
    layers: dict | None = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family != "QBP" and self.q_c != self.q_m:
            raise ValueError("q_c must equal q_m for min-sum families")

    @property
    def i_max(self) -> int:
        return len(self.iterations)

    @property
    def gamma_ch(self) -> np.ndarray:
        return self.channel.llr_thresholds

    def __eq__(self, other):
        if not isinstance(other, DecoderSpec):
            return NotImplemented
        return (self.family == other.family and (self.q_m, self.q_c, self.q_v) == (other.q_m, other.q_c, other.q_v)
                and self.sigma_d == other.sigma_d
                and np.array_equal(self.gamma_ch, other.gamma_ch)
                and len(self.iterations) == len(other.iterations)
                and all(a == b for a, b in zip(self.iterations, other.iterations))
                and _layers_equal(self.layers, other.layers))


def _layers_equal(a, b):
    if not a and not b:
        return True
    if not a or not b or set(a) != set(b):
        return False
    return all(a[k] == b[k] for k in a)


# ------------------------------------------------------- reconstruction tables


def build_phi_c(pr: ConditionalPmf, q_c: int, dc_max: int) -> np.ndarray:
    """CN reconstruction: larger magnitude means a less reliable V2C symbol.

    ``|φ_c(r)|`` grows with ``|log|g(r)||`` where ``g(r)`` is the posterior
    difference ``(P(r|0) - P(r|1)) / (P(r|0) + P(r|1)) = tanh(LLR(r)/2)``, and is
    scaled so that ``dc_max`` of them fit in a ``q_c``-bit signed register.
    Symbols with ``g = 0`` (including empty ones) get the budget value itself.
    """
    c = ((1 << (q_c - 1)) - 1) // dc_max
    if c < 1:
        raise ValueError("q_c too small for dc_max")
    tot = pr.p0 + pr.p1
    g = np.zeros(pr.size)
    m = tot > 0
    g[m] = (pr.p0[m] - pr.p1[m]) / tot[m]
    nz = g != 0
    if not nz.any():
        raise DegeneratePmfError("degenerate pmf: P(r|0) == P(r|1) for every symbol")
    lg = np.zeros_like(g)
    lg[nz] = np.abs(np.log(np.abs(g[nz])))
    alpha = lg[nz].max()
    if alpha > 0:
        mag = np.maximum(1, np.floor(c * lg / alpha + 0.5)).astype(np.int64)
    else:
        mag = np.ones(g.size, dtype=np.int64)
    out = np.where(g < 0, -mag, mag)
    out[~nz] = c
    return out


def _llr_table(p: ConditionalPmf):
    """Finite log-likelihood ratios and a sentinel sign for infinite or empty symbols."""
    p0, p1 = p.p0, p.p1
    finite = (p0 > 0) & (p1 > 0)
    h = np.zeros(p.size)
    h[finite] = np.log(p0[finite] / p1[finite])
    k = np.arange(p.size)
    sent = np.where(p1 == 0, np.where(p0 > 0, 1, np.where(k < p.size / 2, 1, -1)), -1)
    return h, finite, sent


def build_phi_v_ch(ps: ConditionalPmf, pl: ConditionalPmf, q_v: int, dv_max: int):
    """VN reconstructions ``(φ_v, φ_ch)``: LLRs scaled by a shared factor so that
    ``|φ_ch| + dv_max * |φ_v|`` fits in a ``q_v``-bit signed register."""
    c = ((1 << (q_v - 1)) - 1) // (dv_max + 1)
    if c < 1:
        raise ValueError("q_v too small for dv_max")
    hs, fs, ss = _llr_table(ps)
    hl, fl, sl = _llr_table(pl)
    mags = np.concatenate((np.abs(hs[fs]), np.abs(hl[fl])))
    beta = mags.max() if mags.size else 0.0
    if beta == 0 and fs.all() and fl.all():
        raise DegeneratePmfError("degenerate pmf: every LLR is zero")

    def table(h, f, s):
        scale = c / beta if beta > 0 else 0.0
        mag = np.floor(scale * np.abs(h) + 0.5).astype(np.int64)
        out = np.where(h < 0, -mag, mag)
        return np.where(f, out, s * c)

    return table(hs, fs, ss), table(hl, fl, sl)


# -------------------------------------------------------------- CN evolution


@dataclass(frozen=True)
class CnBpResult:
    alphabet: SignedAlphabet
    pa: ConditionalPmf
    gamma_c: ThresholdSet
    ps: ConditionalPmf


def _sign_index(v):
    return (np.asarray(v) < 0).astype(np.int64)


def cn_inner_bp(pr: ConditionalPmf, phi_c: np.ndarray, dd: DegreeDistribution, q_c: int):
    """Degree-mixed pmf of the CN inner sum ``(Π sgn φ_c) Σ |φ_c|`` over ``i-1`` inputs.

    Returns ``(values, pa)`` with values in ≻-descending order.
    """
    mmax = (1 << (q_c - 1)) - 1
    phi_c = np.asarray(phi_c, dtype=np.int64)
    mag = np.abs(phi_c)
    sidx = _sign_index(phi_c)
    if mag.max() * (dd.dc_max - 1) > mmax:
        raise AssertionError("φ_c magnitudes overflow the q_c budget")
    # u[p, s, m]: running parity p of the input bits, sign s, magnitude m
    u = np.zeros((2, 2, mmax + 1))
    for r in range(pr.size):
        u[0, sidx[r], mag[r]] += pr.p0[r]
        u[1, sidx[r], mag[r]] += pr.p1[r]
    acc = np.zeros((2, 2, mmax + 1))
    for i in range(2, dd.dc_max + 1):
        w = dd.rho.get(i)
        if w:
            acc += float(w) * 0.5 ** (i - 2) * u
        if i == dd.dc_max:
            break
        nu = np.zeros_like(u)
        for r in range(pr.size):
            m, s = mag[r], sidx[r]
            for xb, pw in ((0, pr.p0[r]), (1, pr.p1[r])):
                if pw == 0.0:
                    continue
                for p in (0, 1):
                    for sg in (0, 1):
                        if m:
                            if u[p, sg, mmax + 1 - m:].any():
                                raise AssertionError("CN inner magnitude overflow")
                            nu[p ^ xb, sg ^ s, m:] += pw * u[p, sg, :mmax + 1 - m]
                        else:
                            nu[p ^ xb, sg ^ s, :] += pw * u[p, sg, :]
        u = nu
    # ≻ order: +0, +1, ..., +mmax, -mmax, ..., -1 ; a negative zero folds into +0
    values = np.concatenate((np.arange(0, mmax + 1), -np.arange(mmax, 0, -1)))
    p = [np.concatenate((acc[x, 0], acc[x, 1, :0:-1])) for x in (0, 1)]
    for x in (0, 1):
        p[x][0] += acc[x, 1, 0]
        p[x] /= p[x].sum()
    return values, ConditionalPmf(p[0], p[1])


def cn_evolve_bp(pr: ConditionalPmf, phi_c: np.ndarray, dd: DegreeDistribution, q_m: int,
                 q_c: int) -> CnBpResult:
    """CN step of the QBP design: inner pmf, its ≻-ordered quantizer and P_{S|X}."""
    values, pa = cn_inner_bp(pr, phi_c, dd, q_c)
    keep = (pa.p0 + pa.p1) > 0
    res = optimal_sdq(pa, q_m, values=values, ordering="sign-major")
    return CnBpResult(SignedAlphabet(values[keep]), pa, res.thresholds, res.pmf)


def f_map(k, q_m: int):
    """Outer index → signed min-sum magnitude: 0 ↦ 2^{q-1}, ..., 2^q - 1 ↦ -2^{q-1}."""
    half = 1 << (q_m - 1)
    k = np.asarray(k)
    return np.where(k < half, half - k, half - 1 - k)


def f_inverse(v, q_m: int):
    half = 1 << (q_m - 1)
    v = np.asarray(v)
    return np.where(v > 0, half - v, half - 1 - v)


def cn_evolve_ms(pr: ConditionalPmf, dd: DegreeDistribution, q_m: int) -> ConditionalPmf:
    """C2V pmf of the min-sum CN update: sign product times the minimum ``|f|``."""
    half = 1 << (q_m - 1)
    k_all = np.arange(pr.size)
    fv = f_map(k_all, q_m)
    mag = np.abs(fv)
    sidx = _sign_index(fv)
    # u[p, s, m] with m in 1..half (index 0 unused)
    u = np.zeros((2, 2, half + 1))
    for r in range(pr.size):
        u[0, sidx[r], mag[r]] += pr.p0[r]
        u[1, sidx[r], mag[r]] += pr.p1[r]
    mins = np.minimum.outer(np.arange(half + 1), np.arange(half + 1))
    acc = np.zeros_like(u)
    for i in range(2, dd.dc_max + 1):
        w = dd.rho.get(i)
        if w:
            acc += float(w) * 0.5 ** (i - 2) * u
        if i == dd.dc_max:
            break
        nu = np.zeros_like(u)
        for r in range(pr.size):
            m, s = mag[r], sidx[r]
            for xb, pw in ((0, pr.p0[r]), (1, pr.p1[r])):
                if pw == 0.0:
                    continue
                for p in (0, 1):
                    for sg in (0, 1):
                        np.add.at(nu[p ^ xb, sg ^ s], mins[:, m], pw * u[p, sg])
        u = nu
    out = []
    for x in (0, 1):
        q = np.zeros(pr.size)
        mags = np.arange(1, half + 1)
        q[f_inverse(mags, q_m)] += acc[x, 0, 1:]
        q[f_inverse(-mags, q_m)] += acc[x, 1, 1:]
        out.append(q / q.sum())
    return ConditionalPmf(out[0], out[1])


# -------------------------------------------------------------- VN evolution


@dataclass(frozen=True)
class VnResult:
    values: np.ndarray
    pb: ConditionalPmf
    thresholds: ThresholdSet
    pr: ConditionalPmf
    pe: float | None = None

    @property
    def gamma_e(self) -> int:
        return int(self.thresholds.gammas[0])


def vn_inner(ps: ConditionalPmf, pl: ConditionalPmf, phi_v, phi_ch, dd: DegreeDistribution,
             q_v: int, decision: bool = False):
    """Degree-mixed pmf of ``φ_ch(L) + Σ φ_v(S)`` over ``j-1`` (or ``j``) C2V inputs.

    Returns ``(values, pb)`` with values descending from ``2^{q_v-1}-1``.
    """
    vmax = (1 << (q_v - 1)) - 1
    phi_v = np.asarray(phi_v, dtype=np.int64)
    phi_ch = np.asarray(phi_ch, dtype=np.int64)
    extra = 1 if decision else 0
    if np.abs(phi_ch).max() + (dd.dv_max - 1 + extra) * np.abs(phi_v).max() > vmax:
        raise AssertionError("VN inner values overflow the q_v budget")
    width = 2 * vmax + 1
    out = []
    for pl_x, ps_x in ((pl.p0, ps.p0), (pl.p1, ps.p1)):
        cur = np.zeros(width)
        np.add.at(cur, phi_ch + vmax, pl_x)
        acc = np.zeros(width)
        nz = np.flatnonzero(ps_x)
        for j in range(1, dd.dv_max + 1):
            if j - 1 + extra > 0:
                nxt = np.zeros(width)
                for s in nz:
                    d = phi_v[s]
                    if d >= 0:
                        nxt[d:] += ps_x[s] * cur[:width - d]
                    else:
                        nxt[:d] += ps_x[s] * cur[-d:]
                cur = nxt
            w = dd.theta.get(j)
            if w:
                acc += float(w) * cur
            if decision and j == dd.dv_max:
                break
        out.append(acc[::-1] / acc.sum())
    values = np.arange(vmax, -vmax - 1, -1)
    return values, ConditionalPmf(out[0], out[1])


def vn_evolve(ps: ConditionalPmf, pl: ConditionalPmf, phi_v, phi_ch, dd: DegreeDistribution,
              q_m: int, q_v: int, mode: str = "message") -> VnResult:
    """VN step: inner pmf and its MIM quantizer.

    ``mode='message'`` quantizes to ``q_m`` bits (Γ_v, P_{R|X}); ``'decision'``
    sums all ``j`` inputs, quantizes to one bit (Γ_e) and reports the
    hard-decision error probability.
    """
    if mode not in ("message", "decision"):
        raise ValueError(f"unknown mode {mode!r}")
    decision = mode == "decision"
    values, pb = vn_inner(ps, pl, phi_v, phi_ch, dd, q_v, decision)
    res = optimal_sdq(pb, 1 if decision else q_m, values=values)
    pe = None
    if decision:
        pe = 0.5 * (float(res.pmf.p0[1]) + float(res.pmf.p1[0]))
    return VnResult(values, pb, res.thresholds, res.pmf, pe)


# ----------------------------------------------------------------- flooding


def _check_bits(q_m, q_c, q_v, family):
    if family not in ("QBP", "QMS"):
        raise ValueError("flooding design supports QBP and QMS")
    if q_c < q_m or q_v < q_m:
        raise ValueError("q_c and q_v must be at least q_m")


def flooding_iterations(dd: DegreeDistribution, channel: Dmc, q_m: int, q_c: int, q_v: int,
                        family: str) -> Iterator[tuple[IterationLuts, IterationStats]]:
    """Endless generator of designed iterations (Algorithm-1 flow)."""
    _check_bits(q_m, q_c, q_v, family)
    pl = channel.pmf
    pr = pl
    while True:
        phi_c = gamma_c = None
        if family == "QBP":
            phi_c = build_phi_c(pr, q_c, dd.dc_max)
            cn = cn_evolve_bp(pr, phi_c, dd, q_m, q_c)
            ps, gamma_c = cn.ps, cn.gamma_c
        else:
            ps = cn_evolve_ms(pr, dd, q_m)
        phi_v, phi_ch = build_phi_v_ch(ps, pl, q_v, dd.dv_max)
        msg = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "message")
        dec = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "decision")
        luts = IterationLuts(phi_v, phi_ch, msg.thresholds, dec.gamma_e, phi_c, gamma_c)
        pr = msg.pr
        yield luts, IterationStats(mutual_information(ps), mutual_information(pr), dec.pe)


def design_flooding(dd: DegreeDistribution, sigma_d: float, q_m: int, q_c: int, q_v: int,
                    i_max: int, family: str = "QMS", channel: Dmc | None = None,
                    metadata: dict | None = None) -> DecoderSpec:
    """Design ``i_max`` iterations of a flooding QBP or QMS decoder at noise ``sigma_d``."""
    if i_max < 1:
        raise ValueError("i_max must be at least 1")
    if family == "QMS":
        q_c = q_m
    _check_bits(q_m, q_c, q_v, family)
    if channel is None:
        channel = quantize_awgn_channel(sigma_d, q_m)
    its, trace = [], []
    gen = flooding_iterations(dd, channel, q_m, q_c, q_v, family)
    for _ in range(i_max):
        luts, st = next(gen)
        its.append(luts)
        trace.append(st)
    meta = {"rho": {str(k): str(v) for k, v in dd.rho.items()},
            "theta": {str(k): str(v) for k, v in dd.theta.items()},
            "schedule": "flooding"}
    meta.update(metadata or {})
    return DecoderSpec(family, q_m, q_c, q_v, float(sigma_d), channel, its, meta, trace=trace)


def de_converges(dd: DegreeDistribution, sigma: float, q_m: int, q_c: int, q_v: int, i_max: int,
                 family: str, eps: float = EPS_CONV, layered_nb: int | None = None) -> tuple[bool, int]:
    """Whether DE at ``sigma`` drives the hard-decision error below ``eps`` within
    ``i_max`` iterations. Returns ``(converged, iterations_run)``."""
    channel = quantize_awgn_channel(sigma, q_m)
    if layered_nb is not None:
        from .layered import iteration_specific_iterations
        gen = iteration_specific_iterations(dd, layered_nb, channel, q_m, q_v)
    else:
        gen = flooding_iterations(dd, channel, q_m, q_m if family != "QBP" else q_c, q_v, family)
    last = None
    for t in range(1, i_max + 1):
        _, st = next(gen)
        if st.pe < eps:
            return True, t
        # an exact fixed point of the deterministic recursion never moves again
        if last is not None and st.mi_r == last.mi_r and st.pe == last.pe:
            return False, t
        last = st
    return False, i_max


def find_sigma_d(dd: DegreeDistribution, q_m: int, q_c: int, q_v: int, i_max: int,
                 family: str = "QMS", lo: float = 0.3, hi: float = 2.0, tol: float = 1e-3,
                 eps: float = EPS_CONV, layered_nb: int | None = None, trace: list | None = None) -> float:
    """Largest design noise std-dev (to ``tol``) at which DE converges within ``i_max``.

    Bisection over ``[lo, hi]``; ``trace`` receives ``(sigma, converged, iterations)``.
    """
    ok_lo = de_converges(dd, lo, q_m, q_c, q_v, i_max, family, eps, layered_nb)
    ok_hi = de_converges(dd, hi, q_m, q_c, q_v, i_max, family, eps, layered_nb)
    if trace is not None:
        trace.extend([(lo, *ok_lo), (hi, *ok_hi)])
    if not ok_lo[0] or ok_hi[0]:
        raise BracketError(f"bracket error: [{lo}, {hi}] does not straddle the DE threshold")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok = de_converges(dd, mid, q_m, q_c, q_v, i_max, family, eps, layered_nb)
        if trace is not None:
            trace.append((mid, *ok))
        if ok[0]:
            lo = mid
        else:
            hi = mid
    return lo


# ----------------------------------------------------------------- invariants


def _degree_max(meta: dict, key: str) -> int | None:
    d = (meta or {}).get(key)
    if not d:
        return None
    return max(int(k) for k in d)


def _bundles(spec: DecoderSpec):
    for t, luts in enumerate(spec.iterations, 1):
        yield f"iteration {t}", luts
    for (t, h), luts in sorted((spec.layers or {}).items()):
        yield f"layer ({t},{h})", luts


def lut_violations(spec: DecoderSpec, odd_symmetry: bool = True) -> list[str]:
    """Names of the LUT invariants that ``spec`` violates, empty when it is clean.

    Checked per bundle: table lengths, strictly decreasing Γ_v (Γ_c under ≻),
    φ magnitudes within the CN/VN register budgets and, if ``odd_symmetry``,
    ``φ(k) = −φ(2^{q_m}−1−k)``. The budgets use ``d_{c,max}``/``d_{v,max}`` from
    the spec metadata when present and a single term otherwise.
    """
    k = 1 << spec.q_m
    vmax = (1 << (spec.q_v - 1)) - 1
    cmax = (1 << (spec.q_c - 1)) - 1
    dc = _degree_max(spec.metadata, "rho") or 1
    dv = _degree_max(spec.metadata, "theta") or 1
    out = []
    if np.asarray(spec.gamma_ch).size != k - 1:
        out.append("gamma_ch length mismatch")
    elif (np.diff(spec.gamma_ch) >= 0).any():
        out.append("gamma_ch not monotone")
    qbp = spec.family == "QBP"
    for where, b in _bundles(spec):
        tables = {"phi_v": b.phi_v, "phi_ch": b.phi_ch}
        if qbp:
            if b.phi_c is None or b.gamma_c is None:
                out.append(f"{where}: QBP bundle without phi_c/gamma_c")
                continue
            tables["phi_c"] = b.phi_c
        bad_len = [n for n, a in tables.items() if a.shape != (k,)]
        if len(b.gamma_v) != k - 1 or (qbp and len(b.gamma_c) != k - 1):
            bad_len.append("gamma")
        if bad_len:
            out.append(f"{where}: length mismatch in {', '.join(bad_len)}")
            continue
        g = b.gamma_v.gammas
        if (np.diff(g) >= 0).any():
            out.append(f"{where}: gamma_v not monotone")
        if np.abs(g).max() > vmax or abs(b.gamma_e) > vmax:
            out.append(f"{where}: gamma_v outside the q_v range")
        if qbp:
            keys = succ_key(b.gamma_c.gammas, cmax)
            if (np.abs(b.gamma_c.gammas) > cmax).any() or (np.diff(keys) <= 0).any():
                out.append(f"{where}: gamma_c not monotone")
            if dc * np.abs(b.phi_c).max() > cmax:
                out.append(f"{where}: phi_c exceeds the q_c budget")
        if np.abs(b.phi_ch).max() + dv * np.abs(b.phi_v).max() > vmax:
            out.append(f"{where}: phi_v/phi_ch exceed the q_v budget")
        if odd_symmetry:
            for n, a in tables.items():
                if not np.array_equal(a, -a[::-1]):
                    out.append(f"{where}: {n} not odd-symmetric")
    return out
