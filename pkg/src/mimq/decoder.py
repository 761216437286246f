"""Fixed-point and floating-point LDPC decoders.

Quantized decoders exchange ``q_m``-bit outer indices (0 is the most reliable
zero) and are driven by the LUTs of a :class:`~mimq.design.DecoderSpec`.
Every decoder stops as soon as the hard decisions satisfy all parity checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .code import LayerConflictError, LayerPlan, ParityCheckMatrix, validate_layer_plan
from .design import DecoderSpec
from .quantizer import succ_key

_BIG = 1 << 30


@dataclass(frozen=True)
class DecodeResult:
    """Hard decisions, iterations run and whether the syndrome check passed.
    Float baselines also report the final posterior LLRs."""

    bits: np.ndarray
    iterations_used: int
    converged: bool
    posterior: np.ndarray | None = None


def quantize_llr(llr, gamma_ch) -> np.ndarray:
    """Channel symbol index: the number of thresholds strictly greater than ``llr``."""
    g = np.asarray(gamma_ch, dtype=np.float64)
    if g.size > 1 and not (np.diff(g) < 0).all():
        raise ValueError("channel thresholds must be strictly decreasing")
    x = np.asarray(llr, dtype=np.float64)
    return (g.size - np.searchsorted(g[::-1], x, side="right")).astype(np.int64)


def check_syndrome(h: ParityCheckMatrix, bits) -> bool:
    """True iff every check has even parity over its neighbours."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (h.n,):
        raise ValueError("bit vector length does not match N")
    cn_ptr, edge_vn, _, _ = _graph(h)
    return bool(_syndrome_ok(cn_ptr, edge_vn, bits))


_GRAPH_CACHE: dict = {}


def _graph(h: ParityCheckMatrix):
    key = id(h)
    hit = _GRAPH_CACHE.get(key)
    if hit is None or hit[0] is not h:
        hit = (h, h.edge_arrays())
        _GRAPH_CACHE[key] = hit
    return hit[1]


# ------------------------------------------------------------------ kernels


@nb.njit(cache=True, nogil=True)
def _syndrome_ok(cn_ptr, edge_vn, bits):
    for c in range(cn_ptr.size - 1):
        p = 0
        for e in range(cn_ptr[c], cn_ptr[c + 1]):
            p ^= bits[edge_vn[e]]
        if p:
            return False
    return True


@nb.njit(cache=True, nogil=True)
def _f(k, half):
    return half - k if k < half else half - 1 - k


@nb.njit(cache=True, nogil=True)
def _f_inv(v, half):
    return half - v if v > 0 else half - 1 - v


@nb.njit(cache=True, nogil=True)
def _bounded(x, lim, err):
    """Saturate at ``±lim``, recording the overflow in ``err[0]``."""
    if x > lim:
        err[0] = 1
        return lim
    if x < -lim:
        err[0] = 1
        return -lim
    return x


@nb.njit(cache=True, nogil=True)
def _ms_tables(q_m):
    """Sign bit and magnitude of f(k) per message index, and the outgoing index
    for each (sign, magnitude)."""
    half = 1 << (q_m - 1)
    fs = np.empty(2 * half, np.int64)
    fm = np.empty(2 * half, np.int64)
    for k in range(2 * half):
        f = _f(k, half)
        fs[k] = 1 if f < 0 else 0
        fm[k] = abs(f)
    out = np.zeros((2, half + 1), np.int64)
    for m in range(1, half + 1):
        out[0, m] = _f_inv(m, half)
        out[1, m] = _f_inv(-m, half)
    return fs, fm, out


@nb.njit(cache=True, nogil=True)
def _cn_ms(cn_ptr, v2c, c2v, fs, fm, out, half):
    """Min-sum CN update in the f-domain with two-minima leaf exclusion.
    A lone edge receives magnitude ``half``."""
    for c in range(cn_ptr.size - 1):
        a, b = cn_ptr[c], cn_ptr[c + 1]
        neg = 0
        m1 = half
        m2 = half
        i1 = -1
        for e in range(a, b):
            k = v2c[e]
            neg ^= fs[k]
            f = fm[k]
            i1 = e if f < m1 else i1
            m2 = min(m2, max(m1, f))
            m1 = min(m1, f)
        for e in range(a, b):
            c2v[e] = out[neg ^ fs[v2c[e]], m2 if e == i1 else m1]


@nb.njit(cache=True, nogil=True)
def _cn_bp(cn_ptr, v2c, c2v, phi_c, gkey, mmax, err):
    """QBP CN update: (Π sgn φ_c)(Σ |φ_c|) over the other edges, quantized under ≻."""
    for c in range(cn_ptr.size - 1):
        a, b = cn_ptr[c], cn_ptr[c + 1]
        neg = 0
        tot = 0
        for e in range(a, b):
            x = phi_c[v2c[e]]
            if x < 0:
                neg ^= 1
                tot -= x
            else:
                tot += x
        for e in range(a, b):
            x = phi_c[v2c[e]]
            s = neg
            if x < 0:
                s ^= 1
                mag = tot + x
            else:
                mag = tot - x
            mag = _bounded(mag, mmax, err)
            val = -mag if s else mag
            key = val if val >= 0 else 2 * mmax + 1 + val
            idx = 0
            for g in gkey:
                if g < key:
                    idx += 1
            c2v[e] = idx


@nb.njit(cache=True, nogil=True)
def _vn_quant(v, sym, vn_ptr, vn_edges, c2v, v2c, phi_v, phi_ch, vq, gam_e, vmax, bits):
    """VN update: full inner sum for the decision, total-minus-edge for each
    V2C message, quantized through the lookup ``vq[x + vmax]``. Returns whether
    any sum left the register range (it is saturated either way)."""
    a, b = vn_ptr[v], vn_ptr[v + 1]
    tot = phi_ch[sym[v]]
    for k in range(a, b):
        tot += phi_v[c2v[vn_edges[k]]]
    of = (tot > vmax) | (tot < -vmax)
    tot = min(max(tot, -vmax), vmax)
    bits[v] = tot < gam_e
    for k in range(a, b):
        e = vn_edges[k]
        x = tot - phi_v[c2v[e]]
        of |= (x > vmax) | (x < -vmax)
        v2c[e] = vq[min(max(x, -vmax), vmax) + vmax]
    return of


@nb.njit(cache=True, nogil=True)
def _flood_one(cn_ptr, edge_vn, vn_ptr, vn_edges, sym, qbp, phi_v, phi_ch, vq, gam_e,
               phi_c, gkey_c, q_m, mmax_c, vmax, err, bits):
    n = sym.size
    half = 1 << (q_m - 1)
    fs, fm, out = _ms_tables(q_m)
    v2c = np.empty(edge_vn.size, np.int64)
    c2v = np.empty(edge_vn.size, np.int64)
    for e in range(edge_vn.size):
        v2c[e] = sym[edge_vn[e]]
    of = False
    for t in range(phi_v.shape[0]):
        if qbp:
            _cn_bp(cn_ptr, v2c, c2v, phi_c[t], gkey_c[t], mmax_c, err)
        else:
            _cn_ms(cn_ptr, v2c, c2v, fs, fm, out, half)
        pv, pc, q, ge = phi_v[t], phi_ch[t], vq[t], gam_e[t]
        for v in range(n):
            of |= _vn_quant(v, sym, vn_ptr, vn_edges, c2v, v2c, pv, pc, q, ge, vmax, bits)
        if _syndrome_ok(cn_ptr, edge_vn, bits):
            if of:
                err[0] = 1
            return t + 1, True
    if of:
        err[0] = 1
    return phi_v.shape[0], False


@nb.njit(cache=True, nogil=True)
def _cn_recompute(c, cn_ptr, v2c, half, neg, m1, i1, m2, i2):
    ng = 0
    a1 = _BIG
    a2 = _BIG
    j1 = -1
    j2 = -1
    for e in range(cn_ptr[c], cn_ptr[c + 1]):
        f = _f(v2c[e], half)
        if f < 0:
            ng ^= 1
            f = -f
        if f < a1:
            a2 = a1
            j2 = j1
            a1 = f
            j1 = e
        elif f < a2:
            a2 = f
            j2 = e
    neg[c] = ng
    m1[c] = a1
    i1[c] = j1
    m2[c] = a2
    i2[c] = j2


@nb.njit(cache=True, nogil=True)
def _cn_update_edge(c, e, old, new, cn_ptr, v2c, half, neg, m1, i1, m2, i2):
    """Incremental update of the CN sign parity and two minima after edge e changed."""
    fo = _f(old, half)
    fn = _f(new, half)
    if (fo < 0) != (fn < 0):
        neg[c] ^= 1
    mag = -fn if fn < 0 else fn
    if e == i1[c] or e == i2[c]:
        _cn_recompute(c, cn_ptr, v2c, half, neg, m1, i1, m2, i2)
    elif mag < m1[c]:
        m2[c] = m1[c]
        i2[c] = i1[c]
        m1[c] = mag
        i1[c] = e
    elif mag < m2[c]:
        m2[c] = mag
        i2[c] = e


@nb.njit(cache=True, nogil=True)
def _layered_one(cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, layer_ptr, layer_vns, sym,
                 phi_v, phi_ch, vq, gam_e, rows_per_iter, i_max, q_m, vmax, err, bits,
                 incremental):
    """Vertical-layered QMS decoding. LUT row of (t, h) is ``t*rows_per_iter + h``
    when ``rows_per_iter > 1`` (layer-specific tables), else ``t``.

    With ``incremental`` every CN meets at most one VN per layer and its sign
    parity and two minima are patched edge by edge; otherwise all CN states are
    rebuilt after each layer.
    """
    half = 1 << (q_m - 1)
    ncn = cn_ptr.size - 1
    ne = edge_vn.size
    v2c = np.empty(ne, np.int64)
    c2v = np.empty(ne, np.int64)
    for e in range(ne):
        v2c[e] = sym[edge_vn[e]]
    neg = np.zeros(ncn, np.int64)
    m1 = np.zeros(ncn, np.int64)
    m2 = np.zeros(ncn, np.int64)
    i1 = np.zeros(ncn, np.int64)
    i2 = np.zeros(ncn, np.int64)
    for c in range(ncn):
        _cn_recompute(c, cn_ptr, v2c, half, neg, m1, i1, m2, i2)
    nl = layer_ptr.size - 1
    old = np.empty(ne, np.int64)
    of = False
    for t in range(i_max):
        for h in range(nl):
            row = t * rows_per_iter + h if rows_per_iter > 1 else t
            lo, hi = layer_ptr[h], layer_ptr[h + 1]
            # C2V of every edge in the layer from the stored V2C registers
            for j in range(lo, hi):
                v = layer_vns[j]
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    e = vn_edges[k]
                    c = edge_cn[e]
                    f = _f(v2c[e], half)
                    s = neg[c] ^ (1 if f < 0 else 0)
                    mg = m2[c] if e == i1[c] else m1[c]
                    if mg == _BIG:
                        mg = half
                    c2v[e] = _f_inv(-mg if s else mg, half)
            pv, pc, q, ge = phi_v[row], phi_ch[row], vq[row], gam_e[row]
            for j in range(lo, hi):
                v = layer_vns[j]
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    old[vn_edges[k]] = v2c[vn_edges[k]]
                of |= _vn_quant(v, sym, vn_ptr, vn_edges, c2v, v2c, pv, pc, q, ge, vmax, bits)
            if not incremental:
                for c in range(ncn):
                    _cn_recompute(c, cn_ptr, v2c, half, neg, m1, i1, m2, i2)
                continue
            for j in range(lo, hi):
                v = layer_vns[j]
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    e = vn_edges[k]
                    if v2c[e] != old[e]:
                        _cn_update_edge(edge_cn[e], e, old[e], v2c[e], cn_ptr, v2c, half,
                                        neg, m1, i1, m2, i2)
        if _syndrome_ok(cn_ptr, edge_vn, bits):
            if of:
                err[0] = 1
            return t + 1, True
    if of:
        err[0] = 1
    return i_max, False


@nb.njit(cache=True, nogil=True)
def _bp_one(cn_ptr, edge_vn, vn_ptr, vn_edges, llr, i_max, early, bits, post):
    ne = edge_vn.size
    v2c = np.empty(ne)
    c2v = np.zeros(ne)
    th = np.empty(ne)
    for e in range(ne):
        v2c[e] = llr[edge_vn[e]]
    clip = 1.0 - 1e-15
    for t in range(i_max):
        for c in range(cn_ptr.size - 1):
            a, b = cn_ptr[c], cn_ptr[c + 1]
            for e in range(a, b):
                th[e] = np.tanh(0.5 * v2c[e])
            # leave-one-out product by prefix and suffix products
            pre = 1.0
            for e in range(a, b):
                c2v[e] = pre
                pre *= th[e]
            suf = 1.0
            for e in range(b - 1, a - 1, -1):
                p = c2v[e] * suf
                if p > clip:
                    p = clip
                elif p < -clip:
                    p = -clip
                c2v[e] = 2.0 * np.arctanh(p)
                suf *= th[e]
        for v in range(llr.size):
            tot = llr[v]
            for k in range(vn_ptr[v], vn_ptr[v + 1]):
                tot += c2v[vn_edges[k]]
            post[v] = tot
            bits[v] = 0 if tot >= 0 else 1
            for k in range(vn_ptr[v], vn_ptr[v + 1]):
                e = vn_edges[k]
                v2c[e] = tot - c2v[e]
        if early and _syndrome_ok(cn_ptr, edge_vn, bits):
            return t + 1, True
    return i_max, _syndrome_ok(cn_ptr, edge_vn, bits)


@nb.njit(cache=True, nogil=True)
def _lnms_one(cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, layer_ptr, layer_vns, llr, factor,
              i_max, early, bits, post):
    ne = edge_vn.size
    v2c = np.empty(ne)
    c2v = np.zeros(ne)
    for e in range(ne):
        v2c[e] = llr[edge_vn[e]]
    for t in range(i_max):
        for h in range(layer_ptr.size - 1):
            lo, hi = layer_ptr[h], layer_ptr[h + 1]
            for j in range(lo, hi):
                v = layer_vns[j]
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    e = vn_edges[k]
                    c = edge_cn[e]
                    s = 1.0
                    mg = np.inf
                    for o in range(cn_ptr[c], cn_ptr[c + 1]):
                        if o == e:
                            continue
                        x = v2c[o]
                        if x < 0:
                            s = -s
                            x = -x
                        if x < mg:
                            mg = x
                    c2v[e] = factor * s * mg if mg < np.inf else 0.0
            for j in range(lo, hi):
                v = layer_vns[j]
                tot = llr[v]
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    tot += c2v[vn_edges[k]]
                post[v] = tot
                bits[v] = 0 if tot >= 0 else 1
                for k in range(vn_ptr[v], vn_ptr[v + 1]):
                    e = vn_edges[k]
                    v2c[e] = tot - c2v[e]
        if early and _syndrome_ok(cn_ptr, edge_vn, bits):
            return t + 1, True
    return i_max, _syndrome_ok(cn_ptr, edge_vn, bits)


# ------------------------------------------------------------------ tables


@dataclass(frozen=True)
class _Tables:
    phi_v: np.ndarray
    phi_ch: np.ndarray
    vq: np.ndarray
    gam_e: np.ndarray
    phi_c: np.ndarray
    gkey_c: np.ndarray
    mmax_c: int
    vmax: int
    rows_per_iter: int


def _stack(bundles, q_m, q_c, q_v, family):
    k = 1 << q_m
    phi_v = np.array([b.phi_v for b in bundles], dtype=np.int64).reshape(-1, k)
    phi_ch = np.array([b.phi_ch for b in bundles], dtype=np.int64).reshape(-1, k)
    gam_v = np.array([b.gamma_v.gammas for b in bundles], dtype=np.int64).reshape(-1, k - 1)
    gam_e = np.array([b.gamma_e for b in bundles], dtype=np.int64)
    vmax = (1 << (q_v - 1)) - 1
    # vq[t, x + vmax] = number of thresholds strictly above x
    x = np.arange(-vmax, vmax + 1, dtype=np.int64)
    vq = np.ascontiguousarray((gam_v[:, :, None] > x[None, None, :]).sum(axis=1), dtype=np.int64)
    mmax_c = (1 << (q_c - 1)) - 1
    if family == "QBP":
        phi_c = np.array([b.phi_c for b in bundles], dtype=np.int64).reshape(-1, k)
        gkey_c = np.array([succ_key(b.gamma_c.gammas, mmax_c) for b in bundles],
                          dtype=np.int64).reshape(-1, k - 1)
    else:
        phi_c = np.zeros((1, k), np.int64)
        gkey_c = np.zeros((1, k - 1), np.int64)
    return phi_v, phi_ch, vq, gam_e, phi_c, gkey_c, mmax_c, vmax


def spec_tables(spec: DecoderSpec, nb: int | None = None) -> _Tables:
    """Stack a spec's LUTs into arrays; layer-specific specs are laid out (t, h)."""
    if spec.layers:
        if nb is None:
            nb = max(h for _, h in spec.layers)
        bundles = [spec.layers[(t, h)] for t in range(1, spec.i_max + 1) for h in range(1, nb + 1)]
        rows = nb
    else:
        bundles = spec.iterations
        rows = 1
    arrs = _stack(bundles, spec.q_m, spec.q_c, spec.q_v, spec.family)
    return _Tables(*arrs, rows)


def _check_frame(h, symbols, q_m):
    s = np.ascontiguousarray(symbols, dtype=np.int64)
    if s.ndim != 1 or s.size != h.n:
        raise ValueError(f"frame length {s.size} does not match N={h.n}")
    if s.size and (s.min() < 0 or s.max() >= (1 << q_m)):
        raise ValueError("frame symbols outside the q_m-bit alphabet")
    return s


def _layer_arrays(h: ParityCheckMatrix, plan: LayerPlan):
    if plan.nb > 1:
        validate_layer_plan(h, plan)
    else:
        covered = np.sort(np.concatenate(plan.layers)) if plan.layers else np.array([])
        if not np.array_equal(covered, np.arange(h.n)):
            raise LayerConflictError("layers do not partition the variable nodes")
    layer_ptr = np.zeros(plan.nb + 1, np.int64)
    layer_ptr[1:] = np.cumsum([len(l) for l in plan.layers])
    layer_vns = np.concatenate([np.asarray(l, np.int64) for l in plan.layers])
    return layer_ptr, layer_vns


def _raise_on_overflow(err, strict):
    if strict and err[0]:
        raise OverflowError("inner sum exceeds the q_v-bit register range")


def _edge_cn(cn_ptr):
    return np.repeat(np.arange(cn_ptr.size - 1, dtype=np.int64), np.diff(cn_ptr))


# --------------------------------------------------------------- decoders


class FloodingDecoder:
    """Flooding QBP/QMS decoder bound to one code and one spec."""

    def __init__(self, h: ParityCheckMatrix, spec: DecoderSpec, strict: bool = True):
        if spec.family not in ("QBP", "QMS"):
            raise ValueError(f"flooding decoder needs a QBP or QMS spec, got {spec.family}")
        self.h, self.spec, self.strict = h, spec, strict
        self.graph = _graph(h)
        self.tables = spec_tables(spec)

    def decode(self, symbols) -> DecodeResult:
        s = _check_frame(self.h, symbols, self.spec.q_m)
        bits = np.zeros(self.h.n, np.int64)
        t = self.tables
        cn_ptr, edge_vn, vn_ptr, vn_edges = self.graph
        err = np.zeros(1, np.int64)
        it, ok = _flood_one(cn_ptr, edge_vn, vn_ptr, vn_edges, s, self.spec.family == "QBP",
                            t.phi_v, t.phi_ch, t.vq, t.gam_e, t.phi_c, t.gkey_c,
                            self.spec.q_m, t.mmax_c, t.vmax, err, bits)
        _raise_on_overflow(err, self.strict)
        return DecodeResult(bits, int(it), bool(ok))


class LayeredDecoder:
    """Vertical-layered LQMS decoder; uses per-layer LUTs when the spec carries them."""

    def __init__(self, h: ParityCheckMatrix, plan: LayerPlan, spec: DecoderSpec, strict: bool = True):
        if spec.family != "LQMS":
            raise ValueError(f"layered decoder needs an LQMS spec, got {spec.family}")
        self.h, self.spec, self.strict = h, spec, strict
        self.graph = _graph(h)
        self.edge_cn = _edge_cn(self.graph[0])
        self.layer_ptr, self.layer_vns = _layer_arrays(h, plan)
        self.tables = spec_tables(spec, plan.nb)

    def decode(self, symbols) -> DecodeResult:
        s = _check_frame(self.h, symbols, self.spec.q_m)
        bits = np.zeros(self.h.n, np.int64)
        t = self.tables
        cn_ptr, edge_vn, vn_ptr, vn_edges = self.graph
        err = np.zeros(1, np.int64)
        it, ok = _layered_one(cn_ptr, edge_vn, self.edge_cn, vn_ptr, vn_edges, self.layer_ptr,
                              self.layer_vns, s, t.phi_v, t.phi_ch, t.vq, t.gam_e,
                              t.rows_per_iter, self.spec.i_max, self.spec.q_m, t.vmax,
                              err, bits, self.layer_ptr.size > 2)
        _raise_on_overflow(err, self.strict)
        return DecodeResult(bits, int(it), bool(ok))


class FloatDecoder:
    """Floating-point baseline: flooding sum-product ``'bp'`` or layered
    normalized min-sum ``'lnms'`` with outgoing CN magnitudes scaled by ``factor``."""

    def __init__(self, h: ParityCheckMatrix, algo: str, i_max: int, factor: float = 1.0,
                 plan: LayerPlan | None = None, early_stop: bool = True):
        if algo not in ("bp", "lnms"):
            raise ValueError(f"unknown baseline {algo!r}")
        if algo == "lnms" and not 0 < factor <= 1:
            raise ValueError("normalization factor must lie in (0, 1]")
        if i_max < 1:
            raise ValueError("i_max must be at least 1")
        self.h, self.algo, self.i_max, self.factor = h, algo, i_max, float(factor)
        self.early_stop = bool(early_stop)
        self.graph = _graph(h)
        if algo == "lnms":
            if plan is None:
                plan = LayerPlan((np.arange(h.n),))
            self.edge_cn = _edge_cn(self.graph[0])
            self.layer_ptr, self.layer_vns = _layer_arrays(h, plan)

    def decode(self, llr) -> DecodeResult:
        x = np.ascontiguousarray(llr, dtype=np.float64)
        if x.shape != (self.h.n,):
            raise ValueError(f"frame length {x.size} does not match N={self.h.n}")
        bits = np.zeros(self.h.n, np.int64)
        post = x.copy()
        cn_ptr, edge_vn, vn_ptr, vn_edges = self.graph
        if self.algo == "bp":
            it, ok = _bp_one(cn_ptr, edge_vn, vn_ptr, vn_edges, x, self.i_max, self.early_stop,
                             bits, post)
        else:
            it, ok = _lnms_one(cn_ptr, edge_vn, self.edge_cn, vn_ptr, vn_edges, self.layer_ptr,
                               self.layer_vns, x, self.factor, self.i_max, self.early_stop,
                               bits, post)
        return DecodeResult(bits, int(it), bool(ok), post)


def decode_flooding(h: ParityCheckMatrix, spec: DecoderSpec, frame) -> DecodeResult:
    return FloodingDecoder(h, spec).decode(frame)


def decode_layered(h: ParityCheckMatrix, plan: LayerPlan, spec: DecoderSpec, frame) -> DecodeResult:
    return LayeredDecoder(h, plan, spec).decode(frame)


def decode_float_baseline(h: ParityCheckMatrix, frame, algo: str = "bp", i_max: int = 50,
                          factor: float = 1.0, plan: LayerPlan | None = None) -> DecodeResult:
    return FloatDecoder(h, algo, i_max, factor, plan).decode(frame)
