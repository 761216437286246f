"""Independent brute-force references used by the tests."""
import itertools

import numpy as np

from mimq.quantizer import ConditionalPmf


def _f(k, q_m):
    half = 1 << (q_m - 1)
    return half - k if k < half else half - 1 - k


def _f_inv(v, q_m):
    half = 1 << (q_m - 1)
    return half - v if v > 0 else half - 1 - v


def _parity_patterns(n, parity):
    for bits in itertools.product((0, 1), repeat=n):
        if sum(bits) % 2 == parity:
            yield bits


def cn_ms_exhaustive(pr: ConditionalPmf, rho: dict, q_m: int) -> ConditionalPmf:
    """C2V pmf of min-sum by enumerating every input tuple and every bit pattern
    consistent with the check."""
    size = pr.size
    out = np.zeros((2, size))
    p = (pr.p0, pr.p1)
    for dc, w in rho.items():
        w = float(w)
        n = dc - 1
        for x in (0, 1):
            pats = list(_parity_patterns(n, x))
            for rs in itertools.product(range(size), repeat=n):
                fs = [_f(r, q_m) for r in rs]
                sign = -1 if sum(v < 0 for v in fs) % 2 else 1
                s = _f_inv(sign * min(abs(v) for v in fs), q_m)
                prob = sum(np.prod([p[b][r] for b, r in zip(bits, rs)]) for bits in pats)
                out[x, s] += w * prob / len(pats)
    return ConditionalPmf(out[0], out[1])


def cn_bp_inner_exhaustive(pr: ConditionalPmf, phi_c, rho: dict) -> dict:
    """Pmf of ``(Π sgn φ_c) Σ|φ_c|`` over the ``d_c-1`` other inputs, as
    ``{value: (P(.|0), P(.|1))}``."""
    size = pr.size
    p = (pr.p0, pr.p1)
    out = {}
    for dc, w in rho.items():
        w = float(w)
        n = dc - 1
        for x in (0, 1):
            pats = list(_parity_patterns(n, x))
            for rs in itertools.product(range(size), repeat=n):
                vals = [int(phi_c[r]) for r in rs]
                sign = -1 if sum(v < 0 for v in vals) % 2 else 1
                a = sign * sum(abs(v) for v in vals)
                prob = sum(np.prod([p[b][r] for b, r in zip(bits, rs)]) for bits in pats)
                cur = out.setdefault(a, [0.0, 0.0])
                cur[x] += w * prob / len(pats)
    return out


def vn_inner_exhaustive(ps: ConditionalPmf, pl: ConditionalPmf, phi_v, phi_ch, theta: dict,
                        decision: bool = False) -> dict:
    """Pmf of ``φ_ch(L) + Σ φ_v(S)`` over ``j-1`` (``j`` for decisions) C2V inputs."""
    out = {}
    for dv, w in theta.items():
        w = float(w)
        n = dv if decision else dv - 1
        for x, (pl_x, ps_x) in enumerate(((pl.p0, ps.p0), (pl.p1, ps.p1))):
            for l in range(pl.size):
                for ss in itertools.product(range(ps.size), repeat=n):
                    b = int(phi_ch[l]) + sum(int(phi_v[s]) for s in ss)
                    prob = pl_x[l] * np.prod([ps_x[s] for s in ss])
                    cur = out.setdefault(b, [0.0, 0.0])
                    cur[x] += w * prob
    return out


def minsum_reference(h_rows, h_cols, sym, luts, q_m, vmax):
    """Plain-python flooding QMS decoder, one iteration per LUT bundle."""
    edges = [(c, v) for c, row in enumerate(h_rows) for v in row]
    v2c = {e: int(sym[e[1]]) for e in edges}
    n = len(h_cols)
    bits = np.zeros(n, dtype=int)
    for t, b in enumerate(luts, 1):
        c2v = {}
        for c, row in enumerate(h_rows):
            for v in row:
                fs = [_f(v2c[(c, u)], q_m) for u in row if u != v]
                sign = -1 if sum(x < 0 for x in fs) % 2 else 1
                c2v[(c, v)] = _f_inv(sign * min(abs(x) for x in fs), q_m)
        for v in range(n):
            tot = int(b.phi_ch[sym[v]]) + sum(int(b.phi_v[c2v[(c, v)]]) for c in h_cols[v])
            assert abs(tot) <= vmax
            bits[v] = 0 if tot >= b.gamma_e else 1
            for c in h_cols[v]:
                x = tot - int(b.phi_v[c2v[(c, v)]])
                v2c[(c, v)] = int(np.sum(b.gamma_v.gammas > x))
        if all(sum(bits[u] for u in row) % 2 == 0 for row in h_rows):
            return bits, t, True
    return bits, len(luts), False


def bitwise_map(h_dense, llr):
    """Exact bitwise MAP LLRs by enumerating all codewords."""
    m, n = h_dense.shape
    num = np.full(n, -np.inf)
    den = np.full(n, -np.inf)
    for word in itertools.product((0, 1), repeat=n):
        w = np.array(word)
        if ((h_dense @ w) % 2).any():
            continue
        ll = float(np.sum(np.where(w == 0, 0.5 * llr, -0.5 * llr)))
        num = np.where(w == 0, np.logaddexp(num, ll), num)
        den = np.where(w == 1, np.logaddexp(den, ll), den)
    return num - den
