"""Acceptance criteria 1-10. Each test prints one summary line at the end of the run."""
import itertools
import json
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from mimq.code import DegreeDistribution, LayerPlan, QcBaseMatrix, base_degree_distributions, expand_qc
from mimq.decoder import FloatDecoder, FloodingDecoder, LayeredDecoder, decode_flooding, decode_layered, quantize_llr
from mimq.design import (
    build_phi_c,
    build_phi_v_ch,
    cn_evolve_bp,
    cn_evolve_ms,
    design_flooding,
    find_sigma_d,
    lut_violations,
    vn_evolve,
)
from mimq.layered import design_iteration_specific, design_layer_specific
from mimq.profiles import PROFILE_NAMES, get_profile
from mimq.quantizer import ConditionalPmf, optimal_sdq, quantize_awgn_channel
from mimq.sim import ChannelConfig, frame_rng, random_codeword, run_fer

from oracles import cn_bp_inner_exhaustive, cn_ms_exhaustive, vn_inner_exhaustive

FIX = Path(__file__).parent / "fixtures"
R12 = "802.11n-r12"

# design noise levels of the published LQMS/QMS tables, (3,12) and (4,12)
TABLE_SIGMA = {
    "802.11n-r12": {"LQMS": (0.8362, 0.8750), "QMS": (0.8379, 0.8761)},
    "802.11n-r23": {"LQMS": (0.6889, 0.7112), "QMS": (0.6914, 0.7112)},
    "802.11n-r56": {"LQMS": (0.5413, 0.5502), "QMS": (0.5420, 0.5511)},
    "5g-n560": {"LQMS": (0.9821, 1.0042), "QMS": (0.9837, 1.0115)},
    "802.3ca": {"LQMS": (0.5528, 0.5599), "QMS": (0.5529, 0.5599)},
}


def fixture(name):
    return json.loads((FIX / f"{name}.json").read_text())


def random_sorted_pmf(rng, n):
    p0 = rng.random(n) + 1e-3
    p1 = rng.random(n) + 1e-3
    p0, p1 = p0 / p0.sum(), p1 / p1.sum()
    order = np.argsort(-np.log(p0 / p1), kind="stable")
    return ConditionalPmf(p0[order], p1[order])


def mi(p0, p1):
    tot = 0.0
    for a, b in zip(p0, p1):
        m = 0.5 * (a + b)
        for p in (a, b):
            if p > 0:
                tot += 0.5 * p * np.log2(p / m)
    return tot


def brute_mi(pmf, k):
    n = pmf.size
    best = -1.0
    for cuts in itertools.combinations(range(1, n), k - 1):
        b = (0,) + cuts + (n,)
        q0 = [pmf.p0[b[i]:b[i + 1]].sum() for i in range(k)]
        q1 = [pmf.p1[b[i]:b[i + 1]].sum() for i in range(k)]
        best = max(best, mi(q0, q1))
    return best


# ------------------------------------------------------------------ 1


@pytest.mark.acceptance(1, "SDQ equals exhaustive partition search")
def test_criterion_01_quantizer_oracle():
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(200):
        q_m = int(rng.integers(1, 3))
        n = int(rng.integers(1 << q_m, 17))
        cases.append((random_sorted_pmf(rng, n), q_m))
    optimal_sdq(cases[0][0], cases[0][1])  # warm-up
    t0 = time.perf_counter()
    got = [optimal_sdq(p, q).mi for p, q in cases]
    elapsed = time.perf_counter() - t0
    worst = max(abs(g - brute_mi(p, 1 << q)) for g, (p, q) in zip(got, cases))
    assert worst <= 1e-12, f"max MI gap {worst:.3e}"
    assert elapsed < 5.0, f"{elapsed:.2f} s"


# ------------------------------------------------------------------ 2


@pytest.mark.acceptance(2, "channel quantizer thresholds within 0.02 of the published sets")
def test_criterion_02_channel_quantizer():
    misses = []
    for name, q_m in (("appendix_qbp3", 3), ("appendix_qms3", 3), ("appendix_qms4", 4)):
        ref = fixture(name)
        t0 = time.perf_counter()
        ch = quantize_awgn_channel(ref["sigma_d"], q_m)
        dt = time.perf_counter() - t0
        diff = np.abs(ch.llr_thresholds - np.array(ref["gamma_ch_llr"]))
        if diff.max() > 0.02 or dt >= 1.0:
            misses.append(f"sigma={ref['sigma_d']} q_m={q_m}: max diff {diff.max():.3f}, {dt:.2f} s")
    assert not misses, "; ".join(misses)


# ------------------------------------------------------------------ 3


@pytest.mark.acceptance(3, "QBP iteration-1 LUT rows match the published rows within 1")
def test_criterion_03_qbp_rows():
    ref = fixture("appendix_qbp3")
    spec = design_flooding(get_profile(R12).dd, ref["sigma_d"], 3, 12, 12, 1, "QBP")
    b, r = spec.iterations[0], ref["iterations"][0]
    drift = {
        "phi_c": np.abs(b.phi_c - r["phi_c"]).max(),
        "phi_v": np.abs(b.phi_v - r["phi_v"]).max(),
        "gamma_v": np.abs(b.gamma_v.gammas - r["gamma_v"]).max(),
    }
    bad = {k: int(v) for k, v in drift.items() if v > 1}
    assert not bad, f"drift {bad}"
    assert b.phi_c[:4].tolist() == [4, 26, 85, 255]


# ------------------------------------------------------------------ 4

_SIGMA = {}


def designed_sigma(q_m):
    """σ_d of the (q_m, 12) QMS decoder with I_max = 50, with its design time."""
    if q_m not in _SIGMA:
        t0 = time.perf_counter()
        s = find_sigma_d(get_profile(R12).dd, q_m, q_m, 12, 50, "QMS")
        _SIGMA[q_m] = (s, time.perf_counter() - t0)
    return _SIGMA[q_m]


@pytest.mark.slow
@pytest.mark.acceptance(4, "find_sigma_d within 0.02 of 0.8501 / 0.8998")
def test_criterion_04_sigma_d():
    msgs = []
    for q_m, ref in ((3, 0.8501), (4, 0.8998)):
        s, dt = designed_sigma(q_m)
        if abs(s - ref) > 0.02 or dt >= 120:
            msgs.append(f"q_m={q_m}: sigma_d={s:.4f} (ref {ref}), {dt:.0f} s")
    assert not msgs, "; ".join(msgs)


# ------------------------------------------------------------------ 5


def _profiles(degrees, rng):
    for r in range(1, len(degrees) + 1):
        for sub in itertools.combinations(degrees, r):
            w = rng.integers(1, 6, len(sub))
            yield {d: Fraction(int(x), int(w.sum())) for d, x in zip(sub, w)}


def _succ_pos(v, m):
    return v if v >= 0 else 2 * m + 1 + v


@pytest.mark.acceptance(5, "DE steps equal exhaustive enumeration on small profiles")
def test_criterion_05_de_oracle():
    rng = np.random.default_rng(55)
    worst = 0.0
    for q_m in (1, 2):
        for rho in _profiles((2, 3, 4), rng):
            dd = DegreeDistribution(rho, {3: 1})
            pr = random_sorted_pmf(rng, 1 << q_m)
            ms = cn_evolve_ms(pr, dd, q_m)
            ref = cn_ms_exhaustive(pr, rho, q_m)
            worst = max(worst, np.abs(ms.p0 - ref.p0).max(), np.abs(ms.p1 - ref.p1).max())
            # QBP: exhaustive inner sums pushed through the designed ≻ quantizer
            phi_c = build_phi_c(pr, 8, dd.dc_max)
            bp = cn_evolve_bp(pr, phi_c, dd, q_m, 8)
            g = bp.gamma_c.gammas
            m = 127
            out = np.zeros((2, 1 << q_m))
            for a, (x0, x1) in cn_bp_inner_exhaustive(pr, phi_c, rho).items():
                k = sum(_succ_pos(int(t), m) < _succ_pos(a, m) for t in g)
                out[0, k] += x0
                out[1, k] += x1
            worst = max(worst, np.abs(bp.ps.p0 - out[0]).max(), np.abs(bp.ps.p1 - out[1]).max())
        for theta in _profiles((1, 2, 3), rng):
            dd = DegreeDistribution({4: 1}, theta)
            ps = random_sorted_pmf(rng, 1 << q_m)
            pl = random_sorted_pmf(rng, 1 << q_m)
            phi_v, phi_ch = build_phi_v_ch(ps, pl, 8, dd.dv_max)
            for mode in ("message", "decision"):
                res = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, 8, mode)
                g = res.thresholds.gammas
                out = np.zeros((2, g.size + 1))
                for b, (x0, x1) in vn_inner_exhaustive(ps, pl, phi_v, phi_ch, theta,
                                                        mode == "decision").items():
                    k = int(np.sum(g > b))
                    out[0, k] += x0
                    out[1, k] += x1
                worst = max(worst, np.abs(res.pr.p0 - out[0]).max(), np.abs(res.pr.p1 - out[1]).max())
                if mode == "decision":
                    worst = max(worst, abs(res.pe - 0.5 * (out[0, 1] + out[1, 0])))
    assert worst <= 1e-12, f"max pmf gap {worst:.3e}"


# ------------------------------------------------------------------ 6

TOY = QcBaseMatrix.from_array([[0, 3, 5, -1, 1, 0, -1, -1],
                               [2, -1, 0, 4, -1, 0, 0, -1],
                               [-1, 1, 6, 2, 3, -1, 0, 0],
                               [5, 0, -1, 3, -1, -1, -1, 0]], 7)


@pytest.mark.acceptance(6, "single-layer design and decoding collapse to flooding")
def test_criterion_06_layered_collapse():
    dd = get_profile(R12).dd
    lay = design_iteration_specific(dd, 1, 0.85, 3, 12, 20)
    flo = design_flooding(dd, 0.85, 3, 3, 12, 20, "QMS")
    assert all(a == b for a, b in zip(lay.iterations, flo.iterations)), "designs differ"
    assert [(s.mi_s, s.mi_r, s.pe) for s in lay.trace] == [(s.mi_s, s.mi_r, s.pe) for s in flo.trace]

    h = expand_qc(TOY)
    tdd = base_degree_distributions(TOY)
    tl = design_iteration_specific(tdd, 1, 0.75, 3, 10, 10)
    tf = design_flooding(tdd, 0.75, 3, 3, 10, 10, "QMS")
    one = LayerPlan((np.arange(h.n),))
    dl, df = LayeredDecoder(h, one, tl), FloodingDecoder(h, tf)
    mismatches = 0
    for i in range(1000):
        rng = frame_rng(66, i)
        cw = random_codeword(h, rng)
        llr = 2 * (1 - 2.0 * cw + 0.85 * rng.standard_normal(h.n)) / 0.85**2
        sym = quantize_llr(llr, tf.gamma_ch)
        a, b = dl.decode(sym), df.decode(sym)
        mismatches += not ((a.bits == b.bits).all() and a.iterations_used == b.iterations_used
                           and a.converged == b.converged)
    assert mismatches == 0, f"{mismatches} of 1000 frames differ"
    assert (decode_layered(h, one, tl, sym).bits == decode_flooding(h, tf, sym).bits).all()


# ------------------------------------------------------------------ 7


@pytest.mark.slow
@pytest.mark.acceptance(7, "layered DE converges in <=0.6x flooding iterations; layer- vs iteration-specific MI within 0.01")
def test_criterion_07_layered_de():
    p = get_profile(R12)
    sigma, _ = designed_sigma(3)
    flo = design_flooding(p.dd, sigma, 3, 3, 12, 50, "QMS")
    conv = [t for t, s in enumerate(flo.trace, 1) if s.pe < 1e-4]
    t_flood = conv[0] if conv else len(flo.trace)
    target = flo.trace[t_flood - 1].mi_r
    it_spec = design_iteration_specific(p.dd, p.nb, sigma, 3, 12, 50)
    reach = [t for t, s in enumerate(it_spec.trace, 1) if s.mi_r >= target]
    assert reach, "layered DE never reaches the flooding MI"
    assert reach[0] <= 0.6 * t_flood, f"layered {reach[0]} vs flooding {t_flood} iterations"
    lay_spec = design_layer_specific(p.dd, p.nb, sigma, 3, 12, t_flood)
    gap = max(abs(a.mi_r - b.mi_r) for a, b in zip(lay_spec.trace, it_spec.trace))
    assert gap <= 0.01, f"MI gap {gap:.4f}"


# ------------------------------------------------------------------ 8


@pytest.mark.slow
@pytest.mark.acceptance(8, "FER at 2.0 dB: 4-bit QMS < 3-bit QMS and within 3x of BP")
def test_criterion_08_fer_ordering():
    p = get_profile(R12)
    h = p.matrix()
    cfg = ChannelConfig("awgn", 2.0, p.rate, seed=8)
    fer = {}
    for key, dec in (("bp", FloatDecoder(h, "bp", 50)),
                     ("q4", FloodingDecoder(h, design_flooding(p.dd, designed_sigma(4)[0], 4, 4, 12, 50, "QMS"))),
                     ("q3", FloodingDecoder(h, design_flooding(p.dd, designed_sigma(3)[0], 3, 3, 12, 50, "QMS")))):
        rec = run_fer(h, dec, cfg, min_errors=300, max_frames=10**6)
        fer[key] = rec.fer
        print(f"{key}: {rec.frame_errors}/{rec.frames} FER={rec.fer:.3e} ({rec.elapsed:.0f} s)")
    assert fer["q4"] < fer["q3"], f"FER q4={fer['q4']:.3e} q3={fer['q3']:.3e}"
    assert fer["q4"] <= 3 * fer["bp"], f"FER q4={fer['q4']:.3e} bp={fer['bp']:.3e}"


# ------------------------------------------------------------------ 9


@pytest.mark.slow
@pytest.mark.acceptance(9, "5G n=560 at 3.0 dB: LQMS(I=15) mean iterations <= 0.6x QMS(I=30)")
def test_criterion_09_layered_speedup():
    p = get_profile("5g-n560")
    h = p.matrix()
    sig = TABLE_SIGMA["5g-n560"]
    lq = design_iteration_specific(p.dd, p.nb, sig["LQMS"][1], 4, 12, 15)
    fq = design_flooding(p.dd, sig["QMS"][1], 4, 4, 12, 30, "QMS")
    cfg = ChannelConfig("awgn", 3.0, p.rate, seed=9)
    kw = dict(min_errors=10**9, max_frames=2000, punctured=p.punctured)
    a = run_fer(h, LayeredDecoder(h, p.layer_plan(), lq), cfg, **kw)
    b = run_fer(h, FloodingDecoder(h, fq), cfg, **kw)
    print(f"LQMS mean iterations {a.mean_iterations:.3f}, QMS {b.mean_iterations:.3f}")
    assert a.frames == b.frames == 2000
    assert a.mean_iterations <= 0.6 * b.mean_iterations, \
        f"{a.mean_iterations:.2f} vs {b.mean_iterations:.2f}"


# ------------------------------------------------------------------ 10


@pytest.mark.slow
@pytest.mark.acceptance(10, "LUT invariants and decoder bit widths on every profile, width and schedule")
def test_criterion_10_invariants():
    t0 = time.perf_counter()
    problems = []
    for name in PROFILE_NAMES:
        p = get_profile(name)
        h = p.matrix() if p.base is not None else None
        for i, q_m in enumerate((3, 4)):
            specs = {
                "LQMS": design_iteration_specific(p.dd, p.nb, TABLE_SIGMA[name]["LQMS"][i], q_m, 12, 15),
                "QMS": design_flooding(p.dd, TABLE_SIGMA[name]["QMS"][i], q_m, q_m, 12, 30, "QMS"),
            }
            for fam, spec in specs.items():
                problems += [f"{name} {fam}{q_m}: {v}" for v in lut_violations(spec)]
                if h is None:
                    continue
                dec = (LayeredDecoder(h, p.layer_plan(), spec) if fam == "LQMS"
                       else FloodingDecoder(h, spec))
                cfg = ChannelConfig("awgn", 0.0, 0.5, seed=10)
                for k in range(20):
                    rng = frame_rng(10, k)
                    cw = random_codeword(h, rng)
                    s = spec.sigma_d * (0.9 + 0.02 * k)
                    llr = 2 * (1 - 2.0 * cw + s * rng.standard_normal(h.n)) / s**2
                    try:
                        dec.decode(quantize_llr(llr, spec.gamma_ch))
                    except OverflowError as exc:
                        problems.append(f"{name} {fam}{q_m}: {exc}")
                        break
    elapsed = time.perf_counter() - t0
    assert not problems, f"{len(problems)} violations, first: {problems[0]}"
    assert elapsed < 300, f"{elapsed:.0f} s"
