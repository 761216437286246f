import numpy as np
import pytest

from mimq.code import DegreeDistribution
from mimq.design import design_flooding, lut_violations
from mimq.layered import (
    LayeredState,
    apply_thresholds,
    design_iteration_specific,
    design_layer_specific,
    expected_v2c_pmf,
    layered_iteration,
)
from mimq.design import build_phi_v_ch, cn_evolve_ms, vn_evolve
from mimq.profiles import get_profile
from mimq.quantizer import ConditionalPmf, quantize_awgn_channel

DD = DegreeDistribution({6: 1}, {3: 1})


def pmf(a):
    a = np.asarray(a, float)
    a = a / a.sum()
    return ConditionalPmf(a, a[::-1].copy())


def test_expected_pmf_averages_fresh_and_stale_layers():
    cur = LayeredState((pmf([4, 2, 1, 1]), pmf([3, 3, 1, 1]), pmf([1, 1, 1, 1])))
    prev = LayeredState((pmf([1, 1, 1, 1]), pmf([2, 1, 1, 1]), pmf([5, 1, 1, 1])))
    got = expected_v2c_pmf(cur, prev, 2)
    ref = (cur.pr_by_layer[0].p0 + prev.pr_by_layer[2].p0) / 2
    assert np.allclose(got.p0, ref)


def test_expected_pmf_errors():
    one = LayeredState((pmf([1, 2]),))
    with pytest.raises(ValueError, match="degenerates to flooding"):
        expected_v2c_pmf(one, one, 1)
    two = LayeredState.initial(pmf([1, 2]), 2)
    with pytest.raises(ValueError):
        expected_v2c_pmf(two, two, 3)


def test_layered_state_validation():
    with pytest.raises(ValueError):
        LayeredState(())
    with pytest.raises(ValueError):
        LayeredState((pmf([1, 2]),), nb=2)


def test_apply_thresholds_reproduces_designed_quantizer():
    ch = quantize_awgn_channel(0.8, 3)
    ps = cn_evolve_ms(ch.pmf, DD, 3)
    phi_v, phi_ch = build_phi_v_ch(ps, ch.pmf, 10, 3)
    res = vn_evolve(ps, ch.pmf, phi_v, phi_ch, DD, 3, 10)
    again = apply_thresholds(res.pb, res.values, res.thresholds)
    assert np.allclose(again.p0, res.pr.p0, atol=1e-15)


def test_layered_iteration_with_fixed_luts_matches_design():
    ch = quantize_awgn_channel(0.8, 3)
    st = LayeredState.initial(ch.pmf, 4)
    designed = layered_iteration(st, st, 1, DD, ch.pmf, 3, 10)
    fixed = layered_iteration(st, st, 1, DD, ch.pmf, 3, 10, luts=designed.luts)
    assert np.allclose(fixed.pr.p0, designed.pr.p0, atol=1e-15)
    assert fixed.pe == pytest.approx(designed.pe, abs=1e-15)


def test_single_layer_collapses_to_flooding():
    ch = quantize_awgn_channel(0.85, 3)
    lay = design_iteration_specific(DD, 1, 0.85, 3, 10, 8, channel=ch)
    flo = design_flooding(DD, 0.85, 3, 3, 10, 8, "QMS", channel=ch)
    assert lay.family == "LQMS"
    assert all(a == b for a, b in zip(lay.iterations, flo.iterations))
    assert [s.mi_r for s in lay.trace] == [s.mi_r for s in flo.trace]


def test_layered_converges_faster_than_flooding():
    dd = get_profile("802.11n-r12").dd
    lay = design_iteration_specific(dd, 24, 0.84, 3, 12, 12)
    flo = design_flooding(dd, 0.84, 3, 3, 12, 12, "QMS")
    assert lay.trace[5].mi_r > flo.trace[5].mi_r
    assert lut_violations(lay) == []


def test_layer_specific_design_and_streaming():
    got = []
    d = design_layer_specific(DD, 3, 0.8, 2, 8, 2, on_layer=lambda t, h, l: got.append((t, h)))
    assert d.luts is None and got == [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]
    with pytest.raises(ValueError):
        d.to_spec()
    spec = design_layer_specific(DD, 3, 0.8, 2, 8, 2).to_spec()
    assert set(spec.layers) == set(got) and spec.i_max == 2
    assert spec.metadata["layer_mode"] == "layer-specific"
    assert lut_violations(spec) == []


def test_layer_specific_close_to_iteration_specific():
    a = design_layer_specific(DD, 4, 0.8, 3, 10, 6)
    b = design_iteration_specific(DD, 4, 0.8, 3, 10, 6)
    diff = [abs(x.mi_r - y.mi_r) for x, y in zip(a.trace, b.trace)]
    assert max(diff) <= 0.01
