"""Layered MIM density evolution for vertical-layered min-sum decoders.

Layer ``h`` at iteration ``t`` sees V2C messages from layers already updated in
this iteration and from the remaining layers of the previous one. The
layer-specific design keeps one LUT bundle per ``(t, h)``; the iteration-specific
design averages the layer C2V pmfs into one bundle per iteration and re-runs the
layer sweep with it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .code import DegreeDistribution
from .design import (
    DecoderSpec,
    IterationLuts,
    IterationStats,
    build_phi_v_ch,
    cn_evolve_ms,
    vn_evolve,
    vn_inner,
)
from .quantizer import ConditionalPmf, Dmc, ThresholdSet, group_pmf, mutual_information, quantize_awgn_channel


@dataclass(frozen=True)
class LayeredState:
    """V2C pmfs ``P_{R|X}^{(t,h)}`` of every layer after iteration ``t``."""

    pr_by_layer: tuple
    t: int = 0
    nb: int = 0

    def __post_init__(self):
        layers = tuple(self.pr_by_layer)
        if not layers:
            raise ValueError("at least one layer required")
        if self.nb and self.nb != len(layers):
            raise ValueError("nb does not match the number of layer pmfs")
        for p in layers:
            if not isinstance(p, ConditionalPmf):
                raise TypeError("layer pmfs must be ConditionalPmf")
        object.__setattr__(self, "pr_by_layer", layers)
        object.__setattr__(self, "nb", len(layers))

    @classmethod
    def initial(cls, pl: ConditionalPmf, nb: int) -> "LayeredState":
        return cls((pl,) * nb, 0, nb)

    def mean_mi(self) -> float:
        return float(np.mean([mutual_information(p) for p in self.pr_by_layer]))


@dataclass(frozen=True)
class LayerStep:
    """Outcome of one layer update: C2V pmf, the LUTs used, V2C pmf and the
    hard-decision error probability of the layer."""

    ps: ConditionalPmf
    luts: IterationLuts
    pr: ConditionalPmf
    pe: float


def expected_v2c_pmf(state: LayeredState, prev_state: LayeredState, h: int) -> ConditionalPmf:
    """Uniform average of the freshest V2C pmfs of all layers other than ``h``.

    ``state`` holds iteration-``t`` pmfs for layers ``1..h-1``; ``prev_state``
    holds iteration ``t-1`` pmfs. ``h`` is 1-based.
    """
    nb = prev_state.nb
    if nb == 1:
        raise ValueError("single layer degenerates to flooding")
    if state.nb != nb:
        raise ValueError("states disagree on the layer count")
    if not 1 <= h <= nb:
        raise ValueError(f"layer {h} outside 1..{nb}")
    terms = list(state.pr_by_layer[:h - 1]) + list(prev_state.pr_by_layer[h:])
    return ConditionalPmf.average(terms)


def apply_thresholds(pb: ConditionalPmf, values: np.ndarray, gammas: ThresholdSet) -> ConditionalPmf:
    """Quantize an inner pmf over descending consecutive integers with fixed thresholds."""
    top = int(values[0])
    ends = np.concatenate((top - np.asarray(gammas.gammas, dtype=np.int64), [values.size - 1]))
    return group_pmf(pb, ends)


def _decision_error(ps, pl, luts, dd, q_v):
    values, pb = vn_inner(ps, pl, luts.phi_v, luts.phi_ch, dd, q_v, decision=True)
    pd = apply_thresholds(pb, values, ThresholdSet(np.array([luts.gamma_e])))
    return 0.5 * (float(pd.p0[1]) + float(pd.p1[0]))


def layered_iteration(state: LayeredState, prev_state: LayeredState, h: int,
                      dd: DegreeDistribution, pl: ConditionalPmf, q_m: int, q_v: int,
                      luts: IterationLuts | None = None) -> LayerStep:
    """Update layer ``h``: min-sum CN evolution on the expected V2C pmf, then the
    VN step with freshly designed LUTs (``luts=None``) or the supplied ones."""
    if prev_state.nb == 1:
        pr_in = prev_state.pr_by_layer[0]
    else:
        pr_in = expected_v2c_pmf(state, prev_state, h)
    ps = cn_evolve_ms(pr_in, dd, q_m)
    if luts is None:
        phi_v, phi_ch = build_phi_v_ch(ps, pl, q_v, dd.dv_max)
        msg = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "message")
        dec = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "decision")
        luts = IterationLuts(phi_v, phi_ch, msg.thresholds, dec.gamma_e)
        return LayerStep(ps, luts, msg.pr, dec.pe)
    values, pb = vn_inner(ps, pl, luts.phi_v, luts.phi_ch, dd, q_v)
    pr = apply_thresholds(pb, values, luts.gamma_v)
    return LayerStep(ps, luts, pr, _decision_error(ps, pl, luts, dd, q_v))


def _sweep(prev: LayeredState, dd, pl, q_m, q_v, luts=None):
    cur = list(prev.pr_by_layer)
    steps = []
    for h in range(1, prev.nb + 1):
        step = layered_iteration(LayeredState(tuple(cur), prev.t + 1), prev, h, dd, pl, q_m, q_v, luts)
        cur[h - 1] = step.pr
        steps.append(step)
    return LayeredState(tuple(cur), prev.t + 1), steps


def _stats(steps) -> IterationStats:
    return IterationStats(float(np.mean([mutual_information(s.ps) for s in steps])),
                          float(np.mean([mutual_information(s.pr) for s in steps])),
                          float(np.mean([s.pe for s in steps])))


def layer_specific_iterations(dd: DegreeDistribution, nb: int, channel: Dmc, q_m: int,
                              q_v: int) -> Iterator[tuple[list, IterationStats]]:
    """Endless generator of layer-specific iterations: per-layer LUTs and
    layer-averaged statistics."""
    prev = LayeredState.initial(channel.pmf, nb)
    while True:
        prev, steps = _sweep(prev, dd, channel.pmf, q_m, q_v)
        yield [s.luts for s in steps], _stats(steps)


def iteration_specific_iterations(dd: DegreeDistribution, nb: int, channel: Dmc, q_m: int,
                                  q_v: int) -> Iterator[tuple[IterationLuts, IterationStats]]:
    """Endless generator of iteration-specific layered iterations.

    Each iteration runs the layer-specific sweep to obtain every layer's C2V pmf,
    designs one LUT set from their average and sweeps again with it.
    """
    pl = channel.pmf
    prev = LayeredState.initial(pl, nb)
    while True:
        _, first = _sweep(prev, dd, pl, q_m, q_v)
        ps = ConditionalPmf.average([s.ps for s in first])
        phi_v, phi_ch = build_phi_v_ch(ps, pl, q_v, dd.dv_max)
        msg = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "message")
        dec = vn_evolve(ps, pl, phi_v, phi_ch, dd, q_m, q_v, "decision")
        luts = IterationLuts(phi_v, phi_ch, msg.thresholds, dec.gamma_e)
        prev, steps = _sweep(prev, dd, pl, q_m, q_v, luts)
        yield luts, _stats(steps)


@dataclass
class LayerSpecificDesign:
    """Result of the layer-specific design. ``luts`` maps ``(t, h)`` (1-based) to
    a bundle unless the bundles were streamed to a callback."""

    q_m: int
    q_v: int
    nb: int
    sigma_d: float
    channel: Dmc
    luts: dict | None
    trace: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_spec(self) -> DecoderSpec:
        """DecoderSpec carrying every layer bundle; ``iterations`` holds the layer-1
        bundles so that the per-iteration view stays well formed."""
        if self.luts is None:
            raise ValueError("bundles were streamed; nothing to convert")
        i_max = max(t for t, _ in self.luts)
        its = [self.luts[(t, 1)] for t in range(1, i_max + 1)]
        meta = dict(self.metadata, schedule="layered", layer_mode="layer-specific", nb=self.nb)
        return DecoderSpec("LQMS", self.q_m, self.q_m, self.q_v, self.sigma_d, self.channel,
                           its, meta, layers=dict(self.luts), trace=list(self.trace))


def _meta(dd, nb):
    return {"rho": {str(k): str(v) for k, v in dd.rho.items()},
            "theta": {str(k): str(v) for k, v in dd.theta.items()},
            "schedule": "layered", "nb": nb}


def design_layer_specific(dd: DegreeDistribution, nb: int, sigma_d: float, q_m: int, q_v: int,
                          i_max: int, channel: Dmc | None = None,
                          on_layer: Callable[[int, int, IterationLuts], None] | None = None,
                          ) -> LayerSpecificDesign:
    """Design one LUT bundle per layer and iteration.

    With ``on_layer`` each bundle is handed to the callback as ``(t, h, luts)``
    and not kept in memory.
    """
    if i_max < 1:
        raise ValueError("i_max must be at least 1")
    if channel is None:
        channel = quantize_awgn_channel(sigma_d, q_m)
    store = None if on_layer is not None else {}
    trace = []
    gen = layer_specific_iterations(dd, nb, channel, q_m, q_v)
    for t in range(1, i_max + 1):
        bundles, st = next(gen)
        for h, luts in enumerate(bundles, 1):
            if store is None:
                on_layer(t, h, luts)
            else:
                store[(t, h)] = luts
        trace.append(st)
    return LayerSpecificDesign(q_m, q_v, nb, float(sigma_d), channel, store, trace,
                               dict(_meta(dd, nb), layer_mode="layer-specific"))


def design_iteration_specific(dd: DegreeDistribution, nb: int, sigma_d: float, q_m: int, q_v: int,
                              i_max: int, channel: Dmc | None = None,
                              metadata: dict | None = None) -> DecoderSpec:
    """Design an LQMS decoder with one LUT set per iteration."""
    if i_max < 1:
        raise ValueError("i_max must be at least 1")
    if channel is None:
        channel = quantize_awgn_channel(sigma_d, q_m)
    its, trace = [], []
    gen = iteration_specific_iterations(dd, nb, channel, q_m, q_v)
    for _ in range(i_max):
        luts, st = next(gen)
        its.append(luts)
        trace.append(st)
    meta = dict(_meta(dd, nb), layer_mode="iteration-specific")
    meta.update(metadata or {})
    return DecoderSpec("LQMS", q_m, q_m, q_v, float(sigma_d), channel, its, meta, trace=trace)
