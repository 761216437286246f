"""Versioned JSON serialization of :class:`DecoderSpec` (schema ``mimq-lut/1``).

LUT entries are integers written exactly; floats use the shortest repr that
round-trips. Keys are sorted and scalar arrays sit on one line, so equal specs
give identical bytes and golden fixtures stay hand-editable.
"""
from __future__ import annotations

import io
import json
import os
import re

import numpy as np

from .design import DecoderSpec, IterationLuts, IterationStats, lut_violations
from .quantizer import ConditionalPmf, Dmc, ThresholdSet, dmc_from_thresholds

SCHEMA = "mimq-lut/1"


class LutFormatError(ValueError):
    """A LUT file that cannot be parsed or violates an invariant."""


def _ints(a) -> list[int]:
    return [int(x) for x in np.asarray(a).tolist()]


def _bundle_to_obj(b: IterationLuts) -> dict:
    o = {"phi_v": _ints(b.phi_v), "phi_ch": _ints(b.phi_ch),
         "gamma_v": _ints(b.gamma_v.gammas), "gamma_e": [int(b.gamma_e)]}
    if b.phi_c is not None:
        o["phi_c"] = _ints(b.phi_c)
        o["gamma_c"] = _ints(b.gamma_c.gammas)
    return o


def spec_to_obj(spec: DecoderSpec) -> dict:
    obj = {
        "schema": SCHEMA,
        "family": spec.family,
        "q_m": spec.q_m, "q_c": spec.q_c, "q_v": spec.q_v,
        "i_max": spec.i_max,
        "sigma_d": float(spec.sigma_d),
        "gamma_ch_llr": [float(x) for x in spec.gamma_ch],
        "channel_pmf": {"p0": spec.channel.pmf.p0.tolist(), "p1": spec.channel.pmf.p1.tolist()},
        "iterations": [_bundle_to_obj(b) for b in spec.iterations],
        "metadata": spec.metadata,
    }
    if spec.layers:
        obj["layers"] = {f"{t},{h}": _bundle_to_obj(b) for (t, h), b in spec.layers.items()}
    if spec.trace:
        obj["trace"] = [{"mi_s": s.mi_s, "mi_r": s.mi_r, "pe": s.pe} for s in spec.trace]
    return obj


_FLAT_LIST = re.compile(r"\[\s*([^\[\]{}]*?)\s*\]", re.S)


def dumps(spec: DecoderSpec) -> str:
    text = json.dumps(spec_to_obj(spec), sort_keys=True, indent=1, ensure_ascii=False,
                      allow_nan=False)
    return _FLAT_LIST.sub(lambda m: "[" + ", ".join(p.strip() for p in m.group(1).split(",")) + "]"
                          if m.group(1).strip() else "[]", text) + "\n"


def write_spec(spec: DecoderSpec, sink) -> int:
    """Write ``spec`` to a path or text stream; returns the number of bytes written."""
    data = dumps(spec).encode("utf-8")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    elif isinstance(sink, io.TextIOBase):
        sink.write(data.decode("utf-8"))
    else:
        sink.write(data)
    return len(data)


def _int_list(o, key, where, n):
    v = o.get(key)
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise LutFormatError(f"{where}: {key} must be a list of integers")
    if len(v) != n:
        raise LutFormatError(f"{where}: length mismatch for {key} ({len(v)} != {n})")
    return np.array(v, dtype=np.int64)


def _bundle_from_obj(o, where, family, q_m, q_c):
    if not isinstance(o, dict):
        raise LutFormatError(f"{where}: bundle must be an object")
    k = 1 << q_m
    phi_v = _int_list(o, "phi_v", where, k)
    phi_ch = _int_list(o, "phi_ch", where, k)
    gv = _int_list(o, "gamma_v", where, k - 1)
    ge = _int_list(o, "gamma_e", where, 1)
    if (np.diff(gv) >= 0).any():
        raise LutFormatError(f"{where}: gamma_v not monotone")
    phi_c = gamma_c = None
    if family == "QBP":
        phi_c = _int_list(o, "phi_c", where, k)
        gc = _int_list(o, "gamma_c", where, k - 1)
        try:
            gamma_c = ThresholdSet(gc, "sign-major")
        except ValueError:
            raise LutFormatError(f"{where}: gamma_c not monotone") from None
    elif "phi_c" in o or "gamma_c" in o:
        raise LutFormatError(f"{where}: phi_c/gamma_c only belong to QBP")
    return IterationLuts(phi_v, phi_ch, ThresholdSet(gv), int(ge[0]), phi_c, gamma_c)


def _channel(obj, q_m, sigma):
    g = obj.get("gamma_ch_llr")
    if not isinstance(g, list) or not all(isinstance(x, (int, float)) for x in g):
        raise LutFormatError("gamma_ch_llr must be a list of numbers")
    if len(g) != (1 << q_m) - 1:
        raise LutFormatError(f"length mismatch for gamma_ch_llr ({len(g)} != {(1 << q_m) - 1})")
    t = np.array(g, dtype=np.float64)
    if (np.diff(t) >= 0).any():
        raise LutFormatError("gamma_ch_llr not monotone")
    pmf = obj.get("channel_pmf")
    if pmf is None:
        return dmc_from_thresholds(t, sigma)
    try:
        return Dmc(ConditionalPmf(np.array(pmf["p0"], float), np.array(pmf["p1"], float)), t, sigma)
    except (KeyError, TypeError, ValueError) as exc:
        raise LutFormatError(f"invalid channel_pmf: {exc}") from None


def spec_from_obj(obj) -> DecoderSpec:
    if not isinstance(obj, dict):
        raise LutFormatError("top level must be an object")
    if obj.get("schema") != SCHEMA:
        raise LutFormatError(f"unknown schema {obj.get('schema')!r}")
    family = obj.get("family")
    if family not in ("QBP", "QMS", "LQMS"):
        raise LutFormatError(f"unknown family {family!r}")
    try:
        q_m, q_c, q_v, i_max = (int(obj[k]) for k in ("q_m", "q_c", "q_v", "i_max"))
        sigma = float(obj["sigma_d"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LutFormatError(f"missing or invalid header field: {exc}") from None
    if not (1 <= q_m <= 8 and q_c >= q_m and q_v >= q_m and sigma > 0):
        raise LutFormatError("invalid bit widths or sigma_d")
    its = obj.get("iterations")
    if not isinstance(its, list):
        raise LutFormatError("iterations must be a list")
    if len(its) != i_max:
        raise LutFormatError(f"length mismatch: i_max={i_max} but {len(its)} iterations")
    bundles = [_bundle_from_obj(o, f"iteration {t}", family, q_m, q_c) for t, o in enumerate(its, 1)]
    layers = None
    if obj.get("layers"):
        layers = {}
        for key, o in obj["layers"].items():
            try:
                t, h = (int(x) for x in key.split(","))
            except ValueError:
                raise LutFormatError(f"bad layer key {key!r}") from None
            layers[(t, h)] = _bundle_from_obj(o, f"layer ({key})", family, q_m, q_c)
    trace = [IterationStats(float(s["mi_s"]), float(s["mi_r"]), float(s["pe"]))
             for s in obj.get("trace", [])]
    try:
        spec = DecoderSpec(family, q_m, q_c, q_v, sigma, _channel(obj, q_m, sigma), bundles,
                           dict(obj.get("metadata") or {}), layers=layers, trace=trace)
    except ValueError as exc:
        raise LutFormatError(str(exc)) from None
    bad = lut_violations(spec, odd_symmetry=False)
    if bad:
        raise LutFormatError("; ".join(bad))
    return spec


def loads(text: str) -> DecoderSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LutFormatError(f"parse error: {exc}") from None
    return spec_from_obj(obj)


def read_spec(source) -> DecoderSpec:
    """Load and validate a LUT file from a path or a readable stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LutFormatError(f"parse error: {exc}") from None
    return loads(data)
