"""Command-line front end: ``mimq design``, ``mimq simulate`` and ``mimq inspect``."""
from __future__ import annotations

import argparse
import os
import shlex
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

from .code import (
    CodeFormatError,
    DegreeDistribution,
    LayerPlan,
    ParityCheckMatrix,
    QcBaseMatrix,
    base_degree_distributions,
    degree_distributions,
    expand_qc,
    layer_partition,
    parse_alist,
    parse_qc_table,
)
from .decoder import FloatDecoder, FloodingDecoder, LayeredDecoder
from .design import DecoderSpec, design_flooding, find_sigma_d, lut_violations
from .layered import design_iteration_specific, design_layer_specific
from .lutio import LutFormatError, read_spec, write_spec
from .profiles import PROFILE_NAMES, get_profile
from .sim import CSV_COLUMNS, ChannelConfig, record_row, run_fer, write_csv


class CliError(Exception):
    """User-facing error; reported without a traceback."""


@dataclass
class CodeChoice:
    """A resolved ``--profile``/``--code`` argument."""

    name: str
    dd: DegreeDistribution
    h: ParityCheckMatrix | None
    base: QcBaseMatrix | None
    nb: int | None
    rate: float | None
    punctured: int
    lnms_factor: float | None

    def layer_plan(self) -> LayerPlan:
        if self.base is None or self.h is None:
            raise CliError("layer plan requires QC base matrix")
        return layer_partition(self.base, self.h)


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("mimq")
    except Exception:
        return "unknown"


def parse_inline_profile(text: str) -> DegreeDistribution:
    """Parse ``rho=7:0.81,8:0.19;theta=2:0.38,3:0.29,...`` (edge perspective)."""
    parts = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        key, _, body = chunk.partition("=")
        key = key.strip().lower()
        if key not in ("rho", "theta") or not body:
            raise CliError(f"cannot parse profile component {chunk!r}")
        d = {}
        for item in body.split(","):
            deg, _, frac = item.partition(":")
            try:
                d[int(deg)] = Fraction(frac.strip())
            except (ValueError, ZeroDivisionError):
                raise CliError(f"cannot parse degree entry {item!r}") from None
        parts[key] = d
    if set(parts) != {"rho", "theta"}:
        raise CliError("inline profile needs both rho= and theta=")
    return DegreeDistribution.from_fractions(parts["rho"], parts["theta"])


def resolve_code(args) -> CodeChoice:
    if getattr(args, "code", None):
        try:
            with open(args.code) as fh:
                text = fh.read()
        except OSError as exc:
            raise CliError(f"cannot read code file: {exc}") from None
        try:
            if args.code.endswith(".qc"):
                base = parse_qc_table(text)
                h = expand_qc(base)
                dd = base_degree_distributions(base)
                nb = base.nb
            else:
                base, h = None, parse_alist(text)
                dd = degree_distributions(h)
                nb = None
        except (CodeFormatError, ValueError) as exc:
            raise CliError(f"invalid code file: {exc}") from None
        punct = getattr(args, "punctured", None) or 0
        rate = (h.n - h.m) / (h.n - punct)
        return CodeChoice(os.path.basename(args.code), dd, h, base, nb, rate, punct, None)
    prof = getattr(args, "profile", None)
    if not prof:
        raise CliError("one of --profile or --code is required")
    if prof in PROFILE_NAMES:
        p = get_profile(prof)
        h = p.matrix() if p.base is not None else None
        punct = p.punctured if getattr(args, "punctured", None) is None else args.punctured
        return CodeChoice(p.name, p.dd, h, p.base, p.nb, p.rate, punct, p.lnms_factor)
    if "=" not in prof:
        raise CliError(f"unknown profile {prof!r}; choose from {', '.join(PROFILE_NAMES)} "
                       "or give rho=...;theta=...")
    return CodeChoice("inline", parse_inline_profile(prof), None, None, None, None, 0, None)


# -------------------------------------------------------------------- design


def cmd_design(args) -> int:
    code = resolve_code(args)
    family = args.family.upper()
    q_c = (args.qc or args.qv) if family == "QBP" else args.qm
    nb = None
    if family == "LQMS":
        if args.code:
            code.layer_plan()  # QC structure required for a code file
        nb = args.nb or code.nb
        if nb is None:
            raise CliError("layer plan requires QC base matrix")
    if args.find_sigma:
        trace = []
        sigma = find_sigma_d(code.dd, args.qm, q_c, args.qv, args.imax,
                             "QMS" if family == "LQMS" else family, layered_nb=nb, trace=trace)
        print("sigma        converged  iterations")
        for s, ok, it in trace:
            print(f"{s:.6f}     {'yes' if ok else 'no ':>3}        {it}")
        print(f"sigma_d = {sigma:.4f}")
    else:
        if args.sigma is None:
            raise CliError("give --sigma or --find-sigma")
        sigma = args.sigma
    meta = {"code": code.name}
    if family == "LQMS":
        if args.layer_mode == "layer":
            d = design_layer_specific(code.dd, nb, sigma, args.qm, args.qv, args.imax)
            d.metadata.update(meta)
            spec = d.to_spec()
        else:
            spec = design_iteration_specific(code.dd, nb, sigma, args.qm, args.qv, args.imax,
                                             metadata=meta)
    else:
        spec = design_flooding(code.dd, sigma, args.qm, q_c, args.qv, args.imax, family,
                               metadata=meta)
    if args.out:
        n = write_spec(spec, args.out)
        print(f"wrote {args.out} ({n} bytes, {spec.i_max} iterations)")
    return 0


# ------------------------------------------------------------------ simulate


def _threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("MIMQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"MIMQ_THREADS must be an integer, got {env!r}") from None
    return 1


def _check_lut_matches(spec: DecoderSpec, code: CodeChoice) -> None:
    meta = spec.metadata or {}
    if "rho" not in meta or "theta" not in meta:
        return
    ours = ({str(k): str(v) for k, v in code.dd.rho.items()},
            {str(k): str(v) for k, v in code.dd.theta.items()})
    if (meta["rho"], meta["theta"]) != ours:
        raise CliError("LUT/code mismatch: LUTs were designed for a different degree profile")


def build_decoder(args, code: CodeChoice):
    """Decoder plus its CSV label and message width for a simulate invocation."""
    if code.h is None:
        raise CliError(f"no parity-check matrix for {code.name}; pass --code")
    if args.lut:
        try:
            spec = read_spec(args.lut)
        except (OSError, LutFormatError) as exc:
            raise CliError(f"cannot load LUT file: {exc}") from None
        _check_lut_matches(spec, code)
        if spec.family == "LQMS":
            plan = code.layer_plan()
            nb = spec.metadata.get("nb")
            if nb is not None and int(nb) != plan.nb:
                raise CliError(f"LUT/code mismatch: LUTs designed for {nb} layers, code has {plan.nb}")
            return LayeredDecoder(code.h, plan, spec), f"LQMS-{spec.q_m}", spec.q_m
        return FloodingDecoder(code.h, spec), f"{spec.family}-{spec.q_m}", spec.q_m
    algo, _, factor = args.baseline.partition(":")
    if algo == "bp":
        if factor:
            raise CliError("bp takes no factor")
        return FloatDecoder(code.h, "bp", args.imax), "BP", None
    if algo == "lnms":
        try:
            f = float(factor) if factor else (code.lnms_factor or 0.8)
        except ValueError:
            raise CliError(f"bad LNMS factor {factor!r}") from None
        plan = code.layer_plan() if code.base is not None else None
        try:
            dec = FloatDecoder(code.h, "lnms", args.imax, f, plan)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        return dec, f"LNMS-{f:g}", None
    raise CliError(f"unknown baseline {args.baseline!r}; use bp or lnms:<factor>")


def cmd_simulate(args, argv) -> int:
    if bool(args.lut) == bool(args.baseline):
        raise CliError("give exactly one of --lut or --baseline")
    code = resolve_code(args)
    if code.rate is None:
        raise CliError("simulation needs a code matrix: use a built-in profile or --code")
    decoder, label, q_m = build_decoder(args, code)
    threads = _threads(args.threads)
    t0 = time.time()
    rows = []
    for eb in args.ebn0:
        cfg = ChannelConfig(args.channel, eb, code.rate, args.seed)
        rec = run_fer(code.h, decoder, cfg, args.min_errors, args.max_frames, code.punctured,
                      threads, codewords=args.codewords)
        row = record_row(code.name, label, q_m, cfg, rec)
        rows.append(row)
        print(",".join(str(row[c]) for c in CSV_COLUMNS), flush=True)
    manifest = {"command": "simulate", "arguments": shlex.join(argv), "seed": args.seed,
                "version": _version(), "wall_time_s": f"{time.time() - t0:.1f}"}
    if args.csv:
        write_csv(args.csv, rows, manifest)
    return 0


# ------------------------------------------------------------------- inspect


def cmd_inspect(args) -> int:
    try:
        spec = read_spec(args.lut)
    except (OSError, LutFormatError) as exc:
        raise CliError(f"invalid LUT file: {exc}") from None
    print(f"family {spec.family}  q_m={spec.q_m} q_c={spec.q_c} q_v={spec.q_v}  "
          f"I_max={spec.i_max}  sigma_d={spec.sigma_d:g}")
    print("gamma_ch (LLR): " + " ".join(f"{x:.3f}" for x in spec.gamma_ch))
    if spec.layers:
        print(f"per-layer bundles: {len(spec.layers)}")
    for t, luts in enumerate(spec.iterations[: args.rows], 1):
        extra = f"  phi_c={luts.phi_c.tolist()}" if luts.phi_c is not None else ""
        print(f"t={t:>3}  phi_v={luts.phi_v.tolist()}  gamma_v={luts.gamma_v.tolist()}  "
              f"gamma_e={luts.gamma_e}{extra}")
    if spec.trace:
        last = spec.trace[-1]
        print(f"design trace: final I(X;R)={last.mi_r:.6f}  P_e={last.pe:.3e}")
    asym = [v for v in lut_violations(spec) if "odd-symmetric" in v]
    if asym:
        print(f"note: {len(asym)} table(s) are not odd-symmetric (allowed; first: {asym[0]})")
    print("all LUT invariants hold")
    return 0


# ---------------------------------------------------------------------- main


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimq", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def code_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--profile", help=f"built-in code ({', '.join(PROFILE_NAMES)}) "
                                         "or inline 'rho=d:f,...;theta=d:f,...'")
        g.add_argument("--code", help="parity-check matrix: .qc base table or alist file")

    d = sub.add_parser("design", help="design LUTs by MIM density evolution")
    code_args(d)
    d.add_argument("--family", choices=("qbp", "qms", "lqms"), default="qms", type=str.lower)
    d.add_argument("--qm", type=int, default=3)
    d.add_argument("--qc", type=int, default=None, help="CN register bits (QBP; default --qv)")
    d.add_argument("--qv", type=int, default=12)
    d.add_argument("--imax", type=int, default=50)
    s = d.add_mutually_exclusive_group()
    s.add_argument("--sigma", type=float)
    s.add_argument("--find-sigma", action="store_true")
    d.add_argument("--nb", type=int, default=None, help="layer count for inline profiles")
    d.add_argument("--layer-mode", choices=("iteration", "layer"), default="iteration",
                   help="LQMS: one LUT set per iteration or per (iteration, layer)")
    d.add_argument("--out", help="LUT file to write")

    m = sub.add_parser("simulate", help="Monte-Carlo FER/BER sweep")
    code_args(m)
    src = m.add_mutually_exclusive_group()
    src.add_argument("--lut")
    src.add_argument("--baseline", help="bp or lnms:<factor>")
    m.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    m.add_argument("--ebn0", type=_floats, default=[2.0], help="Eb/N0 list in dB, e.g. '1.5,2,2.5'")
    m.add_argument("--min-errors", type=int, default=300)
    m.add_argument("--max-frames", type=int, default=10 ** 6)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--threads", type=int, default=None, help="default: $MIMQ_THREADS or 1")
    m.add_argument("--imax", type=int, default=50, help="iterations of the float baselines")
    m.add_argument("--punctured", type=int, default=None, help="leading untransmitted bits")
    m.add_argument("--codewords", choices=("random", "zero"), default="random")
    m.add_argument("--csv")

    i = sub.add_parser("inspect", help="validate and summarize a LUT file")
    i.add_argument("lut")
    i.add_argument("--rows", type=int, default=5, help="iterations to print")
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "design":
            return cmd_design(args)
        if args.command == "simulate":
            return cmd_simulate(args, argv)
        return cmd_inspect(args)
    except CliError as exc:
        print(f"mimq {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OverflowError) as exc:
        print(f"mimq {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
