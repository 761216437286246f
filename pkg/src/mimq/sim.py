"""Monte-Carlo FER/BER simulation over BPSK-AWGN and fast-fading channels.

Frame ``i`` draws its noise from its own generator keyed by ``(seed, i)``, so
results do not depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import math
import os
import shlex
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .code import ParityCheckMatrix, generator_matrix
from .decoder import FloodingDecoder, LayeredDecoder, quantize_llr

CSV_COLUMNS = ("code", "decoder", "q_m", "ebn0_db", "frames", "frame_errors", "fer", "ber",
               "mean_iters", "seed", "censored")


@dataclass(frozen=True)
class ChannelConfig:
    """BPSK channel at ``ebn0_db`` for a code of rate ``rate``; ``kind`` is
    ``'awgn'`` or ``'rayleigh'`` (per-symbol real Gaussian gain known at the receiver)."""

    kind: str
    ebn0_db: float
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("awgn", "rayleigh"):
            raise ValueError(f"unknown channel {self.kind!r}")
        if not math.isfinite(self.ebn0_db):
            raise ValueError("ebn0_db must be finite")
        if not 0 < self.rate <= 1:
            raise ValueError("rate must lie in (0, 1]")

    @property
    def sigma(self) -> float:
        """Noise std-dev per real dimension, ``σ² = N_0/2`` with ``E_s = 1``."""
        esn0 = self.rate * 10.0 ** (self.ebn0_db / 10.0)
        return math.sqrt(1.0 / (2.0 * esn0))


@dataclass(frozen=True)
class FerRecord:
    frames: int
    frame_errors: int
    bit_errors: int
    mean_iterations: float
    fer: float
    ber: float
    elapsed: float
    censored: bool = False


def frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_channel(bits, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Transmit ``bits`` (0 ↦ +1) and return the receiver LLRs."""
    x = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    s = cfg.sigma
    if cfg.kind == "awgn":
        y = x + s * rng.standard_normal(x.size)
        return 2.0 * y / s ** 2
    g = rng.standard_normal(x.size)
    y = g * x + s * rng.standard_normal(x.size)
    return 2.0 * g * y / s ** 2


_GENERATORS: dict = {}


def _packed_generator(h: ParityCheckMatrix) -> np.ndarray:
    """Cached generator of ``h`` with rows bit-packed."""
    hit = _GENERATORS.get(id(h))
    if hit is None or hit[0] is not h:
        hit = (h, np.packbits(generator_matrix(h), axis=1))
        _GENERATORS[id(h)] = hit
    return hit[1]


def random_codeword(h: ParityCheckMatrix, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random codeword of ``h``: XOR of the generator rows picked by a
    uniform message."""
    g = _packed_generator(h)
    msg = rng.integers(0, 2, g.shape[0]).astype(bool)
    word = np.bitwise_xor.reduce(g[msg], axis=0) if msg.any() else np.zeros(g.shape[1], np.uint8)
    return np.unpackbits(word, count=h.n).astype(np.int64)


def _decoder_input(decoder, llr, punctured, rng):
    if isinstance(decoder, (FloodingDecoder, LayeredDecoder)):
        sym = quantize_llr(llr, decoder.spec.gamma_ch)
        if punctured:
            # an erased symbol sits on the zero threshold; pick either middle index
            half = 1 << (decoder.spec.q_m - 1)
            sym[:punctured] = half - 1 + rng.integers(0, 2, punctured)
        return sym
    if punctured:
        llr = llr.copy()
        llr[:punctured] = 0.0
    return llr


def _run_frames(decoder, h, cfg, start, stop, punctured, codewords):
    out = np.zeros((stop - start, 3), dtype=np.int64)
    zero = np.zeros(h.n, dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        rng = frame_rng(cfg.seed, i)
        cw = random_codeword(h, rng) if codewords == "random" else zero
        llr = simulate_channel(cw, cfg, rng)
        res = decoder.decode(_decoder_input(decoder, llr, punctured, rng))
        nerr = int(np.count_nonzero(res.bits != cw))
        out[j] = (nerr > 0, nerr, res.iterations_used)
    return out


def run_fer(h: ParityCheckMatrix, decoder, cfg: ChannelConfig, min_errors: int = 300,
            max_frames: int = 10 ** 7, punctured: int = 0, threads: int = 1,
            chunk: int = 256, codewords: str = "random") -> FerRecord:
    """Simulate frames in index order until ``min_errors`` frame errors or
    ``max_frames`` frames, whichever comes first.

    ``decoder`` is a :class:`FloodingDecoder`, :class:`LayeredDecoder` or
    :class:`FloatDecoder`. The first ``punctured`` code bits are not transmitted.
    ``codewords`` is ``'random'`` (uniform codewords) or ``'zero'``; the
    MI-optimal quantized decoders are not flip-symmetric, so the all-zero
    codeword gives a biased estimate for them. Frames are
    processed in chunks by ``threads`` workers and merged in index order, so the
    record is identical for any thread count.
    """
    if codewords not in ("random", "zero"):
        raise ValueError(f"unknown codeword mode {codewords!r}")
    if min_errors < 1 or max_frames < 1:
        raise ValueError("min_errors and max_frames must be positive")
    t0 = time.perf_counter()
    threads = max(1, int(threads))
    frames = ferr = berr = iters = 0
    done = False
    next_start = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while not done and next_start < max_frames:
            bounds = []
            for _ in range(threads):
                if next_start >= max_frames:
                    break
                stop = min(next_start + chunk, max_frames)
                bounds.append((next_start, stop))
                next_start = stop
            results = pool.map(lambda b: _run_frames(decoder, h, cfg, b[0], b[1], punctured, codewords),
                               bounds)
            for res in results:
                if done:
                    break
                for fe, be, it in res:
                    frames += 1
                    ferr += int(fe)
                    berr += int(be)
                    iters += int(it)
                    if ferr >= min_errors:
                        done = True
                        break
    fer = ferr / frames
    return FerRecord(frames, ferr, berr, iters / frames, fer, berr / (frames * h.n),
                     time.perf_counter() - t0, censored=ferr == 0)


def write_csv(path: str | os.PathLike, rows: list[dict], manifest: dict) -> None:
    """Append result rows to ``path``; a ``#`` comment line with the run manifest
    precedes each appended batch and the column header starts a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={shlex.quote(str(manifest[k]))}" for k in sorted(manifest)) + "\n")
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="raise")
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def record_row(code: str, decoder: str, q_m, cfg: ChannelConfig, rec: FerRecord) -> dict:
    return {"code": code, "decoder": decoder, "q_m": "" if q_m is None else q_m,
            "ebn0_db": f"{cfg.ebn0_db:g}", "frames": rec.frames, "frame_errors": rec.frame_errors,
            "fer": f"{rec.fer:.6e}", "ber": f"{rec.ber:.6e}", "mean_iters": f"{rec.mean_iterations:.4f}",
            "seed": cfg.seed, "censored": int(rec.censored)}

