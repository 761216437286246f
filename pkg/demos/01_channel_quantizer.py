"""Quantizing the BPSK-AWGN channel output to a few bits.

The receiver sees y = x + n. Before decoding, y is mapped to one of 2**q_m
symbols. The thresholds are chosen to maximize I(X; L). This script designs
3- and 4-bit quantizers at a few noise levels and prints the mutual
information kept, next to the unquantized capacity.
"""
import numpy as np

from mimq.quantizer import awgn_grid, mutual_information, quantize_awgn_channel

for sigma in (0.80, 0.8501, 0.90):
    _, fine = awgn_grid(sigma)
    print(f"sigma = {sigma}: fine-grid MI {mutual_information(fine):.5f} bit")
    for q_m in (1, 2, 3, 4):
        ch = quantize_awgn_channel(sigma, q_m)
        thr = " ".join(f"{t:+.2f}" for t in ch.llr_thresholds)
        print(f"  {q_m}-bit  MI {mutual_information(ch.pmf):.5f}  LLR thresholds [{thr}]")

# the quantized channel is symmetric: P(l|0) = P(M-1-l|1)
ch = quantize_awgn_channel(0.8501, 3)
assert np.allclose(ch.pmf.p0, ch.pmf.p1[::-1])
print("\n3-bit channel pmf given x=0:", np.round(ch.pmf.p0, 4))
