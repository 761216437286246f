"""MIM quantized LDPC decoder design and runtime."""
