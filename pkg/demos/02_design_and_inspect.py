"""Designing a 3-bit min-sum decoder for the 802.11n rate-1/2 code.

Density evolution tracks the message pmfs and builds every lookup table
along the way: phi_ch and phi_v map symbols to integers, Gamma_v requantizes
the VN sum, and Gamma_e makes the hard decision. The script designs 10
iterations, prints the first rows, saves the tables to JSON and reloads them.
"""
import tempfile
from pathlib import Path

from mimq.design import design_flooding, lut_violations
from mimq.lutio import read_spec, write_spec
from mimq.profiles import get_profile

profile = get_profile("802.11n-r12")
spec = design_flooding(profile.dd, 0.8501, q_m=3, q_c=3, q_v=12, i_max=10, family="QMS")

print("iteration  I(X;R)    P_e")
for t, st in enumerate(spec.trace, 1):
    print(f"{t:>9}  {st.mi_r:.5f}  {st.pe:.2e}")

first = spec.iterations[0]
print("\niteration 1 tables")
print("  phi_ch  ", first.phi_ch.tolist())
print("  phi_v   ", first.phi_v.tolist())
print("  Gamma_v ", first.gamma_v.gammas.tolist())
print("  Gamma_e ", first.gamma_e)
print("invariant violations:", lut_violations(spec) or "none")

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "qms3.json"
    n = write_spec(spec, path)
    back = read_spec(path)
    print(f"\nwrote {n} bytes; reload equal: {list(back.iterations) == list(spec.iterations)}")
