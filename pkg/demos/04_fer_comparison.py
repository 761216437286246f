"""Frame error rates of quantized and floating-point decoders.

Runs a short Monte-Carlo comparison on the 802.11n rate-1/2 code:
3- and 4-bit MIM min-sum decoders (flooding), a 3-bit layered decoder,
and floating-point BP and layered normalized min-sum baselines.
Pass a larger frame budget on the command line for smoother numbers, e.g.
``python 04_fer_comparison.py 20000``.
"""
import sys

from mimq.decoder import FloatDecoder, FloodingDecoder, LayeredDecoder
from mimq.design import design_flooding
from mimq.layered import design_iteration_specific
from mimq.profiles import get_profile
from mimq.sim import ChannelConfig, run_fer

frames = int(sys.argv[1]) if len(sys.argv) > 1 else 400
p = get_profile("802.11n-r12")
h, plan = p.matrix(), p.layer_plan()

print("designing tables ...")
decoders = {
    "QMS 3-bit (I=50)": FloodingDecoder(h, design_flooding(p.dd, 0.8630, 3, 3, 12, 50, "QMS")),
    "QMS 4-bit (I=50)": FloodingDecoder(h, design_flooding(p.dd, 0.8934, 4, 4, 12, 50, "QMS")),
    "LQMS 3-bit (I=15)": LayeredDecoder(h, plan, design_iteration_specific(p.dd, p.nb, 0.8362, 3, 12, 15)),
    "BP float (I=50)": FloatDecoder(h, "bp", 50),
    "LNMS 0.8 (I=15)": FloatDecoder(h, "lnms", 15, 0.8, plan),
}

for ebn0 in (1.5, 2.0):
    cfg = ChannelConfig("awgn", ebn0, p.rate, seed=1)
    print(f"\nEb/N0 = {ebn0} dB, up to {frames} frames or 50 frame errors")
    for name, dec in decoders.items():
        r = run_fer(h, dec, cfg, min_errors=50, max_frames=frames)
        print(f"  {name:<18} FER {r.fer:.2e} ({r.frame_errors}/{r.frames})  "
              f"mean iterations {r.mean_iterations:.2f}")
