"""
Three converters and an undecided band
======================================

Three grid-following converters with PLL bandwidths 70, 40 and 150 rad/s
share a star network with gSCR 4.82.  Between roughly 14 and 21 Hz neither
the gain nor the phase condition holds.  The report ranks converter 3 as
the culprit, the oracle finds an oscillatory mode near 15 Hz, and slowing
down converter 3's PLL clears the band.
"""

import numpy as np

from gainphase import criteria
from gainphase.config import build_devices, build_network
from gainphase.fixtures import example3
from gainphase.oracle import closed_loop_eigs, loop_gain, nyquist_winding


def analyse(cfg):
    devices, net = build_devices(cfg), build_network(cfg)
    ev = criteria.network_evaluator(net, None, None, 0.06)   # every line has R/X 0.06
    return devices, net, criteria.sweep(devices, ev, None, None, 0.06)


devices, net, report = analyse(example3())
print("undecided bands (Hz):", [(round(a, 2), round(b, 2)) for a, b in report.undecided_bands_hz])
print("transition frequencies (Hz):",
      {k: round(v / (2 * np.pi), 1) for k, v in report.transition_freqs.items()})
print("culprit ranking:", [r["device"] for r in report.culprits()[0]["ranking"]])

res = closed_loop_eigs(devices, net)
dom = res.dominant()
print("dominant mode: %.3f %+.2fj  (%.2f Hz)" % (dom.real, dom.imag, abs(dom.imag) / (2 * np.pi)))
w = np.concatenate([[0.0], np.geomspace(1e-2, 1e7, 3000)])
print("Nyquist count of unstable modes:", nyquist_winding(loop_gain(devices, net), w))

# Retune converter 3 to 40 rad/s.
devices, net, report = analyse(example3(pll=(70.0, 40.0, 40.0)))
print("retuned: certified =", report.certified,
      " oracle stable =", closed_loop_eigs(devices, net).stable)
