"""
One grid-following converter behind a line
==========================================

A single converter with a PLL connected through a lossless reactance
``X_net`` has gSCR ``1/X_net``.  Below its sectorial transition frequency
the converter is certified by gain, above it by phase.  The eigenvalue
oracle locates the actual stability limit.
"""

import numpy as np
from scipy.optimize import brentq

from gainphase import criteria
from gainphase.config import build_devices, build_network
from gainphase.fixtures import example2
from gainphase.network import gscr, reduced_b_matrix
from gainphase.oracle import closed_loop_eigs

cfg = example2(X_net=0.2)
devices, net = build_devices(cfg), build_network(cfg)
print("gSCR:", gscr(reduced_b_matrix(net)))

report = criteria.corollary_check(devices, net)
print("certified:", report.certified, report.summary()["verdict_counts"])

# The transition frequency and the converter gain there set the smallest
# gSCR the certificate can accept.
wt = report.transition_frequency(0)
k = int(np.searchsorted(report.omega, wt))
print("sectorial transition: %.1f Hz, gain there %.3f" % (wt / (2 * np.pi),
                                                        report.devices[0].sigma_max[k]))

# A few rows of the device profile: gain and phase interval over frequency.
for f in (1, 10, 30, 60, 200):
    j = int(np.argmin(np.abs(report.hz - f)))
    p = report.devices[0]
    print("%6.1f Hz  gain %.3f  phases [%+.3f, %+.3f]  %s"
          % (report.hz[j], p.sigma_max[j], p.phi_lo[j], p.phi_hi[j], report.verdicts[j]))


# Ground truth: the largest real part of the closed-loop modes versus X_net.
def max_real(X):
    c = example2(X_net=X)
    return closed_loop_eigs(build_devices(c), build_network(c)).max_real


for X in (0.2, 0.25, 0.3, 0.35):
    print("X_net = %.2f  max Re(lambda) = %+.3f" % (X, max_real(X)))
print("stability limit: X_net = %.4f" % brentq(max_real, 0.25, 0.35))
