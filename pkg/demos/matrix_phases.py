"""
Gains and phases of complex matrices
====================================

A square complex matrix has gains (its singular values) and, when its
numerical range avoids the origin, phases.  This script walks through the
basic objects used by the stability certificates.
"""

import numpy as np

from gainphase.matphase import check_mixed_lemma, phases, sectoriality, singular_values

# Gains are singular values, largest first.
A = np.array([[2.0, 1.0j], [0.5, 1.0 + 1.0j]])
print("gains:", singular_values(A))

# diag(1, j): the numerical range is the segment from 1 to j, which misses 0.
# Rotating by about pi/4 makes the Hermitian part positive definite.
gamma = sectoriality(np.diag([1.0, 1.0j]))
print("rotation for diag(1, j): %.4f rad (pi/4 = %.4f)" % (gamma, np.pi / 4))

# diag(1, -1) has 0 in its numerical range, so it has no phases.
print("diag(1, -1) sectorial:", sectoriality(np.diag([1.0, -1.0])) is not None)

# Phases of a congruence T* D T are the arguments of the unitary D.
rng = np.random.default_rng(0)
T = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
D = np.diag(np.exp(1j * np.array([0.9, 0.1, -0.6])))
ps = phases(T.conj().T @ D @ T)
print("phases of T* D T:", np.round(ps.phis, 12))

# The pointwise feedback test: small gain first, then small phase.
print(check_mixed_lemma(0.5 * np.eye(2), np.eye(2)))       # gains multiply to 0.5
print(check_mixed_lemma(2.0 * np.eye(2), np.eye(2)))       # phases 0 + 0 < pi
G = np.diag(2 * np.exp(1j * np.array([2.0, -2.0])))
print(check_mixed_lemma(G, np.eye(2)))                     # spread 4 rad: no phases
