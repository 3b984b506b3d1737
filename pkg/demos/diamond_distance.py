"""
How far apart are two unitary channels?
=======================================

For unitaries the diamond distance depends only on the eigenvalues of
V^dagger U: if their convex hull sits at distance d0 from the origin the
distance is 2 sqrt(1 - d0^2). A Monte Carlo search over entangled inputs
gives a lower bound that should approach it.
"""

import numpy as np

from outcome_unitary import diamond_distance_lower_bound, diamond_distance_unitary, sample_unitary

# the phase gate against the identity: eigenvalues 1 and i
S = np.diag([1, 1j])
print("closed form (I, S):", diamond_distance_unitary(np.eye(2), S), " sqrt(2) =", np.sqrt(2))

rng = np.random.default_rng(0)
for dim in (2, 3, 4):
    U = sample_unitary(dim, rng)
    # a nearby unitary, then an unrelated one
    H = sample_unitary(dim, rng)
    near = H @ np.diag(np.exp(0.3j * rng.uniform(-1, 1, dim))) @ H.conj().T @ U
    for label, V in (("near", near), ("random", sample_unitary(dim, rng))):
        exact = diamond_distance_unitary(U, V)
        mc = diamond_distance_lower_bound(U, V, samples=10_000, seed=1)
        print(f"dim {dim} {label:>6}: closed form {exact:.6f}, Monte Carlo {mc:.6f}")
