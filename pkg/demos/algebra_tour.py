"""Tour of the tubal algebra: t-product, transpose, ranks, and the DFT view.

Run from the repository root after an editable install:

    python3 demos/algebra_tour.py
"""

import numpy as np

from tubal import (
    bcirc,
    dft_mode3,
    fold3_from_reshaped,
    fro_norm,
    mode_unfold,
    multi_rank,
    pair_weights,
    reshape_mode3,
    tprod,
    tprod_reference,
)

rng = np.random.default_rng(7)

# Two third-order tensors whose frontal slices we multiply with circular
# convolution along the tube fibers.
a = rng.standard_normal((4, 3, 5))
b = rng.standard_normal((3, 6, 5))
c = tprod(a, b)
print(f"tprod shape: {a.shape} * {b.shape} -> {c.shape}")

# The FFT path must agree with the circulant-unfolding definition.
dev = fro_norm(c - tprod_reference(a, b)) / fro_norm(c)
print(f"fft path vs circulant reference: relative deviation {dev:.2e}")

# The block-circulant unfolding realizes the same product as an ordinary
# matrix product; bcirc(a) is a (20, 15) matrix here.
print(f"block-circulant unfolding of a: {bcirc(a).shape}")

# The t-product is associative.
d = rng.standard_normal((6, 2, 5))
lhs = tprod(tprod(a, b), d)
rhs = tprod(a, tprod(b, d))
print(f"(a*b)*d == a*(b*d): {np.allclose(lhs, rhs)}")

# Under the mode-3 DFT the t-product becomes independent per-slice matrix
# products.  Real input makes the spectrum conjugate-symmetric, so only
# ceil((n3+1)/2) slices are stored.
spec = dft_mode3(a)
print(f"stored spectral slices for n3=5: {spec.slices.shape[2]} (of 5)")

# Parseval with the symmetry weights: DC and Nyquist count once, interior
# slices twice.
w = pair_weights(5)
energy = np.einsum("ijk,ijk,k->", spec.slices, np.conj(spec.slices), w).real / 5
print(f"pair weights {w}, spectral energy ratio {energy / fro_norm(a) ** 2:.12f}")

# Tubal rank is the largest slice rank of the spectrum; the multi-rank lists
# all of them.  A product of thin tensors has low tubal rank by construction.
thin = tprod(rng.standard_normal((6, 2, 4)), rng.standard_normal((2, 6, 4)))
ranks = multi_rank(thin)
print(f"multi-rank of a rank-2 product: {ranks.ranks}, tubal rank {ranks.tubal}")

# Mode unfoldings flatten a tensor along one mode; mode-3 regrouping turns
# the tube fibers into rows of a (n3, p, q) tensor without losing any entry.
x = rng.standard_normal((6, 4, 3))
print(f"mode-1 unfolding shape: {mode_unfold(x, 1).shape}")
xt = reshape_mode3(x, 8, 3)
print(f"regrouped (p=8, q=3) shape: {xt.shape}")
restored = fold3_from_reshaped(xt, x.shape)
print(f"regrouping inverts exactly: {np.array_equal(restored, x)}")
