#!/usr/bin/env python3
# Fast application of the scaled delay Vandermonde matrix.
#
# The matrix T[k,l] = alpha^(k*l) (alpha on the unit circle) is dense, but it
# factors into two chirp diagonals around a circulant convolution, and the
# circulant splits into FFTs.  Applying the factors costs O(N log N) instead
# of the O(N^2) dense product.  This script builds both routes and compares
# accuracy, operation counts, and wall time.

import time

import numpy as np

from dvmbeam.dvm import (
    DvmSpec, OpCounter, build_bluestein_chain, fast_dvm_apply, scaled_dvm_dense,
)

# a 24 GHz carrier sampled at 32 GHz gives alpha = exp(-2pi j 24/(32 n))
n = 256
alpha = complex(np.exp(-2j * np.pi * 24e9 / (32e9 * n)))
spec = DvmSpec(n, alpha)

dense = scaled_dvm_dense(spec)          # direct exponentiation, the oracle
chain = build_bluestein_chain(spec)     # seven sparse factors

rel = np.linalg.norm(chain.dense() - dense) / np.linalg.norm(dense)
print(f"n = {n}, alpha = {alpha:.6f}")
print(f"factorization error (relative Frobenius): {rel:.3e}")

# the factors: two chirp diagonals, zero-pad, FFT pair, circulant diagonal
print("\nfactor chain:")
for f in chain.factors:
    print(f"  {f}")

# operation counts per applied vector, dense vs factored
print("\ncomplex multiply counts per input vector:")
print(f"{'n':>6} {'dense n^2':>12} {'factored':>10} {'ratio':>7}")
for size in (64, 128, 256, 512, 1024):
    counter = OpCounter()
    c = build_bluestein_chain(DvmSpec(size, complex(np.exp(-0.37j))))
    fast_dvm_apply(c, np.ones(size, dtype=complex), counter)
    print(f"{size:>6} {size * size:>12} {counter.muls:>10} "
          f"{counter.muls / size**2:>7.3f}")

# Wall time tells a different story at this scale: the dense product is one
# BLAS call while the factored route runs interpreted array ops per stage, so
# dense wins on the clock until n grows much larger.  The asymptotic claim is
# about operation counts (table above); the clock below is just honesty.
x = np.random.default_rng(0).standard_normal((n, 512)) + 0j
t0 = time.perf_counter()
y_dense = dense @ x
t_dense = time.perf_counter() - t0
t0 = time.perf_counter()
y_fast = fast_dvm_apply(chain, x)
t_fast = time.perf_counter() - t0
print(f"\nbatched apply, 512 vectors: dense {t_dense * 1e3:.1f} ms (BLAS), "
      f"factored {t_fast * 1e3:.1f} ms (interpreted)")
print(f"max deviation between routes: {np.max(np.abs(y_dense - y_fast)):.3e}")
