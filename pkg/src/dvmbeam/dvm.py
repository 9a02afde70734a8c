"""Scaled delay-Vandermonde transforms and their sparse factorizations.

The scaled delay-Vandermonde matrix (DVM) of size N for a unit-modulus
generator alpha has entries alpha**(k*l), k, l = 0..N-1.  A chirp
(Bluestein-style) identity k*l = (k^2 + l^2 - (k-l)^2) / 2 turns it into

    diag(alpha**(k^2/2)) . Toeplitz(alpha**(-(k-l)^2/2)) . diag(alpha**(l^2/2))

and the Toeplitz block embeds in a circulant of size M = 2N, which the DFT
diagonalizes.  The resulting seven-factor chain applies the full transform in
O(N log N) arithmetic.  This module builds that chain, the radix-2 FFT it
rides on, and the recursive DFT factorization whose twiddle diagonals and
leaf blocks later become trainable network parameters.

All dense constructions here exist for verification; the apply paths never
materialize an N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

# Three-part split of 2*pi for Cody-Waite argument reduction.  The first part
# carries 33 significant bits so n*_PI2_A stays exact for n < 2**20.
_PI2_A = float.fromhex("0x1.921fb54400000p+2")
_PI2_B = float.fromhex("0x1.0b4611a600000p-32")
_PI2_C = float.fromhex("0x1.3198a2e037073p-67")
_TWO_PI = 6.283185307179586

# Largest |x| for which the compensated path below is exact: the Veltkamp
# product needs x on at most 27 mantissa bits and the reduction needs the
# quotient n below 2**20.
_CIS_EXACT_LIMIT = float(1 << 21)


def cis(phi: float, x) -> np.ndarray:
    """exp(1j * phi * x) with compensated argument reduction.

    Chirp exponents reach x ~ N^2, so the phase phi*x grows to ~1e6 radians
    at N = 1024 and a plain double product loses ~6e-11 of phase before the
    complex exponential is ever taken.  Splitting phi (Veltkamp) and reducing
    against a three-part 2*pi (Cody-Waite) keeps every entry accurate to a
    few ulp instead, which the factorization identities rely on.

    Parameters
    ----------
    phi : float
        Phase of the unit-modulus generator, principal branch.
    x : array_like
        Real exponents.  Exact reduction is guaranteed for half-integers with
        |x| < 2**21 (covers N <= 1024 with margin); beyond that the plain
        product is used.
    """
    x = np.asarray(x, dtype=np.float64)
    if abs(phi) * float(np.max(np.abs(x), initial=0.0)) > _TWO_PI * (1 << 20) or \
            float(np.max(np.abs(x), initial=0.0)) > _CIS_EXACT_LIMIT:
        theta = phi * x
        return np.cos(theta) + 1j * np.sin(theta)
    t = phi * 134217729.0  # 2**27 + 1
    hi = t - (t - phi)
    lo = phi - hi
    p1 = hi * x  # exact: 26-bit hi times <=27-bit x
    p2 = lo * x
    n = np.rint(p1 / _TWO_PI)
    r = ((p1 - n * _PI2_A) - n * _PI2_B) - n * _PI2_C + p2
    return np.cos(r) + 1j * np.sin(r)


@dataclass(frozen=True)
class DvmSpec:
    """Problem description for one scaled DVM: size and generator.

    n must be a power of two >= 2 and alpha unit modulus; the stored phase
    phi = arg(alpha) is the single source of truth for every fractional
    power, so all factors use one consistent branch.
    """

    n: int
    alpha: complex
    unit_tol: float = 1e-12

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if abs(abs(self.alpha) - 1.0) > self.unit_tol:
            raise ValueError(
                f"alpha must be unit modulus within {self.unit_tol}, "
                f"got |alpha| = {abs(self.alpha)!r}"
            )

    @property
    def m(self) -> int:
        return 2 * self.n

    @property
    def phi(self) -> float:
        return math.atan2(self.alpha.imag, self.alpha.real)


@dataclass
class OpCounter:
    """Per-call arithmetic tally in complex-equivalent operations.

    muls counts complex multiplications (unit twiddles included; real-scalar
    normalization of a complex vector counts one mul per element), adds
    counts complex additions.  Instances are created by the caller and passed
    down, never shared globally.
    """

    muls: int = 0
    adds: int = 0

    def tally(self, muls: int = 0, adds: int = 0) -> None:
        self.muls += int(muls)
        self.adds += int(adds)


def scaled_dvm_dense(spec: DvmSpec) -> np.ndarray:
    """Dense oracle: entries alpha**(k*l) by direct exponentiation."""
    k = np.arange(spec.n, dtype=np.float64)
    return cis(spec.phi, np.outer(k, k))


def unscaled_dvm_dense(spec: DvmSpec) -> np.ndarray:
    """Dense oracle for the unscaled variant, entries alpha**((k+1)*l)."""
    k = np.arange(spec.n, dtype=np.float64)
    return cis(spec.phi, np.outer(k + 1.0, k))


def circulant_first_column(spec: DvmSpec) -> np.ndarray:
    """First column of the size-2N circulant embedding the chirp Toeplitz.

    Index m in 0..N-1 holds alpha**(-m^2/2); index N is a don't-care slot
    (set to 1); index 2N-j for j in 1..N-1 holds alpha**(-j^2/2), so the
    leading N x N block of the circulant equals alpha**(-(k-l)^2/2).
    """
    n = spec.n
    m = np.arange(n, dtype=np.float64)
    head = cis(spec.phi, -0.5 * m * m)
    j = np.arange(n - 1, 0, -1, dtype=np.float64)
    tail = cis(spec.phi, -0.5 * j * j)
    return np.concatenate([head, [1.0 + 0.0j], tail])


# ---------------------------------------------------------------------------
# radix-2 FFT (unnormalized), batched over columns


_TWIDDLE_CACHE: dict = {}
_BITREV_CACHE: dict = {}


def _stage_twiddles(size: int, inverse: bool) -> np.ndarray:
    key = (size, inverse)
    w = _TWIDDLE_CACHE.get(key)
    if w is None:
        m = np.arange(size // 2, dtype=np.float64)
        sign = 1.0 if inverse else -1.0
        w = np.exp(sign * 2j * np.pi * m / size)
        w.setflags(write=False)
        _TWIDDLE_CACHE[key] = w
    return w


def _bit_reversal(size: int) -> np.ndarray:
    idx = _BITREV_CACHE.get(size)
    if idx is None:
        bits = size.bit_length() - 1
        idx = np.zeros(size, dtype=np.intp)
        for i in range(size):
            idx[i] = int(format(i, f"0{bits}b")[::-1], 2) if bits else 0
        idx.setflags(write=False)
        _BITREV_CACHE[size] = idx
    return idx


def fft(x, inverse: bool = False, counter: OpCounter | None = None) -> np.ndarray:
    """Unnormalized radix-2 DFT, entries omega**(k*l) with omega = e^{-2pi j/K}.

    Decimation in frequency: each stage is the butterfly
    [u; v] -> [u + v; w (u - v)], which is exactly one level of the
    recursive factorization used by the trainable chains; the final
    bit-reversal collapses the cascade of even/odd interleavings.

    Parameters
    ----------
    x : array_like, shape (K,) or (K, B)
        K must be a power of two.  Batches ride along axis 1.
    inverse : bool
        Conjugated twiddles (still unnormalized; divide by K to invert).
    counter : OpCounter, optional
        Incremented by K/2 muls and K adds per stage.
    """
    x = np.asarray(x)
    size = x.shape[0]
    if size == 0 or size & (size - 1):
        raise ValueError(f"FFT length must be a power of two, got {size}")
    y = np.array(x, dtype=np.complex128, copy=True)
    flat = y.ndim == 1
    if flat:
        y = y[:, None]
    stages = size.bit_length() - 1
    for s in range(stages):
        block = size >> s
        half = block >> 1
        v = y.reshape(1 << s, block, -1)
        w = _stage_twiddles(block, inverse)
        top = v[:, :half] + v[:, half:]
        bot = (v[:, :half] - v[:, half:]) * w[None, :, None]
        v[:, :half] = top
        v[:, half:] = bot
        if counter is not None:
            counter.tally(muls=half << s, adds=size)
    y = y[_bit_reversal(size)]
    return y[:, 0] if flat else y


def even_odd_permute(x) -> np.ndarray:
    """Interleave the two halves: [a, b | c, d] -> [a, c, b, d] (axis 0)."""
    x = np.asarray(x)
    size = x.shape[0]
    if size % 2:
        raise ValueError(f"even/odd interleave needs even length, got {size}")
    out = np.empty_like(x)
    out[0::2] = x[: size // 2]
    out[1::2] = x[size // 2 :]
    return out


# ---------------------------------------------------------------------------
# factor chain for the seven-factor scaled-DVM identity


class Diagonal:
    """Elementwise multiply by a fixed complex vector."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=np.complex128)

    def __repr__(self):
        return f"Diagonal({len(self.values)})"

    @property
    def shape(self):
        k = len(self.values)
        return (k, k)

    def apply(self, x, counter=None):
        if counter is not None:
            counter.tally(muls=len(self.values))
        v = self.values
        return x * (v[:, None] if np.ndim(x) == 2 else v)

    def dense(self):
        return np.diag(self.values)


class Dft:
    """Normalized or raw DFT factor, conjugated when conj is set."""

    def __init__(self, size: int, conj: bool = False, normalized: bool = True):
        self.size = size
        self.conj = conj
        self.normalized = normalized

    def __repr__(self):
        tags = [str(self.size)]
        if self.conj:
            tags.append("conj")
        if not self.normalized:
            tags.append("raw")
        return f"Dft({', '.join(tags)})"

    @property
    def shape(self):
        return (self.size, self.size)

    def apply(self, x, counter=None):
        y = fft(x, inverse=self.conj, counter=counter)
        if self.normalized:
            y = y * (1.0 / math.sqrt(self.size))
            if counter is not None:
                counter.tally(muls=self.size)
        return y

    def dense(self):
        eye = np.eye(self.size, dtype=np.complex128)
        return self.apply(eye)


class ZeroPad:
    """Append zero rows: J x = [x; 0]."""

    def __init__(self, out_dim: int, in_dim: int):
        if out_dim < in_dim:
            raise ValueError("zero-pad must grow the vector")
        self.out_dim = out_dim
        self.in_dim = in_dim

    def __repr__(self):
        return f"ZeroPad({self.in_dim} -> {self.out_dim})"

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    def apply(self, x, counter=None):
        x = np.asarray(x)
        pad = [(0, self.out_dim - self.in_dim)] + [(0, 0)] * (x.ndim - 1)
        return np.pad(x, pad)

    def dense(self):
        out = np.zeros((self.out_dim, self.in_dim), dtype=np.complex128)
        out[: self.in_dim] = np.eye(self.in_dim)
        return out


class Truncate:
    """Keep the leading rows: J^T x = x[:out_dim]."""

    def __init__(self, out_dim: int, in_dim: int):
        if out_dim > in_dim:
            raise ValueError("truncation must shrink the vector")
        self.out_dim = out_dim
        self.in_dim = in_dim

    def __repr__(self):
        return f"Truncate({self.in_dim} -> {self.out_dim})"

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    def apply(self, x, counter=None):
        return np.asarray(x)[: self.out_dim]

    def dense(self):
        out = np.zeros((self.out_dim, self.in_dim), dtype=np.complex128)
        out[:, : self.out_dim] = np.eye(self.out_dim)
        return out


class Permutation:
    """Row permutation out[i] = x[index[i]]."""

    def __init__(self, index: np.ndarray):
        self.index = np.asarray(index, dtype=np.intp)

    def __repr__(self):
        return f"Permutation({len(self.index)})"

    @property
    def shape(self):
        return (self.index.size, self.index.size)

    def apply(self, x, counter=None):
        return np.asarray(x)[self.index]

    def dense(self):
        return np.eye(len(self.index), dtype=np.complex128)[self.index]


class DenseBlock:
    """Small dense matrix factor (verification and leaf blocks only)."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=np.complex128)

    def __repr__(self):
        r, c = self.matrix.shape
        return f"DenseBlock({r} x {c})"

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x, counter=None):
        r, c = self.matrix.shape
        if counter is not None:
            counter.tally(muls=r * c, adds=r * (c - 1))
        return self.matrix @ x

    def dense(self):
        return self.matrix


@dataclass
class FactorChain:
    """Ordered sparse factors, listed in application order.

    spec is the DVM description the chain realizes; factors[0] touches the
    input first.  dense() exists for verification at small sizes and is the
    only place the product is ever materialized.
    """

    spec: DvmSpec
    factors: list = field(default_factory=list)

    def apply(self, x, counter: OpCounter | None = None) -> np.ndarray:
        y = np.asarray(x, dtype=np.complex128)
        for f in self.factors:
            y = f.apply(y, counter)
        return y

    def dense(self) -> np.ndarray:
        in_dim = self.factors[0].shape[1]
        return self.apply(np.eye(in_dim, dtype=np.complex128))


def build_bluestein_chain(spec: DvmSpec) -> FactorChain:
    """Seven-factor chirp factorization of the scaled DVM.

    Application order: diag(alpha^(k^2/2)), zero-pad N -> 2N, normalized DFT,
    diag of the raw DFT of the chirp circulant column, conjugate normalized
    DFT, truncate 2N -> N, diag(alpha^(k^2/2)) again.  The composition equals
    alpha**(k*l) to a few ulp per entry.
    """
    n, m = spec.n, spec.m
    k = np.arange(n, dtype=np.float64)
    d_hat = cis(spec.phi, 0.5 * k * k)
    d_breve = fft(circulant_first_column(spec))
    return FactorChain(
        spec=spec,
        factors=[
            Diagonal(d_hat),
            ZeroPad(m, n),
            Dft(m),
            Diagonal(d_breve),
            Dft(m, conj=True),
            Truncate(n, m),
            Diagonal(d_hat),
        ],
    )


def fast_dvm_apply(chain: FactorChain, x, counter: OpCounter | None = None) -> np.ndarray:
    """Apply the factored scaled DVM to a vector or column batch."""
    x = np.asarray(x)
    if x.shape[0] != chain.spec.n:
        raise ValueError(f"expected leading dimension {chain.spec.n}, got {x.shape[0]}")
    return chain.apply(x, counter)


def scaled_dvm_apply(spec: DvmSpec, x, counter: OpCounter | None = None) -> np.ndarray:
    """Convenience wrapper: build the chain for spec and apply it."""
    return fast_dvm_apply(build_bluestein_chain(spec), x, counter)


# ---------------------------------------------------------------------------
# recursive DFT factorization (the trainable block structure)


class RecursiveDftChain:
    """DFT of a power-of-two size as depth butterfly levels plus leaf blocks.

    Level l splits each block [u; v] into [u + v; D(u - v)] where D is one
    twiddle diagonal of half the block length; after depth levels the
    remaining segments of length size/2**depth are hit with a dense leaf
    matrix, and the even/odd interleavings are undone bottom-up.  With exact
    twiddles and an exact DFT leaf the chain reproduces the DFT; with free
    values the same wiring is what the network trains.

    twiddles[l] has shape (2**l, half_l) or (1, half_l) when siblings share
    one diagonal; leaf has shape (n_leaves, s, s) or (1, s, s).  scale is a
    frozen real normalization.
    """

    def __init__(self, size, depth, twiddles, leaf, scale=1.0, shared=True):
        if size < 1 or size & (size - 1):
            raise ValueError(f"chain size must be a power of two, got {size}")
        if not 0 <= depth <= size.bit_length() - 1:
            raise ValueError(
                f"depth {depth} leaves no leaf: need 0 <= depth <= log2({size})"
            )
        self.size = size
        self.depth = depth
        self.twiddles = [np.asarray(t, dtype=np.complex128) for t in twiddles]
        self.leaf = np.asarray(leaf, dtype=np.complex128)
        self.scale = float(scale)
        self.shared = bool(shared)
        for lvl, t in enumerate(self.twiddles):
            blocks = 1 if shared else (1 << lvl)
            if t.shape != (blocks, (size >> lvl) >> 1):
                raise ValueError(f"twiddle level {lvl} has shape {t.shape}")
        s = size >> depth
        n_leaves = 1 if shared else (1 << depth)
        if self.leaf.shape != (n_leaves, s, s):
            raise ValueError(f"leaf has shape {self.leaf.shape}, wanted ({n_leaves},{s},{s})")

    @property
    def leaf_size(self) -> int:
        return self.size >> self.depth

    def param_arrays(self):
        """Trainable arrays in declaration order: twiddle levels, then leaf."""
        return self.twiddles + [self.leaf]

    def apply(self, x, counter: OpCounter | None = None) -> np.ndarray:
        y, _ = self._run(x, counter=counter, want_trace=False)
        return y

    def apply_trace(self, x):
        """Forward pass keeping the intermediates backward() needs."""
        return self._run(x, counter=None, want_trace=True)

    def _run(self, x, counter, want_trace):
        x = np.asarray(x, dtype=np.complex128)
        flat = x.ndim == 1
        y = x[:, None].copy() if flat else x.copy()
        size = self.size
        if y.shape[0] != size:
            raise ValueError(f"expected leading dimension {size}, got {y.shape[0]}")
        diffs = [] if want_trace else None
        for lvl in range(self.depth):
            block = size >> lvl
            half = block >> 1
            v = y.reshape(1 << lvl, block, -1)
            d = v[:, :half] - v[:, half:]
            if want_trace:
                diffs.append(d)
            v[:, :half] = v[:, :half] + v[:, half:]
            v[:, half:] = d * self.twiddles[lvl][:, :, None]
            if counter is not None:
                counter.tally(muls=half << lvl, adds=size)
        s = self.leaf_size
        segs = y.reshape(-1, s, y.shape[-1])
        leaf_in = segs.copy() if want_trace else None
        y = np.matmul(self.leaf, segs).reshape(size, -1)
        if counter is not None:
            counter.tally(muls=(size // s) * s * s, adds=(size // s) * s * (s - 1))
        for lvl in range(self.depth - 1, -1, -1):
            block = size >> lvl
            half = block >> 1
            v = y.reshape(1 << lvl, block, -1)
            out = np.empty_like(v)
            out[:, 0::2] = v[:, :half]
            out[:, 1::2] = v[:, half:]
            y = out.reshape(size, -1)
        if self.scale != 1.0:
            y = y * self.scale
            if counter is not None:
                counter.tally(muls=size)
        trace = None
        if want_trace:
            trace = {"diffs": diffs, "leaf_in": leaf_in, "flat": flat}
        return (y[:, 0] if flat else y), trace

    def backward(self, trace, grad_out):
        """Adjoint pass.

        grad_out carries dL/dRe + j dL/dIm of the output.  Returns the same
        carrier for the input plus gradients for each twiddle level and the
        leaf, summed over batch (and over sibling blocks when shared).
        """
        size = self.size
        g = np.asarray(grad_out, dtype=np.complex128)
        flat = g.ndim == 1
        if flat:
            g = g[:, None]
        g = g * self.scale if self.scale != 1.0 else g.copy()
        for lvl in range(self.depth):
            block = size >> lvl
            half = block >> 1
            v = g.reshape(1 << lvl, block, -1)
            inv = np.empty_like(v)
            inv[:, :half] = v[:, 0::2]
            inv[:, half:] = v[:, 1::2]
            g = inv.reshape(size, -1)
        s = self.leaf_size
        g_segs = g.reshape(-1, s, g.shape[-1])
        leaf_grad = np.matmul(g_segs, np.conj(trace["leaf_in"]).transpose(0, 2, 1))
        if self.shared:
            leaf_grad = leaf_grad.sum(axis=0, keepdims=True)
        g = np.matmul(np.conj(self.leaf).transpose(0, 2, 1), g_segs).reshape(size, -1)
        tw_grads = [None] * self.depth
        for lvl in range(self.depth - 1, -1, -1):
            block = size >> lvl
            half = block >> 1
            v = g.reshape(1 << lvl, block, -1)
            g_top = v[:, :half]
            g_bot = v[:, half:]
            tw = self.twiddles[lvl][:, :, None]
            tg = (g_bot * np.conj(trace["diffs"][lvl])).sum(axis=-1)
            if self.shared:
                tg = tg.sum(axis=0, keepdims=True)
            tw_grads[lvl] = tg
            rot = np.conj(tw) * g_bot
            new_top = g_top + rot  # g_top aliases v; build both halves first
            new_bot = g_top - rot
            v[:, :half] = new_top
            v[:, half:] = new_bot
            g = v.reshape(size, -1)
        return (g[:, 0] if flat else g), tw_grads, leaf_grad

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.size, dtype=np.complex128))

    def copy(self) -> "RecursiveDftChain":
        return RecursiveDftChain(
            self.size,
            self.depth,
            [t.copy() for t in self.twiddles],
            self.leaf.copy(),
            self.scale,
            self.shared,
        )


def build_recursive_dft_chain(
    size: int,
    depth: int,
    exact: bool = True,
    inverse: bool = False,
    normalized: bool = False,
    shared: bool = True,
    rng: np.random.Generator | None = None,
) -> RecursiveDftChain:
    """Construct the recursive factorization of the size-point DFT.

    exact=True fills in the true twiddles omega_b**m and a dense DFT leaf so
    the chain reproduces the transform; exact=False draws unit-modulus random
    twiddles and 1/sqrt(s)-scaled random leaf entries as a training start.
    normalized=True makes the chain equal the unitary DFT: leaves are
    normalized and the frozen scale field folds in the remaining
    1/sqrt(2**depth).  inverse=True conjugates the exact values, giving the
    factorization of the conjugate DFT.
    """
    if size < 1 or size & (size - 1):
        raise ValueError(f"chain size must be a power of two, got {size}")
    if depth > size.bit_length() - 1:
        raise ValueError(f"depth {depth} exceeds log2({size})")
    s = size >> depth
    sign = 1.0 if inverse else -1.0
    twiddles = []
    for lvl in range(depth):
        block = size >> lvl
        half = block >> 1
        blocks = 1 if shared else (1 << lvl)
        if exact:
            row = np.exp(sign * 2j * np.pi * np.arange(half) / block)
            tw = np.tile(row, (blocks, 1))
        else:
            tw = np.exp(2j * np.pi * rng.random((blocks, half)))
        twiddles.append(tw)
    n_leaves = 1 if shared else (1 << depth)
    if exact:
        kk = np.arange(s)
        leaf_mat = np.exp(sign * 2j * np.pi * np.outer(kk, kk) / s) if s > 1 else np.ones((1, 1))
        if normalized:
            leaf_mat = leaf_mat / math.sqrt(s)
        leaf = np.tile(leaf_mat[None], (n_leaves, 1, 1))
    else:
        leaf = np.exp(2j * np.pi * rng.random((n_leaves, s, s))) / math.sqrt(s)
    scale = (2.0 ** (-depth / 2.0)) if normalized else 1.0
    return RecursiveDftChain(size, depth, twiddles, leaf, scale=scale, shared=shared)
