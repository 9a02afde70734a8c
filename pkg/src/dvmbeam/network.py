"""Structured and dense beamforming networks with a frozen delay layer.

Both network kinds map a real-split antenna snapshot (length 2N, real parts
of all N channels first, imaginary parts second) to the real-split transform
output.  The structured kind keeps its input and output layers in factored
form: each of the p submatrices is a chirp-scaled recursive DFT chain whose
twiddle diagonals, leaf blocks, and scaling diagonals are the only trainable
values, so a layer is applied factor by factor and is never densified.  The
fully connected baseline carries ordinary dense weight matrices of the same
layer widths.  Between them sit the same three fixed-width layers: a frozen
elementwise delay rotation diag(alpha**k), a trainable real diagonal skip
connection added around it, and biases.

Hidden vectors of width 4pN are laid out as [real section | imaginary
section], each section split into p slots of width 2N; the delay layer
rebuilds complex values from the two halves, which is what pins this layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import json
import math
import struct

import numpy as np

from .dvm import (
    RecursiveDftChain,
    build_recursive_dft_chain,
    circulant_first_column,
    cis,
    fft,
)

KIND_STRUCTURED = "structured"
KIND_DENSE = "fully_connected"

MODE_COMPLEX = "complex"
MODE_REAL = "real"

# Recursion depths used by the reference configurations; other sizes default
# to log2(N), one level short of full depth.
DEPTH_DEFAULTS = {8: 4, 16: 5, 32: 6}


def default_depth(n: int) -> int:
    return DEPTH_DEFAULTS.get(n, max(1, n.bit_length() - 1))


def real_split(z) -> np.ndarray:
    """Complex vector to stacked real vector: [Re z; Im z] along axis 0."""
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=0)


def real_join(x) -> np.ndarray:
    """Inverse of real_split."""
    x = np.asarray(x)
    k = x.shape[0] // 2
    return x[:k] + 1j * x[k:]


def leaky_relu(x, slope: float) -> np.ndarray:
    x = np.asarray(x)
    return np.where(x >= 0, x, slope * x)


@dataclass(frozen=True)
class NetworkConfig:
    """Shape and behavior of one network.

    n: channel count (power of two >= 2); hidden width is 4*p*n.
    depth: butterfly levels in each trainable DFT chain (the lambda knob).
        Complex mode runs chains of complex size 2n, so depth <= log2(2n);
        real mode runs them at real size 4n, so depth <= log2(4n).
    l_layers: total layer count; 5, or 4k+1 to repeat the block structure.
    delay_alpha: unit-modulus generator of the frozen delay diagonal
        (1 makes the delay the identity).
    param_mode: "complex" (default; the only mode that can represent the
        exact transform) or "real", one real scalar per real-split
        coordinate as in the operation-count reading.
    tie_scaling: share each submatrix's chirp scaling diagonal between the
        input and output layers, as the factorization itself does.
    """

    n: int
    p: int = 1
    depth: int | None = None
    l_layers: int = 5
    kind: str = KIND_STRUCTURED
    activation_slope: float = 0.2
    delay_alpha: complex = 1.0 + 0.0j
    seed: int = 0
    param_mode: str = MODE_COMPLEX
    tie_scaling: bool = True
    share_siblings: bool = True

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.l_layers < 5 or (self.l_layers - 1) % 4:
            raise ValueError(
                f"l_layers must be 5 or 4k+1 (block repeats), got {self.l_layers}"
            )
        if self.kind not in (KIND_STRUCTURED, KIND_DENSE):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.param_mode not in (MODE_COMPLEX, MODE_REAL):
            raise ValueError(f"unknown param_mode {self.param_mode!r}")
        if abs(abs(self.delay_alpha) - 1.0) > 1e-12:
            raise ValueError("delay_alpha must be unit modulus")
        if self.activation_slope < 0:
            raise ValueError("activation_slope must be >= 0")
        if self.kind == KIND_STRUCTURED:
            lim = self.chain_size.bit_length() - 1
            if not 0 <= self.resolved_depth <= lim:
                raise ValueError(
                    f"depth {self.resolved_depth} out of range 0..{lim} "
                    f"for chain size {self.chain_size}"
                )

    @property
    def m(self) -> int:
        return 2 * self.n

    @property
    def chain_size(self) -> int:
        # complex chains act on C^(2n); real mode runs the real-split width
        return self.m if self.param_mode == MODE_COMPLEX else 2 * self.m

    @property
    def resolved_depth(self) -> int:
        return default_depth(self.n) if self.depth is None else self.depth

    @property
    def hidden(self) -> int:
        return 4 * self.p * self.n

    @property
    def blocks_count(self) -> int:
        return (self.l_layers - 1) // 4

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "depth": self.resolved_depth,
            "l_layers": self.l_layers,
            "kind": self.kind,
            "activation_slope": self.activation_slope,
            "delay_alpha": [self.delay_alpha.real, self.delay_alpha.imag],
            "seed": self.seed,
            "param_mode": self.param_mode,
            "tie_scaling": self.tie_scaling,
            "share_siblings": self.share_siblings,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        da = d.get("delay_alpha", [1.0, 0.0])
        return NetworkConfig(
            n=int(d["n"]),
            p=int(d.get("p", 1)),
            depth=int(d["depth"]) if d.get("depth") is not None else None,
            l_layers=int(d.get("l_layers", 5)),
            kind=d.get("kind", KIND_STRUCTURED),
            activation_slope=float(d.get("activation_slope", 0.2)),
            delay_alpha=complex(da[0], da[1]),
            seed=int(d.get("seed", 0)),
            param_mode=d.get("param_mode", MODE_COMPLEX),
            tie_scaling=bool(d.get("tie_scaling", True)),
            share_siblings=bool(d.get("share_siblings", True)),
        )


@dataclass
class StructuredBlock:
    d_hat: list          # p arrays: complex (n,) or real (2n,)
    f_chains: list       # p RecursiveDftChain
    d_breve: list        # p arrays: complex (m,) or real (2m,)
    fstar_chains: list   # p RecursiveDftChain
    d_hat_out: list | None  # None when tied to d_hat
    bias1: np.ndarray
    skip: np.ndarray
    bias_out: np.ndarray


@dataclass
class DenseBlockParams:
    w1: np.ndarray       # (4pn, 2n)
    w4: np.ndarray       # (2n, 4pn)
    bias1: np.ndarray
    skip: np.ndarray
    bias_out: np.ndarray


class Network:
    """A configured network plus its trainable and frozen state."""

    def __init__(self, config: NetworkConfig, blocks: list):
        self.config = config
        self.blocks = blocks
        k = np.arange(2 * config.p * config.n, dtype=np.float64)
        phi = math.atan2(config.delay_alpha.imag, config.delay_alpha.real)
        self.delay = cis(phi, k)  # frozen diag(alpha**k), k = 0..2pn-1
        self.delay_exponents = k.astype(np.intp)

    # -- parameter plumbing ------------------------------------------------

    def param_entries(self):
        """Yield (path, array, kind) for every trainable array, in the fixed
        declaration order used by flattening and serialization.

        kind "complex" packs re/im pairs, "real" packs values, "creal" is a
        complex-typed array whose imaginary parts are structurally zero
        (real parameter mode), packing only the real parts.
        """
        cfg = self.config
        chain_kind = "complex" if cfg.param_mode == MODE_COMPLEX else "creal"
        diag_kind = "complex" if cfg.param_mode == MODE_COMPLEX else "real"
        for b, blk in enumerate(self.blocks):
            if cfg.kind == KIND_STRUCTURED:
                for i in range(cfg.p):
                    yield f"block{b}.w1.sub{i}.d_hat", blk.d_hat[i], diag_kind
                    for lvl, tw in enumerate(blk.f_chains[i].twiddles):
                        yield f"block{b}.w1.sub{i}.f.twiddle{lvl}", tw, chain_kind
                    yield f"block{b}.w1.sub{i}.f.leaf", blk.f_chains[i].leaf, chain_kind
                    yield f"block{b}.w1.sub{i}.d_breve", blk.d_breve[i], diag_kind
                yield f"block{b}.bias1", blk.bias1, "real"
                yield f"block{b}.skip", blk.skip, "real"
                for i in range(cfg.p):
                    for lvl, tw in enumerate(blk.fstar_chains[i].twiddles):
                        yield f"block{b}.w4.sub{i}.fstar.twiddle{lvl}", tw, chain_kind
                    yield f"block{b}.w4.sub{i}.fstar.leaf", blk.fstar_chains[i].leaf, chain_kind
                    if blk.d_hat_out is not None:
                        yield f"block{b}.w4.sub{i}.d_hat_out", blk.d_hat_out[i], diag_kind
                yield f"block{b}.bias_out", blk.bias_out, "real"
            else:
                yield f"block{b}.w1", blk.w1, "real"
                yield f"block{b}.bias1", blk.bias1, "real"
                yield f"block{b}.skip", blk.skip, "real"
                yield f"block{b}.w4", blk.w4, "real"
                yield f"block{b}.bias_out", blk.bias_out, "real"

    def param_count(self) -> int:
        total = 0
        for _, arr, kind in self.param_entries():
            total += arr.size * (2 if kind == "complex" else 1)
        return total

    def get_flat(self) -> np.ndarray:
        parts = []
        for _, arr, kind in self.param_entries():
            if kind == "complex":
                buf = np.empty(arr.size * 2)
                buf[0::2] = arr.real.ravel()
                buf[1::2] = arr.imag.ravel()
                parts.append(buf)
            elif kind == "creal":
                parts.append(arr.real.ravel().copy())
            else:
                parts.append(arr.ravel().copy())
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.param_count(),):
            raise ValueError(
                f"flat vector has {flat.shape}, expected ({self.param_count()},)"
            )
        pos = 0
        for _, arr, kind in self.param_entries():
            if kind == "complex":
                k = arr.size * 2
                chunk = flat[pos : pos + k]
                arr.ravel()[...] = chunk[0::2] + 1j * chunk[1::2]
            elif kind == "creal":
                k = arr.size
                arr.ravel()[...] = flat[pos : pos + k].astype(np.complex128)
            else:
                k = arr.size
                arr.ravel()[...] = flat[pos : pos + k]
            pos += k

    def forward(self, x, want_trace: bool = False):
        return forward(self, x, want_trace)


@dataclass
class BlockTrace:
    x: np.ndarray              # block input, real (2n, B)
    x_c: np.ndarray | None     # complex view of input (complex mode)
    chain_traces: list         # per submatrix, w1 chain trace
    chain_out: list            # per submatrix, chain output before d_breve
    pre1: np.ndarray
    y1: np.ndarray
    y1_c: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    fstar_traces: list
    t_trunc: list              # per submatrix, truncated conj-chain output
    y_out: np.ndarray


@dataclass
class ForwardTrace:
    """Per-layer intermediates kept for inspection and the backward pass."""

    x: np.ndarray
    block_traces: list
    y: np.ndarray


def _as_columns(x, width):
    x = np.asarray(x, dtype=np.float64)
    flat = x.ndim == 1
    if flat:
        x = x[:, None]
    if x.shape[0] != width:
        raise ValueError(f"expected leading dimension {width}, got {x.shape[0]}")
    return x, flat


def _block_forward(cfg: NetworkConfig, blk, delay, x, want_trace):
    n, p, m = cfg.n, cfg.p, cfg.m
    hidden = cfg.hidden
    if cfg.kind == KIND_DENSE:
        pre1 = blk.w1 @ x + blk.bias1[:, None]
        y1 = leaky_relu(pre1, cfg.activation_slope)
        y1_c = y1[: hidden // 2] + 1j * y1[hidden // 2 :]
        y2 = np.concatenate([(delay[:, None] * y1_c).real, (delay[:, None] * y1_c).imag])
        y3 = y2 + blk.skip[:, None] * y1
        y_out = blk.w4 @ y3 + blk.bias_out[:, None]
        trace = None
        if want_trace:
            trace = BlockTrace(
                x=x, x_c=None, chain_traces=[], chain_out=[], pre1=pre1, y1=y1,
                y1_c=y1_c, y2=y2, y3=y3, fstar_traces=[], t_trunc=[], y_out=y_out,
            )
        return y_out, trace

    complex_mode = cfg.param_mode == MODE_COMPLEX
    size = cfg.chain_size
    if complex_mode:
        x_c = x[:n] + 1j * x[n:]
        in_dim = n
    else:
        x_c = x.astype(np.complex128)  # imag stays exactly zero throughout
        in_dim = 2 * n
    chain_traces, chain_out = [], []
    re_parts, im_parts = [], []
    for i in range(p):
        u = blk.d_hat[i][:, None] * x_c
        pad = np.zeros((size, u.shape[1]), dtype=np.complex128)
        pad[:in_dim] = u
        if want_trace:
            c, tr = blk.f_chains[i].apply_trace(pad)
            chain_traces.append(tr)
        else:
            c = blk.f_chains[i].apply(pad)
        z = blk.d_breve[i][:, None] * c
        chain_out.append(c if want_trace else None)
        if complex_mode:
            re_parts.append(z.real)
            im_parts.append(z.imag)
        else:
            re_parts.append(z.real[:m])
            im_parts.append(z.real[m:])
    pre1 = np.concatenate(re_parts + im_parts) + blk.bias1[:, None]
    y1 = leaky_relu(pre1, cfg.activation_slope)
    half = hidden // 2
    y1_c = y1[:half] + 1j * y1[half:]
    y2_c = delay[:, None] * y1_c
    y2 = np.concatenate([y2_c.real, y2_c.imag])
    y3 = y2 + blk.skip[:, None] * y1
    y3_c = y3[:half] + 1j * y3[half:]
    v = None
    fstar_traces, t_trunc = [], []
    d_out = blk.d_hat_out if blk.d_hat_out is not None else blk.d_hat
    for i in range(p):
        slot = y3_c[i * m : (i + 1) * m]
        if complex_mode:
            chain_in = slot
        else:
            chain_in = np.concatenate([slot.real, slot.imag]).astype(np.complex128)
        if want_trace:
            fs, tr = blk.fstar_chains[i].apply_trace(chain_in)
            fstar_traces.append(tr)
        else:
            fs = blk.fstar_chains[i].apply(chain_in)
        t = fs[:in_dim]
        t_trunc.append(t if want_trace else None)
        vi = d_out[i][:, None] * t
        v = vi if v is None else v + vi
    if complex_mode:
        y_out = np.concatenate([v.real, v.imag]) + blk.bias_out[:, None]
    else:
        y_out = v.real + blk.bias_out[:, None]
    trace = None
    if want_trace:
        trace = BlockTrace(
            x=x, x_c=x_c, chain_traces=chain_traces, chain_out=chain_out,
            pre1=pre1, y1=y1, y1_c=y1_c, y2=y2, y3=y3,
            fstar_traces=fstar_traces, t_trunc=t_trunc, y_out=y_out,
        )
    return y_out, trace


def forward(net: Network, x, want_trace: bool = False):
    """Run the network on one real-split vector or a (2n, B) column batch.

    Returns (y, trace); trace is None unless requested.
    """
    cfg = net.config
    x2, flat = _as_columns(x, 2 * cfg.n)
    block_traces = []
    y = x2
    for blk in net.blocks:
        y, tr = _block_forward(cfg, blk, net.delay, y, want_trace)
        if want_trace:
            block_traces.append(tr)
    trace = ForwardTrace(x=x2, block_traces=block_traces, y=y) if want_trace else None
    return (y[:, 0] if flat else y), trace


# ---------------------------------------------------------------------------
# construction


def _random_unit(rng, shape, mode):
    if mode == MODE_COMPLEX:
        return np.exp(2j * np.pi * rng.random(shape))
    return rng.standard_normal(shape)


def build_network(config: NetworkConfig) -> Network:
    """Construct a network with the documented random initialization.

    Complex parameters start unit modulus with uniform random phase scaled
    by 1/sqrt(fan_in) (fan_in is 1 for diagonals, the leaf size for leaf
    blocks); dense baseline weights are uniform +-1/sqrt(fan_in); biases and
    the skip diagonal start at zero.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n, p, m = cfg.n, cfg.p, cfg.m
    blocks = []
    for _ in range(cfg.blocks_count):
        if cfg.kind == KIND_DENSE:
            a1 = 1.0 / math.sqrt(2 * n)
            a4 = 1.0 / math.sqrt(cfg.hidden)
            blocks.append(
                DenseBlockParams(
                    w1=rng.uniform(-a1, a1, (cfg.hidden, 2 * n)),
                    bias1=np.zeros(cfg.hidden),
                    skip=np.zeros(cfg.hidden),
                    w4=rng.uniform(-a4, a4, (2 * n, cfg.hidden)),
                    bias_out=np.zeros(2 * n),
                )
            )
            continue
        complex_mode = cfg.param_mode == MODE_COMPLEX
        diag_n = n if complex_mode else 2 * n
        diag_m = m if complex_mode else 2 * m
        d_hat, d_breve, f_chains, fstar_chains, d_hat_out = [], [], [], [], []
        for _ in range(p):
            d_hat.append(_random_unit(rng, diag_n, cfg.param_mode))
            f_chains.append(
                _chain_init(cfg, rng, exact=False)
            )
            d_breve.append(_random_unit(rng, diag_m, cfg.param_mode))
        for _ in range(p):
            fstar_chains.append(_chain_init(cfg, rng, exact=False))
            if not cfg.tie_scaling:
                d_hat_out.append(_random_unit(rng, diag_n, cfg.param_mode))
        blocks.append(
            StructuredBlock(
                d_hat=d_hat,
                f_chains=f_chains,
                d_breve=d_breve,
                fstar_chains=fstar_chains,
                d_hat_out=d_hat_out if not cfg.tie_scaling else None,
                bias1=np.zeros(cfg.hidden),
                skip=np.zeros(cfg.hidden),
                bias_out=np.zeros(2 * n),
            )
        )
    return Network(cfg, blocks)


def _chain_init(cfg, rng, exact, inverse=False):
    chain = build_recursive_dft_chain(
        cfg.chain_size,
        cfg.resolved_depth,
        exact=exact,
        inverse=inverse,
        normalized=True,
        shared=cfg.share_siblings,
        rng=None if exact else rng,
    )
    if cfg.param_mode == MODE_REAL and not exact:
        for tw in chain.twiddles:
            tw.imag = 0.0
        chain.leaf.imag = 0.0
    return chain


def init_from_dvm(net: Network, alpha: complex) -> Network:
    """Load the exact factorization values into every block and submatrix.

    The scaling diagonals become the chirp diag(alpha**(k^2/2)), the chain
    values become exact (conjugated on the output side), the middle diagonal
    becomes the raw DFT of the chirp circulant column, and biases and skip
    go to zero.  With slope 1 and delay_alpha 1 the p=1 network then applies
    the scaled DVM exactly.  Complex parameter mode only.
    """
    cfg = net.config
    if cfg.kind != KIND_STRUCTURED:
        raise ValueError("exact initialization applies to the structured kind")
    if cfg.param_mode != MODE_COMPLEX:
        raise ValueError("exact DVM initialization requires complex parameter mode")
    if abs(abs(alpha) - 1.0) > 1e-12:
        raise ValueError("alpha must be unit modulus")
    from .dvm import DvmSpec

    spec = DvmSpec(cfg.n, alpha)
    k = np.arange(cfg.n, dtype=np.float64)
    d_hat = cis(spec.phi, 0.5 * k * k)
    d_breve = fft(circulant_first_column(spec))
    for blk in net.blocks:
        for i in range(cfg.p):
            blk.d_hat[i][...] = d_hat
            blk.d_breve[i][...] = d_breve
            exact_f = _chain_init(cfg, None, exact=True)
            exact_fs = _chain_init(cfg, None, exact=True, inverse=True)
            for tw, src in zip(blk.f_chains[i].twiddles, exact_f.twiddles):
                tw[...] = np.broadcast_to(src, tw.shape)
            blk.f_chains[i].leaf[...] = np.broadcast_to(exact_f.leaf, blk.f_chains[i].leaf.shape)
            for tw, src in zip(blk.fstar_chains[i].twiddles, exact_fs.twiddles):
                tw[...] = np.broadcast_to(src, tw.shape)
            blk.fstar_chains[i].leaf[...] = np.broadcast_to(
                exact_fs.leaf, blk.fstar_chains[i].leaf.shape
            )
            if blk.d_hat_out is not None:
                blk.d_hat_out[i][...] = d_hat
        blk.bias1[...] = 0.0
        blk.skip[...] = 0.0
        blk.bias_out[...] = 0.0
    return net


def count_parameters(net: Network) -> dict:
    """Trainable scalar count with a per-layer breakdown."""
    by_layer: dict = {}
    for path, arr, kind in net.param_entries():
        scalars = arr.size * (2 if kind == "complex" else 1)
        parts = path.split(".")
        layer = parts[1] if len(parts) > 1 else path
        by_layer[layer] = by_layer.get(layer, 0) + scalars
    return {"total": sum(by_layer.values()), "by_layer": by_layer}


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"STNN"
_FORMAT_VERSION = 1
_KIND_CODE = {KIND_STRUCTURED: 0, KIND_DENSE: 1}
_MODE_CODE = {MODE_COMPLEX: 0, MODE_REAL: 1}


def save_network(net: Network, path: str) -> None:
    """Write magic, format version, config fields, then the flat trainable
    vector as little-endian 64-bit floats in declaration order."""
    cfg = net.config
    flat = net.get_flat()
    head = struct.pack(
        "<4sIIIIIBBBBddddq Q".replace(" ", ""),
        _MAGIC,
        _FORMAT_VERSION,
        cfg.n,
        cfg.p,
        cfg.resolved_depth,
        cfg.l_layers,
        _KIND_CODE[cfg.kind],
        _MODE_CODE[cfg.param_mode],
        int(cfg.tie_scaling),
        int(cfg.share_siblings),
        cfg.activation_slope,
        cfg.delay_alpha.real,
        cfg.delay_alpha.imag,
        0.0,  # reserved
        cfg.seed,
        flat.size,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(flat.astype("<f8").tobytes())


def load_network(path: str) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    head_fmt = "<4sIIIIIBBBBddddqQ"
    head_size = struct.calcsize(head_fmt)
    if len(data) < head_size:
        raise ValueError(f"{path}: truncated network file")
    (magic, version, n, p, depth, l_layers, kind_c, mode_c, tie, share,
     slope, da_re, da_im, _reserved, seed, n_params) = struct.unpack(
        head_fmt, data[:head_size]
    )
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, not a network file")
    if version != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    kind = {v: k for k, v in _KIND_CODE.items()}[kind_c]
    mode = {v: k for k, v in _MODE_CODE.items()}[mode_c]
    cfg = NetworkConfig(
        n=n, p=p, depth=depth, l_layers=l_layers, kind=kind,
        activation_slope=slope, delay_alpha=complex(da_re, da_im), seed=seed,
        param_mode=mode, tie_scaling=bool(tie), share_siblings=bool(share),
    )
    net = build_network(cfg)
    flat = np.frombuffer(data[head_size:], dtype="<f8")
    if flat.size != n_params or n_params != net.param_count():
        raise ValueError(
            f"{path}: parameter payload {flat.size} does not match header "
            f"{n_params} / config {net.param_count()}"
        )
    net.set_flat(np.asarray(flat, dtype=np.float64))
    return net


def network_to_json(net: Network) -> dict:
    """JSON-friendly mirror of the binary format, for inspection."""
    params = {}
    for path, arr, kind in net.param_entries():
        if kind in ("complex", "creal"):
            params[path] = {
                "kind": kind,
                "shape": list(arr.shape),
                "re": arr.real.ravel().tolist(),
                "im": arr.imag.ravel().tolist() if kind == "complex" else None,
            }
        else:
            params[path] = {
                "kind": kind,
                "shape": list(arr.shape),
                "values": arr.ravel().tolist(),
            }
    return {
        "format": "dvmbeam-network",
        "version": _FORMAT_VERSION,
        "config": net.config.to_dict(),
        "param_count": net.param_count(),
        "params": params,
    }


def save_network_json(net: Network, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_json(net), fh, indent=1, sort_keys=True)
        fh.write("\n")
