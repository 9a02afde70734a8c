"""Loss, analytic gradients, optimizers, and the training loop.

Gradients are computed by a hand-written reverse pass over the factored
layers.  Complex trainables use the real-pair convention: the carrier for a
complex intermediate z is g = dL/dRe(z) + j dL/dIm(z), which gives the
familiar rules
    y = d * x      ->  g_d += g_y * conj(x),  g_x = g_y * conj(d)
    y = A  x       ->  g_A += g_y x^H,        g_x = A^H g_y
and lets one pass serve both parameter modes: real-mode parameters take the
real part of their carrier product, which is the gradient restricted to the
real axis.

Batch reductions are chunked at a fixed column width and summed in fixed
order, so the worker count changes wall time but never a single bit of the
result.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
import hashlib
import json
import math
import time

import numpy as np

from .network import (
    KIND_DENSE,
    KIND_STRUCTURED,
    MODE_COMPLEX,
    Network,
    NetworkConfig,
    _as_columns,
    _block_forward,
    forward,
)

# fixed reduction chunk: keeps gradient sums independent of the worker count
_CHUNK_COLS = 32


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite during training."""


def mse_loss(pred, target, n: int) -> float:
    """Squared error summed over all 2n real components, averaged over the
    batch, divided by n (so a unit-error complex channel contributes 1)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    cols = 1 if pred.ndim == 1 else pred.shape[1]
    return float(np.sum((pred - target) ** 2) / (n * cols))


@dataclass
class GradientPack:
    """Gradients keyed by the parameter paths of Network.param_entries."""

    data: dict

    def to_flat(self, net: Network) -> np.ndarray:
        parts = []
        for path, arr, kind in net.param_entries():
            g = self.data[path]
            if kind == "complex":
                buf = np.empty(arr.size * 2)
                buf[0::2] = g.real.ravel()
                buf[1::2] = g.imag.ravel()
                parts.append(buf)
            elif kind == "creal":
                parts.append(np.asarray(g).real.ravel())
            else:
                parts.append(np.asarray(g).real.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)


def _zero_grads(net: Network) -> dict:
    out = {}
    for path, arr, kind in net.param_entries():
        out[path] = np.zeros_like(arr)
    return out


def _leaky_grad(pre, slope):
    return np.where(pre >= 0, 1.0, slope)


def _block_backward(cfg: NetworkConfig, blk, delay, tr, g_out, grads, prefix):
    """Reverse one block; returns the gradient wrt the block input."""
    n, p, m = cfg.n, cfg.p, cfg.m
    half = cfg.hidden // 2
    slope = cfg.activation_slope

    if cfg.kind == KIND_DENSE:
        grads[f"{prefix}.bias_out"] += g_out.sum(axis=1)
        g_y3 = blk.w4.T @ g_out
        grads[f"{prefix}.w4"] += g_out @ tr.y3.T
        grads[f"{prefix}.skip"] += (g_y3 * tr.y1).sum(axis=1)
        g_y2c = g_y3[:half] + 1j * g_y3[half:]
        g_y1c = np.conj(delay)[:, None] * g_y2c
        g_y1 = np.concatenate([g_y1c.real, g_y1c.imag]) + g_y3 * blk.skip[:, None]
        g_pre1 = g_y1 * _leaky_grad(tr.pre1, slope)
        grads[f"{prefix}.bias1"] += g_pre1.sum(axis=1)
        grads[f"{prefix}.w1"] += g_pre1 @ tr.x.T
        return blk.w1.T @ g_pre1

    complex_mode = cfg.param_mode == MODE_COMPLEX
    in_dim = n if complex_mode else 2 * n
    size = cfg.chain_size
    cols = g_out.shape[1]

    grads[f"{prefix}.bias_out"] += g_out.sum(axis=1)
    if complex_mode:
        g_v = g_out[:n] + 1j * g_out[n:]
    else:
        g_v = g_out.astype(np.complex128)
    d_out = blk.d_hat_out if blk.d_hat_out is not None else blk.d_hat
    d_out_name = "d_hat_out" if blk.d_hat_out is not None else None
    g_y3c = np.zeros((half, cols), dtype=np.complex128)
    for i in range(p):
        t_i = tr.t_trunc[i]
        gd = (g_v * np.conj(t_i)).sum(axis=1)
        if d_out_name is not None:
            key = f"{prefix}.w4.sub{i}.{d_out_name}"
        else:
            key = f"{prefix}.w1.sub{i}.d_hat"  # tied scaling accumulates here
        grads[key] += gd if np.iscomplexobj(grads[key]) else gd.real
        g_t = np.conj(d_out[i])[:, None] * g_v
        g_fs = np.zeros((size, cols), dtype=np.complex128)
        g_fs[:in_dim] = g_t
        g_ci, tw_g, leaf_g = blk.fstar_chains[i].backward(tr.fstar_traces[i], g_fs)
        for lvl, tg in enumerate(tw_g):
            grads[f"{prefix}.w4.sub{i}.fstar.twiddle{lvl}"] += tg
        grads[f"{prefix}.w4.sub{i}.fstar.leaf"] += leaf_g
        if complex_mode:
            g_y3c[i * m : (i + 1) * m] += g_ci
        else:
            g_y3c[i * m : (i + 1) * m] += g_ci.real[:m] + 1j * g_ci.real[m:]

    g_y3 = np.concatenate([g_y3c.real, g_y3c.imag])
    grads[f"{prefix}.skip"] += (g_y3 * tr.y1).sum(axis=1)
    g_y2c = g_y3c  # same carrier: y3 = y2 + skip*y1 is the identity on y2
    g_y1c = np.conj(delay)[:, None] * g_y2c
    g_y1 = np.concatenate([g_y1c.real, g_y1c.imag]) + g_y3 * blk.skip[:, None]
    g_pre1 = g_y1 * _leaky_grad(tr.pre1, slope)
    grads[f"{prefix}.bias1"] += g_pre1.sum(axis=1)

    g_u_stack = g_pre1[:half] + 1j * g_pre1[half:]
    g_x_c = np.zeros((in_dim, cols), dtype=np.complex128)
    for i in range(p):
        g_z = g_u_stack[i * m : (i + 1) * m]
        if not complex_mode:
            g_z = np.concatenate([g_z.real, g_z.imag]).astype(np.complex128)
        c_i = tr.chain_out[i]
        gdb = (g_z * np.conj(c_i)).sum(axis=1)
        key = f"{prefix}.w1.sub{i}.d_breve"
        grads[key] += gdb if np.iscomplexobj(grads[key]) else gdb.real
        g_c = np.conj(blk.d_breve[i])[:, None] * g_z
        g_pad, tw_g, leaf_g = blk.f_chains[i].backward(tr.chain_traces[i], g_c)
        for lvl, tg in enumerate(tw_g):
            grads[f"{prefix}.w1.sub{i}.f.twiddle{lvl}"] += tg
        grads[f"{prefix}.w1.sub{i}.f.leaf"] += leaf_g
        g_u = g_pad[:in_dim]
        gdh = (g_u * np.conj(tr.x_c)).sum(axis=1)
        key = f"{prefix}.w1.sub{i}.d_hat"
        grads[key] += gdh if np.iscomplexobj(grads[key]) else gdh.real
        g_x_c += np.conj(blk.d_hat[i])[:, None] * g_u

    if complex_mode:
        return np.concatenate([g_x_c.real, g_x_c.imag])
    return g_x_c.real


def backward(net: Network, trace, target, norm: float | None = None) -> GradientPack:
    """Gradient of the MSE between trace output and target, for every
    trainable parameter.  norm overrides the n*batch denominator so batch
    chunks of a larger reduction can share one normalization."""
    cfg = net.config
    target, _ = _as_columns(target, 2 * cfg.n)
    y = trace.y
    if y.shape != target.shape:
        raise ValueError(f"target shape {target.shape} does not match {y.shape}")
    if norm is None:
        norm = cfg.n * y.shape[1]
    g = (2.0 / norm) * (y - target)
    grads = _zero_grads(net)
    for b in range(len(net.blocks) - 1, -1, -1):
        g = _block_backward(
            cfg, net.blocks[b], net.delay, trace.block_traces[b], g, grads, f"block{b}"
        )
    return GradientPack(grads)


def loss_and_grads(net: Network, x, target, norm: float | None = None):
    """Forward + backward in one call; returns (loss, GradientPack)."""
    x2, _ = _as_columns(x, 2 * net.config.n)
    y, trace = forward(net, x2, want_trace=True)
    loss = mse_loss(y, np.asarray(target, dtype=np.float64).reshape(y.shape), net.config.n)
    return loss, backward(net, trace, target, norm=norm)


# ---------------------------------------------------------------------------
# gradient verification


def min_preactivation_gap(net: Network, x) -> float:
    """Smallest |pre-activation| across all blocks for the given input;
    finite-difference checks need this clear of the activation kink."""
    _, trace = forward(net, x, want_trace=True)
    return min(float(np.min(np.abs(tr.pre1))) for tr in trace.block_traces)


def grad_check(
    net: Network,
    x,
    target,
    h_scale: float = 1e-6,
    corrupt: tuple | None = None,
) -> dict:
    """Compare analytic gradients against central finite differences of the
    loss, one flat coordinate at a time.

    Relative error uses max(1, |analytic|) in the denominator so tiny
    gradients do not blow the ratio up.  corrupt=(path, index, factor)
    multiplies one analytic component before comparison; a working check
    must then report that path as the worst offender.
    """
    cfg = net.config
    x2, _ = _as_columns(x, 2 * cfg.n)
    t2, _ = _as_columns(target, 2 * cfg.n)
    _, trace = forward(net, x2, want_trace=True)
    pack = backward(net, trace, t2)
    analytic = pack.to_flat(net)

    spans = []  # (path, start, stop) over the flat vector
    pos = 0
    for path, arr, kind in net.param_entries():
        k = arr.size * (2 if kind == "complex" else 1)
        spans.append((path, pos, pos + k))
        pos += k
    if corrupt is not None:
        path, idx, factor = corrupt
        for p_, a_, b_ in spans:
            if p_ == path:
                analytic[a_ + idx] *= factor
                break
        else:
            raise ValueError(f"unknown parameter path {path!r}")

    theta0 = net.get_flat()
    fd = np.empty_like(analytic)
    try:
        for j in range(theta0.size):
            h = h_scale * max(1.0, abs(theta0[j]))
            for sign, slot in ((1.0, 0), (-1.0, 1)):
                theta = theta0.copy()
                theta[j] += sign * h
                net.set_flat(theta)
                y, _ = forward(net, x2)
                if slot == 0:
                    lp = mse_loss(y, t2, cfg.n)
                else:
                    lm = mse_loss(y, t2, cfg.n)
            fd[j] = (lp - lm) / (2 * h)
    finally:
        net.set_flat(theta0)

    rel = np.abs(fd - analytic) / np.maximum(1.0, np.abs(analytic))
    worst = int(np.argmax(rel))
    worst_path = next(p_ for p_, a_, b_ in spans if a_ <= worst < b_)
    worst_off = worst - next(a_ for p_, a_, b_ in spans if p_ == worst_path)
    return {
        "max_rel_err": float(rel[worst]),
        "worst_path": worst_path,
        "worst_index": int(worst_off),
        "n_checked": int(theta0.size),
    }


# ---------------------------------------------------------------------------
# optimizers


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "adam"
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    shuffle: bool = True
    target_mse: float | None = None
    patience: int | None = None
    lm_mu: float = 1e-3
    lm_factor: float = 10.0
    lm_retries: int = 8
    workers: int = 1

    def __post_init__(self):
        if self.name == "lm":
            object.__setattr__(self, "name", "gauss_newton_lm")
        if self.name not in ("sgd", "adam", "gauss_newton_lm"):
            raise ValueError(f"unknown optimizer {self.name!r}")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("lr must be > 0, batch_size >= 1, epochs >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.lm_factor <= 1:
            raise ValueError("lm_factor must be > 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "lr": self.lr, "batch_size": self.batch_size,
            "epochs": self.epochs, "seed": self.seed, "shuffle": self.shuffle,
            "target_mse": self.target_mse, "patience": self.patience,
            "lm_mu": self.lm_mu, "lm_factor": self.lm_factor,
            "lm_retries": self.lm_retries, "workers": self.workers,
        }

    @staticmethod
    def from_dict(d: dict) -> "OptimizerConfig":
        return OptimizerConfig(**{
            k: d[k] for k in OptimizerConfig.__dataclass_fields__ if k in d
        })


class _AdamState:
    def __init__(self, size):
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, theta, g, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.t += 1
        self.m = b1 * self.m + (1 - b1) * g
        self.v = b2 * self.v + (1 - b2) * g * g
        mh = self.m / (1 - b1 ** self.t)
        vh = self.v / (1 - b2 ** self.t)
        return theta - lr * mh / (np.sqrt(vh) + eps)


_LM_PARAM_LIMIT = 5000


def _lm_residual(model, xb, tb):
    # a model may define its own residual map (anything with get_flat /
    # set_flat / residuals works, not just Network)
    res_fn = getattr(model, "residuals", None)
    if res_fn is not None:
        return np.asarray(res_fn(xb, tb), dtype=np.float64).ravel()
    y, _ = forward(model, xb)
    return (y - tb).ravel()


def gauss_newton_lm_step(net, xb, tb, mu, cfg: OptimizerConfig, h_scale=1e-6):
    """One damped least-squares step on the batch; the Jacobian comes from
    central differences (exact up to roundoff here, since residuals are
    piecewise linear in every parameter).  Returns (loss_after, mu)."""
    theta0 = net.get_flat()
    n_par = theta0.size
    if n_par > _LM_PARAM_LIMIT:
        raise ValueError(
            f"the damped least-squares optimizer builds a dense Jacobian and "
            f"supports at most {_LM_PARAM_LIMIT} trainable parameters, got "
            f"{n_par}; use the adam optimizer for nets this large"
        )
    r0 = _lm_residual(net, xb, tb)
    cfg_obj = getattr(net, "config", None)
    norm = cfg_obj.n * xb.shape[1] if cfg_obj is not None else r0.size
    loss0 = float(r0 @ r0) / norm
    jac = np.empty((r0.size, n_par))
    for j in range(n_par):
        h = h_scale * max(1.0, abs(theta0[j]))
        theta = theta0.copy()
        theta[j] += h
        net.set_flat(theta)
        rp = _lm_residual(net, xb, tb)
        theta[j] = theta0[j] - h
        net.set_flat(theta)
        rm = _lm_residual(net, xb, tb)
        jac[:, j] = (rp - rm) / (2 * h)
    net.set_flat(theta0)
    g = jac.T @ r0
    h_mat = jac.T @ jac
    eye = np.eye(n_par)
    for _ in range(cfg.lm_retries):
        try:
            delta = np.linalg.solve(h_mat + mu * eye, -g)
        except np.linalg.LinAlgError:
            mu *= cfg.lm_factor
            continue
        net.set_flat(theta0 + delta)
        r1 = _lm_residual(net, xb, tb)
        loss1 = float(r1 @ r1) / norm
        if np.isfinite(loss1) and loss1 < loss0:
            return loss1, max(mu / cfg.lm_factor, 1e-12)
        net.set_flat(theta0)
        mu *= cfg.lm_factor
    return loss0, mu


def optimizer_step(theta, grad, state, opt: OptimizerConfig):
    """Single parameter update; returns (new_theta, new_state).

    sgd keeps no state.  adam keeps moment estimates in the state object;
    pass None on the first call.  The damped least-squares kind does not
    update from a bare gradient, it refits residuals through the model:
    state must then be a dict with keys "net", "x", "t" (and it gains a
    "mu" entry), while grad is ignored.
    """
    if opt.name == "sgd":
        theta = np.asarray(theta, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if theta.shape != grad.shape:
            raise ValueError("theta and grad shapes differ")
        return theta - opt.lr * grad, state
    if opt.name == "adam":
        theta = np.asarray(theta, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if theta.shape != grad.shape:
            raise ValueError("theta and grad shapes differ")
        if state is None:
            state = _AdamState(theta.size)
        return state.step(theta, grad, opt.lr), state
    if not isinstance(state, dict) or not {"net", "x", "t"} <= state.keys():
        raise ValueError(
            "the damped least-squares kind needs residuals, not a gradient: "
            'pass state={"net": ..., "x": ..., "t": ...}, or use the adam '
            "optimizer for plain gradient steps"
        )
    net = state["net"]
    mu = state.get("mu", opt.lm_mu)
    _, mu = gauss_newton_lm_step(net, state["x"], state["t"], mu, opt)
    new_state = dict(state)
    new_state["mu"] = mu
    return net.get_flat(), new_state


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainReport:
    network: dict
    optimizer: dict
    seed: int
    param_count: int
    epochs_run: int
    steps_run: int
    stop_reason: str
    train_mse: list
    val_mse: list
    final_train_mse: float
    final_val_mse: float
    wall_time_s: float

    def to_dict(self) -> dict:
        # epochs and optimizer steps are both reported: the two countings
        # are easy to confuse and cheap to disambiguate
        return {
            "config": {"network": self.network, "optimizer": self.optimizer},
            "seed": self.seed,
            "param_count": self.param_count,
            "epochs_run": self.epochs_run,
            "steps_run": self.steps_run,
            "stop_reason": self.stop_reason,
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
            "final_train_mse": self.final_train_mse,
            "final_val_mse": self.final_val_mse,
            "wall_time_s": self.wall_time_s,
        }

    def canonical_dict(self) -> dict:
        """Everything that must reproduce bit-for-bit across reruns; wall
        time is measurement, not result, so it is excluded."""
        d = self.to_dict()
        d.pop("wall_time_s")
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _chunk_spans(cols: int):
    return [(a, min(a + _CHUNK_COLS, cols)) for a in range(0, cols, _CHUNK_COLS)]


def _batch_grads(net: Network, xb, tb, workers: int):
    """Flat gradient and squared-error sum for one batch, reduced over
    fixed-width chunks in fixed order."""
    cols = xb.shape[1]
    norm = net.config.n * cols
    spans = _chunk_spans(cols)

    def one(span):
        a, b = span
        y, trace = forward(net, xb[:, a:b], want_trace=True)
        sq = float(np.sum((y - tb[:, a:b]) ** 2))
        pack = backward(net, trace, tb[:, a:b], norm=norm)
        return pack.to_flat(net), sq

    if workers > 1 and len(spans) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, spans))
    else:
        results = [one(s) for s in spans]
    flat = results[0][0]
    sq_total = results[0][1]
    for f, s in results[1:]:
        flat = flat + f
        sq_total += s
    return flat, sq_total


def evaluate_mse(net: Network, x_rows, t_rows) -> float:
    """Full-set MSE; rows are samples."""
    x = np.asarray(x_rows, dtype=np.float64).T
    t = np.asarray(t_rows, dtype=np.float64).T
    y, _ = forward(net, x)
    return mse_loss(y, t, net.config.n)


def train(
    net: Network,
    train_x,
    train_t,
    val_x,
    val_t,
    opt: OptimizerConfig,
) -> TrainReport:
    """Mini-batch training with per-epoch validation and optional early
    stopping.  Sample arrays are row-major (one sample per row, width 2n).

    Raises TrainingDiverged as soon as any batch loss turns non-finite.
    """
    t_start = time.perf_counter()
    cfg = net.config
    xT = np.asarray(train_x, dtype=np.float64).T
    tT = np.asarray(train_t, dtype=np.float64).T
    if xT.shape[0] != 2 * cfg.n or xT.shape != tT.shape:
        raise ValueError(
            f"training arrays must be (samples, {2 * cfg.n}); got "
            f"{np.shape(train_x)} and {np.shape(train_t)}"
        )
    n_samples = xT.shape[1]
    if n_samples == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(opt.seed)
    theta = net.get_flat()
    adam = _AdamState(theta.size) if opt.name == "adam" else None
    mu = opt.lm_mu
    train_hist: list = []
    val_hist: list = []
    best_val = math.inf
    since_best = 0
    stop_reason = "max_epochs"
    epochs_run = 0
    steps_run = 0

    for epoch in range(opt.epochs):
        order = rng.permutation(n_samples) if opt.shuffle else np.arange(n_samples)
        sq_sum = 0.0
        seen = 0
        for a in range(0, n_samples, opt.batch_size):
            idx = order[a : a + opt.batch_size]
            xb, tb = xT[:, idx], tT[:, idx]
            if opt.name == "gauss_newton_lm":
                loss_b, mu = gauss_newton_lm_step(net, xb, tb, mu, opt)
                sq_sum += loss_b * cfg.n * xb.shape[1]
            else:
                flat_g, sq = _batch_grads(net, xb, tb, opt.workers)
                loss_b = sq / (cfg.n * xb.shape[1])
                theta = net.get_flat()
                if opt.name == "sgd":
                    theta = theta - opt.lr * flat_g
                else:
                    theta = adam.step(theta, flat_g, opt.lr)
                net.set_flat(theta)
                sq_sum += sq
            steps_run += 1
            seen += xb.shape[1]
            if not np.isfinite(loss_b):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch start {a}"
                )
        train_hist.append(sq_sum / (cfg.n * seen))
        val_hist.append(evaluate_mse(net, val_x, val_t))
        epochs_run = epoch + 1
        if not np.isfinite(val_hist[-1]):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        if opt.target_mse is not None and val_hist[-1] <= opt.target_mse:
            stop_reason = "target_reached"
            break
        if val_hist[-1] < best_val:
            best_val = val_hist[-1]
            since_best = 0
        else:
            since_best += 1
            if opt.patience is not None and since_best >= opt.patience:
                stop_reason = "patience"
                break

    return TrainReport(
        network=cfg.to_dict(),
        optimizer=opt.to_dict(),
        seed=opt.seed,
        param_count=net.param_count(),
        epochs_run=epochs_run,
        steps_run=steps_run,
        stop_reason=stop_reason,
        train_mse=[float(v) for v in train_hist],
        val_mse=[float(v) for v in val_hist],
        final_train_mse=evaluate_mse(net, train_x, train_t),
        final_val_mse=evaluate_mse(net, val_x, val_t),
        wall_time_s=time.perf_counter() - t_start,
    )
