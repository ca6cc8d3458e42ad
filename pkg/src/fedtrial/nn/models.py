"""Forward passes, BCE loss and analytic backpropagation for the FCN and GRU classifiers.

Both models return P(TF) through a sigmoid readout. Gradients are of the
mean batch BCE loss, with sigmoid and BCE fused so that d(loss)/d(logit)
is ``(p - y) / batch_size``.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.special import expit

from ..errors import EncodingError, ShapeError
from .params import FCN, ModelParameters, unpack

PROB_CLAMP = 1e-12


def bce_loss(probability, label):
    """Binary cross-entropy with the probability clamped into [1e-12, 1 - 1e-12]."""
    p = np.clip(np.asarray(probability, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(loss) if loss.ndim == 0 else loss


# ---------------------------------------------------------------------------
# input checks / batching

def as_feature_matrix(params: ModelParameters, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ShapeError(f"FCN expects feature vectors of length {params.spec.input_dim}, got shape {np.shape(features)}")
    return x


def pad_sequences(sequences: Sequence, input_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Left-pad index sequences into ``(B, T)`` indices and a boolean mask.

    Padded slots hold index 0 and are masked out; the hidden state passes
    through them unchanged.
    """
    lengths = [len(s) for s in sequences]
    t_max = max(lengths, default=0)
    idx = np.zeros((len(sequences), t_max), dtype=np.int64)
    mask = np.zeros((len(sequences), t_max), dtype=bool)
    for i, seq in enumerate(sequences):
        n = lengths[i]
        if n == 0:
            continue
        arr = np.asarray(seq)
        if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
            raise ShapeError("GRU inputs must be 1-d integer index sequences")
        if arr.min() < 0 or arr.max() >= input_dim:
            bad = arr[(arr < 0) | (arr >= input_dim)][0]
            raise EncodingError(f"token index {bad} outside [0, {input_dim})")
        idx[i, t_max - n:] = arr
        mask[i, t_max - n:] = True
    return idx, mask


# ---------------------------------------------------------------------------
# FCN

def _fcn_layers(params):
    b = params.blocks()
    n = len(b) // 2
    return [(b[f"W{i}"], b[f"b{i}"]) for i in range(n)]


def _fcn_forward(params, x, keep=False):
    layers = _fcn_layers(params)
    acts = [x]
    a = x
    for W, b in layers[:-1]:
        a = np.tanh(a @ W + b)
        acts.append(a)
    W, b = layers[-1]
    logits = (a @ W + b)[:, 0]
    return (logits, acts) if keep else logits


def _fcn_backward(params, acts, dlogits):
    layers = _fcn_layers(params)
    grads = np.zeros_like(params.values)
    gblocks = unpack(params.spec, grads)
    delta = dlogits[:, None]
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = acts[i]
        gblocks[f"W{i}"][...] = a_in.T @ delta
        gblocks[f"b{i}"][...] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ W.T) * (1.0 - a_in * a_in)
    return grads


def fcn_forward(params: ModelParameters, features) -> float | np.ndarray:
    """P(TF) for one multi-hot vector (returns float) or a ``(B, D)`` matrix."""
    single = np.ndim(features) == 1
    x = as_feature_matrix(params, features)
    p = expit(_fcn_forward(params, x))
    return float(p[0]) if single else p


# ---------------------------------------------------------------------------
# GRU
#
# Batches are processed with rows sorted by descending length and left
# padding, so at step t the rows that have started form a prefix of length
# active[t]. Rows that have not started keep the zero initial state.

def _sigmoid_(x):
    """In-place logistic via tanh; cheaper than expit on small blocks."""
    x *= 0.5
    np.tanh(x, out=x)
    x *= 0.5
    x += 0.5
    return x


def _gru_batch(sequences, input_dim):
    idx, mask = pad_sequences(sequences, input_dim)
    lengths = mask.sum(axis=1)
    order = np.argsort(-lengths, kind="stable")
    idx = idx[order]
    active = (lengths[order][None, :] >= idx.shape[1] - np.arange(idx.shape[1])[:, None]).sum(axis=1)
    return idx, active, order


def _gru_forward(params, idx, active, keep=False):
    blk = params.blocks()
    E, W, U, b = blk["embedding"], blk["W"], blk["U"], blk["b"]
    H = U.shape[0]
    B, T = idx.shape
    xe = E[idx]                       # (B, T, e)
    xw = xe @ W + b                   # (B, T, 3H)
    U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
    h = np.zeros((B, H))
    cache = []
    for t in range(T):
        n = active[t]
        h_prev = h[:n].copy()
        zr = xw[:n, t, :2 * H] + h_prev @ U_zr
        _sigmoid_(zr)
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h_prev
        c = xw[:n, t, 2 * H:] + rh @ U_c
        np.tanh(c, out=c)
        # h = (1 - z) c + z h_prev = c + z (h_prev - c)
        h[:n] = c + z * (h_prev - c)
        if keep:
            cache.append((h_prev, z, r, rh, c))
    logits = h @ blk["w_out"][:, 0] + blk["b_out"][0]
    if keep:
        return logits, (xe, cache, h)
    return logits


def _gru_backward(params, idx, active, saved, dlogits):
    blk = params.blocks()
    W, U = blk["W"], blk["U"]
    H = U.shape[0]
    xe, cache, h_last = saved
    B, T = idx.shape
    grads = np.zeros_like(params.values)
    g = unpack(params.spec, grads)
    g["w_out"][:, 0] = h_last.T @ dlogits
    g["b_out"][0] = dlogits.sum()
    dh = dlogits[:, None] * blk["w_out"][:, 0][None, :]
    U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
    dA = np.zeros((B, T, 3 * H))
    dU = g["U"]
    for t in range(T - 1, -1, -1):
        n = active[t]
        h_prev, z, r, rh, c = cache[t]
        dhn = dh[:n]
        dc = dhn * (1.0 - z)
        dz = dhn * (h_prev - c)
        dac = dc * (1.0 - c * c)
        drh = dac @ U_c.T
        daz = dz * z * (1.0 - z)
        dar = drh * h_prev * r * (1.0 - r)
        dA[:n, t, :H] = daz
        dA[:n, t, H:2 * H] = dar
        dA[:n, t, 2 * H:] = dac
        dzr = dA[:n, t, :2 * H]
        dU[:, 2 * H:] += rh.T @ dac
        dU[:, :2 * H] += h_prev.T @ dzr
        dh[:n] = dhn * z + drh * r + dzr @ U_zr.T
    e = W.shape[0]
    flat_dA = dA.reshape(-1, 3 * H)
    g["W"][...] = xe.reshape(-1, e).T @ flat_dA
    g["b"][...] = flat_dA.sum(axis=0)
    dxe = flat_dA @ W.T
    np.add.at(g["embedding"], idx.reshape(-1), dxe)
    return grads


def gru_forward(params: ModelParameters, sequence) -> float:
    """P(TF) for one index sequence; an empty sequence reads out the zero state."""
    idx, active, _ = _gru_batch([sequence], params.spec.input_dim)
    return float(expit(_gru_forward(params, idx, active))[0])


def gru_forward_batch(params: ModelParameters, sequences) -> np.ndarray:
    idx, active, order = _gru_batch(sequences, params.spec.input_dim)
    p = np.empty(len(order))
    p[order] = expit(_gru_forward(params, idx, active))
    return p


# ---------------------------------------------------------------------------
# shared entry points

def predict(params: ModelParameters, inputs) -> np.ndarray:
    """Probabilities for a batch: a ``(B, D)`` matrix (FCN) or a list of sequences (GRU)."""
    if params.spec.kind == FCN:
        return expit(_fcn_forward(params, as_feature_matrix(params, inputs)))
    return gru_forward_batch(params, inputs)


def loss_and_grad(params: ModelParameters, inputs, labels) -> tuple[float, np.ndarray]:
    """Mean BCE loss over the batch and its gradient w.r.t. ``params.values``."""
    y = np.asarray(labels, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ShapeError("batch must be non-empty")
    if params.spec.kind == FCN:
        x = as_feature_matrix(params, inputs)
        if x.shape[0] != n:
            raise ShapeError(f"{x.shape[0]} inputs but {n} labels")
        logits, acts = _fcn_forward(params, x, keep=True)
        p = expit(logits)
        grads = _fcn_backward(params, acts, (p - y) / n)
    else:
        if len(inputs) != n:
            raise ShapeError(f"{len(inputs)} inputs but {n} labels")
        idx, active, order = _gru_batch(inputs, params.spec.input_dim)
        logits, saved = _gru_forward(params, idx, active, keep=True)
        p = expit(logits)
        y = y[order]
        grads = _gru_backward(params, idx, active, saved, (p - y) / n)
    return float(np.mean(bce_loss(p, y))), grads


def batch_loss(params: ModelParameters, inputs, labels) -> float:
    p = predict(params, inputs)
    return float(np.mean(bce_loss(p, np.asarray(labels, dtype=np.float64))))


def compute_gradients(params: ModelParameters, batch) -> np.ndarray:
    """Gradient of the mean batch loss for a list of ``(encoded_input, label)`` pairs."""
    if len(batch) == 0:
        raise ShapeError("batch must be non-empty")
    inputs = [item[0] for item in batch]
    labels = [item[1] for item in batch]
    if params.spec.kind == FCN:
        if any(np.ndim(x) != 1 or np.asarray(x).dtype.kind not in "fiub" for x in inputs):
            raise ShapeError("FCN batch must contain 1-d multi-hot vectors")
        try:
            inputs = np.vstack([np.asarray(x, dtype=np.float64) for x in inputs])
        except ValueError as exc:
            raise ShapeError(f"mixed feature lengths in batch: {exc}") from None
    else:
        if any(np.ndim(x) != 1 or (len(x) and np.asarray(x).dtype.kind not in "iu") for x in inputs):
            raise ShapeError("GRU batch must contain integer index sequences")
        inputs = [np.asarray(x, dtype=np.int64) for x in inputs]
    return loss_and_grad(params, inputs, labels)[1]
