"""Compiled forward/backward passes for graph-structured RNNs.

A genome is lowered to flat arrays (see :func:`tva.rnn.genome.compile_genome`):
nodes in topological order, incoming edges in CSR layout and a single
parameter vector ``theta`` holding edge weights followed by cell parameters.
Every node is one scalar unit driven by its pre-activation ``a`` (the
weighted sum of incoming edges); ``hp``/``cp`` are the node's own output and
cell state at the previous step, zero at t = 0.

Cell parameter layouts (offset ``o`` into ``theta``)::

    simple     1   h = tanh(a + b)
    lstm      12   [wi ui bi  wf uf bf  wo uo bo  wg ug bg]
                   i,f,o = sigm(w a + u hp + b); g = tanh(...)
                   c = f cp + i g;  h = o tanh(c)
    gru        9   [wz uz bz  wr ur br  wh uh bh]
                   z,r = sigm(...); hh = tanh(wh a + uh (r hp) + bh)
                   h = (1 - z) hp + z hh
    mgu        6   [wf uf bf  wh uh bh]
                   f = sigm(...); hh = tanh(wh a + uh (f hp) + bh)
                   h = (1 - f) hp + f hh
    ugrnn      6   [wc uc bc  wg ug bg]
                   c = tanh(...); g = sigm(...); h = g hp + (1 - g) c
    delta_rnn  6   [v alpha beta1 beta2 bz br]
                   z = tanh(alpha (v hp) a + beta1 (v hp) + beta2 a + bz)
                   r = sigm(a + br); h = tanh((1 - r) z + r hp)
    output     0   h = a
"""

import math

import numpy as np
from numba import njit

INPUT, OUTPUT, SIMPLE, LSTM, GRU, MGU, UGRNN, DELTA = range(8)


@njit(cache=True, nogil=True, inline="always")
def _sigm(x):
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True, nogil=True)
def cell_forward(kind, th, o, a, hp, cp):
    if kind == OUTPUT:
        return a, 0.0
    if kind == SIMPLE:
        return math.tanh(a + th[o]), 0.0
    if kind == LSTM:
        i = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        f = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        og = _sigm(th[o + 6] * a + th[o + 7] * hp + th[o + 8])
        g = math.tanh(th[o + 9] * a + th[o + 10] * hp + th[o + 11])
        c = f * cp + i * g
        return og * math.tanh(c), c
    if kind == GRU:
        z = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        r = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        hh = math.tanh(th[o + 6] * a + th[o + 7] * r * hp + th[o + 8])
        return (1.0 - z) * hp + z * hh, 0.0
    if kind == MGU:
        f = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        hh = math.tanh(th[o + 3] * a + th[o + 4] * f * hp + th[o + 5])
        return (1.0 - f) * hp + f * hh, 0.0
    if kind == UGRNN:
        c = math.tanh(th[o] * a + th[o + 1] * hp + th[o + 2])
        g = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        return g * hp + (1.0 - g) * c, 0.0
    # DELTA
    vh = th[o] * hp
    z = math.tanh(th[o + 1] * vh * a + th[o + 2] * vh + th[o + 3] * a + th[o + 4])
    r = _sigm(a + th[o + 5])
    return math.tanh((1.0 - r) * z + r * hp), 0.0


@njit(cache=True, nogil=True)
def cell_backward(kind, th, o, a, hp, cp, gh, gc, grad):
    """Return (d a, d hp, d cp); accumulate parameter gradients into ``grad``."""
    if kind == OUTPUT:
        return gh, 0.0, 0.0
    if kind == SIMPLE:
        h = math.tanh(a + th[o])
        dz = gh * (1.0 - h * h)
        grad[o] += dz
        return dz, 0.0, 0.0
    if kind == LSTM:
        i = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        f = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        og = _sigm(th[o + 6] * a + th[o + 7] * hp + th[o + 8])
        g = math.tanh(th[o + 9] * a + th[o + 10] * hp + th[o + 11])
        c = f * cp + i * g
        tc = math.tanh(c)
        dc = gc + gh * og * (1.0 - tc * tc)
        zi = dc * g * i * (1.0 - i)
        zf = dc * cp * f * (1.0 - f)
        zo = gh * tc * og * (1.0 - og)
        zg = dc * i * (1.0 - g * g)
        da = 0.0
        dhp = 0.0
        for k, zk in ((0, zi), (3, zf), (6, zo), (9, zg)):
            grad[o + k] += zk * a
            grad[o + k + 1] += zk * hp
            grad[o + k + 2] += zk
            da += th[o + k] * zk
            dhp += th[o + k + 1] * zk
        return da, dhp, dc * f
    if kind == GRU:
        z = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        r = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        hh = math.tanh(th[o + 6] * a + th[o + 7] * r * hp + th[o + 8])
        dhp = gh * (1.0 - z)
        zh = gh * z * (1.0 - hh * hh)
        grad[o + 6] += zh * a
        grad[o + 7] += zh * r * hp
        grad[o + 8] += zh
        dhp += zh * th[o + 7] * r
        zr = zh * th[o + 7] * hp * r * (1.0 - r)
        zz = gh * (hh - hp) * z * (1.0 - z)
        grad[o] += zz * a
        grad[o + 1] += zz * hp
        grad[o + 2] += zz
        grad[o + 3] += zr * a
        grad[o + 4] += zr * hp
        grad[o + 5] += zr
        da = th[o] * zz + th[o + 3] * zr + th[o + 6] * zh
        dhp += th[o + 1] * zz + th[o + 4] * zr
        return da, dhp, 0.0
    if kind == MGU:
        f = _sigm(th[o] * a + th[o + 1] * hp + th[o + 2])
        hh = math.tanh(th[o + 3] * a + th[o + 4] * f * hp + th[o + 5])
        dhp = gh * (1.0 - f)
        zh = gh * f * (1.0 - hh * hh)
        grad[o + 3] += zh * a
        grad[o + 4] += zh * f * hp
        grad[o + 5] += zh
        dhp += zh * th[o + 4] * f
        zf = (gh * (hh - hp) + zh * th[o + 4] * hp) * f * (1.0 - f)
        grad[o] += zf * a
        grad[o + 1] += zf * hp
        grad[o + 2] += zf
        da = th[o] * zf + th[o + 3] * zh
        dhp += th[o + 1] * zf
        return da, dhp, 0.0
    if kind == UGRNN:
        c = math.tanh(th[o] * a + th[o + 1] * hp + th[o + 2])
        g = _sigm(th[o + 3] * a + th[o + 4] * hp + th[o + 5])
        zc = gh * (1.0 - g) * (1.0 - c * c)
        zg = gh * (hp - c) * g * (1.0 - g)
        grad[o] += zc * a
        grad[o + 1] += zc * hp
        grad[o + 2] += zc
        grad[o + 3] += zg * a
        grad[o + 4] += zg * hp
        grad[o + 5] += zg
        da = th[o] * zc + th[o + 3] * zg
        dhp = gh * g + th[o + 1] * zc + th[o + 4] * zg
        return da, dhp, 0.0
    # DELTA
    v = th[o]
    vh = v * hp
    z = math.tanh(th[o + 1] * vh * a + th[o + 2] * vh + th[o + 3] * a + th[o + 4])
    r = _sigm(a + th[o + 5])
    h = math.tanh((1.0 - r) * z + r * hp)
    ds = gh * (1.0 - h * h)
    zz = ds * (1.0 - r) * (1.0 - z * z)
    zr = ds * (hp - z) * r * (1.0 - r)
    dvh = zz * (th[o + 1] * a + th[o + 2])
    grad[o] += dvh * hp
    grad[o + 1] += zz * vh * a
    grad[o + 2] += zz * vh
    grad[o + 3] += zz * a
    grad[o + 4] += zz
    grad[o + 5] += zr
    da = zz * (th[o + 1] * vh + th[o + 3]) + zr
    dhp = ds * r + dvh * v
    return da, dhp, 0.0


@njit(cache=True, nogil=True)
def forward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, x, H, C, A):
    """Fill H (outputs), C (cell state) and A (pre-activations), each (T, N)."""
    T = x.shape[0]
    N = kind.shape[0]
    for t in range(T):
        for n in range(N):
            k = kind[n]
            if k == INPUT:
                H[t, n] = x[t, inp_col[n]]
                C[t, n] = 0.0
                A[t, n] = 0.0
                continue
            a = 0.0
            for j in range(in_ptr[n], in_ptr[n + 1]):
                s = t - in_depth[j]
                if s >= 0:
                    a += th[in_w[j]] * H[s, in_src[j]]
            A[t, n] = a
            hp = H[t - 1, n] if t > 0 else 0.0
            cp = C[t - 1, n] if t > 0 else 0.0
            h, c = cell_forward(k, th, poff[n], a, hp, cp)
            H[t, n] = h
            C[t, n] = c


@njit(cache=True, nogil=True)
def backward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, out_pos, y, H, C, A, dH, dC, grad, scale):
    """Accumulate d(scale * sum sq err)/d theta into ``grad``; return scale * sum sq err."""
    T = y.shape[0]
    N = kind.shape[0]
    O = out_pos.shape[0]
    dH[:, :] = 0.0
    dC[:, :] = 0.0
    loss = 0.0
    for t in range(T):
        for q in range(O):
            e = H[t, out_pos[q]] - y[t, q]
            loss += e * e
            dH[t, out_pos[q]] += 2.0 * e * scale
    for t in range(T - 1, -1, -1):
        for n in range(N - 1, -1, -1):
            k = kind[n]
            if k == INPUT:
                continue
            hp = H[t - 1, n] if t > 0 else 0.0
            cp = C[t - 1, n] if t > 0 else 0.0
            da, dhp, dcp = cell_backward(k, th, poff[n], A[t, n], hp, cp, dH[t, n], dC[t, n], grad)
            if t > 0:
                dH[t - 1, n] += dhp
                dC[t - 1, n] += dcp
            if da == 0.0:
                continue
            for j in range(in_ptr[n], in_ptr[n + 1]):
                s = t - in_depth[j]
                if s >= 0:
                    src = in_src[j]
                    grad[in_w[j]] += da * H[s, src]
                    dH[s, src] += da * th[in_w[j]]
    return loss * scale


@njit(cache=True, nogil=True)
def predict_batch(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, out_pos, X):
    W, T = X.shape[0], X.shape[1]
    N = kind.shape[0]
    O = out_pos.shape[0]
    H = np.zeros((T, N))
    C = np.zeros((T, N))
    A = np.zeros((T, N))
    out = np.empty((W, T, O))
    for w in range(W):
        forward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, X[w], H, C, A)
        for t in range(T):
            for q in range(O):
                out[w, t, q] = H[t, out_pos[q]]
    return out


@njit(cache=True, nogil=True)
def sse_batch(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, out_pos, X, Y):
    """Sum of squared errors over all windows, steps and outputs."""
    W, T = X.shape[0], X.shape[1]
    N = kind.shape[0]
    O = out_pos.shape[0]
    H = np.zeros((T, N))
    C = np.zeros((T, N))
    A = np.zeros((T, N))
    total = 0.0
    for w in range(W):
        forward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, X[w], H, C, A)
        for t in range(T):
            for q in range(O):
                e = H[t, out_pos[q]] - Y[w, t, q]
                total += e * e
    return total


@njit(cache=True, nogil=True)
def loss_and_grad(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, out_pos, X, Y):
    """Mean-squared-error over the batch and its exact gradient."""
    W, T = X.shape[0], X.shape[1]
    N = kind.shape[0]
    O = out_pos.shape[0]
    H = np.zeros((T, N))
    C = np.zeros((T, N))
    A = np.zeros((T, N))
    dH = np.zeros((T, N))
    dC = np.zeros((T, N))
    grad = np.zeros(th.shape[0])
    scale = 1.0 / (W * T * O)
    loss = 0.0
    for w in range(W):
        forward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, X[w], H, C, A)
        loss += backward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, out_pos, Y[w], H, C, A, dH, dC, grad, scale)
    return loss, grad


@njit(cache=True, nogil=True)
def sgd_train(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, out_pos, X, Y, orders, lr, clip, batch):
    """Minibatch SGD with gradient-norm clipping, updating ``th`` in place.

    ``orders`` is (epochs, W): the window visiting order of each epoch.
    Returns per-epoch mean window loss (measured before each update); a
    non-finite entry means training diverged and stopped early.
    """
    epochs, W = orders.shape[0], orders.shape[1]
    T = X.shape[1]
    N = kind.shape[0]
    O = out_pos.shape[0]
    P = th.shape[0]
    H = np.zeros((T, N))
    C = np.zeros((T, N))
    A = np.zeros((T, N))
    dH = np.zeros((T, N))
    dC = np.zeros((T, N))
    grad = np.zeros(P)
    losses = np.full(epochs, np.nan)
    for ep in range(epochs):
        total = 0.0
        b0 = 0
        while b0 < W:
            b1 = min(b0 + batch, W)
            scale = 1.0 / ((b1 - b0) * T * O)
            grad[:] = 0.0
            for bi in range(b0, b1):
                w = orders[ep, bi]
                forward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, X[w], H, C, A)
                total += backward_seq(th, kind, poff, in_ptr, in_src, in_depth, in_w, out_pos, Y[w], H, C, A,
                                      dH, dC, grad, scale) * (b1 - b0)
            norm = 0.0
            for p in range(P):
                norm += grad[p] * grad[p]
            norm = math.sqrt(norm)
            if not math.isfinite(norm):
                losses[ep] = np.inf
                return losses
            f = lr
            if clip > 0.0 and norm > clip:
                f = lr * clip / norm
            for p in range(P):
                th[p] -= f * grad[p]
            b0 = b1
        losses[ep] = total / W
        if not math.isfinite(losses[ep]):
            return losses
    return losses
