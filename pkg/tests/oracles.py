"""Independent slow reference implementations used to check the fast paths.

Everything here is deliberately written as explicit loops; nothing imports the
vectorized kernels it validates.
"""

import math

import numpy as np


def conv2d_same_loop(x, kernel):
    """Per-pixel nested-loop 3x3 same-padded convolution. x: (H, W, Cin)."""
    h, w, cin = x.shape
    cout = kernel.shape[-1]
    out = np.zeros((h, w, cout), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            for co in range(cout):
                acc = 0.0
                for ki in range(3):
                    for kj in range(3):
                        ri, cj = r + ki - 1, c + kj - 1
                        if 0 <= ri < h and 0 <= cj < w:
                            for ci in range(cin):
                                acc += x[ri, cj, ci] * kernel[ki, kj, ci, co]
                out[r, c, co] = acc
    return out


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


sig_v = np.vectorize(_sig)


def convlstm_step_loop(x, h_prev, c_prev, p):
    """Loop-based reference of one peephole ConvLSTM step. x: (H, W, Cin)."""
    a_i = conv2d_same_loop(x, p["w_xi"]) + conv2d_same_loop(h_prev, p["w_hi"]) \
        + p["w_ci"] * c_prev + p["b_i"]
    a_f = conv2d_same_loop(x, p["w_xf"]) + conv2d_same_loop(h_prev, p["w_hf"]) \
        + p["w_cf"] * c_prev + p["b_f"]
    a_c = conv2d_same_loop(x, p["w_xc"]) + conv2d_same_loop(h_prev, p["w_hc"]) + p["b_c"]
    i = sig_v(a_i)
    f = sig_v(a_f)
    c_new = f * c_prev + i * np.tanh(a_c)
    a_o = conv2d_same_loop(x, p["w_xo"]) + conv2d_same_loop(h_prev, p["w_ho"]) \
        + p["w_co"] * c_new + p["b_o"]
    o = sig_v(a_o)
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def auc_pairwise(scores, labels):
    """Brute-force pairwise AUC: P(score_pos > score_neg) + 0.5 P(equal)."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    if not pos or not neg:
        raise ValueError("needs both classes")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def numeric_gradient(fn, params: dict, step=1e-5):
    """Central finite differences of scalar fn() w.r.t. every entry of every
    array in params (mutated in place during probing, then restored)."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = fn()
            flat[k] = orig - step
            down = fn()
            flat[k] = orig
            gflat[k] = (up - down) / (2.0 * step)
        grads[name] = g
    return grads
