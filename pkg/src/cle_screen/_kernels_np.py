"""Pure-NumPy fallback for the compiled kernels.

Same signatures and semantics as `_kernels`, implemented with im2col plus
BLAS matmul. Batches are processed in chunks so the column buffer stays a
bounded size. Used automatically when the compiled extension is missing;
can be forced with CLE_SCREEN_BACKEND=numpy.
"""

import numpy as np

IS_COMPILED = False

# column-buffer budget per conv call, in floats
_COL_BUDGET = 16 * 1024 * 1024


def set_num_threads(n):
    """No-op: the fallback relies on whatever BLAS threading is configured."""


def get_max_threads():
    return 1


def _chunk_size(oh, ow, c):
    per_sample = oh * ow * 9 * c
    return max(1, _COL_BUDGET // max(1, per_sample))


def _im2col(x, oh, ow):
    n, _, _, c = x.shape
    cols = np.empty((n, oh, ow, 9, c), dtype=x.dtype)
    k = 0
    for dy in range(3):
        for dx in range(3):
            cols[:, :, :, k, :] = x[:, dy:dy + oh, dx:dx + ow, :]
            k += 1
    return cols.reshape(n * oh * ow, 9 * c)


def conv3x3_forward(x, w, b, out):
    n, h, wd, c = x.shape
    f = w.shape[3]
    oh, ow = h - 2, wd - 2
    wmat = w.reshape(9 * c, f)
    step = _chunk_size(oh, ow, c)
    for i in range(0, n, step):
        j = min(i + step, n)
        cols = _im2col(x[i:j], oh, ow)
        out[i:j] = (cols @ wmat).reshape(j - i, oh, ow, f)
    out += b


def conv3x3_backward_input(dy_out, wt, dx_in):
    n, oh, ow, f = dy_out.shape
    c = wt.shape[3]
    gmat = dy_out.reshape(n * oh * ow, f)
    for dy in range(3):
        for dx in range(3):
            contrib = gmat @ wt[dy, dx]
            dx_in[:, dy:dy + oh, dx:dx + ow, :] += contrib.reshape(n, oh, ow, c)


def conv3x3_backward_weights(x, dy_out, dw):
    n, oh, ow, f = dy_out.shape
    c = x.shape[3]
    step = _chunk_size(oh, ow, c)
    for i in range(0, n, step):
        j = min(i + step, n)
        cols = _im2col(x[i:j], oh, ow)
        gmat = dy_out[i:j].reshape((j - i) * oh * ow, f)
        dw += (cols.T @ gmat).reshape(3, 3, c, f)


def maxpool2_forward(x, out, argmax):
    n, h, w, c = x.shape
    oh, ow = h // 2, w // 2
    quads = x.reshape(n, oh, 2, ow, 2, c).transpose(0, 1, 3, 5, 2, 4)
    quads = quads.reshape(n, oh, ow, c, 4)
    am = quads.argmax(axis=4)
    argmax[...] = am.astype(np.uint8)
    out[...] = np.take_along_axis(quads, am[..., None], axis=4)[..., 0]


def maxpool2_backward(dy_out, argmax, dx_in):
    n, oh, ow, c = dy_out.shape
    scattered = np.zeros((n, oh, ow, c, 4), dtype=dy_out.dtype)
    np.put_along_axis(scattered, argmax[..., None].astype(np.intp),
                      dy_out[..., None], axis=4)
    dx_in[...] = scattered.reshape(n, oh, ow, c, 2, 2).transpose(
        0, 1, 4, 2, 5, 3).reshape(dx_in.shape)
