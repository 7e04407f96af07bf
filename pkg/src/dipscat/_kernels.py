"""Hot loops of the coupled-channel Numerov propagator.

Two implementations of the same recurrence live here.  The numba one is
compiled with ``@njit`` and used by default.  The numpy one is a plain
loop over batched matrix products and is selected when numba is missing
or when the environment variable ``DIPSCAT_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``.  Both return identical arrays up to
floating-point round-off, which the test-suite checks.

The recurrence is written for the Liouville-mapped variable ``y`` used by
:mod:`dipscat.radial`: on a uniform ``y`` grid the transformed functions
obey ``w'' = W(y) w`` and the Numerov update reads::

    F_i = (I - h^2 W_i / 12) w_i
    F_{i+1} = 12 w_i - 10 F_i - F_{i-1}
    w_{i+1} = (I - h^2 W_{i+1} / 12)^{-1} F_{i+1}

Several solution columns are carried at once.  Every ``qr_every`` steps the
pair ``(F_i, F_{i-1})`` is re-orthonormalised by a thin QR factorisation
with a positive diagonal, which keeps the columns linearly independent
when some of them grow exponentially.  The triangular factors are returned
so callers can recombine columns in the original basis.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("DIPSCAT_DISABLE_NUMBA", "").strip()
USE_NUMBA = numba is not None and _flag in ("", "0")


def _qr_positive_np(stack):
    q, r = np.linalg.qr(stack)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s, r * s[:, None]


def numerov_sweep_numpy(ainv, amat, w0, w1, qr_mask):
    """Pure-numpy Numerov sweep.

    Parameters
    ----------
    ainv, amat : ndarray, shape (N, n, n)
        ``(I - h^2 W_i / 12)^{-1}`` and ``I - h^2 W_i / 12`` on the grid.
    w0, w1 : ndarray, shape (n, p)
        Transformed solution values at the first two grid points.
    qr_mask : ndarray of bool, shape (N,)
        Grid indices after whose update a QR re-orthonormalisation happens.

    Returns
    -------
    w : ndarray, shape (N, n, p)
        Solution values, each expressed in the basis of its segment.
    rs : ndarray, shape (K, p, p)
        Upper-triangular factors of the K re-orthonormalisations.
    seg : ndarray of int, shape (N,)
        Segment index of every grid point (number of QR events applied).
    """
    npts = ainv.shape[0]
    n, p = w0.shape
    w = np.empty((npts, n, p))
    seg = np.zeros(npts, dtype=np.int64)
    rs = []
    w[0] = w0
    w[1] = w1
    f_prev = amat[0] @ w0
    f_cur = amat[1] @ w1
    for i in range(1, npts - 1):
        if qr_mask[i]:
            q, r = _qr_positive_np(np.vstack((f_cur, f_prev)))
            f_cur = np.ascontiguousarray(q[:n])
            f_prev = np.ascontiguousarray(q[n:])
            w[i] = ainv[i] @ f_cur
            rs.append(r)
        seg[i] = len(rs)
        f_next = 12.0 * w[i] - 10.0 * f_cur - f_prev
        w[i + 1] = ainv[i + 1] @ f_next
        f_prev, f_cur = f_cur, f_next
    seg[npts - 1] = len(rs)
    if rs:
        rstack = np.array(rs)
    else:
        rstack = np.zeros((0, p, p))
    return w, rstack, seg


def _numerov_sweep_loops(ainv, amat, w0, w1, qr_mask):
    npts = ainv.shape[0]
    n = w0.shape[0]
    p = w0.shape[1]
    w = np.empty((npts, n, p))
    seg = np.zeros(npts, dtype=np.int64)
    nqr = 0
    for i in range(npts):
        if qr_mask[i]:
            nqr += 1
    rstack = np.zeros((nqr, p, p))
    w[0] = w0
    w[1] = w1
    f_prev = np.dot(amat[0], w0)
    f_cur = np.dot(amat[1], w1)
    stack = np.empty((2 * n, p))
    k = 0
    for i in range(1, npts - 1):
        if qr_mask[i]:
            stack[:n] = f_cur
            stack[n:] = f_prev
            q, r = np.linalg.qr(stack)
            for c in range(p):
                if r[c, c] < 0.0:
                    for j in range(2 * n):
                        q[j, c] = -q[j, c]
                    for j in range(p):
                        r[c, j] = -r[c, j]
            f_cur = np.ascontiguousarray(q[:n])
            f_prev = np.ascontiguousarray(q[n:])
            w[i] = np.dot(ainv[i], f_cur)
            rstack[k] = r
            k += 1
        seg[i] = k
        f_next = 12.0 * w[i] - 10.0 * f_cur - f_prev
        w[i + 1] = np.dot(ainv[i + 1], f_next)
        f_prev = f_cur
        f_cur = f_next
    seg[npts - 1] = k
    return w, rstack, seg


if USE_NUMBA:
    numerov_sweep_numba = numba.njit(cache=True)(_numerov_sweep_loops)
else:  # pragma: no cover
    numerov_sweep_numba = None


def numerov_sweep(ainv, amat, w0, w1, qr_mask, backend=None):
    """Dispatch to the compiled or the numpy sweep.

    ``backend`` may be ``"numba"``, ``"numpy"`` or ``None`` (module default).
    """
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    args = (
        np.ascontiguousarray(ainv, dtype=np.float64),
        np.ascontiguousarray(amat, dtype=np.float64),
        np.ascontiguousarray(w0, dtype=np.float64),
        np.ascontiguousarray(w1, dtype=np.float64),
        np.ascontiguousarray(qr_mask, dtype=np.bool_),
    )
    if backend == "numba":
        if numerov_sweep_numba is None:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return numerov_sweep_numba(*args)
    if backend == "numpy":
        return numerov_sweep_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
