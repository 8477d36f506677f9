"""Hot loops: the fused walk step and batched SU(2) decomposition.

Every kernel exists twice, a numba version (``*_nb``) and a numpy version
(``*_np``). The public names bind to one of them according to
:mod:`qwtopo._accel`. Both variants perform the same floating point
operations in the same order.

Walk kernels take the q-plate mixing as two real numbers ``c = cos(delta/2)``
and ``s = sin(delta/2)``. Amplitude arrays have shape ``(sites, 2)`` with column 0 the |L> amplitude and
column 1 the |R> amplitude. Callers pre-pad the array so that the walker never
reaches the edge. The numba kernels only visit the light cone of the
initial support, which grows by ``shift`` sites per step on each side.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


# --------------------------------------------------------------------------
# walk step
# --------------------------------------------------------------------------

def _step_np(a, w, c, s, shift, out):
    b_l = w[0, 0] * a[:, 0] + w[0, 1] * a[:, 1]
    b_r = w[1, 0] * a[:, 0] + w[1, 1] * a[:, 1]
    out[:, 0] = c * b_l
    out[:, 1] = c * b_r
    if shift > 0:
        # |R, m+shift> feeds |L, m>; |L, m-shift> feeds |R, m>
        out[:-shift, 0] += 1j * s * b_r[shift:]
        out[shift:, 1] += 1j * s * b_l[:-shift]
    return out


def walk_final_np(amps, w, c, s, shift, nsteps):
    a = amps.copy()
    out = np.empty_like(a)
    for _ in range(nsteps):
        _step_np(a, w, c, s, shift, out)
        a, out = out, a
    return a


def walk_history_np(amps, w, c, s, shift, nsteps):
    hist = np.empty((nsteps + 1,) + amps.shape, dtype=np.complex128)
    hist[0] = amps
    for t in range(nsteps):
        _step_np(hist[t], w, c, s, shift, hist[t + 1])
    return hist


@njit(cache=True, nogil=True)
def _support_nb(a):
    n = a.shape[0]
    lo, hi = n, -1
    for i in range(n):
        if a[i, 0] != 0 or a[i, 1] != 0:
            if lo == n:
                lo = i
            hi = i
    return lo, hi


@njit(cache=True, nogil=True)
def _step_nb(a, w, c, s, shift, out, b_l, b_r, lo, hi):
    # only sites lo..hi can be non-zero after this step; the rest stay zero
    # c and s are real: scale real and imaginary parts directly, and
    # multiply by i s as (re, im) -> (-s im, s re)
    w00, w01, w10, w11 = w[0, 0], w[0, 1], w[1, 0], w[1, 1]
    for i in range(lo, hi + 1):
        al = a[i, 0]
        ar = a[i, 1]
        b_l[i] = w00 * al + w01 * ar
        b_r[i] = w10 * al + w11 * ar
    for i in range(lo, hi + 1):
        x = b_l[i]
        y = b_r[i]
        out[i, 0] = complex(c * x.real, c * x.imag)
        out[i, 1] = complex(c * y.real, c * y.imag)
    if shift > 0:
        for i in range(lo, hi + 1 - shift):
            y = b_r[i + shift]
            out[i, 0] += complex(-s * y.imag, s * y.real)
        for i in range(lo + shift, hi + 1):
            x = b_l[i - shift]
            out[i, 1] += complex(-s * x.imag, s * x.real)


@njit(cache=True, nogil=True)
def walk_final_nb(amps, w, c, s, shift, nsteps):
    # planar layout: separate contiguous L and R vectors vectorize better
    n = amps.shape[0]
    lo, hi = _support_nb(amps)
    if hi < 0:
        return amps.copy()
    a_l = amps[:, 0].copy()
    a_r = amps[:, 1].copy()
    o_l = np.zeros(n, dtype=np.complex128)
    o_r = np.zeros(n, dtype=np.complex128)
    b_l = np.empty(n, dtype=np.complex128)
    b_r = np.empty(n, dtype=np.complex128)
    w00, w01, w10, w11 = w[0, 0], w[0, 1], w[1, 0], w[1, 1]
    for _ in range(nsteps):
        lo = max(lo - shift, 0)
        hi = min(hi + shift, n - 1)
        for i in range(lo, hi + 1):
            al = a_l[i]
            ar = a_r[i]
            b_l[i] = w00 * al + w01 * ar
            b_r[i] = w10 * al + w11 * ar
        for i in range(lo, hi + 1):
            x = b_l[i]
            y = b_r[i]
            o_l[i] = complex(c * x.real, c * x.imag)
            o_r[i] = complex(c * y.real, c * y.imag)
        if shift > 0:
            for i in range(lo, hi + 1 - shift):
                y = b_r[i + shift]
                o_l[i] += complex(-s * y.imag, s * y.real)
            for i in range(lo + shift, hi + 1):
                x = b_l[i - shift]
                o_r[i] += complex(-s * x.imag, s * x.real)
        a_l, o_l = o_l, a_l
        a_r, o_r = o_r, a_r
    out = np.empty((n, 2), dtype=np.complex128)
    out[:, 0] = a_l
    out[:, 1] = a_r
    return out


@njit(cache=True, nogil=True)
def walk_history_nb(amps, w, c, s, shift, nsteps):
    n = amps.shape[0]
    hist = np.zeros((nsteps + 1, n, 2), dtype=np.complex128)
    hist[0] = amps
    b_l = np.empty(n, dtype=np.complex128)
    b_r = np.empty(n, dtype=np.complex128)
    lo, hi = _support_nb(amps)
    if hi < 0:
        return hist
    for t in range(nsteps):
        lo = max(lo - shift, 0)
        hi = min(hi + shift, n - 1)
        _step_nb(hist[t], w, c, s, shift, hist[t + 1], b_l, b_r, lo, hi)
    return hist


# --------------------------------------------------------------------------
# SU(2) decomposition  e^{i phi} U = cos E I - i sin E (n . sigma)
# --------------------------------------------------------------------------

def su2_decompose_np(u):
    det = u[:, 0, 0] * u[:, 1, 1] - u[:, 0, 1] * u[:, 1, 0]
    phase = -0.5 * np.angle(det)
    m = u * np.exp(1j * phase)[:, None, None]
    a0 = 0.5 * (m[:, 0, 0] + m[:, 1, 1]).real
    ax = -0.5 * (m[:, 0, 1] + m[:, 1, 0]).imag
    ay = -0.5 * (m[:, 0, 1] - m[:, 1, 0]).real
    az = -0.5 * (m[:, 0, 0] - m[:, 1, 1]).imag
    sin_e = np.sqrt(ax * ax + ay * ay + az * az)
    energy = np.arctan2(sin_e, a0)
    n = np.stack([ax, ay, az], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / sin_e[:, None]
    return energy, n, phase, sin_e


@njit(cache=True, nogil=True)
def su2_decompose_nb(u):
    count = u.shape[0]
    energy = np.empty(count)
    n = np.empty((count, 3))
    phase = np.empty(count)
    sin_e = np.empty(count)
    for i in range(count):
        det = u[i, 0, 0] * u[i, 1, 1] - u[i, 0, 1] * u[i, 1, 0]
        ph = -0.5 * np.arctan2(det.imag, det.real)
        rot = np.exp(1j * ph)
        m00 = u[i, 0, 0] * rot
        m01 = u[i, 0, 1] * rot
        m10 = u[i, 1, 0] * rot
        m11 = u[i, 1, 1] * rot
        a0 = 0.5 * (m00 + m11).real
        ax = -0.5 * (m01 + m10).imag
        ay = -0.5 * (m01 - m10).real
        az = -0.5 * (m00 - m11).imag
        s = np.sqrt(ax * ax + ay * ay + az * az)
        energy[i] = np.arctan2(s, a0)
        phase[i] = ph
        sin_e[i] = s
        if s > 0.0:
            n[i, 0] = ax / s
            n[i, 1] = ay / s
            n[i, 2] = az / s
        else:
            n[i, 0] = np.nan
            n[i, 1] = np.nan
            n[i, 2] = np.nan
    return energy, n, phase, sin_e


if USE_NUMBA:
    walk_final = walk_final_nb
    walk_history = walk_history_nb
    su2_decompose = su2_decompose_nb
else:
    walk_final = walk_final_np
    walk_history = walk_history_np
    su2_decompose = su2_decompose_np
