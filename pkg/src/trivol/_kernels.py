"""Numba kernels for factor sampling and its adjoint.

Factors are laid out with the flattened (channel, rank) axis last so the inner
loop runs over contiguous memory. All kernels take precomputed lower-corner
indices ``i0`` (n, 3) and weights ``w`` (n, 6) = (1-fx, fx, 1-fy, fy, 1-fz, fz)
in the factor dtype, so a kernel never mixes precisions. Loops are sequential,
which keeps gradient accumulation order (and therefore the result) fixed.
"""
import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True)
def triplanar_forward(xy, yz, xz, i0, w, n_channels, product, out):
    m_total = xy.shape[2]
    n_rank = m_total // n_channels
    v = np.empty(m_total, xy.dtype)
    for p in range(i0.shape[0]):
        i = i0[p, 0]
        j = i0[p, 1]
        k = i0[p, 2]
        x0 = w[p, 0]
        x1 = w[p, 1]
        y0 = w[p, 2]
        y1 = w[p, 3]
        z0 = w[p, 4]
        z1 = w[p, 5]
        a00 = x0 * y0
        a01 = x0 * y1
        a10 = x1 * y0
        a11 = x1 * y1
        b00 = y0 * z0
        b01 = y0 * z1
        b10 = y1 * z0
        b11 = y1 * z1
        c00 = x0 * z0
        c01 = x0 * z1
        c10 = x1 * z0
        c11 = x1 * z1
        if product:
            for m in range(m_total):
                v[m] = (
                    (a00 * xy[i, j, m] + a01 * xy[i, j + 1, m] + a10 * xy[i + 1, j, m] + a11 * xy[i + 1, j + 1, m])
                    * (b00 * yz[j, k, m] + b01 * yz[j, k + 1, m] + b10 * yz[j + 1, k, m] + b11 * yz[j + 1, k + 1, m])
                    * (c00 * xz[i, k, m] + c01 * xz[i, k + 1, m] + c10 * xz[i + 1, k, m] + c11 * xz[i + 1, k + 1, m])
                )
        else:
            for m in range(m_total):
                v[m] = (
                    (a00 * xy[i, j, m] + a01 * xy[i, j + 1, m] + a10 * xy[i + 1, j, m] + a11 * xy[i + 1, j + 1, m])
                    + (b00 * yz[j, k, m] + b01 * yz[j, k + 1, m] + b10 * yz[j + 1, k, m] + b11 * yz[j + 1, k + 1, m])
                    + (c00 * xz[i, k, m] + c01 * xz[i, k + 1, m] + c10 * xz[i + 1, k, m] + c11 * xz[i + 1, k + 1, m])
                )
        for c in range(n_channels):
            for r in range(n_rank):
                out[p, c] += v[c * n_rank + r]


@nb.njit(cache=True, fastmath=True)
def triplanar_backward(xy, yz, xz, i0, w, g, gxy, gyz, gxz, n_channels, product):
    m_total = xy.shape[2]
    n_rank = m_total // n_channels
    gm = np.empty(m_total, xy.dtype)
    ga = np.empty(m_total, xy.dtype)
    gb = np.empty(m_total, xy.dtype)
    gc = np.empty(m_total, xy.dtype)
    for p in range(i0.shape[0]):
        i = i0[p, 0]
        j = i0[p, 1]
        k = i0[p, 2]
        x0 = w[p, 0]
        x1 = w[p, 1]
        y0 = w[p, 2]
        y1 = w[p, 3]
        z0 = w[p, 4]
        z1 = w[p, 5]
        a00 = x0 * y0
        a01 = x0 * y1
        a10 = x1 * y0
        a11 = x1 * y1
        b00 = y0 * z0
        b01 = y0 * z1
        b10 = y1 * z0
        b11 = y1 * z1
        c00 = x0 * z0
        c01 = x0 * z1
        c10 = x1 * z0
        c11 = x1 * z1
        for c in range(n_channels):
            for r in range(n_rank):
                gm[c * n_rank + r] = g[p, c]
        if product:
            for m in range(m_total):
                va = a00 * xy[i, j, m] + a01 * xy[i, j + 1, m] + a10 * xy[i + 1, j, m] + a11 * xy[i + 1, j + 1, m]
                vb = b00 * yz[j, k, m] + b01 * yz[j, k + 1, m] + b10 * yz[j + 1, k, m] + b11 * yz[j + 1, k + 1, m]
                vc = c00 * xz[i, k, m] + c01 * xz[i, k + 1, m] + c10 * xz[i + 1, k, m] + c11 * xz[i + 1, k + 1, m]
                ga[m] = gm[m] * vb * vc
                gb[m] = gm[m] * va * vc
                gc[m] = gm[m] * va * vb
        else:
            for m in range(m_total):
                ga[m] = gm[m]
                gb[m] = gm[m]
                gc[m] = gm[m]
        for m in range(m_total):
            gxy[i, j, m] += ga[m] * a00
            gxy[i, j + 1, m] += ga[m] * a01
            gxy[i + 1, j, m] += ga[m] * a10
            gxy[i + 1, j + 1, m] += ga[m] * a11
        for m in range(m_total):
            gyz[j, k, m] += gb[m] * b00
            gyz[j, k + 1, m] += gb[m] * b01
            gyz[j + 1, k, m] += gb[m] * b10
            gyz[j + 1, k + 1, m] += gb[m] * b11
        for m in range(m_total):
            gxz[i, k, m] += gc[m] * c00
            gxz[i, k + 1, m] += gc[m] * c01
            gxz[i + 1, k, m] += gc[m] * c10
            gxz[i + 1, k + 1, m] += gc[m] * c11


@nb.njit(cache=True, fastmath=True)
def triplanar_coord_grad(xy, yz, xz, i0, w, ds, g, n_channels, product, cg):
    """d(loss)/d(coords) given d(loss)/d(features); read-only on the planes."""
    m_total = xy.shape[2]
    n_rank = m_total // n_channels
    for p in range(i0.shape[0]):
        i = i0[p, 0]
        j = i0[p, 1]
        k = i0[p, 2]
        x0 = w[p, 0]
        x1 = w[p, 1]
        y0 = w[p, 2]
        y1 = w[p, 3]
        z0 = w[p, 4]
        z1 = w[p, 5]
        gx = 0.0
        gy = 0.0
        gz = 0.0
        for m in range(m_total):
            A00 = xy[i, j, m]
            A01 = xy[i, j + 1, m]
            A10 = xy[i + 1, j, m]
            A11 = xy[i + 1, j + 1, m]
            B00 = yz[j, k, m]
            B01 = yz[j, k + 1, m]
            B10 = yz[j + 1, k, m]
            B11 = yz[j + 1, k + 1, m]
            C00 = xz[i, k, m]
            C01 = xz[i, k + 1, m]
            C10 = xz[i + 1, k, m]
            C11 = xz[i + 1, k + 1, m]
            gv = g[p, m // n_rank]
            if product:
                va = x0 * (y0 * A00 + y1 * A01) + x1 * (y0 * A10 + y1 * A11)
                vb = y0 * (z0 * B00 + z1 * B01) + y1 * (z0 * B10 + z1 * B11)
                vc = x0 * (z0 * C00 + z1 * C01) + x1 * (z0 * C10 + z1 * C11)
                ga = gv * vb * vc
                gb = gv * va * vc
                gc = gv * va * vb
            else:
                ga = gv
                gb = gv
                gc = gv
            gx += ga * (y0 * (A10 - A00) + y1 * (A11 - A01)) + gc * (z0 * (C10 - C00) + z1 * (C11 - C01))
            gy += ga * (x0 * (A01 - A00) + x1 * (A11 - A10)) + gb * (z0 * (B10 - B00) + z1 * (B11 - B01))
            gz += gb * (y0 * (B01 - B00) + y1 * (B11 - B10)) + gc * (x0 * (C01 - C00) + x1 * (C11 - C10))
        cg[p, 0] = gx * ds[p, 0]
        cg[p, 1] = gy * ds[p, 1]
        cg[p, 2] = gz * ds[p, 2]


@nb.njit(cache=True, fastmath=True)
def cp_forward(vx, vy, vz, i0, w, n_channels, out):
    m_total = vx.shape[1]
    n_rank = m_total // n_channels
    v = np.empty(m_total, vx.dtype)
    for p in range(i0.shape[0]):
        i = i0[p, 0]
        j = i0[p, 1]
        k = i0[p, 2]
        x0 = w[p, 0]
        x1 = w[p, 1]
        y0 = w[p, 2]
        y1 = w[p, 3]
        z0 = w[p, 4]
        z1 = w[p, 5]
        for m in range(m_total):
            v[m] = (
                (x0 * vx[i, m] + x1 * vx[i + 1, m])
                * (y0 * vy[j, m] + y1 * vy[j + 1, m])
                * (z0 * vz[k, m] + z1 * vz[k + 1, m])
            )
        for c in range(n_channels):
            for r in range(n_rank):
                out[p, c] += v[c * n_rank + r]


@nb.njit(cache=True, fastmath=True)
def cp_backward(vx, vy, vz, i0, w, ds, g, gvx, gvy, gvz, n_channels, want_coord, cg):
    m_total = vx.shape[1]
    n_rank = m_total // n_channels
    gm = np.empty(m_total, vx.dtype)
    for p in range(i0.shape[0]):
        i = i0[p, 0]
        j = i0[p, 1]
        k = i0[p, 2]
        x0 = w[p, 0]
        x1 = w[p, 1]
        y0 = w[p, 2]
        y1 = w[p, 3]
        z0 = w[p, 4]
        z1 = w[p, 5]
        for c in range(n_channels):
            for r in range(n_rank):
                gm[c * n_rank + r] = g[p, c]
        gx = 0.0
        gy = 0.0
        gz = 0.0
        for m in range(m_total):
            X0 = vx[i, m]
            X1 = vx[i + 1, m]
            Y0 = vy[j, m]
            Y1 = vy[j + 1, m]
            Z0 = vz[k, m]
            Z1 = vz[k + 1, m]
            a = x0 * X0 + x1 * X1
            b = y0 * Y0 + y1 * Y1
            c_ = z0 * Z0 + z1 * Z1
            gv = gm[m]
            ga = gv * b * c_
            gb = gv * a * c_
            gc = gv * a * b
            gvx[i, m] += ga * x0
            gvx[i + 1, m] += ga * x1
            gvy[j, m] += gb * y0
            gvy[j + 1, m] += gb * y1
            gvz[k, m] += gc * z0
            gvz[k + 1, m] += gc * z1
            gx += ga * (X1 - X0)
            gy += gb * (Y1 - Y0)
            gz += gc * (Z1 - Z0)
        if want_coord:
            cg[p, 0] = gx * ds[p, 0]
            cg[p, 1] = gy * ds[p, 1]
            cg[p, 2] = gz * ds[p, 2]


@nb.njit(cache=True, fastmath=True)
def encode_args(p, freqs, args):
    """args[l, i, c] = p[i, c] * freqs[l]."""
    for l in range(freqs.shape[0]):
        f = freqs[l]
        for i in range(p.shape[0]):
            for c in range(p.shape[1]):
                args[l, i, c] = p[i, c] * f


@nb.njit(cache=True)
def encode_interleave(p, sin_a, cos_a, raw, out):
    n_deg = sin_a.shape[0]
    width = 2 * n_deg + raw
    for i in range(p.shape[0]):
        for c in range(p.shape[1]):
            b = c * width
            if raw:
                out[i, b] = p[i, c]
            for l in range(n_deg):
                out[i, b + raw + 2 * l] = sin_a[l, i, c]
                out[i, b + raw + 2 * l + 1] = cos_a[l, i, c]


@nb.njit(cache=True, fastmath=True)
def encode_backward(g, sin_a, cos_a, freqs, raw, grad):
    n_deg = sin_a.shape[0]
    width = 2 * n_deg + raw
    for i in range(grad.shape[0]):
        for c in range(grad.shape[1]):
            b = c * width
            acc = g[i, b] if raw else g[i, b] * 0
            for l in range(n_deg):
                acc += freqs[l] * (g[i, b + raw + 2 * l] * cos_a[l, i, c] - g[i, b + raw + 2 * l + 1] * sin_a[l, i, c])
            grad[i, c] = acc
