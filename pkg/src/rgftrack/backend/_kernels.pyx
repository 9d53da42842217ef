# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""C implementations of the two hot kernels (ray casting, info accumulation).

Mirrors numpy_impl formula for formula; summation order differs, so the
backends agree to roundoff rather than bit for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, isfinite, log, sqrt

cnp.import_array()

cdef double MT_EPS = 1e-12
cdef double T_EPS = 1e-9
cdef double TWO_PI = 6.283185307179586476925286766559
# body-noise quadrature (must match numpy_impl): nodes 0, +/-sqrt(3) stds,
# weights 2/3, 1/6, 1/6
cdef double NODE_SCALE = 1.7320508075688772935274463415
cdef double VW0 = 2.0 / 3.0
cdef double VW1 = 1.0 / 6.0


def raycast_z(vertices, triangles, dirs, bint prune=True):
    """Nearest positive ray-triangle intersection parameter per ray.

    Same contract as the numpy backend: origin rays, NaN for misses, and a
    conservative bounding-sphere pre-test that never changes results.
    """
    verts_arr = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    tris_arr = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
    dirs_arr = np.ascontiguousarray(np.asarray(dirs, dtype=np.float64))
    out_arr = np.full(dirs_arr.shape[0], np.nan)
    if verts_arr.shape[0] == 0 or tris_arr.shape[0] == 0 or dirs_arr.shape[0] == 0:
        return out_arr

    cdef const double[:, ::1] verts = verts_arr
    cdef const long long[:, ::1] tris = tris_arr
    cdef const double[:, ::1] d = dirs_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n_tris = tris.shape[0]
    cdef Py_ssize_t n_rays = d.shape[0]

    # per-triangle precomputation (shared ray origin at 0)
    pre_arr = np.empty((n_tris, 13))
    cdef double[:, ::1] pre = pre_arr
    cdef Py_ssize_t i, r
    cdef Py_ssize_t ia, ib, ic
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, sx, sy, sz, qx, qy, qz
    for i in range(n_tris):
        ia = tris[i, 0]
        ib = tris[i, 1]
        ic = tris[i, 2]
        sx = -verts[ia, 0]
        sy = -verts[ia, 1]
        sz = -verts[ia, 2]
        e1x = verts[ib, 0] + sx
        e1y = verts[ib, 1] + sy
        e1z = verts[ib, 2] + sz
        e2x = verts[ic, 0] + sx
        e2y = verts[ic, 1] + sy
        e2z = verts[ic, 2] + sz
        qx = sy * e1z - sz * e1y
        qy = sz * e1x - sx * e1z
        qz = sx * e1y - sy * e1x
        pre[i, 0] = e1x; pre[i, 1] = e1y; pre[i, 2] = e1z
        pre[i, 3] = e2x; pre[i, 4] = e2y; pre[i, 5] = e2z
        pre[i, 6] = sx;  pre[i, 7] = sy;  pre[i, 8] = sz
        pre[i, 9] = qx;  pre[i, 10] = qy; pre[i, 11] = qz
        pre[i, 12] = e2x * qx + e2y * qy + e2z * qz  # t numerator

    cdef double cx = 0.0, cy = 0.0, cz = 0.0, radius2 = 0.0, cc = 0.0
    cdef double lox, loy, loz, hix, hiy, hiz, dx2, dy2, dz2, r2
    if prune:
        lox = hix = verts[0, 0]
        loy = hiy = verts[0, 1]
        loz = hiz = verts[0, 2]
        for i in range(1, verts.shape[0]):
            if verts[i, 0] < lox: lox = verts[i, 0]
            if verts[i, 0] > hix: hix = verts[i, 0]
            if verts[i, 1] < loy: loy = verts[i, 1]
            if verts[i, 1] > hiy: hiy = verts[i, 1]
            if verts[i, 2] < loz: loz = verts[i, 2]
            if verts[i, 2] > hiz: hiz = verts[i, 2]
        cx = 0.5 * (lox + hix)
        cy = 0.5 * (loy + hiy)
        cz = 0.5 * (loz + hiz)
        for i in range(verts.shape[0]):
            dx2 = verts[i, 0] - cx
            dy2 = verts[i, 1] - cy
            dz2 = verts[i, 2] - cz
            r2 = dx2 * dx2 + dy2 * dy2 + dz2 * dz2
            if r2 > radius2:
                radius2 = r2
        radius2 = radius2 * (1.0 + 1e-9) + 1e-18
        cc = cx * cx + cy * cy + cz * cz

    cdef double ux, uy, uz, cu, uu, dist2
    cdef double px, py, pz, det, inv_det, u, v, t, best
    for r in range(n_rays):
        ux = d[r, 0]
        uy = d[r, 1]
        uz = d[r, 2]
        if prune:
            cu = ux * cx + uy * cy + uz * cz
            if cu > 0.0:
                uu = ux * ux + uy * uy + uz * uz
                dist2 = cc - (cu * cu) / uu
            else:
                dist2 = cc
            if dist2 > radius2:
                continue
        best = INFINITY
        for i in range(n_tris):
            # pvec = dir x e2
            px = uy * pre[i, 5] - uz * pre[i, 4]
            py = uz * pre[i, 3] - ux * pre[i, 5]
            pz = ux * pre[i, 4] - uy * pre[i, 3]
            det = px * pre[i, 0] + py * pre[i, 1] + pz * pre[i, 2]
            if fabs(det) <= MT_EPS:
                continue
            inv_det = 1.0 / det
            u = (pre[i, 6] * px + pre[i, 7] * py + pre[i, 8] * pz) * inv_det
            if u < 0.0 or u > 1.0:
                continue
            v = (ux * pre[i, 9] + uy * pre[i, 10] + uz * pre[i, 11]) * inv_det
            if v < 0.0 or u + v > 1.0:
                continue
            t = pre[i, 12] * inv_det
            if t > T_EPS and t < best:
                best = t
        if best < INFINITY:
            out[r] = best
    return out_arr


cdef inline void _feature3(double val, double mu, double var, double tail_weight,
                           double log_tail, double log_ratio_max,
                           double* f0, double* f1, double* f2) noexcept nogil:
    cdef double z, log_body, lr, rho, denom
    if tail_weight == 0.0:
        f0[0] = 1.0
        f1[0] = val
        f2[0] = 0.0
        return
    z = val - mu
    log_body = -0.5 * (z * z) / var - 0.5 * log(TWO_PI * var)
    lr = log_tail - log_body
    if lr > log_ratio_max:
        lr = log_ratio_max
    rho = exp(lr)
    denom = (1.0 - tail_weight) + tail_weight * rho
    f0[0] = 1.0 / denom
    f1[0] = val / denom
    f2[0] = rho / denom


def accumulate_info(depths, y, xc, g, w_mean, w_cov, double noise_var,
                    double tail_weight, double tail_value, double log_ratio_max,
                    double floor_rel, double miss_value):
    """Information-form accumulation over per-pixel 3-feature models.

    Same contract as the numpy backend: returns (D, d, used, skipped).
    """
    depths_arr = np.ascontiguousarray(np.asarray(depths, dtype=np.float64))
    y_arr = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    xc_arr = np.ascontiguousarray(np.asarray(xc, dtype=np.float64))
    g_arr = np.ascontiguousarray(np.asarray(g, dtype=np.float64))
    wm_arr = np.ascontiguousarray(np.asarray(w_mean, dtype=np.float64))
    wc_arr = np.ascontiguousarray(np.asarray(w_cov, dtype=np.float64))

    cdef const double[:, ::1] dep = depths_arr
    cdef const double[::1] yv = y_arr
    cdef const double[:, ::1] xcv = xc_arr
    cdef const double[:, ::1] gv = g_arr
    cdef const double[::1] wm = wm_arr
    cdef const double[::1] wc = wc_arr

    cdef Py_ssize_t m = dep.shape[0]
    cdef Py_ssize_t kk = dep.shape[1]
    cdef Py_ssize_t n = xcv.shape[1]

    big_arr = np.zeros((n, n))
    small_arr = np.zeros(n)
    cdef double[:, ::1] big_d = big_arr
    cdef double[::1] small_d = small_arr

    # scratch, reused across pixels
    dphi_arr = np.empty((kk, 3))
    sxf_arr = np.empty((n, 3))
    bmat_arr = np.empty((n, 3))
    cdef double[:, ::1] dphi = dphi_arr
    cdef double[:, ::1] sxf = sxf_arr
    cdef double[:, ::1] bm = bmat_arr

    cdef double tiny = np.finfo(float).tiny
    cdef double log_tail = log(tail_value) if tail_value > 0.0 else -INFINITY
    cdef double noise_std = sqrt(noise_var)
    cdef double node_off = NODE_SCALE * noise_std

    cdef Py_ssize_t pix, k, f, nn, pp
    cdef double mu, var, devk, wgt, wsum, dk
    cdef double a0, a1, a2, b0, b1, b2, c0, c1, c2
    cdef double f0, f1, f2, mu0, mu1, mu2
    cdef double da0, da1, da2, db0, db1, db2, dc0, dc1, dc2
    cdef double cm00, cm01, cm02, cm11, cm12, cm22
    cdef double tau2, wt, ct00, ct01, ct02, ct11, ct12, ct22
    cdef double sff00, sff01, sff02, sff11, sff12, sff22
    cdef double p00, p01, p02, p11, p12, p22, eps
    cdef double co00, co01, co02, det, inv_det
    cdef double q00, q01, q02, q11, q12, q22
    cdef double in0, in1, in2, t0, t1, t2
    cdef bint ok
    cdef Py_ssize_t used = 0

    for pix in range(m):
        # body moments condition on the hitting (finite) sigma states; a
        # missing state predicts miss_value, deep in the tail of that body
        wsum = 0.0
        mu = 0.0
        for k in range(kk):
            dk = dep[pix, k]
            if isfinite(dk):
                wsum += wm[k]
                mu += wm[k] * dk
        if wsum > 0.0:
            mu /= wsum
        else:
            mu = dep[pix, 0]
        var = 0.0
        for k in range(kk):
            dk = dep[pix, k]
            if isfinite(dk):
                devk = dk - mu
                var += wc[k] * devk * devk
        var += noise_var
        if var < tiny:
            var = tiny

        # per-state noise marginalization: node-averaged features into dphi,
        # node-conditional covariance into cm (law of total covariance)
        cm00 = 0.0; cm01 = 0.0; cm02 = 0.0
        cm11 = 0.0; cm12 = 0.0; cm22 = 0.0
        for k in range(kk):
            dk = dep[pix, k]
            if not isfinite(dk):
                dk = miss_value
            _feature3(dk, mu, var, tail_weight, log_tail, log_ratio_max,
                      &a0, &a1, &a2)
            _feature3(dk + node_off, mu, var, tail_weight, log_tail,
                      log_ratio_max, &b0, &b1, &b2)
            _feature3(dk - node_off, mu, var, tail_weight, log_tail,
                      log_ratio_max, &c0, &c1, &c2)
            f0 = VW0 * a0 + VW1 * b0 + VW1 * c0
            f1 = VW0 * a1 + VW1 * b1 + VW1 * c1
            f2 = VW0 * a2 + VW1 * b2 + VW1 * c2
            dphi[k, 0] = f0
            dphi[k, 1] = f1
            dphi[k, 2] = f2
            wgt = wm[k]
            da0 = a0 - f0; da1 = a1 - f1; da2 = a2 - f2
            db0 = b0 - f0; db1 = b1 - f1; db2 = b2 - f2
            dc0 = c0 - f0; dc1 = c1 - f1; dc2 = c2 - f2
            cm00 += wgt * (VW0 * da0 * da0 + VW1 * db0 * db0 + VW1 * dc0 * dc0)
            cm01 += wgt * (VW0 * da0 * da1 + VW1 * db0 * db1 + VW1 * dc0 * dc1)
            cm02 += wgt * (VW0 * da0 * da2 + VW1 * db0 * db2 + VW1 * dc0 * dc2)
            cm11 += wgt * (VW0 * da1 * da1 + VW1 * db1 * db1 + VW1 * dc1 * dc1)
            cm12 += wgt * (VW0 * da1 * da2 + VW1 * db1 * db2 + VW1 * dc1 * dc2)
            cm22 += wgt * (VW0 * da2 * da2 + VW1 * db2 * db2 + VW1 * dc2 * dc2)

        if tail_weight > 0.0:
            # full measurement mixture: with probability w the measurement is
            # a tail draw whose feature saturates at (0, 0, 1/w); the extra
            # between-component spread is what bounds an outlier's pull
            tau2 = 1.0 / tail_weight
            ct00 = 0.0; ct01 = 0.0; ct02 = 0.0
            ct11 = 0.0; ct12 = 0.0; ct22 = 0.0
            for k in range(kk):
                wgt = wm[k]
                da0 = dphi[k, 0]
                da1 = dphi[k, 1]
                da2 = dphi[k, 2] - tau2
                ct00 += wgt * da0 * da0
                ct01 += wgt * da0 * da1
                ct02 += wgt * da0 * da2
                ct11 += wgt * da1 * da1
                ct12 += wgt * da1 * da2
                ct22 += wgt * da2 * da2
                dphi[k, 0] = (1.0 - tail_weight) * dphi[k, 0]
                dphi[k, 1] = (1.0 - tail_weight) * dphi[k, 1]
                dphi[k, 2] = (1.0 - tail_weight) * dphi[k, 2] + 1.0
            wt = tail_weight * (1.0 - tail_weight)
            cm00 = (1.0 - tail_weight) * cm00 + wt * ct00
            cm01 = (1.0 - tail_weight) * cm01 + wt * ct01
            cm02 = (1.0 - tail_weight) * cm02 + wt * ct02
            cm11 = (1.0 - tail_weight) * cm11 + wt * ct11
            cm12 = (1.0 - tail_weight) * cm12 + wt * ct12
            cm22 = (1.0 - tail_weight) * cm22 + wt * ct22

        mu0 = 0.0; mu1 = 0.0; mu2 = 0.0
        for k in range(kk):
            wgt = wm[k]
            mu0 += wgt * dphi[k, 0]
            mu1 += wgt * dphi[k, 1]
            mu2 += wgt * dphi[k, 2]
        for k in range(kk):
            dphi[k, 0] -= mu0
            dphi[k, 1] -= mu1
            dphi[k, 2] -= mu2

        sff00 = cm00; sff01 = cm01; sff02 = cm02
        sff11 = cm11; sff12 = cm12; sff22 = cm22
        for k in range(kk):
            wgt = wc[k]
            f0 = dphi[k, 0]; f1 = dphi[k, 1]; f2 = dphi[k, 2]
            sff00 += wgt * f0 * f0
            sff01 += wgt * f0 * f1
            sff02 += wgt * f0 * f2
            sff11 += wgt * f1 * f1
            sff12 += wgt * f1 * f2
            sff22 += wgt * f2 * f2

        for nn in range(n):
            for f in range(3):
                sxf[nn, f] = 0.0
                bm[nn, f] = 0.0
        for k in range(kk):
            wgt = wc[k]
            f0 = wgt * dphi[k, 0]; f1 = wgt * dphi[k, 1]; f2 = wgt * dphi[k, 2]
            for nn in range(n):
                sxf[nn, 0] += xcv[k, nn] * f0
                sxf[nn, 1] += xcv[k, nn] * f1
                sxf[nn, 2] += xcv[k, nn] * f2
                bm[nn, 0] += gv[k, nn] * f0
                bm[nn, 1] += gv[k, nn] * f1
                bm[nn, 2] += gv[k, nn] * f2

        p00 = sff00; p01 = sff01; p02 = sff02
        p11 = sff11; p12 = sff12; p22 = sff22
        for nn in range(n):
            p00 -= sxf[nn, 0] * bm[nn, 0]
            p11 -= sxf[nn, 1] * bm[nn, 1]
            p22 -= sxf[nn, 2] * bm[nn, 2]
            p01 -= 0.5 * (sxf[nn, 0] * bm[nn, 1] + sxf[nn, 1] * bm[nn, 0])
            p02 -= 0.5 * (sxf[nn, 0] * bm[nn, 2] + sxf[nn, 2] * bm[nn, 0])
            p12 -= 0.5 * (sxf[nn, 1] * bm[nn, 2] + sxf[nn, 2] * bm[nn, 1])
        eps = p00 + p11 + p22
        if eps < 0.0:
            eps = 0.0
        eps *= floor_rel
        p00 += eps
        p11 += eps
        p22 += eps

        # symmetric 3x3 inverse with positive-definiteness gate
        co00 = p11 * p22 - p12 * p12
        co01 = p02 * p12 - p01 * p22
        co02 = p01 * p12 - p02 * p11
        det = p00 * co00 + p01 * co01 + p02 * co02
        ok = (isfinite(det) and det > 0.0 and p00 > 0.0
              and (p00 * p11 - p01 * p01) > 0.0
              and isfinite(p00) and isfinite(p01) and isfinite(p02)
              and isfinite(p11) and isfinite(p12) and isfinite(p22))
        if not ok:
            continue

        _feature3(yv[pix], mu, var, tail_weight, log_tail, log_ratio_max,
                  &f0, &f1, &f2)
        in0 = f0 - mu0
        in1 = f1 - mu1
        in2 = f2 - mu2
        if not (isfinite(in0) and isfinite(in1) and isfinite(in2)):
            continue
        ok = True
        for nn in range(n):
            if not (isfinite(bm[nn, 0]) and isfinite(bm[nn, 1]) and isfinite(bm[nn, 2])):
                ok = False
                break
        if not ok:
            continue

        inv_det = 1.0 / det
        q00 = co00 * inv_det
        q01 = co01 * inv_det
        q02 = co02 * inv_det
        q11 = (p00 * p22 - p02 * p02) * inv_det
        q12 = (p01 * p02 - p00 * p12) * inv_det
        q22 = (p00 * p11 - p01 * p01) * inv_det

        for nn in range(n):
            t0 = bm[nn, 0] * q00 + bm[nn, 1] * q01 + bm[nn, 2] * q02
            t1 = bm[nn, 0] * q01 + bm[nn, 1] * q11 + bm[nn, 2] * q12
            t2 = bm[nn, 0] * q02 + bm[nn, 1] * q12 + bm[nn, 2] * q22
            small_d[nn] += t0 * in0 + t1 * in1 + t2 * in2
            for pp in range(n):
                big_d[nn, pp] += t0 * bm[pp, 0] + t1 * bm[pp, 1] + t2 * bm[pp, 2]
        used += 1

    if used == 0:
        return np.zeros((n, n)), np.zeros(n), 0, int(m)
    return 0.5 * (big_arr + big_arr.T), small_arr, int(used), int(m - used)
