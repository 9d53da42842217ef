"""Vectorized numpy implementation of the hot kernels.

This is both the import-time fallback and the reference the Cython kernels
are tested against; keep the arithmetic in the same order in both so the two
backends agree to near machine precision.
"""

import numpy as np

MT_EPS = 1e-12   # parallel-ray determinant cutoff
T_EPS = 1e-9     # minimum accepted intersection parameter
_SLAB = 2_000_000  # max ray*triangle pairs held in memory at once

# body-noise quadrature (Gauss-Hermite, 3 nodes, std units); must stay in
# sync with the robust-update module and the compiled kernels
NOISE_NODES = np.array([0.0, np.sqrt(3.0), -np.sqrt(3.0)])
NOISE_WEIGHTS = np.array([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])


def raycast_z(vertices, triangles, dirs, prune=True):
    """Moeller-Trumbore over all (ray, triangle) pairs, nearest positive hit.

    Rays start at the origin; the returned parameter is in units of the ray
    direction (z-depth when dir_z == 1).  NaN marks rays with no hit.  The
    bounding-sphere pre-test only discards rays that provably miss every
    triangle, so pruning never changes the result.
    """
    verts = np.asarray(vertices, dtype=float)
    tris = np.asarray(triangles, dtype=np.int64)
    dirs = np.asarray(dirs, dtype=float)
    n_rays = dirs.shape[0]
    out = np.full(n_rays, np.nan)
    if verts.shape[0] == 0 or tris.shape[0] == 0 or n_rays == 0:
        return out

    v0 = verts[tris[:, 0]]
    e1 = verts[tris[:, 1]] - v0
    e2 = verts[tris[:, 2]] - v0
    s = -v0                           # ray origin minus v0, shared by all rays
    qvec = np.cross(s, e1)            # (T, 3)
    t_num = np.einsum('tc,tc->t', e2, qvec)

    if prune:
        lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        center = 0.5 * (lo + hi)
        radius2 = ((verts - center) ** 2).sum(axis=1).max() * (1.0 + 1e-9) + 1e-18
        cu = dirs @ center
        uu = np.einsum('rc,rc->r', dirs, dirs)
        cc = float(center @ center)
        # squared distance from the sphere center to the t >= 0 half-line
        d2 = np.where(cu > 0.0, cc - (cu * cu) / uu, cc)
        cand = np.flatnonzero(d2 <= radius2)
    else:
        cand = np.arange(n_rays)
    if cand.size == 0:
        return out

    n_tris = tris.shape[0]
    chunk = min(cand.size, max(64, _SLAB // n_tris))
    for start in range(0, cand.size, chunk):
        idx = cand[start:start + chunk]
        d = dirs[idx]
        pvec = np.cross(d[:, None, :], e2[None, :, :])        # (R, T, 3)
        det = np.einsum('rtc,tc->rt', pvec, e1)
        with np.errstate(divide='ignore', invalid='ignore'):
            inv_det = 1.0 / det
            u = np.einsum('tc,rtc->rt', s, pvec) * inv_det
            v = np.einsum('rc,tc->rt', d, qvec) * inv_det
            t = t_num[None, :] * inv_det
            valid = ((np.abs(det) > MT_EPS) & (u >= 0.0) & (u <= 1.0)
                     & (v >= 0.0) & (u + v <= 1.0) & (t > T_EPS))
        t = np.where(valid, t, np.inf)
        best = t.min(axis=1)
        out[idx] = np.where(np.isfinite(best), best, np.nan)
    return out


def _features(vals, mu, var, tail_weight, tail_value, log_ratio_max):
    """Bounded 3-component measurement feature, batched over the last axes.

    With tail_weight == 0 the embedding degrades to (1, y, 0), i.e. the raw
    measurement with inert padding.  The log tail/body ratio is clamped so a
    zero tail weight stays finite under extreme outliers.
    """
    vals = np.asarray(vals, dtype=float)
    out = np.empty(vals.shape + (3,))
    if tail_weight == 0.0:
        out[..., 0] = 1.0
        out[..., 1] = vals
        out[..., 2] = 0.0
        return out
    z = vals - mu
    log_body = -0.5 * (z * z) / var - 0.5 * np.log(2.0 * np.pi * var)
    rho = np.exp(np.minimum(np.log(tail_value) - log_body, log_ratio_max))
    denom = (1.0 - tail_weight) + tail_weight * rho
    out[..., 0] = 1.0 / denom
    out[..., 1] = vals / denom
    out[..., 2] = rho / denom
    return out


def _inv3(p):
    """Batched inverse of symmetric 3x3 matrices via the adjugate.

    Returns (inverse, ok); ok is False where the matrix is not finite and
    positive definite (Sylvester minors test).
    """
    a = p[:, 0, 0]
    b = p[:, 0, 1]
    c = p[:, 0, 2]
    d = p[:, 1, 1]
    e = p[:, 1, 2]
    f = p[:, 2, 2]
    co00 = d * f - e * e
    co01 = c * e - b * f
    co02 = b * e - c * d
    with np.errstate(all='ignore'):
        det = a * co00 + b * co01 + c * co02
        ok = (np.isfinite(det) & (det > 0.0) & (a > 0.0)
              & (a * d - b * b > 0.0) & np.isfinite(p).all(axis=(1, 2)))
        inv_det = np.where(ok, 1.0 / np.where(det == 0.0, 1.0, det), 0.0)
        pinv = np.empty_like(p)
        pinv[:, 0, 0] = co00 * inv_det
        pinv[:, 0, 1] = pinv[:, 1, 0] = co01 * inv_det
        pinv[:, 0, 2] = pinv[:, 2, 0] = co02 * inv_det
        pinv[:, 1, 1] = (a * f - c * c) * inv_det
        pinv[:, 1, 2] = pinv[:, 2, 1] = (b * c - a * e) * inv_det
        pinv[:, 2, 2] = (a * d - b * b) * inv_det
    return pinv, ok


def accumulate_info(depths, y, xc, g, w_mean, w_cov, noise_var, tail_weight,
                    tail_value, log_ratio_max, floor_rel, miss_value):
    """Per-pixel linear feature models accumulated in information form.

    depths: (M, K) predicted depth per pixel and sigma state, NaN where the
    sigma-state ray missed the object; y: (M,) measured depths; xc: (K, N)
    sigma-state deviations from the prior mean; g: (K, N) rows of
    Sigma_xx^-1 @ xc^T transposed.

    The body (inlier) depth moments condition on the hitting states so a
    silhouette pixel keeps a surface-scale bandwidth; missing states predict
    miss_value, which lies in the deep tail of that body and saturates the
    feature -- the pixel then discriminates on-object from off-object states
    instead of inventing a wide pseudo-surface.

    Returns (D, d, used, skipped) where D/d are the accumulated information
    matrix/vector and skipped counts pixels with singular feature covariance.
    """
    depths = np.asarray(depths, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = np.asarray(xc, dtype=float)
    g = np.asarray(g, dtype=float)
    w_mean = np.asarray(w_mean, dtype=float)
    w_cov = np.asarray(w_cov, dtype=float)
    m, _ = depths.shape
    n = xc.shape[1]

    hit = np.isfinite(depths)
    wm_hit = np.where(hit, w_mean, 0.0)
    wm_sum = wm_hit.sum(axis=1)
    d_fill = np.where(hit, depths, 0.0)
    with np.errstate(invalid='ignore', divide='ignore'):
        mu = np.where(wm_sum > 0.0, (wm_hit * d_fill).sum(axis=1) / wm_sum,
                      depths[:, 0])
    dev = np.where(hit, depths - mu[:, None], 0.0)
    var = (dev * dev) @ w_cov + noise_var
    var = np.maximum(var, np.finfo(float).tiny)
    depths = np.where(hit, depths, miss_value)

    noise_std = np.sqrt(noise_var)
    with np.errstate(all='ignore'):
        y_nodes = depths[:, :, None] + noise_std * NOISE_NODES      # (M, K, J)
        phi_sig = _features(y_nodes, mu[:, None, None], var[:, None, None],
                            tail_weight, tail_value, log_ratio_max)  # (M, K, J, F)
        phi_obs = _features(y, mu, var, tail_weight, tail_value, log_ratio_max)

        phi_bar = np.einsum('j,mkjf->mkf', NOISE_WEIGHTS, phi_sig)
        cond = phi_sig - phi_bar[:, :, None, :]
        c_mean = np.einsum('k,j,mkjf,mkjg->mfg', w_mean, NOISE_WEIGHTS,
                           cond, cond, optimize=True)

        if tail_weight > 0.0:
            # Full measurement mixture: with probability w the measurement is
            # a tail draw whose feature saturates at (0, 0, 1/w).  The extra
            # between-component spread is what bounds an outlier's pull.
            tau = np.array([0.0, 0.0, 1.0 / tail_weight])
            dev_t = phi_bar - tau
            c_mean = (1.0 - tail_weight) * c_mean + (
                tail_weight * (1.0 - tail_weight)) * np.einsum(
                    'k,mkf,mkg->mfg', w_mean, dev_t, dev_t, optimize=True)
            phi_bar = (1.0 - tail_weight) * phi_bar + tail_weight * tau

        mu_phi = np.einsum('k,mkf->mf', w_mean, phi_bar)
        dphi = phi_bar - mu_phi[:, None, :]
        s_ff = np.einsum('k,mkf,mkg->mfg', w_cov, dphi, dphi, optimize=True) + c_mean
        s_xf = np.einsum('k,kn,mkf->mnf', w_cov, xc, dphi, optimize=True)
        bmat = np.einsum('k,kn,mkf->mnf', w_cov, g, dphi, optimize=True)

        p = s_ff - np.einsum('mnf,mng->mfg', s_xf, bmat, optimize=True)
        p = 0.5 * (p + p.transpose(0, 2, 1))
        eps = floor_rel * np.maximum(p[:, 0, 0] + p[:, 1, 1] + p[:, 2, 2], 0.0)
        p[:, 0, 0] += eps
        p[:, 1, 1] += eps
        p[:, 2, 2] += eps

        pinv, ok = _inv3(p)
        innov = phi_obs - mu_phi
        ok &= np.isfinite(innov).all(axis=1) & np.isfinite(bmat).all(axis=(1, 2))

        big_d = np.einsum('mnf,mfg,mpg->np', bmat[ok], pinv[ok], bmat[ok], optimize=True)
        small_d = np.einsum('mnf,mfg,mg->n', bmat[ok], pinv[ok], innov[ok], optimize=True)

    used = int(ok.sum())
    if used == 0:
        return np.zeros((n, n)), np.zeros(n), 0, m
    return 0.5 * (big_d + big_d.T), small_d, used, m - used
