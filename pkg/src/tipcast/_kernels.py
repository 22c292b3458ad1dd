"""Numba kernels: RHS dispatch, Jacobians, Euler stepping, Newton continuation.

Everything here works on fixed 3-slot state vectors (unused slots stay 0)
so a single set of kernels serves 1D, 2D and 3D systems.  Model constants
travel in a flat float64 params array; the bifurcation parameter occupies
one designated slot that gets overwritten with the current mu before each
evaluation.
"""

import math

import numpy as np
from numba import njit

# RHS family ids (keep in sync with systems.py).
POLY2D = 0
MAY = 1
FOOD_CHAIN = 2
ROSENZWEIG = 3
ENERGY_BALANCE = 4
PLEISTOCENE = 5
TRIFFID = 6
SLEEP_WAKE = 7
SPROTT_B = 8
NF_FOLD = 9
NF_HOPF_SUPER = 10
NF_HOPF_SUB = 11
NF_TRANSCRITICAL = 12

# Status codes returned by the steppers.
OK = 0
DIVERGED = 1
BAD_EVAL = 2

OVERFLOW_GUARD = 1.0e8
DENOM_GUARD = 1.0e-12


@njit(cache=True)
def rhs_fill(rhs_id, p, x, out):
    """Evaluate the drift into out[0:3]; return False on a guarded denominator.

    p is the params array with the bifurcation slot already set to the
    current mu.  x has 3 slots; trailing ones are ignored per family.
    """
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    if rhs_id == POLY2D:
        xv = x[0]
        yv = x[1]
        x2 = xv * xv
        y2 = yv * yv
        m1 = xv * yv
        # monomials: 1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3
        out[0] = (p[0] + p[1] * xv + p[2] * yv + p[3] * x2 + p[4] * m1
                  + p[5] * y2 + p[6] * x2 * xv + p[7] * x2 * yv
                  + p[8] * xv * y2 + p[9] * y2 * yv)
        out[1] = (p[10] + p[11] * xv + p[12] * yv + p[13] * x2 + p[14] * m1
                  + p[15] * y2 + p[16] * x2 * xv + p[17] * x2 * yv
                  + p[18] * xv * y2 + p[19] * y2 * yv)
        return True
    if rhs_id == MAY:
        r, k, s, h = p[0], p[1], p[2], p[3]
        xv = x[0]
        den = s * s + xv * xv
        if abs(den) < DENOM_GUARD:
            return False
        out[0] = r * xv * (1.0 - xv / k) - h * xv * xv / den
        return True
    if rhs_id == FOOD_CHAIN:
        k, xc, yc, xp, yp, r0, c0 = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
        rv, cv, pv = x[0], x[1], x[2]
        d1 = rv + r0
        d2 = cv + c0
        if abs(d1) < DENOM_GUARD or abs(d2) < DENOM_GUARD:
            return False
        out[0] = rv * (1.0 - rv / k) - xc * yc * cv * rv / d1
        out[1] = xc * cv * (yc * rv / d1 - 1.0) - xp * yp * pv * cv / d2
        out[2] = xp * pv * (yp * cv / d2 - 1.0)
        return True
    if rhs_id == ROSENZWEIG:
        g, k, e, h, m, a = p[0], p[1], p[2], p[3], p[4], p[5]
        xv, yv = x[0], x[1]
        den = 1.0 + a * h * xv
        if abs(den) < DENOM_GUARD:
            return False
        out[0] = g * xv * (1.0 - xv / k) - a * xv * yv / den
        out[1] = e * a * xv * yv / den - m * yv
        return True
    if rhs_id == ENERGY_BALANCE:
        e, i0, c, a, b, rho, u = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
        t = x[0]
        ap = a - b * t
        out[0] = (-e * rho * t * t * t * t + 0.25 * u * i0 * (1.0 - ap)) / c
        return True
    if rhs_id == PLEISTOCENE:
        pp, q, s, u = p[0], p[1], p[2], p[3]
        xv, yv, zv = x[0], x[1], x[2]
        out[0] = -xv - yv
        out[1] = -pp * zv + u * yv + s * zv * zv - yv * zv * zv
        out[2] = -q * (xv + zv)
        return True
    if rhs_id == TRIFFID:
        g, pv = p[0], p[1]
        v = x[0]
        vstar = v
        if vstar < 0.1:
            vstar = 0.1
        out[0] = pv * vstar * (1.0 - v) - g * v
        return True
    if rhs_id == SLEEP_WAKE:
        tauv, taum, vvm, vmv, vmaqa, qmax, theta, sig, d = (
            p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8])
        vv, vm = x[0], x[1]
        qm = qmax / (1.0 + math.exp(-(vm - theta) / sig))
        qv = qmax / (1.0 + math.exp(-(vv - theta) / sig))
        out[0] = (-vv + vvm * qm + d) / tauv
        out[1] = (-vm + vmaqa + vmv * qv) / taum
        return True
    if rhs_id == SPROTT_B:
        a, b, beta, k = p[0], p[1], p[2], p[3]
        xv, yv, zv = x[0], x[1], x[2]
        out[0] = a * (yv - xv)
        out[1] = xv * zv + beta * math.cos(k)
        out[2] = b - xv * yv
        return True
    if rhs_id == NF_FOLD:
        out[0] = p[0] + x[0] * x[0]
        return True
    if rhs_id == NF_HOPF_SUPER:
        mu = p[0]
        xv, yv = x[0], x[1]
        r2 = xv * xv + yv * yv
        out[0] = mu * xv - yv - xv * r2
        out[1] = xv + mu * yv - yv * r2
        return True
    if rhs_id == NF_HOPF_SUB:
        mu = p[0]
        xv, yv = x[0], x[1]
        r2 = xv * xv + yv * yv
        out[0] = mu * xv - yv + xv * r2
        out[1] = xv + mu * yv + yv * r2
        return True
    if rhs_id == NF_TRANSCRITICAL:
        out[0] = p[0] * x[0] - x[0] * x[0]
        return True
    return False


@njit(cache=True)
def jac_fill(rhs_id, p, x, dim, jac):
    """Jacobian into jac[0:dim,0:dim]; analytic where cheap, else central FD.

    Returns False when an RHS evaluation hits a guarded denominator.
    """
    if rhs_id == POLY2D:
        xv, yv = x[0], x[1]
        x2 = xv * xv
        y2 = yv * yv
        jac[0, 0] = (p[1] + 2.0 * p[3] * xv + p[4] * yv + 3.0 * p[6] * x2
                     + 2.0 * p[7] * xv * yv + p[8] * y2)
        jac[0, 1] = (p[2] + p[4] * xv + 2.0 * p[5] * yv + p[7] * x2
                     + 2.0 * p[8] * xv * yv + 3.0 * p[9] * y2)
        jac[1, 0] = (p[11] + 2.0 * p[13] * xv + p[14] * yv + 3.0 * p[16] * x2
                     + 2.0 * p[17] * xv * yv + p[18] * y2)
        jac[1, 1] = (p[12] + p[14] * xv + 2.0 * p[15] * yv + p[17] * x2
                     + 2.0 * p[18] * xv * yv + 3.0 * p[19] * y2)
        return True
    if rhs_id == NF_FOLD:
        jac[0, 0] = 2.0 * x[0]
        return True
    if rhs_id == NF_HOPF_SUPER:
        mu = p[0]
        xv, yv = x[0], x[1]
        jac[0, 0] = mu - 3.0 * xv * xv - yv * yv
        jac[0, 1] = -1.0 - 2.0 * xv * yv
        jac[1, 0] = 1.0 - 2.0 * xv * yv
        jac[1, 1] = mu - xv * xv - 3.0 * yv * yv
        return True
    if rhs_id == NF_HOPF_SUB:
        mu = p[0]
        xv, yv = x[0], x[1]
        jac[0, 0] = mu + 3.0 * xv * xv + yv * yv
        jac[0, 1] = -1.0 + 2.0 * xv * yv
        jac[1, 0] = 1.0 + 2.0 * xv * yv
        jac[1, 1] = mu + xv * xv + 3.0 * yv * yv
        return True
    if rhs_id == NF_TRANSCRITICAL:
        jac[0, 0] = p[0] - 2.0 * x[0]
        return True
    # central finite differences, step scaled per component
    fp = np.empty(3)
    fm = np.empty(3)
    xw = np.empty(3)
    for j in range(3):
        xw[j] = x[j]
    for j in range(dim):
        h = 1.0e-6 * max(1.0, abs(x[j]))
        xw[j] = x[j] + h
        if not rhs_fill(rhs_id, p, xw, fp):
            return False
        xw[j] = x[j] - h
        if not rhs_fill(rhs_id, p, xw, fm):
            return False
        xw[j] = x[j]
        for i in range(dim):
            jac[i, j] = (fp[i] - fm[i]) / (2.0 * h)
    return True


@njit(cache=True)
def max_real_eig(jac, dim):
    """(max real part, |imag| of that leading eigenvalue) for dim <= 3.

    Closed forms: scalar, 2x2 quadratic, 3x3 via the trigonometric cubic
    solution of the characteristic polynomial.
    """
    if dim == 1:
        return jac[0, 0], 0.0
    if dim == 2:
        tr = jac[0, 0] + jac[1, 1]
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        disc = tr * tr - 4.0 * det
        if disc >= 0.0:
            s = math.sqrt(disc)
            return 0.5 * (tr + s), 0.0
        return 0.5 * tr, 0.5 * math.sqrt(-disc)
    # dim == 3: lambda^3 - c2 lambda^2 + c1 lambda - c0 = 0
    c2 = jac[0, 0] + jac[1, 1] + jac[2, 2]
    c1 = (jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
          + jac[0, 0] * jac[2, 2] - jac[0, 2] * jac[2, 0]
          + jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1])
    c0 = (jac[0, 0] * (jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1])
          - jac[0, 1] * (jac[1, 0] * jac[2, 2] - jac[1, 2] * jac[2, 0])
          + jac[0, 2] * (jac[1, 0] * jac[2, 1] - jac[1, 1] * jac[2, 0]))
    # depressed cubic t^3 + pt + q with lambda = t + c2/3
    sh = c2 / 3.0
    pc = c1 - c2 * sh
    qc = -c0 + c1 * sh - 2.0 * sh * sh * sh
    # roots of t^3 + pc t + qc = 0
    half_q = 0.5 * qc
    third_p = pc / 3.0
    disc = half_q * half_q + third_p * third_p * third_p
    if disc > 0.0:
        # one real root, one complex pair
        s = math.sqrt(disc)
        u = -half_q + s
        v = -half_q - s
        cu = math.copysign(abs(u) ** (1.0 / 3.0), u)
        cv = math.copysign(abs(v) ** (1.0 / 3.0), v)
        t1 = cu + cv
        real_root = t1 + sh
        pair_re = -0.5 * t1 + sh
        pair_im = 0.5 * math.sqrt(3.0) * abs(cu - cv)
        if real_root >= pair_re:
            return real_root, 0.0
        return pair_re, pair_im
    # three real roots
    if pc >= 0.0:
        # triple/degenerate: pc ~ 0 forced by disc <= 0
        return sh, 0.0
    m = 2.0 * math.sqrt(-third_p)
    acos_arg = 3.0 * qc / (pc * m)
    if acos_arg > 1.0:
        acos_arg = 1.0
    if acos_arg < -1.0:
        acos_arg = -1.0
    theta = math.acos(acos_arg) / 3.0
    best = -1.0e300
    for kk in range(3):
        t = m * math.cos(theta - 2.0943951023931953 * kk)
        root = t + sh
        if root > best:
            best = root
    return best, 0.0


@njit(cache=True)
def lambda_at(rhs_id, p, x, dim):
    """Recovery rate (and leading imag part) at a state; NaNs on bad eval."""
    jac = np.zeros((3, 3))
    if not jac_fill(rhs_id, p, x, dim, jac):
        return np.nan, np.nan
    return max_real_eig(jac, dim)


@njit(cache=True)
def euler_path(rhs_id, params, bif_slot, dim, x0, mu0, rate, n_steps, dt,
               noise, phi):
    """Euler / Euler-Maruyama path under a linear parameter ramp.

    noise: (n_steps, 3) pre-drawn increments (already scaled by sigma*sqrt(dt));
    phi is the AR(1) coefficient applied to the running noise state (0 for
    white noise).  Returns (X, MU, status, last_idx): X[(n_steps+1), 3],
    MU likewise; on divergence last_idx is the final valid row.
    """
    p = params.copy()
    n = n_steps
    xs = np.zeros((n + 1, 3))
    mus = np.empty(n + 1)
    x = np.empty(3)
    eta = np.zeros(3)
    f = np.empty(3)
    for j in range(3):
        x[j] = x0[j]
        xs[0, j] = x0[j]
    mu = mu0
    mus[0] = mu0
    for i in range(n):
        p[bif_slot] = mu
        if not rhs_fill(rhs_id, p, x, f):
            return xs, mus, BAD_EVAL, i
        bad = False
        for j in range(dim):
            eta[j] = phi * eta[j] + noise[i, j]
            x[j] = x[j] + dt * f[j] + eta[j]
            if not math.isfinite(x[j]) or abs(x[j]) > OVERFLOW_GUARD:
                bad = True
        mu = mu + dt * rate
        for j in range(3):
            xs[i + 1, j] = x[j]
        mus[i + 1] = mu
        if bad:
            return xs, mus, DIVERGED, i
    return xs, mus, OK, n


@njit(cache=True)
def converge(rhs_id, params, bif_slot, dim, x0, mu, n_steps, dt, tol):
    """Run to equilibrium at fixed mu; last-10-states spread must beat tol.

    Returns (x_final, ok).
    """
    p = params.copy()
    p[bif_slot] = mu
    x = np.empty(3)
    f = np.empty(3)
    for j in range(3):
        x[j] = x0[j]
    ring = np.zeros((10, 3))
    for i in range(n_steps):
        if not rhs_fill(rhs_id, p, x, f):
            return x, False
        for j in range(dim):
            x[j] = x[j] + dt * f[j]
            if not math.isfinite(x[j]) or abs(x[j]) > OVERFLOW_GUARD:
                return x, False
        if i >= n_steps - 10:
            for j in range(3):
                ring[i - (n_steps - 10), j] = x[j]
    spread = 0.0
    for a in range(10):
        for b in range(a + 1, 10):
            for j in range(dim):
                d = abs(ring[a, j] - ring[b, j])
                if d > spread:
                    spread = d
    return x, spread < tol


@njit(cache=True)
def newton_correct(rhs_id, params, bif_slot, dim, x_guess, mu, tol, max_iter):
    """Newton solve of f(x, mu) = 0 from x_guess; returns (x, ok)."""
    p = params.copy()
    p[bif_slot] = mu
    x = np.empty(3)
    f = np.empty(3)
    jac = np.zeros((3, 3))
    for j in range(3):
        x[j] = x_guess[j]
    for _ in range(max_iter):
        if not rhs_fill(rhs_id, p, x, f):
            return x, False
        nrm = 0.0
        for j in range(dim):
            if abs(f[j]) > nrm:
                nrm = abs(f[j])
        if nrm < tol:
            return x, True
        if not jac_fill(rhs_id, p, x, dim, jac):
            return x, False
        # solve jac[0:dim,0:dim] dx = -f by Gaussian elimination w/ pivoting
        a = np.empty((3, 4))
        for i in range(dim):
            for j in range(dim):
                a[i, j] = jac[i, j]
            a[i, dim] = -f[i]
        for col in range(dim):
            piv = col
            big = abs(a[col, col])
            for r in range(col + 1, dim):
                if abs(a[r, col]) > big:
                    big = abs(a[r, col])
                    piv = r
            if big < 1.0e-300:
                return x, False
            if piv != col:
                for c in range(dim + 1):
                    tmp = a[col, c]
                    a[col, c] = a[piv, c]
                    a[piv, c] = tmp
            for r in range(col + 1, dim):
                fac = a[r, col] / a[col, col]
                for c in range(col, dim + 1):
                    a[r, c] -= fac * a[col, c]
        dx = np.zeros(3)
        for i in range(dim - 1, -1, -1):
            s = a[i, dim]
            for j in range(i + 1, dim):
                s -= a[i, j] * dx[j]
            dx[i] = s / a[i, i]
        step = 0.0
        for j in range(dim):
            x[j] = x[j] + dx[j]
            if not math.isfinite(x[j]):
                return x, False
            if abs(dx[j]) > step:
                step = abs(dx[j])
        if step > 1.0e6:
            return x, False
    # converged iff the residual finally meets tol
    if not rhs_fill(rhs_id, p, x, f):
        return x, False
    nrm = 0.0
    for j in range(dim):
        if abs(f[j]) > nrm:
            nrm = abs(f[j])
    return x, nrm < tol


@njit(cache=True)
def sweep_branch(rhs_id, params, bif_slot, dim, x_seed, mu0, mu_end, d_mu,
                 newton_tol, max_newton, lambda_stop, refine_grid,
                 fail_window):
    """Parameter-stepping continuation with Newton correction.

    Walks mu from mu0 toward mu_end in steps of d_mu (signed), correcting the
    equilibrium at each step and recording the recovery rate.  Around the
    first sign change the branch is refined by bisection down to refine_grid.
    After a crossing, continuation proceeds up to fail_window extra steps to
    distinguish branch death from branch survival.

    Returns (mu_arr, x_arr, lam_arr, im_arr, n_pts, status, steps_after)
    status: 0 ok/end reached, 1 newton failed mid-branch, 2 seed failure,
            3 lambda_stop reached after crossing.
    steps_after: accepted continuation steps after the first crossing
    (capped at fail_window; -1 if no crossing).
    """
    max_pts = int(abs((mu_end - mu0) / d_mu)) + fail_window + 64
    mu_arr = np.empty(max_pts)
    x_arr = np.empty((max_pts, 3))
    lam_arr = np.empty(max_pts)
    im_arr = np.empty(max_pts)

    x, ok = newton_correct(rhs_id, params, bif_slot, dim, x_seed, mu0,
                           newton_tol, max_newton)
    if not ok:
        return mu_arr, x_arr, lam_arr, im_arr, 0, 2, -1
    p = params.copy()
    p[bif_slot] = mu0
    lam, im = lambda_at(rhs_id, p, x, dim)
    if not math.isfinite(lam):
        return mu_arr, x_arr, lam_arr, im_arr, 0, 2, -1
    mu_arr[0] = mu0
    for j in range(3):
        x_arr[0, j] = x[j]
    lam_arr[0] = lam
    im_arr[0] = im
    n = 1

    direction = 1.0 if d_mu > 0 else -1.0
    mu = mu0
    crossed = False
    steps_after = -1
    status = 0
    refined = False
    disp_prev = -1.0
    while n < max_pts:
        remaining = (mu_end - mu) * direction
        if remaining <= 0.0:
            break
        step = d_mu
        if abs(step) > remaining:
            step = remaining * direction
        mu_next = mu + step
        x_new, ok = newton_correct(rhs_id, params, bif_slot, dim, x, mu_next,
                                   newton_tol, max_newton)
        if not ok:
            status = 1
            break
        # branch-jump guard: Newton converging to a different equilibrium
        # (bistable systems past a fold) shows up as a displacement far
        # beyond the branch's recent continuation steps
        disp = 0.0
        scale = 0.0
        for j in range(dim):
            d2 = abs(x_new[j] - x[j])
            if d2 > disp:
                disp = d2
            if abs(x[j]) > scale:
                scale = abs(x[j])
        if disp_prev >= 0.0 and disp > 10.0 * disp_prev + 1e-8 * (1.0 + scale):
            status = 1
            break
        disp_prev = disp
        p[bif_slot] = mu_next
        lam_new, im_new = lambda_at(rhs_id, p, x_new, dim)
        if not math.isfinite(lam_new):
            status = 1
            break
        if (not crossed) and (not refined) and lam_arr[n - 1] <= 0.0 < lam_new:
            # bisection refinement of the bracketing interval
            lo_mu = mu
            lo_x = x.copy()
            hi_mu = mu_next
            while abs(hi_mu - lo_mu) > refine_grid:
                mid = 0.5 * (lo_mu + hi_mu)
                x_mid, okm = newton_correct(rhs_id, params, bif_slot, dim,
                                            lo_x, mid, newton_tol, max_newton)
                if not okm:
                    break
                p[bif_slot] = mid
                lam_mid, im_mid = lambda_at(rhs_id, p, x_mid, dim)
                if not math.isfinite(lam_mid):
                    break
                if lam_mid <= 0.0:
                    lo_mu = mid
                    lo_x = x_mid
                    if n < max_pts:
                        mu_arr[n] = mid
                        for j in range(3):
                            x_arr[n, j] = x_mid[j]
                        lam_arr[n] = lam_mid
                        im_arr[n] = im_mid
                        n += 1
                else:
                    hi_mu = mid
            refined = True
        mu = mu_next
        x = x_new
        mu_arr[n] = mu
        for j in range(3):
            x_arr[n, j] = x[j]
        lam_arr[n] = lam_new
        im_arr[n] = im_new
        n += 1
        if crossed:
            if steps_after < fail_window:
                steps_after += 1
            if steps_after >= fail_window and lam_new > lambda_stop:
                status = 3
                break
        elif lam_new > 0.0 and lam_arr[n - 2] <= 0.0:
            crossed = True
            steps_after = 0
    return mu_arr, x_arr, lam_arr, im_arr, n, status, steps_after


@njit(cache=True)
def lambda_series(rhs_id, params, bif_slot, dim, xs, mus, idx):
    """Recovery rate evaluated at trajectory rows idx; NaN on bad evals."""
    p = params.copy()
    out = np.empty(idx.shape[0])
    im = np.empty(idx.shape[0])
    jac = np.zeros((3, 3))
    x = np.empty(3)
    for k in range(idx.shape[0]):
        i = idx[k]
        p[bif_slot] = mus[i]
        for j in range(3):
            x[j] = xs[i, j]
        if not jac_fill(rhs_id, p, x, dim, jac):
            out[k] = np.nan
            im[k] = np.nan
        else:
            lam, lim = max_real_eig(jac, dim)
            out[k] = lam
            im[k] = lim
    return out, im
