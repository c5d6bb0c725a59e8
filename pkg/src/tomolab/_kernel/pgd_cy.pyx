# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernel for the constrained-likelihood solver.

Twin of `tomolab._kernel.pgd_py` with the same interface; see that module for
the algorithmic contracts. Probabilities and gradients run through BLAS zgemv,
the PSD-simplex projection through LAPACK zheevd. Hermitian d x d buffers are
stored C-order and handed to LAPACK as their Fortran view (the conjugate);
the projection commutes with conjugation, so reading the Fortran-order result
back as C-order undoes it.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log1p, sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zdotc, zgemm, zgemv
from scipy.linalg.cython_lapack cimport zheevd

cnp.import_array()

OBJECTIVE_MLE = 0
OBJECTIVE_LSQ = 1

cdef double complex Z_ONE = 1.0
cdef double complex Z_ZERO = 0.0
cdef int I_ONE = 1


cdef void _probs_c(double complex* m, double complex* xvec, double complex* tmp_n,
                   double* p, int n, int dd) noexcept:
    # p = Re(m_c @ xvec); m_c is C-order (n, dd) = Fortran (dd, n) transposed.
    cdef char* trans = b'T'
    cdef int j
    zgemv(trans, &dd, &n, &Z_ONE, m, &dd, xvec, &I_ONE, &Z_ZERO, tmp_n, &I_ONE)
    for j in range(n):
        p[j] = tmp_n[j].real


cdef double _objective_c(double* p, double* nu, unsigned char* pos, int n,
                         int objective, double floor) noexcept:
    cdef double acc = 0.0
    cdef double pc, r
    cdef int j
    if objective == 0:
        for j in range(n):
            pc = p[j] if p[j] > floor else floor
            if pos[j]:
                acc += nu[j] * log1p((nu[j] - pc) / pc) - nu[j] + pc
            else:
                acc += pc
        return acc
    for j in range(n):
        r = nu[j] - p[j]
        acc += r * r
    return acc


cdef void _grad_c(double complex* mh, double* p, double* nu, unsigned char* pos,
                  double complex* wbuf, double complex* gout, int n, int dd, int d,
                  int objective, double floor) noexcept:
    cdef char* trans = b'T'
    cdef int j, a, b
    cdef double pc
    cdef double complex t1, t2
    if objective == 0:
        for j in range(n):
            if pos[j]:
                pc = p[j] if p[j] > floor else floor
                wbuf[j] = -nu[j] / pc
            else:
                wbuf[j] = 0.0
    else:
        for j in range(n):
            wbuf[j] = 2.0 * (p[j] - nu[j])
    # gvec = mh_c @ w; mh_c is C-order (dd, n) = Fortran (n, dd) transposed.
    zgemv(trans, &n, &dd, &Z_ONE, mh, &n, wbuf, &I_ONE, &Z_ZERO, gout, &I_ONE)
    for a in range(d):
        gout[a * d + a] = gout[a * d + a].real
        for b in range(a + 1, d):
            t1 = gout[a * d + b]
            t2 = gout[b * d + a]
            gout[a * d + b] = 0.5 * (t1 + t2.conjugate())
            gout[b * d + a] = gout[a * d + b].conjugate()


cdef int _project_c(double complex* xm, int d, double* ew, double complex* evwork,
                    double complex* vs, double complex* zwork, int lzwork,
                    double* rwork, int lrwork, int* iwork, int liwork) noexcept:
    """In-place PSD-simplex projection of a Hermitian C-order d x d buffer."""
    cdef char* jobz = b'V'
    cdef char* uplo = b'L'
    cdef int info = 0
    cdef int k, a, ksel = 0
    cdef double css = 0.0, csel = 0.0, theta, lam
    memcpy(evwork, xm, d * d * sizeof(double complex))
    zheevd(jobz, uplo, &d, evwork, &d, ew, zwork, &lzwork, rwork, &lrwork,
           iwork, &liwork, &info)
    if info != 0:
        return info
    for k in range(1, d + 1):
        css += ew[d - k]
        if ew[d - k] - (css - 1.0) / k > 0.0:
            ksel = k
            csel = css
    theta = (csel - 1.0) / ksel
    for k in range(d):
        lam = ew[k] - theta
        if lam < 0.0:
            lam = 0.0
        for a in range(d):
            vs[a + k * d] = evwork[a + k * d] * lam
    cdef char* noop = b'N'
    cdef char* conjt = b'C'
    zgemm(noop, conjt, &d, &d, &d, &Z_ONE, vs, &d, evwork, &d, &Z_ZERO, xm, &d)
    return 0


cdef double _re_vdot(double complex* a, double complex* b, int n) noexcept:
    cdef double complex v = zdotc(&n, a, &I_ONE, b, &I_ONE)
    return v.real


cdef double _diff_norm(double complex* a, double complex* b, int n) noexcept:
    cdef double acc = 0.0
    cdef double re, im
    cdef int j
    for j in range(n):
        re = a[j].real - b[j].real
        im = a[j].imag - b[j].imag
        acc += re * re + im * im
    return sqrt(acc)


cdef class _Workspace:
    cdef int d, dd, n, lzwork, lrwork, liwork
    cdef cnp.ndarray ew, evwork, vs, zwork, rwork, iwork, tmp_n, wbuf

    def __cinit__(self, int d, int n):
        cdef int info = 0
        cdef double complex zq
        cdef double rq
        cdef int iq
        cdef char* jobz = b'V'
        cdef char* uplo = b'L'
        cdef int lwork_q = -1
        cdef double complex dummy
        cdef double ewq
        self.d = d
        self.dd = d * d
        self.n = n
        zheevd(jobz, uplo, &d, &dummy, &d, &ewq, &zq, &lwork_q, &rq, &lwork_q,
               &iq, &lwork_q, &info)
        self.lzwork = <int> zq.real
        self.lrwork = <int> rq
        self.liwork = iq
        self.ew = np.empty(d, dtype=np.float64)
        self.evwork = np.empty(self.dd, dtype=np.complex128)
        self.vs = np.empty(self.dd, dtype=np.complex128)
        self.zwork = np.empty(self.lzwork, dtype=np.complex128)
        self.rwork = np.empty(self.lrwork, dtype=np.float64)
        self.iwork = np.empty(self.liwork, dtype=np.intc)
        self.tmp_n = np.empty(max(n, 1), dtype=np.complex128)
        self.wbuf = np.empty(max(n, 1), dtype=np.complex128)

    cdef int project(self, double complex* xm) noexcept:
        return _project_c(xm, self.d, <double*> cnp.PyArray_DATA(self.ew),
                          <double complex*> cnp.PyArray_DATA(self.evwork),
                          <double complex*> cnp.PyArray_DATA(self.vs),
                          <double complex*> cnp.PyArray_DATA(self.zwork), self.lzwork,
                          <double*> cnp.PyArray_DATA(self.rwork), self.lrwork,
                          <int*> cnp.PyArray_DATA(self.iwork), self.liwork)


def probabilities(m, x):
    m = np.ascontiguousarray(m, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mm = m
    cdef cnp.ndarray[cnp.complex128_t] xv = x.ravel()
    cdef int n = mm.shape[0]
    cdef int dd = mm.shape[1]
    p = np.empty(n, dtype=np.float64)
    tmp = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t] pv = p
    cdef cnp.ndarray[cnp.complex128_t] tv = tmp
    _probs_c(&mm[0, 0], &xv[0], &tv[0], &pv[0], n, dd)
    return p


def objective_from_probs(p, nu_eff, objective, floor):
    p = np.ascontiguousarray(p, dtype=np.float64)
    nu_eff = np.ascontiguousarray(nu_eff, dtype=np.float64)
    pos = np.ascontiguousarray(nu_eff > 0.0, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t] pv = p
    cdef cnp.ndarray[cnp.float64_t] nv = nu_eff
    cdef cnp.ndarray[cnp.uint8_t] qv = pos
    return _objective_c(&pv[0], &nv[0], &qv[0], pv.shape[0], objective, floor)


def gradient_from_probs(mh, p, nu_eff, objective, floor, dim):
    mh = np.ascontiguousarray(mh, dtype=np.complex128)
    p = np.ascontiguousarray(p, dtype=np.float64)
    nu_eff = np.ascontiguousarray(nu_eff, dtype=np.float64)
    pos = np.ascontiguousarray(nu_eff > 0.0, dtype=np.uint8)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mhv = mh
    cdef cnp.ndarray[cnp.float64_t] pv = p
    cdef cnp.ndarray[cnp.float64_t] nv = nu_eff
    cdef cnp.ndarray[cnp.uint8_t] qv = pos
    cdef int n = mhv.shape[1]
    cdef int dd = mhv.shape[0]
    cdef int d = dim
    g = np.empty((d, d), dtype=np.complex128)
    wbuf = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] gv = g
    cdef cnp.ndarray[cnp.complex128_t] wv = wbuf
    _grad_c(&mhv[0, 0], &pv[0], &nv[0], &qv[0], &wv[0], &gv[0, 0], n, dd, d,
            objective, floor)
    return g


def project_psd_simplex(mat):
    out = np.array(mat, dtype=np.complex128, order="C")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] ov = out
    cdef int d = ov.shape[0]
    ws = _Workspace(d, 1)
    if (<_Workspace> ws).project(&ov[0, 0]) != 0:
        raise np.linalg.LinAlgError("eigendecomposition failed")
    return out


def factored_value_grad(m, mh, nu_eff, a, objective, floor, dim):
    """Objective, gradient, and state for the factored point rho = A A^H / Tr."""
    m = np.ascontiguousarray(m, dtype=np.complex128)
    mh = np.ascontiguousarray(mh, dtype=np.complex128)
    nu_arr = np.ascontiguousarray(nu_eff, dtype=np.float64)
    pos = np.ascontiguousarray(nu_arr > 0.0, dtype=np.uint8)
    a_arr = np.ascontiguousarray(a, dtype=np.complex128)

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mv = m
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mhv = mh
    cdef cnp.ndarray[cnp.float64_t] nv = nu_arr
    cdef cnp.ndarray[cnp.uint8_t] qv = pos
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] av = a_arr

    cdef int n = mv.shape[0]
    cdef int d = dim
    cdef int dd = d * d
    cdef int r = av.shape[1]
    cdef int obj = objective
    cdef double flr = floor

    rho = np.empty((d, d), dtype=np.complex128)
    ga = np.empty((d, r), dtype=np.complex128)
    p = np.empty(n, dtype=np.float64)
    tmp = np.empty(n, dtype=np.complex128)
    wbuf = np.empty(n, dtype=np.complex128)
    g = np.empty((d, d), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] rv = rho
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] gav = ga
    cdef cnp.ndarray[cnp.float64_t] pv = p
    cdef cnp.ndarray[cnp.complex128_t] tv = tmp
    cdef cnp.ndarray[cnp.complex128_t] wv = wbuf
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] gv = g

    cdef int i, j, k
    cdef double complex acc
    cdef double tr = 0.0
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(r):
                acc += av[i, k] * av[j, k].conjugate()
            rv[i, j] = acc
        tr += rv[i, i].real
    for i in range(d):
        for j in range(d):
            rv[i, j] = rv[i, j] / tr

    _probs_c(&mv[0, 0], &rv[0, 0], &tv[0], &pv[0], n, dd)
    cdef double val = _objective_c(&pv[0], &nv[0], &qv[0], n, obj, flr)
    _grad_c(&mhv[0, 0], &pv[0], &nv[0], &qv[0], &wv[0], &gv[0, 0], n, dd, d, obj, flr)

    cdef double inner = 0.0
    for i in range(d):
        for j in range(d):
            inner += (gv[i, j].conjugate() * rv[i, j]).real
    for i in range(d):
        for k in range(r):
            acc = 0.0
            for j in range(d):
                acc += gv[i, j] * av[j, k]
            gav[i, k] = 2.0 * (acc - inner * av[i, k]) / tr
    return val, ga, rho


def mfista_chunk(m, mh, nu_eff, dim, objective, floor, tol, budget, x, fx, y, t, lip):
    """Run up to `budget` monotone-FISTA iterations; resumable.

    Same contract as the numpy twin: returns
    (x, fx, y, t, lip, iterations, residual, converged).
    """
    m = np.ascontiguousarray(m, dtype=np.complex128)
    mh = np.ascontiguousarray(mh, dtype=np.complex128)
    nu_arr = np.ascontiguousarray(nu_eff, dtype=np.float64)
    pos = np.ascontiguousarray(nu_arr > 0.0, dtype=np.uint8)
    x_arr = np.array(x, dtype=np.complex128, order="C")
    y_arr = np.array(y, dtype=np.complex128, order="C")

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mv = m
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] mhv = mh
    cdef cnp.ndarray[cnp.float64_t] nv = nu_arr
    cdef cnp.ndarray[cnp.uint8_t] qv = pos
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] xv = x_arr
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] yv = y_arr

    cdef int n = mv.shape[0]
    cdef int d = dim
    cdef int dd = d * d
    cdef int obj = objective
    cdef double flr = floor
    cdef double tol_c = tol
    cdef int budget_c = budget
    cdef double fx_c = fx
    cdef double t_c = t
    cdef double lip_c = lip

    ws = _Workspace(d, n)
    cdef _Workspace w = <_Workspace> ws

    g_a = np.empty(dd, dtype=np.complex128)
    gy_a = np.empty(dd, dtype=np.complex128)
    pg_a = np.empty(dd, dtype=np.complex128)
    z_a = np.empty(dd, dtype=np.complex128)
    dz_a = np.empty(dd, dtype=np.complex128)
    ynew_a = np.empty(dd, dtype=np.complex128)
    zy_a = np.empty(dd, dtype=np.complex128)
    zx_a = np.empty(dd, dtype=np.complex128)
    px_a = np.empty(n, dtype=np.float64)
    py_a = np.empty(n, dtype=np.float64)
    pz_a = np.empty(n, dtype=np.float64)

    cdef double complex* mp = &mv[0, 0]
    cdef double complex* mhp = &mhv[0, 0]
    cdef double* nup = &nv[0]
    cdef unsigned char* posp = &qv[0]
    cdef double complex* xp = &xv[0, 0]
    cdef double complex* yp = &yv[0, 0]
    cdef double complex* gp = <double complex*> cnp.PyArray_DATA(g_a)
    cdef double complex* gyp = <double complex*> cnp.PyArray_DATA(gy_a)
    cdef double complex* pgp = <double complex*> cnp.PyArray_DATA(pg_a)
    cdef double complex* zp = <double complex*> cnp.PyArray_DATA(z_a)
    cdef double complex* dzp = <double complex*> cnp.PyArray_DATA(dz_a)
    cdef double complex* ynewp = <double complex*> cnp.PyArray_DATA(ynew_a)
    cdef double complex* zyp = <double complex*> cnp.PyArray_DATA(zy_a)
    cdef double complex* zxp = <double complex*> cnp.PyArray_DATA(zx_a)
    cdef double complex* tmpp = <double complex*> cnp.PyArray_DATA(w.tmp_n)
    cdef double complex* wbufp = <double complex*> cnp.PyArray_DATA(w.wbuf)
    cdef double* pxp = <double*> cnp.PyArray_DATA(px_a)
    cdef double* pyp = <double*> cnp.PyArray_DATA(py_a)
    cdef double* pzp = <double*> cnp.PyArray_DATA(pz_a)

    cdef int it = 0
    cdef int j, info
    cdef double res = np.inf
    cdef int converged = 0
    cdef double fy, fz, bound, t_new, dznorm2, descent, restart
    cdef double ratio_a, ratio_b

    _probs_c(mp, xp, tmpp, pxp, n, dd)

    while it < budget_c:
        it += 1
        _grad_c(mhp, pxp, nup, posp, wbufp, gp, n, dd, d, obj, flr)
        for j in range(dd):
            pgp[j] = xp[j] - gp[j]
        info = w.project(pgp)
        if info != 0:
            raise np.linalg.LinAlgError("eigendecomposition failed")
        res = _diff_norm(pgp, xp, dd)
        if res < tol_c:
            converged = 1
            break
        _probs_c(mp, yp, tmpp, pyp, n, dd)
        _grad_c(mhp, pyp, nup, posp, wbufp, gyp, n, dd, d, obj, flr)
        fy = _objective_c(pyp, nup, posp, n, obj, flr)
        while True:
            for j in range(dd):
                zp[j] = yp[j] - gyp[j] / lip_c
            info = w.project(zp)
            if info != 0:
                raise np.linalg.LinAlgError("eigendecomposition failed")
            for j in range(dd):
                dzp[j] = zp[j] - yp[j]
            _probs_c(mp, zp, tmpp, pzp, n, dd)
            fz = _objective_c(pzp, nup, posp, n, obj, flr)
            dznorm2 = _diff_norm(zp, yp, dd)
            descent = _re_vdot(gyp, dzp, dd)
            bound = fy + descent + 0.5 * lip_c * dznorm2 * dznorm2
            if fz <= bound + 1e-18 or lip_c > 1e20:
                break
            lip_c *= 2.0
        t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_c * t_c))
        ratio_a = t_c / t_new
        ratio_b = (t_c - 1.0) / t_new
        for j in range(dd):
            zyp[j] = zp[j] - yp[j]
            zxp[j] = zp[j] - xp[j]
        restart = _re_vdot(zyp, zxp, dd)
        if fz <= fx_c:
            # accept z; y_new built from (x_old, x_new = z)
            for j in range(dd):
                ynewp[j] = zp[j] + ratio_b * (zp[j] - xp[j])
            memcpy(xp, zp, dd * sizeof(double complex))
            memcpy(pxp, pzp, n * sizeof(double))
            fx_c = fz
        else:
            # keep x; momentum still uses z
            for j in range(dd):
                ynewp[j] = xp[j] + ratio_a * (zp[j] - xp[j])
        if restart > 0.0:
            memcpy(ynewp, xp, dd * sizeof(double complex))
            t_new = 1.0
        memcpy(yp, ynewp, dd * sizeof(double complex))
        t_c = t_new
        lip_c = lip_c * 0.8
        if lip_c < 1e-12:
            lip_c = 1e-12

    return x_arr, fx_c, y_arr, t_c, lip_c, it, res, bool(converged)
