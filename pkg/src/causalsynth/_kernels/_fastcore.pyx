# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels.

Bit-identical counterpart of the NumPy reference implementation in
``causalsynth._kernels.reference``.  The RNG constants are duplicated
here and must stay in sync with ``causalsynth.rng``; the kernel
equivalence tests enforce that.
"""

import numpy as np

ctypedef unsigned long long u64

cdef u64 MASK64 = 0xFFFFFFFFFFFFFFFFULL
cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 MIX_MULT_A = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX_MULT_B = 0x94D049BB133111EBULL
cdef u64 FOLD_MULT = 0xA24BAED4963EE407ULL
cdef u64 ROOT_KEY = 0x243F6A8885A308D3ULL
cdef u64 DOMAIN_NOISE = 1ULL

cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline u64 mix64(u64 z) nogil:
    z ^= z >> 30
    z *= MIX_MULT_A
    z ^= z >> 27
    z *= MIX_MULT_B
    z ^= z >> 31
    return z


cdef inline u64 fold(u64 key, u64 word) nogil:
    return mix64(key ^ (word * FOLD_MULT))


def noise_block(object seed, object first, int count, int nvars):
    """Noise matrix for skeletons ``first .. first+count-1``."""
    cdef u64 dk = fold(fold(ROOT_KEY, <u64> (int(seed) & 0xFFFFFFFFFFFFFFFF)),
                       DOMAIN_NOISE)
    cdef u64 first_u = <u64> (int(first) & 0xFFFFFFFFFFFFFFFF)
    out = np.empty((count, nvars), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef u64 key
    cdef int j, i
    with nogil:
        for j in range(count):
            key = fold(dk, first_u + <u64> j)
            for i in range(nvars):
                view[j, i] = (mix64(key + (<u64> (i + 1)) * GOLDEN) >> 11) * INV_2_53
    return out


def ancestral_codes(order, par_flat, par_off, stride_flat, cum_flat, cum_off,
                    cards, u):
    """Evaluate all mechanisms over a noise matrix (m, nvars)."""
    cdef const int[::1] order_v = np.ascontiguousarray(order, dtype=np.int32)
    cdef const int[::1] par_v = np.ascontiguousarray(par_flat, dtype=np.int32)
    cdef const long long[::1] poff_v = np.ascontiguousarray(par_off, dtype=np.int64)
    cdef const long long[::1] stride_v = np.ascontiguousarray(stride_flat, dtype=np.int64)
    cdef const double[::1] cum_v = np.ascontiguousarray(cum_flat, dtype=np.float64)
    cdef const long long[::1] coff_v = np.ascontiguousarray(cum_off, dtype=np.int64)
    cdef const int[::1] cards_v = np.ascontiguousarray(cards, dtype=np.int32)
    cdef const double[:, ::1] u_v = np.ascontiguousarray(u, dtype=np.float64)

    cdef Py_ssize_t m = u_v.shape[0]
    cdef int n = <int> u_v.shape[1]
    out = np.zeros((m, n), dtype=np.int64)
    cdef long long[:, ::1] codes = out

    cdef Py_ssize_t j
    cdef int t, i, card, c
    cdef long long row, base, a
    cdef double uu
    with nogil:
        for j in range(m):
            for t in range(n):
                i = order_v[t]
                row = 0
                for a in range(poff_v[i], poff_v[i + 1]):
                    row += codes[j, par_v[a]] * stride_v[a]
                card = cards_v[i]
                base = coff_v[i] + row * card
                uu = u_v[j, i]
                c = 0
                while c < card and cum_v[base + c] <= uu:
                    c += 1
                codes[j, i] = c
    return out
