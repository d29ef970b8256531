# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled similarity kernels.

Fast lane for the trigram hash embedding and the cosine scans. Keeps the
exact accumulation order of `_purekernels` (IEEE doubles, no FMA thanks
to -ffp-contract=off) so both lanes produce bit-identical results.
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64

cdef u64 _FNV_OFFSET = 14695981039346656037ULL
cdef u64 _FNV_PRIME = 1099511628211ULL


cdef u64 _fnv1a64_range(const unsigned char* buf, Py_ssize_t start, Py_ssize_t end) noexcept nogil:
    cdef u64 h = _FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(start, end):
        h = (h ^ <u64> buf[i]) * _FNV_PRIME
    return h


def fnv1a64(data):
    """FNV-1a 64-bit hash of a byte string."""
    cdef bytes raw = bytes(data)
    cdef const unsigned char* buf = raw
    return _fnv1a64_range(buf, 0, len(raw))


def hash_embed(normalized, dim):
    """Trigram-bucket embedding of already-normalized text, L2-normalized.

    See `_purekernels.hash_embed` for the contract; this is the same
    algorithm over the UTF-8 buffer with code-point offsets precomputed.
    """
    cdef str text = normalized
    cdef Py_ssize_t ncp = len(text)
    cdef int d = dim
    if ncp < 3:
        raise ValueError("need at least 3 characters to form a trigram")
    if d <= 0:
        raise ValueError("dim must be positive")
    cdef bytes data = text.encode("utf-8")
    cdef const unsigned char* buf = data
    cdef Py_ssize_t nbytes = len(data)
    cdef Py_ssize_t* offsets = <Py_ssize_t*> malloc((ncp + 1) * sizeof(Py_ssize_t))
    cdef double* buckets = <double*> malloc(d * sizeof(double))
    if offsets == NULL or buckets == NULL:
        free(offsets)
        free(buckets)
        raise MemoryError()
    cdef Py_ssize_t i
    cdef Py_ssize_t k = 0
    cdef u64 h
    cdef double sumsq, norm, value
    try:
        for i in range(nbytes):
            # UTF-8 lead bytes mark code-point starts.
            if (buf[i] & 0xC0) != 0x80:
                offsets[k] = i
                k += 1
        if k != ncp:
            raise ValueError("malformed UTF-8 buffer")
        offsets[ncp] = nbytes
        for i in range(d):
            buckets[i] = 0.0
        for i in range(ncp - 2):
            h = _fnv1a64_range(buf, offsets[i], offsets[i + 3])
            buckets[h % <u64> d] += 1.0
        sumsq = 0.0
        for i in range(d):
            value = buckets[i]
            sumsq += value * value
        norm = sqrt(sumsq)
        out = [0.0] * d
        for i in range(d):
            out[i] = buckets[i] / norm
        return out
    finally:
        free(offsets)
        free(buckets)


cdef double* _as_vector(object seq, Py_ssize_t d) except NULL:
    cdef double* out = <double*> malloc(d * sizeof(double))
    if out == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    try:
        for i in range(d):
            out[i] = seq[i]
    except BaseException:
        free(out)
        raise
    return out


cdef double _dot_c(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(d):
        acc += a[i] * b[i]
    return acc


def dot(u, v):
    """Dot product, accumulated in index order."""
    cdef Py_ssize_t d = len(u)
    if len(v) != d:
        raise ValueError("length mismatch")
    cdef double* a = _as_vector(u, d)
    cdef double* b = NULL
    try:
        b = _as_vector(v, d)
        return _dot_c(a, b, d)
    finally:
        free(a)
        free(b)


def cosine(u, v):
    """Cosine similarity dot(u,v) / (|u|*|v|)."""
    cdef Py_ssize_t d = len(u)
    if len(v) != d:
        raise ValueError("length mismatch")
    cdef double* a = _as_vector(u, d)
    cdef double* b = NULL
    cdef double su, sv, nu, nv
    try:
        b = _as_vector(v, d)
        su = _dot_c(a, a, d)
        if su == 0.0:
            raise ValueError("zero vector: left operand")
        sv = _dot_c(b, b, d)
        if sv == 0.0:
            raise ValueError("zero vector: right operand")
        nu = sqrt(su)
        nv = sqrt(sv)
        return _dot_c(a, b, d) / (nu * nv)
    finally:
        free(a)
        free(b)


cdef double* _as_matrix(object vectors, Py_ssize_t n, Py_ssize_t d) except NULL:
    cdef double* out = <double*> malloc(n * d * sizeof(double))
    if out == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    try:
        for i in range(n):
            row = vectors[i]
            if len(row) != d:
                raise ValueError("length mismatch")
            for j in range(d):
                out[i * d + j] = row[j]
    except BaseException:
        free(out)
        raise
    return out


def score_many(query, vectors):
    """Cosine similarity of a query against each vector, in input order."""
    cdef Py_ssize_t n = len(vectors)
    cdef Py_ssize_t d = len(query)
    cdef double* q = _as_vector(query, d)
    cdef double* mat = NULL
    cdef double sq, sv, nq
    cdef Py_ssize_t i
    scores = []
    try:
        sq = _dot_c(q, q, d)
        if sq == 0.0:
            raise ValueError("zero vector: query")
        nq = sqrt(sq)
        mat = _as_matrix(vectors, n, d)
        for i in range(n):
            sv = _dot_c(mat + i * d, mat + i * d, d)
            if sv == 0.0:
                raise ValueError(f"zero vector: index {i}")
            scores.append(_dot_c(q, mat + i * d, d) / (nq * sqrt(sv)))
        return scores
    finally:
        free(q)
        free(mat)


def pairwise_scan(vectors, threshold):
    """All index pairs (i < j) whose cosine similarity is >= threshold.

    Returned in double-loop order; callers impose their own sort.
    """
    cdef Py_ssize_t n = len(vectors)
    if n == 0:
        return []
    cdef Py_ssize_t d = len(vectors[0])
    cdef double thr = threshold
    cdef double* mat = _as_matrix(vectors, n, d)
    cdef double* norms = <double*> malloc(n * sizeof(double)) if n else NULL
    cdef Py_ssize_t i, j
    cdef double sumsq, score
    hits = []
    try:
        if norms == NULL:
            raise MemoryError()
        for i in range(n):
            sumsq = _dot_c(mat + i * d, mat + i * d, d)
            if sumsq == 0.0:
                raise ValueError(f"zero vector: index {i}")
            norms[i] = sqrt(sumsq)
        for i in range(n - 1):
            for j in range(i + 1, n):
                score = _dot_c(mat + i * d, mat + j * d, d) / (norms[i] * norms[j])
                if score >= thr:
                    hits.append((i, j, score))
        return hits
    finally:
        free(mat)
        free(norms)
