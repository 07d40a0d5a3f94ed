"""Hot loops for the QUBO samplers, numba and numpy variants.

Both variants consume the same counter-based random stream (splitmix64 keyed
by seed, read and sweep), so they return identical bitstrings; the numpy
path vectorises over reads instead of looping.

QUBO matrices arrive upper triangular. ``S = Q + Q^T`` with a zero diagonal
holds the couplings seen by a single bit, ``d = diag(Q)`` the linear terms.
"""
import numpy as np

from .._accel import USE_NUMBA, njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_SWEEP_SALT = np.uint64(0x632BE59BD9B4E019)
_INIT_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S63 = np.uint64(63)
_INV53 = 1.0 / 9007199254740992.0

RECOMPUTE_EVERY = 4096


@njit(inline="always")
def _mix(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def _mix_np(x):
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> _S30)) * _MUL1
        z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def couplings(coeffs):
    s = coeffs + coeffs.T
    np.fill_diagonal(s, 0.0)
    return s, np.diag(coeffs).copy()


# --- simulated annealing ---------------------------------------------------

@njit
def _anneal_numba(S, d, betas, seed, read_start, nreads):
    n = d.shape[0]
    out = np.zeros((nreads, n), dtype=np.int8)
    perm = np.empty(n, dtype=np.int64)
    q = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)
    for r in range(nreads):
        key = _mix(seed ^ _mix(np.uint64(read_start + r)))
        st = _mix(key ^ _INIT_SALT)
        for i in range(n):
            st = _mix(st)
            q[i] = np.int8(st >> _S63)
        for i in range(n):
            h[i] = 0.0
        for i in range(n):
            if q[i] == 1:
                for j in range(n):
                    h[j] += S[j, i]
        for s in range(betas.shape[0]):
            beta = betas[s]
            st = _mix(key ^ _mix(np.uint64(s + 1) * _SWEEP_SALT))
            for i in range(n):
                perm[i] = i
            for i in range(n - 1, 0, -1):
                st = _mix(st)
                j = np.int64(st % np.uint64(i + 1))
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
            for k in range(n):
                i = perm[k]
                st = _mix(st)
                u = np.float64(st >> _S11) * _INV53
                de = d[i] + h[i]
                if q[i] == 1:
                    de = -de
                if de <= 0.0 or u < np.exp(-beta * de):
                    if q[i] == 0:
                        q[i] = 1
                        for j in range(n):
                            h[j] += S[j, i]
                    else:
                        q[i] = 0
                        for j in range(n):
                            h[j] -= S[j, i]
        out[r, :] = q
    return out


def _anneal_numpy(S, d, betas, seed, read_start, nreads):
    n = d.shape[0]
    rows = np.arange(nreads)
    reads = np.arange(read_start, read_start + nreads, dtype=np.uint64)
    key = _mix_np(np.uint64(seed) ^ _mix_np(reads))
    st = _mix_np(key ^ _INIT_SALT)
    q = np.zeros((nreads, n), dtype=np.int8)
    for i in range(n):
        st = _mix_np(st)
        q[:, i] = (st >> _S63).astype(np.int8)
    # same accumulation order as the compiled loop
    h = np.zeros((nreads, n))
    for i in range(n):
        on = q[:, i] == 1
        h[on] += S[:, i]
    perm = np.empty((nreads, n), dtype=np.int64)
    for s in range(len(betas)):
        beta = betas[s]
        st = _mix_np(key ^ _mix_np(np.array([s + 1], dtype=np.uint64) * _SWEEP_SALT))
        perm[:] = np.arange(n)
        for i in range(n - 1, 0, -1):
            st = _mix_np(st)
            j = (st % np.uint64(i + 1)).astype(np.int64)
            pi = perm[:, i].copy()
            perm[:, i] = perm[rows, j]
            perm[rows, j] = pi
        for k in range(n):
            idx = perm[:, k]
            st = _mix_np(st)
            u = (st >> _S11).astype(np.float64) * _INV53
            de = d[idx] + h[rows, idx]
            on = q[rows, idx] == 1
            de = np.where(on, -de, de)
            with np.errstate(over="ignore"):
                acc = (de <= 0.0) | (u < np.exp(-beta * de))
            if not acc.any():
                continue
            r_acc = rows[acc]
            i_acc = idx[acc]
            up = ~on[acc]
            q[r_acc, i_acc] = up.astype(np.int8)
            sign = np.where(up, 1.0, -1.0)
            h[r_acc] += sign[:, None] * S[i_acc]
    return q


def anneal(coeffs, betas, seed, read_start, nreads):
    """Run ``nreads`` Metropolis anneals; returns an int8 array of bitstrings."""
    S, d = couplings(np.asarray(coeffs, dtype=np.float64))
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    if USE_NUMBA:
        return _anneal_numba(S, d, betas, seed, int(read_start), int(nreads))
    return _anneal_numpy(S, d, betas, seed, int(read_start), int(nreads))


# --- exhaustive enumeration ------------------------------------------------

@njit
def _exhaustive_numba(coeffs, S, d, tol):
    # States are visited in lexicographic order with bit 0 most significant,
    # so keeping only strict improvements yields the smallest tied string.
    n = d.shape[0]
    q = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)
    e = 0.0
    best = 0.0
    best_q = q.copy()
    total = np.int64(1) << n
    for k in range(1, total):
        i = n - 1
        while q[i] == 1:
            q[i] = 0
            e -= d[i] + h[i]
            for j in range(n):
                h[j] -= S[j, i]
            i -= 1
        q[i] = 1
        e += d[i] + h[i]
        for j in range(n):
            h[j] += S[j, i]
        if k % RECOMPUTE_EVERY == 0:
            e = 0.0
            for a in range(n):
                h[a] = 0.0
            for a in range(n):
                if q[a] == 1:
                    e += coeffs[a, a]
                    for b in range(n):
                        h[b] += S[b, a]
                    for b in range(a + 1, n):
                        if q[b] == 1:
                            e += coeffs[a, b]
        if e < best - tol:
            best = e
            best_q[:] = q
    return best_q


def _exhaustive_numpy(coeffs, S, d, tol, chunk_bits=14):
    n = d.shape[0]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best = 0.0
    best_k = 0
    chunk = 1 << min(chunk_bits, n)
    for start in range(0, 1 << n, chunk):
        ks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = ((ks[:, None] >> shifts[None, :]) & 1).astype(np.float64)
        e = np.einsum("ki,ij,kj->k", bits, coeffs, bits)
        for pos in np.flatnonzero(e < best - tol):
            if e[pos] < best - tol:
                best = e[pos]
                best_k = int(ks[pos])
    return ((best_k >> shifts) & 1).astype(np.int8)


def exhaustive_argmin(coeffs):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    S, d = couplings(coeffs)
    tol = 1e-12 * max(float(np.sum(np.abs(coeffs))), 1e-300)
    if coeffs.shape[0] == 0:
        return np.zeros(0, dtype=np.int8)
    if USE_NUMBA:
        return _exhaustive_numba(coeffs, S, d, tol)
    return _exhaustive_numpy(coeffs, S, d, tol)
