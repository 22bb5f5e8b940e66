"""Dense matrix/vector kernels, activations, and a deterministic PRNG.

No BLAS anywhere: every multiply is a hand-written numba kernel so the
accumulation order stays auditable. Two kernel families exist:

* ``reference``: strict IEEE kernels that sum in ascending inner-index
  order. They define the numeric baseline everything else is checked
  against, and they are single-threaded by contract.
* ``tiled``: cache-tiled over output rows and columns so panels of B stay
  resident, while the inner accumulation remains the exact ascending
  chain of the reference kernel. Agrees with it to 1e-5 (f32) / 1e-12
  (f64) by construction; in fact the chains are identical.
* ``fast``: fastmath kernels that may reassociate the reduction (SIMD
  lanes) and partition output rows over worker threads. Per output
  element the work is done by exactly one thread, so results do not
  depend on the thread count.

Element precision follows the array dtype (float32 or float64); the
accumulator always matches it.
"""

import numpy as np
from numba import njit, prange, get_num_threads, set_num_threads

PRECISIONS = {"f32": np.float32, "f64": np.float64}
KERNELS = ("reference", "tiled", "fast")

DEFAULT_TILE = (64, 64)

# ---------------------------------------------------------------------------
# argument checking


def _check_matrix(a, name="matrix"):
    if not isinstance(a, np.ndarray) or a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d ndarray")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not a.flags.c_contiguous:
        raise ValueError(f"{name} must be C-contiguous (row-major)")


def _check_vector(v, name="vector"):
    if not isinstance(v, np.ndarray) or v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d ndarray")
    if v.shape[0] < 1:
        raise ValueError(f"{name} must not be empty")


# ---------------------------------------------------------------------------
# reference kernels (strict IEEE, ascending inner index, single thread)


@njit(cache=True)
def _gemv_ref(A, x, out):
    m, k = A.shape
    zero = np.zeros(1, A.dtype)[0]
    for i in range(m):
        acc = zero
        for j in range(k):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _gemm_ref(A, B, C):
    m, k = A.shape
    n = B.shape[1]
    zero = np.zeros(1, A.dtype)[0]
    for i in range(m):
        for j in range(n):
            acc = zero
            for p in range(k):
                acc += A[i, p] * B[p, j]
            C[i, j] = acc


@njit(cache=True)
def _gemm_tiled(A, B, C, ti, tj):
    # k stays innermost and untiled so each output element is the same
    # ascending-order chain as the reference kernel; the i/j tiling only
    # keeps a B panel cache-resident while a C tile is produced.
    m, k = A.shape
    n = B.shape[1]
    zero = np.zeros(1, A.dtype)[0]
    for i0 in range(0, m, ti):
        i1 = min(i0 + ti, m)
        for j0 in range(0, n, tj):
            j1 = min(j0 + tj, n)
            for i in range(i0, i1):
                for j in range(j0, j1):
                    acc = zero
                    for p in range(k):
                        acc += A[i, p] * B[p, j]
                    C[i, j] = acc


# ---------------------------------------------------------------------------
# fast kernels
#
# The fast gemm consumes B transposed (one row per output column) so every
# inner loop streams unit-stride memory. Two levels of blocking: output
# rows are processed in chunks of _ROW_CHUNK (the A panel then stays L2
# resident while successive column panels revisit it), and output columns
# in panels of 8/4/2/1 whose accumulators live in registers; the eight
# independent chains per panel hide FMA latency and every A element loaded
# is reused across the panel. Wider panels lose: they exceed the core's
# concurrent-stream budget. Worker threads split the row chunks, so each
# output element is produced by exactly one thread and results cannot
# depend on the thread count.

_ROW_CHUNK = 128


@njit(parallel=True, fastmath=True, cache=True)
def _gemv_fast(A, x, out):
    m, k = A.shape
    zero = np.zeros(1, A.dtype)[0]
    for i in prange(m):
        acc = zero
        for j in range(k):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(parallel=True, fastmath=True, cache=True)
def _gemm_fast(A, Bt, C):
    m, k = A.shape
    n = Bt.shape[0]
    zero = np.zeros(1, A.dtype)[0]
    chunk = _ROW_CHUNK
    n8 = (n // 8) * 8
    for ci in prange((m + chunk - 1) // chunk):
        i0 = ci * chunk
        i1 = min(i0 + chunk, m)
        for j0 in range(0, n8, 8):
            for i in range(i0, i1):
                s0 = zero; s1 = zero; s2 = zero; s3 = zero
                s4 = zero; s5 = zero; s6 = zero; s7 = zero
                for p in range(k):
                    a = A[i, p]
                    s0 += a * Bt[j0, p]
                    s1 += a * Bt[j0 + 1, p]
                    s2 += a * Bt[j0 + 2, p]
                    s3 += a * Bt[j0 + 3, p]
                    s4 += a * Bt[j0 + 4, p]
                    s5 += a * Bt[j0 + 5, p]
                    s6 += a * Bt[j0 + 6, p]
                    s7 += a * Bt[j0 + 7, p]
                C[i, j0] = s0; C[i, j0 + 1] = s1; C[i, j0 + 2] = s2; C[i, j0 + 3] = s3
                C[i, j0 + 4] = s4; C[i, j0 + 5] = s5; C[i, j0 + 6] = s6; C[i, j0 + 7] = s7
        j0 = n8
        if j0 + 4 <= n:
            for i in range(i0, i1):
                s0 = zero; s1 = zero; s2 = zero; s3 = zero
                for p in range(k):
                    a = A[i, p]
                    s0 += a * Bt[j0, p]
                    s1 += a * Bt[j0 + 1, p]
                    s2 += a * Bt[j0 + 2, p]
                    s3 += a * Bt[j0 + 3, p]
                C[i, j0] = s0; C[i, j0 + 1] = s1; C[i, j0 + 2] = s2; C[i, j0 + 3] = s3
            j0 += 4
        if j0 + 2 <= n:
            for i in range(i0, i1):
                s0 = zero; s1 = zero
                for p in range(k):
                    a = A[i, p]
                    s0 += a * Bt[j0, p]
                    s1 += a * Bt[j0 + 1, p]
                C[i, j0] = s0; C[i, j0 + 1] = s1
            j0 += 2
        if j0 < n:
            for i in range(i0, i1):
                acc = zero
                for p in range(k):
                    acc += A[i, p] * Bt[j0, p]
                C[i, j0] = acc


def gemv(A: np.ndarray, x: np.ndarray, kernel: str = "reference") -> np.ndarray:
    """Matrix-vector product out[i] = sum_j A[i,j] * x[j].

    The reference kernel sums in ascending j; the fast kernel may
    reassociate and is tolerance-checked against the reference.
    """
    _check_matrix(A, "A")
    _check_vector(x, "x")
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has length {x.shape[0]}")
    if A.dtype != x.dtype:
        raise ValueError(f"dtype mismatch: {A.dtype} vs {x.dtype}")
    out = np.empty(A.shape[0], A.dtype)
    if kernel == "reference":
        _gemv_ref(A, x, out)
    elif kernel == "fast":
        _gemv_fast(A, x, out)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return out


def gemm(A: np.ndarray, B: np.ndarray, kernel: str = "reference",
         tile: tuple = DEFAULT_TILE) -> np.ndarray:
    """Matrix-matrix product C[i,j] = sum_p A[i,p] * B[p,j]."""
    _check_matrix(A, "A")
    _check_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")
    if A.dtype != B.dtype:
        raise ValueError(f"dtype mismatch: {A.dtype} vs {B.dtype}")
    C = np.empty((A.shape[0], B.shape[1]), A.dtype)
    if kernel == "reference":
        _gemm_ref(A, B, C)
    elif kernel == "tiled":
        ti, tj = tile
        if ti < 1 or tj < 1:
            raise ValueError("tile sides must be >= 1")
        _gemm_tiled(A, B, C, ti, tj)
    elif kernel == "fast":
        Bt = np.ascontiguousarray(B.T)
        _gemm_fast(A, Bt, C)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return C


# ---------------------------------------------------------------------------
# activations
#
# sigmoid is evaluated as 0.5 * (1 + tanh(x/2)). Unlike 1/(1+exp(-x)) this
# never overflows, and because tanh is odd the identity
# sigmoid(x) + sigmoid(-x) == 1 holds exactly in floating point.


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tanh_act(x):
    return np.tanh(x)


# ---------------------------------------------------------------------------
# deterministic PRNG (SplitMix64) and the weight transform

_MASK64 = (1 << 64) - 1
_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MUL1 = 0xBF58476D1CE4E5B9
_SM64_MUL2 = 0x94D049BB133111EB


class Rng64:
    """SplitMix64 stream. Bit-exact and trivially portable.

    From seed 0 the first output is 0xE220A8397B1DCDAF (the published
    test vector for this generator).
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + _SM64_GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _SM64_MUL1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM64_MUL2) & _MASK64
        return z ^ (z >> 31)


@njit(cache=True)
def _sm64_fill(seed, out):
    state = seed
    gamma = np.uint64(0x9E3779B97F4A7C15)
    mul1 = np.uint64(0xBF58476D1CE4E5B9)
    mul2 = np.uint64(0x94D049BB133111EB)
    for i in range(out.shape[0]):
        state = state + gamma
        z = state
        z = (z ^ (z >> np.uint64(30))) * mul1
        z = (z ^ (z >> np.uint64(27))) * mul2
        out[i] = z ^ (z >> np.uint64(31))


def raw_stream(seed: int, n: int) -> np.ndarray:
    """First n outputs of SplitMix64(seed) as a uint64 array."""
    out = np.empty(n, np.uint64)
    _sm64_fill(np.uint64(seed & _MASK64), out)
    return out


def uniform_weight(raw: int) -> float:
    """Map a 64-bit raw draw to [-0.1, 0.1) using its top 24 bits.

    Evaluated in float64 as (u / 2^24) * 0.2 - 0.1 exactly in this
    operation order, so the result is bit-exact everywhere.
    """
    u = (int(raw) & _MASK64) >> 40
    return (u / 16777216.0) * 0.2 - 0.1


def uniform_array(raws: np.ndarray) -> np.ndarray:
    """Vectorized uniform_weight; float64 output."""
    u = (raws >> np.uint64(40)).astype(np.float64)
    return (u / 16777216.0) * 0.2 - 0.1


# ---------------------------------------------------------------------------
# worker-thread control for the fast kernels


def set_compute_threads(n: int) -> int:
    """Clamp n to the available numba workers and apply it. Returns the
    effective count."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    eff = min(n, limit)
    set_num_threads(eff)
    return eff


def get_compute_threads() -> int:
    return get_num_threads()
