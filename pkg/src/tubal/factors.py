"""Per-frequency low-rank factor pairs and their least-squares updates.

A factor pair approximates each stored frequency slice of a data tensor as
left[k] @ right[k] with a slice-dependent rank.  Updates solve one regularized
least-squares problem per stored slice; mirrored slices are implied by
conjugate symmetry, so only n3 // 2 + 1 solves happen per sweep.
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import MultiRank, SpectralTensor, _irfft_checked


class SliceSolveCounter:
    """Counts per-slice least-squares solves (thread safe)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    @property
    def count(self):
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0

    def add(self, n):
        with self._lock:
            self._count += n


slice_solves = SliceSolveCounter()


def _thread_width():
    try:
        return max(1, int(os.environ.get("TUBAL_THREADS", "1")))
    except ValueError:
        return 1


def _map_slices(fn, n):
    """Apply fn to slice indices 0..n-1, optionally on a thread pool.

    Results are collected by index, so the output is independent of
    scheduling order.
    """
    width = min(_thread_width(), n) if n else 1
    if width <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=width) as pool:
        return list(pool.map(fn, range(n)))


def pinv(m, rtol=None):
    """Moore-Penrose inverse with singular values below rtol * sigma_max dropped."""
    m = np.asarray(m)
    if rtol is None:
        rtol = max(m.shape) * np.finfo(float).eps if m.size else 0.0
    return np.linalg.pinv(m, rcond=rtol)


@dataclass(frozen=True)
class RankDecreaseConfig:
    """Eigen-gap rank detection settings.

    tau is the minimal ratio between consecutive Gram eigenvalues treated as a
    rank gap; floor is the smallest admissible slice rank.
    """

    enabled: bool = True
    tau: float = 10.0
    floor: int = 1

    def __post_init__(self):
        if self.tau <= 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if self.floor < 1:
            raise ValueError(f"floor must be at least 1, got {self.floor}")


@dataclass
class BlockFactors:
    """Per-slice factor pair for a tensor of shape dims = (n_rows, n_cols, n3).

    left[k] is (n_rows, r_k) complex, right[k] is (r_k, n_cols) complex, for
    the stored frequency slices k = 0 .. n3 // 2.
    """

    dims: tuple
    ranks: MultiRank
    left: list
    right: list

    def __post_init__(self):
        n_rows, n_cols, n3 = self.dims
        stored = self.ranks.stored()
        if self.ranks.n3 != n3:
            raise ValueError(f"rank vector length {self.ranks.n3} != n3 {n3}")
        if len(self.left) != len(stored) or len(self.right) != len(stored):
            raise ValueError("factor lists must cover every stored slice")
        for k, r in enumerate(stored):
            if self.left[k].shape != (n_rows, r):
                raise ValueError(
                    f"left slice {k} has shape {self.left[k].shape}, expected {(n_rows, r)}"
                )
            if self.right[k].shape != (r, n_cols):
                raise ValueError(
                    f"right slice {k} has shape {self.right[k].shape}, expected {(r, n_cols)}"
                )

    @property
    def n_stored(self):
        return len(self.left)


def init_factors(n_rows, n_cols, n3, init_ranks, seed=0):
    """Draw a random factor pair with the requested per-slice ranks.

    Spatial factor tensors are sampled i.i.d. N(0, 1/r_max), transformed along
    mode 3, then each stored slice is truncated to its requested rank.  The
    same seed always produces the same factors.
    """
    ranks = as_multirank(init_ranks, n3)
    rmax = ranks.tubal
    if rmax > min(n_rows, n_cols):
        raise ValueError(
            f"initial rank {rmax} exceeds min(n_rows, n_cols) = {min(n_rows, n_cols)}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    stored = ranks.stored()
    if rmax == 0:
        left = [np.zeros((n_rows, 0), complex) for _ in stored]
        right = [np.zeros((0, n_cols), complex) for _ in stored]
        return BlockFactors((n_rows, n_cols, n3), ranks, left, right)
    scale = 1.0 / np.sqrt(rmax)
    p0 = rng.standard_normal((n_rows, rmax, n3)) * scale
    q0 = rng.standard_normal((rmax, n_cols, n3)) * scale
    pf = np.fft.rfft(p0, axis=2)
    qf = np.fft.rfft(q0, axis=2)
    left = [np.ascontiguousarray(pf[:, : stored[k], k]) for k in range(len(stored))]
    right = [np.ascontiguousarray(qf[: stored[k], :, k]) for k in range(len(stored))]
    return BlockFactors((n_rows, n_cols, n3), ranks, left, right)


def as_multirank(value, n3):
    """Coerce an int, sequence or MultiRank into a MultiRank of length n3."""
    if isinstance(value, MultiRank):
        if value.n3 != n3:
            raise ValueError(f"rank vector length {value.n3} != n3 {n3}")
        return value
    if np.isscalar(value):
        return MultiRank.constant(int(value), n3)
    seq = list(value)
    if len(seq) != n3:
        raise ValueError(f"rank vector length {len(seq)} != n3 {n3}")
    return MultiRank(tuple(int(v) for v in seq))


def _check_spec(factors, spec):
    if spec.dims != factors.dims:
        raise ValueError(f"data dims {spec.dims} != factor dims {factors.dims}")


def update_left(factors, spec):
    """Least-squares refresh of every stored left slice against the data spectrum.

    Slice k becomes data_k @ right_k^H @ pinv(right_k @ right_k^H).
    """
    _check_spec(factors, spec)

    def solve(k):
        q = factors.right[k]
        return spec.slices[:, :, k] @ q.conj().T @ pinv(q @ q.conj().T)

    new_left = _map_slices(solve, factors.n_stored)
    slice_solves.add(factors.n_stored)
    return replace(factors, left=new_left)


def update_right(factors, spec):
    """Least-squares refresh of every stored right slice against the data spectrum.

    Slice k becomes pinv(left_k^H @ left_k) @ left_k^H @ data_k.
    """
    _check_spec(factors, spec)

    def solve(k):
        p = factors.left[k]
        return pinv(p.conj().T @ p) @ p.conj().T @ spec.slices[:, :, k]

    new_right = _map_slices(solve, factors.n_stored)
    slice_solves.add(factors.n_stored)
    return replace(factors, right=new_right)


def compose_spectral(factors):
    """Stored-slice products left[k] @ right[k] as an (n_rows, n_cols, half) array."""
    n_rows, n_cols, n3 = factors.dims
    out = np.empty((n_rows, n_cols, factors.n_stored), complex)
    for k in range(factors.n_stored):
        out[:, :, k] = factors.left[k] @ factors.right[k]
    return out


def compose(factors):
    """Spatial tensor represented by the factor pair.

    Raises SpectralSymmetryError if the slice products cannot come from a real
    tensor (imaginary mass above 1e-9 of total in the self-conjugate slices).
    """
    return _irfft_checked(compose_spectral(factors), factors.dims[2], tol=1e-9)


def spectral_from_products(factors, products=None):
    """Wrap stored slice products into a SpectralTensor."""
    if products is None:
        products = compose_spectral(factors)
    return SpectralTensor(dims=factors.dims, slices=products)


def _slice_rank_cut(eigvals, tau):
    """Index to keep before the widest eigen gap, or None when no gap exceeds tau."""
    lam = np.clip(eigvals, 0.0, None)
    if lam.size < 2 or lam[0] <= 0:
        return None
    # eigvalsh noise on a Gram matrix sits at eps * lam[0]; flooring there keeps
    # ratios between sub-noise values from outvoting the true gap.
    lam = np.maximum(lam, np.finfo(float).eps * lam[0])
    ratios = lam[:-1] / lam[1:]
    best = int(np.argmax(ratios))
    if ratios[best] > tau:
        return best + 1
    return None


def rank_decrease(factors, cfg=RankDecreaseConfig()):
    """Detect and apply per-slice rank drops via the Gram eigen-gap test.

    For each stored slice the eigenvalues of right_k @ right_k^H are scanned
    for a ratio gap above cfg.tau; when found, the slice product is truncated
    to the leading directions of its thin SVD (never below cfg.floor, never
    increased).  Returns (new_factors, new_ranks, changed).
    """
    if not cfg.enabled:
        return factors, factors.ranks, False
    stored = list(factors.ranks.stored())
    new_left = list(factors.left)
    new_right = list(factors.right)
    changed = False
    for k in range(factors.n_stored):
        r = stored[k]
        if r <= cfg.floor:
            continue
        gram = new_right[k] @ new_right[k].conj().T
        lam = np.linalg.eigvalsh(gram)[::-1]
        cut = _slice_rank_cut(lam, cfg.tau)
        if cut is None:
            continue
        new_r = max(cut, cfg.floor)
        if new_r >= r:
            continue
        # Thin SVD of the slice product through a QR factor keeps the cost at
        # O(n r^2) instead of forming the full n_rows x n_cols product.
        qmat, rmat = np.linalg.qr(new_left[k])
        u, s, vh = np.linalg.svd(rmat @ new_right[k], full_matrices=False)
        new_left[k] = qmat @ (u[:, :new_r] * s[:new_r])
        new_right[k] = vh[:new_r, :]
        stored[k] = new_r
        changed = True
    if not changed:
        return factors, factors.ranks, False
    ranks = MultiRank.from_stored(stored, factors.dims[2])
    out = BlockFactors(factors.dims, ranks, new_left, new_right)
    return out, ranks, True
