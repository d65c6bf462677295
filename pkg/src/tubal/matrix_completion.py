"""Matrix completion through low-rank factorization of a folded tensor.

The observed matrix is folded into a third-order tensor of consecutive column
blocks, factored per frequency slice, and alternately refit: left factors,
right factors, then the unobserved entries are replaced by the current
factorization.  Early iterations refresh the iterate mid-sweep, which speeds
up the initial descent; per-slice ranks shrink on the fly when the factor
Gram spectrum shows a clear gap.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ObservationMask,
    dft_mode3,
    fro_norm,
    pair_weights,
    project,
    reshape_matrix_to_tensor,
    tensor_to_matrix,
    _irfft_checked,
)
from .factors import (
    RankDecreaseConfig,
    as_multirank,
    compose,
    compose_spectral,
    init_factors,
    rank_decrease,
    update_left,
    update_right,
)

RANK_STABLE_ITERS = 5  # rank detection switches off after this many quiet sweeps


@dataclass
class CompletionProblem:
    """Observed entries of a tensor plus the pattern that marks them.

    observed is zero outside the mask (enforced on construction).  For
    problems that started as a matrix, original_width remembers how many
    columns to keep when unfolding the recovered tensor back.
    """

    observed: np.ndarray
    mask: ObservationMask
    original_width: int = None

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=float)
        if self.observed.shape != self.mask.dims:
            raise ValueError(
                f"data shape {self.observed.shape} != mask shape {self.mask.dims}"
            )
        self.observed = np.where(self.mask.observed, self.observed, 0.0)

    @property
    def dims(self):
        return self.observed.shape

    @classmethod
    def from_matrix(cls, matrix, mask2d, n2):
        """Fold an (n1, h) matrix and its observation pattern into tensors.

        Columns added by padding are marked observed with value zero, so the
        solver treats them as data rather than entries to fill.
        """
        matrix = np.asarray(matrix, dtype=float)
        mask2d = np.asarray(mask2d, dtype=bool)
        if matrix.shape != mask2d.shape:
            raise ValueError(f"matrix {matrix.shape} and mask {mask2d.shape} differ")
        h = matrix.shape[1]
        data, pad = reshape_matrix_to_tensor(np.where(mask2d, matrix, 0.0), n2)
        padded_mask = np.pad(mask2d, ((0, 0), (0, pad)), constant_values=True)
        mask_t, _ = reshape_matrix_to_tensor(padded_mask.astype(float), n2)
        mask = ObservationMask(mask_t > 0.5, pad_observed_zero=pad > 0)
        return cls(observed=data, mask=mask, original_width=h)

    @classmethod
    def from_tensor(cls, data, mask):
        if not isinstance(mask, ObservationMask):
            mask = ObservationMask(mask)
        return cls(observed=data, mask=mask)


@dataclass(kw_only=True)
class SolverConfig:
    """Settings shared by the completion solvers.

    init_ranks may be an int (same rank on every slice), a full per-slice
    sequence, or a MultiRank.  t0 is the last sweep that refreshes the iterate
    mid-sweep; epsilon is the relative-change stopping threshold.
    """

    init_ranks: object
    t0: int = 10
    epsilon: float = 1e-4
    max_iter: int = 100
    rank_cfg: RankDecreaseConfig = field(default_factory=RankDecreaseConfig)
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.t0 < 0:
            raise ValueError(f"t0 must be nonnegative, got {self.t0}")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    rel_change: float
    ranks: object
    elapsed_ms: float
    event: str = ""
    step_sq: float = 0.0  # squared factor-product step, kept in memory only
    gamma: float = None
    ranks_xt: object = None


@dataclass
class SolverTrace:
    """Per-sweep history of a solver run."""

    rows: list = field(default_factory=list)
    termination: str = ""
    final_factors: object = None

    @property
    def converged(self):
        return self.termination == "converged"

    @property
    def iterations(self):
        return len(self.rows)

    def objectives(self):
        return np.array([r.objective for r in self.rows])

    def rel_changes(self):
        return np.array([r.rel_change for r in self.rows])

    def write_csv(self, path):
        """Write one row per sweep; the blend columns appear only when used."""
        with_gamma = any(r.gamma is not None for r in self.rows)
        header = ["iter", "g", "rel_change", "ranks", "elapsed_ms", "event"]
        if with_gamma:
            header += ["gamma", "ranks_xt"]
        with open(path, "w", newline="") as f:
            out = csv.writer(f)
            out.writerow(header)
            for r in self.rows:
                row = [
                    r.iteration,
                    f"{r.objective:.17g}",
                    f"{r.rel_change:.17g}",
                    ";".join(str(v) for v in r.ranks),
                    f"{r.elapsed_ms:.3f}",
                    r.event,
                ]
                if with_gamma:
                    row += [
                        f"{r.gamma:.17g}",
                        ";".join(str(v) for v in r.ranks_xt),
                    ]
                out.writerow(row)


def update_x(factors, problem):
    """Fill the unobserved entries with the current factorization."""
    return project(compose(factors), problem.mask, problem.observed)


def _half_weighted_sq(slices, n3):
    w = pair_weights(n3)
    return float(np.einsum("ijk,ijk,k->", slices, np.conj(slices), w).real)


def _objective_spectral(products, spec, n3):
    return _half_weighted_sq(products - spec.slices, n3) / (2.0 * n3)


def objective(factors, x):
    """Half squared distance between the factorization and x.

    Evaluated on the stored half spectrum with conjugate-pair weights; equal
    to 0.5 * ||compose(factors) - x||_F^2.
    """
    spec = dft_mode3(np.asarray(x, float))
    return _objective_spectral(compose_spectral(factors), spec, factors.dims[2])


def _rel_change(new, old):
    denom = fro_norm(old)
    diff = fro_norm(new - old)
    return diff / denom if denom > 1e-15 else diff


def solve(problem, config):
    """Alternating least-squares completion of a folded matrix.

    Returns
    -------
    x : ndarray
        Recovered tensor, exact on the observed entries.
    matrix : ndarray or None
        Recovered matrix with padding stripped, when the problem records an
        original width.
    trace : SolverTrace
    """
    n1, n2, n3 = problem.dims
    factors = init_factors(
        n1, n2, n3, as_multirank(config.init_ranks, n3), np.random.default_rng(config.seed)
    )
    x = problem.observed.copy()
    spec = dft_mode3(x)
    prev_products = compose_spectral(factors)
    trace = SolverTrace()
    rank_on = config.rank_cfg.enabled
    stable = 0
    trace.termination = "max_iter"
    for t in range(1, config.max_iter + 1):
        started = time.perf_counter()
        factors = update_left(factors, spec)
        if t <= config.t0:
            spec = dft_mode3(update_x(factors, problem))
        factors = update_right(factors, spec)
        event = ""
        if rank_on:
            factors, _, changed = rank_decrease(factors, config.rank_cfg)
            if changed:
                event = "rank_decrease"
                stable = 0
            else:
                stable += 1
                if stable >= RANK_STABLE_ITERS:
                    rank_on = False
        products = compose_spectral(factors)
        x_new = project(_irfft_checked(products, n3, tol=1e-9), problem.mask, problem.observed)
        spec_new = dft_mode3(x_new)
        g = _objective_spectral(products, spec_new, n3)
        if not np.isfinite(g):
            raise FloatingPointError(f"objective became non-finite at sweep {t}")
        rel = _rel_change(x_new, x)
        trace.rows.append(
            TraceRow(
                iteration=t,
                objective=g,
                rel_change=rel,
                ranks=factors.ranks,
                elapsed_ms=(time.perf_counter() - started) * 1e3,
                event=event,
                step_sq=_half_weighted_sq(products - prev_products, n3) / (2.0 * n3),
            )
        )
        x, spec, prev_products = x_new, spec_new, products
        if rel < config.epsilon:
            trace.termination = "converged"
            break
    trace.final_factors = factors
    matrix = None
    if problem.original_width is not None:
        matrix = tensor_to_matrix(x, problem.original_width)
    return x, matrix, trace


def kkt_residuals(factors, x, problem):
    """First-order stationarity residuals of the completion objective.

    Returns (left-factor residual, right-factor residual, complement-set
    residual), each normalized by the Frobenius norm of the observed data.
    """
    n3 = factors.dims[2]
    w = pair_weights(n3)
    spec = dft_mode3(np.asarray(x, float))
    products = compose_spectral(factors)
    diff = spec.slices - products
    r_left = r_right = 0.0
    for k in range(factors.n_stored):
        r_left += w[k] * np.linalg.norm(diff[:, :, k] @ factors.right[k].conj().T) ** 2
        r_right += w[k] * np.linalg.norm(factors.left[k].conj().T @ diff[:, :, k]) ** 2
    off = np.where(problem.mask.observed, 0.0, x - _irfft_checked(products, n3, tol=1e-9))
    scale = fro_norm(problem.observed) or 1.0
    return np.sqrt(r_left) / scale, np.sqrt(r_right) / scale, fro_norm(off) / scale
