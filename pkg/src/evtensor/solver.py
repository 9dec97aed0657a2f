"""Proximal alternating solver for the elastic-net regularized 3-factor network.

Fits a factor triple to a binary event tensor E by relaxing the completion
objective through a target tensor X (initialized to E) and alternating four
block updates per sweep, each a strongly convex subproblem anchored to the
previous iterate:

  1..3. For each mode m in (i, j, n), with H_m the partial contraction of the
        other two (freshest) factors and X_m the mode-m unfolding of X, the
        matricized factor solves the SPD system

            G_m (H_m H_m^T + lambda2 Id) = X_m H_m^T + lambda2 G_m_old + lambda1 Q

        where Q is the rectangular quasi-identity (ones exactly where row
        index == column index). The lambda1 term is applied literally as
        stated -- no soft-thresholding.

  4.    X blends the reconstruction with its own previous value:
        X_new = (reconstruction + lambda2 * X_old) / (1 + lambda2),
        optionally re-clamping entries observed as 1 in E (`clamp_x`).

The latent rank starts at max(1, f_max - 5) and grows by one (up to f_max)
whenever the relative change of X drops below `grow_tol`; the run converges
when it drops below `conv_tol`. An iteration that grew the rank skips the
convergence check (the same small relative change would otherwise terminate
the run at low rank), except when the rank is already capped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError
from .events import EventTensor
from .tensor_ops import (
    FactorTriple,
    f3tn_contract,
    frob_dist,
    frob_norm,
    matricize_factor,
    pair_contraction,
    unfold,
    unmatricize_factor,
)

logger = logging.getLogger(__name__)

GROW_NOISE_FACTOR = 0.01  # rank-expansion fill magnitude relative to init_scale


@dataclass(frozen=True)
class SolverConfig:
    f_max: int = 6
    lambda1: float = 0.1
    lambda2: float = 0.1
    s_max: int = 1000
    grow_tol: float = 1e-2
    conv_tol: float = 1e-3
    seed: int = 0
    init_scale: float = 0.1
    clamp_x: bool = False

    def __post_init__(self):
        if self.f_max < 1:
            raise ValueError("f_max must be >= 1")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be >= 0")
        if self.lambda2 <= 0:
            raise ValueError("lambda2 must be > 0")
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.grow_tol <= 0 or self.conv_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.grow_tol <= self.conv_tol:
            raise ValueError("grow_tol must exceed conv_tol")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")


@dataclass
class TraceRecord:
    """One sweep of the solve loop. `f` is the rank in effect during the sweep;
    `grew` marks sweeps whose ending triggered a rank expansion."""

    s: int
    f: int
    objective: float
    rel_change: float
    max_residual: float = 0.0
    grew: bool = False


@dataclass
class SolverState:
    x: np.ndarray
    factors: FactorTriple
    s: int
    rng: np.random.Generator
    observed: np.ndarray | None = None  # E as float64, kept for clamp_x
    trace: list[TraceRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def f(self) -> int:
        return self.factors.rank


def _as_array(e) -> np.ndarray:
    data = e.data if isinstance(e, EventTensor) else e
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError("expected a 3rd-order tensor")
    return data


def _random_factors(rng, dims, f, scale) -> FactorTriple:
    ii, jj, nn = dims
    return FactorTriple(
        g_i=rng.uniform(0.0, scale, size=(ii, f, f)),
        g_j=rng.uniform(0.0, scale, size=(f, jj, f)),
        g_n=rng.uniform(0.0, scale, size=(f, f, nn)),
    )


def init_state(e, cfg: SolverConfig) -> SolverState:
    """X starts as E cast to real; rank starts at max(1, f_max - 5); factors
    are filled i.i.d. uniform on [0, init_scale] from the seeded generator."""
    data = _as_array(e)
    f0 = max(1, cfg.f_max - 5)
    rng = np.random.default_rng(cfg.seed)
    factors = _random_factors(rng, data.shape, f0, cfg.init_scale)
    return SolverState(x=data.copy(), factors=factors, s=0, rng=rng, observed=data)


def quasi_identity(rows: int, cols: int) -> np.ndarray:
    """Rectangular matrix with ones exactly on matching row/column indices."""
    return np.eye(rows, cols)


def update_factor(state: SolverState, mode: str, cfg: SolverConfig) -> tuple[FactorTriple, float]:
    """Solve the mode-m subproblem; returns the updated triple and the solve
    residual ||G A - rhs||_F / (1 + ||rhs||_F)."""
    factors = state.factors
    f = factors.rank
    g_old = matricize_factor(factors.factor(mode), mode)
    h = pair_contraction(factors, mode)
    x_mat = unfold(state.x, mode)

    a = h @ h.T
    a[np.diag_indices_from(a)] += cfg.lambda2
    rhs = x_mat @ h.T + cfg.lambda2 * g_old
    if cfg.lambda1 != 0.0:
        rhs += cfg.lambda1 * quasi_identity(*rhs.shape)
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(rhs)):
        raise NumericalError(state.s, f"non-finite values entering the mode-{mode} solve")

    try:
        factorization = cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        # lambda2 > 0 makes A positive definite in exact arithmetic; a one-shot
        # diagonal jitter guards roundoff
        jitter = 1e-12 * np.trace(a) / (f * f)
        a[np.diag_indices_from(a)] += jitter
        logger.warning("mode-%s factorization failed at s=%d, retrying with jitter %g",
                       mode, state.s, jitter)
        factorization = cho_factor(a, lower=True)
    g_new = cho_solve(factorization, rhs.T).T

    residual = frob_norm(g_new @ a - rhs) / (1.0 + frob_norm(rhs))
    updated = replace(factors, **{f"g_{mode}": unmatricize_factor(g_new, mode, f)})
    return updated, residual


def blend_x(reconstruction: np.ndarray, x_old: np.ndarray, lambda2: float) -> np.ndarray:
    """Elementwise convex blend (reconstruction + lambda2 * x_old) / (1 + lambda2)."""
    return (reconstruction + lambda2 * x_old) / (1.0 + lambda2)


def update_x(state: SolverState, cfg: SolverConfig) -> np.ndarray:
    """Blend update for the target tensor, optionally re-clamping observed 1s."""
    x_new = blend_x(f3tn_contract(state.factors), state.x, cfg.lambda2)
    if cfg.clamp_x:
        if state.observed is None:
            raise ValueError("clamp_x requires the observed tensor on the state")
        x_new[state.observed == 1.0] = 1.0
    return x_new


def grow_rank(state: SolverState, cfg: SolverConfig) -> SolverState:
    """Expand each factor by one slice along both latent axes (f <- min(f+1,
    f_max)); old entries are preserved, new ones filled with tiny seeded noise
    so the added directions are not stationary. No-op at the rank cap."""
    f = state.f
    if f >= cfg.f_max:
        return state
    scale = cfg.init_scale * GROW_NOISE_FACTOR
    ii, jj, nn = state.factors.dims
    g = f + 1
    g_i = state.rng.uniform(0.0, scale, size=(ii, g, g))
    g_j = state.rng.uniform(0.0, scale, size=(g, jj, g))
    g_n = state.rng.uniform(0.0, scale, size=(g, g, nn))
    g_i[:, :f, :f] = state.factors.g_i
    g_j[:f, :, :f] = state.factors.g_j
    g_n[:f, :f, :] = state.factors.g_n
    state.factors = FactorTriple(g_i=g_i, g_j=g_j, g_n=g_n)
    return state


def objective(state: SolverState) -> float:
    """Half the squared Frobenius distance between X and the reconstruction."""
    return 0.5 * frob_dist(state.x, f3tn_contract(state.factors)) ** 2


def solve(e, cfg: SolverConfig | None = None) -> tuple[FactorTriple, SolverState]:
    """Run the full alternating schedule on an event tensor (or raw 3rd-order
    array). Returns the final factors and the state carrying the sweep trace;
    a run that exhausts s_max returns normally with `converged=False`."""
    cfg = cfg or SolverConfig()
    state = init_state(e, cfg)
    while state.s < cfg.s_max:
        max_residual = 0.0
        for mode in ("i", "j", "n"):
            state.factors, residual = update_factor(state, mode, cfg)
            max_residual = max(max_residual, residual)
        x_old_norm = frob_norm(state.x)
        x_new = update_x(state, cfg)
        delta = frob_dist(x_new, state.x)
        rel_change = delta / x_old_norm if x_old_norm > 0 else delta
        state.x = x_new

        grew = rel_change < cfg.grow_tol and state.f < cfg.f_max
        record = TraceRecord(
            s=state.s,
            f=state.f,
            objective=objective(state),
            rel_change=rel_change,
            max_residual=max_residual,
            grew=grew,
        )
        state.trace.append(record)
        if grew:
            grow_rank(state, cfg)
            logger.debug("s=%d rank grown to %d (rel_change=%.3e)", state.s, state.f, rel_change)
        elif rel_change < cfg.conv_tol:
            state.converged = True
            state.s += 1
            break
        state.s += 1
    if not state.converged:
        logger.info("stopped at s_max=%d without convergence (last rel_change=%.3e)",
                    cfg.s_max, state.trace[-1].rel_change if state.trace else float("nan"))
    return state.factors, state


# ---------------------------------------------------------------------------
# artifact I/O


def save_checkpoint(factors: FactorTriple, path_or_fh) -> None:
    """Text checkpoint: header ``I J N f``, then the three matricized factors
    (one row per line, 17 significant digits -- exact float64 round-trip)."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            save_checkpoint(factors, fh)
            return
    fh = path_or_fh
    ii, jj, nn = factors.dims
    fh.write(f"{ii} {jj} {nn} {factors.rank}\n")
    for mode in ("i", "j", "n"):
        mat = matricize_factor(factors.factor(mode), mode)
        for row in mat:
            fh.write(" ".join("%.17g" % v for v in row))
            fh.write("\n")


def load_checkpoint(path_or_fh) -> FactorTriple:
    """Inverse of :func:`save_checkpoint`."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "r", encoding="utf-8") as fh:
            return load_checkpoint(fh)
    fh = path_or_fh
    ii, jj, nn, f = (int(v) for v in fh.readline().split())
    rows = [np.array(fh.readline().split(), dtype=np.float64)
            for _ in range(ii + jj + nn)]
    mat = np.vstack(rows)
    if mat.shape != (ii + jj + nn, f * f):
        raise ValueError(f"checkpoint body shape {mat.shape} disagrees with header")
    return FactorTriple(
        g_i=unmatricize_factor(mat[:ii], "i", f),
        g_j=unmatricize_factor(mat[ii:ii + jj], "j", f),
        g_n=unmatricize_factor(mat[ii + jj:], "n", f),
    )


def write_trace_csv(state: SolverState, path_or_fh, metadata: dict | None = None) -> None:
    """Trace export: ``s,f,objective,rel_change`` rows, preceded by optional
    ``# key: value`` comment headers."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_trace_csv(state, fh, metadata)
            return
    fh = path_or_fh
    for key in sorted(metadata or {}):
        fh.write(f"# {key}: {metadata[key]}\n")
    fh.write("s,f,objective,rel_change\n")
    for rec in state.trace:
        fh.write("%d,%d,%.17g,%.17g\n" % (rec.s, rec.f, rec.objective, rec.rel_change))
