"""Signless normalized Laplacian operator, power method, block eigensolver.

The central operator is M = (1/2)(I + D^{-1/2} A D^{-1/2}), whose
eigenvalues lie in [0, 1], with eigenvalue exactly 1 (eigenvector
D^{1/2} 1) for each connected component. The power method amplifies the
top of the spectrum, which is where cluster structure lives.

Random numbers come from numpy's PCG64 generator (ziggurat normal
sampling). Streams are derived from a master seed with SeedSequence so
that column i of a Gaussian block is the same no matter how many columns
are drawn, and independent computations never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from specluster.errors import GraphFormatError, InputError, RankDeficiencyError
from specluster.graph import Graph

GENERATOR_NAME = "numpy-pcg64-ziggurat"

# Stream tags: SeedSequence([master_seed, tag, ...]) keeps independent uses
# of one master seed from colliding.
_TAG_GAUSSIAN_COLUMN = 1
_TAG_EIGS_INIT = 3


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    """Deterministic generator for a (seed, tag...) slot."""
    if seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *tags])))


class SignlessLaplacianOp:
    """Matrix-free action of M = (1/2)(I + D^{-1/2} A D^{-1/2}).

    One application costs a sparse matvec plus two diagonal scalings,
    O(m + n). Accepts a single vector or an (n, l) block of columns.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self.n = graph.n
        self.inv_sqrt_degrees = 1.0 / np.sqrt(graph.degrees)
        self._adj = graph.adjacency_csr()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise InputError(f"operand has {x.shape[0]} rows, operator expects {self.n}")
        s = self.inv_sqrt_degrees if x.ndim == 1 else self.inv_sqrt_degrees[:, None]
        return 0.5 * x + 0.5 * (s * (self._adj @ (s * x)))

    __call__ = matvec

    def dense(self) -> np.ndarray:
        """Dense M, for oracle comparisons on small graphs."""
        s = self.inv_sqrt_degrees
        return 0.5 * (np.eye(self.n) + (s[:, None] * self._adj.toarray()) * s[None, :])


def dense_signless_laplacian(g: Graph) -> np.ndarray:
    return SignlessLaplacianOp(g).dense()


def _as_matvec(op):
    """Accept a SignlessLaplacianOp, any .matvec object, a callable, or a dense array."""
    if hasattr(op, "matvec"):
        return op.matvec
    if isinstance(op, np.ndarray) or sp.issparse(op):
        return lambda x: op @ x
    if callable(op):
        return op
    raise InputError(f"cannot interpret {type(op).__name__} as a linear operator")


def apply_m(op: SignlessLaplacianOp, x: np.ndarray) -> np.ndarray:
    """y = Mx. Preserves nonnegativity and never grows the 2-norm."""
    return _as_matvec(op)(x)


def power_method(op, x0: np.ndarray, t: int) -> np.ndarray:
    """Return M^t x0. No normalization between steps.

    Safe because every eigenvalue of M is at most 1; components outside
    the dominant eigenspace decay, which is the point. ``op`` may be a
    SignlessLaplacianOp, a dense symmetric matrix, or any callable, so
    synthetic operators with a prescribed spectrum work too. ``x0`` may
    be a vector or an (n, l) column block.
    """
    if t < 0:
        raise InputError(f"power method step count must be >= 0, got {t}")
    mv = _as_matvec(op)
    x = np.array(x0, dtype=np.float64, copy=True)
    for _ in range(int(t)):
        x = mv(x)
    return x


# ---------------------------------------------------------------------------
# Embedding matrices


@dataclass
class EmbeddingMatrix:
    """An n x l block of real vectors, one vertex per row.

    ``scaled`` records whether rows have been multiplied by deg(u)^{-1/2}
    (the form handed to k-means). ``seed`` is the master seed the block
    was derived from, kept for output headers.
    """

    data: np.ndarray
    scaled: bool
    seed: int = 0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise InputError("embedding must be a 2-D array with at least one column")
        if not np.all(np.isfinite(self.data)):
            raise InputError("embedding contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def l(self) -> int:
        return self.data.shape[1]


_EMBEDDING_MAGIC = "#specluster-embedding"


def save_embedding(em: EmbeddingMatrix, path) -> None:
    """Header + one comma-separated row per vertex at 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_EMBEDDING_MAGIC} n={em.n} l={em.l} "
            f"scaled={1 if em.scaled else 0} seed={em.seed}\n"
        )
        fh.write(f"# generator={GENERATOR_NAME} numpy={np.__version__}\n")
        for row in em.data:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_embedding(path) -> EmbeddingMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith(_EMBEDDING_MAGIC):
            raise GraphFormatError(f"{path}:1: missing '{_EMBEDDING_MAGIC}' header")
        fields = dict(tok.split("=", 1) for tok in header.split()[1:])
        try:
            n, ncols = int(fields["n"]), int(fields["l"])
            scaled, seed = fields["scaled"] == "1", int(fields["seed"])
        except (KeyError, ValueError):
            raise GraphFormatError(f"{path}:1: malformed header {header!r}") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad row") from None
    data = np.asarray(rows, dtype=np.float64)
    if data.shape != (n, ncols):
        raise GraphFormatError(
            f"{path}: header promises {n}x{ncols} but file holds "
            f"{data.shape[0]}x{data.shape[1] if data.ndim == 2 else 1}"
        )
    return EmbeddingMatrix(data=data, scaled=scaled, seed=seed)


def sample_gaussian_vectors(n: int, l: int, seed: int) -> EmbeddingMatrix:
    """l independent standard-normal n-vectors as columns.

    Column i is drawn from its own derived stream, so the first l' <= l
    columns are bit-identical across calls with different l, and columns
    may be generated concurrently without changing the result.
    """
    if n < 1 or l < 1:
        raise InputError(f"need n >= 1 and l >= 1, got n={n}, l={l}")
    data = np.empty((n, l), dtype=np.float64)
    for i in range(l):
        data[:, i] = rng_for(seed, _TAG_GAUSSIAN_COLUMN, i).standard_normal(n)
    return EmbeddingMatrix(data=data, scaled=False, seed=seed)


# ---------------------------------------------------------------------------
# Eigensolver (block power / subspace iteration)


@dataclass
class EigsResult:
    values: np.ndarray  # descending
    vectors: EmbeddingMatrix  # orthonormal columns, ordered to match values
    residuals: np.ndarray  # ||M f_i - gamma_i f_i||_2 per pair
    iterations: int
    converged: bool

    def __iter__(self):
        # allow `values, vectors = subspace_iteration_eigs(...)`
        return iter((self.values, self.vectors))


def subspace_iteration_eigs(
    op,
    k: int,
    iters: int = 1000,
    tol: float = 1e-8,
    seed: int = 0,
) -> EigsResult:
    """Top-k eigenpairs of M by block power iteration with Rayleigh-Ritz.

    Each sweep multiplies the block by M, extracts Ritz pairs from the
    k x k projected problem, measures per-pair residuals, and
    re-orthonormalizes. Stops when every residual is at most ``tol``.
    Non-convergence is reported through ``converged=False``, not raised:
    callers doing benchmarking want the partial answer and the flag.
    """
    mv = _as_matvec(op)
    n = op.n if hasattr(op, "n") else op.shape[0]
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = rng_for(seed, _TAG_EIGS_INIT)
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))

    theta = np.zeros(k)
    ritz = q
    resid = np.full(k, np.inf)
    used = 0
    converged = False
    for it in range(1, int(iters) + 1):
        b = mv(q)
        h = q.T @ b
        h = 0.5 * (h + h.T)
        evals, w = np.linalg.eigh(h)  # ascending
        order = np.arange(k - 1, -1, -1)  # descending eigenvalue, stable in index
        evals, w = evals[order], w[:, order]
        ritz = q @ w
        resid = np.linalg.norm(b @ w - ritz * evals[None, :], axis=0)
        theta = evals
        used = it
        if resid.max() <= tol:
            converged = True
            break
        q, _ = np.linalg.qr(b)

    # Ritz vectors are orthonormal (rotation of an orthonormal block).
    vectors = EmbeddingMatrix(data=ritz, scaled=False, seed=seed)
    return EigsResult(
        values=theta, vectors=vectors, residuals=resid, iterations=used, converged=converged
    )


def pm_k_orthonormal_vectors(
    op: SignlessLaplacianOp, k: int, t: int, seed: int
) -> EmbeddingMatrix:
    """k Gaussian vectors, each power-iterated t steps, orthonormalized once.

    The single final QR distinguishes this from subspace iteration, which
    re-orthonormalizes every sweep. After many unnormalized iterations the
    columns all lean toward the dominant eigenspace; if they become
    numerically dependent the QR factor exposes it and we refuse.
    """
    n = op.n
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    y = power_method(op, sample_gaussian_vectors(n, k, seed).data, t)
    q, r = np.linalg.qr(y)
    diag = np.abs(np.diag(r))
    threshold = max(n, k) * np.finfo(np.float64).eps * max(diag.max(), 1e-300)
    bad = np.flatnonzero(diag <= threshold)
    if bad.size:
        raise RankDeficiencyError(
            f"power-method columns are numerically dependent: column {int(bad[0])} "
            f"has |R[{int(bad[0])},{int(bad[0])}]| = {diag[bad[0]]:.3e} after t={t} steps; "
            "reduce t or k"
        )
    # Fix signs so the factorization is unique: make each R diagonal positive.
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return EmbeddingMatrix(data=q * signs[None, :], scaled=False, seed=seed)
