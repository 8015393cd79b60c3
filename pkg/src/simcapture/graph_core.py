"""Communication/sensing graphs, the interaction matrix W and its spectral bounds.

The interaction matrix of a defender team is

    W = W1 + W2,   W1 = D - A (weighted Laplacian),   W2 = diag(b),

where A holds the symmetric communication weights and b flags the defenders
that can sense the intruder. W is positive definite whenever the graph is
connected and at least one defender senses.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
CONNECTIVITY_TOL = 1e-9


class GraphValidationError(ValueError):
    """A communication graph violates a structural invariant."""


class SymmetryError(GraphValidationError):
    def __init__(self, i: int, j: int, wij: float, wji: float):
        self.entry = (i, j)
        super().__init__(
            f"weights not symmetric at ({i}, {j}): w[{i},{j}]={float(wij)!r} != w[{j},{i}]={float(wji)!r}"
        )


class InfeasibleBoundError(ValueError):
    """The eigenvalue lower bound is undefined (no sensing or disconnected graph)."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CommGraph:
    """Symmetric communication weights plus binary sensing flags for N defenders.

    Indices in error messages are 1-based, matching defender numbering.
    """

    weights: np.ndarray
    sensing: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.sensing, dtype=float).ravel()
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise GraphValidationError(f"weights must be a non-empty square matrix, got shape {w.shape}")
        n = w.shape[0]
        if b.shape != (n,):
            raise GraphValidationError(f"sensing must have length {n}, got {b.size}")
        if not np.all(np.isfinite(w)):
            raise GraphValidationError("weights must be finite")
        for i in range(n):
            if w[i, i] != 0.0:
                raise GraphValidationError(f"nonzero diagonal weight at ({i + 1}, {i + 1}): {w[i, i]!r}")
        neg = np.argwhere(w < 0)
        if neg.size:
            i, j = neg[0]
            raise GraphValidationError(f"negative weight at ({i + 1}, {j + 1}): {w[i, j]!r}")
        for i in range(n):
            for j in range(i + 1, n):
                if abs(w[i, j] - w[j, i]) > SYMMETRY_TOL:
                    raise SymmetryError(i + 1, j + 1, w[i, j], w[j, i])
        if not np.all((b == 0.0) | (b == 1.0)):
            raise GraphValidationError(f"sensing flags must be 0 or 1, got {b.tolist()}")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "sensing", _frozen(b))

    @property
    def n_defenders(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return int(self.sensing.sum())

    def __eq__(self, other):
        if not isinstance(other, CommGraph):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(self.sensing, other.sensing)

    __hash__ = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence], sensing: Sequence[float]) -> "CommGraph":
        """Build from 1-based ``(i, j)`` or ``(i, j, w)`` undirected edges."""
        w = np.zeros((n, n))
        for e in edges:
            i, j = int(e[0]) - 1, int(e[1]) - 1
            wt = float(e[2]) if len(e) > 2 else 1.0
            if not (0 <= i < n and 0 <= j < n):
                raise GraphValidationError(f"edge {tuple(e)} references a defender outside 1..{n}")
            if i == j:
                raise GraphValidationError(f"self-loop at defender {i + 1}")
            w[i, j] = w[j, i] = wt
        return cls(w, np.asarray(sensing, dtype=float))

    @classmethod
    def complete(cls, n: int, sensing: Sequence[float] | None = None) -> "CommGraph":
        b = np.ones(n) if sensing is None else np.asarray(sensing, dtype=float)
        return cls(np.ones((n, n)) - np.eye(n), b)

    def edges(self) -> list[tuple[int, int, float]]:
        n = self.n_defenders
        return [(i + 1, j + 1, float(self.weights[i, j]))
                for i in range(n) for j in range(i + 1, n) if self.weights[i, j] > 0]


@dataclass(frozen=True, eq=False)
class CaptureMatrixSet:
    w_full: np.ndarray
    w_comm: np.ndarray
    w_sense: np.ndarray
    m: int
    lambda_min_w: float
    lambda2_w1: float | None  # None when N = 1
    eigenvalues_w: np.ndarray = field(repr=False)
    eigenvalues_w1: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.w_full.shape[0]


# -- eigen-solver -------------------------------------------------------------

def symmetric_eigenvalues(matrix, *, vectors: bool = False, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues (ascending) of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
    drops below ``tol * ||A||_F``. With ``vectors=True`` returns ``(w, Q)``
    with ``A = Q diag(w) Q^T``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    asym = np.abs(a - a.T)
    if asym.size and asym.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValueError(f"matrix is not symmetric at ({i + 1}, {j + 1})")
    a = 0.5 * (a + a.T)
    q = np.eye(n)
    norm = math.sqrt(float(np.sum(a * a)))
    threshold = tol * norm

    off_mask = ~np.eye(n, dtype=bool)

    def off_norm():
        # summed directly; norm(A)^2 - norm(diag)^2 cancels near convergence
        return math.sqrt(float(np.sum(a[off_mask] ** 2)))

    for _ in range(max_sweeps):
        if off_norm() <= threshold:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                diff = a[r, r] - a[p, p]
                if abs(apr) < 1e-18 * abs(diff):
                    # rotation angle below rounding; drop the entry
                    a[p, r] = a[r, p] = 0.0
                    continue
                theta = diff / (2.0 * apr)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, r) rotation
                ap = a[:, p].copy()
                ar = a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap = a[p, :].copy()
                ar = a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
    else:
        if off_norm() > threshold:
            raise RuntimeError("Jacobi iteration did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    if vectors:
        return w, q[:, order]
    return w


# -- matrices and checks --------------------------------------------------------

def laplacian(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return np.diag(w.sum(axis=1)) - w


def build_capture_matrices(graph: CommGraph) -> CaptureMatrixSet:
    if not isinstance(graph, CommGraph):
        graph = CommGraph(*graph)
    w1 = laplacian(graph.weights)
    w2 = np.diag(graph.sensing)
    w = w1 + w2
    ev = symmetric_eigenvalues(w)
    ev1 = symmetric_eigenvalues(w1)
    return CaptureMatrixSet(
        w_full=_frozen(w),
        w_comm=_frozen(w1),
        w_sense=_frozen(w2),
        m=graph.m,
        lambda_min_w=float(ev[0]),
        lambda2_w1=float(ev1[1]) if graph.n_defenders > 1 else None,
        eigenvalues_w=_frozen(ev),
        eigenvalues_w1=_frozen(ev1),
    )


def connected_components(weights) -> list[list[int]]:
    """Components (0-based, sorted) of the graph on positive-weight edges."""
    w = np.asarray(weights)
    n = w.shape[0]
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [], deque([s])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.flatnonzero(w[u] > 0):
                if not seen[v]:
                    seen[v] = True
                    queue.append(int(v))
        comps.append(sorted(comp))
    return comps


def is_connected(weights) -> bool:
    return len(connected_components(weights)) == 1


@dataclass(frozen=True)
class ValidationReport:
    symmetric: bool
    connected: bool
    spectral_connected: bool
    lambda2_w1: float | None
    sensing_ok: bool
    m: int
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.symmetric and self.connected and self.sensing_ok

    @property
    def consistent(self) -> bool:
        """Traversal and spectral connectivity agree."""
        return self.connected == self.spectral_connected


def validate_assumptions(graph) -> ValidationReport:
    """Check symmetry, connectivity and that at least one defender senses.

    Accepts a :class:`CommGraph` or a raw ``(weights, sensing)`` pair so that
    asymmetric inputs get a report instead of an exception.
    """
    if isinstance(graph, CommGraph):
        w, b = graph.weights, graph.sensing
    else:
        w, b = (np.asarray(x, dtype=float) for x in graph)
    msgs = []
    n = w.shape[0]
    symmetric = bool(np.all(np.abs(w - w.T) <= SYMMETRY_TOL))
    if not symmetric:
        i, j = np.unravel_index(np.argmax(np.abs(w - w.T)), w.shape)
        msgs.append(f"asymmetric weight at ({i + 1}, {j + 1})")
    comps = connected_components(w)
    connected = len(comps) == 1
    if not connected:
        msgs.append(f"graph has {len(comps)} components: "
                    + ", ".join("{" + ",".join(str(k + 1) for k in c) + "}" for c in comps))
    lam2 = None
    if n > 1:
        l1 = laplacian(w)
        lam2 = float(symmetric_eigenvalues(0.5 * (l1 + l1.T))[1])
        spectral = lam2 > CONNECTIVITY_TOL
    else:
        spectral = True
    if spectral != connected:
        msgs.append(f"traversal and spectral connectivity disagree (lambda2={lam2!r})")
    m = int(np.sum(b))
    sensing_ok = m >= 1
    if not sensing_ok:
        msgs.append("no defender senses the intruder")
    return ValidationReport(symmetric, connected, spectral, lam2, sensing_ok, m, tuple(msgs))


# -- lower bound on lambda_min(W) -------------------------------------------------

def gamma_objective(gamma, a: float, c: float, d: float):
    """(a + c (|gamma| - d)^2) / (gamma^2 + 1), vectorised over gamma."""
    g = np.abs(np.asarray(gamma, dtype=float))
    return (a + c * (g - d) ** 2) / (g * g + 1.0)


def minimize_gamma(a: float, c: float, d: float) -> tuple[float, float]:
    """Infimum over gamma of :func:`gamma_objective`, and where it is attained.

    The objective is even in gamma, so only gamma >= 0 is searched. Setting
    the derivative to zero gives ``c d g^2 + (c - c d^2 - a) g - c d = 0``;
    its nonnegative root is compared with ``g = 0`` and the ``g -> inf``
    limit ``c``. Returns ``(value, gamma)`` with ``gamma = inf`` when the
    infimum is the limit.
    """
    candidates = [(float(gamma_objective(0.0, a, c, d)), 0.0), (c, math.inf)]
    qa, qb, qc = c * d, c - c * d * d - a, -c * d
    if qa > 0.0:
        disc = qb * qb - 4.0 * qa * qc
        sq = math.sqrt(max(disc, 0.0))
        # numerically stable root pair; product of roots is -1 so exactly one is positive
        q = -0.5 * (qb + math.copysign(sq, qb)) if qb != 0.0 else -0.5 * sq
        roots = [q / qa, qc / q] if q != 0.0 else [sq / (2 * qa)]
        for r in roots:
            if r >= 0.0 and math.isfinite(r):
                candidates.append((float(gamma_objective(r, a, c, d)), r))
    # d == 0 (m = N): stationary only at g = 0, already a candidate
    value, gamma = min(candidates, key=lambda vg: vg[0])
    return value, gamma


def lemma1_lower_bound(cm: CaptureMatrixSet, *, return_gamma: bool = False):
    """Lower bound on lambda_min(W) from lambda_2(W1), m and N."""
    n, m = cm.n, cm.m
    if m < 1:
        raise InfeasibleBoundError("bound needs at least one sensing defender (m >= 1)")
    if n == 1:
        value, gamma = float(cm.w_sense[0, 0]), math.nan
    else:
        lam2 = cm.lambda2_w1
        if not is_connected(-cm.w_comm + np.diag(np.diag(cm.w_comm))):
            raise InfeasibleBoundError("communication graph is disconnected")
        value, gamma = minimize_gamma(lam2, m / n, math.sqrt((n - m) / m))
        value = min(value, m / n)
    return (value, gamma) if return_gamma else value
