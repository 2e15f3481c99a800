"""Objectives and synthetic data for the benchmark tasks.

Every objective is a function of the dense ambient matrix ``X``; the solvers feed it
``X = H V^T`` and the embedded tangent directions.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial.transform import Rotation

from .constraints import ConstraintManifold
from .errors import DegenerateGraphs, InvalidConfig, InvalidInput
from .linalg import polar_factor, qr_orthonormalize
from .manifold import MhPoint


@dataclass
class Objective:
    value: Callable
    egrad: Callable
    m: int
    n: int
    kind: str
    r: int
    ehess: Optional[Callable] = None
    name: str = "objective"
    data: dict = field(default_factory=dict, repr=False)

    @property
    def constraint(self):
        return ConstraintManifold.from_key(self.kind, self.m)

    def fd_check(self, rng, probes=20, h=1e-6):
        """Worst relative error of ``egrad`` and ``ehess`` against central differences.

        Probes are random ambient points and unit directions ``D``. The gradient error
        is ``|fd - <egrad, D>| / ||egrad||``, so a direction nearly orthogonal to the
        gradient does not turn rounding into a large ratio. ``nan`` is reported for
        the Hessian when the objective has none.
        """
        g_err = h_err = 0.0
        for _ in range(probes):
            X = rng.standard_normal((self.m, self.n)) / np.sqrt(self.n)
            D = rng.standard_normal((self.m, self.n))
            D /= np.linalg.norm(D)
            fd = (self.value(X + h * D) - self.value(X - h * D)) / (2 * h)
            G = self.egrad(X)
            an = float(np.vdot(G, D))
            g_err = max(g_err, abs(fd - an) / max(float(np.linalg.norm(G)), 1e-8))
            if self.ehess is not None:
                fd_h = (self.egrad(X + h * D) - self.egrad(X - h * D)) / (2 * h)
                an_h = self.ehess(X, D)
                scale = max(np.linalg.norm(an_h), np.linalg.norm(fd_h), 1e-8)
                h_err = max(h_err, float(np.linalg.norm(fd_h - an_h)) / scale)
        return g_err, (h_err if self.ehess is not None else float("nan"))


# -- spherical data fitting ---------------------------------------------------------

@dataclass
class MaskedFittingData:
    A: np.ndarray
    train: tuple
    test: tuple
    r_star: int

    def test_error(self, X):
        rows, cols = self.test
        return float(np.linalg.norm(X[rows, cols] - self.A[rows, cols])
                     / np.linalg.norm(self.A[rows, cols]))


def sample_count(m, n, r_star, oversampling):
    return int(round(oversampling * r_star * (m + n - r_star)))


def make_fitting(m, n, r_star, oversampling, seed=None, r=None):
    """Masked least squares fit of a rank-``r_star`` matrix with unit rows."""
    if not 1 <= r_star <= min(m, n):
        raise InvalidConfig(f"r_star={r_star} out of range for {m}x{n}")
    k = sample_count(m, n, r_star, oversampling)
    if k < 1 or 2 * k > m * n:
        raise InvalidConfig(f"{k} training entries cannot be paired with a disjoint test set "
                            f"inside {m}x{n}")
    rng = np.random.default_rng(seed)
    U = qr_orthonormalize(rng.standard_normal((m, r_star)))
    V = qr_orthonormalize(rng.standard_normal((n, r_star)))
    sigma = rng.uniform(0.0, 1.0, r_star)
    L = U * sigma
    A = (L / np.linalg.norm(L, axis=1, keepdims=True)) @ V.T
    picks = rng.choice(m * n, size=2 * k, replace=False)
    train = np.unravel_index(np.sort(picks[:k]), (m, n))
    test = np.unravel_index(np.sort(picks[k:]), (m, n))
    data = MaskedFittingData(A, train, test, r_star)

    mask = np.zeros((m, n))
    mask[train] = 1.0
    PA = mask * A

    def value(X):
        R = mask * X - PA
        return 0.5 * float(np.vdot(R, R))

    def egrad(X):
        return mask * X - PA

    def ehess(X, eta):
        return mask * eta

    obj = Objective(value, egrad, m, n, "oblique", r if r is not None else r_star, ehess,
                    name="fitting", data={"fitting": data})
    return data, obj


def fitting_start(data, r, omega, seed=None):
    """Initial point: Gaussian ``H`` when ``r == r_star``, else ``r`` random columns of ``A``."""
    rng = np.random.default_rng(seed)
    m, n = data.A.shape
    V = qr_orthonormalize(rng.standard_normal((n, r)))
    c = ConstraintManifold("oblique", m)
    if r == data.r_star:
        H = c.project_point(rng.standard_normal((m, r)))
    else:
        H = c.project_point(data.A[:, rng.choice(n, size=r, replace=False)])
    return MhPoint(c, H, V, omega)


# -- graph similarity ---------------------------------------------------------------

@dataclass
class GraphPair:
    A: sp.csr_array
    B: sp.csr_array

    def __post_init__(self):
        self.A = _adjacency(self.A)
        self.B = _adjacency(self.B)

    @property
    def shape(self):
        return self.A.shape[0], self.B.shape[0]


def _adjacency(M):
    M = sp.csr_array(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise InvalidInput("adjacency matrices must be square")
    if M.nnz and not np.all(M.data == 1.0):
        raise InvalidInput("adjacency entries must be 0 or 1")
    return M


def graph_similarity_operator(G, X):
    """``L(X) = A X B^T + A^T X B``: children-to-children plus parents-to-parents sums."""
    X = np.asarray(X, dtype=float)
    if X.shape != G.shape:
        raise InvalidInput(f"X has shape {X.shape}, graphs need {G.shape}")
    A, B = G.A, G.B
    return (B @ (A @ X).T).T + (B.T @ (A.T @ X).T).T


def make_graph_similarity(G, r):
    m, n = G.shape

    def L(X):
        return graph_similarity_operator(G, X)

    def value(X):
        LX = L(X)
        return -float(np.vdot(LX, LX))

    def egrad(X):
        return -2.0 * L(L(X))

    def ehess(X, eta):
        return -2.0 * L(L(eta))

    return Objective(value, egrad, m, n, "fsphere", r, ehess, name="graphsim",
                     data={"graphs": G})


def blondel_iterates(G, X0=None):
    """Normalized power iterates ``X_{k+1} = L(X_k) / ||L(X_k)||``, starting at ``X_0``."""
    m, n = G.shape
    X = np.full((m, n), 1.0 / np.sqrt(m * n)) if X0 is None else np.asarray(X0, dtype=float)
    while True:
        yield X
        LX = graph_similarity_operator(G, X)
        nrm = np.linalg.norm(LX)
        if nrm == 0.0:
            raise DegenerateGraphs("the similarity operator annihilates the iterate")
        X = LX / nrm


def blondel_similarity(G, iters=10000, tol=1e-12):
    """Limit of the even iterates from the normalized all-ones start.

    Stops once two consecutive even iterates agree to ``tol`` or after ``iters`` even
    steps, whichever comes first.
    """
    it = blondel_iterates(G)
    prev = next(it)
    for _ in range(iters):
        next(it)
        cur = next(it)
        if np.linalg.norm(cur - prev) <= tol:
            return cur
        prev = cur
    return prev


def graph_start(G, r, omega, seed=None):
    """The normalized all-ones matrix written as a point with ``r`` columns.

    This is the start of the power iteration, so the solver and the oracle begin from
    the same matrix. The leading column of ``V`` is the constant vector and ``H`` has
    rank one.
    """
    rng = np.random.default_rng(seed)
    m, n = G.shape
    V = qr_orthonormalize(np.column_stack([np.ones(n), rng.standard_normal((n, r - 1))]))
    H = np.zeros((m, r))
    H[:, 0] = 1.0 / np.sqrt(m)
    return MhPoint(ConstraintManifold("fsphere", m), H, V, omega)


def cycle_graph(m):
    rows = np.arange(m)
    return sp.csr_array((np.ones(m), (rows, (rows + 1) % m)), shape=(m, m))


def binomial_graph(n, p, rng):
    """Directed Erdos-Renyi graph without self loops."""
    M = (rng.random((n, n)) < p).astype(float)
    np.fill_diagonal(M, 0.0)
    return sp.csr_array(M)


def read_edge_list(path, size=None):
    """Adjacency from a text file of ``u v`` pairs (1-indexed); ``#`` starts a comment."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidInput(f"{path}:{lineno}: expected 'u v'")
            u, v = int(parts[0]), int(parts[1])
            if u < 1 or v < 1:
                raise InvalidInput(f"{path}:{lineno}: node ids are 1-indexed")
            edges.append((u - 1, v - 1))
    n = size if size is not None else (max(max(e) for e in edges) + 1 if edges else 0)
    M = sp.lil_array((n, n))
    for u, v in edges:
        M[u, v] = 1.0
    return sp.csr_array(M)


# -- rotation synchronization -------------------------------------------------------

def random_rotations(k, rng):
    return Rotation.random(k, random_state=rng).as_matrix()


def _sample_edges(n_cams, n_edges, connectivity_p, rng, retries=100):
    iu, ju = np.triu_indices(n_cams, 1)
    for _ in range(retries):
        if n_edges is not None:
            if n_edges > iu.size:
                raise InvalidConfig(f"{n_edges} edges exceed the {iu.size} camera pairs")
            pick = np.sort(rng.choice(iu.size, size=n_edges, replace=False))
        else:
            pick = np.flatnonzero(rng.random(iu.size) < connectivity_p)
        I, J = iu[pick], ju[pick]
        graph = sp.csr_array((np.ones(I.size), (I, J)), shape=(n_cams, n_cams))
        if connected_components(graph, directed=False)[0] == 1:
            return list(zip(I.tolist(), J.tolist()))
    raise InvalidConfig("measurement graph stayed disconnected after resampling")


@dataclass
class SyncData:
    rotations: np.ndarray
    edges: list
    measurements: dict
    C: np.ndarray


def make_synchronization(n_cams, noise_level=0.0, connectivity_p=None, seed=None,
                         n_edges=None):
    """Rotation synchronization ``min <C, X X^T>`` over stacked 3x3 orthogonal blocks.

    Measurements follow ``R_ij ~ R_i R_j^T`` (perturbed by a rotation whose rotation
    vector is Gaussian with standard deviation ``noise_level`` radians per axis), and
    the block ``C_ij = -R_ij`` rewards alignment; rotations are read off the row
    blocks of ``H``.
    """
    if n_edges is None and connectivity_p is None:
        raise InvalidConfig("give either n_edges or connectivity_p")
    rng = np.random.default_rng(seed)
    R = random_rotations(n_cams, rng)
    edges = _sample_edges(n_cams, n_edges, connectivity_p, rng)
    m = 3 * n_cams
    C = np.zeros((m, m))
    meas = {}
    for i, j in edges:
        Rij = R[i] @ R[j].T
        if noise_level > 0:
            Rij = Rij @ Rotation.from_rotvec(noise_level * rng.standard_normal(3)).as_matrix()
        meas[(i, j)] = Rij
        C[3 * i:3 * i + 3, 3 * j:3 * j + 3] = -Rij
    S = C + C.T

    def value(X):
        return float(np.vdot(C, X @ X.T))

    def egrad(X):
        return S @ X

    def ehess(X, eta):
        return S @ eta

    data = SyncData(R, edges, meas, C)
    obj = Objective(value, egrad, m, m, f"stiefel:{n_cams}x3", 3, ehess, name="sync",
                    data={"sync": data})
    return obj, data


def rotations_from_point(H):
    return np.asarray(H).reshape(-1, 3, 3)


def sync_start(obj, omega, seed=None):
    """Initial point with every row block of ``H`` drawn uniformly from SO(3)."""
    rng = np.random.default_rng(seed)
    k = obj.m // 3
    H = random_rotations(k, rng).reshape(obj.m, 3)
    V = qr_orthonormalize(rng.standard_normal((obj.n, 3)))
    return MhPoint(obj.constraint, H, V, omega)


def edge_errors(rotations, data):
    """``||R_i R_j^T - R_ij||_F`` for every measured edge."""
    return np.array([np.linalg.norm(rotations[i] @ rotations[j].T - data.measurements[(i, j)])
                     for i, j in data.edges])


def align_rotations(estimate, truth):
    """Estimate multiplied on the right by the orthogonal ``Q`` best matching ``truth``."""
    M = sum(e.T @ t for e, t in zip(estimate, truth))
    Q = polar_factor(M)
    return np.array([e @ Q for e in estimate])


# -- Markov chain state compression -------------------------------------------------

@dataclass
class MarkovData:
    Y: np.ndarray
    P: np.ndarray
    P_hat: np.ndarray


def make_markov(S, r_star, samples=10000, seed=None):
    """``min 1/2 ||X ⊙ X - P_hat||^2`` over oblique matrices (Hadamard parameterization).

    The truth is ``P = Y ⊙ Y`` where ``Y`` is a product of two entrywise nonnegative
    random factors of inner size ``r_star``, rows scaled to unit norm;
    ``P_hat`` holds empirical transition frequencies from ``samples`` draws per row
    (``samples=None`` gives ``P_hat = P``).
    """
    if not 1 <= r_star <= S:
        raise InvalidConfig(f"r_star={r_star} out of range for {S} states")
    rng = np.random.default_rng(seed)
    Y = rng.random((S, r_star)) @ rng.random((r_star, S))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    P = Y * Y
    if samples:
        counts = np.array([rng.multinomial(samples, row / row.sum()) for row in P], dtype=float)
        P_hat = counts / counts.sum(axis=1, keepdims=True)
    else:
        P_hat = P.copy()

    def value(X):
        R = X * X - P_hat
        return 0.5 * float(np.vdot(R, R))

    def egrad(X):
        return 2.0 * X * (X * X - P_hat)

    def ehess(X, eta):
        return 2.0 * eta * (X * X - P_hat) + 4.0 * X * X * eta

    data = MarkovData(Y, P, P_hat)
    obj = Objective(value, egrad, S, S, "oblique", r_star, ehess, name="markov",
                    data={"markov": data})
    return obj, data


def markov_start(obj, omega, r=None):
    """Spectral start: best rank-``r`` approximation of the entrywise root of ``P_hat``."""
    P_hat = obj.data["markov"].P_hat
    r = obj.r if r is None else r
    U, s, Vt = np.linalg.svd(np.sqrt(P_hat))
    c = obj.constraint
    return MhPoint(c, c.project_point(U[:, :r] * s[:r]), Vt[:r].T, omega)
