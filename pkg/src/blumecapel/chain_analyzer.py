"""Potential theory for finite reversible continuous-time Markov chains.

A chain is stored through its directed edges ``(i, j, log R(i, j))`` and
unnormalised log stationary weights ``log mu(i)``. Everything that can
underflow (weights, conductances, capacities) is kept in log form; the
linear systems are assembled in the row-normalised (jump chain) form
``(I - P)`` or in the symmetric form ``I - D^{-1/2} C D^{-1/2}``, both of
which have O(1) entries no matter how badly the Gibbs weights are scaled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .spin_lattice import ModelParams, SpinConfiguration, energy_parts_batch

DEFAULT_STATE_CAP = 20_000_000
RESIDUAL_TOL = 1e-12
DIRECT_SOLVE_LIMIT = 5000
ELIMINATION_LIMIT = 2000


class ChainError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class ChainModel:
    """Finite reversible chain.

    ``src``, ``dst``, ``log_rate`` list every directed transition with a
    positive rate. ``energies`` is optional and only used by
    :func:`saddle_height`.
    """

    keys: list
    src: np.ndarray
    dst: np.ndarray
    log_rate: np.ndarray
    log_mu: np.ndarray
    energies: np.ndarray | None = None
    beta: float | None = None
    params: ModelParams | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.log_rate = np.asarray(self.log_rate, dtype=float)
        self.log_mu = np.asarray(self.log_mu, dtype=float)
        if not (len(self.src) == len(self.dst) == len(self.log_rate)):
            raise ChainError("edge arrays have different lengths")
        if len(self.log_mu) != len(self.keys):
            raise ChainError("log_mu must have one entry per state")
        if np.any(self.src == self.dst):
            raise ChainError("self-loops are not allowed")

    # basic derived quantities -----------------------------------------
    @property
    def n(self) -> int:
        return len(self.keys)

    def index(self, key) -> int:
        lookup = self._cache.get("index")
        if lookup is None:
            lookup = self._cache["index"] = {k: i for i, k in enumerate(self.keys)}
        return lookup[key]

    def indices(self, states) -> np.ndarray:
        if isinstance(states, (int, np.integer)):
            states = [states]
        return np.unique(np.asarray(list(states), dtype=np.int64))

    @property
    def log_lambda(self) -> np.ndarray:
        if "log_lambda" not in self._cache:
            out = np.full(self.n, -np.inf)
            order = np.argsort(self.src, kind="stable")
            s, lr = self.src[order], self.log_rate[order]
            if len(s):
                starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
                peak = np.maximum.reduceat(lr, starts)
                peak_e = np.repeat(peak, np.diff(np.r_[starts, len(s)]))
                out[s[starts]] = peak + np.log(np.add.reduceat(np.exp(lr - peak_e), starts))
            self._cache["log_lambda"] = out
        return self._cache["log_lambda"]

    @property
    def log_Z(self) -> float:
        return float(logsumexp(self.log_mu))

    @property
    def log_M(self) -> np.ndarray:
        return self.log_mu + self.log_lambda

    def rate_matrix(self) -> sp.csr_matrix:
        """Off-diagonal rates R(i, j)."""
        if "R" not in self._cache:
            self._cache["R"] = sp.csr_matrix((np.exp(self.log_rate), (self.src, self.dst)), shape=(self.n, self.n))
        return self._cache["R"]

    def jump_matrix(self) -> sp.csr_matrix:
        """Jump probabilities p(i, j) = R(i, j) / lambda(i)."""
        if "P" not in self._cache:
            p = np.exp(self.log_rate - self.log_lambda[self.src])
            self._cache["P"] = sp.csr_matrix((p, (self.src, self.dst)), shape=(self.n, self.n))
        return self._cache["P"]

    def log_conductance(self) -> np.ndarray:
        return self.log_mu[self.src] + self.log_rate

    def neighbors(self):
        if "adj" not in self._cache:
            A = sp.csr_matrix((np.ones(len(self.src)), (self.src, self.dst)), shape=(self.n, self.n))
            self._cache["adj"] = (A.indptr, A.indices)
        return self._cache["adj"]

    def reversibility_defect(self) -> float:
        """Largest relative violation of mu(i) R(i,j) = mu(j) R(j,i) (log space)."""
        n = self.n
        fwd = self.src * n + self.dst
        rev = self.dst * n + self.src
        order = np.argsort(fwd)
        pos = np.searchsorted(fwd[order], rev)
        pos = np.clip(pos, 0, len(fwd) - 1)
        matched = fwd[order][pos] == rev
        if not matched.all():
            return math.inf
        lc = self.log_conductance()
        diff = np.abs(lc - lc[order][pos])
        return float(diff.max()) if len(diff) else 0.0

    def is_irreducible(self) -> bool:
        A = sp.csr_matrix((np.ones(len(self.src)), (self.src, self.dst)), shape=(self.n, self.n))
        ncomp, _ = sp.csgraph.connected_components(A, directed=True, connection="strong")
        return ncomp == 1


# ---------------------------------------------------------------------------
# construction


def chain_from_conductances(n: int, edges, log_mu=None, keys=None) -> ChainModel:
    """Reversible chain with symmetric conductances ``c(i, j) = mu(i) R(i, j)``."""
    log_mu = np.zeros(n) if log_mu is None else np.asarray(log_mu, dtype=float)
    src, dst, lr = [], [], []
    for i, j, c in edges:
        if i == j or c <= 0:
            raise ChainError(f"bad edge ({i}, {j}, {c})")
        lc = math.log(c)
        src += [i, j]
        dst += [j, i]
        lr += [lc - log_mu[i], lc - log_mu[j]]
    return ChainModel(list(range(n)) if keys is None else list(keys), src, dst, lr, log_mu)


def random_reversible_chain(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3, spread: float = 2.0) -> ChainModel:
    """Random connected graph with log-normal conductances and weights."""
    edges = {}
    order = rng.permutation(n)
    for k in range(1, n):
        i, j = int(order[k]), int(order[rng.integers(k)])
        edges[(min(i, j), max(i, j))] = None
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges[(i, j)] = None
    conds = [(i, j, float(math.exp(spread * rng.standard_normal()))) for i, j in sorted(edges)]
    log_mu = spread * rng.standard_normal(n)
    return chain_from_conductances(n, conds, log_mu)


def load_chain_json(text: str) -> ChainModel:
    """Parse ``{"states": [...], "edges": [[i, j, conductance], ...]}``.

    A state may be a bare name (weight 1) or ``{"name": ..., "mu": w,
    "energy": e}``.
    """
    doc = json.loads(text)
    states = doc["states"]
    keys, log_mu, energies = [], [], []
    for s in states:
        if isinstance(s, dict):
            keys.append(s.get("name", len(keys)))
            log_mu.append(math.log(float(s.get("mu", 1.0))))
            energies.append(s.get("energy"))
        else:
            keys.append(s)
            log_mu.append(0.0)
            energies.append(None)
    model = chain_from_conductances(len(keys), [tuple(e) for e in doc["edges"]], np.array(log_mu), keys)
    if all(e is not None for e in energies):
        model.energies = np.array(energies, dtype=float)
    return model


def dump_chain_json(model: ChainModel) -> str:
    lc = model.log_conductance()
    edges = [[int(i), int(j), float(math.exp(c))] for i, j, c in zip(model.src, model.dst, lc) if i < j]
    states = []
    for k, key in enumerate(model.keys):
        entry = {"name": key if isinstance(key, (str, int)) else str(key), "mu": float(math.exp(model.log_mu[k]))}
        if model.energies is not None:
            entry["energy"] = float(model.energies[k])
        states.append(entry)
    return json.dumps({"states": states, "edges": edges}, sort_keys=True)


def state_index(sigma: SpinConfiguration) -> int:
    """Base-3 index of a configuration, digit ``spin + 1`` at row-major site ``i``."""
    digits = (sigma.spins.reshape(-1).astype(np.int64) + 1)
    return int((digits * 3 ** np.arange(digits.size, dtype=np.int64)).sum())


def state_config(index: int, L: int) -> SpinConfiguration:
    digits = np.array([(index // 3**i) % 3 for i in range(L * L)], dtype=np.int8) - 1
    return SpinConfiguration(digits.reshape(L, L))


def enumerate_blume_capel(params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> ChainModel:
    """Full Blume-Capel chain on {-1,0,1}^(L x L) with Metropolis rates."""
    L = params.L
    N = L * L
    n = 3**N
    if n > cap:
        raise ChainError(f"3^{N} = {n} states exceeds the enumeration cap {cap}")
    idx = np.arange(n, dtype=np.int64)
    pows = 3 ** np.arange(N, dtype=np.int64)
    digits = (idx[:, None] // pows[None, :]) % 3
    spins = (digits - 1).astype(np.int8).reshape(n, L, L)
    bonds, spin = energy_parts_batch(spins)
    h = params.h
    energies = bonds - h * spin
    src, dst = [], []
    for i in range(N):
        for step in (1, -1):
            new = (digits[:, i] + step) % 3
            src.append(idx)
            dst.append(idx + (new - digits[:, i]) * pows[i])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    # exact integer-part differences, materialised once
    dE = (bonds[dst] - bonds[src]) - h * (spin[dst] - spin[src])
    beta = params.beta
    log_rate = -beta * np.maximum(dE, 0.0)
    model = ChainModel(list(range(n)), src, dst, log_rate, -beta * energies, energies, beta, params)
    model._cache["bonds"] = bonds
    model._cache["spin"] = spin
    return model


def _symmetry_images(L: int) -> list[np.ndarray]:
    """Site permutations of the torus: translations composed with the square's 8 isometries."""
    grid = np.arange(L * L).reshape(L, L)
    base = [grid, grid.T]
    base = [b for g in base for b in (g, g[::-1], g[:, ::-1], g[::-1, ::-1])]
    perms = []
    for b in base:
        for d1 in range(L):
            for d2 in range(L):
                perms.append(np.roll(b, (d1, d2), axis=(0, 1)).reshape(-1))
    return perms


def lump_by_symmetry(model: ChainModel) -> ChainModel:
    """Exact orbit chain of an enumerated lattice model under torus symmetries.

    Each orbit is represented by its smallest state index; its weight is
    ``|orbit| * mu(rep)`` and its rate to another orbit sums the rates from
    the representative. Capacities, hitting times and traces between
    invariant sets (for instance the uniform configurations) coincide with
    those of the full chain.
    """
    if model.params is None:
        raise ChainError("lumping needs an enumerated lattice model")
    L = model.params.L
    n = model.n
    N = L * L
    idx = np.arange(n, dtype=np.int64)
    pows = 3 ** np.arange(N, dtype=np.int64)
    digits = (idx[:, None] // pows[None, :]) % 3
    images = np.stack([digits[:, perm] @ pows for perm in _symmetry_images(L)])
    rep = images.min(axis=0)
    srt = np.sort(images, axis=0)
    orbit_size = 1 + np.count_nonzero(srt[1:] != srt[:-1], axis=0)
    reps = np.unique(rep)
    pos = np.full(n, -1, dtype=np.int64)
    pos[reps] = np.arange(len(reps))
    sel = rep[model.src] == model.src
    a = pos[model.src[sel]]
    b = pos[rep[model.dst[sel]]]
    lr = model.log_rate[sel]
    keep = a != b
    a, b, lr = a[keep], b[keep], lr[keep]
    pair = a * len(reps) + b
    order = np.argsort(pair, kind="stable")
    pair, lr = pair[order], lr[order]
    starts = np.flatnonzero(np.r_[True, pair[1:] != pair[:-1]])
    peak = np.maximum.reduceat(lr, starts)
    peak_e = np.repeat(peak, np.diff(np.r_[starts, len(lr)]))
    agg = peak + np.log(np.add.reduceat(np.exp(lr - peak_e), starts))
    ua, ub = np.divmod(pair[starts], len(reps))
    log_mu = model.log_mu[reps] + np.log(orbit_size[reps])
    energies = None if model.energies is None else model.energies[reps]
    out = ChainModel([int(r) for r in reps], ua, ub, agg, log_mu, energies, model.beta, model.params)
    out._cache["orbit_size"] = orbit_size[reps]
    return out


def enumerate_lumped(params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> ChainModel:
    return lump_by_symmetry(enumerate_blume_capel(params, cap))


def pure_state(L: int, value: int) -> int:
    return state_index(SpinConfiguration.uniform(L, value))


# ---------------------------------------------------------------------------
# linear algebra


@dataclass
class DirichletSolution:
    """Harmonic function equal to 1 on A and 0 on B."""

    h: np.ndarray
    residual: float
    A: np.ndarray
    B: np.ndarray


def _complement(n: int, *sets) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    for s in sets:
        mask[s] = False
    return np.nonzero(mask)[0]


def _solve(model: ChainModel, interior: np.ndarray, rhs: np.ndarray, method: str = "auto") -> tuple[np.ndarray, float]:
    """Solve ``(I - P)[I, I] x = rhs`` (rhs may have several columns)."""
    if len(interior) == 0:
        return np.zeros_like(rhs), 0.0
    P = model.jump_matrix()
    Pii = P[interior][:, interior]
    K = (sp.identity(len(interior), format="csc") - Pii).tocsc()
    if method == "auto":
        if len(interior) <= ELIMINATION_LIMIT:
            method = "elimination"
        elif len(interior) <= DIRECT_SOLVE_LIMIT:
            method = "direct"
        else:
            method = "iterative"
    if method == "elimination":
        Pd = Pii.toarray()
        boundary = np.ones(model.n, dtype=bool)
        boundary[interior] = False
        ext = np.asarray(P[interior][:, np.nonzero(boundary)[0]].sum(axis=1)).ravel()
        x = _solve_elimination(Pd, ext, rhs)
    elif method == "direct":
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise SolverError(f"singular system ({exc}); chain reducible on the interior?") from exc
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError("non-finite solution; chain reducible on the interior?")
    elif method == "iterative":
        x = _solve_iterative(K, rhs)
    elif method == "cg":
        x = _solve_cg(model, interior, rhs)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    res = K @ x - rhs
    residual = float(np.max(np.abs(res))) if res.size else 0.0
    return x, residual


def _solve_elimination(W: np.ndarray, ext: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Subtraction-free Gaussian elimination for ``x - W x = rhs``.

    ``W`` holds nonnegative jump probabilities among interior states and
    ``ext`` the probability of jumping to the boundary. States are removed
    one at a time; each pivot is recomputed as the total outflow of the
    reduced chain instead of ``1 - (self-loop)``, so no cancellation occurs
    and small hitting probabilities keep full relative accuracy.
    """
    W = W.astype(float, copy=True)
    np.fill_diagonal(W, 0.0)
    ext = np.asarray(ext, dtype=float).copy()
    b = np.array(rhs, dtype=float, copy=True)
    one_col = b.ndim == 1
    if one_col:
        b = b[:, None]
    n = W.shape[0]
    pivots = np.empty(n)
    for k in range(n):
        out = W[k, k + 1:].sum() + ext[k]
        if not out > 0:
            raise SolverError("zero outflow during elimination; chain reducible on the interior?")
        pivots[k] = out
        col = W[k + 1:, k] / out
        if not col.any():
            continue
        rows = np.nonzero(col)[0]
        c = col[rows]
        blk = W[k + 1:, k + 1:]
        blk[rows] += np.outer(c, W[k, k + 1:])
        blk[rows, rows] = 0.0
        ext[k + 1 + rows] += c * ext[k]
        b[k + 1 + rows] += c[:, None] * b[k]
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] + W[k, k + 1:] @ x[k + 1:]) / pivots[k]
    return x[:, 0] if one_col else x


def _solve_iterative(K: sp.csc_matrix, rhs: np.ndarray, maxiter: int = 2000) -> np.ndarray:
    """GMRES with an incomplete-LU preconditioner on ``I - P``."""
    ilu = spla.spilu(K, drop_tol=1e-6, fill_factor=20)
    M = spla.LinearOperator(K.shape, ilu.solve)
    cols = rhs if rhs.ndim == 2 else rhs[:, None]
    out = np.empty(cols.shape, dtype=float)
    for k in range(cols.shape[1]):
        x, info = spla.gmres(K, cols[:, k], M=M, rtol=1e-13, atol=0.0, restart=100, maxiter=maxiter)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
        out[:, k] = x
    return out if rhs.ndim == 2 else out[:, 0]


def _solve_cg(model: ChainModel, interior: np.ndarray, rhs: np.ndarray, maxiter: int = 100_000) -> np.ndarray:
    """Conjugate gradients on the symmetric scaling ``I - D^-1/2 C D^-1/2``."""
    lc = model.log_conductance()
    log_d = model.log_mu + model.log_lambda
    w = np.exp(lc - 0.5 * log_d[model.src] - 0.5 * log_d[model.dst])
    C = sp.csr_matrix((w, (model.src, model.dst)), shape=(model.n, model.n))[interior][:, interior]
    S = (sp.identity(len(interior), format="csr") - C).tocsr()
    # (I - P) x = r  <=>  S (D^1/2 x) = D^1/2 r ; rescale by max to avoid overflow
    half = 0.5 * log_d[interior]
    shift = half.max()
    scale = np.exp(half - shift)
    cols = rhs if rhs.ndim == 2 else rhs[:, None]
    out = np.empty_like(cols, dtype=float)
    for k in range(cols.shape[1]):
        y, info = spla.cg(S, scale * cols[:, k], rtol=1e-14, atol=0.0, maxiter=maxiter)
        if info != 0:
            raise SolverError(f"CG did not converge (info={info})")
        out[:, k] = y / scale
    return out if rhs.ndim == 2 else out[:, 0]


def equilibrium_potential(model: ChainModel, A, B, method: str = "auto") -> DirichletSolution:
    """``h(x) = P_x[H_A < H_B]`` with h = 1 on A and 0 on B."""
    A = model.indices(A)
    B = model.indices(B)
    if len(A) == 0 or len(B) == 0:
        raise ChainError("A and B must be nonempty")
    if np.intersect1d(A, B).size:
        raise ChainError("A and B must be disjoint")
    interior = _complement(model.n, A, B)
    P = model.jump_matrix()
    rhs = np.asarray(P[interior][:, A].sum(axis=1)).ravel()
    x, residual = _solve(model, interior, rhs, method)
    h = np.zeros(model.n)
    h[A] = 1.0
    h[interior] = x
    return DirichletSolution(h, residual, A, B)


def _escape(model: ChainModel, x: int, values: np.ndarray) -> float:
    """sum_y p(x, y) values(y)."""
    P = model.jump_matrix()
    row = P.getrow(x)
    return float(row.data @ values[row.indices])


def hitting_probability(model: ChainModel, A, B, x: int, method: str = "auto") -> float:
    """``P_x[H_A < H_B]`` for ``x`` outside ``A`` and ``B``."""
    sol = equilibrium_potential(model, A, B, method)
    if x in sol.A or x in sol.B:
        raise ChainError("x must lie outside A and B")
    return float(sol.h[x])


def hitting_identity(model: ChainModel, A, B, x: int, method: str = "auto") -> dict:
    """Both sides of ``P_x[H_A<H_B] = P_x[H_A<H+_{B+x}] / P_x[H_{A+B}<H+_x]``."""
    A = model.indices(A)
    B = model.indices(B)
    lhs = hitting_probability(model, A, B, x, method)
    Bx = np.union1d(B, [x])
    num = _escape(model, x, equilibrium_potential(model, A, Bx, method).h)
    AB = np.union1d(A, B)
    den = _escape(model, x, equilibrium_potential(model, AB, [x], method).h)
    return {"lhs": lhs, "numerator": num, "denominator": den, "rhs": num / den, "residual": abs(lhs - num / den)}


@dataclass
class CapacityResult:
    """Capacity from the escape-probability sum and from the Dirichlet form."""

    log_probabilistic: float
    log_dirichlet: float
    residual: float

    @property
    def log_value(self) -> float:
        return self.log_probabilistic

    @property
    def value(self) -> float:
        return math.exp(self.log_probabilistic)

    @property
    def probabilistic(self) -> float:
        return math.exp(self.log_probabilistic)

    @property
    def dirichlet(self) -> float:
        return math.exp(self.log_dirichlet)

    @property
    def relative_gap(self) -> float:
        return abs(math.expm1(self.log_dirichlet - self.log_probabilistic))


def _log_sum_weighted(log_w: np.ndarray, vals: np.ndarray) -> float:
    keep = vals > 0
    if not keep.any():
        return -math.inf
    return float(logsumexp(log_w[keep], b=vals[keep]))


def capacity(model: ChainModel, A, B, method: str = "auto", normalized: bool = False) -> CapacityResult:
    """``Cap(A, B)`` computed two independent ways.

    Route 1 sums ``M(x) P_x[H_B < H_A^+]`` over ``x`` in A using the
    potential of (B, A). Route 2 evaluates the Dirichlet form
    ``1/2 sum mu(i) R(i,j) (h(i) - h(j))^2`` of the (A, B) potential.
    Unnormalised weights are used unless ``normalized`` is set.
    """
    A = model.indices(A)
    B = model.indices(B)
    f = equilibrium_potential(model, B, A, method)  # f = P[H_B < H_A]
    in_a = np.zeros(model.n, dtype=bool)
    in_a[A] = True
    lc = model.log_conductance()
    sel = in_a[model.src]
    log_route1 = _log_sum_weighted(lc[sel], f.h[model.dst[sel]])
    g = equilibrium_potential(model, A, B, method)
    diff2 = (g.h[model.src] - g.h[model.dst]) ** 2
    log_route2 = _log_sum_weighted(lc, diff2) + math.log(0.5)
    shift = model.log_Z if normalized else 0.0
    return CapacityResult(log_route1 - shift, log_route2 - shift, max(f.residual, g.residual))


@dataclass
class HittingTimeResult:
    fundamental: float
    capacity_formula: float
    residual: float

    @property
    def relative_gap(self) -> float:
        return abs(self.capacity_formula - self.fundamental) / abs(self.fundamental)


def mean_absorption_times(model: ChainModel, B, method: str = "auto") -> tuple[np.ndarray, float]:
    """``E_x[H_B]`` for every x (zero on B) from the linear system."""
    B = model.indices(B)
    interior = _complement(model.n, B)
    rhs = np.exp(-model.log_lambda[interior])
    x, residual = _solve(model, interior, rhs, method)
    t = np.zeros(model.n)
    t[interior] = x
    # residual relative to the holding times on the right-hand side
    return t, residual / float(np.max(rhs))


def capacity_time_sum(model: ChainModel, x: int, B, restrict_to=None, method: str = "auto") -> float:
    """``Cap(x,B)^-1 sum_y mu(y) P_y[H_x < H_B]``, optionally over a subset of y."""
    B = model.indices(B)
    cap = capacity(model, [x], B, method)
    u = equilibrium_potential(model, [x], B, method).h
    if restrict_to is not None:
        mask = np.zeros(model.n, dtype=bool)
        mask[model.indices(restrict_to)] = True
        u = np.where(mask, u, 0.0)
    return math.exp(_log_sum_weighted(model.log_mu, u) - cap.log_probabilistic)


def expected_hitting_time(model: ChainModel, x: int, B, method: str = "auto") -> HittingTimeResult:
    """``E_x[H_B]`` by the fundamental-matrix solve and by the capacity formula."""
    B = model.indices(B)
    if x in B:
        raise ChainError("x must not belong to B")
    t, residual = mean_absorption_times(model, B, method)
    return HittingTimeResult(float(t[x]), capacity_time_sum(model, x, B, method=method), residual)


# ---------------------------------------------------------------------------
# saddle heights


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, v):
        p = self.parent
        while p[v] != v:
            p[v] = p[p[v]]
            v = p[v]
        return v

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def saddle_height(model: ChainModel, A, B, energies=None) -> tuple[float, list[int]]:
    """Minimax energy over paths from A to B, with a witness path.

    States are switched on in order of increasing energy and merged with
    their switched-on neighbours; the height is the energy of the state
    whose activation first joins A and B.
    """
    E = model.energies if energies is None else np.asarray(energies, dtype=float)
    if E is None:
        raise ChainError("saddle_height needs state energies")
    A = model.indices(A)
    B = model.indices(B)
    if np.intersect1d(A, B).size:
        raise ChainError("A and B must be disjoint")
    n = model.n
    indptr, indices = model.neighbors()
    sa, sb = n, n + 1
    uf = _UnionFind(n + 2)
    in_a = np.zeros(n, dtype=bool)
    in_a[A] = True
    in_b = np.zeros(n, dtype=bool)
    in_b[B] = True
    active = np.zeros(n, dtype=bool)
    height = None
    for v in np.argsort(E, kind="stable"):
        v = int(v)
        active[v] = True
        if in_a[v]:
            uf.union(sa, v)
        if in_b[v]:
            uf.union(sb, v)
        for w in indices[indptr[v]:indptr[v + 1]]:
            if active[w]:
                uf.union(v, int(w))
        if uf.find(sa) == uf.find(sb):
            height = float(E[v])
            break
    if height is None:
        raise ChainError("A and B are disconnected")
    # witness: breadth-first search inside the active subgraph
    allowed = active
    prev = {int(a): -1 for a in A}
    frontier = list(prev)
    target = None
    while frontier and target is None:
        nxt = []
        for v in frontier:
            for w in indices[indptr[v]:indptr[v + 1]]:
                w = int(w)
                if not allowed[w] or w in prev or in_a[w]:
                    continue
                prev[w] = v
                if in_b[w]:
                    target = w
                    break
                nxt.append(w)
            if target is not None:
                break
        frontier = nxt
    path = [target]
    while prev[path[-1]] != -1:
        path.append(prev[path[-1]])
    return height, path[::-1]


# ---------------------------------------------------------------------------
# trace chains


def trace_rate_matrix(model: ChainModel, A, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Dense rates ``r(x, y) = lambda(x) P_x[H_y = H^+_A]`` of the trace on A."""
    A = model.indices(A)
    if len(A) < 2:
        raise ChainError("trace needs at least two states")
    Ac = _complement(model.n, A)
    R = model.rate_matrix()
    RAA = R[A][:, A].toarray()
    if len(Ac):
        P = model.jump_matrix()
        rhs = P[Ac][:, A].toarray()
        U, _ = _solve(model, Ac, rhs, method)  # U[z, y] = P_z[H_A = H_y]
        rates = RAA + R[A][:, Ac] @ U
    else:
        rates = RAA
    np.fill_diagonal(rates, 0.0)
    return A, np.asarray(rates)


def trace_chain(model: ChainModel, A, method: str = "auto") -> ChainModel:
    A, rates = trace_rate_matrix(model, A, method)
    src, dst = np.nonzero(rates > 0)
    keys = [model.keys[i] for i in A]
    energies = None if model.energies is None else model.energies[A]
    return ChainModel(keys, src, dst, np.log(rates[src, dst]), model.log_mu[A], energies, model.beta, model.params)


def generator_matrix(model: ChainModel) -> np.ndarray:
    Q = model.rate_matrix().toarray()
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def stationary_distribution(model: ChainModel) -> np.ndarray:
    """Normalised null vector of the generator (dense; small chains only)."""
    Q = generator_matrix(model)
    n = Q.shape[0]
    M = np.vstack([Q.T, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return pi


def conditioned_measure(model: ChainModel, A) -> np.ndarray:
    A = model.indices(A)
    lm = model.log_mu[A]
    return np.exp(lm - logsumexp(lm))


# ---------------------------------------------------------------------------
# reduced three-state chain


@dataclass
class ReducedRates:
    theta: float
    log_theta: float
    rates: dict
    labels: tuple = (-1, 0, 1)

    def table(self) -> list[list[float]]:
        return [[self.rates.get((a, b), 0.0) for b in self.labels] for a in self.labels]


def reduced_rates(model: ChainModel, params: ModelParams | None = None, method: str = "auto") -> ReducedRates:
    """Rates of the trace on {-1, 0, +1} in units of ``theta = mu(-1) / Cap(-1, {0, +1})``."""
    params = params or model.params
    if params is None:
        raise ChainError("reduced_rates needs model parameters")
    L = params.L
    M = {v: model.index(pure_state(L, v)) for v in (-1, 0, 1)}
    cap = capacity(model, [M[-1]], [M[0], M[1]], method)
    log_theta = float(model.log_mu[M[-1]] - cap.log_probabilistic)
    order = [M[-1], M[0], M[1]]
    A, rates = trace_rate_matrix(model, order, method)
    pos = {int(s): k for k, s in enumerate(A)}
    theta = math.exp(log_theta)
    out = {}
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            if a != b:
                out[(a, b)] = theta * float(rates[pos[M[a]], pos[M[b]]])
    return ReducedRates(theta, log_theta, out)


def result_record(quantity: str, value: float, log_value: float | None = None, residual: float | None = None, method: str = "direct") -> dict:
    """JSON-ready record ``{quantity, value, log_value, residual, method}``."""
    if log_value is None and value > 0:
        log_value = math.log(value)
    return {"quantity": quantity, "value": value, "log_value": log_value, "residual": residual, "method": method}
