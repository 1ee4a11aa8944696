"""Graph calculus for the drift integrand.

The drift part of the error process integrates P Omega_s P with
P = (Id + (t-s) Theta_t) S^{1/2}.  Unfolding that integrand rests on two
exact expansions of resolvent entries against B_s = (Id - s m^2 S)^{-1}:
a loop expansion for a diagonal fluctuation (G_vv - m) f, and a vertex
expansion for a chain G_xu G_uy f.  Both are pathwise algebra for a fixed
Hermitian H; the only statistical statement in this module is
renormalize_expectation_check, which verifies that the renormalized
product  H_ab f - s S_ab d f / d H_ba  has mean zero under the Gaussian
band law.

Terms are small labeled graphs evaluated by tensor contraction.  Vertex
labels that are not declared free are summed over the full index range;
a bound label must have degree >= 2 or carry a diagonal marker, which is
the usual summation convention for these pictures.
"""

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .circulant import CirculantOperator
from .ensemble import BrownianFlow, sample_band_matrix
from .profiles import (
    ProfileSpec,
    b_matrix,
    diffusion_profile,
    sqrt_profile,
    variance_profile_pair,
)
from .semicircle import stieltjes_semicircle

__all__ = [
    "DiagramError",
    "Edge",
    "DiagramTerm",
    "EvalContext",
    "evaluate_diagram",
    "conjugate_diagram",
    "drift_integrand_term",
    "first_unfolding",
    "UnfoldedGraph",
    "expand1_check",
    "level2_check",
    "loop_expansion_check",
    "vertex_expansion_check",
    "renormalize_expectation_check",
    "derivative_fd_check",
    "BiasReport",
    "diagram_magnitudes",
    "MagnitudeReport",
    "contexts_along_flow",
]

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"

_EDGE_KINDS = frozenset({"G", "Gc", "S", "B", "Bc", "P", "HG", "HGc"})

_CONJ_KIND = {"G": "Gc", "Gc": "G", "B": "Bc", "Bc": "B",
              "S": "S", "P": "P", "HG": "HGc", "HGc": "HG"}


class DiagramError(ValueError):
    """Structurally invalid term: dangling label, unknown edge kind."""


@dataclass(frozen=True)
class Edge:
    kind: str
    tail: str
    head: str


@dataclass(frozen=True)
class DiagramTerm:
    """A labeled contraction graph with a scalar prefactor.

    deltas lists (label, conjugated) pairs, each contributing a factor
    G_ll - m (conjugated if flagged).  free names the labels whose values
    are supplied at evaluation time instead of being summed.
    """

    edges: tuple
    deltas: tuple = ()
    free: tuple = ("a", "b")
    prefactor: complex = 1.0 + 0.0j


@dataclass
class EvalContext:
    """One resolvent snapshot with the operators the graphs contract against.

    G is the resolvent of h at the moving spectral parameter
    w = z + (1 - s) m(z); the expansions close only at that parameter,
    which is where the self-consistency 1 + w m + s m^2 = 0 holds.
    """

    g: np.ndarray
    h: np.ndarray
    z: complex
    m: complex
    s: float
    t: float
    s_op: CirculantOperator
    s_half: CirculantOperator
    b_op: CirculantOperator
    theta: CirculantOperator
    w_band: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def w(self) -> complex:
        return self.z + (1.0 - self.s) * self.m

    @classmethod
    def from_matrix(cls, h, z, s, profile, t=1.0) -> "EvalContext":
        h = np.asarray(h)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"s must lie in [0, 1], got {s}")
        if not s <= t <= 1.0:
            raise ValueError(f"t must lie in [{s}, 1], got {t}")
        if isinstance(profile, ProfileSpec):
            s_op, s_half = variance_profile_pair(profile)
            w_band = profile.W
        else:
            s_op = profile
            s_half = sqrt_profile(profile)
            w_band = int(round(1.0 / float(np.max(s_op.first_row.real))))
        if h.shape != (s_op.N, s_op.N):
            raise ValueError(f"matrix shape {h.shape} does not match profile size {s_op.N}")
        scale = max(float(np.abs(h).max()), 1.0)
        if np.abs(h - h.conj().T).max() > 1e-9 * scale:
            raise ValueError("matrix is not Hermitian")
        m = stieltjes_semicircle(z)      # rejects Im z <= 0
        w = z + (1.0 - s) * m
        eye = np.eye(s_op.N, dtype=complex)
        g = np.linalg.solve(h - w * eye, eye)
        return cls(g=g, h=h.astype(complex), z=complex(z), m=m, s=float(s),
                   t=float(t), s_op=s_op, s_half=s_half,
                   b_op=b_matrix(s_op, m, s), theta=diffusion_profile(s_op, m, t),
                   w_band=w_band)

    @classmethod
    def from_sample(cls, profile, z, s, seed, t=1.0) -> "EvalContext":
        sample = sample_band_matrix(profile, s, seed)
        return cls.from_matrix(sample.H, z, s, profile, t=t)

    def edge_matrix(self, kind: str) -> np.ndarray:
        if kind not in _EDGE_KINDS:
            raise DiagramError(f"unknown edge kind {kind!r}")
        if kind not in self._cache:
            if kind == "G":
                mat = self.g
            elif kind == "Gc":
                mat = self.g.conj()
            elif kind == "S":
                mat = self.s_op.dense().real
            elif kind == "B":
                mat = self.b_op.dense()
            elif kind == "Bc":
                mat = self.edge_matrix("B").conj()
            elif kind == "P":
                eye = np.eye(self.n)
                mat = (eye + (self.t - self.s) * self.theta.dense().real) @ self.s_half.dense().real
            elif kind == "HG":
                mat = self.h @ self.g
            else:
                mat = self.edge_matrix("HG").conj()
            self._cache[kind] = mat
        return self._cache[kind]

    def delta_vector(self, conjugated: bool) -> np.ndarray:
        d = np.diagonal(self.g) - self.m
        return d.conj() if conjugated else d


def evaluate_diagram(term: DiagramTerm, ctx: EvalContext, a: int, b: int) -> complex:
    """Contract the graph over its bound labels with free labels at (a, b)."""
    if len(term.free) != 2:
        raise DiagramError(f"expected two free labels, got {term.free}")
    n = ctx.n
    for idx in (a, b):
        if not 0 <= idx < n:
            raise IndexError(f"free index {idx} outside [0, {n})")
    degree = Counter()
    for e in term.edges:
        if e.kind not in _EDGE_KINDS:
            raise DiagramError(f"unknown edge kind {e.kind!r}")
        degree[e.tail] += 1
        degree[e.head] += 1
    marked = Counter(lab for lab, _ in term.deltas)
    for lab in set(degree) | set(marked):
        if lab not in term.free and degree[lab] < 2 and marked[lab] == 0:
            raise DiagramError(f"dangling bound label {lab!r}")

    letters = {}

    def letter(lab):
        if lab not in letters:
            if len(letters) >= len(_LETTERS):
                raise DiagramError("too many labels")
            letters[lab] = _LETTERS[len(letters)]
        return letters[lab]

    subs, ops = [], []
    for e in term.edges:
        subs.append(letter(e.tail) + letter(e.head))
        ops.append(ctx.edge_matrix(e.kind))
    for lab, conjugated in term.deltas:
        subs.append(letter(lab))
        ops.append(ctx.delta_vector(conjugated))
    for lab, val in zip(term.free, (a, b)):
        hot = np.zeros(n)
        hot[val] = 1.0
        subs.append(letter(lab))
        ops.append(hot)
    out = np.einsum(",".join(subs) + "->", *ops, optimize="greedy")
    return complex(term.prefactor) * complex(out)


def conjugate_diagram(term: DiagramTerm) -> DiagramTerm:
    """Swap every factor for its conjugate; evaluation conjugates exactly."""
    edges = tuple(Edge(_CONJ_KIND[e.kind], e.tail, e.head) for e in term.edges)
    deltas = tuple((lab, not c) for lab, c in term.deltas)
    return replace(term, edges=edges, deltas=deltas,
                   prefactor=np.conj(term.prefactor))


def drift_integrand_term() -> DiagramTerm:
    """The graph P_ax conj(G)_xy G_xu G_uy S_uv (G_vv - m) P_yb.

    Together with its conjugate it reproduces [P Omega_s P]_ab.
    """
    return DiagramTerm(edges=(
        Edge("P", "a", "x"), Edge("Gc", "x", "y"), Edge("G", "x", "u"),
        Edge("G", "u", "y"), Edge("S", "u", "v"), Edge("P", "y", "b")),
        deltas=(("v", False),))


@dataclass(frozen=True)
class UnfoldedGraph:
    """A first-level graph plus the chain (xi -> u -> zeta) it is expanded at."""

    term: DiagramTerm
    u: str
    xi: str
    zeta: str


def first_unfolding() -> tuple:
    """The four main graphs produced by the loop expansion at the Delta vertex.

    Bare graphs: the m and s m prefactors they enter the decomposition with
    are applied by expand1_check.  The factor written G(beta, alpha) is the
    plain resolvent entry the derivative term of the loop expansion produces.
    """
    g1 = UnfoldedGraph(DiagramTerm(edges=(
        Edge("P", "a", "x"), Edge("Gc", "x", "y"), Edge("G", "x", "u"),
        Edge("G", "u", "y"), Edge("S", "u", "v"), Edge("B", "v", "alpha"),
        Edge("S", "alpha", "beta"), Edge("P", "y", "b")),
        deltas=(("alpha", False), ("beta", False))),
        u="u", xi="x", zeta="y")
    g2 = UnfoldedGraph(DiagramTerm(edges=(
        Edge("P", "a", "x"), Edge("G", "x", "u"), Edge("G", "u", "y"),
        Edge("S", "u", "v"), Edge("B", "v", "alpha"), Edge("S", "alpha", "beta"),
        Edge("G", "beta", "alpha"), Edge("Gc", "x", "alpha"),
        Edge("Gc", "beta", "y"), Edge("P", "y", "b"))),
        u="u", xi="x", zeta="y")
    g3 = UnfoldedGraph(DiagramTerm(edges=(
        Edge("P", "a", "x"), Edge("Gc", "x", "y"), Edge("G", "x", "beta"),
        Edge("G", "alpha", "u"), Edge("G", "u", "y"), Edge("S", "u", "v"),
        Edge("B", "v", "alpha"), Edge("S", "alpha", "beta"),
        Edge("G", "beta", "alpha"), Edge("P", "y", "b"))),
        u="u", xi="alpha", zeta="y")
    g4 = UnfoldedGraph(DiagramTerm(edges=(
        Edge("P", "a", "x"), Edge("Gc", "x", "y"), Edge("G", "x", "u"),
        Edge("G", "u", "beta"), Edge("G", "alpha", "y"), Edge("S", "u", "v"),
        Edge("B", "v", "alpha"), Edge("S", "alpha", "beta"),
        Edge("G", "beta", "alpha"), Edge("P", "y", "b"))),
        u="u", xi="x", zeta="beta")
    return (g1, g2, g3, g4)


def _f0(ctx: EvalContext, a: int, b: int) -> complex:
    """Fluctuation left over by the loop expansion of the drift graph."""
    g = ctx.g
    gc = ctx.edge_matrix("Gc")
    sm = ctx.edge_matrix("S")
    bm = ctx.edge_matrix("B")
    pm = ctx.edge_matrix("P")
    hg = ctx.edge_matrix("HG")
    pa, pb = pm[a], pm[:, b]
    dg = np.diagonal(g)
    # the drift graph with the Delta vertex cut open at alpha
    fvec = np.einsum("x,xy,xu,uy,uv,vi,y->i", pa, gc, g, g, sm, bm, pb,
                     optimize="greedy")
    out = np.einsum("i,i->", np.diagonal(hg), fvec)
    out += ctx.s * np.einsum("i,i,i->", dg, sm @ dg, fvec)
    # derivative through each of the three resolvent factors
    p1 = np.einsum("x,xi,jy,xu,uy,uv,vi,ij,ji,y->", pa, gc, gc, g, g, sm, bm,
                   sm, g, pb, optimize="greedy")
    p2 = np.einsum("x,xy,xj,iu,uy,uv,vi,ij,ji,y->", pa, gc, g, g, g, sm, bm,
                   sm, g, pb, optimize="greedy")
    p3 = np.einsum("x,xy,xu,uj,iy,uv,vi,ij,ji,y->", pa, gc, g, g, g, sm, bm,
                   sm, g, pb, optimize="greedy")
    out += ctx.s * (p1 + p2 + p3)
    return -ctx.m * complex(out)


def expand1_check(ctx: EvalContext, a: int, b: int) -> float:
    """Residual of the first unfolding of the drift graph at entry (a, b)."""
    lhs = evaluate_diagram(drift_integrand_term(), ctx, a, b)
    g1, g2, g3, g4 = first_unfolding()
    sm = ctx.s * ctx.m
    rhs = sm * evaluate_diagram(g1.term, ctx, a, b)
    rhs += sm * evaluate_diagram(g2.term, ctx, a, b)
    rhs += sm * evaluate_diagram(g3.term, ctx, a, b)
    rhs += sm * evaluate_diagram(g4.term, ctx, a, b)
    rhs += _f0(ctx, a, b)
    return abs(lhs - rhs)


def _derivative_split(term: DiagramTerm, gamma: str, delta: str) -> list:
    """d/dH_{delta gamma} applied to every resolvent factor of term.

    Each G_pq splits into -G_{p delta} G_{gamma q}, each conj(G)_pq into
    -conj(G)_{p gamma} conj(G)_{delta q}; diagonal markers split the same
    way and are consumed.  Deterministic edges (S, B, P) are untouched.
    """
    out = []
    for k, e in enumerate(term.edges):
        rest = term.edges[:k] + term.edges[k + 1:]
        if e.kind == "G":
            new = (Edge("G", e.tail, delta), Edge("G", gamma, e.head))
        elif e.kind == "Gc":
            new = (Edge("Gc", e.tail, gamma), Edge("Gc", delta, e.head))
        else:
            continue
        out.append(replace(term, edges=rest + new, prefactor=-term.prefactor))
    for k, (lab, conjugated) in enumerate(term.deltas):
        deltas = term.deltas[:k] + term.deltas[k + 1:]
        if conjugated:
            new = (Edge("Gc", lab, gamma), Edge("Gc", delta, lab))
        else:
            new = (Edge("G", lab, delta), Edge("G", gamma, lab))
        out.append(replace(term, edges=term.edges + new, deltas=deltas,
                           prefactor=-term.prefactor))
    return out


def _without_chain(graph: UnfoldedGraph) -> DiagramTerm:
    drop = (Edge("G", graph.xi, graph.u), Edge("G", graph.u, graph.zeta))
    edges = list(graph.term.edges)
    for e in drop:
        edges.remove(e)      # ValueError here means the metadata is wrong
    return replace(graph.term, edges=tuple(edges))


def _level2_terms(graph: UnfoldedGraph) -> dict:
    """Graph surgery for the vertex expansion at graph.u.

    Returns the main terms keyed "g0", "g1", "g2" and the derivative family
    "g3" (a list; one entry per resolvent factor of the remainder).
    """
    base = _without_chain(graph)
    u, xi, zeta = graph.u, graph.xi, graph.zeta
    g0 = replace(base, edges=base.edges + (
        Edge("G", xi, zeta), Edge("B", u, zeta)))
    stub = (Edge("B", u, "gam"), Edge("S", "gam", "del"))
    g1 = replace(base, edges=base.edges + stub + (
        Edge("G", xi, "gam"), Edge("G", "gam", zeta)),
        deltas=base.deltas + (("del", False),))
    g2 = replace(base, edges=base.edges + stub + (
        Edge("G", xi, "del"), Edge("G", "del", zeta)),
        deltas=base.deltas + (("gam", False),))
    g3 = [replace(split, edges=split.edges + stub + (
        Edge("G", xi, "gam"), Edge("G", "del", zeta)))
        for split in _derivative_split(base, "gam", "del")]
    return {"g0": g0, "g1": g1, "g2": g2, "g3": g3, "base": base}


def _second_fluctuation(ctx, graph: UnfoldedGraph, g3_value: complex,
                        a: int, b: int) -> complex:
    """Renormalized chain-through-u term of the vertex expansion."""
    base = _without_chain(graph)
    u, xi, zeta = graph.u, graph.xi, graph.zeta
    fa = replace(base, edges=base.edges + (
        Edge("B", u, "gam"), Edge("G", xi, "gam"), Edge("HG", "gam", zeta)))
    stub = (Edge("B", u, "gam"), Edge("S", "gam", "del"))
    fb = replace(base, edges=base.edges + stub + (
        Edge("G", xi, "del"), Edge("G", "gam", "gam"), Edge("G", "del", zeta)))
    fc = replace(base, edges=base.edges + stub + (
        Edge("G", "del", "del"), Edge("G", xi, "gam"), Edge("G", "gam", zeta)))
    out = evaluate_diagram(fa, ctx, a, b)
    out += ctx.s * (evaluate_diagram(fb, ctx, a, b)
                    + evaluate_diagram(fc, ctx, a, b))
    return out - ctx.s * g3_value


def level2_check(ctx: EvalContext, i: int, a: int, b: int) -> float:
    """Residual of the vertex expansion applied to main graph i in {1..4}."""
    if i not in (1, 2, 3, 4):
        raise ValueError(f"graph index must be 1..4, got {i}")
    graph = first_unfolding()[i - 1]
    lhs = evaluate_diagram(graph.term, ctx, a, b)
    parts = _level2_terms(graph)
    m, s = ctx.m, ctx.s
    g3_value = sum(evaluate_diagram(tm, ctx, a, b) for tm in parts["g3"])
    rhs = m * evaluate_diagram(parts["g0"], ctx, a, b)
    rhs += s * m * (evaluate_diagram(parts["g1"], ctx, a, b)
                    + evaluate_diagram(parts["g2"], ctx, a, b))
    rhs -= s * m * g3_value
    rhs -= m * _second_fluctuation(ctx, graph, g3_value, a, b)
    return abs(lhs - rhs)


def _f_library(ctx: EvalContext, f_spec):
    """Supported f choices: value and the matrix DF[beta, alpha] = df/dH_{beta alpha}."""
    g = ctx.g
    n = ctx.n
    if f_spec == "one":
        return 1.0 + 0.0j, np.zeros((n, n), dtype=complex)
    if f_spec == "trace":
        return np.trace(g) / n, -(g @ g).T / n
    kind, p, q = f_spec
    if kind == "g":
        return g[p, q], -np.outer(g[p], g[:, q])
    if kind == "gbar":
        gc = g.conj()
        return gc[p, q], -np.outer(gc[:, q], gc[p])
    raise ValueError(f"unsupported f choice {f_spec!r}")


def loop_expansion_check(ctx: EvalContext, v: int, f_spec="one") -> float:
    """Pathwise residual of the expansion of (G_vv - m) f against B_s."""
    fval, df = _f_library(ctx, f_spec)
    g = ctx.g
    sm = ctx.edge_matrix("S")
    bv = ctx.edge_matrix("B")[v]
    hg_diag = np.diagonal(ctx.edge_matrix("HG"))
    dg = np.diagonal(g)
    dvec = dg - ctx.m
    s, m = ctx.s, ctx.m
    lhs = dvec[v] * fval
    rhs = s * m * np.einsum("i,ij,i,j->", bv, sm, dvec, dvec) * fval
    rhs -= s * m * np.einsum("i,ij,ji,ji->", bv, sm, g, df)
    renorm = hg_diag * fval + s * dg * (sm @ dg) * fval \
        - s * np.einsum("ij,ji,ji->i", sm, g, df)
    rhs -= m * (bv @ renorm)
    return abs(lhs - rhs)


def vertex_expansion_check(ctx: EvalContext, x: int, y: int, u: int,
                           f_spec="one") -> float:
    """Pathwise residual of the expansion of G_xu G_uy f against B_s."""
    fval, df = _f_library(ctx, f_spec)
    g = ctx.g
    sm = ctx.edge_matrix("S")
    bu = ctx.edge_matrix("B")[u]
    hg = ctx.edge_matrix("HG")
    dg = np.diagonal(g)
    dvec = dg - ctx.m
    s, m = ctx.s, ctx.m
    gx, gy = g[x], g[:, y]
    lhs = g[x, u] * g[u, y] * fval
    rhs = m * ctx.edge_matrix("B")[u, y] * g[x, y] * fval
    rhs += s * m * np.einsum("i,ij,i,j,i->", bu, sm, gx, dvec, gy) * fval
    rhs += s * m * np.einsum("i,ij,j,i,j->", bu, sm, gx, dvec, gy) * fval
    rhs -= s * m * np.einsum("i,ij,i,j,ji->", bu, sm, gx, gy, df)
    renorm = gx * hg[:, y] * fval + s * dg * (sm @ (gx * gy)) * fval \
        + s * gx * gy * (sm @ dg) * fval \
        - s * gx * np.einsum("ij,j,ji->i", sm, gy, df)
    rhs -= m * (bu @ renorm)
    return abs(lhs - rhs)


@dataclass
class BiasReport:
    mean: complex
    se: float
    draws: int

    @property
    def within(self) -> float:
        """|mean| in units of one standard error."""
        return abs(self.mean) / self.se if self.se > 0 else float("inf")


def renormalize_expectation_check(profile, s: float, f_spec="one",
                                  draws: int = 1000, z=0.3 + 0.5j,
                                  alpha: int = 0, beta: int = 1,
                                  seed: int = 0) -> BiasReport:
    """Monte Carlo mean of the renormalized product H_{alpha beta} f.

    Gaussian integration by parts makes the expectation exactly zero;
    the returned report carries the empirical mean and its standard error.
    """
    if draws < 2:
        raise ValueError("need at least two draws for a standard error")
    samples = np.empty(draws, dtype=complex)
    s_entry = None
    for k in range(draws):
        ctx = EvalContext.from_sample(profile, z, s, seed=seed + k)
        if s_entry is None:
            s_entry = float(ctx.edge_matrix("S")[alpha, beta])
        fval, df = _f_library(ctx, f_spec)
        samples[k] = ctx.h[alpha, beta] * fval - s * s_entry * df[beta, alpha]
    mean = samples.mean()
    spread = float(np.sqrt(np.mean(np.abs(samples - mean) ** 2)))
    return BiasReport(mean=complex(mean), se=spread / np.sqrt(draws),
                      draws=draws)


def derivative_fd_check(ctx: EvalContext, x: int, y: int, beta: int,
                        alpha: int, eps: float = 1e-6) -> float:
    """Relative error of dG_xy/dH_{beta alpha} = -G_{x beta} G_{alpha y} vs a finite difference."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n = ctx.n
    bump = np.zeros((n, n), dtype=complex)
    bump[beta, alpha] = eps
    eye = np.eye(n, dtype=complex)
    g_eps = np.linalg.solve(ctx.h + bump - ctx.w * eye, eye)
    fd = (g_eps[x, y] - ctx.g[x, y]) / eps
    exact = -ctx.g[x, beta] * ctx.g[alpha, y]
    return abs(fd - exact) / max(abs(exact), 1e-300)


def contexts_along_flow(flow: BrownianFlow, z, t: float = 1.0) -> list:
    """EvalContexts at every node of a Brownian path, sharing (z, t)."""
    if flow.spec is None:
        raise ValueError("flow carries no profile spec; rebuild it from a ProfileSpec")
    return [EvalContext.from_matrix(flow.cumulative[k], z, float(flow.grid[k]),
                                    flow.spec, t=t)
            for k in range(len(flow.grid))]


@dataclass
class MagnitudeReport:
    g_abs: float          # integral over s of the max |graph_ab| over pairs
    f_abs: float
    target: float
    g_ratio: float
    f_ratio: float
    i: int
    j: int
    w_band: int
    im_w_final: float


def diagram_magnitudes(contexts, i: int, j: int,
                       pairs=((0, 0),)) -> MagnitudeReport:
    """Measured size of one second-level graph along a flow.

    Integrates |graph_ab(s)| ds by trapezoid over the context grid and
    compares against the drift envelope W^{-3/4} |Im w_t|^{-1} * W^{-1}
    |Im w_t|^{-1/2}.  Measurement only; nothing is asserted here.
    """
    if i not in (1, 2, 3, 4):
        raise ValueError(f"graph index must be 1..4, got {i}")
    if j not in (0, 1, 2, 3):
        raise ValueError(f"subgraph index must be 0..3, got {j}")
    if len(contexts) == 0:
        raise ValueError("need at least one context")
    if len(pairs) == 0:
        raise ValueError("need at least one entry pair")
    grid = np.array([ctx.s for ctx in contexts])
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("contexts must be ordered by strictly increasing s")
    graph = first_unfolding()[i - 1]
    parts = _level2_terms(graph)
    g_vals, f_vals = [], []
    for ctx in contexts:
        g_here, f_here = 0.0, 0.0
        for a, b in pairs:
            g3_value = sum(evaluate_diagram(tm, ctx, a, b)
                           for tm in parts["g3"])
            if j == 3:
                entry = g3_value
            else:
                entry = evaluate_diagram(parts[f"g{j}"], ctx, a, b)
            g_here = max(g_here, abs(entry))
            f_here = max(f_here, abs(_second_fluctuation(ctx, graph,
                                                         g3_value, a, b)))
        g_vals.append(g_here)
        f_vals.append(f_here)
    g_abs = float(np.trapezoid(g_vals, grid)) if len(grid) > 1 else 0.0
    f_abs = float(np.trapezoid(f_vals, grid)) if len(grid) > 1 else 0.0
    last = contexts[-1]
    im_w_final = float((last.z + (1.0 - last.t) * last.m).imag)
    wb = last.w_band
    target = wb ** -0.75 * im_w_final ** -1.0 * wb ** -1.0 * im_w_final ** -0.5
    return MagnitudeReport(g_abs=g_abs, f_abs=f_abs, target=target,
                           g_ratio=g_abs / target, f_ratio=f_abs / target,
                           i=i, j=j, w_band=wb, im_w_final=im_w_final)
