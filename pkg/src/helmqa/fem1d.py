"""1D Helmholtz finite elements on [0, 1].

Lagrange elements of arbitrary order on a vertex mesh, Dirichlet at x=0
(eliminated) and natural Neumann at x=1. ``assemble`` builds every operator
the solvers need; ``homogeneous_gevp`` and ``normal_gevp`` turn a problem
into a symmetric-definite pencil.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .densela import NotPositiveDefinite, cholesky_factor
from .errors import NonConformingMesh, SingularOperator, UnsupportedOrder, ZeroSource

MAX_ORDER = 16
NODE_FAMILIES = ("gll", "equispaced")


def gll_nodes(p):
    """Gauss-Lobatto-Legendre nodes on [-1, 1]: the roots of (1-x^2) P'_p(x)."""
    if not 1 <= p <= MAX_ORDER:
        raise UnsupportedOrder(f"order must be in [1, {MAX_ORDER}], got {p}")
    if p == 1:
        return np.array([-1.0, 1.0])
    coef = np.zeros(p + 1)
    coef[p] = 1.0
    dcoef = legendre.legder(coef)
    ddcoef = legendre.legder(dcoef)
    x = np.sort(legendre.legroots(dcoef).real)
    for _ in range(3):  # Newton polish
        x -= legendre.legval(x, dcoef) / legendre.legval(x, ddcoef)
    x = 0.5 * (x - x[::-1])
    return np.concatenate(([-1.0], x, [1.0]))


def reference_nodes(p, family="gll"):
    if family == "gll":
        return gll_nodes(p)
    if family == "equispaced":
        if not 1 <= p <= MAX_ORDER:
            raise UnsupportedOrder(f"order must be in [1, {MAX_ORDER}], got {p}")
        return np.linspace(-1.0, 1.0, p + 1)
    raise ValueError(f"unknown node family {family!r}; expected one of {NODE_FAMILIES}")


def lagrange_basis(nodes, x):
    """Values and derivatives of the Lagrange cardinal polynomials.

    Returns two arrays of shape ``(len(x), len(nodes))``.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    val = np.ones((len(x), n))
    der = np.zeros((len(x), n))
    for j in range(n):
        others = [i for i in range(n) if i != j]
        denom = np.prod(nodes[j] - nodes[others])
        val[:, j] = np.prod(x[:, None] - nodes[others][None, :], axis=1) / denom
        for m in others:
            rest = [i for i in others if i != m]
            der[:, j] += np.prod(x[:, None] - nodes[rest][None, :], axis=1)
        der[:, j] /= denom
    return val, der


@dataclass(frozen=True)
class Mesh1D:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("mesh needs at least two vertices")
        if not np.all(np.diff(v) > 0):
            raise ValueError("mesh vertices must be strictly increasing")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError("mesh must span [0, 1]")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def uniform(cls, n_elements):
        if n_elements < 1:
            raise ValueError("need at least one element")
        return cls(np.linspace(0.0, 1.0, n_elements + 1))

    @property
    def element_count(self):
        return len(self.vertices) - 1


@dataclass(frozen=True)
class MaterialProfile:
    """Piecewise-constant wave speed; the default is vacuum | SiO2 at x=1/2."""

    c_left: float = 1.0
    c_right: float = 1.0 / np.sqrt(3.9)
    interface: float = 0.5

    def __post_init__(self):
        if not (self.c_left > 0 and self.c_right > 0):
            raise ValueError("wave speeds must be positive")

    @classmethod
    def homogeneous(cls, c=1.0):
        return cls(c_left=c, c_right=c)

    def speed(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.interface, self.c_left, self.c_right)

    def check_conforming(self, mesh):
        if self.c_left == self.c_right:
            return
        v = mesh.vertices
        inside = (v[:-1] < self.interface) & (self.interface < v[1:])
        if np.any(inside):
            e = int(np.argmax(inside))
            raise NonConformingMesh(
                f"interface x={self.interface} lies inside element {e} [{v[e]}, {v[e + 1]}]")

    def to_dict(self):
        return {"c_left": self.c_left, "c_right": self.c_right, "interface": self.interface}


def default_source(x):
    return np.sin(2.0 * np.pi * x)


def zero_source(x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class Gevp:
    """Symmetric-definite pencil ``H x = lam M x``.

    ``b`` is kept for pencils coming from the normal equations so the linear
    system solution can be recovered from the ground state.
    """

    H: np.ndarray
    M: np.ndarray
    kind: str = "generic"
    b: np.ndarray = None

    @property
    def dim(self):
        return self.H.shape[0]


@dataclass
class FeProblem:
    mesh: Mesh1D
    p: int
    k0: float
    material: MaterialProfile
    K: np.ndarray
    M: np.ndarray
    Ktilde: np.ndarray
    Mtilde: np.ndarray
    f: np.ndarray
    A_normal: np.ndarray
    b: np.ndarray
    nodes: str = "gll"
    meta: dict = field(default_factory=dict)

    @property
    def n_dof(self):
        return self.K.shape[0]

    @property
    def operator(self):
        """The (possibly indefinite) Helmholtz matrix K + M."""
        return self.K + self.M

    def dof_coordinates(self):
        ref = reference_nodes(self.p, self.nodes)
        v = self.mesh.vertices
        xs = [0.0]
        for e in range(self.mesh.element_count):
            a, b = v[e], v[e + 1]
            xs.extend(a + (ref[1:] + 1.0) * (b - a) / 2.0)
        return np.array(xs[1:])


def quadrature_points(p):
    """Gauss-Legendre rule exact for the degree-2p mass integrand plus margin."""
    return int(np.ceil((2 * p + 1) / 2)) + 1


def assemble(mesh, p, material=None, k0=0.0, source=default_source, nodes="gll"):
    """Assemble K, M, K~, M~, f and the normal equations for one mesh/order.

    ``K_ij = -int phi_i' phi_j'``, ``M_ij = int k^2 phi_i phi_j``,
    ``K~_ij = -int c^2 phi_i' phi_j'``, ``M~_ij = int phi_i phi_j`` and
    ``f_j = int f phi_j``, with ``k(x) = k0 / c(x)``. Global numbering runs
    left to right; the Dirichlet node at x=0 is dropped.
    """
    if isinstance(mesh, int):
        mesh = Mesh1D.uniform(mesh)
    material = material or MaterialProfile()
    material.check_conforming(mesh)
    ref = reference_nodes(p, nodes)
    xq, wq = legendre.leggauss(quadrature_points(p))
    val, der = lagrange_basis(ref, xq)

    n_el = mesh.element_count
    n_full = n_el * p + 1
    K = np.zeros((n_full, n_full))
    M = np.zeros((n_full, n_full))
    Kt = np.zeros((n_full, n_full))
    Mt = np.zeros((n_full, n_full))
    f = np.zeros(n_full)

    stiff_ref = (der.T * wq) @ der
    mass_ref = (val.T * wq) @ val
    for e in range(n_el):
        a, b = mesh.vertices[e], mesh.vertices[e + 1]
        jac = 0.5 * (b - a)
        c = float(material.speed(0.5 * (a + b)))
        k2 = (k0 / c) ** 2
        idx = slice(e * p, e * p + p + 1)
        ke = -stiff_ref / jac
        me = mass_ref * jac
        K[idx, idx] += ke
        M[idx, idx] += k2 * me
        Kt[idx, idx] += c * c * ke
        Mt[idx, idx] += me
        x = a + (xq + 1.0) * jac
        f[idx] += (val.T * wq) @ np.asarray(source(x), dtype=float) * jac

    keep = slice(1, None)
    K, M, Kt, Mt, f = K[keep, keep], M[keep, keep], Kt[keep, keep], Mt[keep, keep], f[keep]
    for mat in (K, M, Kt, Mt):
        mat += mat.T
        mat *= 0.5
    op = K + M
    return FeProblem(
        mesh=mesh, p=p, k0=float(k0), material=material,
        K=K, M=M, Ktilde=Kt, Mtilde=Mt, f=f,
        A_normal=op.T @ op, b=op.T @ f, nodes=nodes,
        meta={"source": getattr(source, "__name__", "custom")},
    )


def homogeneous_gevp(prob):
    """Eigenmode pencil ``(-K~, M~)``; its eigenvalues are omega^2 >= 0.

    The negation makes the lowest frequency the ground state. The eigenvalue
    in the ``K~ x = lam M~ x`` convention is ``-omega^2``.
    """
    return Gevp(H=-prob.Ktilde, M=prob.Mtilde, kind="homogeneous")


def normal_gevp(prob):
    """Rank-one pencil ``(-b b^T, A)`` from the normal equations ``A x = b``."""
    b = prob.b
    if np.linalg.norm(b) <= 1e-14:
        raise ZeroSource("right-hand side of the normal equations vanishes")
    try:
        cholesky_factor(prob.A_normal)
    except NotPositiveDefinite as exc:
        raise SingularOperator("normal-equation matrix is not SPD") from exc
    return Gevp(H=-np.outer(b, b), M=prob.A_normal, kind="normal", b=b.copy())


def frequencies(eigenvalues):
    """omega from the omega^2 eigenvalues of ``homogeneous_gevp``."""
    return np.sqrt(np.maximum(np.asarray(eigenvalues, dtype=float), 0.0))


# --- serialisation ---------------------------------------------------------

_MATRICES = ("K", "M", "Ktilde", "Mtilde", "A_normal")


def problem_to_dict(prob):
    out = {
        "N": prob.mesh.element_count,
        "p": prob.p,
        "k0": prob.k0,
        "nodes": prob.nodes,
        "material": prob.material.to_dict(),
        "vertices": prob.mesh.vertices.tolist(),
        "n_dof": prob.n_dof,
        "source": prob.meta.get("source", "custom"),
        "f": prob.f.tolist(),
        "b": prob.b.tolist(),
    }
    for name in _MATRICES:
        out[name] = getattr(prob, name).tolist()
    return out


def problem_from_dict(doc):
    return FeProblem(
        mesh=Mesh1D(np.array(doc["vertices"], dtype=float)),
        p=int(doc["p"]),
        k0=float(doc["k0"]),
        material=MaterialProfile(**doc["material"]),
        f=np.array(doc["f"], dtype=float),
        b=np.array(doc["b"], dtype=float),
        nodes=doc.get("nodes", "gll"),
        meta={"source": doc.get("source", "custom")},
        **{name: np.array(doc[name], dtype=float) for name in _MATRICES},
    )


def problem_to_json(prob, **kwargs):
    return json.dumps(problem_to_dict(prob), **kwargs)


def problem_from_json(text):
    return problem_from_dict(json.loads(text))
