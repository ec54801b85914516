"""Linear elasticity on simplicial meshes with first-order elements.

Degrees of freedom are numbered node-major: ``dof = node * dim + component``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DegenerateElement, SingularSystem, SolverDiverged
from .geometry import DIRICHLET, NEUMANN, Mesh, facet_measures

DIRECT_SOLVE_MAX_DOFS = 20000
CG_RTOL = 1e-10


@dataclass(frozen=True)
class MaterialParams:
    """Lame constants and mode-I fracture toughness."""

    lam: float
    mu: float
    k_ic: float

    def __post_init__(self):
        for name in ("lam", "mu", "k_ic"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"material parameter {name} must be positive, got {v!r}")

    @classmethod
    def from_engineering(cls, young: float, poisson: float, k_ic: float) -> "MaterialParams":
        lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
        mu = young / (2 * (1 + poisson))
        return cls(lam, mu, k_ic)


@dataclass(frozen=True)
class LoadCase:
    """Volume force ``f`` and traction ``g`` on the fixed-Neumann facets.

    Each may be a single vector or one vector per element (``f``) or per
    Neumann facet (``g``, in the order of ``mesh.tagged("N")``).
    """

    f: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None

    def scaled(self, t: float) -> "LoadCase":
        return LoadCase(None if self.f is None else t * np.asarray(self.f, float),
                        None if self.g is None else t * np.asarray(self.g, float))


@dataclass(frozen=True)
class DirichletSpec:
    """Componentwise displacement constraints ``u[node, comp] = value``.

    ``constraints`` is a sequence of ``(nodes, components, value)``.
    """

    constraints: tuple = ()

    @classmethod
    def clamped(cls, mesh: Mesh) -> "DirichletSpec":
        """All components fixed to zero on the Dirichlet-tagged boundary."""
        return cls(((mesh.tagged_nodes(DIRICHLET), tuple(range(mesh.dim)), 0.0),))

    @classmethod
    def roller(cls, mesh: Mesh) -> "DirichletSpec":
        """``u_x = 0`` on the Dirichlet face plus the fewest pins that remove rigid motions.

        The pins leave lateral contraction free, so a uniform traction on the
        opposite face produces an exactly uniform uniaxial stress.
        """
        nodes = mesh.tagged_nodes(DIRICHLET)
        pts = mesh.nodes[nodes]
        base = (nodes, (0,), 0.0)
        if mesh.dim == 2:
            anchor = nodes[np.argmin(pts[:, 1])]
            return cls((base, (anchor, (1,), 0.0)))
        order = np.lexsort((pts[:, 2], pts[:, 1]))
        anchor = nodes[order[0]]
        same_y = np.isclose(pts[:, 1], pts[order[0], 1])
        second = nodes[np.flatnonzero(same_y)[np.argmax(pts[same_y, 2])]]
        return cls((base, (anchor, (1, 2), 0.0), (second, (1,), 0.0)))

    def resolve(self, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
        """Constrained dof indices and their prescribed values."""
        values = {}
        for nodes, comps, val in self.constraints:
            for n in np.atleast_1d(nodes).tolist():
                for c in np.atleast_1d(comps).tolist():
                    if not 0 <= c < mesh.dim or not 0 <= n < mesh.n_nodes:
                        raise ConfigError(f"invalid constraint (node={n}, component={c})")
                    values[n * mesh.dim + c] = float(val)
        dofs = np.array(sorted(values), dtype=np.int64)
        return dofs, np.array([values[d] for d in dofs.tolist()])


@dataclass(frozen=True, eq=False)
class DisplacementField:
    values: np.ndarray  # (n_nodes, dim)
    residual: float = 0.0
    iterations: int = 0
    method: str = "direct"


@dataclass(frozen=True, eq=False)
class StressField:
    """Element-constant symmetric stress tensors, shape ``(n_elements, dim, dim)``."""

    tensors: np.ndarray

    @property
    def dim(self) -> int:
        return self.tensors.shape[1]

    def max_principal(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.tensors)[:, -1]

    def scaled(self, t: float) -> "StressField":
        return StressField(t * self.tensors)


def shape_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the barycentric basis functions, shape ``(E, dim + 1, dim)``."""
    p = mesh.nodes[mesh.elements]
    jac = np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))
    det = np.linalg.det(jac)
    if (np.abs(det) < 1e-300).any():
        raise DegenerateElement("singular element Jacobian")
    inv = np.linalg.inv(jac)
    grads = np.empty((mesh.n_elements, mesh.dim + 1, mesh.dim))
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    return grads


def element_stiffness(grads: np.ndarray, vols: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Element matrices ``(E, nv*dim, nv*dim)`` of the bilinear form int eps(u):sigma(v)."""
    E, nv, dim = grads.shape
    eye = np.eye(dim)
    gg = np.einsum("eak,ebk->eab", grads, grads)
    k = (mat.lam * np.einsum("eai,ebj->eaibj", grads, grads)
         + mat.mu * np.einsum("eaj,ebi->eaibj", grads, grads)
         + mat.mu * np.einsum("eab,ij->eaibj", gg, eye))
    return (vols[:, None, None, None, None] * k).reshape(E, nv * dim, nv * dim)


def element_dofs(mesh: Mesh) -> np.ndarray:
    d = mesh.dim
    return (mesh.elements[:, :, None] * d + np.arange(d)).reshape(mesh.n_elements, -1)


def assemble_stiffness(mesh: Mesh, mat: MaterialParams) -> sp.csr_matrix:
    """Global stiffness matrix (symmetric, positive semidefinite before constraints)."""
    ke = element_stiffness(shape_gradients(mesh), mesh.element_volumes, mat)
    dofs = element_dofs(mesh)
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    n = mesh.n_nodes * mesh.dim
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def assemble_load(mesh: Mesh, load: LoadCase) -> np.ndarray:
    """Load vector with one-point volume quadrature and exact constant-traction facets."""
    dim, nv = mesh.dim, mesh.dim + 1
    F = np.zeros((mesh.n_nodes, dim))
    if load.f is not None:
        f = np.broadcast_to(np.asarray(load.f, float), (mesh.n_elements, dim))
        share = f * (mesh.element_volumes / nv)[:, None]
        for a in range(nv):
            np.add.at(F, mesh.elements[:, a], share)
    if load.g is not None:
        nf = mesh.tagged(NEUMANN)
        g = np.broadcast_to(np.asarray(load.g, float), (len(nf), dim))
        share = g * (facet_measures(mesh.nodes, nf) / dim)[:, None]
        for a in range(dim):
            np.add.at(F, nf[:, a], share)
    return F.ravel()


def _rigid_modes(mesh: Mesh) -> np.ndarray:
    """Columns spanning the rigid displacements (translations and infinitesimal rotations)."""
    x = mesh.nodes - mesh.nodes.mean(axis=0)
    d, n = mesh.dim, mesh.n_nodes
    modes = []
    for i in range(d):
        m = np.zeros((n, d))
        m[:, i] = 1.0
        modes.append(m)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((n, d))
            m[:, i], m[:, j] = -x[:, j], x[:, i]
            modes.append(m)
    return np.column_stack([m.ravel() for m in modes])


def solve_state(mesh: Mesh, mat: MaterialParams, load: LoadCase,
                dirichlet: Optional[DirichletSpec] = None, solver: str = "auto",
                maxiter: Optional[int] = None) -> DisplacementField:
    """Solve the constrained linear elasticity system by row/column elimination.

    ``solver`` is ``"direct"``, ``"cg"`` (Jacobi-preconditioned conjugate
    gradients, relative tolerance 1e-10) or ``"auto"`` (direct below
    ``DIRECT_SOLVE_MAX_DOFS`` free dofs).
    """
    dirichlet = dirichlet or DirichletSpec.clamped(mesh)
    fixed, vals = dirichlet.resolve(mesh)
    R = _rigid_modes(mesh)[fixed]
    if len(fixed) == 0 or np.linalg.matrix_rank(R, tol=1e-10 * max(1.0, np.abs(R).max())) < R.shape[1]:
        raise SingularSystem("Dirichlet constraints do not suppress all rigid motions")

    K = assemble_stiffness(mesh, mat)
    F = assemble_load(mesh, load)
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    u = np.zeros(n)
    u[fixed] = vals
    Kff = K[free][:, free].tocsc()
    rhs = F[free] - K[free][:, fixed] @ vals

    method = solver if solver != "auto" else ("direct" if len(free) <= DIRECT_SOLVE_MAX_DOFS else "cg")
    iterations = 0
    if not rhs.any():
        sol = np.zeros(len(free))
    elif method == "direct":
        sol = spla.spsolve(Kff, rhs)
    elif method == "cg":
        diag = Kff.diagonal()
        M = spla.LinearOperator(Kff.shape, matvec=lambda r: r / diag)
        count = [0]

        def _tick(_):
            count[0] += 1

        sol, info = spla.cg(Kff, rhs, rtol=CG_RTOL, atol=0.0, M=M,
                            maxiter=maxiter or 10 * len(free), callback=_tick)
        iterations = count[0]
        if info > 0:
            raise SolverDiverged(f"CG reached the iteration cap ({info}) without converging")
        if info < 0:
            raise SolverDiverged("CG breakdown")
    else:
        raise ConfigError(f"unknown solver {solver!r}")
    if not np.isfinite(sol).all():
        raise SingularSystem("linear solve produced non-finite values")
    u[free] = sol
    bnorm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(Kff @ sol - rhs) / bnorm) if bnorm > 0 else 0.0
    return DisplacementField(u.reshape(-1, mesh.dim), res, iterations, method)


def displacement_gradient(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Element-constant Jacobian ``Du``, shape ``(E, dim, dim)``."""
    u = np.asarray(getattr(u, "values", u)).reshape(mesh.n_nodes, mesh.dim)
    return np.einsum("eai,eaj->eij", u[mesh.elements], shape_gradients(mesh))


def strain(du: np.ndarray) -> np.ndarray:
    return 0.5 * (du + np.swapaxes(du, -1, -2))


def constitutive(eps: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """``lam tr(eps) I + 2 mu eps`` for a stack of strain tensors."""
    dim = eps.shape[-1]
    tr = np.trace(eps, axis1=-2, axis2=-1)
    return mat.lam * tr[..., None, None] * np.eye(dim) + 2 * mat.mu * eps


def compute_stress(mesh: Mesh, mat: MaterialParams, u) -> StressField:
    sig = constitutive(strain(displacement_gradient(mesh, u)), mat)
    return StressField(0.5 * (sig + np.swapaxes(sig, -1, -2)))


def energy_residual(mesh: Mesh, mat: MaterialParams, load: LoadCase, u) -> float:
    """Relative gap ``|B(u,u) - F.u| / |F.u|``; zero for homogeneous constraints."""
    vec = np.asarray(getattr(u, "values", u)).ravel()
    K = assemble_stiffness(mesh, mat)
    F = assemble_load(mesh, load)
    work = float(F @ vec)
    energy = float(vec @ (K @ vec))
    return abs(energy - work) / abs(work) if work != 0 else abs(energy)


def write_triplets(matrix: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as ``row col value`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(Path(path), "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_triplets(path) -> sp.csr_matrix:
    rows = Path(path).read_text().split("\n")
    nr, nc, _ = (int(v) for v in rows[0].split())
    data = np.array([ln.split() for ln in rows[1:] if ln.strip()], dtype=float).reshape(-1, 3)
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(nr, nc)).tocsr()
