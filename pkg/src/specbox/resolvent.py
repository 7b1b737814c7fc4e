"""Coupled Green's functions: closed forms, linear systems, and a brute-force
discretization oracle.

For coupling strengths (lam, nu) the second resolvent identity closes on the
four distinguished vectors.  Fixing the first argument phi and letting the
second run over (chi_l, delta_l, chi_r, delta_r) gives a 4x4 linear system
whose coefficient matrix A depends only on z and the coupling, with

    det A = D(z) = (1 - nu^2 r b)(1 - lam^2 l a) - nu^2 lam^2 r l c cbar,

where l, r are the reservoir transforms and a, b, c, cbar the system pairs.
Solving A X = B with the four right-hand sides at once yields all 16 pairs;
the printed closed forms for the diagonal pairs are kept as independent
cross-checks.

The oracle replaces each density piece by Gauss-Legendre nodes (density
absorbed into the weights), keeps atoms as exact nodes, embeds chi as the
vector of square-root weights, and solves (H - z) u = psi directly.  The
assembled matrix is diagonal outside a small system block plus two rank-one
couplings, so the default direct solver is a sparse LU factorization; a dense
solve is available behind ``method="dense"`` and must agree to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial.legendre import leggauss

from .blackbox import CHI_L, CHI_R, DELTA_L, DELTA_R, TAGS, BlackBoxModel
from .errors import DomainError, NearSingularError, OracleError
from .measures import SpectralMeasure

__all__ = [
    "CouplingParams",
    "G0Basics",
    "det_D",
    "green",
    "green_all",
    "green_closed",
    "green_evaluator",
    "discretize",
    "DiscretizedModel",
    "green_oracle",
    "green_oracle_all",
]

_TAG_INDEX = {tag: i for i, tag in enumerate(TAGS)}


@dataclass(frozen=True)
class CouplingParams:
    """The real coupling pair; ``lam`` scales the left bond, ``nu`` the right."""

    lam: float
    nu: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.nu)):
            raise DomainError("coupling parameters must be finite")

    def swapped(self) -> "CouplingParams":
        return CouplingParams(self.nu, self.lam)


def _coupling(coupling) -> CouplingParams:
    if isinstance(coupling, CouplingParams):
        return coupling
    lam, nu = coupling
    return CouplingParams(float(lam), float(nu))


@dataclass(frozen=True)
class G0Basics:
    """The six nonzero uncoupled Green's values at one (array of) z."""

    l: np.ndarray          # (chi_l, chi_l)
    r: np.ndarray          # (chi_r, chi_r)
    a: np.ndarray          # (delta_l, delta_l)
    b: np.ndarray          # (delta_r, delta_r)
    c: np.ndarray          # (delta_l, delta_r)
    cb: np.ndarray         # (delta_r, delta_l)

    @classmethod
    def at(cls, model: BlackBoxModel, z) -> "G0Basics":
        basics = model.g0_basics(z)
        return cls(
            l=basics[(CHI_L, CHI_L)],
            r=basics[(CHI_R, CHI_R)],
            a=basics[(DELTA_L, DELTA_L)],
            b=basics[(DELTA_R, DELTA_R)],
            c=basics[(DELTA_L, DELTA_R)],
            cb=basics[(DELTA_R, DELTA_L)],
        )

    def det_D(self, coupling: CouplingParams):
        lam2, nu2 = coupling.lam**2, coupling.nu**2
        return (1 - nu2 * self.r * self.b) * (1 - lam2 * self.l * self.a) \
            - nu2 * lam2 * self.r * self.l * self.c * self.cb

    def system_matrix(self, coupling: CouplingParams) -> np.ndarray:
        """A with rows indexed by the second-argument equation, columns by the
        unknown pair partner, in tag order (chi_l, delta_l, chi_r, delta_r)."""
        lam, nu = coupling.lam, coupling.nu
        l, r, a, b, c, cb = np.broadcast_arrays(
            self.l, self.r, self.a, self.b, self.c, self.cb
        )
        shape = l.shape
        A = np.zeros(shape + (4, 4), dtype=complex)
        one = np.ones(shape, dtype=complex)
        A[..., 0, 0] = one
        A[..., 0, 1] = lam * l
        A[..., 1, 0] = lam * a
        A[..., 1, 1] = one
        A[..., 1, 2] = nu * cb
        A[..., 2, 2] = one
        A[..., 2, 3] = nu * r
        A[..., 3, 0] = lam * c
        A[..., 3, 2] = nu * b
        A[..., 3, 3] = one
        return A

    def rhs_matrix(self) -> np.ndarray:
        """B[..., row psi, col phi] = G0(phi, psi)."""
        l, r, a, b, c, cb = np.broadcast_arrays(
            self.l, self.r, self.a, self.b, self.c, self.cb
        )
        B = np.zeros(l.shape + (4, 4), dtype=complex)
        B[..., 0, 0] = l          # phi = chi_l, psi = chi_l
        B[..., 1, 1] = a          # phi = delta_l, psi = delta_l
        B[..., 3, 1] = c          # phi = delta_l, psi = delta_r
        B[..., 2, 2] = r          # phi = chi_r,  psi = chi_r
        B[..., 1, 3] = cb         # phi = delta_r, psi = delta_l
        B[..., 3, 3] = b          # phi = delta_r, psi = delta_r
        return B


def det_D(model: BlackBoxModel, coupling, z):
    """D(z) from the uncoupled values; equals det of the 4x4 system matrix."""
    cp = _coupling(coupling)
    return G0Basics.at(model, z).det_D(cp)


def _solve_all(basics: G0Basics, coupling: CouplingParams) -> np.ndarray:
    """All 16 coupled pairs; result[..., i, j] = G(tag_i, tag_j)."""
    D = basics.det_D(coupling)
    if np.any(np.abs(np.atleast_1d(D)) < 1e-300):
        raise NearSingularError(
            "D(z) underflowed; z is numerically at a resonance of the coupled model"
        )
    A = basics.system_matrix(coupling)
    B = basics.rhs_matrix()
    X = np.linalg.solve(A, B)
    # X[..., psi_row, phi_col] = G(phi, psi): transpose the trailing block
    return np.swapaxes(X, -1, -2)


def green_all(model: BlackBoxModel, coupling, z) -> np.ndarray:
    """All 16 pairs at z (array-capable); index order follows TAGS."""
    cp = _coupling(coupling)
    return _solve_all(G0Basics.at(model, z), cp)


def green(model: BlackBoxModel, coupling, phi: str, psi: str, z):
    """Coupled G_{lam,nu}(phi, psi, z) via the linear-system path."""
    cp = _coupling(coupling)
    z_arr = np.asarray(z, dtype=complex)
    vals = green_all(model, cp, z)[..., _TAG_INDEX[phi], _TAG_INDEX[psi]]
    return complex(vals) if z_arr.ndim == 0 else vals


def green_from_basics(basics: G0Basics, coupling, phi: str, psi: str):
    """Coupled pair from precomputed uncoupled values (hot loops over coupling)."""
    cp = _coupling(coupling)
    return _solve_all(basics, cp)[..., _TAG_INDEX[phi], _TAG_INDEX[psi]]


def green_closed(model: BlackBoxModel, coupling, phi: str, z):
    """The printed diagonal closed forms; cross-check for the system path.

    Left pairs as printed, right pairs through the left-right relabeling.
    """
    cp = _coupling(coupling)
    g = G0Basics.at(model, z)
    lam2, nu2 = cp.lam**2, cp.nu**2
    D = g.det_D(cp)
    if phi == DELTA_L:
        num = (1 - nu2 * g.r * g.b) * g.a + nu2 * g.r * g.c * g.cb
    elif phi == CHI_L:
        num = g.l * (1 - nu2 * g.r * g.b)
    elif phi == DELTA_R:
        num = (1 - lam2 * g.l * g.a) * g.b + lam2 * g.l * g.cb * g.c
    elif phi == CHI_R:
        num = g.r * (1 - lam2 * g.l * g.a)
    else:
        raise ValueError(f"no closed form for tag {phi!r}")
    return num / D


def green_evaluator(model: BlackBoxModel, coupling, phi: str, psi: str):
    """Herglotz evaluator z -> G_{lam,nu}(phi, psi, z) for ladder scans."""
    from .measures import HerglotzEvaluator

    cp = _coupling(coupling)

    def fn(z):
        return green(model, cp, phi, psi, z)

    return HerglotzEvaluator(fn, tag="composite")


# ---------------------------------------------------------------------------
# discretization oracle
# ---------------------------------------------------------------------------


class DiscretizedModel:
    """Finite Hermitian matrix standing in for the full compound operator.

    Reservoir blocks are diagonal on the quadrature nodes; the embedded chi
    vectors carry sqrt(weight) entries so that (chi, (H_res - z)^{-1} chi)
    is exactly the quadrature approximation of the reservoir transform.
    """

    def __init__(self, model: BlackBoxModel, nodes_per_piece: int):
        if nodes_per_piece < 2:
            raise DomainError(f"nodes_per_piece must be >= 2, got {nodes_per_piece}")
        self.model = model
        self.nodes_per_piece = int(nodes_per_piece)
        self.quadrature_rule = "gauss-legendre+exact-atoms"

        xl, wl = _measure_nodes(model.res_l, nodes_per_piece)
        xr, wr = _measure_nodes(model.res_r, nodes_per_piece)
        n = model.system.dim
        self.m_l, self.m_r = xl.size, xr.size
        self.dim = self.m_l + n + self.m_r
        self.nodes_l, self.weights_l = xl, wl
        self.nodes_r, self.weights_r = xr, wr
        self._sys_slice = slice(self.m_l, self.m_l + n)

        self.chi_l = np.zeros(self.dim, dtype=complex)
        self.chi_l[: self.m_l] = np.sqrt(wl)
        self.chi_r = np.zeros(self.dim, dtype=complex)
        self.chi_r[self.m_l + n :] = np.sqrt(wr)
        self.delta_l = np.zeros(self.dim, dtype=complex)
        self.delta_l[self._sys_slice] = model.system.delta_l
        self.delta_r = np.zeros(self.dim, dtype=complex)
        self.delta_r[self._sys_slice] = model.system.delta_r
        self._vectors = {
            CHI_L: self.chi_l,
            DELTA_L: self.delta_l,
            CHI_R: self.chi_r,
            DELTA_R: self.delta_r,
        }

        self.h0_diag = np.concatenate(
            [
                xl.astype(complex),
                np.diag(model.system.h_s).real.astype(complex),
                xr.astype(complex),
            ]
        )

    def vector(self, tag: str) -> np.ndarray:
        return self._vectors[tag]

    def reservoir_borel(self, side: str, z) -> complex:
        """Quadrature approximation of the reservoir transform (for convergence tests)."""
        x, w = (self.nodes_l, self.weights_l) if side == "l" else (self.nodes_r, self.weights_r)
        return complex(np.sum(w / (x - complex(z))))

    def assemble(self, coupling) -> np.ndarray:
        """Dense Hermitian H(lam, nu)."""
        cp = _coupling(coupling)
        H = np.diag(self.h0_diag)
        H[self._sys_slice, self._sys_slice] = self.model.system.h_s
        for strength, chi, delta in (
            (cp.lam, self.chi_l, self.delta_l),
            (cp.nu, self.chi_r, self.delta_r),
        ):
            if strength != 0.0:
                H += strength * (
                    np.outer(delta, chi.conj()) + np.outer(chi, delta.conj())
                )
        return H

    def assemble_shifted_sparse(self, coupling, z: complex) -> sp.csc_matrix:
        """Sparse (H(lam, nu) - z I) in CSC form."""
        cp = _coupling(coupling)
        n = self.model.system.dim
        sys0 = self.m_l
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        data: list[np.ndarray] = []

        idx = np.arange(self.dim)
        rows.append(idx)
        cols.append(idx)
        data.append(self.h0_diag - z)

        si = np.arange(sys0, sys0 + n)
        rr, cc = np.meshgrid(si, si, indexing="ij")
        hs = self.model.system.h_s - np.diag(np.diag(self.model.system.h_s))
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        data.append(hs.ravel())

        for strength, chi, delta in (
            (cp.lam, self.chi_l, self.delta_l),
            (cp.nu, self.chi_r, self.delta_r),
        ):
            if strength == 0.0:
                continue
            nz = np.nonzero(chi)[0]
            for srow in si:
                d = delta[srow]
                if d == 0:
                    continue
                rows.append(np.full(nz.size, srow))
                cols.append(nz)
                data.append(strength * d * chi[nz].conj())
                rows.append(nz)
                cols.append(np.full(nz.size, srow))
                data.append(strength * chi[nz] * np.conj(d))

        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        )
        return mat.tocsc()


def _measure_nodes(measure: SpectralMeasure, nodes_per_piece: int):
    """Nodes/weights for the measure: GL rule per piece with the polynomial
    density absorbed into the weights; atoms kept exactly."""
    t, v = leggauss(nodes_per_piece)
    xs, ws = [], []
    for p in measure.pieces:
        half = 0.5 * (p.b - p.a)
        mid = 0.5 * (p.a + p.b)
        x = mid + half * t
        dens = np.polynomial.polynomial.polyval(x, p.coef)
        xs.append(x)
        ws.append(half * v * dens)
    for x0, w in measure.atoms:
        xs.append(np.array([x0]))
        ws.append(np.array([w]))
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def discretize(model: BlackBoxModel, nodes_per_piece: int) -> DiscretizedModel:
    """Build the finite stand-in operator used as the verification oracle."""
    return DiscretizedModel(model, nodes_per_piece)


def green_oracle(
    disc: DiscretizedModel,
    coupling,
    phi: str,
    psi: str,
    z: complex,
    method: str = "sparse",
) -> complex:
    """(phi, (H - z)^{-1} psi) on the discretized model by direct solve."""
    vals = green_oracle_all(disc, coupling, z, tags=(phi, psi), method=method)
    return vals[(phi, psi)]


def green_oracle_all(
    disc: DiscretizedModel,
    coupling,
    z: complex,
    tags: Iterable[str] = TAGS,
    method: str = "sparse",
) -> dict:
    """All requested pairs with one factorization of (H - z)."""
    cp = _coupling(coupling)
    z = complex(z)
    if z.imag == 0.0:
        raise DomainError("oracle requires Im z != 0")
    tags = tuple(dict.fromkeys(tags))
    B = np.stack([disc.vector(t) for t in tags], axis=1)
    try:
        if method == "dense":
            A = disc.assemble(cp) - z * np.eye(disc.dim)
            U = np.linalg.solve(A, B)
        elif method == "sparse":
            A = disc.assemble_shifted_sparse(cp, z)
            lu = spla.splu(A)
            U = lu.solve(B)
        else:
            raise ValueError(f"unknown oracle method {method!r}")
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        cond = None
        if disc.dim <= 3000:
            dense = disc.assemble(cp) - z * np.eye(disc.dim)
            cond = float(np.linalg.cond(dense))
        raise OracleError(
            f"direct solve failed at z = {z}: {exc}", condition_estimate=cond
        ) from exc
    out = {}
    for i, phi in enumerate(tags):
        for j, psi in enumerate(tags):
            out[(phi, psi)] = complex(np.vdot(disc.vector(phi), U[:, j]))
    return out
