"""Conditioning on frame orientations: reduction maps, QRF changes, gauges.

The reduction map strips one frame factor off a physical state by pairing
it with an orientation bra; its inverse re-attaches the orientation state
and group averages.  Composing a reduction with another frame's inverse
reduction produces the unitary that re-expresses the same physical data
from the other frame's perspective.

Generalized gauge maps Phi satisfy Pi Phi Pi = Pi on the constraint kernel;
they are stored as explicit full-dimension operators (desk-scale spaces
keep that cheap and make residual checks direct).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kinspace as ks
from .algstates import AlgebraicState, from_hilbert
from .errors import IllConditionedFlow, NotPhysical, SameFrame, UnsupportedSupport
from .kinspace import KinOperator, LatticeSpace
from .relobs import OrientationFrame, orientation_state_at, theta_projector

PHYS_RTOL = 1e-9


def reduced_space(space: LatticeSpace, factor: int) -> LatticeSpace:
    rest = tuple(f for i, f in enumerate(space.factors) if i != factor)
    return LatticeSpace(rest, space.hbar)


def reduce_state(frame: OrientationFrame, rho: float, psi_phys: np.ndarray,
                 C: KinOperator = None) -> np.ndarray:
    """Page-Wootters conditioning: (<rho| x 1) psi on the remaining factors."""
    space = frame.space
    if C is not None:
        resid = np.linalg.norm(C.apply(psi_phys))
        if resid > PHYS_RTOL * np.linalg.norm(psi_phys):
            raise NotPhysical(f"||C psi|| = {resid:.2e} exceeds tolerance")
    v = orientation_state_at(frame, rho)
    t = psi_phys.reshape(space.dims)
    out = np.tensordot(v.conj(), t, axes=([0], [frame.factor]))
    return out.reshape(-1)


def embed_state(frame: OrientationFrame, rho: float, phi: np.ndarray,
                Pi: KinOperator) -> np.ndarray:
    """Inverse conditioning: Pi (phi x |rho>), a state annihilated by C."""
    space = frame.space
    v = orientation_state_at(frame, rho)
    rest_dims = tuple(d for i, d in enumerate(space.dims)
                      if i != frame.factor)
    t = np.tensordot(v, phi.reshape(rest_dims), axes=0)
    t = np.moveaxis(t, 0, frame.factor)
    return Pi.apply(t.reshape(-1))


@dataclass(frozen=True, eq=False)
class ReductionMap:
    """Reduction at a fixed orientation, with its matrix on demand."""

    frame: OrientationFrame
    rho: float

    @property
    def space(self) -> LatticeSpace:
        return self.frame.space

    def matrix(self) -> np.ndarray:
        space = self.frame.space
        v = orientation_state_at(self.frame, self.rho)
        out = np.ones((1, 1))
        for i, f in enumerate(space.factors):
            blk = v.conj()[None, :] if i == self.frame.factor else np.eye(f.N)
            out = np.kron(out, blk)
        return out


@dataclass(frozen=True, eq=False)
class QRFTransform:
    """Unitary from the ``frame_a`` perspective to the ``frame_b`` one."""

    frame_a: OrientationFrame
    rho_a: float
    frame_b: OrientationFrame
    rho_b: float
    Pi: KinOperator
    matrix: np.ndarray

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi


def qrf_transform(frame_a: OrientationFrame, rho_a: float,
                  frame_b: OrientationFrame, rho_b: float,
                  Pi: KinOperator) -> QRFTransform:
    """V = R_B(rho_B) o R_A^dag(rho_A), mapping reduced-A to reduced-B states."""
    if frame_a.factor == frame_b.factor:
        raise SameFrame("QRF transformation needs two distinct frames")
    space = frame_a.space
    dim_red = space.dim // space.factors[frame_a.factor].N
    cols = np.empty((space.dim // space.factors[frame_b.factor].N, dim_red),
                    dtype=complex)
    basis = np.zeros(dim_red, dtype=complex)
    for i in range(dim_red):
        basis[:] = 0
        basis[i] = 1.0
        full = embed_state(frame_a, rho_a, basis, Pi)
        cols[:, i] = reduce_state(frame_b, rho_b, full)
    return QRFTransform(frame_a, rho_a, frame_b, rho_b, Pi, cols)


def conjugate_observable(V: QRFTransform, f: np.ndarray) -> np.ndarray:
    """V f V^dag: the observable re-expressed in the target perspective."""
    f = np.asarray(f, dtype=complex)
    n = V.matrix.shape[1]
    if f.shape != (n, n):
        raise UnsupportedSupport(
            f"observable must act on the source reduced space (dim {n})")
    return V.matrix @ f @ V.matrix.conj().T


# ---------------------------------------------------------------------------
# generalized gauges


@dataclass(frozen=True, eq=False)
class GaugeMap:
    """A map Phi with Pi Phi Pi = Pi, stored as a full-space operator."""

    space: LatticeSpace
    matrix: np.ndarray
    label: str = "custom"

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


def theta_gauge(frame: OrientationFrame, rho: float) -> GaugeMap:
    """The reference gauge Theta(rho) = |rho><rho| x 1."""
    return GaugeMap(frame.space, theta_projector(frame, rho).matrix,
                    label=f"Theta(rho={rho:g})")


def verify_gauge(phi: GaugeMap, Pi: KinOperator) -> dict:
    """Max residuals of the two defining identities on the kernel.

    Returns ``{"pi_phi_pi": ..., "phi_pi_phi": ..., "valid": bool}`` where
    the first entry is ||Pi Phi Pi - Pi||_max and the second
    ||(Phi Pi Phi - Phi) Pi||_max (the identity restricted to physical
    states).
    """
    P = Pi.matrix
    F = phi.matrix
    r1 = float(np.max(np.abs(P @ F @ P - P)))
    r2 = float(np.max(np.abs((F @ P @ F - F) @ P)))
    return {"pi_phi_pi": r1, "phi_pi_phi": r2,
            "valid": bool(r1 < 1e-10 and r2 < 1e-10)}


def composite_gauge(phi: GaugeMap, o1: np.ndarray, o2: np.ndarray,
                    C: KinOperator) -> GaugeMap:
    """exp(i O1 C) Phi exp(i O2 C) for hermitian Dirac observables O1, O2."""
    Cm = C.matrix
    left = expm(1j * np.asarray(o1) @ Cm)
    right = expm(1j * np.asarray(o2) @ Cm)
    return GaugeMap(phi.space, left @ phi.matrix @ right,
                    label=f"conjugated({phi.label})")


def gauge_transform_state(omega: AlgebraicState, phi_b: GaugeMap,
                          Pi: KinOperator) -> AlgebraicState:
    """omega'(.) = omega(Pi Phi_B (.)): the same physical data in gauge B.

    For a right-solution state the transform preserves normalization and
    every Dirac-observable value; no renormalization is applied, so a
    drifting omega'(1) flags a state that was not a solution.
    """
    if omega.bra is None:
        raise ValueError("gauge transforms need a Hilbert-backed state")
    new_bra = phi_b.matrix.conj().T @ (Pi.apply(omega.bra))
    return from_hilbert(new_bra, omega.ket, omega.space, omega.assignment,
                        omega.gens, omega.degree_bound, normalize=False)


def gauge_flow(omega: AlgebraicState, a: KinOperator, lam: float,
               C: KinOperator, max_exponent: float = 50.0) -> AlgebraicState:
    """omega'(.) = omega(exp(i lam a C / hbar) (.)).

    Physically equivalent to omega on right-solution states; the
    infinitesimal version reproduces the derivation flow
    d/dlam omega'(b)|_0 = omega([b, aC])/(i hbar).
    """
    if omega.bra is None:
        raise ValueError("gauge flows need a Hilbert-backed state")
    X = a.matrix @ C.matrix
    scale = abs(lam) * float(np.linalg.norm(X, 2)) / omega.space.hbar
    if scale > max_exponent:
        raise IllConditionedFlow(
            f"|lam|*||aC||/hbar = {scale:.1f} exceeds {max_exponent}")
    M = expm(1j * lam * X / omega.space.hbar)
    new_bra = M.conj().T @ omega.bra
    return from_hilbert(new_bra, omega.ket, omega.space, omega.assignment,
                        omega.gens, omega.degree_bound, normalize=False)


def system_projector(frame: OrientationFrame, Pi: KinOperator) -> KinOperator:
    """pi_hat = 1_R x <rho|Pi|rho>, the physically accessible system block.

    Independent of which orientation is used; on a commensurate lattice
    with a linear constraint this is the identity (every frame is ideal).
    """
    space = frame.space
    rho = float(frame.grid[0])
    v = orientation_state_at(frame, rho)
    dims = space.dims
    P = Pi.matrix.reshape(dims + dims)
    P = np.tensordot(v.conj(), P, axes=([0], [frame.factor]))
    P = np.tensordot(v, P, axes=([0], [len(dims) - 1 + frame.factor]))
    rest = [d for i, d in enumerate(dims) if i != frame.factor]
    rd = int(np.prod(rest))
    block = P.reshape(rd, rd)
    full = _insert_identity(block, frame, dims)
    return KinOperator.from_matrix(space, full, frozenset(range(len(dims)))
                                   - {frame.factor})


def _insert_identity(block: np.ndarray, frame: OrientationFrame, dims):
    """1_frame x block, with the frame slot restored at its position."""
    n = len(dims)
    rest = [d for i, d in enumerate(dims) if i != frame.factor]
    t = block.reshape(tuple(rest) * 2)
    eye = np.eye(dims[frame.factor])
    full = np.tensordot(eye, t, axes=0)  # (f, f', rest..., rest'...)
    row = [0] + [2 + i for i in range(n - 1)]
    col = [1] + [1 + n + i for i in range(n - 1)]

    def slot(order):
        head, rest_ = order[0], order[1:]
        return rest_[:frame.factor] + [head] + rest_[frame.factor:]

    perm = slot(row) + slot(col)
    d = int(np.prod(dims))
    return np.transpose(full, perm).reshape(d, d)
