"""The four worked models binding all layers together.

newtonian  -- clock + free particle under C = p_C + p_S^2/2
nparticle  -- N translation-invariant particles under C = sum_i p_i (V = 0:
              the momentum constraint and every transformation law tested
              here involve only position/momentum kinematics, so the free
              case carries all golden values)
su2        -- two frames + spin-j system under C = p_A + p_B - beta*J_z
degenerate -- one frame with C = p_R^2 - G_S, G_S >= 0

Physical states are built directly in the momentum representation by
solving the constraint for one frame momentum, which keeps them exactly on
the polynomial constraint surface; position localization is controlled by
Gaussian momentum profiles (correlations enter as shear terms in the
quadratic form).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import sympy as sp

from . import kinspace as ks
from . import ncalg
from .errors import ConfigError, IncommensurableSpectrum
from .kinspace import FactorAction, FactorSpec, KinOperator
from .ncalg import GeneratorSet
from .relobs import OrientationFrame

PARTICLE_LABELS = "ABCDEFGH"


@dataclass(frozen=True)
class ModelSpec:
    """Parameters for one concrete model."""

    name: str
    n_particles: int = 3
    lattice_size: int = 8
    clock_size: int = 16
    system_size: int = 8
    dp: float = 1.0
    beta: int = 1          # su2 coupling, integer multiple of dp/hbar
    j: int = 1             # su2 spin (integer)
    mass: float = 1.0      # degenerate: G_S = mass^2 * 1
    levels: tuple = ()     # degenerate: explicit sqrt(G_S) values instead
    hbar: float = 1.0
    sigma: float = 0.0     # momentum width in lattice units; 0 -> default


@dataclass(eq=False)
class Model:
    spec: ModelSpec
    space: ks.LatticeSpace
    gens: GeneratorSet
    assignment: dict
    frames: dict
    constraint: KinOperator
    constraint_elem: ncalg.AlgebraElement
    Pi: KinOperator
    plain_diag: np.ndarray        # un-reduced constraint diagonal
    frame_pairs: dict             # frame label -> (q_name, p_name)
    extra: dict = field(default_factory=dict)

    @property
    def hbar(self) -> float:
        return self.space.hbar

    def frame_factor(self, label: str) -> int:
        return self.frames[label].factor

    def g_s_elem(self, label: str) -> ncalg.AlgebraElement:
        """System generator seen from the given frame: C - p_frame."""
        _, p_name = self.frame_pairs[label]
        return self.constraint_elem - self.gens.gen(p_name)

    def g_s_op(self, label: str) -> KinOperator:
        return self.constraint - ks.momentum_operator(
            self.space, self.frame_factor(label))


def spin_matrices(j: int, hbar: float):
    """Standard spin-j matrices in the J_z eigenbasis (m = +j..-j)."""
    m = np.arange(j, -j - 1, -1, dtype=float)
    jz = hbar * np.diag(m)
    lower = m[1:]
    c = hbar * np.sqrt(j * (j + 1) - lower * (lower + 1))
    jp = np.diag(c, k=1)
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / (2j)
    return jx, jy, jz


def position_matrix(N: int, dp: float, hbar: float) -> np.ndarray:
    """Position operator of an N-point momentum lattice (Fourier dual)."""
    p = dp * np.arange(-N // 2, N // 2)
    dx = 2 * np.pi * hbar / (N * dp)
    x = dx * np.arange(-N // 2, N // 2)
    F = np.exp(-1j * np.outer(p, x) / hbar)
    return (F * x) @ F.conj().T / N


def build_model(spec: ModelSpec) -> Model:
    if spec.name == "nparticle":
        return _build_nparticle(spec)
    if spec.name == "su2":
        return _build_su2(spec)
    if spec.name == "newtonian":
        return _build_newtonian(spec)
    if spec.name == "degenerate":
        return _build_degenerate(spec)
    raise ConfigError(f"unknown model {spec.name!r}")


def _plain_diag(space, terms) -> np.ndarray:
    total = np.zeros(space.dim)
    for factor, coef in terms.items():
        f = space.factors[factor]
        total = total + space.embed_diag(
            factor, coef * f.generator_spectrum).real
    return total


def _build_nparticle(spec: ModelSpec) -> Model:
    n = spec.n_particles
    if not 2 <= n <= len(PARTICLE_LABELS):
        raise ConfigError("nparticle supports 2..8 particles")
    labels = PARTICLE_LABELS[:n]
    factors = [FactorSpec.frame(spec.lattice_size, spec.dp, lab)
               for lab in labels]
    space = ks.tensor_space(factors, hbar=spec.hbar)
    gens = GeneratorSet.canonical([(f"q_{lab}", f"p_{lab}") for lab in labels])
    assignment = {}
    frames = {}
    for i, lab in enumerate(labels):
        assignment[f"p_{lab}"] = ks.momentum_operator(space, i)
        frames[lab] = OrientationFrame(space, i)
        assignment[f"q_{lab}"] = FactorAction(
            space, i, position_matrix(spec.lattice_size, spec.dp, spec.hbar))
    terms = {i: 1.0 for i in range(n)}
    C = ks.build_constraint(space, terms)
    c_elem = gens.zero()
    for lab in labels:
        c_elem = c_elem + gens.gen(f"p_{lab}")
    Pi = ks.group_average(space, C)
    return Model(spec, space, gens, assignment, frames, C, c_elem, Pi,
                 _plain_diag(space, terms),
                 {lab: (f"q_{lab}", f"p_{lab}") for lab in labels})


def _build_su2(spec: ModelSpec) -> Model:
    if spec.j < 1 or int(spec.j) != spec.j:
        raise ConfigError("su2 model needs an integer spin j >= 1")
    beta_val = spec.beta * spec.dp / spec.hbar
    jx, jy, jz = spin_matrices(int(spec.j), spec.hbar)
    gs_spec = -beta_val * np.diag(jz).real
    off = gs_spec / spec.dp
    if np.max(np.abs(off - np.rint(off))) > 1e-9:
        raise IncommensurableSpectrum(
            "beta*J_z eigenvalues leave the frame momentum lattice; "
            "pick beta an integer multiple of dp/hbar")
    factors = [FactorSpec.frame(spec.lattice_size, spec.dp, "A"),
               FactorSpec.frame(spec.lattice_size, spec.dp, "B"),
               FactorSpec.system(gs_spec, name="S",
                                 ops={"J_x": jx, "J_y": jy, "J_z": jz})]
    space = ks.tensor_space(factors, hbar=spec.hbar)
    gens = GeneratorSet.canonical_with_su2(
        [("q_A", "p_A"), ("q_B", "p_B")])
    assignment = {
        "p_A": ks.momentum_operator(space, 0),
        "p_B": ks.momentum_operator(space, 1),
        "q_A": FactorAction(space, 0, position_matrix(spec.lattice_size,
                                                      spec.dp, spec.hbar)),
        "q_B": FactorAction(space, 1, position_matrix(spec.lattice_size,
                                                      spec.dp, spec.hbar)),
        "J_x": FactorAction(space, 2, jx),
        "J_y": FactorAction(space, 2, jy),
        "J_z": FactorAction(space, 2, jz),
    }
    terms = {0: 1.0, 1: 1.0, 2: 1.0}
    C = ks.build_constraint(space, terms)
    beta_sym = sp.nsimplify(spec.beta) * sp.nsimplify(spec.dp) / ncalg.HBAR
    c_elem = (gens.gen("p_A") + gens.gen("p_B")
              - beta_sym * gens.gen("J_z"))
    Pi = ks.group_average(space, C)
    frames = {"A": OrientationFrame(space, 0), "B": OrientationFrame(space, 1)}
    return Model(spec, space, gens, assignment, frames, C, c_elem, Pi,
                 _plain_diag(space, terms),
                 {"A": ("q_A", "p_A"), "B": ("q_B", "p_B")},
                 extra={"beta": beta_val, "beta_sym": beta_sym})


def _build_newtonian(spec: ModelSpec) -> Model:
    dp = spec.dp
    n_s = spec.system_size
    p_s = dp * np.arange(-n_s // 2, n_s // 2)
    kinetic = p_s * p_s / 2.0
    if np.max(np.abs(kinetic / dp - np.rint(kinetic / dp))) > 1e-9:
        raise IncommensurableSpectrum(
            "p_S^2/2 leaves the clock momentum lattice; use dp = 2")
    factors = [FactorSpec.frame(spec.clock_size, dp, "C"),
               FactorSpec.system(kinetic, name="S",
                                 ops={"p_S": np.diag(p_s),
                                      "q_S": position_matrix(n_s, dp,
                                                             spec.hbar)})]
    space = ks.tensor_space(factors, hbar=spec.hbar)
    gens = GeneratorSet.canonical([("t_C", "p_C"), ("q_S", "p_S")])
    assignment = {
        "p_C": ks.momentum_operator(space, 0),
        "t_C": FactorAction(space, 0, position_matrix(spec.clock_size, dp,
                                                      spec.hbar)),
        "p_S": FactorAction(space, 1, np.diag(p_s)),
        "q_S": FactorAction(space, 1, position_matrix(n_s, dp, spec.hbar)),
    }
    terms = {0: 1.0, 1: 1.0}
    C = ks.build_constraint(space, terms)
    c_elem = gens.gen("p_C") + sp.Rational(1, 2) * (gens.gen("p_S")
                                                    * gens.gen("p_S"))
    Pi = ks.group_average(space, C)
    frames = {"C": OrientationFrame(space, 0)}
    return Model(spec, space, gens, assignment, frames, C, c_elem, Pi,
                 _plain_diag(space, terms), {"C": ("t_C", "p_C")})


def _build_degenerate(spec: ModelSpec) -> Model:
    N = spec.lattice_size
    levels = np.asarray(spec.levels if spec.levels
                        else (spec.mass, spec.mass), dtype=float)
    if np.any(levels < 0):
        raise ConfigError("sqrt(G_S) levels must be non-negative")
    if np.any(levels >= N * spec.dp / 2):
        raise ConfigError("levels must stay inside the momentum window")
    g_vals = levels * levels
    d = levels.size
    sx = np.zeros((d, d))
    for i in range(d - 1):
        sx[i, i + 1] = sx[i + 1, i] = 1.0
    factors = [FactorSpec.frame(N, spec.dp, "R"),
               FactorSpec.system(g_vals, name="S",
                                 ops={"H": np.diag(levels), "X": sx})]
    space = ks.tensor_space(factors, hbar=spec.hbar)
    gens = GeneratorSet.canonical([("q_R", "p_R")], centrals=("H",))
    p = ks.momentum_operator(space, 0)
    g_op = ks.generator_operator(space, 1)
    C = p @ p - g_op
    c_elem = (gens.gen("p_R") * gens.gen("p_R")
              - gens.gen("H") * gens.gen("H"))
    assignment = {
        "p_R": p,
        "q_R": FactorAction(space, 0, position_matrix(N, spec.dp, spec.hbar)),
        "H": FactorAction(space, 1, np.diag(levels)),
    }
    Pi = ks.group_average(space, C)
    frames = {"R": OrientationFrame(space, 0)}
    cp, cm = ks.factorize_constraint(space, 0, g_op)
    return Model(spec, space, gens, assignment, frames, C, c_elem, Pi,
                 C.diag.real.copy(), {"R": ("q_R", "p_R")},
                 extra={"C_plus": cp, "C_minus": cm, "g_op": g_op,
                        "levels": levels})


# ---------------------------------------------------------------------------
# state recipes


def plain_kernel_basis(model: Model) -> np.ndarray:
    """Indices where the un-reduced constraint diagonal vanishes."""
    scale = max(float(np.max(np.abs(model.plain_diag))), 1.0)
    return np.flatnonzero(np.abs(model.plain_diag) < 1e-9 * scale)


def random_physical_state(model: Model, rng, unwrapped: bool = True
                          ) -> np.ndarray:
    """Random state in the constraint kernel.

    ``unwrapped`` restricts to the polynomial constraint surface (plain
    momentum sum exactly zero), which every algebra-level identity assumes;
    the full cyclic kernel adds the components identified modulo the
    lattice period.
    """
    psi = np.zeros(model.space.dim, dtype=complex)
    if unwrapped:
        idx = plain_kernel_basis(model)
        psi[idx] = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    else:
        psi = rng.normal(size=model.space.dim) * (1 + 0j)
        psi += 1j * rng.normal(size=model.space.dim)
        psi = model.Pi.apply(psi)
    return psi / np.linalg.norm(psi)


def gaussian_physical_state(model: Model, *, centers_x=None, centers_p=None,
                            sigmas=None, shear=None, system_amp=None,
                            solve_factor: int = 0) -> np.ndarray:
    """Localized physical state built on the solved constraint surface.

    The momentum amplitude over the non-solved factors is a (possibly
    sheared) Gaussian with position centers entering as linear phases; the
    solved frame momentum is fixed by the constraint and the configuration
    is dropped when it would leave the momentum window, so the state lies
    exactly on the polynomial constraint surface.  ``system_amp`` gives the
    amplitude vector on a system factor (e.g. a spin state).
    """
    space = model.space
    dims = space.dims
    n = len(dims)
    centers_x = dict(centers_x or {})
    centers_p = dict(centers_p or {})
    sigmas = dict(sigmas or {})
    shear = dict(shear or {})
    grids = [space.factors[i].generator_spectrum for i in range(n)]

    mesh = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    amp = np.ones(dims, dtype=complex)

    hbar = space.hbar
    for i in range(n):
        if i == solve_factor:
            continue
        f = space.factors[i]
        if not f.is_frame:
            if system_amp is not None and i in system_amp:
                amp = amp * np.asarray(system_amp[i])[mesh[i]]
            continue
        default_sigma = (model.spec.sigma or f.N / 8.0) * f.dp
        sig = sigmas.get(i, default_sigma)
        p0 = centers_p.get(i, 0.0)
        x0 = centers_x.get(i, 0.0)
        pv = grids[i][mesh[i]]
        amp = amp * np.exp(-(pv - p0) ** 2 / (4 * sig ** 2)
                           - 1j * x0 * pv / hbar)
    for (i, k), gamma in shear.items():
        pi = grids[i][mesh[i]] - centers_p.get(i, 0.0)
        pk = grids[k][mesh[k]] - centers_p.get(k, 0.0)
        amp = amp * np.exp(gamma * pi * pk)

    # keep exact points of the polynomial constraint surface only
    total = model.plain_diag.reshape(dims)
    scale = max(float(np.max(np.abs(total))), 1.0)
    mask = np.abs(total) < 1e-9 * scale
    solved = grids[solve_factor][mesh[solve_factor]]
    x0s = centers_x.get(solve_factor, 0.0)
    amp = amp * np.exp(-1j * x0s * solved / hbar)
    psi = np.where(mask, amp, 0.0).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm < 1e-14:
        raise ConfigError("state recipe has no support on the kernel")
    return psi / norm


def spin_coherent(j: int, theta: float, phi: float) -> np.ndarray:
    """Spin-coherent amplitudes in the J_z basis ordered m = +j..-j."""
    amps = []
    for m in range(j, -j - 1, -1):
        k = j - m
        amps.append(np.sqrt(comb(2 * j, k))
                    * np.cos(theta / 2) ** (2 * j - k)
                    * np.sin(theta / 2) ** k * np.exp(-1j * k * phi))
    v = np.array(amps, dtype=complex)
    return v / np.linalg.norm(v)
