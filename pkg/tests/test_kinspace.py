import numpy as np
import pytest
from scipy.linalg import expm

from qrfkit import kinspace as ks
from qrfkit.errors import (
    EmptyKernel,
    IncommensurableSpectrum,
    NegativeGenerator,
    NotAFrameFactor,
)


def two_frame_space(N=8, dp=1.0, hbar=1.0):
    return ks.tensor_space(
        [ks.FactorSpec.frame(N, dp, "A"), ks.FactorSpec.frame(N, dp, "B")],
        hbar=hbar)


def test_tensor_space_dims():
    sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                          ks.FactorSpec.system([0.0, 1.0, -1.0])])
    assert sp.dim == 24
    assert two_frame_space().dim == 64


def test_incommensurable_spectrum_rejected():
    with pytest.raises(IncommensurableSpectrum):
        ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                         ks.FactorSpec.system([0.5])])


def test_mixed_frame_spacings_rejected():
    with pytest.raises(IncommensurableSpectrum):
        ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                         ks.FactorSpec.frame(8, 2.0)])


def test_momentum_diagonal_values():
    sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0)])
    p = ks.momentum_operator(sp, 0)
    assert np.allclose(p.diag.real, [-2, -1, 0, 1])
    assert p.hermitian


def test_momentum_rejects_system_factor():
    sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0),
                          ks.FactorSpec.system([0.0, 1.0])])
    with pytest.raises(NotAFrameFactor):
        ks.momentum_operator(sp, 1)


def test_disjoint_support_commutes():
    rng = np.random.default_rng(7)
    sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0),
                          ks.FactorSpec.system([0.0, 1.0, 2.0])])
    p = ks.momentum_operator(sp, 0)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    f = ks.factor_operator(sp, 1, m)
    comm = p @ f - f @ p
    assert np.max(np.abs(comm.matrix)) < 1e-12


def test_momentum_generates_orientation_shifts():
    # exp(-i rho p/hbar)|rho'> = |rho'+rho> for grid shifts, N=8
    from qrfkit.relobs import OrientationFrame, orientation_state

    sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0)])
    fr = OrientationFrame(sp, 0)
    p = ks.momentum_operator(sp, 0)
    dr = fr.spacing
    for j in (-2, 0, 3):
        for shift in (1, 2, -3):
            u = expm(-1j * shift * dr * p.matrix / sp.hbar)
            lhs = u @ orientation_state(fr, j)
            jj = ((j + shift + 4) % 8) - 4
            assert np.allclose(lhs, orientation_state(fr, jj), atol=1e-12)


class TestBuildConstraint:
    def test_two_frame_kernel_dimension(self):
        sp = two_frame_space()
        C = ks.build_constraint(sp, {0: 1.0, 1: 1.0})
        Pi = ks.group_average(sp, C)
        # p_A + p_B = 0 on the cyclic lattice: one partner per momentum value
        assert int(round(np.sum(Pi.diag.real))) == 8

    def test_single_factor_kernel_is_zero_eigenspace(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0)])
        C = ks.build_constraint(sp, {0: 1.0})
        Pi = ks.group_average(sp, C)
        expected = np.zeros(8)
        expected[4] = 1.0  # k = 0 sits at index N/2
        assert np.allclose(Pi.diag.real, expected)

    def test_newtonian_form(self):
        # C = p_C + p_S^2/2 with the system spectrum declared on the lattice
        dp = 2.0
        m = np.arange(-4, 4) * dp
        sp = ks.tensor_space([ks.FactorSpec.frame(16, dp, "C"),
                              ks.FactorSpec.system(m * m / 2.0, name="S")])
        C = ks.build_constraint(sp, {0: 1.0, 1: 1.0})
        assert C.hermitian
        Pi = ks.group_average(sp, C)
        # every system level finds exactly one clock momentum partner
        assert int(round(np.sum(Pi.diag.real))) == 8

    def test_off_lattice_coefficient_rejected(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0)])
        with pytest.raises(IncommensurableSpectrum):
            ks.build_constraint(sp, {0: 0.5})

    def test_zero_not_in_spectrum_flag(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0)])
        C = ks.build_constraint(sp, {0: np.array([1.0, 1.0, 1.0, 1.0])})
        assert C.warnings


class TestGroupAverage:
    def test_projector_identities(self):
        sp = two_frame_space()
        C = ks.build_constraint(sp, {0: 1.0, 1: 1.0})
        Pi = ks.group_average(sp, C)
        P = Pi.matrix
        assert np.max(np.abs(P @ P - P)) < 1e-12
        assert np.max(np.abs(P - P.conj().T)) < 1e-12
        assert np.max(np.abs(C.matrix @ P)) < 1e-12
        assert np.max(np.abs(P @ C.matrix)) < 1e-12

    def test_cyclic_group_oracle(self):
        sp = two_frame_space()
        C = ks.build_constraint(sp, {0: 1.0, 1: 1.0})
        Pi = ks.group_average(sp, C)
        _, order, step = ks.cyclic_group(C)
        acc = np.zeros((sp.dim, sp.dim), dtype=complex)
        for j in range(order):
            acc += expm(1j * j * step * C.matrix / sp.hbar)
        acc /= order
        assert np.max(np.abs(acc - Pi.matrix)) < 1e-10

    def test_kernel_state_fixed(self):
        sp = two_frame_space()
        C = ks.build_constraint(sp, {0: 1.0, 1: 1.0})
        Pi = ks.group_average(sp, C)
        rng = np.random.default_rng(3)
        psi = ks.project_physical(Pi, rng.normal(size=sp.dim)
                                  + 1j * rng.normal(size=sp.dim))
        assert np.allclose(Pi.apply(psi), psi, atol=1e-12)

    def test_empty_kernel(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0)])
        C = ks.build_constraint(sp, {0: np.full(4, 1.0)})
        with pytest.raises(EmptyKernel):
            ks.group_average(sp, C)


class TestPhysicalInnerProduct:
    def setup_method(self):
        self.sp = two_frame_space()
        self.C = ks.build_constraint(self.sp, {0: 1.0, 1: 1.0})
        self.Pi = ks.group_average(self.sp, self.C)
        self.rng = np.random.default_rng(11)

    def test_normalized_kernel_state(self):
        psi = ks.project_physical(self.Pi, self.rng.normal(size=self.sp.dim))
        ip = ks.physical_inner_product(self.sp, self.Pi, psi, psi)
        assert abs(ip - 1.0) < 1e-12

    def test_orthogonal_complement_gives_zero(self):
        psi = self.rng.normal(size=self.sp.dim) + 0j
        psi -= self.Pi.apply(psi)  # now orthogonal to ker(C)
        phi = self.rng.normal(size=self.sp.dim) + 0j
        assert abs(ks.physical_inner_product(self.sp, self.Pi, psi, phi)) < 1e-12

    def test_gauge_invariance(self):
        psi = self.rng.normal(size=self.sp.dim) + 1j * self.rng.normal(size=self.sp.dim)
        phi = self.rng.normal(size=self.sp.dim) + 1j * self.rng.normal(size=self.sp.dim)
        base = ks.physical_inner_product(self.sp, self.Pi, psi, phi)
        for s in self.rng.uniform(-5, 5, size=10):
            u = expm(1j * s * self.C.matrix / self.sp.hbar)
            val = ks.physical_inner_product(self.sp, self.Pi, psi, u @ phi)
            assert abs(val - base) < 1e-10


class TestSectorsAndFactorization:
    def degenerate_space(self, N=8):
        return ks.tensor_space([ks.FactorSpec.frame(N, 1.0, "R"),
                                ks.FactorSpec.system([1.0, 4.0, 9.0], name="S")])

    def test_sector_ranks_and_orthogonality(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(4, 1.0),
                              ks.FactorSpec.system([0.0, 1.0])])
        plus, minus = ks.sector_projectors(sp, 0)
        assert int(round(np.sum(plus.diag.real))) == 2 * 2
        assert int(round(np.sum(minus.diag.real))) == 2 * 2
        assert np.max(np.abs((plus @ minus).diag)) < 1e-12
        assert np.allclose((plus + minus).diag, 1.0)

    def test_sectors_commute_with_degenerate_constraint(self):
        sp = self.degenerate_space()
        p = ks.momentum_operator(sp, 0)
        g = ks.generator_operator(sp, 1)
        C = p @ p - g
        plus, minus = ks.sector_projectors(sp, 0)
        for proj in (plus, minus):
            comm = proj @ C - C @ proj
            assert np.max(np.abs(comm.diag)) < 1e-12

    def test_scalar_square_root(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                              ks.FactorSpec.system([4.0, 4.0], name="S")])
        g = ks.generator_operator(sp, 1)
        cp, cm = ks.factorize_constraint(sp, 0, g)
        p = ks.momentum_operator(sp, 0)
        assert np.allclose(cp.diag, (p.diag + 2.0))
        assert np.allclose(cm.diag, (p.diag - 2.0))

    def test_product_reproduces_constraint(self):
        rng = np.random.default_rng(5)
        sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                              ks.FactorSpec.system(
                                  rng.choice([0.0, 1.0, 4.0, 9.0], size=5))])
        g = ks.generator_operator(sp, 1)
        p = ks.momentum_operator(sp, 0)
        C = p @ p - g
        cp, cm = ks.factorize_constraint(sp, 0, g)
        assert np.max(np.abs((cp @ cm).diag - C.diag)) < 1e-12
        comm = cp @ cm - cm @ cp
        assert np.max(np.abs(comm.diag)) < 1e-12

    def test_negative_generator_rejected(self):
        sp = ks.tensor_space([ks.FactorSpec.frame(8, 1.0),
                              ks.FactorSpec.system([-1.0, 1.0])])
        g = ks.generator_operator(sp, 1)
        with pytest.raises(NegativeGenerator):
            ks.factorize_constraint(sp, 0, g)

    def test_kernel_splits_into_sector_factor_kernels(self):
        sp = self.degenerate_space()
        p = ks.momentum_operator(sp, 0)
        g = ks.generator_operator(sp, 1)
        C = p @ p - g
        cp, cm = ks.factorize_constraint(sp, 0, g)
        plus, minus = ks.sector_projectors(sp, 0)
        ker_c = set(np.flatnonzero(np.abs(C.diag) < 1e-9))
        ker_minus_plus = set(np.flatnonzero(
            (np.abs(cm.diag) < 1e-9) & (plus.diag.real > 0.5)))
        ker_plus_minus = set(np.flatnonzero(
            (np.abs(cp.diag) < 1e-9) & (minus.diag.real > 0.5)))
        assert ker_c == ker_minus_plus | ker_plus_minus
        assert ker_minus_plus.isdisjoint(ker_plus_minus)

    def test_sector_decomposition_of_projector(self):
        sp = self.degenerate_space()
        p = ks.momentum_operator(sp, 0)
        g = ks.generator_operator(sp, 1)
        C = p @ p - g
        Pi = ks.group_average(sp, C)
        plus, minus = ks.sector_projectors(sp, 0)
        recomposed = (plus @ Pi @ plus) + (minus @ Pi @ minus)
        assert np.max(np.abs(recomposed.diag - Pi.diag)) < 1e-10
