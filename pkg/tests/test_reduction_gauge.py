import numpy as np
import pytest

from qrfkit import algstates as ast
from qrfkit import kinspace as ks
from qrfkit import models as md
from qrfkit import ncalg
from qrfkit import reduction_gauge as rg
from qrfkit import relobs as ro
from qrfkit.errors import IllConditionedFlow, NotPhysical, SameFrame


@pytest.fixture(scope="module")
def model():
    return md.build_model(md.ModelSpec("nparticle", n_particles=3,
                                       lattice_size=8))


@pytest.fixture(scope="module")
def psi(model):
    rng = np.random.default_rng(41)
    return md.random_physical_state(model, rng, unwrapped=False)


class TestReduceEmbed:
    def test_embed_then_reduce_is_identity(self, model):
        rng = np.random.default_rng(43)
        fr = model.frames["A"]
        rho = fr.grid[3]
        red_dim = model.space.dim // 8
        phi = rng.normal(size=red_dim) + 1j * rng.normal(size=red_dim)
        full = rg.embed_state(fr, rho, phi, model.Pi)
        back = rg.reduce_state(fr, rho, full)
        assert np.max(np.abs(back - phi)) < 1e-12

    def test_embedded_state_is_physical(self, model):
        rng = np.random.default_rng(47)
        fr = model.frames["B"]
        red_dim = model.space.dim // 8
        phi = rng.normal(size=red_dim) + 0j
        full = rg.embed_state(fr, fr.grid[1], phi, model.Pi)
        assert np.linalg.norm(model.constraint.apply(full)) < 1e-10

    def test_reduce_then_embed_fixes_physical_states(self, model, psi):
        fr = model.frames["A"]
        rho = fr.grid[6]
        red = rg.reduce_state(fr, rho, psi, C=model.constraint)
        back = rg.embed_state(fr, rho, red, model.Pi)
        assert np.max(np.abs(back - psi)) < 1e-10

    def test_norm_preservation(self, model, psi):
        fr = model.frames["A"]
        red = rg.reduce_state(fr, fr.grid[2], psi)
        phys_norm = ks.physical_inner_product(model.space, model.Pi, psi, psi)
        assert abs(np.vdot(red, red) - phys_norm) < 1e-10

    def test_embed_norm_matches_reduced_block(self, model):
        rng = np.random.default_rng(53)
        fr = model.frames["A"]
        red_dim = model.space.dim // 8
        phi = rng.normal(size=red_dim) + 1j * rng.normal(size=red_dim)
        full = rg.embed_state(fr, fr.grid[4], phi, model.Pi)
        ip = ks.physical_inner_product(model.space, model.Pi, full, full)
        # ideal frame: reduce(embed(phi)) = phi, so the norm is |phi|^2
        assert abs(ip - np.vdot(phi, phi)) < 1e-10

    def test_reorientation_covariance(self, model, psi):
        fr = model.frames["A"]
        rho1, rho2 = fr.grid[3], fr.grid[5]
        red1 = rg.reduce_state(fr, rho1, psi)
        red2 = rg.reduce_state(fr, rho2, psi)
        gs = model.g_s_op("A")
        rest = rg.reduced_space(model.space, fr.factor)
        gs_red = gs.diag.reshape(model.space.dims)[0].reshape(-1)
        u = np.exp(-1j * (rho1 - rho2) * gs_red / model.hbar)
        assert np.max(np.abs(red1 - u * red2)) < 1e-10

    def test_expectation_equality(self, model, psi):
        rng = np.random.default_rng(59)
        fr = model.frames["A"]
        rho = fr.grid[5]
        m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        m = (m + m.conj().T) / 2
        f = ks.factor_operator(model.space, 2, m)
        obs = ro.relational_observable(model.space, model.constraint, fr,
                                       rho, f, form="kinematical")
        lhs = np.vdot(psi, obs.apply(psi))
        red = rg.reduce_state(fr, rho, psi)
        red_space = rg.reduced_space(model.space, fr.factor)
        f_red = ks.factor_operator(red_space, 1, m)
        rhs = np.vdot(red, f_red.apply(red))
        assert abs(lhs - rhs) < 1e-10

    def test_not_physical_rejected(self, model):
        rng = np.random.default_rng(61)
        bad = rng.normal(size=model.space.dim) + 0j
        with pytest.raises(NotPhysical):
            rg.reduce_state(model.frames["A"], 0.0, bad, C=model.constraint)


class TestQRFTransform:
    def test_roundtrip_identity(self, model):
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        rho_a, rho_b = fr_a.grid[4], fr_b.grid[5]
        v_ab = rg.qrf_transform(fr_a, rho_a, fr_b, rho_b, model.Pi)
        v_ba = rg.qrf_transform(fr_b, rho_b, fr_a, rho_a, model.Pi)
        comp = v_ba.matrix @ v_ab.matrix
        assert np.max(np.abs(comp - np.eye(comp.shape[0]))) < 1e-10

    def test_transforms_reduced_states(self, model, psi):
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        rho_a, rho_b = fr_a.grid[4], fr_b.grid[6]
        v = rg.qrf_transform(fr_a, rho_a, fr_b, rho_b, model.Pi)
        red_a = rg.reduce_state(fr_a, rho_a, psi)
        red_b = rg.reduce_state(fr_b, rho_b, psi)
        assert np.max(np.abs(v.apply(red_a) - red_b)) < 1e-10

    def test_same_frame_rejected(self, model):
        fr = model.frames["A"]
        with pytest.raises(SameFrame):
            rg.qrf_transform(fr, 0.0, fr, 0.0, model.Pi)

    def test_position_conjugation_modulo_period(self, model):
        # V q_B V^dag = -q_A + (rho_A + rho_B) modulo the lattice period
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        rho_a, rho_b = fr_a.grid[4], fr_b.grid[5]
        v = rg.qrf_transform(fr_a, rho_a, fr_b, rho_b, model.Pi)
        # on the A-reduced space (factors B, C) the position of B acts first
        qmat = md.position_matrix(8, 1.0, model.hbar)
        q_b = np.kron(qmat, np.eye(8))
        conj = rg.conjugate_observable(v, q_b)
        q_a = np.kron(qmat, np.eye(8))  # on the B-reduced space (A, C)
        target = -q_a + (rho_a + rho_b) * np.eye(64)
        diff = conj - target
        # diagonal in the A-position basis, entries multiples of the period
        F = fr_a.fourier_matrix() / np.sqrt(8)
        Ffull = np.kron(F, np.eye(8))
        d = Ffull.conj().T @ diff @ Ffull
        off = d - np.diag(np.diag(d))
        assert np.max(np.abs(off)) < 1e-9
        period = fr_a.period
        vals = np.diag(d).real
        mods = np.abs(np.remainder(vals + period / 2, period) - period / 2)
        assert np.max(mods) < 1e-9

    def test_momentum_conjugation(self, model):
        # V p_B V^dag = -p_A - G_S modulo the momentum period
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        rho_a, rho_b = fr_a.grid[4], fr_b.grid[4]
        v = rg.qrf_transform(fr_a, rho_a, fr_b, rho_b, model.Pi)
        pvals = model.space.factors[0].generator_spectrum
        p_b = np.kron(np.diag(pvals), np.eye(8))
        conj = rg.conjugate_observable(v, p_b)
        p_a = np.kron(np.diag(pvals), np.eye(8))
        p_c = np.kron(np.eye(8), np.diag(pvals))
        target = -p_a - p_c
        diff = np.diag(conj - target).real
        period = 8 * 1.0
        mods = np.abs(np.remainder(diff + period / 2, period) - period / 2)
        assert np.max(np.abs(conj - np.diag(np.diag(conj)))) < 1e-9
        assert np.max(mods) < 1e-9

    def test_identity_observable_fixed(self, model):
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        v = rg.qrf_transform(fr_a, 0.0, fr_b, 0.0, model.Pi)
        conj = rg.conjugate_observable(v, np.eye(64))
        assert np.max(np.abs(conj - np.eye(64))) < 1e-10

    def test_invariant_system_observable_unchanged(self, model):
        # f_S commuting with G_S stays put under the frame change
        fr_a, fr_b = model.frames["A"], model.frames["B"]
        v = rg.qrf_transform(fr_a, 0.0, fr_b, 0.0, model.Pi)
        pvals = model.space.factors[2].generator_spectrum
        f = np.kron(np.eye(8), np.diag(pvals))  # p_C on either reduced space
        conj = rg.conjugate_observable(v, f)
        assert np.max(np.abs(conj - f)) < 1e-10


class TestThetaGauge:
    def test_pi_theta_pi(self, model):
        fr = model.frames["A"]
        for j in (0, 3, 6):
            theta = rg.theta_gauge(fr, fr.grid[j])
            rep = rg.verify_gauge(theta, model.Pi)
            assert rep["valid"], rep

    def test_theta_identity_resolution(self, model):
        fr = model.frames["A"]
        acc = np.zeros((model.space.dim, model.space.dim), dtype=complex)
        for j in range(-4, 4):
            acc += rg.theta_gauge(fr, fr.grid[j + 4]).matrix
        assert np.max(np.abs(acc / 8 - np.eye(model.space.dim))) < 1e-10

    def test_theta_covariance(self, model):
        from scipy.linalg import expm

        fr = model.frames["A"]
        rho1, rho2 = fr.grid[2], fr.grid[5]
        t1 = rg.theta_gauge(fr, rho1).matrix
        t2 = rg.theta_gauge(fr, rho2).matrix
        u = expm(-1j * (rho2 - rho1) * model.constraint.matrix / model.hbar)
        assert np.max(np.abs(t2 - u @ t1 @ u.conj().T)) < 1e-9

    def test_system_projector_identities(self, model):
        fr = model.frames["A"]
        pi_hat = rg.system_projector(fr, model.Pi)
        P = model.Pi.matrix
        H = pi_hat.matrix
        # commensurate lattice frames are ideal: pi_hat is the identity
        assert np.max(np.abs(H - np.eye(model.space.dim))) < 1e-10
        theta = rg.theta_gauge(fr, fr.grid[3]).matrix
        assert np.max(np.abs(theta @ P @ theta - theta @ H)) < 1e-9
        assert np.max(np.abs(H @ P - P)) < 1e-10
        assert np.max(np.abs(P @ H - P)) < 1e-10

    def test_composite_gauge_is_gauge(self, model):
        rng = np.random.default_rng(67)
        fr = model.frames["A"]
        theta = rg.theta_gauge(fr, fr.grid[4])
        # hermitian Dirac observables commuting with C: functions of momenta
        o1 = np.diag(rng.normal(size=model.space.dim))
        o1 = model.Pi.matrix @ o1 @ model.Pi.matrix  # supported on the kernel
        o2 = np.diag(rng.normal(size=model.space.dim))
        o2 = model.Pi.matrix @ o2 @ model.Pi.matrix
        comp = rg.composite_gauge(theta, o1, o2, model.constraint)
        rep = rg.verify_gauge(comp, model.Pi)
        assert rep["valid"], rep

    def test_zero_map_invalid(self, model):
        zero = rg.GaugeMap(model.space,
                           np.zeros((model.space.dim, model.space.dim)))
        rep = rg.verify_gauge(zero, model.Pi)
        assert not rep["valid"]
        assert rep["pi_phi_pi"] >= 1.0 - 1e-12


class TestGaugeStateOperations:
    def frame_omega(self, model, label, rho, psi, degree=5):
        return ast.frame_state(model.space, model.constraint,
                               model.frames[label], rho, psi,
                               model.assignment, model.gens, degree)

    def test_gauge_transform_matches_direct_conditioning(self, model, psi):
        fr_b = model.frames["B"]
        rho_a, rho_b = model.frames["A"].grid[4], fr_b.grid[5]
        om_a = self.frame_omega(model, "A", rho_a, psi)
        om_b_direct = self.frame_omega(model, "B", rho_b, psi)
        theta_b = rg.theta_gauge(fr_b, rho_b)
        om_b = rg.gauge_transform_state(om_a, theta_b, model.Pi)
        g = model.gens
        assert abs(om_b.evaluate(g.one()) - 1.0) < 1e-10
        for el in (g.gen("q_A"), g.gen("p_A"), g.gen("q_C") * g.gen("p_C")):
            assert abs(om_b.evaluate(el) - om_b_direct.evaluate(el)) < 1e-9

    def test_dirac_values_invariant(self, model, psi):
        om_a = self.frame_omega(model, "A", 0.0, psi)
        theta_b = rg.theta_gauge(model.frames["B"], model.frames["B"].grid[2])
        om_b = rg.gauge_transform_state(om_a, theta_b, model.Pi)
        g = model.gens
        for name in ("p_A", "p_B", "p_C"):
            assert abs(om_a.evaluate(g.gen(name))
                       - om_b.evaluate(g.gen(name))) < 1e-10

    def test_idempotent_on_own_gauge(self, model, psi):
        rho = model.frames["A"].grid[4]
        om_a = self.frame_omega(model, "A", rho, psi)
        theta_a = rg.theta_gauge(model.frames["A"], rho)
        om2 = rg.gauge_transform_state(om_a, theta_a, model.Pi)
        g = model.gens
        for el in (g.gen("q_B"), g.gen("p_B"), g.gen("q_C")):
            assert abs(om2.evaluate(el) - om_a.evaluate(el)) < 1e-10


class TestGaugeFlow:
    def frame_omega(self, model, label, rho, psi, degree=5):
        return ast.frame_state(model.space, model.constraint,
                               model.frames[label], rho, psi,
                               model.assignment, model.gens, degree)

    def test_identity_flow_trivial_on_dirac(self, model, psi):
        om = self.frame_omega(model, "A", 0.0, psi)
        one = ks.identity_operator(model.space)
        флоу = rg.gauge_flow(om, one, 0.7, model.constraint)
        g = model.gens
        for name in ("p_A", "p_B", "p_C"):
            assert abs(флоу.evaluate(g.gen(name))
                       - om.evaluate(g.gen(name))) < 1e-10

    def test_finite_difference_derivative(self, model, psi):
        rng = np.random.default_rng(71)
        om = self.frame_omega(model, "A", 0.0, psi, degree=6)
        m = rng.normal(size=(8, 8))
        a = ks.factor_operator(model.space, 2, (m + m.T) / 2)
        g = model.gens
        b = g.gen("q_C") * g.gen("p_C")
        b_mat = ncalg.represent(b, model.space, {
            k: (v.dense() if isinstance(v, ks.FactorAction) else v)
            for k, v in model.assignment.items()})
        eps = 1e-5
        om_p = rg.gauge_flow(om, a, +eps, model.constraint)
        om_m = rg.gauge_flow(om, a, -eps, model.constraint)
        fd = (om_p.evaluate(b) - om_m.evaluate(b)) / (2 * eps)
        X = a.matrix @ model.constraint.matrix
        comm = b_mat @ X - X @ b_mat
        expected = np.vdot(om.bra, comm @ om.ket) / (1j * model.hbar)
        assert abs(fd - expected) / max(abs(expected), 1.0) < 1e-6

    def test_unit_flow_shifts_frame_reading(self):
        # flow by a = 1 advances the frame orientation reading by lam
        model = md.build_model(md.ModelSpec("nparticle", n_particles=3,
                                            lattice_size=32))
        psi = md.gaussian_physical_state(
            model, centers_x={0: 0.0, 1: 0.3, 2: -0.3},
            sigmas={1: 1.7, 2: 1.7})
        rho = model.frames["A"].grid[16]
        om = ast.frame_state(model.space, model.constraint,
                             model.frames["A"], rho, psi,
                             model.assignment, model.gens, 4)
        lam = model.frames["A"].spacing * 3
        flowed = rg.gauge_flow(om, ks.identity_operator(model.space), lam,
                               model.constraint)
        g = model.gens
        before = om.evaluate(g.gen("q_A"))
        after = flowed.evaluate(g.gen("q_A"))
        assert abs(after - before - lam) < 1e-8

    def test_ill_conditioned_flow_rejected(self, model, psi):
        om = self.frame_omega(model, "A", 0.0, psi)
        big = ks.factor_operator(model.space, 2,
                                 100.0 * np.eye(8))
        with pytest.raises(IllConditionedFlow):
            rg.gauge_flow(om, big, 10.0, model.constraint)
