"""Window Gramian, steering controls, and the regularized-inverse identity."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from wavesteer.gramian import (
    ControlSignal,
    SteeringWindow,
    adjoint_map,
    assemble_gramian,
    controllability_map,
    energy_vector,
    input_map,
    state_from_energy,
    steering_error,
    synthesize_tail,
    window_nodes,
)
from wavesteer.semigroup import Semigroup
from wavesteer.spectral import ActuatorRegion, DomainSpec, build_basis, overlap_matrix
from wavesteer.state import ModalState, z_half_norm


def full_generator_energy(basis, eta, gamma):
    """Dense 2N x 2N generator in energy coordinates, for slow oracles.

    State ordering [sqrt(lam)*w, v]; independent of the blockwise closed
    forms under test.
    """
    n = basis.n_modes
    lam = basis.eigenvalues
    s = np.sqrt(lam)
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.diag(s)
    a[n:, :n] = np.diag(-gamma * lam / s)
    a[n:, n:] = np.diag(-eta * s)
    return a


def test_gramian_matches_entrywise_quadrature():
    domain = DomainSpec(np.pi, 64)
    basis = build_basis(domain, 2)
    sg = Semigroup(basis, 1.1, 0.9)
    overlap = overlap_matrix(basis, ActuatorRegion(0.5, 2.0))
    window = SteeringWindow(1.0, 0.3, 64)
    gram = assemble_gramian(sg, overlap, window)

    a_full = full_generator_energy(basis, 1.1, 0.9)
    b_full = np.vstack([np.zeros((2, 2)), overlap.matrix])

    def integrand(s, i, j):
        m = expm(a_full * (window.horizon - s)) @ b_full
        return (m @ m.T)[i, j]

    for i in range(4):
        for j in range(4):
            want, _ = quad(integrand, window.start, window.horizon, args=(i, j), limit=200)
            assert abs(gram.matrix[i, j] - want) < 1e-10, f"entry ({i}, {j})"


def test_gramian_symmetric_and_positive_semidefinite():
    basis = build_basis(DomainSpec(np.pi, 64), 8)
    sg = Semigroup(basis, 0.8, 1.3)
    overlap = overlap_matrix(basis, ActuatorRegion(0.4, 2.6))
    for delta in (0.05, 0.4):
        gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, delta, 48))
        assert np.max(np.abs(gram.matrix - gram.matrix.T)) <= 1e-12
        assert gram.eigenvalues[0] >= -1e-10


def test_full_domain_gramian_is_block_diagonal():
    # with the identity overlap the modes never mix, so inter-mode entries vanish
    n = 6
    basis = build_basis(DomainSpec(np.pi, 64), n)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, 0.3, 64))
    for i in range(2 * n):
        for j in range(2 * n):
            if i % n != j % n:
                assert abs(gram.matrix[i, j]) < 1e-12, f"cross-mode entry ({i}, {j})"


def test_single_mode_velocity_entry_tracks_window_width():
    basis = build_basis(DomainSpec(np.pi, 64), 1)
    sg = Semigroup(basis, 0.5, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    delta = 1e-3
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, delta, 32))
    vv = gram.matrix[1, 1]
    assert abs(vv - delta) <= 0.1 * delta


def test_gramian_norm_scales_linearly_with_width():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    slopes = []
    for delta in (1e-2, 5e-3, 2.5e-3):
        gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, delta, 32))
        slopes.append(np.linalg.norm(gram.matrix, 2) / delta)
    for s in slopes[1:]:
        assert abs(s - slopes[0]) <= 0.15 * slopes[0]


def test_node_count_is_converged():
    basis = build_basis(DomainSpec(np.pi, 64), 8)
    sg = Semigroup(basis, 1.4, 0.8)
    overlap = overlap_matrix(basis, ActuatorRegion(0.3, 2.8))
    window = SteeringWindow(1.0, 0.25, 64)
    coarse = assemble_gramian(sg, overlap, window)
    fine = assemble_gramian(sg, overlap, window, n_nodes=128)
    assert np.max(np.abs(coarse.matrix - fine.matrix)) < 1e-10


def test_positive_on_every_canonical_direction():
    basis = build_basis(DomainSpec(np.pi, 128), 16)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, 0.2, 64))
    for i in range(32):
        e = np.zeros(32)
        e[i] = 1.0
        assert e @ gram.apply(e) > 0.0, f"direction {i}"


def test_adjoint_pairing_against_quadrature():
    # <G u, z>_E must equal the window integral of <u(s), (G* z)(s)>
    domain = DomainSpec(np.pi, 64)
    basis = build_basis(domain, 4)
    sg = Semigroup(basis, 1.2, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.4, 2.2))
    window = SteeringWindow(1.0, 0.3, 64)
    rng = np.random.default_rng(71)
    lam = basis.eigenvalues
    for _ in range(5):
        c0 = rng.standard_normal(4)
        c1 = rng.standard_normal(4)
        control = lambda s: c0 + c1 * (s - window.start)
        z = ModalState(rng.standard_normal(4), rng.standard_normal(4))

        gu = controllability_map(sg, overlap, window, control)
        lhs = float(lam @ (gu.w * z.w) + gu.v @ z.v)

        rhs, _ = quad(
            lambda s: float(np.dot(control(s), adjoint_map(sg, overlap, window, z, s))),
            window.start,
            window.horizon,
            limit=200,
        )
        assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))


def test_regularized_solve_matches_dense_oracle():
    basis = build_basis(DomainSpec(np.pi, 64), 6)
    sg = Semigroup(basis, 0.9, 1.1)
    overlap = overlap_matrix(basis, ActuatorRegion(0.2, 2.9))
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, 0.2, 48))
    rng = np.random.default_rng(17)
    for alpha in (1.0, 1e-3, 1e-7):
        rhs = rng.standard_normal(12)
        got = gram.solve_regularized(alpha, rhs)
        want = np.linalg.solve(gram.matrix + alpha * np.eye(12), rhs)
        assert np.max(np.abs(got - want)) < 1e-10 * max(1.0, np.max(np.abs(want)))
    with pytest.raises(ValueError):
        gram.solve_regularized(0.0, rng.standard_normal(12))


def test_minimum_energy_control_closes_all_but_the_residual():
    # G applied to the synthesized control through the shared quadrature rule
    # must land exactly at h - alpha (alpha I + Q)^{-1} h
    basis = build_basis(DomainSpec(np.pi, 64), 8)
    sg = Semigroup(basis, 1.3, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.3, 2.5))
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, 0.25, 64))
    rng = np.random.default_rng(404)
    for alpha in (1.0, 1e-2, 1e-4):
        for _ in range(50):
            h = rng.standard_normal(16)
            x_hat = gram.solve_regularized(alpha, h)
            u_nodes = np.stack([gram.node_maps[k].T @ x_hat for k in range(64)])
            reached = gram.apply_control(u_nodes)
            want = h - alpha * x_hat
            gap = np.linalg.norm(reached - want)
            assert gap <= 1e-8 * np.linalg.norm(h), f"alpha={alpha}: gap {gap}"


def test_steering_error_monotone_and_vanishing_in_alpha():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.2, 0.9)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    gram = assemble_gramian(sg, overlap, SteeringWindow(0.5, 0.1, 64))
    rng = np.random.default_rng(7)
    h = rng.standard_normal(8)
    alphas = [10.0 ** (-k) for k in range(1, 7)]
    errors = [steering_error(gram, a, h) for a in alphas]
    for e1, e2 in zip(errors, errors[1:]):
        assert e2 <= e1 + 1e-12
    assert errors[-1] / errors[0] <= 1e-2


def test_error_bounded_by_worst_eigenvalue_fraction():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.9, 2.1))
    gram = assemble_gramian(sg, overlap, SteeringWindow(1.0, 0.2, 48))
    rng = np.random.default_rng(13)
    for _ in range(20):
        h = rng.standard_normal(8)
        alpha = 10.0 ** rng.uniform(-6, 0)
        err = steering_error(gram, alpha, h)
        bound = alpha / (alpha + gram.q_min) * np.linalg.norm(h)
        assert err <= bound + 1e-12


def test_energy_vector_round_trip():
    basis = build_basis(DomainSpec(np.pi, 64), 5)
    rng = np.random.default_rng(3)
    z = ModalState(rng.standard_normal(5), rng.standard_normal(5))
    vec = energy_vector(z, basis)
    assert abs(np.linalg.norm(vec) - z_half_norm(z, basis)) < 1e-14
    back = state_from_energy(vec, basis)
    assert np.max(np.abs(back.w - z.w)) < 1e-14
    assert np.max(np.abs(back.v - z.v)) < 1e-14
    with pytest.raises(ValueError):
        state_from_energy(np.zeros(7), basis)


def test_window_validation_and_node_rule():
    with pytest.raises(ValueError):
        SteeringWindow(1.0, 0.0, 16)
    with pytest.raises(ValueError):
        SteeringWindow(1.0, 1.5, 16)
    with pytest.raises(ValueError):
        SteeringWindow(-1.0, 0.5, 16)
    with pytest.raises(ValueError):
        SteeringWindow(1.0, 0.5, 1)
    window = SteeringWindow(1.0, 0.25, 16)
    nodes, weights = window_nodes(window)
    assert np.all(nodes > window.start) and np.all(nodes < window.horizon)
    assert abs(np.sum(weights) - window.width) < 1e-14
    assert window.contains(window.start) and window.contains(window.horizon)
    assert not window.contains(window.start - 1e-6)


def test_window_seam_tolerates_grid_roundoff():
    # a grid time one or two ulps past the seam at 1.85 is the same grid
    # node and must be routed exactly like the seam itself
    basis = build_basis(DomainSpec(np.pi, 64), 3)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    window = SteeringWindow(2.0, 0.15, 16)
    drifted = np.nextafter(np.nextafter(1.85, 2.0), 2.0)
    assert drifted != 1.85 and abs(drifted - 1.85) < window.edge_tol
    assert window.contains(drifted)

    base = lambda t: np.full(3, 7.0)
    sig = ControlSignal(
        semigroup=sg, overlap=overlap, window=window, base=base, x_hat=np.ones(6)
    )
    # the drifted time must route to the tail (not the base law), matching
    # the seam value up to the trivial difference in evaluation time
    assert not np.array_equal(sig.value(drifted), base(drifted))
    assert np.max(np.abs(sig.value(drifted) - sig.value(1.85))) < 1e-12
    assert np.array_equal(sig.value_left(drifted), base(drifted))
    # the final node can also land one ulp past the horizon; the tail must
    # still evaluate there instead of failing on a negative remaining time
    past_end = 1000 * 0.002 + 4.4e-16
    assert np.all(np.isfinite(sig.value(past_end)))


def test_control_signal_routes_base_and_tail():
    basis = build_basis(DomainSpec(np.pi, 64), 3)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    window = SteeringWindow(1.0, 0.2, 32)
    base = lambda t: np.full(3, 2.0 + t)
    x_hat = np.ones(6)

    no_tail = ControlSignal(semigroup=sg, overlap=overlap, window=window, base=base)
    assert np.array_equal(no_tail.value(0.9), base(0.9))
    assert np.array_equal(no_tail.value_left(1.0), base(1.0))

    with_tail = ControlSignal(
        semigroup=sg, overlap=overlap, window=window, base=base, x_hat=x_hat
    )
    assert np.array_equal(with_tail.value(0.5), base(0.5))
    # right limit at the seam switches to the tail; left limit stays on base
    seam = window.start
    assert not np.array_equal(with_tail.value(seam), base(seam))
    assert np.array_equal(with_tail.value_left(seam), base(seam))
    inside = 0.9
    tail_val = with_tail.value(inside)
    assert np.array_equal(with_tail.value_left(inside), tail_val)
    want = adjoint_map(sg, overlap, window, state_from_energy(x_hat, basis), inside)
    assert np.max(np.abs(tail_val - want)) < 1e-14


def test_synthesized_tail_reaches_linear_target_exactly():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.1, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    window = SteeringWindow(1.0, 0.2, 64)
    gram = assemble_gramian(sg, overlap, window)
    rng = np.random.default_rng(55)
    handoff = ModalState(rng.standard_normal(4), rng.standard_normal(4))
    target = ModalState(rng.standard_normal(4), rng.standard_normal(4))
    alpha = 1e-3

    tail = synthesize_tail(gram, sg, overlap, alpha, handoff, target)
    u_nodes = np.stack([tail.value(s) for s in gram.nodes])
    reached = energy_vector(sg.apply(window.width, handoff), basis) + gram.apply_control(
        u_nodes
    )
    residual = energy_vector(target, basis) - reached
    assert np.linalg.norm(residual - alpha * tail.x_hat) < 1e-12
    assert abs(np.linalg.norm(residual) - steering_error(gram, alpha, tail.defect)) < 1e-12


def test_synthesized_tail_with_auxiliary_law_keeps_the_identity():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.1, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.4, 2.4))
    window = SteeringWindow(1.0, 0.2, 64)
    gram = assemble_gramian(sg, overlap, window)
    rng = np.random.default_rng(56)
    handoff = ModalState(rng.standard_normal(4), rng.standard_normal(4))
    target = ModalState(rng.standard_normal(4), rng.standard_normal(4))
    aux = lambda s: np.sin(np.full(4, 3.0 * s))
    alpha = 1e-2

    tail = synthesize_tail(gram, sg, overlap, alpha, handoff, target, aux=aux)
    u_nodes = np.stack([tail.value(s) for s in gram.nodes])
    reached = energy_vector(sg.apply(window.width, handoff), basis) + gram.apply_control(
        u_nodes
    )
    residual = energy_vector(target, basis) - reached
    assert np.linalg.norm(residual - alpha * tail.x_hat) < 1e-12


def test_zero_defect_produces_zero_tail():
    basis = build_basis(DomainSpec(np.pi, 64), 4)
    sg = Semigroup(basis, 1.1, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    window = SteeringWindow(1.0, 0.2, 32)
    gram = assemble_gramian(sg, overlap, window)
    rng = np.random.default_rng(57)
    handoff = ModalState(rng.standard_normal(4), rng.standard_normal(4))
    target = sg.apply(window.width, handoff)  # the free flight already lands there
    tail = synthesize_tail(gram, sg, overlap, 1e-4, handoff, target)
    assert np.max(np.abs(tail.x_hat)) < 1e-12
    assert np.max(np.abs(tail.value(0.95))) < 1e-12


def test_input_map_hits_velocity_only():
    basis = build_basis(DomainSpec(np.pi, 64), 5)
    overlap = overlap_matrix(basis, ActuatorRegion(0.5, 2.0))
    u = np.arange(1.0, 6.0)
    z = input_map(u, overlap)
    assert np.array_equal(z.w, np.zeros(5))
    assert np.allclose(z.v, overlap.matrix @ u, rtol=0, atol=0)


def test_adjoint_map_rejects_times_outside_window():
    basis = build_basis(DomainSpec(np.pi, 64), 3)
    sg = Semigroup(basis, 1.0, 1.0)
    overlap = overlap_matrix(basis, ActuatorRegion(0.0, np.pi))
    window = SteeringWindow(1.0, 0.2, 16)
    with pytest.raises(ValueError):
        adjoint_map(sg, overlap, window, ModalState.zero(3), 0.5)
