import numpy as np
import pytest

from conftest import maxnorm
from qme import _random
from qme.classical import bayes_update
from qme.exceptions import (
    BadProjectorFamily,
    DimensionMismatch,
    IncompleteKrausSet,
    InfeasibleTarget,
    SupportViolation,
    ZeroEvidence,
)
from qme.linops import kron, partial_trace, projector, unitarity_defect
from qme.measurement import (
    KrausSet,
    appropriate_prior,
    block_projectors,
    complementary_prior,
    complementary_update,
    decohere,
    decohere_pointer,
    detector_prior,
    dilation_from_kraus,
    entangle_prior,
    evidence,
    joint_data_update,
    joint_diagonal,
    qbr_direct,
    qbr_entropic,
    quantum_jeffrey,
    simple_collapse,
    thermal_mean_energy,
    thermal_weak_collapse,
    weak_collapse,
)
from qme.validation import is_density_matrix

Z_PROJ = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
PLUS = projector([1, 1])


def _random_pair(rng, d, n):
    return _random.density(rng, d), KrausSet(_random.kraus_operators(rng, d, n))


def test_krausset_completeness():
    with pytest.raises(IncompleteKrausSet):
        KrausSet([np.diag([1.0, 0.0]), np.diag([0.0, 0.9])])
    K = KrausSet(Z_PROJ, labels=("up", "down"))
    assert K.index("down") == 1 and len(K) == 2


def test_decohere_examples(rng):
    assert maxnorm(decohere(PLUS, Z_PROJ), np.eye(2) / 2) < 1e-15
    blocky = np.diag([0.2, 0.3, 0.5])
    assert maxnorm(decohere(blocky, [np.diag(e) for e in np.eye(3)]), blocky) == 0
    # two-slit superposition: only the position diagonal survives
    psi = np.array([np.sqrt(0.3), np.sqrt(0.7) * np.exp(0.4j)])
    phi = np.outer(psi, psi.conj())
    assert maxnorm(decohere(phi, np.eye(2)), np.diag([0.3, 0.7])) < 1e-15


def test_decohere_idempotent_trace_preserving(rng):
    for _ in range(20):
        rho = _random.density(rng, 4)
        U = _random.unitary(rng, 4)
        P = [U[:, :2] @ U[:, :2].conj().T, U[:, 2:] @ U[:, 2:].conj().T]
        once = decohere(rho, P)
        assert abs(np.trace(once) - 1) < 1e-14
        assert maxnorm(decohere(once, P), once) < 1e-14
        # weight in each block is untouched
        for Q in P:
            assert abs(np.trace(Q @ once) - np.trace(Q @ rho)) < 1e-14


def test_decohere_bad_family():
    with pytest.raises(BadProjectorFamily):
        decohere(np.eye(2) / 2, [np.diag([1.0, 0.0])])
    with pytest.raises(BadProjectorFamily):
        decohere(np.eye(2) / 2, [PLUS, np.diag([0.0, 1.0]), np.diag([1.0, 0.0]) - PLUS])


def test_entangle_prior_examples(rng):
    phi = _random.density(rng, 3)
    ready = np.zeros((1, 1))
    ready[0, 0] = 1
    assert maxnorm(entangle_prior(phi, [np.eye(3)]), np.kron(ready, phi)) < 1e-15
    # explicit 4x4 for z-projectors on |+>: (|00> + |11>)/sqrt(2)
    joint = entangle_prior(PLUS, Z_PROJ)
    assert maxnorm(joint, projector([1, 0, 0, 1])) < 1e-15
    psi = np.linalg.eigh(joint)[1][:, -1].reshape(2, 2)
    assert np.sum(np.linalg.svd(psi, compute_uv=False) > 1e-12) == 2
    K = KrausSet(_random.kraus_operators(rng, 3, 3))
    j = entangle_prior(phi, K)
    assert maxnorm(partial_trace(j, (3, 3), "x"), sum(A @ phi @ A.conj().T for A in K)) < 1e-14


def test_entangle_matches_dilation(rng):
    for n in (1, 2, 3):
        phi, K = _random_pair(rng, 3, n)
        U = dilation_from_kraus(K)
        assert maxnorm(U.apply(phi), entangle_prior(phi, K)) < 1e-12


def test_dilation_examples(rng):
    assert maxnorm(dilation_from_kraus([np.eye(2)]).unitary, np.eye(2)) < 1e-15
    U = dilation_from_kraus(Z_PROJ)
    assert unitarity_defect(U.unitary) < 1e-12
    for x in range(2):
        assert maxnorm(U.block(x), Z_PROJ[x]) == 0
    # copies z information: |0>_x |t> -> |t>_x |t>
    for t in range(2):
        out = U.unitary @ np.kron([1, 0], np.eye(2)[t])
        assert maxnorm(np.abs(out), np.kron(np.eye(2)[t], np.eye(2)[t])) < 1e-15
    K = KrausSet(_random.kraus_operators(rng, 2, 3))
    D = dilation_from_kraus(K)
    assert np.max(np.abs(D.unitary.conj().T @ D.unitary - np.eye(6))) < 1e-10
    for A, B in zip(K, D.kraus_blocks()):
        assert maxnorm(A, B) < 1e-10


def test_appropriate_prior_examples(rng):
    phi = _random.density(rng, 2)
    assert maxnorm(appropriate_prior(phi, [np.eye(2)]), phi) < 1e-15
    expected = 0.5 * projector([1, 0, 0, 0]) + 0.5 * projector([0, 0, 0, 1])
    assert maxnorm(appropriate_prior(PLUS, Z_PROJ), expected) < 1e-15
    for d, n in ((2, 2), (3, 2), (2, 4)):
        phi, K = _random_pair(rng, d, n)
        tilde = appropriate_prior(phi, K)
        assert maxnorm(tilde, decohere(entangle_prior(phi, K), block_projectors(n, d))) < 1e-14
        assert maxnorm(tilde, detector_prior(phi, K)) < 1e-13
        assert maxnorm(tilde, decohere_pointer(entangle_prior(phi, K), (n, d))) < 1e-14
        assert np.all(joint_diagonal(tilde, (n, d)).sum(axis=1) > 0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        appropriate_prior(np.eye(3) / 3, Z_PROJ)


def test_qbr_direct_examples():
    assert maxnorm(qbr_direct(projector([1, 0]), Z_PROJ, 0), projector([1, 0])) < 1e-15
    assert maxnorm(qbr_direct(np.eye(2) / 2, Z_PROJ, 0), projector([1, 0])) < 1e-15
    with pytest.raises(ZeroEvidence):
        qbr_direct(projector([1, 0]), Z_PROJ, 1)


def test_qbr_entropic_examples():
    assert maxnorm(qbr_entropic(projector([1, 0]), Z_PROJ, 0), projector([1, 0])) < 1e-15
    assert maxnorm(qbr_entropic(np.eye(2) / 2, Z_PROJ, 0), projector([1, 0])) < 1e-15
    with pytest.raises(ZeroEvidence):
        qbr_entropic(projector([1, 0]), Z_PROJ, 1)
    for route in ("closed_form", "generic"):
        assert maxnorm(qbr_entropic(PLUS, Z_PROJ, 1, route), projector([0, 1])) < 1e-10


def test_qbr_entropic_matches_direct(rng):
    for _ in range(30):
        d, n = (int(v) for v in rng.integers(2, 5, size=2))
        phi, K = _random_pair(rng, d, n)
        x = int(rng.integers(n))
        direct = qbr_direct(phi, K, x)
        assert maxnorm(qbr_entropic(phi, K, x), direct) < 1e-10
        assert is_density_matrix(direct)


def test_qbr_generic_route_matches(rng):
    for _ in range(5):
        phi, K = _random_pair(rng, 2, 3)
        assert maxnorm(qbr_entropic(phi, K, 2, route="generic"), qbr_direct(phi, K, 2)) < 1e-9


def test_projective_qbr_is_simple_collapse(rng):
    phi = _random.density(rng, 3)
    U = _random.unitary(rng, 3)
    K = KrausSet.projective(3, U)
    for x in range(3):
        collapsed = simple_collapse(phi, x, U)
        assert maxnorm(qbr_entropic(phi, K, x), collapsed) < 1e-12
        assert maxnorm(collapsed, np.outer(U[:, x], U[:, x].conj())) < 1e-12


def test_qbr_posterior_probabilities_match_classical_bayes(rng):
    phi, K = _random_pair(rng, 3, 3)
    basis = np.eye(3)
    # induced joint p(x, theta) = <theta| A_x phi A_x^dagger |theta>
    joint = np.array([[np.real(A @ phi @ A.conj().T)[t, t] for t in range(3)] for A in K])
    for x in range(3):
        post = qbr_entropic(phi, K, x)
        assert np.allclose(np.real(np.diag(basis.T @ post @ basis)), bayes_update(joint, x), atol=1e-12)


def test_classical_embedding(rng):
    for _ in range(10):
        d, n = 3, 4
        p = _random.probability_vector(rng, d, floor=0.1)
        L = rng.random((n, d)) + 0.05
        L /= L.sum(axis=0)
        K = [np.diag(np.sqrt(row)) for row in L]
        joint = L * p
        for x in range(n):
            diag = np.real(np.diag(qbr_direct(np.diag(p), K, x)))
            assert np.max(np.abs(diag - bayes_update(joint, x))) <= 1e-12


def test_non_selective_consistency(rng):
    phi, K = _random_pair(rng, 3, 4)
    ev = evidence(phi, K)
    mix = sum(e * qbr_direct(phi, K, x) for x, e in enumerate(ev))
    assert maxnorm(mix, partial_trace(appropriate_prior(phi, K), (4, 3), "x")) < 1e-10


def test_jeffrey_examples(rng):
    phi, K = _random_pair(rng, 3, 3)
    for x in range(3):
        assert maxnorm(quantum_jeffrey(phi, K, np.eye(3)[x]), qbr_direct(phi, K, x)) < 1e-14
    assert maxnorm(quantum_jeffrey(phi, K, evidence(phi, K)), sum(A @ phi @ A.conj().T for A in K)) < 1e-14
    assert maxnorm(quantum_jeffrey(np.eye(2) / 2, Z_PROJ, [0.7, 0.3]), np.diag([0.7, 0.3])) < 1e-15
    assert maxnorm(weak_collapse(PLUS, [0.7, 0.3]), np.diag([0.7, 0.3])) < 1e-15
    with pytest.raises(SupportViolation):
        quantum_jeffrey(projector([1, 0]), Z_PROJ, [0.5, 0.5])


def test_jeffrey_generic_route(rng):
    phi, K = _random_pair(rng, 2, 3)
    rx = _random.probability_vector(rng, 3, floor=0.1)
    assert maxnorm(quantum_jeffrey(phi, K, rx, route="generic"), quantum_jeffrey(phi, K, rx)) < 1e-9
    joint = joint_data_update(phi, K, rx)
    assert np.allclose(joint_diagonal(joint, (3, 2)).sum(axis=1), rx, atol=1e-14)


def test_complementary_examples(rng):
    rx, rt = _random.density(rng, 2), _random.density(rng, 3)
    prod = kron(rx, rt)
    dg = joint_diagonal(prod, (2, 3))
    assert np.allclose(joint_diagonal(complementary_prior(prod, (2, 3)), (2, 3)), dg, atol=1e-15)
    # Bell: both decoherences give the same matrix, so use a tilted entangled state
    bell = projector([1, 0, 0, 1])
    assert np.allclose(joint_diagonal(complementary_prior(bell, (2, 2)), (2, 2)), np.eye(2) / 2)
    tilted = projector([1, 1, 0, 1j])
    phi_t, vt = decohere_pointer(tilted, (2, 2)), complementary_prior(tilted, (2, 2))
    assert maxnorm(phi_t, vt) > 0.1
    assert np.allclose(joint_diagonal(phi_t, (2, 2)), joint_diagonal(vt, (2, 2)), atol=1e-15)


def test_complementary_conditionals(rng):
    for _ in range(10):
        J = _random.density(rng, 6)
        a = joint_diagonal(decohere_pointer(J, (2, 3)), (2, 3))
        b = joint_diagonal(complementary_prior(J, (2, 3)), (2, 3))
        assert np.allclose(a / a.sum(axis=1, keepdims=True), b / b.sum(axis=1, keepdims=True), atol=1e-14)
        post = complementary_update(J, (2, 3), 1)
        assert np.allclose(np.real(np.diag(post)), b[:, 1] / b[:, 1].sum(), atol=1e-14)


def test_thermal_examples():
    K = Z_PROJ
    res = thermal_weak_collapse(np.eye(2) / 2, K, [0.0, 1.0], 0.5)
    assert abs(res.beta) < 1e-12
    assert maxnorm(res.state, np.eye(2) / 2) < 1e-12
    res = thermal_weak_collapse(np.eye(2) / 2, K, [0.0, 1.0], 0.8)
    assert res.beta == pytest.approx(np.log(4), abs=1e-10)
    assert np.allclose(res.outcome_probs, [0.2, 0.8], atol=1e-12)
    with pytest.raises(InfeasibleTarget):
        thermal_weak_collapse(np.eye(2) / 2, K, [0.0, 1.0], 1.0)


def test_thermal_reinserts_target(rng):
    for _ in range(10):
        phi, K = _random_pair(rng, 3, 4)
        E = rng.normal(size=4)
        ev = evidence(phi, K)
        t = E.min() + (0.05 + 0.9 * rng.random()) * (E.max() - E.min())
        res = thermal_weak_collapse(phi, K, E, t)
        assert abs(thermal_mean_energy(res.beta, E, ev) - t) <= 1e-9
        assert abs(res.outcome_probs.sum() - 1) < 1e-14 and np.all(res.outcome_probs >= 0)
        assert maxnorm(res.state, quantum_jeffrey(phi, K, res.outcome_probs)) < 1e-14
