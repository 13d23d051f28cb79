import math

import numpy as np
import pytest

from armchair.flatband import (
    EdgeTable, build_psi, case_of, decompose, gram_matrix, kappas, kirchhoff_residual, phi_l2_norm,
    reconstruct, translate, vertex_values,
)
from armchair.hill import dirichlet_eigenvalues
from armchair.monodromy import TubeParams
from armchair.potential import Potential, parse_potential


def test_free_case_b():
    a, b = build_psi(Potential.zero(), math.pi**2, TubeParams(1, 0))
    assert a.case == b.case == "b"
    # psi_{0,1} = psi_{0,3} = -phi1' phi = phi and psi_{0,5} = -phi
    assert a.table[(0, 1)] == pytest.approx(1) and a.table[(0, 3)] == pytest.approx(1)
    assert a.table[(0, 5)] == -1 and b.table[(0, 5)] == -1
    assert a.table[(1, 4)] == 1 and b.table[(1, 4)] == 1


def test_free_case_a_kappas():
    p = TubeParams(4, 1)
    a, _ = build_psi(Potential.zero(), math.pi**2, p)
    assert a.case == "a"
    k1, k2 = kappas(-1.0, p)
    assert k1 == pytest.approx(1 - 1j) and k2 == pytest.approx(1 - 1j)
    assert a.table[(0, 6)] == pytest.approx(k2)


def test_case_dichotomy():
    assert case_of(1.0, TubeParams(3, 0)) == "b"
    assert case_of(-1.0, TubeParams(3, 0)) == "b"
    assert case_of(1.0, TubeParams(3, 1)) == "a"
    assert case_of(1.3, TubeParams(3, 0)) == "a"


def test_not_dirichlet():
    with pytest.raises(ValueError):
        build_psi(Potential.zero(), 5.0, TubeParams(1, 0))


def test_kirchhoff_examples():
    q = parse_potential("delta g=10 a=0.5")
    mu = dirichlet_eigenvalues(q, 100)[0]
    p = TubeParams(4, 1)
    a, b = build_psi(q, mu, p)
    assert kirchhoff_residual(a.table, q, mu, p) <= 1e-10
    assert kirchhoff_residual(b.table, q, mu, p) <= 1e-10
    bad = EdgeTable(dict(a.coeffs))
    bad.coeffs[(0, 6)] *= 1.1
    assert kirchhoff_residual(bad, q, mu, p) > 1e-3
    assert kirchhoff_residual(EdgeTable(), q, mu, p) == 0.0


def test_vertex_vanishing(any_q):
    _, q = any_q
    for mu in dirichlet_eigenvalues(q, 200)[:3]:
        for k in range(3):
            a, b = build_psi(q, mu, TubeParams(3, k))
            assert vertex_values(a.table, q, mu) <= 1e-12
            assert vertex_values(b.table, q, mu) <= 1e-12


def test_decompose_basis_and_linearity():
    q = parse_potential("delta g=5 a=0.3")
    mu = dirichlet_eigenvalues(q, 100)[1]
    p = TubeParams(5, 2)
    a, b = build_psi(q, mu, p)
    c = decompose(a.table, q, mu, p)
    assert c.keys() == {(0, 1)} and c[(0, 1)] == pytest.approx(1)
    f = translate(a, 3).scaled(2) - translate(b, 3)
    c = decompose(f, q, mu, p)
    assert set(c) == {(3, 1), (3, 2)}
    assert c[(3, 1)] == pytest.approx(2) and c[(3, 2)] == pytest.approx(-1)


def test_decompose_rejects_outside_span():
    q = Potential.zero()
    mu = math.pi**2
    p = TubeParams(4, 1)
    with pytest.raises(ValueError):
        decompose(EdgeTable({(0, 2): 1.0}), q, mu, p)


@pytest.mark.parametrize("N,k", [(1, 0), (4, 0), (4, 1), (4, 2), (5, 3)])
def test_round_trip_random(N, k):
    q = parse_potential("delta g=10 a=0.5")
    mu = dirichlet_eigenvalues(q, 100)[0]
    p = TubeParams(N, k)
    a, b = build_psi(q, mu, p)
    rng = np.random.default_rng(N * 10 + k)
    c = {(n, nu): complex(*rng.normal(size=2)) for n in range(-5, 6) for nu in (1, 2) if rng.random() < 0.7}
    d = decompose(reconstruct(c, a, b), q, mu, p)
    for key in set(c) | set(d):
        assert abs(d.get(key, 0) - c.get(key, 0)) <= 1e-8


def test_golden_ratio_k0_no_singularity():
    # k = 0 and phi1'^2 = (1 + sqrt 5)/2 makes kappa1 kappa2 = 1; the support
    # recursion does not divide by kappa1 kappa2 - 1
    from armchair.flatband import _psi_tables, _Point
    P = math.sqrt((1 + math.sqrt(5)) / 2)
    p = TubeParams(3, 0)
    k1, k2 = kappas(P, p)
    assert abs(k1 * k2 - 1) < 1e-12
    t1, t2 = _psi_tables(_Point(1.0, 0.0, P, p.s), p, "a")
    assert np.isfinite(t1.max_abs()) and np.isfinite(t2.max_abs())


def test_phi_norm_free():
    # phi = sin(n pi t)/(n pi), squared norm 1/(2 (n pi)^2)
    for n in (1, 2):
        assert phi_l2_norm(Potential.zero(), (n * math.pi) ** 2) == pytest.approx(
            math.sqrt(0.5) / (n * math.pi), rel=1e-10)


def test_gram_well_conditioned():
    q = parse_potential("poly [0,1] 1 0 -1")
    mu = dirichlet_eigenvalues(q, 100)[0]
    G = gram_matrix(q, mu, TubeParams(4, 1), m=8)
    assert G.shape == (34, 34)
    assert np.allclose(G, G.conj().T)
    ev = np.linalg.eigvalsh(G)
    assert ev[0] > 1e-6 * ev[-1]
