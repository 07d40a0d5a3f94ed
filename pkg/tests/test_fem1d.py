import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helmqa import densela, fem1d
from helmqa.errors import NonConformingMesh, SingularOperator, UnsupportedOrder, ZeroSource


def test_gll_nodes_known_values():
    assert np.allclose(fem1d.gll_nodes(1), [-1, 1])
    assert np.allclose(fem1d.gll_nodes(2), [-1, 0, 1])
    assert np.allclose(fem1d.gll_nodes(3), [-1, -1 / math.sqrt(5), 1 / math.sqrt(5), 1])
    s = math.sqrt(3 / 7)
    assert np.allclose(fem1d.gll_nodes(4), [-1, -s, 0, s, 1])


@given(st.integers(1, 16))
def test_gll_nodes_symmetric_sorted(p):
    x = fem1d.gll_nodes(p)
    assert len(x) == p + 1
    assert np.all(np.diff(x) > 0)
    assert np.allclose(x, -x[::-1], atol=1e-14)


def test_unsupported_order():
    with pytest.raises(UnsupportedOrder):
        fem1d.gll_nodes(0)
    with pytest.raises(UnsupportedOrder):
        fem1d.reference_nodes(17, "equispaced")


@given(st.integers(1, 8), st.sampled_from(["gll", "equispaced"]))
def test_lagrange_cardinal_and_partition(p, family):
    nodes = fem1d.reference_nodes(p, family)
    val, der = fem1d.lagrange_basis(nodes, nodes)
    assert np.allclose(val, np.eye(p + 1), atol=1e-10)
    x = np.linspace(-1, 1, 7)
    val, der = fem1d.lagrange_basis(nodes, x)
    assert np.allclose(val.sum(axis=1), 1.0)
    assert np.allclose(der.sum(axis=1), 0.0, atol=1e-8)


def test_p1_element_matrices_by_hand():
    # two elements of length 1/2, c = 1, k0 = 2: K = -(1/h)[[2,-1],[-1,1]], Mt = h/6 [[4,1],[1,2]]
    prob = fem1d.assemble(2, 1, fem1d.MaterialProfile.homogeneous(1.0), k0=2.0)
    h = 0.5
    assert np.allclose(prob.K, -np.array([[2, -1], [-1, 1]]) / h)
    assert np.allclose(prob.Mtilde, h / 6 * np.array([[4, 1], [1, 2]]))
    assert np.allclose(prob.M, 4.0 * prob.Mtilde)
    assert np.allclose(prob.Ktilde, prob.K)


def test_single_element_frequency():
    # one linear element: -K~ = 1, M~ = 1/3, so omega^2 = 3
    prob = fem1d.assemble(1, 1, fem1d.MaterialProfile.homogeneous(1.0))
    g = fem1d.homogeneous_gevp(prob)
    assert densela.generalized_eigen(g.H, g.M)[0].value == pytest.approx(3.0)


def test_frequencies_converge_to_continuum():
    # uniform medium: omega_n = (n + 1/2) pi
    prob = fem1d.assemble(8, 4, fem1d.MaterialProfile.homogeneous(1.0))
    g = fem1d.homogeneous_gevp(prob)
    vals = [p.value for p in densela.generalized_eigen(g.H, g.M)[:3]]
    w = fem1d.frequencies(vals)
    assert np.allclose(w, (np.arange(3) + 0.5) * np.pi, rtol=1e-7)


def test_source_load_p1():
    prob = fem1d.assemble(4, 1, fem1d.MaterialProfile.homogeneous(1.0),
                          source=lambda x: np.ones_like(x))
    assert np.allclose(prob.f, [0.25, 0.25, 0.25, 0.125])


def test_vacuum_silica_material_and_interface():
    mat = fem1d.MaterialProfile()
    assert mat.speed(0.25) == 1.0
    assert mat.speed(0.75) == pytest.approx(1 / math.sqrt(3.9))
    with pytest.raises(NonConformingMesh):
        fem1d.assemble(3, 1, mat)
    prob = fem1d.assemble(2, 3, mat, k0=1.0)
    # k^2 = 3.9 k0^2 in SiO2
    assert prob.n_dof == 6


def test_operators_symmetric():
    prob = fem1d.assemble(4, 3, k0=math.pi)
    for m in (prob.K, prob.M, prob.Ktilde, prob.Mtilde, prob.A_normal):
        assert densela.is_symmetric(m)
    assert np.allclose(prob.b, prob.operator.T @ prob.f)


def test_normal_gevp_errors():
    prob = fem1d.assemble(4, 1, source=fem1d.zero_source)
    with pytest.raises(ZeroSource):
        fem1d.normal_gevp(prob)
    prob = fem1d.assemble(2, 1, fem1d.MaterialProfile.homogeneous(1.0))
    prob.A_normal = np.zeros_like(prob.A_normal)
    with pytest.raises(SingularOperator):
        fem1d.normal_gevp(prob)


def test_dof_coordinates():
    prob = fem1d.assemble(2, 2, nodes="equispaced")
    assert np.allclose(prob.dof_coordinates(), [0.25, 0.5, 0.75, 1.0])


def test_json_round_trip():
    prob = fem1d.assemble(2, 2, k0=math.pi)
    text = fem1d.problem_to_json(prob)
    doc = json.loads(text)
    assert doc["N"] == 2 and doc["p"] == 2 and doc["n_dof"] == 4
    back = fem1d.problem_from_json(text)
    assert np.array_equal(back.A_normal, prob.A_normal)
    assert back.material == prob.material
