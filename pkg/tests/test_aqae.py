import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helmqa import aqae, densela, fem1d
from helmqa.errors import EmptyBracket, OrthogonalGroundState, ZeroVector
from helmqa.fem1d import Gevp
from helmqa.qubobox import BinaryBox, decode, gevp_objective
from helmqa.samplers import ExhaustiveSampler, IceConfig, IceSampler, SaConfig, SimulatedAnnealingSampler

from conftest import random_spd

EXACT = ExhaustiveSampler()


def diag25():
    return Gevp(np.diag([2.0, 5.0]), np.eye(2))


def test_qae_hand_traced_bisection():
    # grid {-1,0,1,2}^2: every test below lambda=2 returns phi=0 (>= 0 branch),
    # every test above returns (2, 0); the midpoints are therefore fixed.
    res = aqae.qae_solve(diag25(), BinaryBox.symmetric(2, 2), aqae.QaeConfig(10, 0.0, 10.0), EXACT)
    assert res.lam == 2.001953125
    assert res.lambda_min == 1.9921875
    assert np.array_equal(res.phi, [2.0, 0.0])


def test_qae_identity_pencil():
    m = random_spd(np.random.default_rng(1), 3)
    res = aqae.qae_solve(Gevp(m, m), BinaryBox.symmetric(3, 2), aqae.QaeConfig(10, 0.0, 10.0), EXACT)
    assert 1.0 <= res.lam <= 1.0 + 10 / 2**10


def test_qae_zero_vector_takes_lower_branch():
    # bracket entirely below the spectrum: the minimiser is phi = 0 every time
    res = aqae.qae_solve(diag25(), BinaryBox.symmetric(2, 2), aqae.QaeConfig(4, -1.0, 1.0), EXACT)
    assert not np.any(res.phi)
    assert res.lam == 1.0 and res.witness is None
    assert res.lambda_min == pytest.approx(1.0 - 2.0 / 16)


def test_empty_bracket():
    with pytest.raises(EmptyBracket):
        aqae.QaeConfig(10, 1.0, 1.0)
    with pytest.raises(EmptyBracket):
        aqae.qae_solve(diag25(), BinaryBox.symmetric(2, 2), aqae.QaeConfig(), EXACT, bracket=(2.0, 1.0))


@given(st.integers(0, 2**32 - 1))
def test_bracket_invariant(seed):
    r = np.random.default_rng(seed)
    h = r.normal(size=(3, 3))
    h = h + h.T
    m = random_spd(r, 3)
    box = BinaryBox.symmetric(3, 2)
    res = aqae.qae_solve(Gevp(h, m), box, aqae.QaeConfig(6, -20.0, 20.0), EXACT)
    # re-evaluate: the grid minimiser is non-negative at lambda_min, negative at lambda_max
    for lam, negative in ((res.lambda_min, False), (res.lambda_max, True)):
        phi = decode(box, EXACT.minimize(gevp_objective(h, m, lam, None or _empty(), box)).best_bits)
        value = aqae.sign_value(h, m, phi, lam)
        if negative:
            assert value < 0 or res.lambda_max == 20.0
        else:
            assert value >= 0 or res.lambda_min == -20.0


def _empty():
    from helmqa.qubobox import DeflationSet
    return DeflationSet()


def test_deterministic_with_exhaustive():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    a = aqae.aqae_solve(g, aqae.AqaeConfig(n_delta=6), EXACT)
    b = aqae.aqae_solve(g, aqae.AqaeConfig(n_delta=6), EXACT)
    assert a.to_csv() == b.to_csv()


def test_box_geometry_and_nesting():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    for rescale in (False, True):
        cfg = aqae.AqaeConfig(n_delta=12, ratio=0.5, rescale="always" if rescale else "never")
        tr = aqae.aqae_solve(g, cfg, EXACT)
        assert len(tr) == 12
        assert tr.box_width == [2.0 * 0.5**i for i in range(12)]
        for i in range(11):
            center = tr.phi[i] / np.max(np.abs(tr.phi[i])) if rescale else tr.phi[i]
            assert np.allclose(tr.box_center[i + 1], center, rtol=0, atol=1e-15)


@pytest.mark.parametrize("policy", aqae.BRACKET_POLICIES)
def test_small_homogeneous_converges(policy):
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    tr = aqae.aqae_solve(g, aqae.AqaeConfig(bracket=policy), EXACT)
    assert tr.rel_residual[0] == 1.0
    if policy != "reset":
        assert tr.final_residual < 1e-6
        assert tr.eig_disc[-1] < 1e-3


def test_final_star_choice_is_alg1_output():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    tr = aqae.aqae_solve(g, aqae.AqaeConfig(n_delta=8, star="final"), EXACT)
    assert len(tr) == 8 and np.isfinite(tr.final_residual)


def test_solve_modes_against_reference():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    refs = densela.generalized_eigen(g.H, g.M)
    out = aqae.solve_modes(g, 3, aqae.AqaeConfig(), EXACT)
    assert len(out) == 3
    for n, (trace, pair) in enumerate(out):
        assert abs(pair.value - refs[n].value) / refs[n].value < 1e-3
        assert pair.vector @ g.M @ pair.vector == pytest.approx(1.0, abs=1e-8)
        assert "degenerate" not in trace.flags
    assert abs(out[1][1].vector @ g.M @ out[0][1].vector) <= 1e-3


def test_solve_modes_single_equals_aqae():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    (trace, _), = aqae.solve_modes(g, 1, aqae.AqaeConfig(n_delta=6), EXACT)
    direct = aqae.aqae_solve(g, aqae.AqaeConfig(n_delta=6), EXACT)
    assert trace.to_csv() == direct.to_csv()
    assert aqae.solve_modes(g, 0, aqae.AqaeConfig(), EXACT) == []


def test_solve_modes_flags_degenerate_pair():
    g = Gevp(np.eye(2), np.eye(2))
    out = aqae.solve_modes(g, 2, aqae.AqaeConfig(n_delta=12, qae=aqae.QaeConfig(10, 0.0, 4.0)), EXACT)
    assert "degenerate" in out[1][0].flags


def test_recover_solution_matches_direct_solve():
    for N, p, k in ((10, 1, 0.0), (2, 5, math.pi)):
        prob = fem1d.assemble(N, p, k0=k, nodes="equispaced")
        g = fem1d.normal_gevp(prob)
        ground = densela.generalized_eigen(g.H, g.M)[0]
        phi = aqae.recover_solution(ground.value, ground.vector, g.b)
        x = densela.solve_spd(prob.A_normal, prob.b)
        assert np.linalg.norm(phi - x) <= 1e-8 * np.linalg.norm(x)
        assert np.allclose(aqae.recover_solution(ground.value, -3.5 * ground.vector, g.b), phi)


def test_rank_one_ground_value(rng):
    a = random_spd(rng, 4)
    b = rng.normal(size=4)
    ground = densela.generalized_eigen(-np.outer(b, b), a)[0]
    assert ground.value == pytest.approx(-b @ densela.solve_spd(a, b), rel=1e-8)


def test_recover_solution_orthogonal():
    with pytest.raises(OrthogonalGroundState):
        aqae.recover_solution(-1.0, np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_metrics_contract(rng):
    h = rng.normal(size=(4, 4))
    h = h + h.T
    m = random_spd(rng, 4)
    pairs = densela.generalized_eigen(h, m)
    ref = pairs[1]
    exact = aqae.metrics(h, m, 7.0 * ref.vector, ref.value, ref)
    assert exact.residual == pytest.approx(0.0, abs=1e-20)
    assert exact.eig_disc == 0.0 and exact.mode_disc == pytest.approx(0.0, abs=1e-12)
    flipped = aqae.metrics(h, m, -ref.vector, ref.value, ref)
    assert flipped.mode_disc == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ZeroVector):
        aqae.metrics(h, m, np.zeros(4), 1.0, ref)


def test_trace_marks_zero_iterate_undefined():
    g = diag25()
    tr = aqae.SolveTrace(reference=densela.generalized_eigen(g.H, g.M)[0])
    box = BinaryBox.symmetric(2, 2)
    tr.append(1.0, np.zeros(2), box, g.H, g.M)
    tr.append(2.5, np.array([1.0, 0.1]), box, g.H, g.M)
    assert math.isnan(tr.rel_residual[0]) and tr.rel_residual[1] == 1.0
    assert "nan" in tr.to_csv().splitlines()[1]


def test_trace_csv_schema():
    g = fem1d.homogeneous_gevp(fem1d.assemble(2, 1))
    text = aqae.aqae_solve(g, aqae.AqaeConfig(n_delta=3), EXACT).to_csv()
    lines = text.splitlines()
    assert lines[0] == "iter,lambda,rel_residual,eig_disc,mode_disc,box_width"
    assert lines[1].split(",")[2] == "1.0" and len(lines) == 4


def test_default_brackets_enclose_ground_state():
    for kind in ("homogeneous", "normal"):
        prob = fem1d.assemble(10, 1, k0=math.pi)
        g = fem1d.homogeneous_gevp(prob) if kind == "homogeneous" else fem1d.normal_gevp(prob)
        lo, hi = aqae.default_bracket(g)
        lam0 = densela.generalized_eigen(g.H, g.M)[0].value
        assert lo <= lam0 <= hi


def test_ice_breaks_convergence_small():
    g = fem1d.homogeneous_gevp(fem1d.assemble(6, 1))
    assert aqae.aqae_solve(g, aqae.AqaeConfig(), EXACT).final_residual < 1e-10
    for seed in range(4):
        noisy = IceSampler(EXACT, IceConfig(0.2, seed=seed))
        assert aqae.aqae_solve(g, aqae.AqaeConfig(), noisy).final_residual > 1e-3


def test_qp_identity_converges_every_d():
    x_star = np.array([0.3, -0.55, 0.8])
    for D in (1, 2, 3):
        tr = aqae.box_minimize_qp(np.eye(3), x_star, BinaryBox.symmetric(3, D), 0.5, 25, EXACT)
        errs = [np.max(np.abs(x - x_star)) for x in tr.x]
        # error never exceeds the half-width of the box that produced the iterate
        assert all(e <= w / 2 + 1e-15 for e, w in zip(errs, tr.width))
        assert errs[-1] < 1e-6


def test_qp_with_sa_sampler_runs():
    a = np.array([[2.0, 0.3], [0.3, 1.0]])
    b = np.array([0.4, -0.2])
    tr = aqae.box_minimize_qp(a, b, BinaryBox.symmetric(2, 2), 0.5, 10,
                              SimulatedAnnealingSampler(SaConfig(numreads=20, sweeps=50)))
    assert np.linalg.norm(tr.x[-1] - np.linalg.solve(a, b)) < 1e-2


def test_solve_modes_known_pairs_skip_solved_modes():
    g = fem1d.homogeneous_gevp(fem1d.assemble(4, 1))
    cfg = aqae.AqaeConfig(n_delta=8)
    full = aqae.solve_modes(g, 3, cfg, EXACT)
    tail = aqae.solve_modes(g, 3, cfg, EXACT, known=[full[0][1]])
    assert [t.to_csv() for t, _ in tail] == [t.to_csv() for t, _ in full[1:]]
    with pytest.raises(ValueError):
        aqae.solve_modes(g, 3, cfg, [EXACT] * 3, known=[full[0][1]])


def test_config_rejects_unknown_policies():
    for kw in ({"rescale": "sometimes"}, {"deflation_beta": "auto"}, {"star": "best"},
               {"bracket": "grow"}):
        with pytest.raises(ValueError):
            aqae.AqaeConfig(**kw)
