import json

import numpy as np
import pytest

from gainphase import criteria
from gainphase.config import build_devices, build_network
from gainphase.criteria import FrequencyGrid, check_conditions, corollary_check, sweep, two_stage
from gainphase.devmodel import inductor_admittance, rescale_device
from gainphase.fixtures import example2, example3, example4
from gainphase.matphase import Verdict
from gainphase.network import (
    OMEGA0, RL, Branch, NetworkModel, block_diag_stack, grid_response, gscr,
    reduced_b_matrix, rescaled_grid,
)
from gainphase.oracle import closed_loop_eigs, loop_determinant

from oracles import random_converter, random_net

GAIN, PHASE, UND = (v.value for v in Verdict)
GRID = FrequencyGrid.default(points=300)


def system(cfg):
    return build_devices(cfg), build_network(cfg)


@pytest.fixture(scope="module")
def ex2():
    return system(example2())


@pytest.fixture(scope="module")
def ex3():
    return system(example3())


@pytest.fixture(scope="module")
def ex3_report(ex3):
    return corollary_check(*ex3)


def at_hz(report, f):
    return int(np.argmin(np.abs(report.hz - f)))


def test_grid_defaults():
    g = FrequencyGrid.default()
    assert g.omega[0] == 0 and g.special[0] and g.special[-1]
    assert g.omega[1] == pytest.approx(1e-2 * OMEGA0)
    assert g.omega[-2] == pytest.approx(1e3 * OMEGA0)
    assert g.omega[-1] == pytest.approx(1e3 * g.omega[-2])
    assert np.all(np.diff(g.omega) > 0)


def test_grid_nudges_omega0():
    g = FrequencyGrid.default(f_min_hz=40, f_max_hz=60, points=3)
    assert OMEGA0 not in g.omega
    assert np.min(np.abs(g.omega - OMEGA0)) >= 1e-6 * OMEGA0
    with pytest.raises(ValueError):
        FrequencyGrid([1.0])
    with pytest.raises(ValueError):
        FrequencyGrid.default(f_min_hz=10, f_max_hz=1)


def test_matched_inductor_profile_is_constant():
    # an inductor rescaled with its own R/X ratio is 1/L times the identity;
    # the realization comes from finite differences, hence 1e-7
    L, eps = 0.25, 0.08
    dev = inductor_admittance(L, eps)
    (p,) = criteria.device_profiles([dev], GRID, eps_tilde=eps)
    np.testing.assert_allclose(p.sigma_max, 1 / L, rtol=1e-7)
    np.testing.assert_allclose(p.sigma_min, 1 / L, rtol=1e-7)
    assert p.sectorial.all()
    np.testing.assert_allclose(p.phi_hi, 0, atol=1e-7)
    np.testing.assert_allclose(p.phi_lo, 0, atol=1e-7)


def test_identical_rx_network_profile(rng):
    net = random_net(rng, 5, 3, eps=0.07, extras=False)
    S = rng.uniform(0.5, 2, 3)
    g = gscr(reduced_b_matrix(net), S)
    resp = rescaled_grid(grid_response(net, 1j * GRID.omega[1:-1]), S, None, 0.07)
    p = criteria.network_profile(resp)
    np.testing.assert_allclose(p.sigma_min, g, rtol=1e-10)
    np.testing.assert_allclose(p.phi_hi, np.pi, atol=1e-9)
    np.testing.assert_allclose(p.phi_lo, -np.pi, atol=1e-9)


def test_single_device_network_area_width(rng):
    net = random_net(rng, 3, 1)
    resp = rescaled_grid(grid_response(net, 1j * GRID.omega[1:-1]), None, None, 0.1)
    p = criteria.network_profile(resp)
    width = (p.phi_hi - p.phi_lo)[p.sectorial]
    assert width.size and np.all(width <= 2 * np.pi + 1e-12)


def test_check_conditions_by_hand():
    w = np.array([1.0, 2.0, 3.0, 4.0])
    n = w.size

    def prof(smax, smin, hi, lo, sect=True):
        return criteria.GainPhaseProfile(w, np.array(smax, float), np.array(smin, float),
                                         np.full(n, sect), np.array(hi, float),
                                         np.array(lo, float), np.zeros(n, bool))
    net = prof([5] * 4, [2] * 4, [np.pi, np.pi, 2.0, np.pi], [-np.pi] * 4)
    dev = prof([1, 3, 3, 3], [1] * 4, [0.1, 0.5, 2.5, 0.1], [-0.1, -0.5, -0.5, -3.2])
    v, m = check_conditions([dev], net)
    assert list(v) == [GAIN, PHASE, UND, UND]
    assert m["gain"][0] == pytest.approx(1.0)
    assert m["phase_hi"][2] == pytest.approx(-0.5)
    assert m["phase_lo"][3] == pytest.approx(np.pi - 3.2)
    # each interval fits the area but together they span more than pi
    dev2 = prof([3] * 4, [1] * 4, [0.1] * 4, [-0.1] * 4)
    dev3 = prof([3] * 4, [1] * 4, [3.1] * 4, [3.05] * 4)
    v, m = check_conditions([dev2, dev3], net)
    assert v[0] == UND
    assert m["phase_hi"][0] > 0 and m["phase_lo"][0] > 0
    assert m["phase_width"][0] == pytest.approx(np.pi - 3.2)


def test_check_conditions_margin_is_strict():
    w = np.array([1.0])
    net = criteria.GainPhaseProfile(w, np.ones(1), np.ones(1), np.zeros(1, bool), -np.inf * np.ones(1),
                                    np.inf * np.ones(1), np.zeros(1, bool))
    dev = criteria.GainPhaseProfile(w, np.ones(1) - 1e-12, np.ones(1), np.ones(1, bool),
                                    np.zeros(1), np.zeros(1), np.zeros(1, bool))
    v, _ = check_conditions([dev], net)
    assert v[0] == UND


def test_zero_devices_all_gain_ok(rng):
    net = random_net(rng, 3, 1)
    net0 = NetworkModel(3, 0, net.branches)
    rep = sweep([], criteria.network_evaluator(net0), GRID)
    assert rep.certified
    assert np.all(rep.verdicts == GAIN)


def test_example2_verdicts(ex2):
    rep = corollary_check(*ex2)
    assert rep.certified
    assert rep.verdicts[at_hz(rep, 1.0)] == GAIN
    wt = rep.transition_frequency(0)
    above = rep.omega >= wt
    strong = above & (rep.devices[0].sigma_max >= rep.network.sigma_min)
    assert strong.any()
    assert np.all(rep.verdicts[strong] == PHASE)
    assert not rep.undecided[above].any()
    k = int(np.searchsorted(rep.omega, wt))
    assert rep.devices[0].sigma_max[k] == pytest.approx(4.0, rel=0.15)


def test_example2_weaker_grid_loses_certificate():
    rep = corollary_check(*system(example2(X_net=0.3)))
    assert not rep.certified


def test_example3_band_and_culprit(ex3_report):
    rep = ex3_report
    assert rep.verdicts[at_hz(rep, 15.0)] == UND
    (lo, hi), = rep.undecided_bands_hz
    assert lo < 15 < hi
    tf = rep.transition_freqs
    assert max(tf, key=lambda k: tf[k] or np.inf) == "c3"
    assert rep.culprits()[0]["ranking"][0]["device"] == "c3"


def test_example3_retuned_certified():
    assert corollary_check(*system(example3(pll=(70.0, 40.0, 40.0)))).certified


def test_band_edges_are_refined(ex3_report):
    rep = ex3_report
    idx = np.flatnonzero(rep.undecided[1:] != rep.undecided[:-1])
    assert idx.size == 2
    for k in idx:
        assert rep.omega[k + 1] - rep.omega[k] <= 1e-2 * rep.omega[k + 1]


def test_bands_cover_undecided_points(ex3_report):
    rep = ex3_report
    covered = np.zeros(rep.omega.size, bool)
    for lo, hi in rep.undecided_bands:
        covered |= (rep.omega >= lo) & (rep.omega <= hi)
        assert rep.undecided[rep.omega == lo].all() and rep.undecided[rep.omega == hi].all()
    np.testing.assert_array_equal(covered, rep.undecided)


@pytest.mark.parametrize("make", [example2, example3])
def test_corollary_matches_sweep(make):
    devs, net = system(make())
    eps = net.branches[0].law.eps
    a = corollary_check(devs, net, grid=GRID, refine=False)
    b = sweep(devs, criteria.network_evaluator(net, None, None, eps), GRID, None, eps, refine=False)
    np.testing.assert_array_equal(a.verdicts, b.verdicts)


def test_gscr_monotonicity(ex2):
    devs, net = ex2
    B = reduced_b_matrix(net)
    prev = None
    for scale in (1.0, 1.1, 1.5, 3.0):
        rep = corollary_check(devs, scale * B, grid=GRID, refine=False)
        assert rep.certified
        if prev is not None:
            assert np.all(rep.margins["gain"] > prev)
            np.testing.assert_array_equal(rep.margins["phase_hi"][rep.verdicts == PHASE],
                                          prev_hi[rep.verdicts == PHASE])
        prev, prev_hi = rep.margins["gain"], rep.margins["phase_hi"]


def test_rescaled_loop_is_independent_of_d_and_eps(rng):
    devs, net = system(example3())
    S = np.array([d.S for d in devs])
    s = rng.uniform(-3, 3, 10) + 1j * rng.uniform(1, 800, 10)
    ref = loop_determinant(devs, net, s)
    for _ in range(3):
        D = rng.uniform(0.2, 5, 3)
        eps = rng.uniform(0, 0.3)
        Yt = rescaled_grid(grid_response(net, s), S, D, eps).values
        Yc = block_diag_stack([np.sqrt(d.S) * Di * rescale_device(d, 1.0, eps, s)
                               for d, Di in zip(devs, D)])
        det = np.linalg.det(np.eye(6) + Yc @ np.linalg.inv(Yt))
        np.testing.assert_allclose(det, ref, rtol=1e-9)


def test_rescaling_keeps_single_device_verdict(ex2):
    devs, net = ex2
    for D in (0.3, 1.0, 7.0):
        rep = sweep(devs, criteria.network_evaluator(net, None, [D], 0.0), GRID, [D], 0.0)
        assert rep.certified


def test_random_d_certificates_are_sound(rng):
    for _ in range(8):
        devs, net = system(example3(pll=tuple(rng.uniform(30, 150, 3))))
        D = rng.uniform(0.5, 2, 3)
        rep = sweep(devs, criteria.network_evaluator(net, None, D, 0.06), GRID, D, 0.06)
        if rep.certified:
            assert closed_loop_eigs(devs, net).stable


def test_two_stage_without_absorbed_devices(ex3):
    devs, net = ex3
    ts = two_stage(devs, net, grid=GRID, eps_tilde=0.06)
    ref = sweep(devs, criteria.network_evaluator(net, None, None, 0.06), GRID, None, 0.06)
    assert ts.report1 is None
    np.testing.assert_array_equal(ts.report2.verdicts, ref.verdicts)
    assert ts.certified == ref.certified


def test_two_stage_example4():
    devs, net = system(example4())
    ts = two_stage(devs, net, grid=GRID, eps_tilde=0.06, subsystem1="oracle")
    assert ts.order == ["c1", "c2", "g3"]
    assert ts.certified
    assert ts.report2.preconditions["inverse_equivalent_network_stable"]
    # the grid-forming unit holds its power at DC, so the strict mode cannot settle subsystem 1
    strict = two_stage(devs, net, grid=GRID, eps_tilde=0.06, subsystem1="sweep")
    np.testing.assert_array_equal(strict.report2.verdicts, ts.report2.verdicts)
    assert strict.report1.undecided[strict.report1.omega < 2 * np.pi * 0.5].any()
    assert not strict.certified
    with pytest.raises(ValueError):
        two_stage(devs, net, subsystem1="maybe")
    with pytest.raises(ValueError):
        two_stage(devs, net, grouping=["GFL"])


def test_equivalent_network_gain_varies():
    devs, net = system(example4())
    net_o = net.reorder_devices([1, 2, 3])
    ev = criteria.network_evaluator(net_o, None, None, 0.06, absorbed=[devs[2]])
    vals = ev(2 * np.pi * np.geomspace(0.5, 200, 50))
    smin = np.linalg.svd(vals, compute_uv=False)[:, -1]
    assert smin.max() / smin.min() - 1 > 1e-3
    assert smin.min() > gscr(reduced_b_matrix(net))


def test_monolithic_example4_is_undecided_somewhere():
    devs, net = system(example4())
    rep = sweep(devs, criteria.network_evaluator(net, None, None, 0.06), GRID, None, 0.06)
    assert rep.undecided.any()


def test_preconditions_block_certificate():
    devs, net = system(example2())
    bad = [devs[0].with_(open_loop_stable=False)]
    rep = corollary_check(bad, net)
    assert not rep.undecided.any()
    assert not rep.certified


def test_feedthrough_device_is_not_certified(rng):
    from oracles import random_ss_device
    dev = random_ss_device(rng, "ff", gain=0.1, p_feedthrough=1.0)
    net = NetworkModel(1, 1, [Branch(1, 2, RL(10.0, 0.1))])
    rep = sweep([dev], criteria.network_evaluator(net, [dev.S], None, 0.1), GRID, None, 0.1)
    assert rep.preconditions["strictly_proper:ff"] is False
    assert not rep.certified


def test_report_files_round_trip(tmp_path, ex3_report):
    rep = ex3_report
    rep.write_json(tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())
    assert back["undecided_bands_hz"] == [list(b) for b in rep.undecided_bands_hz]
    assert back["verdict_counts"][UND] == int(rep.undecided.sum())
    assert back["certified"] is False
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    head = lines[0].split(",")
    assert head[:3] == ["freq_hz", "verdict", "gain_margin"]
    assert "c3_sectorial" in head
    assert len(lines) == rep.omega.size + 1
    verdicts = [ln.split(",")[1] for ln in lines[1:]]
    assert verdicts == list(rep.verdicts)


def test_random_instances_sound(rng):
    hits = 0
    for _ in range(15):
        N = int(rng.integers(1, 4))
        net = random_net(rng, int(rng.integers(max(N, 2), 5)), N)
        devs = [random_converter(rng, f"d{k}", kinds=("GFL", "L", "PI")) for k in range(N)]
        eps = criteria.average_eps(net)
        rep = sweep(devs, criteria.network_evaluator(net, [d.S for d in devs], None, eps),
                    GRID, None, eps)
        if rep.certified:
            hits += 1
            assert closed_loop_eigs(devs, net).stable
    assert hits > 0
