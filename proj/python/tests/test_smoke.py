import numpy as np
import pytest

import flowgeom


def test_identity_decomposition():
    rng = np.random.default_rng(0)
    p = rng.uniform(-1, 1, size=(4, 5, 3)) + [0, 0, 3]
    w = np.full((4, 5), 1 / 20)
    out = flowgeom.decompose(p, p, w)
    np.testing.assert_allclose(out["T_hat"], np.hstack([np.eye(3), np.zeros((3, 1))]), atol=1e-12)
    assert out["residual"] < 1e-12
    assert out["solver_mode"] == "closed_form"


def test_oracle_scene_round_trip():
    pair = flowgeom.synthesize(seed=3, rows=16, cols=16)[0]
    out = flowgeom.decompose(pair["P"], pair["Pvt"], pair["W"], pair["valid"])
    np.testing.assert_allclose(out["T_hat"], pair["T_gt"], atol=1e-9)
    np.testing.assert_allclose(out["F_t"], pair["F_t"], atol=1e-9)
    np.testing.assert_allclose(out["P_t"], pair["tracks"], atol=1e-9)
    flow = pair["Pvt"] - pair["P"]
    out_flow = flowgeom.decompose(pair["P"], flow, pair["W"], motion_is_flow=True)
    np.testing.assert_allclose(out_flow["T_hat"], out["T_hat"], atol=1e-12)


def test_wrong_shape_names_expected_shape():
    with pytest.raises(ValueError, match=r"\(H, W, 3\)"):
        flowgeom.decompose(np.zeros((4, 4)), np.zeros((4, 4, 3)), np.zeros((4, 4)))


def test_degenerate_input_raises_core_error():
    p = np.zeros((3, 3, 3))
    p[..., 2] = 1.0
    with pytest.raises(flowgeom.FlowgeomError) as info:
        flowgeom.decompose(p, p, np.full((3, 3), 1 / 9))
    assert info.value.code == "DegenerateConfiguration"


def test_identical_tracks_score_full_marks():
    rng = np.random.default_rng(1)
    tracks = rng.uniform(1, 2, size=(3, 4, 4, 3))
    report = flowgeom.evaluate(tracks, tracks)
    assert report["all"]["apd"] == [100.0] * 4
    assert report["all"]["epe"] == 0.0
    assert report["report"].startswith("format_version=1\n")


def test_empty_intersection_is_an_error():
    tracks = np.ones((2, 3, 3, 3))
    with pytest.raises(flowgeom.FlowgeomError):
        flowgeom.evaluate(tracks, tracks, gt_valid=np.zeros((2, 3, 3), bool), alignment="none")


def test_total_loss_on_perfect_prediction():
    pair = flowgeom.synthesize(seed=0, rows=8, cols=8, dynamic_fraction=0.0)[0]
    c = np.full((8, 8), np.e)
    out = flowgeom.total_loss(pair["P"], pair["Pvt"], pair["W"], c, pair["P"], pair["Pvt"], pair["pvt"],
                              pair["T_gt"], pair["focal"], pair["cx"], pair["cy"],
                              M_P=pair["valid"], M_F=pair["valid"], M_f=pair["valid"])
    assert out["total"] == pytest.approx(-0.4, abs=1e-9)
    assert out["grad_W"].shape == (8, 8)


def test_inputs_are_not_mutated():
    pair = flowgeom.synthesize(seed=2, rows=8, cols=8)[0]
    before = {k: pair[k].copy() for k in ("P", "Pvt", "W")}
    flowgeom.decompose(pair["P"], pair["Pvt"], pair["W"])
    for k, v in before.items():
        np.testing.assert_array_equal(pair[k], v)
