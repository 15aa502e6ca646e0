import numpy as np
import pytest

import geocsp


@pytest.fixture(scope="module")
def small():
    problems, stats = geocsp.generate(40, {"preset": "square_translation", "grid_side": 6}, seed=3)
    return problems, stats


def test_generate_is_seeded(small):
    problems, stats = small
    again, _ = geocsp.generate(40, {"preset": "square_translation", "grid_side": 6}, seed=3, workers=2)
    assert problems == again
    assert len(problems) == 40
    assert stats["mean_constraints"] > 0


def test_solve_matches_labels(small):
    problems, _ = small
    for p in problems[:10]:
        out = geocsp.solve(p)
        geocsp.validate(p)
        assert set(out["depth"]) == set(p["variables"])
        assert "Solution ends" in geocsp.solver_log(p)


def test_bad_record_raises():
    with pytest.raises(geocsp.GeoCspError) as info:
        geocsp.solve({"grid_side": 6})
    assert info.value.args[0] == "format"


def test_model_round_trip(tmp_path, small):
    problems, _ = small
    m = geocsp.Model.create(6, dim=8, init="grid", seed=1)
    assert m.embeddings.shape == (36, 8)
    path = str(tmp_path / "m.ckpt")
    m.save(path)
    back = geocsp.Model.load(path)
    np.testing.assert_array_equal(back.embeddings, m.embeddings)
    a = m.evaluate(problems, iterations=3, seed=2)
    b = back.evaluate(problems, iterations=3, seed=2)
    assert a == b
    assert 0.0 <= a["point_accuracy"] <= 1.0


def test_trace_and_predict(small):
    problems, _ = small
    m = geocsp.Model.create(6, dim=8, seed=4)
    steps = m.trace(problems[0], iterations=4)
    assert len(steps) == 5
    assert steps[0]["variable_states"].shape[1] == 8
    pred = m.predict(problems[0], iterations=4, resamples=3)
    assert set(pred["assignment"]) == set(problems[0]["variables"])


def test_train_runs(small):
    problems, _ = small
    model, report = geocsp.train(problems, {"epochs": 1, "dim": 8, "batch_size": 8, "seed": 1})
    assert len(report["epochs"]) == 1
    assert model.dim == 8


def test_analysis_on_grid_embeddings():
    m = geocsp.Model.create(8, dim=16, init="grid", seed=0)
    w = m.embeddings
    assert geocsp.analysis.local_2dness(w, 8) > 0.999
    assert min(geocsp.analysis.coord_probe(w, 8)["cv_r2"]) > 0.999
    coords, ratio = geocsp.analysis.pca(w, 3)
    mean, _ = geocsp.analysis.curvature(coords, 8)
    assert mean < 1e-6
    assert sum(ratio[:2]) > 0.999
