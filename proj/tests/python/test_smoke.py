import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import elsa

SOURCE_DIR = Path(os.environ.get("ELSA_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_topk_examples():
    out = elsa.project_topk(np.array([3.0, -1.0, 2.0, 0.5]), 2)
    np.testing.assert_array_equal(out, [3.0, 0.0, 2.0, 0.0])
    np.testing.assert_array_equal(elsa.project_topk(np.ones(3), 1), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(elsa.project_topk(np.ones(3), 1, tie_break="highest_index"), [0.0, 0.0, 1.0])


def test_projection_keeps_shape():
    v = np.arange(8.0).reshape(2, 4) - 3.5
    out = elsa.project_nm(v, 2, 4)
    assert out.shape == (2, 4)
    assert ((out != 0).reshape(-1, 4).sum(axis=1) <= 2).all()


def test_weighted_topk_example():
    out = elsa.project_weighted_topk(np.array([0.1, 3, -1, 2]), np.array([100.0, 1, 1, 1]), 2)
    np.testing.assert_array_equal(out, [0, 3, 0, 2])


def test_errors_map_to_value_error():
    with pytest.raises(ValueError):
        elsa.project_topk(np.ones(3), 4)
    with pytest.raises(elsa.ShapeError):
        elsa.project_weighted_topk(np.ones(3), np.ones(2), 1)


def test_int8_example():
    q = elsa.quantize(np.array([0.5, -1.0, 0.25]), "int8")
    np.testing.assert_array_equal(q["codes"], [64, -127, 32])
    assert q["scale"] == pytest.approx(1 / 127)
    linf, _ = elsa.quant_roundtrip_error(np.array([0.5, -1.0, 0.25]), "int8")
    assert linf == pytest.approx(0.003937, rel=1e-3)


def test_none_format_is_identity():
    z = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(elsa.quant_roundtrip(z, "none"), z)


def test_theory_predicates():
    assert elsa.check_corollary1(1, 0, 2)
    assert not elsa.check_corollary1(2, 0, 1)
    assert elsa.theorem2_lhs(1, 0, 2, 0.1) == pytest.approx(-0.145)
    assert elsa.min_feasible_lambda(1, 0, 0) == pytest.approx(math.sqrt(2), abs=1e-5)
    assert elsa.check(1, 0, 0, 2)["satisfied"]
    with pytest.raises(ValueError):
        elsa.check(1, 0, 1.0, 2)


def test_solver_matches_oracle_on_regression():
    inst = elsa.sparse_regression(0, 100, 12, 3, 0.01)
    support, _, oracle_loss = elsa.best_subset_ls(inst["X"], inst["y"], 3)
    assert support == inst["support"]
    res = elsa.solve_least_squares(inst["X"], inst["y"], 3, seed=0)
    assert not res["aborted"]
    assert np.count_nonzero(res["z"]) <= 3
    assert res["loss"] <= 1.05 * oracle_loss
    assert len(res["records"]) == 4096 // 32


def test_exact_quadratic_descends():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(10, 10)))
    a = q @ np.diag(np.logspace(0, 1, 10)) @ q.T
    a = 0.5 * (a + a.T)
    b = rng.normal(size=10)
    lam = elsa.min_feasible_lambda(10.0, 0.0, 0.0) * 1.01
    res = elsa.solve_quadratic(a, b, 3, lam_max=lam, lam_schedule="constant", x_update="exact", order="zxu",
                               interval=1, total_inner_steps=300)
    aug = [r["aug_lagrangian"] for r in res["records"]]
    assert all(n <= p + 1e-9 for p, n in zip(aug, aug[1:]))


def test_unknown_solver_option():
    with pytest.raises(TypeError):
        elsa.solve_quadratic(np.eye(2), np.ones(2), 1, lamda=3)


def test_config_and_experiment(tmp_path):
    text = (SOURCE_DIR / "configs" / "smoke_quadratic.json").read_text()
    canonical = elsa.normalize_config(text)
    assert elsa.normalize_config(canonical) == canonical
    with pytest.raises(elsa.ConfigError):
        elsa.normalize_config(json.dumps({"sparsities": [0.5], "bogus": 1}))
    a = elsa.run_experiment(text, jobs=2, out=str(tmp_path / "a"))
    b = elsa.run_experiment(text, jobs=1, out=str(tmp_path / "b"))
    assert not a["any_failed"]
    assert len(a["rows"]) == 4
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    assert (tmp_path / "a" / "figure.svg").exists()
