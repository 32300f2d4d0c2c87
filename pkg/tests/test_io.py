import json

import numpy as np
import pytest

from graphlogit.graph import SbmConfig
from graphlogit.io import (
    InputError,
    fit_from_report,
    load_dataset,
    pca_fit,
    pca_reduce,
    read_edge_list,
    save_dataset,
    sim_config_from_dict,
    standardize,
    study_spec_from_dict,
)
from graphlogit.em import fit_em
from graphlogit.simulation import SimConfig, generate_case


def _write(path, text):
    path.write_text(text)
    return str(path)


class TestLoad:
    def test_isolated_nodes(self, tmp_path):
        nodes = _write(tmp_path / "n.csv", "id,y,x1\na,1,0.5\nb,0,-1\nc,1,2\n")
        edges = _write(tmp_path / "e.txt", "")
        data = load_dataset(nodes, edges)
        assert data.n == 3
        assert data.graph.edge_count == 0
        assert data.ids == ("a", "b", "c")
        assert data.index["c"] == 2

    def test_duplicate_edges(self, tmp_path):
        nodes = _write(tmp_path / "n.csv", "id,y,x1\na,1,0.5\nb,0,-1\nc,1,2\n")
        edges = _write(tmp_path / "e.txt", "# comment\na b\nb,a\n\na   b\nb c\n")
        data = load_dataset(nodes, edges)
        assert data.graph.edge_count == 2

    @pytest.mark.parametrize("text,line", [
        ("id,y\na,1\n", 1),
        ("id,y,x1\na,1,0.5\nb,2,1\n", 3),
        ("id,y,x1\na,1,0.5\nb,0\n", 3),
        ("id,y,x1\na,1,abc\n", 2),
        ("id,y,x1\na,1,0\na,0,1\n", 3),
    ])
    def test_bad_node_table(self, tmp_path, text, line):
        nodes = _write(tmp_path / "n.csv", text)
        edges = _write(tmp_path / "e.txt", "")
        with pytest.raises(InputError, match=f":{line}:"):
            load_dataset(nodes, edges)

    def test_unknown_edge_id(self, tmp_path):
        nodes = _write(tmp_path / "n.csv", "id,y,x1\na,1,0.5\nb,0,-1\n")
        edges = _write(tmp_path / "e.txt", "a b\nb z\n")
        with pytest.raises(InputError, match=":2: .*'z'"):
            load_dataset(nodes, edges)

    def test_self_loop_line(self, tmp_path):
        nodes = _write(tmp_path / "n.csv", "id,y,x1\na,1,0.5\nb,0,-1\n")
        edges = _write(tmp_path / "e.txt", "a a\n")
        with pytest.raises(InputError, match=":1: self-loop"):
            load_dataset(nodes, edges)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_dataset(str(tmp_path / "x.csv"), str(tmp_path / "y.txt"))

    def test_first_seen_labels(self, tmp_path):
        edges = _write(tmp_path / "e.txt", "q p\np r\n")
        g, labels = read_edge_list(edges)
        assert labels == ["q", "p", "r"]
        assert g.edge_count == 2

    def test_round_trip_bit_exact(self, tmp_path):
        cfg = SimConfig(case="II", delta_true=0.3, sbm=SbmConfig((40, 30), [[0.2, 0.02], [0.02, 0.3]]))
        data = generate_case(cfg, np.random.default_rng(0))
        save_dataset(data, tmp_path / "n.csv", tmp_path / "e.txt")
        back = load_dataset(str(tmp_path / "n.csv"), str(tmp_path / "e.txt"))
        np.testing.assert_array_equal(back.X, data.X)
        np.testing.assert_array_equal(back.Y, data.Y)
        assert back.graph == data.graph

    def test_standardize(self, tmp_path):
        nodes = _write(tmp_path / "n.csv", "id,y,x1,x2\na,1,1,10\nb,0,2,20\nc,1,4,60\n")
        edges = _write(tmp_path / "e.txt", "a b\n")
        data = load_dataset(nodes, edges, standardize_x=True)
        np.testing.assert_allclose(data.X.mean(axis=0), 0, atol=1e-15)
        np.testing.assert_allclose(data.X.std(axis=0), 1)
        with pytest.raises(InputError):
            standardize(np.ones((3, 1)))


class TestPca:
    def test_eigendecomposition_oracle(self):
        rng = np.random.default_rng(0)
        F = rng.normal(size=(20, 5))
        res = pca_fit(F, 2)
        C = np.cov(F, rowvar=False)
        vals, vecs = np.linalg.eigh(C)
        ref = (F - F.mean(axis=0)) @ vecs[:, ::-1][:, :2]
        for k in range(2):
            col = res.scores[:, k]
            sign = np.sign(col @ ref[:, k])
            np.testing.assert_allclose(col, sign * ref[:, k], atol=1e-8)
        np.testing.assert_allclose(res.explained_variance, vals[::-1][:2], rtol=1e-10)

    def test_wide_matrix_uses_gram_side(self):
        rng = np.random.default_rng(1)
        F = (rng.random((15, 60)) < 0.2).astype(float)
        res = pca_fit(F, 3)
        U, S, Vt = np.linalg.svd(F - F.mean(axis=0), full_matrices=False)
        ref = U[:, :3] * S[:3]
        np.testing.assert_allclose(np.abs(res.scores), np.abs(ref), atol=1e-8)
        np.testing.assert_allclose(res.components @ res.components.T, np.eye(3), atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(2)
        F = rng.normal(size=(30, 4))
        res = pca_fit(F, 4)
        for comp in res.components:
            assert comp[np.argmax(np.abs(comp))] > 0
        flipped = pca_fit(-F, 4)
        np.testing.assert_allclose(np.abs(flipped.components), np.abs(res.components), atol=1e-10)

    def test_rank_one(self):
        u = np.arange(6.0)
        F = np.outer(u, [1.0, 2.0, -1.0])
        res = pca_fit(F, 1)
        assert res.explained_variance_ratio[0] == pytest.approx(1.0)
        with pytest.raises(ValueError, match="rank"):
            pca_fit(F, 2)

    def test_orthogonal_columns_recovered(self):
        F = np.zeros((8, 2))
        F[:4, 0] = [1, -1, 2, -2]
        F[4:, 1] = [0.5, -0.5, 0.25, -0.25]
        F -= F.mean(axis=0)
        Z = pca_reduce(F, 2)
        recon = Z @ pca_fit(F, 2).components
        np.testing.assert_allclose(recon, F, atol=1e-12)

    def test_k_too_big(self):
        with pytest.raises(ValueError):
            pca_fit(np.ones((3, 2)), 3)


class TestConfigs:
    def test_sim_config(self):
        cfg = sim_config_from_dict({"case": "II", "delta": 0.1, "seed": 3,
                                    "sbm": {"block_sizes": [5, 5], "P": [[0.5, 0.1], [0.1, 0.5]]}})
        assert cfg.case == "II" and cfg.delta_true == 0.1 and cfg.sbm.n == 10

    def test_unknown_key(self):
        with pytest.raises(InputError, match="unknown"):
            sim_config_from_dict({"cas": "I"})

    def test_bad_values(self):
        with pytest.raises(InputError):
            sim_config_from_dict({"alpha": 2})

    def test_study_spec(self):
        spec = study_spec_from_dict({"kind": "bias_mse", "deltas": [0.3], "estimator": "both"})
        assert spec.deltas == (0.3,)
        with pytest.raises(InputError):
            study_spec_from_dict({"kind": "power"})

    def test_shipped_presets_parse(self):
        import pathlib
        root = pathlib.Path(__file__).resolve().parents[1] / "configs"
        files = sorted(root.glob("*.json"))
        assert files
        for f in files:
            d = json.loads(f.read_text())
            if "kind" in d:
                study_spec_from_dict(d)
            else:
                sim_config_from_dict(d)


def test_fit_report_round_trip(tmp_path):
    cfg = SimConfig(delta_true=0.5, sbm=SbmConfig((50,), [[0.1]]))
    data = generate_case(cfg, np.random.default_rng(1))
    fit = fit_em(data)
    back = fit_from_report({"fit": json.loads(json.dumps(fit.to_dict()))})
    assert back.params == fit.params
    np.testing.assert_array_equal(back.weights, fit.weights)
    with pytest.raises(InputError):
        fit_from_report({"fit": {}})
