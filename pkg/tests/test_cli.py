import json

import numpy as np
import pytest

from baryrom import cli, config, online, store


def mini_config(n_max=5, times=(1.0, 2.5, 4.0)):
    return {
        "schema_version": 1,
        "name": "mini",
        "grid": {"x_min_km": 0.0, "x_max_km": 1.0, "n_cells": 102},
        "boundary": {
            "p_left_pa": 4.137e7,
            "p_right_pa": 2.758e7,
            "s_inflow": 1.0,
            "s_initial": 0.0,
        },
        "fluids": {
            "mu_w_pa_s": 0.003,
            "mu_nw_pa_s": {"param": "mu", "scale": 0.003},
            "beta": {"param": "beta"},
        },
        "rock": {"kind": "homogeneous", "porosity": 0.1, "permeability_m2": 1e-13},
        "axes": [
            {"name": "mu", "values": [1, 6]},
            {"name": "beta", "values": [2, 4]},
        ],
        "snapshot_times_yr": list(times),
        "cfl_safety": 0.9,
        "greedy": {"eps_abs": 0.0, "eps_rel": 0.0, "n_max": n_max},
        "qp": {"tol": 1e-10, "max_iter": 20000},
    }


@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("mini")
    cfg_path = root / "mini.json"
    cfg_path.write_text(json.dumps(mini_config()))
    store_dir = root / "store"
    model_dir = root / "model"
    assert cli.main(["generate", "--config", str(cfg_path), "--out", str(store_dir)]) == 0
    assert cli.main(["offline", "--store", str(store_dir), "--out", str(model_dir)]) == 0
    return root, cfg_path, store_dir, model_dir


class TestConfig:
    def test_presets_load(self):
        for name in ("example1", "example2"):
            cfg = config.load_preset(name)
            assert cfg.grid.n_cells == 1002
        ex1 = config.load_preset("example1")
        assert len(ex1.combos()) == 30
        assert len(ex1.snapshot_times_yr) == 25
        ex2 = config.load_preset("example2")
        assert len(ex2.combos()) == 35
        assert len(ex2.snapshot_times_yr) == 20

    def test_example2_rock_binding(self):
        cfg = config.load_preset("example2")
        combo = {"k_lp": 7e-14, "gamma": 0.2}
        rock = cfg.rock_at(combo)
        centers = cfg.grid.centers()
        assert np.all(rock.permeability[centers < 0.2] == 1e-13)
        assert np.all(rock.permeability[centers >= 0.2] == 7e-14)
        assert np.all(rock.porosity[centers >= 0.2] == 0.01)
        # gamma = 0 leaves the whole domain low-permeability
        rock0 = cfg.rock_at({"k_lp": 5e-14, "gamma": 0.0})
        assert np.all(rock0.permeability == 5e-14)

    def test_validation_messages(self):
        bad = mini_config()
        bad["axes"][0]["values"] = [3, 1]
        with pytest.raises(config.ConfigError, match="sorted"):
            config.parse_config(bad)
        bad = mini_config()
        del bad["grid"]
        with pytest.raises(config.ConfigError, match="grid"):
            config.parse_config(bad)
        bad = mini_config()
        bad["schema_version"] = 99
        with pytest.raises(config.ConfigError, match="schema_version"):
            config.parse_config(bad)
        bad = mini_config()
        bad["fluids"]["beta"] = {"param": "nope"}
        with pytest.raises(config.ConfigError, match="nope"):
            config.parse_config(bad)

    def test_unknown_config_exit_code(self, capsys):
        assert cli.main(["generate", "--config", "nope.json", "--out", "x"]) == cli.EXIT_CONFIG


class TestGenerate:
    def test_store_contents(self, mini_run):
        _, _, store_dir, _ = mini_run
        st = store.load_store(store_dir)
        assert st.count == 2 * 2 * 3
        assert st.axis_names == ("t", "mu", "beta")
        assert st.values.shape == (12, 102)
        np.testing.assert_allclose(
            st.masses, st.values.sum(axis=1) / 102, rtol=1e-12
        )

    def test_deterministic_rerun(self, mini_run, tmp_path):
        _, cfg_path, store_dir, _ = mini_run
        again = tmp_path / "store2"
        assert cli.main(["generate", "--config", str(cfg_path), "--out", str(again)]) == 0
        a = store.load_store(store_dir)
        b = store.load_store(again)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.params, b.params)

    def test_resume_skips_existing(self, mini_run, capsys):
        _, cfg_path, store_dir, _ = mini_run
        # the consolidated store has no chunks left; the manifest matches, so
        # a rerun regenerates cleanly without --force
        assert cli.main(["generate", "--config", str(cfg_path), "--out", str(store_dir)]) == 0

    def test_partial_store_resumes_from_chunks(self, mini_run, tmp_path):
        # pre-seed one chunk with sentinel data: a resumed run must skip the
        # simulated combo and keep the seeded rows verbatim
        _, cfg_path, _, _ = mini_run
        raw = json.loads(cfg_path.read_text())
        target = tmp_path / "resume"
        cfg = config.parse_config(raw)
        manifest = store.store_manifest(
            raw, cfg.axis_names, len(cfg.combos()), len(cfg.snapshot_times_yr)
        )
        store.init_store_dir(target, manifest)
        n_t = len(cfg.snapshot_times_yr)
        fake_params = np.full((n_t, 3), 7.25)
        fake_values = np.full((n_t, cfg.grid.n_cells), 0.125)
        fake_masses = np.full(n_t, 0.125)
        store.write_chunk(target, 0, fake_params, fake_values, fake_masses)
        assert cli.main(["generate", "--config", str(cfg_path), "--out", str(target)]) == 0
        st = store.load_store(target)
        np.testing.assert_array_equal(st.values[:n_t], fake_values)
        assert st.count == len(cfg.combos()) * n_t

    def test_mismatching_store_rejected(self, mini_run, capsys):
        _, _, store_dir, _ = mini_run
        other = mini_config(times=(0.5,))
        cfg2 = store_dir.parent / "other.json"
        cfg2.write_text(json.dumps(other))
        assert (
            cli.main(["generate", "--config", str(cfg2), "--out", str(store_dir)])
            == cli.EXIT_STORE
        )

    def test_parallel_generate_identical(self, mini_run, tmp_path):
        _, cfg_path, store_dir, _ = mini_run
        par = tmp_path / "par"
        assert cli.main(
            ["generate", "--config", str(cfg_path), "--out", str(par), "--jobs", "2"]
        ) == 0
        a = store.load_store(store_dir)
        b = store.load_store(par)
        np.testing.assert_array_equal(a.values, b.values)


class TestOffline:
    def test_model_round_trip(self, mini_run):
        *_, model_dir = mini_run
        model = store.load_model(model_dir)
        again = store.load_model(model_dir)
        np.testing.assert_array_equal(model.weight_table, again.weight_table)
        assert model.axis_names == ("t", "mu", "beta")
        report, l1_mean, l1_max = store.load_model_report(model_dir)
        assert report.termination in ("absolute", "relative", "max_atoms", "exhausted")
        assert len(l1_mean) == len(report.sizes)
        assert (model_dir / "dictionary.npz").exists()

    def test_degenerate_two_snapshot_store(self, tmp_path):
        cfg = mini_config(times=(1.0, 3.0))
        cfg["axes"] = [{"name": "mu", "values": [1]}, {"name": "beta", "values": [2]}]
        cfg_path = tmp_path / "two.json"
        cfg_path.write_text(json.dumps(cfg))
        store_dir, model_dir = tmp_path / "s", tmp_path / "m"
        assert cli.main(["generate", "--config", str(cfg_path), "--out", str(store_dir)]) == 0
        assert cli.main(["offline", "--store", str(store_dir), "--out", str(model_dir)]) == 0
        model = store.load_model(model_dir)
        assert model.n_atoms == 2
        report, _, _ = store.load_model_report(model_dir)
        assert len(report.delta) >= 1

    def test_report_csv_layout(self, mini_run):
        *_, model_dir = mini_run
        header, rows = store.read_csv(model_dir / "greedy_report.csv")
        assert header[:6] == ["n", "delta", "mean_w2", "condition", "volume", "criterion"]
        assert rows[-1][5] == "max_atoms"
        assert all(r[5] == "" for r in rows[:-1])


class TestOnline:
    def test_training_node_and_inline_points(self, mini_run):
        root, _, store_dir, model_dir = mini_run
        out = root / "online"
        rc = cli.main(
            [
                "online",
                "--model",
                str(model_dir),
                "--store",
                str(store_dir),
                "--out",
                str(out),
                "--at",
                "t=1.0,mu=1,beta=2",
                "--at",
                "t=1.75,mu=3.3,beta=2.7",
            ]
        )
        assert rc == 0
        data = np.load(out / "reconstructions.npz")
        assert data["profiles"].shape == (2, 102)
        assert np.all(data["profiles"] >= 0.0)
        header, rows = store.read_csv(out / "errors.csv")
        assert header == ["t", "mu", "beta", "rel_l1_error"]
        assert len(rows) == 1  # only the training node has truth
        assert float(rows[0][3]) < 0.2

    def test_out_of_range_exit(self, mini_run):
        root, _, _, model_dir = mini_run
        rc = cli.main(
            [
                "online",
                "--model",
                str(model_dir),
                "--out",
                str(root / "x"),
                "--at",
                "t=99.0,mu=1,beta=2",
            ]
        )
        assert rc == cli.EXIT_COMPUTE

    def test_bad_point_spec(self, mini_run):
        root, _, _, model_dir = mini_run
        rc = cli.main(
            ["online", "--model", str(model_dir), "--out", str(root / "y"), "--at", "mu=1"]
        )
        assert rc == cli.EXIT_CONFIG


class TestTablesAndDiag:
    def test_pod_and_tables(self, mini_run):
        root, _, store_dir, model_dir = mini_run
        pod_dir, tab_dir = root / "pod", root / "tables"
        assert cli.main(
            ["pod", "--store", str(store_dir), "--out", str(pod_dir), "--eps", "0.5,0.1"]
        ) == 0
        header, rows = store.read_csv(pod_dir / "pod_table.csv")
        assert header == ["epsilon", "n_pod"]
        assert cli.main(
            [
                "tables",
                "--store",
                str(store_dir),
                "--model",
                str(model_dir),
                "--out",
                str(tab_dir),
                "--eps",
                "0.5,0.1",
            ]
        ) == 0
        header, rows = store.read_csv(tab_dir / "tables.csv")
        assert header == ["epsilon", "n_gbar", "n_pod"]
        assert len(rows) == 2

    def test_trivial_tolerance_needs_minimal_sizes(self, mini_run, tmp_path):
        root, _, store_dir, model_dir = mini_run
        out = tmp_path / "triv"
        assert cli.main(
            [
                "tables",
                "--store",
                str(store_dir),
                "--model",
                str(model_dir),
                "--out",
                str(out),
                "--eps",
                "1.0",
            ]
        ) == 0
        _, rows = store.read_csv(out / "tables.csv")
        assert rows[0][1] == "2"  # smallest possible dictionary
        # one or two modes: tiny-mass snapshots can exceed 100% relative
        # error under a single uncentered mode
        assert int(rows[0][2]) <= 2

    def test_byte_identical_csv_reruns(self, mini_run, tmp_path):
        root, _, store_dir, model_dir = mini_run
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        for out in (out1, out2):
            assert cli.main(["diag", "--model", str(model_dir), "--out", str(out)]) == 0
        assert (out1 / "condition.csv").read_bytes() == (out2 / "condition.csv").read_bytes()
        assert (out1 / "volume.csv").read_bytes() == (out2 / "volume.csv").read_bytes()

    def test_landscape_csv(self, mini_run):
        root, _, store_dir, model_dir = mini_run
        out = root / "land"
        rc = cli.main(
            [
                "landscape",
                "--model",
                str(model_dir),
                "--store",
                str(store_dir),
                "--out",
                str(out),
                "--n",
                "3",
                "--target-index",
                "5",
                "--resolution",
                "31",
            ]
        )
        assert rc == 0
        header, rows = store.read_csv(out / "landscape.csv")
        assert header == ["x", "y", "lam_1", "lam_2", "lam_3", "log10_w2"]
        lam = np.array([[float(c) for c in r[2:5]] for r in rows])
        np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-9)

    def test_landscape_bad_index(self, mini_run):
        root, _, store_dir, model_dir = mini_run
        rc = cli.main(
            [
                "landscape",
                "--model",
                str(model_dir),
                "--store",
                str(store_dir),
                "--out",
                str(root / "z"),
                "--target-index",
                "9999",
            ]
        )
        assert rc == cli.EXIT_CONFIG
