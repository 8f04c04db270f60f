from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

import app
from modules.evalmetrics import weighted_rmse
from modules.exceptions import ConfigError, DataError, PipelineStageError
from modules.pipeline import (RUN_ARTIFACTS, SWEEP_COLUMNS, RunConfig, TrendPipeline, cmd_run, cmd_sweep, stage,
                             training_rmse_trend)
from utils.helpers import load_json_file


@pytest.fixture(scope="module")
def spectral_run(quick_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    results = cmd_run(quick_config.with_overrides(strategy="spectral", k=2), out, include_leave_one_out=True)
    return out, results


def test_run_writes_every_artifact(spectral_run):
    out, results = spectral_run
    for name in RUN_ARTIFACTS + ["tables/leave_one_out.csv", "models/cluster_000.mdl1", "models/cluster_001.mdl1"]:
        assert (out / name).is_file(), name
    manifest = load_json_file(out / "manifest.json")
    assert manifest["results"]["n_clusters"] == 2
    assert manifest["design"]["area_weights"] == "cos(latitude)"
    assert "manifest.json" not in manifest["artifacts"]
    assert len(manifest["datasets"]) == 1 + 2 * 6 + 1


def test_run_summary(spectral_run):
    _, results = spectral_run
    assert results["strategy"] == "spectral"
    assert sum(results["cluster_sizes"]) > 0
    assert results["training_rmse"] >= 0.0
    assert -1.0 <= results["correlation_with_past"] <= 1.0
    assert results["uncertainty_rms"] > 0.0
    assert set(results["rmse_vs_truth"]) == {"ml", "persistence"}
    assert -1.0 <= results["loo_correlation"] <= 1.0


def test_run_tables(spectral_run):
    out, _ = spectral_run
    ranking = pd.read_csv(out / "tables" / "shap_importance.csv")
    assert list(ranking.columns) == ["cluster", "feature", "mean_abs_phi", "rank"]
    assert len(ranking) == 2 * 6
    loo = pd.read_csv(out / "tables" / "leave_one_out.csv")
    assert list(loo.columns[-1:]) == ["average"]
    assert len(loo) == 4
    future = pd.read_csv(out / "tables" / "future_scores.csv")
    assert list(future["method"]) == ["ml", "persistence"]
    assert future.loc[1, "correlation_with_past"] == 1.0


def test_single_cluster_strategies_agree(quick_config):
    single = TrendPipeline(quick_config.with_overrides(strategy="none"))
    single.trends
    spectral = single.variant(strategy="spectral", k=1)
    assert spectral.datasets is single.datasets
    np.testing.assert_array_equal(single.partition.labels, spectral.partition.labels)
    np.testing.assert_array_equal(single.future_prediction.slope, spectral.future_prediction.slope)


def test_ml_beats_persistence_on_informative_suite(synthetic_config):
    pipeline = TrendPipeline(synthetic_config.with_overrides(strategy="none"))
    scores = pipeline.future_scores().set_index("method")
    assert scores.loc["ml", "rmse_vs_truth"] < scores.loc["persistence", "rmse_vs_truth"]
    assert scores.loc["ml", "correlation_vs_truth"] > 0.5


def test_domain_strategy_partition(quick_config):
    partition = TrendPipeline(quick_config.with_overrides(strategy="domain")).partition
    assert 1 <= partition.k <= 4
    assert partition.sizes.sum() == partition.mask.ocean_count


def test_sweep_table(quick_config, tmp_path):
    table = cmd_sweep(quick_config, ks=[1, 2, 3], out=tmp_path)
    assert list(table.columns) == SWEEP_COLUMNS
    assert list(table["n_clusters"]) == [1, 2, 3]
    assert np.all(np.isfinite(table[["training_rmse", "future_rms", "uncertainty_rms"]].to_numpy()))
    assert (tmp_path / "tables" / "sweep.csv").is_file()


def test_sweep_training_rmse_falls_with_cluster_count(synthetic_config):
    training = replace(synthetic_config.training, learning_rate=1e-2, epochs=300, dropout=0.1,
                       validation_fraction=0.0)
    config = replace(synthetic_config, training=training, mc_passes=5)
    table = cmd_sweep(config, ks=[1, 2, 4, 8, 16])
    assert training_rmse_trend(table[table["n_clusters"] > 1]) <= 0.0

    single = TrendPipeline(config.with_overrides(strategy="none"))
    expected = weighted_rmse(single.training_prediction, single.trends.observed, single.datasets.weights)
    assert table.loc[0, "training_rmse"] == pytest.approx(expected, rel=1e-12)


def test_rerun_reproduces_artifacts(spectral_run, quick_config, tmp_path):
    out, _ = spectral_run
    cmd_run(quick_config.with_overrides(strategy="spectral", k=2), tmp_path, include_leave_one_out=True)
    produced = sorted(p.relative_to(out) for p in out.rglob("*") if p.suffix in (".csv", ".grd1"))
    assert len(produced) > 10
    for name in produced:
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes(), name


def test_config_resolves_paths(synthetic_config, synthetic_config_path):
    root = synthetic_config_path.parent
    assert synthetic_config.observation == root / "observation.grd1"
    assert len(synthetic_config.models) == 6
    assert synthetic_config.train_window == (1993, 1998)
    assert synthetic_config.future_truth.is_file()


def test_config_overrides_skip_none(synthetic_config):
    changed = synthetic_config.with_overrides(k=5, seed=None, output_dir="elsewhere")
    assert changed.k == 5
    assert changed.seed == synthetic_config.seed
    assert str(changed.output_dir) == "elsewhere"
    assert changed.train_config.seed == synthetic_config.seed


@pytest.mark.parametrize("edit", [
    lambda d: d.pop("models"),
    lambda d: d.update(observation="missing.grd1"),
    lambda d: d.update(strategy="random"),
    lambda d: d.update(sigma=-1.0),
    lambda d: d.update(train_window=[2000]),
    lambda d: d.update(training={"epochs": 0}),
    lambda d: d.update(training={"momentum": 0.9}),
])
def test_config_errors(synthetic_config_path, edit):
    data = load_json_file(synthetic_config_path)
    edit(data)
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data, synthetic_config_path.parent)


def test_stage_errors_are_labeled(quick_config):
    pipeline = TrendPipeline(quick_config.with_overrides(strategy="spectral", k=100000))
    with pytest.raises(PipelineStageError) as info:
        pipeline.partition
    assert info.value.stage == "segmentation"

    wrong_grid = TrendPipeline(replace(quick_config, grid=(10, 10)))
    with pytest.raises(PipelineStageError) as info:
        wrong_grid.datasets
    assert info.value.stage == "load"
    assert isinstance(info.value.cause, DataError)


def test_stage_passes_labeled_errors_through():
    with pytest.raises(PipelineStageError) as info:
        with stage("outer"):
            with stage("inner"):
                raise ValueError("boom")
    assert info.value.stage == "inner"


def test_cli_gen_synth_and_cluster(tmp_path):
    data = tmp_path / "synthetic"
    assert app.main(["gen-synth", "--out", str(data), "--n-lon", "12", "--n-lat", "6",
                     "--n-models", "3", "--months", "48", "--seed", "2"]) == 0
    config = data / "config.json"
    assert config.is_file()
    out = tmp_path / "out"
    assert app.main(["cluster", "--config", str(config), "--strategy", "domain", "--out", str(out)]) == 0
    assert (out / "partition.csv").is_file()
    assert (out / "heatmaps" / "partition.ppm").is_file()


def test_cli_exit_codes(tmp_path, synthetic_config_path):
    assert app.main(["trends", "--config", str(tmp_path / "absent.json")]) == 2
    broken = tmp_path / "broken"
    config_path = app.gen_synth(broken, n_lon=12, n_lat=6, n_models=3, months=48, seed=1)
    (broken / "observation.grd1").write_bytes(b"GRD1")
    assert app.main(["trends", "--config", str(config_path), "--out", str(tmp_path / "t")]) == 3
    assert app.main(["cluster", "--config", str(synthetic_config_path), "--strategy", "spectral",
                     "--k", "100000", "--out", str(tmp_path)]) == 4
