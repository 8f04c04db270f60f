import argparse
import logging
import sys
from pathlib import Path

from config import Config
from modules.exceptions import ConfigError, DataError, FormatError, PipelineStageError, TrendForecastError
from modules.pipeline import RunConfig, TrendPipeline, cmd_run, cmd_sweep
from modules.synthetic import gen_synth
from utils.helpers import save_json_file, setup_logging, write_csv

logger = logging.getLogger("app")


def load_run_config(args) -> RunConfig:
    """Read --config and apply the command-line overrides."""
    config_path = Path(args.config or Config.DESK_CONFIG_FILE)
    config = RunConfig.from_file(config_path)
    return config.with_overrides(seed=args.seed, strategy=args.strategy, k=args.k,
                                 threads=args.threads, output_dir=args.out)


def cmd_gen_synth(args) -> int:
    out = Path(args.out or "synthetic")
    options = {"noise": args.noise}
    if args.uninformative:
        options["informative"] = False
    config_path = gen_synth(out, n_lon=args.n_lon, n_lat=args.n_lat, n_models=args.n_models,
                            months=args.months, seed=args.seed if args.seed is not None else Config.DEFAULT_SEED,
                            **options)
    print(f"Synthetic dataset written; run config at {config_path}")
    return 0


def cmd_trends(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    pipeline.write_trends(pipeline.config.output_dir)
    return 0


def cmd_cluster(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    pipeline.write_partition(pipeline.config.output_dir)
    print(f"{pipeline.partition.k} clusters, sizes {pipeline.partition.sizes.tolist()}")
    return 0


def cmd_train(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    out = pipeline.config.output_dir
    pipeline.write_partition(out)
    pipeline.write_training(out)
    print(pipeline.training_scores().to_string(index=False))
    return 0


def cmd_predict(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    pipeline.write_future(pipeline.config.output_dir)
    print(pipeline.future_scores().to_string(index=False))
    return 0


def cmd_uncertainty(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    out = pipeline.config.output_dir
    pipeline.write_uncertainty(out)
    save_json_file(out / "uncertainty.json", pipeline.uncertainty_summary())
    print(pipeline.uncertainty_summary())
    return 0


def cmd_explain(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    pipeline.write_importance(pipeline.config.output_dir)
    print(pipeline.importance[0].to_string(index=False))
    return 0


def cmd_eval_loo(args) -> int:
    pipeline = TrendPipeline(load_run_config(args))
    pipeline.write_leave_one_out(pipeline.config.output_dir)
    print(pipeline.loo_table.to_string(index=False))
    return 0


def cmd_sweep_ks(args) -> int:
    config = load_run_config(args)
    ks = [int(k) for k in args.ks.split(",")] if args.ks else None
    table = cmd_sweep(config, ks, out=config.output_dir)
    print(table.to_string(index=False))
    return 0


def cmd_run_all(args) -> int:
    config = load_run_config(args)
    results = cmd_run(config, include_leave_one_out=args.loo)
    for key in ("strategy", "n_clusters", "training_rmse", "future_rms", "uncertainty_rms", "correlation_with_past"):
        print(f"{key}: {results[key]}")
    return 0


COMMANDS = {
    "gen-synth": (cmd_gen_synth, "Write a synthetic observation/model dataset with planted trends"),
    "trends": (cmd_trends, "Fit global-mean-removed trend maps for every dataset"),
    "cluster": (cmd_cluster, "Segment the ocean into regions"),
    "train": (cmd_train, "Train one network per region on hindcast trends"),
    "predict": (cmd_predict, "Predict the future trend map from projection trends"),
    "uncertainty": (cmd_uncertainty, "Monte Carlo dropout mean and spread maps"),
    "explain": (cmd_explain, "Rank climate models by Shapley attribution per region"),
    "eval-loo": (cmd_eval_loo, "Leave-one-model-out evaluation against persistence"),
    "sweep": (cmd_sweep_ks, "Sweep the number of spectral clusters"),
    "run": (cmd_run_all, "Every stage, all artifacts"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sealevel-forecast", description=Config.APP_DESCRIPTION)
    parser.add_argument("--log-level", default=Config.LOG_LEVEL, help="Logging level (default from SEALEVEL_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, (handler, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.set_defaults(handler=handler)
        sub.add_argument("--seed", type=int, help="Run seed")
        sub.add_argument("--out", help="Output directory")
        if name == "gen-synth":
            sub.add_argument("--n-lon", type=int, default=Config.DESK_GRID[0])
            sub.add_argument("--n-lat", type=int, default=Config.DESK_GRID[1])
            sub.add_argument("--n-models", type=int, default=len(Config.MODEL_NAMES))
            sub.add_argument("--months", type=int, default=72)
            sub.add_argument("--noise", type=float, default=2.0, help="Observation noise (mm)")
            sub.add_argument("--uninformative", action="store_true",
                             help="Projections carry the past trend instead of the planted future one")
            continue
        sub.add_argument("--config", help=f"Run configuration JSON (default {Config.DESK_CONFIG_FILE})")
        sub.add_argument("--strategy", choices=Config.STRATEGIES)
        sub.add_argument("--k", type=int, help="Number of spectral clusters")
        sub.add_argument("--threads", type=int, help="Worker threads for clusters and folds")
        if name == "sweep":
            sub.add_argument("--ks", help="Comma-separated cluster counts (default from config)")
        if name == "run":
            sub.add_argument("--loo", action="store_true", help="Also run the leave-one-out evaluation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return 2
    except (FormatError, DataError) as e:
        logger.error("Input data error: %s", e)
        return 3
    except PipelineStageError as e:
        logger.error("%s", e)
        return 3 if isinstance(e.cause, (FormatError, DataError)) else 4
    except TrendForecastError as e:
        logger.error("Error: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
