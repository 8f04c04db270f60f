#!/usr/bin/env python3
"""
Quick setup script for the Sea Level Trend Forecaster
Run this to verify your installation and smoke-test the pipeline on a tiny synthetic suite.
"""

import os
import tempfile
from pathlib import Path


def check_file_exists(file_path, description):
    """Check if a file exists and print status."""
    if os.path.exists(file_path):
        print(f"✅ {description}: {file_path}")
        return True
    else:
        print(f"❌ {description}: {file_path} - NOT FOUND")
        return False


def check_dependencies():
    """Check if required packages are installed."""
    print("\n🔍 Checking Dependencies...")

    # import names differ from the distribution names for python-dotenv and scikit-learn
    required_packages = {'numpy': 'numpy', 'scipy': 'scipy', 'pandas': 'pandas', 'scikit-learn': 'sklearn',
                         'python-dotenv': 'dotenv', 'pytest': 'pytest', 'shap': 'shap'}

    missing_packages = []

    for package, module in required_packages.items():
        try:
            __import__(module)
            print(f"✅ {package}")
        except ImportError:
            print(f"❌ {package} - NOT INSTALLED")
            missing_packages.append(package)

    if missing_packages:
        print(f"\n⚠️  Missing packages: {', '.join(missing_packages)}")
        print("Run: pip install -r requirements.txt")
        return False

    return True


def check_project_structure():
    """Check if all required files exist."""
    print("\n📁 Checking Project Structure...")

    required_files = [
        ('app.py', 'Command-line entry point'),
        ('requirements.txt', 'Dependencies'),
        ('config.py', 'Configuration'),
        ('data/desk_config.json', 'Desk-scale run config'),
        ('data/full_config.json', 'Full-scale run config'),
        ('modules/__init__.py', 'Modules package'),
        ('modules/grid_core.py', 'Grids and masks'),
        ('modules/trend.py', 'Trend fitting'),
        ('modules/segmentation.py', 'Segmentation'),
        ('modules/neuralnet.py', 'Neural networks'),
        ('modules/uncertainty.py', 'MC dropout'),
        ('modules/explain.py', 'Shapley attribution'),
        ('modules/evalmetrics.py', 'Scores and leave-one-out'),
        ('modules/file_formats.py', 'GRD1/MDL1 files'),
        ('modules/synthetic.py', 'Synthetic data'),
        ('modules/pipeline.py', 'Pipeline'),
        ('utils/__init__.py', 'Utils package'),
        ('utils/helpers.py', 'Helper functions')
    ]

    all_exist = True
    for file_path, description in required_files:
        if not check_file_exists(file_path, description):
            all_exist = False

    return all_exist


def check_environment():
    """Report environment overrides (all optional)."""
    print("\n🔑 Checking Environment...")

    from config import Config

    if os.path.exists('.env'):
        print("✅ Environment file: .env")
    else:
        print("ℹ️  No .env file; defaults in use (see .env.example)")
    print(f"   log level {Config.LOG_LEVEL}, seed {Config.DEFAULT_SEED}, "
          f"threads {Config.DEFAULT_THREADS}, output {Config.DEFAULT_OUTPUT_DIR}")
    return True


def run_system_test():
    """Generate a tiny synthetic suite and run every stage on it."""
    print("\n🧪 Running System Test...")

    try:
        from modules.pipeline import RUN_ARTIFACTS, RunConfig, cmd_run
        from modules.synthetic import gen_synth

        with tempfile.TemporaryDirectory() as tmp:
            config_path = gen_synth(Path(tmp) / "synthetic", n_lon=12, n_lat=6, n_models=3, months=36)
            config = RunConfig.from_file(config_path).with_overrides(k=2, output_dir=Path(tmp) / "out")
            results = cmd_run(config)
            missing = [a for a in RUN_ARTIFACTS if not (Path(tmp) / "out" / a).exists()]
            if missing:
                print(f"❌ Missing artifacts: {missing}")
                return False
            print(f"✅ Pipeline: {results['n_clusters']} clusters, training RMSE {results['training_rmse']:.3f}, "
                  f"uncertainty RMS {results['uncertainty_rms']:.3f}")

        return True

    except Exception as e:
        print(f"❌ System test failed: {e}")
        return False


def main():
    """Run all checks."""
    print("🌊 Sea Level Trend Forecaster - Setup Verification")
    print("=" * 50)

    checks = [
        check_project_structure(),
        check_dependencies(),
        check_environment(),
        run_system_test()
    ]

    print("\n" + "=" * 50)

    if all(checks):
        print("🎉 ALL CHECKS PASSED!")
        print("\nYou're ready to run the pipeline:")
        print("python app.py gen-synth --out synthetic && python app.py run --config data/desk_config.json")
    else:
        print("⚠️  SOME CHECKS FAILED")
        print("\nPlease fix the issues above before running the pipeline.")
        print("Refer to README.md for troubleshooting.")

    print("\n📚 Next steps:")
    print("1. Fix any failed checks")
    print("2. Run: pytest")
    print("3. Convert real datasets to GRD1 and point data/full_config.json at them")


if __name__ == "__main__":
    main()
