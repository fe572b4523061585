"""
Test script to verify the forenlab setup.
"""

import sys
import os

import numpy as np


def test_imports():
    """Test that all required modules can be imported."""
    print("Testing imports...")

    for module in ('numpy', 'pandas', 'scipy.ndimage', 'tqdm', 'click', 'dotenv', 'openpyxl'):
        __import__(module)
        print(f"✓ {module} imported successfully")

    from utils.ndtensor import Tensor
    from utils.spectral import foren_apply
    from utils.models import Model
    from utils.training import Trainer
    print("✓ forenlab utils imported successfully")


def test_pipeline_classes():
    """Test that the pipeline classes can be instantiated."""
    print("\nTesting pipeline classes...")

    from utils.config import RunConfig
    from scripts.generate_dataset import DatasetGenerator
    from scripts.train_model import TrainingPipeline
    from scripts.evaluate_model import Evaluator
    from scripts.run_sweep import SweepRunner
    from scripts.spectrum_report import SpectrumReporter

    config = RunConfig.load(use_env=False)
    for pipeline in (DatasetGenerator(config), TrainingPipeline(config), Evaluator(config), SweepRunner(config)):
        print(f"✓ {type(pipeline).__name__} instantiated successfully")
    assert SpectrumReporter(config.n_bands).n_bands == 8


def test_agent():
    """Test the main ForenLab class and the command group."""
    print("\nTesting ForenLab...")

    from agent.main import ForenLab, cli
    from utils.config import RunConfig

    lab = ForenLab(RunConfig.load(use_env=False), verbose=False)
    assert lab.config.arch == 'vifor'
    assert sorted(cli.commands) == ['eval', 'gen', 'infer', 'spectrum', 'sweep', 'train']
    print(f"✓ ForenLab instantiated, commands: {sorted(cli.commands)}")


def test_default_model_runs():
    """Run the default ViFOR model once on a synthetic field."""
    print("\nTesting default model...")

    from utils.config import RunConfig
    from utils.grids import downsample, synth_field
    from utils.models import Model, super_resolve

    config = RunConfig.load(use_env=False)
    lr = downsample(synth_field(64, 64, seed=0), config.scale_factor)
    model = Model.build(config.model_config(lr.height, lr.width), config.seed)
    out = super_resolve(model, lr.values)
    assert out.shape == (64, 64)
    assert np.all(np.isfinite(out))
    print(f"✓ {model.config.arch} with {model.parameter_count()} parameters maps {lr.shape} → {out.shape}")


def test_directory_structure():
    """Test that the directory structure is correct."""
    print("\nTesting directory structure...")

    root = os.path.dirname(os.path.abspath(__file__))
    required_files = [
        'requirements.txt',
        'README.md',
        'agent/main.py',
        'scripts/generate_dataset.py',
        'scripts/train_model.py',
        'scripts/evaluate_model.py',
        'scripts/run_sweep.py',
        'scripts/run_inference.py',
        'scripts/spectrum_report.py',
        'scripts/run_benchmark.py',
        'utils/ndtensor.py',
        'utils/spectral.py',
        'utils/models.py',
        'utils/training.py',
        'utils/metrics.py',
        'utils/grids.py',
        'utils/config.py',
    ]

    for file_path in required_files:
        assert os.path.exists(os.path.join(root, file_path)), f"{file_path} missing"
        print(f"✓ {file_path} exists")


def main():
    """Run all setup checks."""
    print("forenlab Setup Test")
    print("=" * 40)

    test_directory_structure()
    test_imports()
    test_pipeline_classes()
    test_agent()
    test_default_model_runs()

    print("\n" + "=" * 40)
    print("✅ Setup test completed!")
    print("\nTo run forenlab:")
    print("1. Generate data: python agent/main.py gen")
    print("2. Train: python agent/main.py train --set epochs=50")
    print("3. Evaluate: python agent/main.py eval --split val")
    print("4. Tests: pytest")


if __name__ == "__main__":
    sys.path.append(os.path.dirname(os.path.abspath(__file__)))
    main()
