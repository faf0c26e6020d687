# tests/conftest.py

import pytest
import os
import sys
from unittest.mock import patch

# --- Add src to path to allow imports ---
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

from hyperbolic_diffusion_lab.cli import main as lab_main
from hyperbolic_diffusion_lab.grid import Grid1D
from hyperbolic_diffusion_lab.params import ModelParams

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), 'golden')


@pytest.fixture
def periodic_grid():
    """512 cells on the periodic box [-1, 1)."""
    return Grid1D(512, -1.0, 1.0, "periodic")


@pytest.fixture
def heat_params():
    """lambda = 0.5, K = 0.02 (sigma = 0.2), wave speed 0.2."""
    return ModelParams.from_volatility(0.5, 0.2)


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture
def write_config(tmp_path):
    """Returns a helper that writes YAML text to tmp_path and gives back its path."""
    def _write(text, name="experiment.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


@pytest.fixture
def run_cli():
    """
    Returns a helper that runs the hyperdiff-lab entry point with the given
    arguments and returns its exit status. A non-zero exit is only raised when
    expect_status is left at 0.
    """
    def _run_cli_wrapper(*args, expect_status=0):
        final_args = [str(a) for a in args]
        with patch.object(sys, 'argv', [lab_main.__module__] + final_args):
            try:
                lab_main()
            except SystemExit as e:
                code = e.code or 0
                if code != expect_status:
                    raise
                return code
        return 0
    return _run_cli_wrapper
