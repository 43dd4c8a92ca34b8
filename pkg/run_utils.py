"""
Run Utilities
Logging setup, run identifiers and output directories
"""
import os
import logging

# Configure logger
logger = logging.getLogger(__name__)


def run_id(variant: str, gain: str, seed: int) -> str:
    """File-safe identifier of one (variant, gain, seed) cell"""
    return f"{variant}_{gain}_seed{seed:03d}"


def prepare_output_dir(out_dir: str, subdirs=("runs",)) -> str:
    """
    Create a results directory with its standard subfolders

    Args:
        out_dir: Results directory
        subdirs: Subfolders to create inside it

    Returns:
        str: Absolute path of the results directory
    """
    out_dir = os.path.abspath(out_dir)
    for sub in subdirs:
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    logger.info(f"[OUTPUT] Results directory: {out_dir}")
    return out_dir


def setup_logging(level: str = "INFO", log_dir: str = "logs"):
    """
    Configure logging for the simulation
    Creates log directory and sets up file and console handlers
    """
    os.makedirs(log_dir, exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(log_dir, 'smith_predictor.log')),
            logging.StreamHandler()
        ]
    )
