from utils.checkpoint import CheckpointContainer, CheckpointError
from utils.config import ConfigError, canonical_json, config_hash, load_config, run_stamp
from utils.ppm import load_ppm, save_ppm
from utils.raster import patch_sampling_matrix
from utils.seeding import SeedStreams

__all__ = [
    "CheckpointContainer",
    "CheckpointError",
    "ConfigError",
    "canonical_json",
    "config_hash",
    "load_config",
    "run_stamp",
    "load_ppm",
    "save_ppm",
    "patch_sampling_matrix",
    "SeedStreams",
]
