"""
Application Configuration Settings
"""
import os
from pathlib import Path
from typing import Dict, Any

from dotenv import load_dotenv

load_dotenv()

# Base paths
BASE_DIR = Path(__file__).parent.parent.parent
DATA_DIR = BASE_DIR / "data"
CODES_DIR = DATA_DIR / "codes"
RESULTS_DIR = DATA_DIR / "results"
LOGS_DIR = BASE_DIR / "logs"

# Ensure directories exist; the code cache is created on first write
for directory in [DATA_DIR, RESULTS_DIR, LOGS_DIR]:
    directory.mkdir(exist_ok=True)


class Config:
    """Base configuration class"""

    # Application settings
    APP_NAME = "FlashSim"
    APP_VERSION = "1.0.0"
    DEBUG = False

    # Channel defaults (volts, hours)
    V_MIN = 1.4
    V_MAX = 3.93
    V_PP = 0.3
    SIGMA_E = 0.35
    SIGMA_P = 0.05
    RTN_COEFF = 0.00025
    RTN_EXP = 0.62
    A_R = 0.000055
    B_R = 0.000235
    ALPHA1 = 0.62
    ALPHA0 = 0.32
    X0 = 1.4

    # LDPC code defaults
    CODE_N = 1024
    CODE_K = 911
    CODE_PROFILE = {2: 0.06, 3: 0.94}
    CODE_SEED = 1
    RATE_TOLERANCE = 0.005
    DMIN_EFFORT = 5000
    DMIN_EXHAUSTIVE_LIMIT = 24
    # error-impulse search: LLR pushes towards 1 on a unit all-zero background
    DMIN_IMPULSES = (2.0, 3.0, 5.0, 9.0, 17.0)
    DMIN_IMPULSE_BATCH = 256
    CODE_STRICT_GIRTH = True
    BP_MAX_ITER = 50

    # Write-voltage coordinate search
    WRITE_M_GRID = 200
    WRITE_Q_MAX = 50
    WRITE_V2_INIT = 3.3
    WRITE_TOL = 1e-4
    FIXED_V1_FRACTION = 1.0 / 3.0
    FIXED_V2_FRACTION = 2.0 / 3.0

    # Read-voltage search
    THETA_BOUNDS = (0.05, 0.95)
    THETA_TOL = 1e-3
    THETA_SCAN_STEP = 0.01
    THETA_FIXED = 0.35
    LLR_CLAMP = 30.0
    ENTROPY_FLANK_SIGMAS = 6.0
    MMI_STEP = 1e-3
    MMI_REFINEMENTS = 2
    CALIBRATION_THETAS = (0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)
    CALIBRATION_FRAMES = 20000

    # Campaign settings
    MIN_ERROR_EVENTS = 100
    FRAME_CAP = 20000
    BATCH_FRAMES = 64
    MASTER_SEED = 20240601

    # Logging settings
    LOG_LEVEL = "INFO"
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_FILE = str(LOGS_DIR / "flashsim.log")

    # Performance settings
    MAX_WORKERS = os.cpu_count() or 4

    # File paths
    CSV_FLOAT_FORMAT = "%.9g"
    LUT_FILE = str(RESULTS_DIR / "voltages.lut")
    WEIGHTS_FILE = str(RESULTS_DIR / "weights.kv")

    @classmethod
    def get_config(cls) -> Dict[str, Any]:
        """Get all configuration as dictionary"""
        return {
            key: getattr(cls, key)
            for key in dir(cls)
            if not key.startswith('_') and not callable(getattr(cls, key))
        }


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    LOG_LEVEL = "DEBUG"


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    LOG_LEVEL = "WARNING"


class TestingConfig(Config):
    """Testing configuration"""
    DEBUG = True
    LOG_LEVEL = "DEBUG"
    CODE_N = 256
    CODE_K = 228
    CODE_STRICT_GIRTH = False
    DMIN_EFFORT = 200
    WRITE_M_GRID = 60
    FRAME_CAP = 200
    CALIBRATION_FRAMES = 200
    MAX_WORKERS = 2


# Configuration mapping
config_map = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config(config_name: str = None) -> Config:
    """Get configuration class based on environment"""
    if config_name is None:
        config_name = os.getenv('FLASHSIM_ENV', 'default')

    return config_map.get(config_name, DevelopmentConfig)


# Current configuration instance
current_config = get_config()
