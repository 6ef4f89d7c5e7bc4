import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

RUN_ROOT = Path(os.getenv("STOCHSR_RUN_ROOT", default=str(BASE_DIR / "runs")))

LOG_LEVEL = os.getenv("STOCHSR_LOG_LEVEL", default="INFO").upper()

LOG_FORMAT = os.getenv("STOCHSR_LOG_FORMAT", default="simple")

METRIC_INTERVAL = int(os.getenv("STOCHSR_METRIC_INTERVAL", default=50))

CHECKPOINT_INTERVAL = int(os.getenv("STOCHSR_CHECKPOINT_INTERVAL", default=500))

PSNR_CAP = float(os.getenv("STOCHSR_PSNR_CAP", default=99.0))

CONFIG_FILE_NAME = "config.resolved"

# Evaluation defaults
TRAIN_COUNT = 512
EVAL_COUNT = 300
SAMPLING_NS = (10, 100, 1000)
TRAVERSAL_STEPS = 8

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {process:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": LOG_FORMAT if LOG_FORMAT in ("verbose", "simple") else "simple",
        },
    },
    "loggers": {
        "apps": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "core": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "stochsr.metrics": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
    },
}
