import os

from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

STOCHSR_ENVIRONMENT = os.getenv("STOCHSR_ENVIRONMENT", "dev")

if STOCHSR_ENVIRONMENT == "dev":
    from .dev import *  # noqa
elif STOCHSR_ENVIRONMENT == "prod":
    from .prod import *  # noqa
else:
    raise ValueError("StochSR Environment Not Specified")
