"""Maximum-entropy scoring and evolutionary search for CNN-Transformer backbones."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
