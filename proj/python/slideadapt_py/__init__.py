"""Python bindings for the slideadapt C++ core."""
from ._slideadapt import *  # noqa: F401,F403
from ._slideadapt import __doc__  # noqa: F401
