from ._qrsdet import *  # noqa: F401,F403
