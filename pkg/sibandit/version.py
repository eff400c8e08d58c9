import os

__version__ = "0.1.0"
base_version = __version__

# source distributions ship the commit hash written by setup.py
__commit__ = ""
try:
    _commitFile = os.path.join(os.path.dirname(os.path.abspath(__file__)), ".commit_version")
    with open(_commitFile) as f:
        __commit__ = f.read().strip()
except (NameError, OSError):
    # NameError when setup.py execs this file
    pass

if __commit__:
    __version__ = __version__ + "+git." + __commit__[:12]

__all__ = ["__version__", "__commit__", "base_version"]
