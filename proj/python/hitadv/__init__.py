"""Shape-based adversarial point cloud toolkit.

The heavy lifting lives in the compiled extension; this package re-exports
its surface. The extension sits inside the package in an installed wheel
and next to it in a plain CMake build tree.
"""

try:
    from ._hitadv import *  # noqa: F401,F403
    from ._hitadv import __version__  # noqa: F401
except ImportError:
    from _hitadv import *  # noqa: F401,F403
    from _hitadv import __version__  # noqa: F401
