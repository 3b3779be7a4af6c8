"""Irish reel curation, grid encoding, adversarial training and evaluation."""

try:
    from . import _reelgan as _impl
    from ._reelgan import *  # noqa: F401,F403
except ImportError:
    # Flat layout: the extension sits next to this package on sys.path when
    # built in-tree rather than installed as a wheel.
    import _reelgan as _impl
    from _reelgan import *  # noqa: F401,F403

__all__ = [name for name in dir(_impl) if not name.startswith("_")]
