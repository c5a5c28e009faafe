"""Kernel backend selection.

Imports the compiled core when it is built, otherwise the numpy fallback.
Set TEXTREC_PURE_PY=1 to force the fallback (used by the benchmark and by
tests that pin a backend). Both backends expose the same functions; see
``_fallback`` for the reference semantics.
"""

import os

from . import _fallback

if os.environ.get("TEXTREC_PURE_PY") == "1":
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND_NAME

gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
relu_fwd = _impl.relu_fwd
relu_bwd = _impl.relu_bwd
layernorm_fwd = _impl.layernorm_fwd
layernorm_bwd = _impl.layernorm_bwd
softmax_fwd = _impl.softmax_fwd
softmax_bwd = _impl.softmax_bwd
cross_entropy_fwd = _impl.cross_entropy_fwd
cross_entropy_bwd = _impl.cross_entropy_bwd
adam_step = _impl.adam_step
