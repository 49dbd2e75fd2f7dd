"""Hot loops: the compiled extension when available, pure Python otherwise.

Set ``GROUNDCTL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("GROUNDCTL_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend or python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None and backend is compiled_backend else "python"

integrate = backend.integrate
expsum = backend.expsum
expsum_many = backend.expsum_many

OK = python_backend.OK
STEP_UNDERFLOW = python_backend.STEP_UNDERFLOW
MAX_STEPS = python_backend.MAX_STEPS
