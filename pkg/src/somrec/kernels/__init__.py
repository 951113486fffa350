"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is selected at import time when present; set
SOMREC_FORCE_NUMPY=1 to force the fallback (used by tests and the
benchmark to compare the two implementations).
"""

import os

import numpy as np

from . import _evidence_np

if os.environ.get("SOMREC_FORCE_NUMPY"):
    _impl = _evidence_np
    BACKEND = "numpy"
else:
    try:
        from . import _evidence_cy as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _evidence_np
        BACKEND = "numpy"


def evidence_deltas(
    search_locs,
    rot_normals,
    rot_dirs,
    node_locs,
    node_normals,
    node_dirs,
    node_feat_ev,
    radius,
    use_dir_term,
):
    """Best-match evidence delta per hypothesis; -1 where no node is in radius."""
    return _impl.evidence_deltas(
        np.ascontiguousarray(search_locs, dtype=np.float64),
        np.ascontiguousarray(rot_normals, dtype=np.float64),
        np.ascontiguousarray(rot_dirs, dtype=np.float64),
        np.ascontiguousarray(node_locs, dtype=np.float64),
        np.ascontiguousarray(node_normals, dtype=np.float64),
        np.ascontiguousarray(node_dirs, dtype=np.float64),
        np.ascontiguousarray(node_feat_ev, dtype=np.float64),
        float(radius),
        bool(use_dir_term),
    )
