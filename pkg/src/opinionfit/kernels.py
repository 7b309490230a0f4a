"""Hot kernels, dispatched to numba when available.

``BACKEND`` is ``"numba"`` or ``"numpy"``. Both implementations are importable
directly (``_kernels_numpy`` always, ``_kernels_numba`` when numba is
installed) so they can be checked against each other.
"""
from ._accel import HAVE_NUMBA

if HAVE_NUMBA:
    from ._kernels_numba import (
        ap_iterate,
        delta_update,
        derivatives,
        group_count,
        group_sum,
        log_likelihood,
        nr_iterate,
        psi_update,
        subject_sigma,
    )

    BACKEND = "numba"
else:
    from ._kernels_numpy import (  # noqa: F401
        ap_iterate,
        delta_update,
        derivatives,
        group_count,
        group_sum,
        log_likelihood,
        nr_iterate,
        psi_update,
        subject_sigma,
    )

    BACKEND = "numpy"

__all__ = [
    "BACKEND",
    "ap_iterate",
    "delta_update",
    "derivatives",
    "group_count",
    "group_sum",
    "log_likelihood",
    "nr_iterate",
    "psi_update",
    "subject_sigma",
]
