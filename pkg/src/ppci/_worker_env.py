"""Worker-process bootstrap kept free of numpy imports.

Used as a process-pool initializer: under a spawn context it runs before
the worker imports numpy, so the BLAS thread caps below actually take
effect and parallel replications do not oversubscribe the machine.
"""

import os

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def limit_blas_threads():
    for var in _BLAS_VARS:
        os.environ[var] = "1"
