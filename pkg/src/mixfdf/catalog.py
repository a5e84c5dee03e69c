"""Built-in benchmark plant and reference values.

The two-state quasi-linear benchmark: a stable plant with a sinusoidal sector
nonlinearity (alpha = 0.5), scalar disturbance and scalar fault, two outputs.
"""

import numpy as np

from .model import QuasiLinearModel


def benchmark_plant() -> QuasiLinearModel:
    return QuasiLinearModel(
        A0=[[-6.01, -2.94], [-2.94, -6.17]],
        A1=[[0.91, -0.44], [-1.31, -0.39]],
        A2=[[0.43, 0.15], [-0.09, 0.07]],
        B0=[[1.37], [-0.41]],
        B1=[[0.0], [0.0]],
        B2=[[0.35], [-0.6]],
        C0=[[1.21], [-0.11]],
        C1=[[0.0], [0.0]],
        C2=[[-3.67], [0.51]],
        F0={"name": "scaled_sin", "scale": 0.5},
        F1="zero",
        alpha=0.5,
    )


def reference_certificate():
    """Four-decimal certificate reported for gamma = 1, delta = 0.5."""
    return {
        "P1": np.array([[0.5248, -0.0397], [-0.0397, 0.3805]]),
        "P2": np.array([[0.4799, 0.0], [0.0, 0.4799]]),
        "beta": 6.0,
        "A_check": np.array([[-2.0747, -0.8242], [0.8209, -2.0835]]),
        "B_check": np.array([[0.0032, -0.0529], [-0.0054, -0.0441]]),
        "S_check": np.array([[0.4052, 0.2562], [0.2562, 0.2745]]),
    }


def reference_filter_matrices():
    """Reported filter matrices for the two designs (A_hat, B_hat; four decimals).

    The reported S_hat of the first design duplicates its B_hat and is not
    reproduced here; it is always recomputed from S_check.
    """
    return {
        "design1": {
            "A_hat": np.array([[-4.3228, -1.7172], [1.7103, -4.3411]]),
            "B_hat": np.array([[0.0067, -0.1102], [-0.0113, -0.0919]]),
        },
        "design2": {
            "A_hat": np.array([[-4.8359, -3.3771], [3.3761, -4.509]]),
            "B_hat": np.array([[-0.0177, -0.1615], [-0.0124, -0.1198]]),
            "S_hat": np.array([[0.6030, 0.2787], [0.2787, 0.4084]]),
        },
    }
