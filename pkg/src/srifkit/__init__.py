"""Mixed-precision square-root information filtering for visual-inertial estimation.

Three mathematically equivalent sliding-window estimators (EKF, QR-based
SRIF, and a preconditioned Cholesky-based SRIF) over a synthetic
visual-inertial simulator, with conditioning diagnostics and FLOP-level
efficiency instrumentation.
"""

__version__ = "0.1.0"
