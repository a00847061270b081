"""Numerics for adaptive refinement driven by factorization stability.

Subpackages cover dense linear-algebra kernels (:mod:`qoadapt.linalg`),
block-LU factorization and factor-growth experiments (:mod:`qoadapt.blocklu`),
the quasi-orthogonality analyzer (:mod:`qoadapt.qo`), the generic
solve-estimate-mark-refine loop (:mod:`qoadapt.adaptive`), adaptive
Crank-Nicolson time stepping for semi-discrete parabolic systems
(:mod:`qoadapt.parabolic`), and the experiment CLI (:mod:`qoadapt.cli`).
"""

__version__ = "0.1.0"
