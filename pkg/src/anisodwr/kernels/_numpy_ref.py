"""NumPy reference implementation of the per-cell quadrature kernels.

All kernels take precomputed tables:
  W     (E,Q)      quadrature weight times |det J|
  bq    (E,Q,2)    convection field at quadrature points
  aq    (E,Q)      reaction coefficient at quadrature points
  delta (E,)       SUPG parameter per cell (0 disables stabilization terms)
  tval  (Q,T)      test shape values        tgrad (E,Q,T,2) physical gradients
  uval  (Q,U)      trial shape values       ugrad (E,Q,U,2)
  ulap  (E,Q,U)    physical Laplacians of the trial shapes
"""
from __future__ import annotations

import numpy as np


def cdr_cell_matrices(W, bq, aq, eps, delta, tval, tgrad, uval, ugrad, ulap):
    """Element matrices of the inner CDR form and its SUPG companions.

    Returns (A, S, M, Mb), each (E, T, U):
      A  : (eps grad u, grad phi) + (b.grad u, phi) + (a u, phi)
      S  : delta (-eps lap u + b.grad u + a u, b.grad phi)
      M  : (u, phi)
      Mb : delta (u, b.grad phi)
    """
    ugb = np.einsum("eqjd,eqd->eqj", ugrad, bq)
    tgb = np.einsum("eqid,eqd->eqi", tgrad, bq)
    A = eps * np.einsum("eq,eqid,eqjd->eij", W, tgrad, ugrad)
    A += np.einsum("eq,eqj,qi->eij", W, ugb, tval)
    A += np.einsum("eq,eq,qj,qi->eij", W, aq, uval, tval)
    r_lin = -eps * ulap + ugb + aq[:, :, None] * uval[None, :, :]
    S = delta[:, None, None] * np.einsum("eq,eqj,eqi->eij", W, r_lin, tgb)
    M = np.einsum("eq,qj,qi->eij", W, uval, tval)
    Mb = delta[:, None, None] * np.einsum("eq,qj,eqi->eij", W, uval, tgb)
    return A, S, M, Mb


def cdr_cell_loads(W, bq, fq, delta, tval, tgrad):
    """Element load vectors (f, phi) and delta (f, b.grad phi), each (E, T)."""
    tgb = np.einsum("eqid,eqd->eqi", tgrad, bq)
    F = np.einsum("eq,eq,qi->ei", W, fq, tval)
    Fb = delta[:, None] * np.einsum("eq,eq,eqi->ei", W, fq, tgb)
    return F, Fb


def pair_cellwise(mats, test_vecs, trial_vecs):
    """Per-cell scalars w^T A v: (E,) from (E,T,U), (E,T), (E,U)."""
    return np.einsum("eij,ei,ej->e", mats, test_vecs, trial_vecs)
