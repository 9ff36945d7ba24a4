"""Closed-form MRT and ZF beamformers.

MRT aligns each transmitter's beamformer with its desired channel at full
budget power. ZF projects the desired channel onto the orthogonal
complement of all cross-link channels (requires M >= K), nulling generated
interference exactly, then transmits at full power along the projection.

Both entry points operate on raw channel arrays with leading batch
dimensions; :func:`mrt` / :func:`zf` wrap them into BeamformerSet.
"""

from __future__ import annotations

import warnings

import numpy as np

from .metrics import BeamformerSet

__all__ = ["mrt", "mrt_raw", "zf", "zf_raw", "null_space_projector"]

GRAM_COND_LIMIT = 1e12
GRAM_RIDGE = 1e-12


def mrt_raw(h: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """w_k = sqrt(P_k) * h_kk / ||h_kk||; zero (and flagged) if h_kk = 0."""
    kk = np.arange(h.shape[-2])
    desired = h[..., kk, kk, :]
    norms = np.linalg.norm(desired, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        warnings.warn("zero desired channel: returning a zero MRT beamformer")
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.sqrt(np.asarray(budgets, dtype=float))[..., None] * desired / safe


def _regularized_gram_inverse(gram: np.ndarray, pairs: int) -> np.ndarray:
    """Inverse of a Hermitian Gram matrix with a conditional ridge.

    When the condition number exceeds 1e12 (or the matrix is numerically
    singular), a ridge of 1e-12 * trace / K is added and a diagnostic is
    emitted; this is the regularized fallback for rank-deficient
    cross-channel stacks.
    """
    eigvals = np.linalg.eigvalsh(gram)
    lo, hi = eigvals[..., 0], eigvals[..., -1]
    bad = (lo <= 0.0) | (lo * GRAM_COND_LIMIT < hi)
    if np.any(bad):
        warnings.warn("ill-conditioned cross-channel Gram matrix: adding ridge")
        trace = np.einsum("...ii->...", gram).real
        ridge = GRAM_RIDGE * trace / pairs
        eye = np.eye(gram.shape[-1])
        gram = gram + np.where(bad, ridge, 0.0)[..., None, None] * eye
    return np.linalg.inv(gram)


def null_space_projector(columns: np.ndarray, pairs: int | None = None) -> np.ndarray:
    """Orthogonal projector onto the null space of the given column stack.

    columns has shape (..., M, J); returns (..., M, M) computed as
    I - H (H^H H)^(-1) H^H with the ridge fallback of
    :func:`_regularized_gram_inverse`.
    """
    columns = np.asarray(columns, dtype=complex)
    m, j = columns.shape[-2], columns.shape[-1]
    if pairs is None:
        pairs = j + 1
    gram = np.einsum("...mi,...mj->...ij", np.conj(columns), columns)
    inv = _regularized_gram_inverse(gram, pairs)
    proj = np.einsum("...mi,...ij,...nj->...mn", columns, inv, np.conj(columns))
    return np.eye(m) - proj


def zf_raw(h: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """Zero-forcing beamformers for all transmitters.

    For transmitter k the cross-link channels {h_kl : l != k} are stacked
    as columns, the desired channel is projected onto their null space, and
    the result is scaled to the budget. Requires M >= K. A vanishing
    projection yields a zero beamformer with a warning.
    """
    k, m = h.shape[-3], h.shape[-1]
    if m < k:
        raise ValueError(f"ZF requires M >= K (got M={m}, K={k})")
    budgets = np.asarray(budgets, dtype=float)
    kk = np.arange(k)
    if k == 1:
        return mrt_raw(h, budgets)

    others = np.array([[n for n in range(k) if n != i] for i in range(k)])
    cross = h[..., kk[:, None], others, :]  # (..., K, K-1, M)
    columns = np.swapaxes(cross, -1, -2)  # (..., K, M, K-1)
    proj = null_space_projector(columns, pairs=k)
    desired = h[..., kk, kk, :]
    projected = np.einsum("...mn,...n->...m", proj, desired)
    norms = np.linalg.norm(projected, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        warnings.warn("desired channel lies in the cross-link span: zero ZF beamformer")
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.sqrt(budgets)[..., None] * projected / safe


def mrt(channels, budgets) -> BeamformerSet:
    """Full-power maximum-ratio transmission for a single realization."""
    h = channels.h if hasattr(channels, "h") else np.asarray(channels)
    budgets = np.asarray(budgets, dtype=float)
    return BeamformerSet(w=mrt_raw(h, budgets), budgets=budgets)


def zf(channels, budgets) -> BeamformerSet:
    """Full-power zero-forcing for a single realization (needs M >= K)."""
    h = channels.h if hasattr(channels, "h") else np.asarray(channels)
    budgets = np.asarray(budgets, dtype=float)
    return BeamformerSet(w=zf_raw(h, budgets), budgets=budgets)
