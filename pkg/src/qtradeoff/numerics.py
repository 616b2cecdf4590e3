"""Dense linear-algebra kernels shared by the rest of the package.

Everything here is a pure function of its inputs. Matrices are small
(parameter count n up to ~8), so no attempt is made at blocking or sparsity.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, SingularInformationError

RANK_TOL = 1e-9
SPD_RATIO = 1e-10


def gram_schmidt(vectors, tol=RANK_TOL):
    """Orthonormalize ``vectors`` in order, dropping near-dependent ones.

    Parameters
    ----------
    vectors : array_like, shape (m, d)
        Complex vectors, one per row.
    tol : float
        Rank-drop threshold relative to the largest input norm. A vector whose
        residual after projection falls below ``tol * max_norm`` is dropped.

    Returns
    -------
    basis : ndarray, shape (k, d)
        Orthonormal rows spanning the same space as the input.
    kept : list of int
        Indices of the input vectors that contributed a basis row.
    """
    vecs = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if vecs.size == 0 or vecs.shape[0] == 0:
        raise InvalidArgumentError("gram_schmidt needs at least one vector")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    scale = np.max(np.linalg.norm(vecs, axis=1))
    if scale == 0.0:
        return np.zeros((0, vecs.shape[1]), dtype=complex), []
    cutoff = tol * scale

    basis = []
    kept = []
    for idx, v in enumerate(vecs):
        w = v.copy()
        # two passes: classical GS loses orthogonality on near-dependent input
        for _ in range(2):
            for u in basis:
                w -= np.vdot(u, w) * u
        nrm = np.linalg.norm(w)
        if nrm < cutoff:
            continue
        basis.append(w / nrm)
        kept.append(idx)
    if not basis:
        return np.zeros((0, vecs.shape[1]), dtype=complex), []
    return np.array(basis), kept


def spd_inv_sqrt(m):
    """Return the symmetric inverse square root of a positive-definite matrix.

    Raises SingularInformationError when the smallest eigenvalue is below
    ``1e-10`` times the largest.
    """
    m = np.asarray(m, dtype=float)
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    if w[-1] <= 0 or w[0] <= SPD_RATIO * w[-1]:
        raise SingularInformationError(
            f"matrix is not positive definite (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})"
        )
    s = (v / np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def spd_sqrt(m):
    m = np.asarray(m, dtype=float)
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if w[0] < 0:
        raise SingularInformationError("matrix has a negative eigenvalue")
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def skew_spectrum(m):
    """Magnitudes of the eigenvalues of a real antisymmetric matrix.

    The eigenvalues of such a matrix come as ``±i s``; the Hermitian matrix
    ``iM`` has the real eigenvalues ``±s``, so its symmetric solver is used.
    Returned in descending order with multiplicity.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
    a = 0.5 * (m - m.T)
    s = np.abs(np.linalg.eigvalsh(1j * a))
    return np.sort(s)[::-1]


def is_orthonormal_columns(b, tol=1e-10):
    b = np.asarray(b)
    k = b.shape[1]
    return np.linalg.norm(b.conj().T @ b - np.eye(k)) < tol


def real_orthogonal_completion(prefix, d, rng=None):
    """Extend ``k`` real orthonormal columns to a ``d x d`` orthogonal matrix.

    The first ``k`` columns of the result are exactly ``prefix``. The
    complement is deterministic unless ``rng`` is given, in which case it is
    rotated by a random orthogonal matrix.
    """
    prefix = np.asarray(prefix, dtype=float)
    if prefix.size == 0:
        prefix = np.zeros((d, 0))
    if prefix.ndim == 1:
        prefix = prefix[:, None]
    if prefix.shape[0] != d or prefix.shape[1] > d:
        raise InvalidArgumentError(f"prefix of shape {prefix.shape} does not fit d={d}")
    k = prefix.shape[1]
    if k and not is_orthonormal_columns(prefix, 1e-10):
        raise InvalidArgumentError("prefix columns are not orthonormal")
    if k == d:
        return prefix.copy()
    if k == 0:
        q = np.eye(d)
    else:
        q, _ = np.linalg.qr(prefix, mode="complete")
    rest = q[:, k:]
    # the complete QR's tail spans the orthogonal complement; re-project once
    # to scrub rounding leakage into the prefix span
    rest = rest - prefix @ (prefix.T @ rest)
    rest, _ = np.linalg.qr(rest)
    if rng is not None:
        g = rng.standard_normal((d - k, d - k))
        o, r = np.linalg.qr(g)
        rest = rest @ (o * np.sign(np.diag(r)))
    return np.hstack([prefix, rest])


def haar_unitary(dim, rng):
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def expm_antihermitian(omega):
    """``exp(omega)`` for antihermitian ``omega`` via the eigendecomposition of ``-i omega``."""
    h = -1j * omega
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T
