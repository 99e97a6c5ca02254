"""Pure numpy implementations of the hot loops.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable or disabled.
"""

import numpy as np
from scipy import special

__all__ = ["lorentzian_chain", "pinch_amplitudes", "phi_sum"]

# rows of (alpha, harmonic) pairs processed per block in phi_sum
_BLOCK = 1 << 20


def lorentzian_chain(z, nu, n_sub):
    """Lorentzian element weights and residual transmission per subarray.

    Parameters
    ----------
    z : ndarray, shape (B, N)
        Tuning phases, ``N`` a multiple of ``n_sub``.
    nu : float
        Coupling strength.
    n_sub : int
        Elements per subarray.

    Returns
    -------
    w : ndarray, shape (B, N), complex
    s12 : ndarray, shape (B, N // n_sub), complex
    """
    z = np.ascontiguousarray(z, dtype=float)
    B, N = z.shape
    P = N // n_sub
    zr = z.reshape(B, P, n_sub)
    e = 1.0 + np.exp(1j * zr)
    # the off state z = +-pi is an exact null
    e[np.abs(zr) == np.pi] = 0.0
    decay = 1.0 - 0.5 * nu * e
    acc = np.cumprod(decay, axis=-1)
    before = np.ones_like(acc)
    before[..., 1:] = acc[..., :-1]
    w = (-0.5j * e) * before
    return w.reshape(B, N), acc[..., -1].copy()


def pinch_amplitudes(delta):
    """Sequential coupling amplitudes ``alpha_m = delta_m prod_{i<m} sqrt(1 - delta_i^2)``.

    ``delta`` has shape (B, M); returns the same shape.
    """
    d = np.ascontiguousarray(delta, dtype=float)
    t = np.sqrt(1.0 - d * d)
    acc = np.cumprod(t, axis=-1)
    before = np.ones_like(acc)
    before[..., 1:] = acc[..., :-1]
    return d * before


def phi_sum(alpha, k0, a, spacing, gap, L):
    """Floquet harmonic sum for the periodically fed wire.

    Sums ``s_l / (beta_l^2 J0(beta_l a) H0^(2)(beta_l a))`` over the ``2L``
    harmonics ``l = -L+1 .. L`` with ``alpha_l = alpha - 2 pi l / spacing``,
    ``beta_l = sqrt(k0^2 - alpha_l^2)`` (Im <= 0) and the feed-gap weight
    ``s_l = sinc^2(alpha_l gap / 2)``. Evanescent harmonics use
    ``J0(-jx) H0^(2)(-jx) = (2j/pi) I0(x) K0(x)``. Grazing harmonics
    (beta_l = 0) must be filtered by the caller.
    """
    alpha = np.ascontiguousarray(alpha, dtype=float).ravel()
    ell = np.arange(-L + 1, L + 1, dtype=float)
    per = 2.0 * np.pi / spacing
    out = np.empty(alpha.size, dtype=complex)
    rows = max(1, _BLOCK // ell.size)
    k2 = k0 * k0
    for s in range(0, alpha.size, rows):
        al = alpha[s : s + rows, None] - per * ell[None, :]
        d2 = k2 - al * al
        term = np.empty(al.shape, dtype=complex)
        prop = d2 > 0
        b = np.sqrt(d2[prop])
        x = b * a
        j0 = special.j0(x)
        term[prop] = 1.0 / (b * b * j0 * (j0 - 1j * special.y0(x)))
        ev = ~prop
        g = np.sqrt(-d2[ev])
        x = g * a
        term[ev] = 1j * np.pi / (2.0 * g * g * special.i0e(x) * special.k0e(x))
        if gap > 0:
            term *= np.sinc(al * (gap / (2.0 * np.pi))) ** 2
        out[s : s + rows] = term.sum(axis=1)
    return out
