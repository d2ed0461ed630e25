"""Weighted regressors and empirical persistent-excitation certificates.

A regressor sequence is persistently exciting with window ``N`` and lower
bound ``alpha`` when every window of ``N`` consecutive Gram matrices
``phi_i.T phi_i`` sums to at least ``alpha * I``; it is bounded by ``beta``
when every ``phi_k.T phi_k <= beta * I``.

These definitions quantify over infinite sequences. A finite trace only
supports an empirical certificate over the window starts actually observed,
and :class:`ExcitationReport` records that horizon.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch, EmptySequence, InvalidParameter

PE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ExcitationReport:
    window: int
    alpha_bar: float
    beta_bar: float
    is_pe: bool
    horizon: tuple

    def to_dict(self):
        return {
            "window": self.window,
            "alpha_bar": self.alpha_bar,
            "beta_bar": self.beta_bar,
            "is_pe": self.is_pe,
            "horizon": list(self.horizon),
        }


def weighted_regressor(phi, gamma=None):
    """``Gamma^{-1/2} phi`` using the symmetric inverse square root."""
    phi = linalg.as_rect(np.atleast_2d(phi), "phi")
    if gamma is None:
        return phi
    gamma = np.atleast_2d(gamma)
    if gamma.shape != (phi.shape[0], phi.shape[0]):
        raise DimensionMismatch(f"gamma has shape {gamma.shape}, expected {(phi.shape[0],) * 2}")
    return linalg.spd_inverse_sqrt(gamma) @ phi


def _stack(seq):
    if len(seq) == 0:
        raise EmptySequence("regressor sequence is empty")
    mats = [np.atleast_2d(np.asarray(phi, dtype=float)) for phi in seq]
    shape = mats[0].shape
    for i, m in enumerate(mats):
        if m.shape != shape:
            raise DimensionMismatch(f"regressor {i} has shape {m.shape}, expected {shape}")
    return np.stack(mats)


def certify_excitation(seq, window, k_start=0):
    """Empirical PE/boundedness certificate for ``seq`` with persistency window ``window``.

    ``alpha_bar`` is the minimum over window starts of the smallest eigenvalue
    of the window sum; ``beta_bar`` is the largest eigenvalue of any single
    Gram matrix. Window sums come from prefix sums of the Gram matrices.
    """
    phis = _stack(seq)
    window = int(window)
    count = phis.shape[0]
    if not 1 <= window <= count:
        raise InvalidParameter(f"window must lie in [1, {count}], got {window}")
    grams = np.einsum("kpi,kpj->kij", phis, phis)
    prefix = np.concatenate([np.zeros((1,) + grams.shape[1:]), np.cumsum(grams, axis=0)])
    sums = prefix[window:] - prefix[:-window]
    sums = 0.5 * (sums + np.swapaxes(sums, 1, 2))
    alpha = float(np.min(np.linalg.eigvalsh(sums)[:, 0]))
    beta = float(np.max(np.linalg.eigvalsh(grams)[:, -1]))
    alpha = max(alpha, 0.0)
    beta = max(beta, 0.0)
    return ExcitationReport(
        window=window,
        alpha_bar=alpha,
        beta_bar=beta,
        is_pe=alpha > PE_TOLERANCE,
        horizon=(int(k_start), int(k_start) + count - 1),
    )


def smallest_window(seq, max_window=None, k_start=0):
    """Certificate for the smallest window that certifies excitation, or the last one tried."""
    count = len(seq)
    max_window = count if max_window is None else min(int(max_window), count)
    report = None
    for window in range(1, max_window + 1):
        report = certify_excitation(seq, window, k_start)
        if report.is_pe:
            break
    return report


def transfer_bounds(report, gamma_min, gamma_max):
    """Bounds for weighted regressors implied by ``gamma_min I <= Gamma_k <= gamma_max I``.

    These are usually loose; certifying the weighted sequence directly is better
    whenever the weights are known.
    """
    gamma_min, gamma_max = float(gamma_min), float(gamma_max)
    if not 0.0 < gamma_min <= gamma_max:
        raise InvalidParameter(f"need 0 < gamma_min <= gamma_max, got {gamma_min}, {gamma_max}")
    alpha = report.alpha_bar / gamma_max
    return replace(report, alpha_bar=alpha, beta_bar=report.beta_bar / gamma_min, is_pe=alpha > PE_TOLERANCE)
