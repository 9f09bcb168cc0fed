"""Quasiperiodic incident plane waves and the Herglotz superposition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .lattice import LatticeParams, check_wood, mode_data

# Incident channels in the order used for data columns: (l, sign).
INCIDENT_CHANNELS = ((1, +1), (1, -1), (2, +1), (2, -1))


@dataclass(frozen=True)
class PlaneWaveLabel:
    m: Tuple[int, int]
    l: int
    sign: int

    def __post_init__(self):
        if self.l not in (1, 2):
            raise ValueError(f"polarization index must be 1 or 2, got {self.l}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")


def polarization_vectors(k, a1, a2, beta):
    """p1, p2 for arrays of modes; each result has shape (..., 3)."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    beta = np.asarray(beta, dtype=complex)
    zero = np.zeros_like(beta)
    n1 = np.sqrt(a2**2 + np.abs(beta) ** 2)
    n2 = np.sqrt(a1**2 + np.abs(beta) ** 2)
    p1 = np.stack([zero, beta, -a2 + zero], axis=-1) / n1[..., None]
    p2 = np.stack([-beta, zero, a1 + zero], axis=-1) / n2[..., None]
    return p1, p2


def polarizations(params: LatticeParams, m):
    md = mode_data(params, m)
    p1, p2 = polarization_vectors(params.k, md.alpha_m[0], md.alpha_m[1], md.beta_m)
    return p1, p2


def _wavevectors(md):
    kp = np.array([md.alpha_m[0], md.alpha_m[1], md.beta_m], dtype=complex)
    km = np.array([md.alpha_m[0], md.alpha_m[1], -md.beta_m], dtype=complex)
    return kp, km


def plane_wave(params: LatticeParams, label: PlaneWaveLabel, x):
    """Value and curl of phi_m^{(l)sign} at the points ``x`` (shape (..., 3)).

    phi = p exp(i K+ . x) + sign * p~ exp(i K- . x), where K+- = (alpha_m, +-beta_m)
    and p~ is p with its third component negated.
    """
    md = mode_data(params, label.m)
    p = polarizations(params, label.m)[label.l - 1]
    pt = p * np.array([1, 1, -1])
    kp, km = _wavevectors(md)
    x = np.asarray(x, dtype=float)
    ep = np.exp(1j * (x @ kp))[..., None]
    em = np.exp(1j * (x @ km))[..., None]
    value = p * ep + label.sign * pt * em
    curl = 1j * np.cross(kp, p) * ep + label.sign * 1j * np.cross(km, pt) * em
    return value, curl


def plane_wave_divergence(params: LatticeParams, label: PlaneWaveLabel, x):
    """Analytic divergence i K . p of each exponential, summed."""
    md = mode_data(params, label.m)
    p = polarizations(params, label.m)[label.l - 1]
    pt = p * np.array([1, 1, -1])
    kp, km = _wavevectors(md)
    x = np.asarray(x, dtype=float)
    return 1j * (kp @ p) * np.exp(1j * (x @ kp)) + label.sign * 1j * (km @ pt) * np.exp(1j * (x @ km))


def plane_wave_curl_curl(params: LatticeParams, label: PlaneWaveLabel, x):
    """Analytic second curl, -K x (K x p) per exponential."""
    md = mode_data(params, label.m)
    p = polarizations(params, label.m)[label.l - 1]
    pt = p * np.array([1, 1, -1])
    kp, km = _wavevectors(md)
    x = np.asarray(x, dtype=float)
    ep = np.exp(1j * (x @ kp))[..., None]
    em = np.exp(1j * (x @ km))[..., None]
    return -np.cross(kp, np.cross(kp, p)) * ep - label.sign * np.cross(km, np.cross(km, pt)) * em


def herglotz_weight_arrays(k, h, beta, propagating):
    beta = np.asarray(beta, dtype=complex)
    ev = np.exp(-1j * beta * h)
    wp = np.where(propagating, 1j, ev)
    wm = np.where(propagating, 1.0 + 0j, ev)
    return wp, wm


def herglotz_weights(params: LatticeParams, m):
    md = mode_data(params, m)
    wp, wm = herglotz_weight_arrays(params.k, params.h, md.beta_m, md.propagating)
    return complex(wp), complex(wm)


def column_scaling(params: LatticeParams) -> np.ndarray:
    """1 / (beta_m w_m^sign) for every data column (incident layout, length 4M^2)."""
    beta = params.betas()
    wp, wm = herglotz_weight_arrays(params.k, params.h, beta, params.propagating())
    per_channel = {+1: 1 / (beta * wp), -1: 1 / (beta * wm)}
    return np.concatenate([per_channel[s] for _, s in INCIDENT_CHANNELS])


CoeffSeq = Dict[Tuple[int, int], Tuple[complex, complex, complex, complex]]


def herglotz_synthesis(params: LatticeParams, a: CoeffSeq, x):
    """Evaluate (f, g) = H(a) at points ``x``.

    ``a`` maps a mode m to the 4-tuple (a1+, a1-, a2+, a2-).  Returns f (the
    curls) and g (the fields), each with shape x.shape.
    """
    x = np.asarray(x, dtype=float)
    f = np.zeros(x.shape, dtype=complex)
    g = np.zeros(x.shape, dtype=complex)
    for m, coeffs in a.items():
        md = mode_data(params, m)
        wp, wm = herglotz_weights(params, m)
        weight = {+1: 1 / (md.beta_m * wp), -1: 1 / (md.beta_m * wm)}
        for (l, s), c in zip(INCIDENT_CHANNELS, coeffs):
            if c == 0:
                continue
            value, curl = plane_wave(params, PlaneWaveLabel(tuple(m), l, s), x)
            g += c * weight[s] * value
            f += c * weight[s] * curl
    return f, g


def grid_polarizations(params: LatticeParams):
    """p1, p2 for every mode of Z^2_M, shapes (M*M, 3)."""
    a = params.alphas()
    b = params.betas()
    check_wood(params.k, b)
    return polarization_vectors(params.k, a[:, 0], a[:, 1], b)

