"""
Refractive-index profiles of erf-diffused channels and of whole arrays.
"""

import numpy as np
from scipy.special import erf

from src.models.data_models import ArrayLayout, ChannelProfile


def channel_g(profile: ChannelProfile, x_um) -> np.ndarray:
    """Normalized channel shape {erf[(x+w)/D] - erf[(x-w)/D]} / [2 erf(w/D)]."""
    x = np.asarray(x_um, dtype=float)
    w, d = profile.half_width_um, profile.diffusion_length_um
    return (erf((x + w) / d) - erf((x - w) / d)) / (2.0 * erf(w / d))


def channels_profile(profile: ChannelProfile, centers_um, contrasts, x_um) -> np.ndarray:
    """n(x) - n_s for raised-index channels: sum_l dn_l g(x - x_l)."""
    x = np.asarray(x_um, dtype=float)
    result = np.zeros_like(x)
    for center, dn in zip(np.atleast_1d(centers_um), np.atleast_1d(contrasts)):
        result += dn * channel_g(profile, x - center)
    return result


def index_profile(layout: ArrayLayout, x_um) -> np.ndarray:
    """n(x) - n_s of a designed array."""
    return channels_profile(layout.channel, layout.positions_um, layout.contrasts, x_um)
