"""Local-RMS noise map over feature tensors.

The map estimates, per location and channel, the root-mean-square
deviation from the local mean inside a small window:

    psi = sqrt( boxmean_k( (z - boxmean_k(z))^2 ) )

realized as two stride-1 average-pooling passes (count-includes-padding
at the borders, matching the pooling primitive). The sqrt backward is
epsilon-guarded so the map stays differentiable where z is locally
constant; the forward value is exact, so a constant input yields an
exactly zero map.
"""

from naada.layers import avgpool2d
from naada.tensor import Tensor

SQRT_GUARD_EPS = 1e-12


def local_mean(z: Tensor, k: int = 3) -> Tensor:
    """Stride-1 box mean with shape-preserving zero padding; k must be odd."""
    if k % 2 != 1:
        raise ValueError("local_mean: window size must be odd")
    return avgpool2d(z, k, stride=1, padding=(k - 1) // 2)


def noise_map(z: Tensor, k: int = 3) -> Tensor:
    """Windowed RMS deviation of a [B,M,H,W] tensor; same shape, >= 0."""
    if z.ndim != 4:
        raise ValueError("noise_map: expected a 4-D feature tensor")
    dev = z - local_mean(z, k)
    return avgpool2d(dev * dev, k, stride=1, padding=(k - 1) // 2).sqrt(eps=SQRT_GUARD_EPS)
