"""Central finite-difference gradient verification.

The checker treats the forward function as a black box: it perturbs one
input coordinate at a time and compares (f(x+h) - f(x-h)) / 2h against
the reverse-mode gradient. The reported error for one tensor is

    max|analytic - numeric| / max(max|numeric|, floor)

i.e. a max-norm relative error that stays well conditioned when
individual entries are near zero. Run in float64.
"""

from __future__ import annotations

import numpy as np

from naada.tensor import Tensor


def finite_difference_grad(fn, t: Tensor, h: float = 1e-5, coords=None):
    """Numeric d fn()/d t at selected flat coordinates of ``t``.

    ``fn`` must be a zero-argument callable returning a scalar Tensor
    and reading ``t`` afresh on every call (no cached state).
    """
    flat = t.data.reshape(-1)
    if coords is None:
        coords = range(flat.size)
    grads = {}
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        f_plus = fn().item()
        flat[i] = orig - h
        f_minus = fn().item()
        flat[i] = orig
        grads[i] = (f_plus - f_minus) / (2.0 * h)
    return grads


def check_gradients(fn, tensors, h=1e-5, max_coords=None, rng=None, floor=1e-6):
    """Compare reverse-mode gradients of ``fn()`` against finite differences.

    tensors: dict name -> Tensor (each with requires_grad=True).
    max_coords: per-tensor cap on checked coordinates (random sample);
    None checks every coordinate.
    Returns dict name -> relative error. The error denominator is
    floored at max(floor, |f| * 1e-11 / h): central differences carry
    cancellation noise of order |f| * eps / h, so null directions (true
    gradient exactly zero, e.g. a bias feeding a mean-subtracting op or
    a key bias under softmax shift invariance) must compare on that
    absolute scale instead of amplifying the noise.
    """
    for t in tensors.values():
        t.zero_grad()
    loss = fn()
    loss.backward()
    analytic = {name: np.array(t.grad, copy=True) for name, t in tensors.items()}
    floor = max(floor, abs(loss.item()) * 1e-11 / h)

    errors = {}
    for name, t in tensors.items():
        n = t.data.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = sorted(rng.choice(n, size=max_coords, replace=False).tolist())
        else:
            coords = range(n)
        numeric = finite_difference_grad(fn, t, h=h, coords=coords)
        a_flat = analytic[name].reshape(-1)
        num = np.array([numeric[i] for i in numeric])
        ana = np.array([a_flat[i] for i in numeric])
        if num.size == 0:
            errors[name] = 0.0
            continue
        scale = max(np.abs(num).max(), np.abs(ana).max(), floor)
        errors[name] = float(np.abs(ana - num).max() / scale)
    return errors


def assert_gradients_match(fn, tensors, tol=1e-4, **kwargs):
    errors = check_gradients(fn, tensors, **kwargs)
    bad = {k: v for k, v in errors.items() if not v < tol}
    assert not bad, f"gradient mismatch above {tol}: {bad}"
    return errors
