"""Compiled vs pure-NumPy kernel backends on training-shaped workloads.

Times the two gather/scatter primitives at sizes the denoiser actually
runs, plus a full toy training step (forward + backward + Adam) under
each backend. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from naada import kernels
from naada.network import NetworkSpec, forward, init_network
from naada.tensor import Tensor
from naada.training import AdamState, TrainConfig, adam_step, mse_loss


def _time(fn, repeats, warmup=1):
    for _ in range(warmup):
        fn()
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_primitives(backend, repeats=5):
    kernels._set_backend(backend)
    rows = []
    cases = [
        ("im2col 8x64x56x56 k3s1", (8, 64, 56, 56), 3, 1, 1),
        ("im2col 8x64x56x56 k4s2", (8, 64, 56, 56), 4, 2, 1),
        ("im2col 1x64x224x224 k4s2", (1, 64, 224, 224), 4, 2, 3),
    ]
    rng = np.random.default_rng(0)
    for name, shape, k, s, p in cases:
        x = rng.normal(size=shape).astype(np.float32)
        rows.append((name, _time(lambda: kernels.im2col(x, k, k, s, s, p, p), repeats)))
        cols = kernels.im2col(x, k, k, s, s, p, p)
        b, c, h, w = shape
        rows.append((
            name.replace("im2col", "col2im"),
            _time(lambda: kernels.col2im(cols, b, c, h, w, k, k, s, s, p, p), repeats),
        ))
    return rows


def bench_training_step(backend, repeats=3):
    kernels._set_backend(backend)
    spec = NetworkSpec(width_mult=1 / 16, patch=32)
    state = init_network(spec, seed=0)
    rng = np.random.default_rng(1)
    noisy = rng.uniform(0, 1, (32, 1, 32, 32)).astype(np.float32)
    clean = rng.uniform(0, 1, (32, 1, 32, 32)).astype(np.float32)
    cfg = TrainConfig(batch_size=32)
    opt = AdamState()
    params = state.named_parameters()

    def step():
        loss = mse_loss(forward(Tensor(noisy), state), Tensor(clean))
        state.zero_grad()
        loss.backward()
        adam_step(params, opt, cfg)

    return [("toy training step (batch 32)", _time(step, repeats))]


def main():
    backends = ["python"]
    try:
        kernels._set_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled backend not built; benchmarking pure backend only")

    results = {}
    for backend in backends:
        results[backend] = bench_primitives(backend) + bench_training_step(backend)

    names = [name for name, _ in results[backends[0]]]
    width = max(len(n) for n in names)
    header = f"{'workload'.ljust(width)}  " + "  ".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for i, name in enumerate(names):
        cells = [results[b][i][1] for b in backends]
        line = f"{name.ljust(width)}  " + "  ".join(f"{t * 1e3:>9.2f} ms" for t in cells)
        if len(cells) == 2:
            line += f"  {cells[1] / cells[0]:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
