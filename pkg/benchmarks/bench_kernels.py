"""Compare the numba and pure-numpy kernels on the hot paths.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each row reports the best-of-N wall time per call for both backends and
the speedup. The JIT is warmed up before timing.
"""
import argparse
import timeit

import numpy as np

from mmdd import kernels, use_backend
from mmdd._backend import NUMBA_AVAILABLE
from mmdd.diffusion import NoiseSchedule
from mmdd.dsr_generator import GenBudget, generate
from mmdd.numeric_model import DenoiserModel
from mmdd.trainer import Adam, TrainConfig, make_buffers, train_step


def cases():
    rng = np.random.default_rng(0)
    model = DenoiserModel(2, 4, rng=0)
    model.params[:] = rng.normal(scale=0.1, size=model.n_params)
    x = rng.normal(size=(8, int(model.widths[0])))
    acts = kernels.mlp_forward(model.params, model.widths, x)
    gout = rng.normal(size=(8, 2))
    bank = rng.normal(size=(64, 2))
    v = rng.normal(size=2)
    schedule = NoiseSchedule()
    cfg = TrainConfig()

    state = {}

    def fresh_train():
        m = model.copy()
        bufs = make_buffers(2, cfg)
        for k in range(4):
            bufs[0].push(rng.normal(size=(64, 2)), np.full(64, k))
            bufs[1].push(rng.normal(size=(64, 2)), np.full(64, k))
        state.update(m=m, bufs=bufs, opt=Adam(m.n_params, cfg.lr), rng=np.random.default_rng(1))

    fresh_train()
    batch = (rng.normal(size=(8, 2)), np.arange(8) % 4)

    def step():
        train_step(state["m"], schedule, state["bufs"], batch, state["opt"], cfg, state["rng"], step=1)

    budget = GenBudget(50.0, 8, 10, "simulated", 5.0)
    return {
        "mlp_forward (B=8)": lambda: kernels.mlp_forward(model.params, model.widths, x),
        "mlp_backward (B=8)": lambda: kernels.mlp_backward(model.params, model.widths, acts, gout),
        "cosine_select (64 rows)": lambda: kernels.cosine_select(bank, v, True),
        "train_step (B=8)": step,
        "generate (10 batches, S=10)": lambda: generate(model, schedule, budget, 4, seed=0),
    }


def bench(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=50)
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if NUMBA_AVAILABLE else [])
    table = {}
    for name in backends:
        prev = use_backend(name)
        try:
            for label, fn in cases().items():
                fn()  # warm-up / compile
                table.setdefault(label, {})[name] = bench(fn, args.repeat, args.number)
        finally:
            use_backend(prev)
    print(f"{'case':30s} {'numpy us':>12s} {'numba us':>12s} {'speedup':>8s}")
    for label, row in table.items():
        npt = row["numpy"] * 1e6
        nbt = row.get("numba", float("nan")) * 1e6
        print(f"{label:30s} {npt:12.1f} {nbt:12.1f} {npt / nbt:8.2f}x")


if __name__ == "__main__":
    main()
