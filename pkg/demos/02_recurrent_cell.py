"""Run the convolutional recurrent cell and stack on random feature grids.

Each video segment becomes a sequence of K spatial feature grids; the
two-layer stack carries hidden and cell state across the sequence and the
final hidden map is flattened into a single context vector.
"""

import numpy as np

from ctxvad.convlstm import (
    cell_step,
    flatten_global_feature,
    init_params,
    run_stack,
    zero_state,
)

rng = np.random.default_rng(0)
B, K, H, W, CIN, CHID = 2, 5, 4, 4, 128, 32

# one step by hand: gates react to the input while state starts at zero
params = init_params(CIN, CHID, (H, W), rng=rng, dtype=np.float64)
x = rng.standard_normal((B, H, W, CIN))
state, _ = cell_step(x, zero_state(B, params), params)
print(f"single step: hidden {state.hidden.shape}, "
      f"|h| mean {np.abs(state.hidden).mean():.4f}")

# full two-layer stack over a K-step sequence
layer_params = [init_params(CIN, CHID, (H, W), rng=rng, dtype=np.float64),
                init_params(CHID, CHID, (H, W), rng=rng, dtype=np.float64)]
inputs = rng.standard_normal((B, K, H, W, CIN))
final, hidden_seq = run_stack(inputs, layer_params)
vec = flatten_global_feature(final)
print(f"stack output: final hidden {final.shape} -> context vector {vec.shape}")

# state actually evolves: the last step differs from the first
assert not np.allclose(hidden_seq[0], hidden_seq[-1])
