"""Tour of the tensor engine: build a graph, run it backward, check it.

Run from the repo root:  python3 demos/01_autodiff_engine.py
"""

import numpy as np

from tvlm.gradcheck import grad_check
from tvlm.tensor import Tensor, backward, matmul, softmax, tsum, trace

rng = np.random.default_rng(0)

# Tensors wrap numpy arrays; requires_grad marks trainable leaves.
w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
x = Tensor(rng.standard_normal((2, 4)))

# Ops record their inputs, so a scalar at the end owns a whole graph.
logits = matmul(x, w)
probs = softmax(logits, axis=-1)
loss = tsum(probs * probs)
print(f"forward: loss = {loss.item():.6f}")

order = trace(loss)
print(f"the graph below the loss holds {len(order)} nodes "
      f"({', '.join(sorted({n.op for n in order}))})")

# One reverse sweep fills .grad on every requires_grad leaf.
backward(loss)
print(f"dloss/dw has shape {w.grad.shape}, largest entry {np.abs(w.grad).max():.4f}")

# Central differences are the independent referee for every kernel.
err = grad_check(lambda a, b: softmax(matmul(a, b), axis=-1), [x.detach(), w.detach()])
print(f"finite-difference relative error: {err:.2e} (threshold 1e-5)")
