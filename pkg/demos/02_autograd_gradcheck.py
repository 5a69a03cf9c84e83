"""The reverse-mode core and its finite-difference verifier.

Builds a small computation by hand, backpropagates, and then lets the
verifier compare every analytic gradient against central differences.
"""

import numpy as np

from epg_mgcn import autograd as ag
from epg_mgcn.autograd import Tensor
from epg_mgcn.gradcheck import finite_diff_check
from epg_mgcn.optim import Adam

rng = np.random.default_rng(0)

# y = mean(tanh(x W)^2): two tensors, one scalar output
x = Tensor(rng.normal(size=(5, 3)), requires_grad=True, name="x")
w = Tensor(rng.normal(size=(3, 3)), requires_grad=True, name="w")

loss = ag.tmean(ag.mul(ag.tanh(ag.matmul(x, w)), ag.tanh(ag.matmul(x, w))))
loss.backward()
print(f"loss = {loss.item():.6f}")
print("dx[0] =", np.round(x.grad[0], 6))

report = finite_diff_check(
    lambda: ag.tmean(ag.mul(ag.tanh(ag.matmul(x, w)), ag.tanh(ag.matmul(x, w)))),
    {"x": x, "w": w}, epsilon=1e-5, tolerance=1e-6)
print(report.summary())

# Adam drives the same loss toward zero
opt = Adam({"x": x, "w": w}, learning_rate=0.05)
for step in range(60):
    opt.zero_grad()
    loss = ag.tmean(ag.mul(ag.tanh(ag.matmul(x, w)), ag.tanh(ag.matmul(x, w))))
    loss.backward()
    opt.step()
    if step % 20 == 19:
        print(f"step {step + 1}: loss {loss.item():.6f}")
