"""Evaluating the convergence bounds and checking them against traces."""

# %%
from ehfl.bounds import BoundParams, check_trace_against_bound, parallel_max_eta, theorem1_bound, theorem2_bound

# small hand-checkable instance: 1/50 + 1/100
p = BoundParams(L=1, sigma_sq=1, f0_gap=1, n_min=4, n_max=4, K=1, T=100, eta=5)
print(theorem1_bound(p).to_json(indent=2))

# %% non-uniform participation inflates the bound
T, L = 400, 1.0
eta = parallel_max_eta(L, 16, T)
for n_min in (16, 9, 4, 1):
    b = theorem1_bound(BoundParams(L, 1.0, 1.0, n_min, 16, 1, T, eta)).bound_value
    print(f"n_min={n_min:>2}: bound {b:.4g}")

# %% local SGD: printed vs derived reading of the drift term
p2 = BoundParams(L=1, sigma_sq=1, f0_gap=1, n_min=4, n_max=4, K=5, T=1000, eta=0.005)
for form in ("printed", "derived"):
    print(form, theorem2_bound(p2, form).terms)

# %% against a simulated run
from ehfl import EnergyConfig, Myopic, TheoremRule, generate_quadratic, run_training
from ehfl.tasks import estimate_sigma_sq, probe_points
import numpy as np

task = generate_quadratic(d=5, N=210, M=6, seed=3)
x0 = np.zeros(task.dim)
sig = estimate_sigma_sq(task, probe_points(task, x0)).sigma_sq
eta = 0.5 * parallel_max_eta(task.L, 3, 300)
runs = [run_training(task, EnergyConfig.homogeneous(6, 0.5, initial_level=3), Myopic(3), K=1,
                     stepsize=TheoremRule(eta, 300), T=300, seed=s).records for s in range(5)]
params = BoundParams(task.L, sig, task.loss(x0) - task.f_star, 1, 3, 1, 300, eta)
rep = check_trace_against_bound(runs, params, "thm1")
print(f"measured {rep.measured_avg_grad_sq:.4g} <= bound {rep.bound_value:.4g}: {rep.satisfied}")
