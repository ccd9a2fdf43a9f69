"""Battery queues under the three causal schedulers.

Ten clients harvest one unit with probability 0.5 per round and spend one
unit whenever they participate.  We watch how many clients each scheduler
fields per round.
"""

# %%
import numpy as np

from ehfl import EnergyConfig, Greedy, Myopic, RoundRobin, simulate_availability
from ehfl.bounds import uniformity_ratio

energy = EnergyConfig.homogeneous(10, 0.5, capacity=10)
T, warmup = 2000, 50

# %% participation counts per round
for kind in (Myopic(5), Greedy(), RoundRobin(5)):
    av = simulate_availability(energy, kind, T, seed=0)
    c = av.counts[warmup:]
    print(f"{kind.name:>12}: mean n_t={c.mean():.2f}  std={c.std():.2f}  "
          f"empty rounds={int(np.sum(c == 0))}  ratio={uniformity_ratio(c, allow_empty=True):.3g}")

# %% Myopic almost always fields exactly five clients
av = simulate_availability(energy, Myopic(5), T, seed=0)
print("fraction of rounds with n_t = 5:", np.mean(av.counts[warmup:] == 5))

# %% queue levels never leave [0, E_max]
print("level range:", av.levels.min(), av.levels.max())
print("first rounds of client 0:", av.levels[:12, 0].tolist())
