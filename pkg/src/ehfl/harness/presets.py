"""Named experiment configurations.

Values not fixed by the original experiment description (T, arrival rates,
battery capacity, task sizes) are choices made here and labelled as such in
the README.
"""

PRESETS = {
    "smoke": {
        "description": "2-d quadratic, 4 clients, 50 rounds, 2 seeds; sub-second sanity run",
        "task": {"kind": "quadratic", "d": 2, "num_samples": 40, "condition_number": 2.0, "seed": 0},
        "energy": {"num_clients": 4, "arrival_rate": 0.5, "capacity": 10, "initial_level": 1},
        "scheduler": {"name": "myopic", "lambda_total": 2},
        "training": {"K": 1, "T": 50, "batch_size": 1},
        "stepsize": {"rule": "theorem", "eta_fraction": 0.5},
        "run": {"seeds": [0, 1], "bound_check": True},
    },
    "thm1_quadratic": {
        "description": "parallel SGD on a 10-d quadratic under Myopic scheduling, theorem-rule stepsize",
        "task": {"kind": "quadratic", "d": 10, "num_samples": 1000, "condition_number": 10.0, "seed": 0},
        "energy": {"num_clients": 10, "arrival_rate": 0.5, "capacity": 10, "initial_level": 5},
        "scheduler": {"name": "myopic", "lambda_total": 5},
        "training": {"K": 1, "T": 1000, "batch_size": 1},
        "stepsize": {"rule": "theorem", "eta_fraction": 0.5},
        "run": {"seeds": list(range(20)), "bound_check": True},
    },
    "thm2_quadratic": {
        "description": "local SGD (K=5) on a 10-d quadratic under Myopic scheduling, theorem-rule stepsize",
        "task": {"kind": "quadratic", "d": 10, "num_samples": 1000, "condition_number": 10.0, "seed": 0},
        "energy": {"num_clients": 10, "arrival_rate": 0.5, "capacity": 10, "initial_level": 5},
        "scheduler": {"name": "myopic", "lambda_total": 5},
        "training": {"K": 5, "T": 1000, "batch_size": 1},
        "stepsize": {"rule": "theorem", "eta_fraction": 0.5},
        "run": {"seeds": list(range(20)), "bound_check": True},
    },
    "paper_fig2_synthetic": {
        "description": ("scheduler comparison with the CIFAR-10 system parameters (M=10, K=5, "
                        "Lambda=5, batch 50, eta0=0.15 decayed 0.99 per 10 rounds) on a "
                        "synthetic logistic-regression task instead of a CNN"),
        "task": {"kind": "logistic", "d": 20, "num_samples": 5000, "mu": 0.01, "seed": 0},
        "energy": {"num_clients": 10, "arrival_rate": 0.5, "capacity": 10, "initial_level": 1},
        "scheduler": {"name": "myopic", "lambda_total": 5},
        "training": {"K": 5, "T": 500, "batch_size": 50},
        "stepsize": {"rule": "experiment", "eta0": 0.15, "decay_period": 10, "decay_rate": 0.99,
                     "window": 10},
        "run": {"seeds": list(range(20)), "bound_check": False,
                "compare": ["myopic", "greedy", "round_robin"]},
    },
}
