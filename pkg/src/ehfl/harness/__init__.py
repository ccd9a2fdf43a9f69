from .config import ExperimentConfig, load_config
from .experiment import compare_schedulers, emit_plot_data, run_experiment
from .presets import PRESETS
from .trace import read_trace, write_trace
