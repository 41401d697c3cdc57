"""Offline RL laboratory: advantage-gated VAE with an adaptive policy constraint.

The heavy lifting lives in the compiled ``_core`` module; this package adds
keyword-argument conveniences around its map-based config API.
"""

from . import _core
from ._core import config_defaults, evaluate, load_dataset, read_metrics, true_q

__version__ = "0.1.0"

__all__ = [
    "config_defaults",
    "evaluate",
    "generate_dataset",
    "load_dataset",
    "read_metrics",
    "resume_train",
    "train",
    "true_q",
]


def generate_dataset(recipe, n, out, seed=0, expert_noise=0.1):
    """Generates an offline maze dataset, e.g. recipe="expert:g0:0.5,random:_:0.5"."""
    return _core.generate_dataset(recipe, n, seed, expert_noise, out)


def train(**config):
    """Runs a training loop; keyword arguments are config keys (see config_defaults())."""
    return _core.train({key: str(value) for key, value in config.items()})


def resume_train(resume_from, **config):
    """Continues a checkpointed run; the config must carry the same seed and shapes."""
    return _core.resume_train(resume_from, {key: str(value) for key, value in config.items()})
