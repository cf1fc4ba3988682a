"""Supply-network planning toolkit.

Synthesizes multi-echelon supply histories, trains a graph-attention
actor-critic offline on the logged data, and plans/evaluates shipment
policies under configurable cost objectives. Thin wrapper over the C++
core; structured inputs and outputs are plain dicts.
"""

import json as _json

from . import _core

__all__ = [
    "default_config",
    "normalize_config",
    "gen",
    "train",
    "validate",
    "plan",
    "evaluate",
    "report",
    "node_reward",
    "safety_stock",
    "wmape_sigma",
    "sha256_file",
]


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def default_config():
    """Fully-defaulted run configuration as a dict."""
    return _json.loads(_core.default_config_json())


def normalize_config(config):
    """Validate a partial config dict and return the complete document."""
    return _json.loads(_core.normalize_config_json(_dump(config)))


def gen(config, out_dir):
    """Synthesize a corpus into out_dir; returns the run manifest."""
    return _json.loads(_core.gen(_dump(config), str(out_dir)))


def train(config, data_dir, out_dir):
    """Train the policy/value networks offline; returns the run manifest."""
    return _json.loads(_core.train(_dump(config), str(data_dir), str(out_dir)))


def validate(config, data_dir, model_path, out_dir):
    """Select a risk preference per objective on the validation window."""
    return _json.loads(
        _core.validate(_dump(config), str(data_dir), str(model_path), str(out_dir))
    )


def plan(config, data_dir, model_path, sku_id, week, objective_index, out_dir):
    """Monte-Carlo plan for one SKU and start week."""
    return _json.loads(
        _core.plan(
            _dump(config), str(data_dir), str(model_path), sku_id, week,
            objective_index, str(out_dir),
        )
    )


def evaluate(config, data_dir, model_path, out_dir, lambda_override=-1):
    """Receding-horizon evaluation against the rule baseline and logged history."""
    return _json.loads(
        _core.evaluate(
            _dump(config), str(data_dir), str(model_path), str(out_dir), lambda_override
        )
    )


def report(eval_dir, out_dir):
    """Render an evaluation into CSV tables and a comparison summary."""
    return _json.loads(_core.report(str(eval_dir), str(out_dir)))


node_reward = _core.node_reward
safety_stock = _core.safety_stock
wmape_sigma = _core.wmape_sigma
sha256_file = _core.sha256_file
