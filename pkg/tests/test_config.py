import json

import pytest

from cvqss.config import ConfigError, length_grid, load_config, parse_config


def test_defaults():
    cfg = load_config(None)
    assert cfg.layout is None and cfg.sweep is None
    assert cfg.optimizer.bounds == (0.01, 1000.0)


def test_full_document(tmp_path):
    doc = {
        "params": {"gamma": 0.2, "epsilon0": 0.001},
        "layout": {"n": 3, "L": 12.0},
        "V_A": 4,
        "optimizer": {"bounds": [0.1, 100], "grid_points": 20},
        "simulation": {"pulses": 5000},
        "postprocess": {"seed": 3},
        "sweep": {"lengths": {"start": 0, "stop": 4, "step": 2}, "players": [2, 3]},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    cfg = load_config(path)
    assert cfg.params.epsilon0 == 0.001 and cfg.layout.n == 3 and cfg.V_A == 4.0
    assert cfg.optimizer.bounds == (0.1, 100)
    assert cfg.sweep.lengths == (0.0, 2.0, 4.0) and cfg.sweep.deltas == (0.0,)


@pytest.mark.parametrize("doc", [
    {"param": {}},
    {"params": {"gama": 0.2}},
    {"params": {"eta_D": 2.0}},
    {"layout": {"n": 0, "L": 1}},
    {"V_A": -1},
    {"sweep": {"lengths": [], "players": [2]}},
    {"sweep": {"lengths": {"start": 0, "stop": 1, "step": 0}, "players": [2]}},
    {"sweep": {"lengths": [-1.0], "players": [2]}},
    [],
])
def test_rejections(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_length_grid():
    assert length_grid(0.0, 3.0, 1.0) == (0.0, 1.0, 2.0, 3.0)
