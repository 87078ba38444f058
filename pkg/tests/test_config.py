import json

import pytest

from otlrm.config import ExperimentConfig


def test_defaults():
    c = ExperimentConfig()
    assert (c.lam, c.beta, c.k, c.lr, c.t_max) == (1e-8, 0.0, 2, 1e-3, 3000)
    assert c.resolved_rank((256, 256, 31)) == 26
    assert c.resolved_rank((4, 4, 2)) == 1


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ValueError, match="lamda"):
        ExperimentConfig.from_dict({"lamda": 1e-8})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"rank": 3, "typo": 1}))
    with pytest.raises(ValueError):
        ExperimentConfig.from_json(p)


@pytest.mark.parametrize("bad", [{"rank": 0}, {"lam": -1.0}, {"k": -1}, {"lr": 0.0}, {"task": "x"},
                                 {"precision": "f16"}, {"sr": 1.5}, {"shift": 0}, {"loss_kind": "l2"},
                                 {"t_max": 0}, {"lr_schedule": "step"}])
def test_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(bad)


def test_roundtrip():
    c = ExperimentConfig(rank=3, seed=4, sr=0.3)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c
    assert c.replace(seed=5).seed == 5
