import pytest

from revdyn.config import VARIANTS, ConfigError, ModelConfig


def test_defaults_are_valid():
    cfg = ModelConfig()
    assert cfg.variant == "bow"
    assert cfg.hidden_dim == 32
    assert cfg.weight_decay == 0.0
    assert cfg.vocab_kind == "bow"
    assert cfg.uses_text


def test_variant_gates():
    assert ModelConfig(variant="dynamics-only").vocab_kind == "none"
    assert not ModelConfig(variant="dynamics-only").uses_text
    assert ModelConfig(variant="lm-causal").vocab_kind == "lm"
    assert ModelConfig(variant="lm-noncausal").vocab_kind == "lm"
    with pytest.raises(ConfigError):
        ModelConfig(variant="transformer")


@pytest.mark.parametrize("bad", [
    {"hidden_dim": 0},
    {"fm_rank": 0},
    {"epochs": 0},
    {"lr": 0.0},
    {"lr": -1.0},
    {"lambda_arrival": -0.1},
    {"lambda_content": -0.1},
    {"weight_decay": -0.01},
    {"beta1": 1.0},
    {"beta2": -0.5},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        ModelConfig(**bad)


def test_json_round_trip():
    cfg = ModelConfig(variant="lm-causal", hidden_dim=8, seed=99,
                      weight_decay=0.5, embeddings_path="vecs.txt")
    again = ModelConfig.from_json(cfg.to_json())
    assert again == cfg


def test_from_json_rejects_unknown_keys():
    with pytest.raises(ConfigError) as err:
        ModelConfig.from_json({"hidden_dim": 8, "dropout": 0.5})
    assert "dropout" in str(err.value)


def test_save_load(tmp_path):
    cfg = ModelConfig(variant="bow", epochs=3)
    p = tmp_path / "config.json"
    cfg.save(p)
    assert ModelConfig.load(p) == cfg


def test_content_hash_tracks_content():
    a = ModelConfig(seed=1)
    b = ModelConfig(seed=1)
    c = ModelConfig(seed=2)
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != c.content_hash()


def test_replace_returns_validated_copy():
    cfg = ModelConfig()
    other = cfg.replace(hidden_dim=8)
    assert other.hidden_dim == 8 and cfg.hidden_dim == 32
    with pytest.raises(ConfigError):
        cfg.replace(hidden_dim=0)


def test_all_variants_construct():
    for v in VARIANTS:
        assert ModelConfig(variant=v).variant == v
