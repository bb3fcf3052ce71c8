import pytest

from hlmcite.config import ConfigError, PipelineConfig, apply_overrides, load_config, write_config
from hlmcite.manifest import (
    LockError,
    UpstreamError,
    output_lock,
    read_manifest,
    require_upstream,
    write_manifest,
)


def test_config_file_roundtrip(tmp_path):
    cfg = PipelineConfig(corpus="c.jsonl", edges="e.csv", t_q=50, r_q=8, seed=3)
    path = tmp_path / "run.ini"
    write_config(cfg, path)
    loaded = load_config(path)
    assert loaded == cfg


def test_config_sections_and_unknown_keys(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[run]\nwibble = 3\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(path)
    path.write_text("[paths]\nt1 = 3\n")
    with pytest.raises(ConfigError, match="belongs in"):
        load_config(path)


def test_overrides_win_and_validate():
    cfg = PipelineConfig(corpus="c", edges="e", t_q=100)
    assert apply_overrides(cfg, t_q=None).t_q == 100
    assert apply_overrides(cfg, t_q=50).t_q == 50
    with pytest.raises(ConfigError):
        apply_overrides(cfg, nonsense=1)


@pytest.mark.parametrize("overrides", [
    {"r_q": 3},                 # r_q < t1
    {"t_q": 5},                 # t_q < t1 + t2
    {"split_ratio": 1.0},
    {"t1": 0},
    {"chat_backend": "gpt"},
    {"embed_backend": "file"},  # without vectors_in
])
def test_validation_errors(overrides):
    cfg = apply_overrides(PipelineConfig(corpus="c", edges="e"), **overrides)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_effective_rq_per_field():
    cfg = PipelineConfig(r_q=8, r_q_social=7)
    assert cfg.effective_rq("physics") == 8
    assert cfg.effective_rq("sociology") == 7


def test_manifest_roundtrip_and_upstream_validation(tmp_path):
    artifact = tmp_path / "x.txt"
    artifact.write_text("hello")
    write_manifest(tmp_path, "label", {"seed": 1}, inputs={}, outputs={"x": artifact})
    manifest = read_manifest(tmp_path, "label")
    assert manifest["stage"] == "label"
    require_upstream(tmp_path, "label", {"x": artifact})

    artifact.write_text("tampered")
    with pytest.raises(UpstreamError, match="stale"):
        require_upstream(tmp_path, "label", {"x": artifact})

    with pytest.raises(UpstreamError, match="rerun: hlmcite sample"):
        require_upstream(tmp_path, "sample", {})


def test_upstream_missing_file(tmp_path):
    artifact = tmp_path / "x.txt"
    artifact.write_text("hello")
    write_manifest(tmp_path, "embed", {}, inputs={}, outputs={"x": artifact})
    artifact.unlink()
    with pytest.raises(UpstreamError, match="missing upstream artifact"):
        require_upstream(tmp_path, "embed", {"x": artifact})


def test_output_lock_rejects_concurrent_use(tmp_path):
    with output_lock(tmp_path):
        with pytest.raises(LockError):
            with output_lock(tmp_path):
                pass
    # released afterwards
    with output_lock(tmp_path):
        pass
