import pytest

from jsdm.config import REQUIRED, config_hash, load_config, validate_config, validate_text
from jsdm.errors import ConfigError


def test_empty_file_lists_every_required_key(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    result = validate_config(path)
    for key in REQUIRED:
        assert any(f"'{key}'" in err for err in result.errors)


def test_defaults_are_recorded():
    result = validate_text("experiment = fractions\nseed = 1\nM = 8\n")
    assert result.ok
    assert result.config["delta_gamma"] == 0.01
    assert "delta_gamma" in result.defaulted
    assert result.config["theta_range"] == [-60.0, 60.0]
    assert result.config["delta_range"] == [5.0, 15.0]


def test_explicit_values_are_not_marked_defaulted():
    result = validate_text("experiment = ccdf\nseed = 1\nM = 4\ndelta_gamma = 0.02\n")
    assert result.config["delta_gamma"] == 0.02
    assert "delta_gamma" not in result.defaulted


def test_all_problems_reported_together():
    text = "experiment = scaling\nseed = -1\nM = 8\nfoo = 3\neta = 1.5\nP_dB = 10, abc\n"
    errors = validate_text(text).errors
    assert any("unknown key 'foo'" in e for e in errors)
    assert any("'seed'" in e for e in errors)
    assert any("'eta'" in e for e in errors)
    assert any("'P_dB'" in e for e in errors)


def test_malformed_and_duplicate_lines():
    errors = validate_text("experiment = ccdf\nseed = 1\nseed = 2\nM 4\n").errors
    assert any("duplicate" in e for e in errors)
    assert any("line 4" in e for e in errors)


def test_interval_keys_need_increasing_pairs():
    errors = validate_text("experiment = ccdf\nseed = 1\nM = 4\ntheta_range = 30, -30\n").errors
    assert any("theta_range" in e for e in errors)


def test_comments_and_lists():
    result = validate_text("# header\nexperiment = scaling  # inline\nseed = 3\nM = 8\nkprime = 8, 16\n")
    assert result.ok and result.config["kprime"] == [8, 16]


def test_overrides_win():
    result = validate_text("experiment = scaling\nseed = 3\nM = 8\n", {"seed": 11, "trials": None})
    assert result.config["seed"] == 11
    assert result.config["trials"] == 200


def test_load_config_raises_with_all_errors(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("experiment = nope\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert len(info.value.errors) >= 3


def test_missing_file_is_an_error(tmp_path):
    assert not validate_config(tmp_path / "absent.cfg").ok


def test_hash_is_order_independent():
    a = validate_text("experiment = ccdf\nseed = 1\nM = 4\n").config
    b = validate_text("M = 4\nseed = 1\nexperiment = ccdf\n").config
    assert config_hash(a) == config_hash(b)
    c = validate_text("M = 4\nseed = 2\nexperiment = ccdf\n").config
    assert config_hash(a) != config_hash(c)
