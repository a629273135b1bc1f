"""Run configs and named profiles."""

import pytest

from ringswap.adversary import Behavior, Verdict
from ringswap.config import (
    BUILTIN_ACCUMULATORS,
    PROFILE_DIR_ENV,
    AccumulatorProfile,
    RunConfig,
    load_accumulator_profile,
    load_group_profile,
)
from ringswap.crypto.schnorr import ChallengeMode
from ringswap.errors import ConfigError


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.parties == 3
        assert config.group == "production"
        assert config.accumulator == "realistic"
        assert config.challenge_mode() is ChallengeMode.RING
        assert config.expected() is None

    def test_from_dict(self):
        config = RunConfig.from_dict({
            "group": "tiny",
            "parties": 4,
            "behaviors": {"bob": "skipper:carol"},
            "expect": "NoneCompleted",
            "seed": 7,
        })
        assert config.seed == "7"
        assert config.expected() is Verdict.NONE_COMPLETED
        assert config.parsed_behaviors() == {"bob": Behavior.skipper("carol")}

    @pytest.mark.parametrize("data", [
        {"players": 3},
        {"parties": 1},
        {"parties": "three"},
        {"mode": "star"},
        {"expect": "Maybe"},
        {"amount": 0},
        {"expiry": 0},
        {"behaviors": ["bob"]},
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)

    def test_not_a_mapping(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(["group", "tiny"])

    def test_bad_behaviour_is_config_error(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"behaviors": {"bob": "teleporter"}}).parsed_behaviors()

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("group: tiny\naccumulator: toy\nparties: 5\nbehaviors:\n  carol: colluder\n")
        config = RunConfig.load(path)
        assert config.parties == 5
        assert config.behaviors == {"carol": "colluder"}

    def test_load_broken_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("group: [tiny\n")
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "absent.yaml")

    def test_config_hash(self):
        a = RunConfig.from_dict({"seed": "x"})
        b = RunConfig.from_dict({"seed": "x"})
        c = RunConfig.from_dict({"seed": "y"})
        assert a.config_hash() == b.config_hash() != c.config_hash()


class TestProfiles:
    def test_builtin_rounds(self):
        assert BUILTIN_ACCUMULATORS["realistic"].rounds == 64
        assert BUILTIN_ACCUMULATORS["toy"].rounds == 20
        assert AccumulatorProfile("odd", security_bits=41).rounds == 21
        assert AccumulatorProfile("fixed", mr_rounds=5).rounds == 5

    def test_toy_params(self, toy_acc):
        params = toy_acc.params
        assert params.N.bit_length() == 64
        assert params.prime_bits == 32
        assert params.mr_rounds == 20

    def test_unknown_profiles(self, monkeypatch):
        monkeypatch.delenv(PROFILE_DIR_ENV, raising=False)
        with pytest.raises(ConfigError):
            load_group_profile("medium")
        with pytest.raises(ConfigError):
            load_accumulator_profile("medium")

    def test_profile_dir(self, tmp_path, monkeypatch):
        (tmp_path / "small.yaml").write_text("group:\n  kind: tiny\n  tiny_bits: 18\n")
        (tmp_path / "mini.yaml").write_text(
            "accumulator:\n  modulus_bits: 72\n  prime_bits: 16\n  security_bits: 30\n"
        )
        monkeypatch.setenv(PROFILE_DIR_ENV, str(tmp_path))
        group = load_group_profile("small").group()
        assert group.id.startswith("schoolbook-")
        assert group.order_q.bit_length() == 19
        profile = load_accumulator_profile("mini")
        assert profile.rounds == 15
        assert profile.accumulator().params.N.bit_length() == 72
        # built-ins stay reachable
        assert load_group_profile("production").kind == "production"

    def test_profile_file_without_section(self, tmp_path, monkeypatch):
        (tmp_path / "odd.yaml").write_text("accumulator:\n  modulus_bits: 48\n")
        monkeypatch.setenv(PROFILE_DIR_ENV, str(tmp_path))
        with pytest.raises(ConfigError):
            load_group_profile("odd")

    def test_profile_unknown_field(self, tmp_path, monkeypatch):
        (tmp_path / "odd.yaml").write_text("group:\n  curve: ed25519\n")
        monkeypatch.setenv(PROFILE_DIR_ENV, str(tmp_path))
        with pytest.raises(ConfigError):
            load_group_profile("odd")

    def test_bad_group_kind(self, tmp_path, monkeypatch):
        (tmp_path / "odd.yaml").write_text("group:\n  kind: bogus\n")
        monkeypatch.setenv(PROFILE_DIR_ENV, str(tmp_path))
        with pytest.raises(ConfigError):
            load_group_profile("odd").group()
