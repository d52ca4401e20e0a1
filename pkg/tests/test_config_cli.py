import json

import pytest

from microexpr.cli import main
from microexpr.config import ConfigError, PipelineConfig, load_manifest


def test_print_defaults_round_trips(capsys):
    assert main(["config", "--print-defaults"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert PipelineConfig.from_dict(data) == PipelineConfig()
    assert data["tim_length"] == 10 and data["descriptor"]["kind"] == "HIGO"


def test_validate_file(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"spot": {"tau": 0.3}}))
    assert main(["config", "--validate", str(good)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"spot": {"tau": 3}}))
    assert main(["config", "--validate", str(bad)]) == 1
    assert "tau" in capsys.readouterr().err


@pytest.mark.parametrize(
    "change",
    [
        {"bogus": 1},
        {"spot": {"feature": "SIFT"}},
        {"magnify": {"alpha": 0.5}},
        {"magnify": {"band": [5, 1]}},
        {"tim_length": 1},
        {"descriptor": {"combo": "XZ"}},
        {"classifier": {"C": -1}},
        {"jobs": 0},
    ],
)
def test_invalid_configs(change):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(change)


def test_hoof_descriptor_rejected(tmp_path, capsys):
    with pytest.raises(ConfigError, match="plane combination"):
        PipelineConfig.from_dict({"descriptor": {"kind": "HOOF"}})
    m = tmp_path / "m.json"
    m.write_text("[]")
    assert main(["recognize", str(m), "--descriptor", "HOOF"]) == 1
    assert "plane combination" in capsys.readouterr().err


def test_empty_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text("[]")
    with pytest.raises(ConfigError, match="no sequences"):
        load_manifest(m)
    assert main(["spot", str(m)]) == 1
    assert "no sequences" in capsys.readouterr().err


def test_manifest_checks(tmp_path):
    rec = {"id": "a", "dir": "a", "fps": 30, "subject": "s1"}
    m = tmp_path / "m.json"
    m.write_text(json.dumps([rec, rec]))
    with pytest.raises(ConfigError, match="duplicate"):
        load_manifest(m)
    m.write_text(json.dumps([{**rec, "subject": ""}]))
    with pytest.raises(ConfigError, match="empty subject"):
        load_manifest(m)
    m.write_text(json.dumps([rec]))
    assert load_manifest(m)[0].dir == tmp_path / "a"


def test_band_flag(recognition_manifest, tmp_path, capsys):
    assert _exit(["recognize", str(recognition_manifest), "--band", "abc"]) == 1
    assert _exit(["recognize", str(recognition_manifest), "--band", "9:2"]) == 1
    assert "band" in capsys.readouterr().err


def test_bad_flags_exit_one(capsys):
    assert _exit(["spot"]) == 1
    assert _exit(["recognize", "m.json", "--tim-len", "ten"]) == 1
    assert _exit(["nonsense"]) == 1


def test_missing_manifest_exit_one(tmp_path):
    assert main(["spot", str(tmp_path / "absent.json")]) == 1


def test_runtime_failure_exit_two(tmp_path):
    rec = {"id": "a", "dir": "frames", "fps": 30, "subject": "s1", "anchors": "anchors.txt", "ground_truth": "gt.csv"}
    (tmp_path / "frames").mkdir()
    (tmp_path / "gt.csv").write_text("a,10,20,me\n")
    (tmp_path / "anchors.txt").write_text("10 10\n20 10\n")
    m = tmp_path / "m.json"
    m.write_text(json.dumps([rec]))
    # the only sequence has no frames, so the run produces nothing
    assert main(["spot", str(m)]) == 2


def _exit(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code
