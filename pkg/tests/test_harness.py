"""Sweep, encyclopedia and motion harnesses plus manifest replay.

Relational oracles throughout: endpoint cells must match independent
single-prompt runs, one-hot motion points must match single-control
runs byte for byte, and a tampered manifest must fail replay.
"""

import json

import pytest

from latentdiff.backends import get_backend
from latentdiff.captions import NullCaptioner
from latentdiff.errors import (
    ArityMismatch,
    BadResolution,
    EmptySchedule,
    ParseError,
    SchemaError,
    ValidationError,
)
from latentdiff.harness import (
    MotionSpec,
    PediaPair,
    PediaSchedule,
    SweepSpec,
    load_sweep_spec,
    motion_spec_from_dict,
    pedia_schedule_from_dict,
    read_manifest,
    replay_manifest,
    run_infinitepedia,
    run_latent_motion,
    run_sweep,
    sweep_spec_from_dict,
)
from latentdiff.jobs import make_job
from latentdiff.runner import run_generation
from latentdiff.tensors import (
    Weights,
    latent_digest,
    load_ltt,
    mean_abs_difference,
)


# -- sweeps ----------------------------------------------------------------

def test_sweep_both_modes(tmp_path):
    spec = SweepSpec(prompts=("pelican", "panda"), resolution=3, steps=3)
    report = run_sweep(spec, tmp_path)
    assert report.alphas == [0.0, 0.5, 1.0]
    assert len(report.cells) == 6  # 3 alphas x 2 modes
    assert report.endpoint_agreement
    assert report.endpoint_max_diff <= 1e-6
    assert report.mid_alpha == 0.5
    assert report.mid_divergence > 1e-9
    assert len(report.mode_diffs) == 3
    assert report.failures == 0


def test_sweep_endpoints_equal_baselines_exactly(tmp_path):
    spec = SweepSpec(prompts=("pelican", "panda"), resolution=3, steps=2)
    run_sweep(spec, tmp_path)
    backend = get_backend("mock-v1")
    single = run_generation(backend, make_job(["pelican"], steps=2))
    for mode in ("query_wise", "feature_wise"):
        cell = load_ltt(tmp_path / "cells" / f"raw_{mode}_000" / "final.ltt")
        assert mean_abs_difference(cell, single.final_latent) <= 1e-6


def test_sweep_single_mode_has_no_mode_diffs(tmp_path):
    spec = SweepSpec(prompts=("a", "b"), resolution=3, modes=("query_wise",), steps=2)
    report = run_sweep(spec, tmp_path)
    assert report.mode_diffs == []
    assert report.mid_divergence is None
    assert len(report.cells) == 3


def test_sweep_with_control(tmp_path):
    spec = SweepSpec(prompts=("a", "b"), resolution=3, control_ref="round", steps=2)
    report = run_sweep(spec, tmp_path)
    assert len(report.cells) == 12  # (raw + ctl) x 2 modes x 3 alphas
    assert report.endpoint_agreement
    controlled = [d for d in report.mode_diffs if d["controlled"]]
    assert len(controlled) == 3


def test_sweep_resolution_nine_grid(tmp_path):
    spec = SweepSpec(
        prompts=("a", "b"), resolution=9, modes=("query_wise",), steps=1
    )
    report = run_sweep(spec, tmp_path)
    assert 0.375 in report.alphas
    assert report.alphas == pytest.approx([i / 8 for i in range(9)])


def test_sweep_spec_validation():
    with pytest.raises(BadResolution):
        SweepSpec(prompts=("a", "b"), resolution=2)
    with pytest.raises(ValidationError):
        SweepSpec(prompts=("a",), resolution=3)
    with pytest.raises(ValidationError):
        SweepSpec(prompts=("a", "b"), resolution=3, modes=("query_wise", "query_wise"))
    with pytest.raises(ValidationError):
        SweepSpec(prompts=("a", "b"), resolution=3, modes=("warp",))


def test_sweep_spec_parsing(tmp_path):
    doc = {"prompts": ["a", "b"], "resolution": 5, "control": "round", "seed": 7}
    spec = sweep_spec_from_dict(doc)
    assert spec.control_ref == "round"
    assert spec.seed == 7
    assert spec.modes == ("query_wise", "feature_wise")
    with pytest.raises(SchemaError) as err:
        sweep_spec_from_dict({"prompts": ["a", "b"], "resolution": 5, "speed": 1})
    assert err.value.field == "speed"
    with pytest.raises(SchemaError):
        sweep_spec_from_dict({"prompts": ["a", "b"]})
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(doc))
    assert load_sweep_spec(path) == spec
    bad = tmp_path / "broken.json"
    bad.write_text("{")
    with pytest.raises(ParseError):
        load_sweep_spec(bad)


# -- encyclopedia ------------------------------------------------------------

def test_pedia_pages_and_files(tmp_path):
    schedule = PediaSchedule(
        pairs=(
            PediaPair(("pelican", "panda"), Weights.from_alpha(0.5)),
            PediaPair(("heron", "otter"), Weights.from_alpha(0.25)),
        ),
        steps=2,
    )
    pages = run_infinitepedia(schedule, tmp_path)
    assert len(pages) == 2
    first = tmp_path / "pages" / "000_pelican_panda"
    assert (first / "final.ltt").exists()
    assert (first / "preview.ppm").read_bytes().startswith(b"P5")
    caption = (first / "caption.txt").read_text()
    assert "pelican" in caption and "panda" in caption
    page = json.loads((first / "page.json").read_text())
    assert page["concepts"] == ["pelican", "panda"]
    assert page["weights"] == [0.5, 0.5]
    assert not page["caption_degraded"]
    manifest = read_manifest(tmp_path)
    assert manifest["kind"] == "pedia"


def test_pedia_default_pair_digest(tmp_path):
    """Frozen regression: the default blend of the documentation pair."""
    schedule = PediaSchedule(
        pairs=(PediaPair(("pelican", "panda"), Weights.from_alpha(0.5)),)
    )
    pages = run_infinitepedia(schedule, tmp_path)
    assert pages[0]["latent_digest"] == "a6ccdf075def0e7c"
    assert pages[0]["digest"] == "5b16e33a3060b921"


def test_pedia_alpha_zero_collapses_to_first_concept(tmp_path):
    schedule = PediaSchedule(
        pairs=(PediaPair(("pelican", "panda"), Weights.from_alpha(0.0)),), steps=3
    )
    run_infinitepedia(schedule, tmp_path)
    blended = load_ltt(tmp_path / "pages" / "000_pelican_panda" / "final.ltt")
    backend = get_backend("mock-v1")
    single = run_generation(backend, make_job(["pelican"], steps=3))
    assert mean_abs_difference(blended, single.final_latent) <= 1e-6


def test_pedia_unknown_caption_client_degrades(tmp_path):
    schedule = PediaSchedule(
        pairs=(PediaPair(("a", "b"), Weights.from_alpha(0.5)),),
        caption_client_id="gpt-captions",
        steps=1,
    )
    pages = run_infinitepedia(schedule, tmp_path)
    assert pages[0]["caption_degraded"]
    assert pages[0]["caption_client"] == "null-captioner"
    manifest = read_manifest(tmp_path)
    assert manifest["caption_degraded"]


def test_pedia_schedule_validation():
    with pytest.raises(EmptySchedule):
        PediaSchedule(pairs=())
    with pytest.raises(ValidationError):
        PediaPair(("same", "same"), Weights.from_alpha(0.5))
    with pytest.raises(ArityMismatch):
        PediaPair(("a", "b"), Weights((0.5, 0.25, 0.25)))


def test_pedia_schedule_parsing():
    doc = {
        "pairs": [
            {"concepts": ["a", "b"]},
            {"concepts": ["c", "d"], "alpha": 0.25},
            {"concepts": ["e", "f"], "weights": [0.75, 0.25]},
        ],
        "seed": 3,
    }
    schedule = pedia_schedule_from_dict(doc)
    assert schedule.pairs[0].weights == Weights((0.5, 0.5))
    assert schedule.pairs[1].weights == Weights((0.75, 0.25))
    assert schedule.pairs[2].weights == Weights((0.75, 0.25))
    assert schedule.seed == 3
    with pytest.raises(SchemaError):
        pedia_schedule_from_dict(
            {"pairs": [{"concepts": ["a", "b"], "alpha": 0.5, "weights": [0.5, 0.5]}]}
        )
    with pytest.raises(SchemaError) as err:
        pedia_schedule_from_dict({"pairs": [{"concepts": ["a", "b"], "hue": 1}]})
    assert "hue" in str(err.value)


def test_null_captioner_is_deterministic():
    client = NullCaptioner()
    a = client.caption(("pelican", "panda"), Weights.from_alpha(0.5))
    b = client.caption(("pelican", "panda"), Weights.from_alpha(0.5))
    assert a == b
    c = client.caption(("pelican", "panda"), Weights.from_alpha(0.25))
    assert a != c


# -- motion -------------------------------------------------------------------

def test_motion_one_hot_matches_single_control(tmp_path):
    spec = MotionSpec(
        frames=("crouch", "leap"),
        traversal=(Weights((1.0, 0.0)), Weights((0.0, 1.0))),
        steps=3,
    )
    points = run_latent_motion(spec, tmp_path)
    assert all(p["inside"] for p in points)
    backend = get_backend("mock-v1")
    single = run_generation(
        backend, make_job([spec.prompt], controls=["crouch"], steps=3)
    )
    first = load_ltt(tmp_path / "points" / "point_000" / "final.ltt")
    assert first.data.tobytes() == single.final_latent.data.tobytes()


def test_motion_exterior_point_flagged(tmp_path):
    spec = MotionSpec(
        frames=("crouch", "leap"),
        traversal=(Weights((0.5, 0.5)), Weights((-0.25, 1.25))),
        steps=1,
    )
    points = run_latent_motion(spec, tmp_path)
    assert points[0]["inside"]
    assert not points[1]["inside"]
    assert not points[1]["failed"]


def test_motion_cap_violation_recorded_but_sequence_continues(tmp_path):
    spec = MotionSpec(
        frames=("crouch", "leap"),
        traversal=(
            Weights((-4.5, 5.5)),  # |w| sums to 10, over the default cap
            Weights((0.5, 0.5)),
        ),
        steps=1,
    )
    points = run_latent_motion(spec, tmp_path)
    assert points[0]["failed"]
    assert "WeightCapExceeded" in points[0]["error"]
    assert not points[1]["failed"]
    assert (tmp_path / "points" / "point_001" / "final.ltt").exists()
    manifest = read_manifest(tmp_path)
    assert manifest["kind"] == "motion"
    assert manifest["frames"] == ["crouch", "leap"]


def test_motion_raised_cap_allows_wide_extrapolation(tmp_path):
    spec = MotionSpec(
        frames=("crouch", "leap"),
        traversal=(Weights((-4.5, 5.5)),),
        weight_cap=12.0,
        steps=1,
    )
    points = run_latent_motion(spec, tmp_path)
    assert not points[0]["failed"]
    assert not points[0]["inside"]


def test_motion_spec_validation():
    with pytest.raises(ValidationError):
        MotionSpec(frames=("solo",), traversal=(Weights((1.0,)),))
    with pytest.raises(ArityMismatch) as err:
        MotionSpec(
            frames=("a", "b"),
            traversal=(Weights((0.5, 0.25, 0.25)),),
        )
    assert err.value.field == "traversal[0]"
    with pytest.raises(ValidationError):
        MotionSpec(frames=("a", "b"), traversal=())


def test_motion_spec_parsing():
    doc = {
        "frames": ["crouch", "leap", "land"],
        "traversal": [[1.0, 0.0, 0.0], [0.2, 0.5, 0.3]],
        "prompt": "dancer mid-air",
        "weight_cap": 8.0,
    }
    spec = motion_spec_from_dict(doc)
    assert spec.prompt == "dancer mid-air"
    assert spec.weight_cap == 8.0
    assert len(spec.traversal) == 2
    with pytest.raises(SchemaError) as err:
        motion_spec_from_dict(dict(doc, tempo=120))
    assert err.value.field == "tempo"


# -- replay ---------------------------------------------------------------------

def test_replay_verifies_clean_manifest(tmp_path):
    spec = MotionSpec(
        frames=("a", "b"),
        traversal=(Weights((1.0, 0.0)), Weights((0.5, 0.5))),
        steps=2,
    )
    run_latent_motion(spec, tmp_path)
    checks = replay_manifest(tmp_path)
    assert len(checks) == 2
    assert all(c["ok"] for c in checks)


def test_replay_detects_tampering(tmp_path):
    spec = SweepSpec(prompts=("a", "b"), resolution=3, modes=("query_wise",), steps=1)
    run_sweep(spec, tmp_path)
    manifest_path = tmp_path / "manifest.json"
    doc = json.loads(manifest_path.read_text())
    victim = next(e for e in doc["entries"] if not e["failed"])
    victim["job"]["seed"] = victim["job"]["seed"] + 1
    manifest_path.write_text(json.dumps(doc))
    checks = replay_manifest(tmp_path)
    assert any(not c["ok"] for c in checks)


def test_replay_skips_failed_entries(tmp_path):
    spec = MotionSpec(
        frames=("a", "b"),
        traversal=(Weights((-4.5, 5.5)), Weights((1.0, 0.0))),
        steps=1,
    )
    run_latent_motion(spec, tmp_path)
    checks = replay_manifest(tmp_path)
    assert len(checks) == 1
    assert checks[0]["ok"]


def test_read_manifest_rejects_unversioned(tmp_path):
    (tmp_path / "manifest.json").write_text('{"version": 99}')
    with pytest.raises(ParseError):
        read_manifest(tmp_path)
