"""Acceptance gate: nine numbered criteria, each with a pinned tolerance
and time budget. One verdict line per criterion is printed in the
pytest terminal summary (see conftest).

Every oracle here is independent of the code under test: reference
loops, exhaustive enumeration, or direct arithmetic.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from latentdiff.backends import get_backend
from latentdiff.cli import main as cli_main
from latentdiff.errors import BackendUnavailable
from latentdiff.field_map import (
    build_field_map,
    classify,
    export_field_map,
    grid_size,
    import_field_map,
    sample_grid,
)
from latentdiff.harness import (
    MotionSpec,
    SweepSpec,
    replay_manifest,
    run_latent_motion,
    run_sweep,
)
from latentdiff.jobs import job_digest, make_job, save_job_file
from latentdiff.mock_backend import TOPOLOGY, MockBackend, reference_run
from latentdiff.pipeline import apply_shape_operation
from latentdiff.runner import predicted_counters, run_generation
from latentdiff.sd_adapter import (
    EMBEDDING_STAGE_ID,
    AdapterConfig,
    generate_external,
    plan_attachments,
    set_external_runtime,
)
from latentdiff.service import create_app
from latentdiff.tensors import (
    LatentTensor,
    OperatorSpec,
    Weights,
    affine_combine,
    latent_digest,
    lerp,
    mean_abs_difference,
    slerp,
)

from conftest import ACCEPTANCE_RESULTS


@contextmanager
def criterion(number: int, name: str, budget_s: float):
    started = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE_RESULTS[number] = (name, False, f"{type(exc).__name__}: {exc}")
        raise
    elapsed = time.perf_counter() - started
    detail = f"{elapsed:.2f}s of {budget_s:.0f}s budget"
    ACCEPTANCE_RESULTS[number] = (name, elapsed <= budget_s, detail)
    assert elapsed <= budget_s, f"over time budget: {detail}"


def prompt_pairs(count: int) -> list[tuple[str, str]]:
    """Deterministic pseudo-random prompt pairs."""
    gen = np.random.default_rng(414243)
    adjectives = ["ancient", "glowing", "paper", "chrome", "mossy", "tiny", "vast"]
    nouns = ["pelican", "panda", "lighthouse", "violin", "glacier", "market", "engine"]
    pairs = []
    while len(pairs) < count:
        a = f"{adjectives[gen.integers(len(adjectives))]} {nouns[gen.integers(len(nouns))]}"
        b = f"{adjectives[gen.integers(len(adjectives))]} {nouns[gen.integers(len(nouns))]}"
        if a != b:
            pairs.append((a, b))
    return pairs


def test_criterion_1_pass_through_fidelity():
    with criterion(1, "pass-through fidelity", 5.0):
        backend = get_backend("mock-v1")
        gen = np.random.default_rng(101)
        for seed in gen.integers(0, 2**32, size=50):
            seed = int(seed)
            job = make_job(["a calibration target"], seed=seed, steps=3)
            hooked = run_generation(backend, job)
            plain = reference_run("a calibration target", [], seed, 3)
            assert hooked.final_latent.data.tobytes() == plain.data.tobytes()


def test_criterion_2_endpoint_collapse():
    with criterion(2, "endpoint collapse", 10.0):
        backend = get_backend("mock-v1")
        for a, b in prompt_pairs(20):
            singles = {
                0.0: run_generation(backend, make_job([a], steps=3)).final_latent,
                1.0: run_generation(backend, make_job([b], steps=3)).final_latent,
            }
            for mode in ("query_wise", "feature_wise"):
                for alpha, single in singles.items():
                    job = make_job(
                        [a, b], steps=3, mode=mode, concept_op=OperatorSpec.lerp(alpha)
                    )
                    blended = run_generation(backend, job).final_latent
                    diff = np.abs(
                        blended.data.astype(np.float64) - single.data.astype(np.float64)
                    ).max()
                    assert diff <= 1e-6, f"{mode} at alpha {alpha}: {diff}"


def test_criterion_3_mid_path_divergence():
    with criterion(3, "mid-path divergence", 10.0):
        backend = get_backend("mock-v1")
        diverged = 0
        for a, b in prompt_pairs(20):
            latents = {}
            for mode in ("query_wise", "feature_wise"):
                job = make_job(
                    [a, b], steps=3, mode=mode, concept_op=OperatorSpec.lerp(0.5)
                )
                latents[mode] = run_generation(backend, job).final_latent
            gap = mean_abs_difference(latents["query_wise"], latents["feature_wise"])
            if gap > 1e-9:
                diverged += 1
        assert diverged >= 19, f"only {diverged}/20 pairs diverged at alpha 0.5"


def test_criterion_4_operator_algebra():
    with criterion(4, "operator algebra", 30.0):
        gen = np.random.default_rng(2024)
        size = 16
        for _ in range(1000):
            a_arr = gen.uniform(-3.0, 3.0, size).astype(np.float32)
            b_arr = gen.uniform(-3.0, 3.0, size).astype(np.float32)
            a, b = LatentTensor(a_arr), LatentTensor(b_arr)

            # endpoint identity (bit-exact, lerp and slerp)
            assert lerp(a, b, 0.0).data.tobytes() == a_arr.tobytes()
            assert lerp(a, b, 1.0).data.tobytes() == b_arr.tobytes()
            assert slerp(a, b, 0.0).data.tobytes() == a_arr.tobytes()
            assert slerp(a, b, 1.0).data.tobytes() == b_arr.tobytes()

            # one-hot recovery (bit-exact)
            pick = int(gen.integers(2))
            hot = Weights(tuple(1.0 if i == pick else 0.0 for i in range(2)))
            assert affine_combine([a, b], hot).data.tobytes() == (
                a_arr if pick == 0 else b_arr
            ).tobytes()

            # affine-shift equivariance within 1e-6
            w1 = float(gen.uniform(-1.0, 2.0))
            weights = Weights((w1, 1.0 - w1))
            shift = np.float32(gen.uniform(-2.0, 2.0))
            plain = affine_combine([a, b], weights)
            shifted = affine_combine(
                [LatentTensor(a_arr + shift), LatentTensor(b_arr + shift)], weights
            )
            assert np.abs(
                shifted.data.astype(np.float64) - (plain.data.astype(np.float64) + float(shift))
            ).max() <= 1e-6

            # slerp norm preservation on unit vectors within 1e-6
            ua = a_arr.astype(np.float64)
            ua /= np.linalg.norm(ua)
            ub = b_arr.astype(np.float64)
            ub /= np.linalg.norm(ub)
            alpha = float(gen.uniform(0.0, 1.0))
            mixed = slerp(LatentTensor(ua), LatentTensor(ub), alpha)
            assert abs(float(np.linalg.norm(mixed.data.astype(np.float64))) - 1.0) <= 1e-6

            # lerp/affine consistency within 1e-7
            via_lerp = lerp(a, b, alpha)
            via_affine = affine_combine([a, b], Weights.from_alpha(alpha))
            assert np.abs(
                via_lerp.data.astype(np.float64) - via_affine.data.astype(np.float64)
            ).max() <= 1e-7


def test_criterion_5_hook_counter_exactness():
    with criterion(5, "hook counter exactness", 5.0):
        backend = get_backend("mock-v1")
        for steps in (1, 5, 50):
            concept_job = make_job(
                ["a", "b"], steps=steps, concept_op=OperatorSpec.lerp(0.5)
            )
            counters = run_generation(backend, concept_job).hook_counters
            assert counters["concept_query"] == 3 * steps
            assert counters == predicted_counters(TOPOLOGY, concept_job)

            shape_job = make_job(
                ["solo"],
                controls=["round", "tall"],
                steps=steps,
                shape_op=OperatorSpec.lerp(0.5),
            )
            counters = run_generation(backend, shape_job).hook_counters
            assert counters["shape_bias"] == 3 * steps
            assert counters == predicted_counters(TOPOLOGY, shape_job)


def test_criterion_6_shape_bias_composition():
    with criterion(6, "shape-bias composition", 5.0):
        backend = MockBackend()
        frames = [backend.encode_control(ref) for ref in ("crouch", "leap", "land")]

        # one-hot traversal recovers each frame's bias set bit-exactly
        for pick in range(3):
            hot = Weights(tuple(1.0 if i == pick else 0.0 for i in range(3)))
            merged = apply_shape_operation(frames, OperatorSpec("affine", hot), step=0)
            for got, want in zip(merged.biases, frames[pick].biases):
                assert got.data.tobytes() == want.data.tobytes()

        # two-frame midpoint equals the per-layer average within 1e-6
        midpoint = apply_shape_operation(
            frames[:2], OperatorSpec.lerp(0.5), step=0
        )
        for layer, got in enumerate(midpoint.biases):
            average = (
                frames[0].biases[layer].data.astype(np.float64)
                + frames[1].biases[layer].data.astype(np.float64)
            ) / 2.0
            assert np.abs(got.data.astype(np.float64) - average).max() <= 1e-6


def test_criterion_7_determinism_and_replay(tmp_path, capsys):
    with criterion(7, "determinism and replay", 10.0):
        # CLI and service agree on the same job
        job = make_job(
            ["pelican", "panda"], seed=3, steps=4, concept_op=OperatorSpec.lerp(0.5)
        )
        job_path = tmp_path / "job.job.json"
        save_job_file(job, job_path)
        assert cli_main(
            ["generate", "--job", str(job_path), "--out", str(tmp_path / "cli-out")]
        ) == 0
        lines = capsys.readouterr().out.splitlines()
        cli_digest = lines[0].split()[-1]
        cli_latent = lines[1].split()[-1]

        with TestClient(create_app()) as client:
            sid = client.post("/sessions").json()["session_id"]
            client.put(
                f"/sessions/{sid}/job",
                json={
                    "prompts": ["pelican", "panda"],
                    "seed": 3,
                    "steps": 4,
                    "concept_op": {"kind": "lerp", "alpha": 0.5},
                },
            )
            served = client.post(f"/sessions/{sid}/generate").json()
        assert served["digest"] == cli_digest == job_digest(job)
        assert served["latent_digest"] == cli_latent

        # manifests replay to byte-equal latents: 10 jobs across two runs
        sweep_dir = tmp_path / "sweep"
        run_sweep(SweepSpec(prompts=("pelican", "panda"), resolution=3, steps=2), sweep_dir)
        motion_dir = tmp_path / "motion"
        run_latent_motion(
            MotionSpec(
                frames=("crouch", "leap"),
                traversal=(Weights((1.0, 0.0)), Weights((0.5, 0.5))),
                steps=2,
            ),
            motion_dir,
        )
        checks = replay_manifest(sweep_dir) + replay_manifest(motion_dir)
        assert len(checks) == 10
        assert all(c["ok"] for c in checks)


def test_criterion_8_field_map_correctness(tmp_path):
    with criterion(8, "field map correctness", 5.0):
        # classification against a three-way oracle
        gen = np.random.default_rng(88)
        for _ in range(1000):
            t_low, t_high = sorted(gen.uniform(0.0, 1.0, size=2))
            if t_low == t_high:
                continue
            score = float(gen.uniform(-0.2, 1.2))
            score = min(max(score, 0.0), 1.0)
            if score < t_low:
                expected = "desert"
            elif score >= t_high:
                expected = "meaningful"
            else:
                expected = "ambiguous"
            assert classify(score, float(t_low), float(t_high)) == expected

        # simplex grid sizes match the closed form
        for arity, resolution in itertools.product((2, 3, 4), range(2, 10)):
            points = sample_grid(arity, resolution)
            expected = math.comb(resolution + arity - 2, arity - 1)
            assert len(points) == expected
            assert grid_size(arity, resolution) == expected

        # file round-trip identity
        template = make_job(
            ["pelican", "panda"], steps=2, concept_op=OperatorSpec.lerp(0.5)
        )
        fmap = build_field_map(template, "concept", resolution=5)
        path = tmp_path / "weights.fieldmap.json"
        export_field_map(fmap, path)
        assert import_field_map(path) == fmap


def test_criterion_9_adapter_planning():
    with criterion(9, "adapter planning", 2.0):
        config = AdapterConfig(
            model_ref="sd-v1-5",
            cross_attention_block_ids=("down.attn", "mid.attn", "up.attn"),
            control_layer_ids=("ctrl.a", "ctrl.b"),
        )
        for mode, n_controls in itertools.product(
            ("query_wise", "feature_wise"), (0, 1, 2)
        ):
            shape_op = None
            if n_controls == 1:
                shape_op = OperatorSpec("affine", Weights((1.0,)))
            elif n_controls == 2:
                shape_op = OperatorSpec.lerp(0.5)
            job = make_job(
                ["a", "b"],
                mode=mode,
                controls=[f"c{k}" for k in range(n_controls)],
                concept_op=OperatorSpec.lerp(0.5),
                shape_op=shape_op,
            )
            plan = plan_attachments(config, job)
            expected = []
            if mode == "feature_wise":
                expected.append(("feature_embedding", EMBEDDING_STAGE_ID))
            else:
                expected.extend(
                    ("concept_query", bid) for bid in config.cross_attention_block_ids
                )
            if shape_op is not None:
                expected.extend(
                    ("shape_bias", lid) for lid in config.control_layer_ids
                )
            assert [(p.site_kind, p.target_id) for p in plan] == expected

        # model-absent path: a clean BackendUnavailable, never a crash
        set_external_runtime(None)
        with pytest.raises(BackendUnavailable):
            generate_external(
                config, make_job(["a", "b"], concept_op=OperatorSpec.lerp(0.5))
            )
