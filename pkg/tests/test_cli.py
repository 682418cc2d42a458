import json

import numpy as np
import pytest

from pceval.cli import main
from pceval.formats import (
    read_latc,
    read_pcset,
    read_voxg,
    write_latc,
    write_pcset,
    write_voxg,
    write_xyz,
)
from pceval.geometry import BinaryVoxelGrid, GridSpec
from pceval.latent import ToyLinearDecoder


def f32(arr):
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


@pytest.fixture
def triangle_off(tmp_path):
    path = tmp_path / "tri.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    return str(path)


def xyz_file(tmp_path, name, cloud):
    path = tmp_path / name
    write_xyz(path, cloud)
    return str(path)


class TestSampleMesh:
    def test_samples_requested_count(self, tmp_path, triangle_off):
        out = tmp_path / "cloud.pcset"
        rc = main(
            [
                "sample-mesh",
                "--mesh",
                triangle_off,
                "--points",
                "64",
                "--seed",
                "0",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        clouds = read_pcset(out)
        assert len(clouds) == 1
        assert clouds[0].shape == (64, 3)
        # every sample lies in the triangle plane z = 0
        np.testing.assert_allclose(clouds[0][:, 2], 0.0, atol=1e-7)

    def test_seed_reproduces_bytes(self, tmp_path, triangle_off):
        a = tmp_path / "a.pcset"
        b = tmp_path / "b.pcset"
        for out in (a, b):
            argv = [
                "sample-mesh",
                "--mesh",
                triangle_off,
                "--points",
                "16",
                "--seed",
                "9",
                "--out",
                str(out),
            ]
            assert main(argv) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_normalize_flag_scales_to_unit_sphere(self, tmp_path, triangle_off):
        out = tmp_path / "n.pcset"
        argv = [
            "sample-mesh",
            "--mesh",
            triangle_off,
            "--points",
            "32",
            "--seed",
            "1",
            "--normalize",
            "--out",
            str(out),
        ]
        assert main(argv) == 0
        cloud = read_pcset(out)[0]
        radii = np.linalg.norm(cloud, axis=1)
        assert radii.max() <= 1.0 + 1e-6

    def test_missing_mesh_is_io_error(self, tmp_path, capsys):
        rc = main(
            [
                "sample-mesh",
                "--mesh",
                str(tmp_path / "gone.off"),
                "--points",
                "8",
                "--seed",
                "0",
                "--out",
                str(tmp_path / "x.pcset"),
            ]
        )
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestDist:
    def test_chamfer_hand_value(self, tmp_path, capsys):
        a = xyz_file(tmp_path, "a.xyz", [[0.0, 0.0, 0.0]])
        b = xyz_file(tmp_path, "b.xyz", [[1.0, 0.0, 0.0]])
        assert main(["dist", a, b, "--kind", "cd"]) == 0
        assert float(capsys.readouterr().out) == 2.0

    def test_emd_hand_value(self, tmp_path, capsys):
        a = xyz_file(tmp_path, "a.xyz", [[0.0, 0.0, 0.0]])
        b = xyz_file(tmp_path, "b.xyz", [[1.0, 0.0, 0.0]])
        assert main(["dist", a, b, "--kind", "emd"]) == 0
        assert float(capsys.readouterr().out) == 1.0

    def test_emd_unequal_sizes_is_validation_error(self, tmp_path, capsys):
        a = xyz_file(tmp_path, "a.xyz", [[0.0, 0.0, 0.0]])
        b = xyz_file(tmp_path, "b.xyz", [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        assert main(["dist", a, b, "--kind", "emd"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_input_is_io_error(self, tmp_path):
        a = xyz_file(tmp_path, "a.xyz", [[0.0, 0.0, 0.0]])
        assert main(["dist", a, str(tmp_path / "nope.xyz"), "--kind", "cd"]) == 2


class TestEval:
    def write_eval_inputs(self, tmp_path):
        rng = np.random.default_rng(0)
        refs = [f32(rng.uniform(-0.7, 0.7, size=(8, 3))) for _ in range(2)]
        ref_path = tmp_path / "ref.pcset"
        write_pcset(ref_path, refs)
        group_paths = []
        for rep in range(3):
            path = tmp_path / f"rep{rep}.pcset"
            write_pcset(path, refs * 3)
            group_paths.append(str(path))
        return str(ref_path), group_paths

    def test_perfect_generator_report(self, tmp_path, capsys):
        ref_path, group_paths = self.write_eval_inputs(tmp_path)
        rc = main(["eval", "--samples", *group_paths, "--reference", ref_path])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["metrics"]["jsd"] == 0.0
        assert report["metrics"]["mmd_cd"] == 0.0
        assert report["metrics"]["cov_cd"] == 1.0
        assert report["schema_version"] == 1

    def test_report_files_reproducible(self, tmp_path):
        ref_path, group_paths = self.write_eval_inputs(tmp_path)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        for out in (out_a, out_b):
            argv = [
                "eval",
                "--samples",
                *group_paths,
                "--reference",
                ref_path,
                "--label",
                "demo",
                "--out",
                str(out),
            ]
            assert main(argv) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        assert (tmp_path / "a.json.meta.json").exists()

    def test_csv_row_appended(self, tmp_path):
        ref_path, group_paths = self.write_eval_inputs(tmp_path)
        csv_path = tmp_path / "rows.csv"
        argv = [
            "eval",
            "--samples",
            *group_paths,
            "--reference",
            ref_path,
            "--label",
            "row1",
            "--out",
            str(tmp_path / "r.json"),
            "--csv",
            str(csv_path),
        ]
        assert main(argv) == 0
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 2
        assert "row1" in lines[1]

    def test_wrong_group_size_is_validation_error(self, tmp_path, capsys):
        ref_path, group_paths = self.write_eval_inputs(tmp_path)
        rc = main(
            [
                "eval",
                "--samples",
                *group_paths,
                "--reference",
                ref_path,
                "--oversample",
                "5",
            ]
        )
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestGmmPipeline:
    def write_codes(self, tmp_path):
        rng = np.random.default_rng(1)
        codes = np.vstack(
            [
                rng.normal(size=(60, 2)) * 0.2 - 3.0,
                rng.normal(size=(60, 2)) * 0.2 + 3.0,
            ]
        )
        path = tmp_path / "codes.latc"
        write_latc(path, codes)
        return str(path)

    def test_fit_sample_loglik_chain(self, tmp_path, capsys):
        codes_path = self.write_codes(tmp_path)
        model_path = tmp_path / "mix.npz"
        rc = main(
            [
                "gmm-fit",
                "--codes",
                codes_path,
                "--components",
                "2",
                "--seed",
                "0",
                "--out",
                str(model_path),
            ]
        )
        assert rc == 0
        fit_line = capsys.readouterr().out
        assert "final_log_likelihood=" in fit_line
        assert model_path.exists()

        samples_path = tmp_path / "draws.latc"
        rc = main(
            [
                "gmm-sample",
                "--model",
                str(model_path),
                "--count",
                "40",
                "--seed",
                "3",
                "--out",
                str(samples_path),
            ]
        )
        assert rc == 0
        draws = read_latc(samples_path)
        assert draws.shape == (40, 2)
        # both modes are far from zero; draws should hug one of them
        assert np.all(np.abs(np.abs(draws[:, 0]) - 3.0) < 1.5)

        rc = main(["gmm-loglik", "--model", str(model_path), "--codes", codes_path])
        assert rc == 0
        assert float(capsys.readouterr().out) > -5.0

    def test_too_many_components_is_validation_error(self, tmp_path, capsys):
        path = tmp_path / "tiny.latc"
        write_latc(path, np.zeros((2, 2)) + [[0.0, 0.0], [1.0, 1.0]])
        rc = main(
            [
                "gmm-fit",
                "--codes",
                str(path),
                "--components",
                "5",
                "--seed",
                "0",
                "--out",
                str(tmp_path / "m.npz"),
            ]
        )
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestDecode:
    def test_toy_decoder_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        dec = ToyLinearDecoder(rng.normal(size=(5, 3)), rng.normal(size=(15, 2)))
        dec_path = tmp_path / "dec.npz"
        dec.save(dec_path)
        codes = f32(rng.normal(size=(4, 2)))
        codes_path = tmp_path / "codes.latc"
        write_latc(codes_path, codes)
        out = tmp_path / "clouds.pcset"
        rc = main(
            [
                "decode",
                "--codes",
                str(codes_path),
                "--decoder",
                str(dec_path),
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        clouds = read_pcset(out)
        assert len(clouds) == 4
        expected = dec.decode(codes)
        np.testing.assert_allclose(clouds[0], expected[0], atol=1e-6)

    def test_echo_command_is_decoder_failure(self, tmp_path, capsys):
        codes_path = tmp_path / "codes.latc"
        write_latc(codes_path, np.zeros((2, 3)))
        rc = main(
            [
                "decode",
                "--codes",
                str(codes_path),
                "--command",
                "cp",
                "--out",
                str(tmp_path / "o.pcset"),
            ]
        )
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestLatentSubcommands:
    def codebook(self, tmp_path):
        book = f32(
            [
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [4.0, 4.0],
                [1.0, 1.0],
            ]
        )
        path = tmp_path / "book.latc"
        write_latc(path, book)
        return str(path), book

    def test_interpolate_single_t(self, tmp_path):
        path, book = self.codebook(tmp_path)
        out = tmp_path / "mid.latc"
        rc = main(
            [
                "latent",
                "interpolate",
                "--codes",
                path,
                "--index-a",
                "0",
                "--index-b",
                "1",
                "--t",
                "0.5",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        np.testing.assert_allclose(read_latc(out), [[0.5, 0.0]], atol=1e-7)

    def test_interpolate_steps(self, tmp_path):
        path, book = self.codebook(tmp_path)
        out = tmp_path / "steps.latc"
        rc = main(
            [
                "latent",
                "interpolate",
                "--codes",
                path,
                "--index-a",
                "0",
                "--index-b",
                "1",
                "--steps",
                "3",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        np.testing.assert_allclose(
            read_latc(out), [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], atol=1e-7
        )

    def test_interpolate_requires_t_or_steps(self, tmp_path):
        path, _ = self.codebook(tmp_path)
        with pytest.raises(SystemExit):
            main(
                [
                    "latent",
                    "interpolate",
                    "--codes",
                    path,
                    "--index-a",
                    "0",
                    "--index-b",
                    "1",
                    "--out",
                    str(tmp_path / "x.latc"),
                ]
            )

    def test_edit_mean_vs_sum_convention(self, tmp_path):
        path, book = self.codebook(tmp_path)
        out_mean = tmp_path / "mean.latc"
        out_sum = tmp_path / "sum.latc"
        base = [
            "latent",
            "edit",
            "--codes",
            path,
            "--group-a",
            "0",
            "--group-b",
            "1,2",
            "--apply-to",
            "4",
        ]
        assert main(base + ["--out", str(out_mean)]) == 0
        assert main(base + ["--convention", "sum", "--out", str(out_sum)]) == 0
        np.testing.assert_allclose(read_latc(out_mean), [[1.5, 1.5]], atol=1e-7)
        np.testing.assert_allclose(read_latc(out_sum), [[2.0, 2.0]], atol=1e-7)

    def test_analogy_prints_index(self, tmp_path, capsys):
        path, book = self.codebook(tmp_path)
        out = tmp_path / "match.latc"
        rc = main(
            [
                "latent",
                "analogy",
                "--codes",
                path,
                "--a",
                "0",
                "--a-prime",
                "1",
                "--b",
                "2",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        assert capsys.readouterr().out.strip() == "4"
        np.testing.assert_allclose(read_latc(out), [[1.0, 1.0]], atol=1e-7)

    def test_out_of_range_index_is_validation_error(self, tmp_path, capsys):
        path, _ = self.codebook(tmp_path)
        rc = main(
            [
                "latent",
                "interpolate",
                "--codes",
                path,
                "--index-a",
                "0",
                "--index-b",
                "99",
                "--t",
                "0.5",
                "--out",
                str(tmp_path / "x.latc"),
            ]
        )
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestCompleteScoreAndIou:
    def test_complete_score_output(self, tmp_path, capsys):
        pred = xyz_file(tmp_path, "p.xyz", [[0.0, 0, 0], [1.0, 0, 0]])
        truth = xyz_file(tmp_path, "t.xyz", [[0.0, 0, 0]])
        rc = main(["complete-score", "--predicted", pred, "--truth", truth, "--rho", "0.02"])
        assert rc == 0
        assert capsys.readouterr().out.strip() == "accuracy=0.5 coverage=1.0"

    def test_iou_hand_value(self, tmp_path, capsys):
        spec = GridSpec(resolution=2)
        a = np.zeros(8, dtype=bool)
        b = np.zeros(8, dtype=bool)
        a[:2] = True
        b[1:3] = True
        pa = tmp_path / "a.voxg"
        pb = tmp_path / "b.voxg"
        write_voxg(pa, BinaryVoxelGrid(spec=spec, occupied=a))
        write_voxg(pb, BinaryVoxelGrid(spec=spec, occupied=b))
        assert main(["iou", str(pa), str(pb)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(1 / 3, abs=1e-15)

    def test_iou_empty_union_is_validation_error(self, tmp_path, capsys):
        spec = GridSpec(resolution=2)
        path = tmp_path / "e.voxg"
        write_voxg(path, BinaryVoxelGrid(spec=spec, occupied=np.zeros(8, dtype=bool)))
        assert main(["iou", str(path), str(path)]) == 1


class TestVoxelize:
    def test_writes_grid_and_warns_on_clamp(self, tmp_path, capsys):
        cloud = [[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]]  # second point outside [-1,1]^3
        path = xyz_file(tmp_path, "c.xyz", cloud)
        out = tmp_path / "grid.voxg"
        rc = main(
            [
                "voxelize",
                "--input",
                path,
                "--out",
                str(out),
                "--grid-resolution",
                "4",
            ]
        )
        assert rc == 0
        assert "clamped" in capsys.readouterr().err
        grid = read_voxg(out)
        assert grid.spec.resolution == 4
        assert grid.occupied.sum() == 2

    def test_min_count_filters_sparse_cells(self, tmp_path):
        cloud = [[0.0, 0.0, 0.0]] * 5 + [[0.9, 0.9, 0.9]]
        path = xyz_file(tmp_path, "c.xyz", cloud)
        out = tmp_path / "grid.voxg"
        rc = main(
            [
                "voxelize",
                "--input",
                path,
                "--out",
                str(out),
                "--grid-resolution",
                "2",
                "--min-count",
                "2",
            ]
        )
        assert rc == 0
        assert read_voxg(out).occupied.sum() == 1


class TestSplitCli:
    def test_prints_canonical_sizes(self, capsys):
        rc = main(["split", "--n", "20", "--seed", "0"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["train"]) == 17
        assert len(payload["validation"]) == 1
        assert len(payload["test"]) == 2
        assert payload["seed"] == 0

    def test_same_seed_identical_output(self, capsys):
        assert main(["split", "--n", "30", "--seed", "5"]) == 0
        first = capsys.readouterr().out
        assert main(["split", "--n", "30", "--seed", "5"]) == 0
        assert capsys.readouterr().out == first

    def test_bad_ratios_is_validation_error(self, capsys):
        rc = main(["split", "--n", "20", "--ratios", "0.5,0.5,0.5", "--seed", "0"])
        assert rc == 1


class TestBaselineAndFixture:
    def test_memorize_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        train = [f32(rng.normal(size=(6, 3))) for _ in range(5)]
        train_path = tmp_path / "train.pcset"
        write_pcset(train_path, train)
        out = tmp_path / "mem.pcset"
        rc = main(
            [
                "baseline-memorize",
                "--train",
                str(train_path),
                "--size",
                "3",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        picked = read_pcset(out)
        assert len(picked) == 3
        keys = {c.tobytes() for c in train}
        for cloud in picked:
            assert cloud.tobytes() in keys

    def test_memorize_oversize_is_validation_error(self, tmp_path, capsys):
        train_path = tmp_path / "train.pcset"
        write_pcset(train_path, [np.zeros((2, 3))])
        rc = main(
            [
                "baseline-memorize",
                "--train",
                str(train_path),
                "--size",
                "2",
                "--seed",
                "0",
                "--out",
                str(tmp_path / "o.pcset"),
            ]
        )
        assert rc == 1

    def test_fixture_hedge_preserves_size(self, tmp_path):
        rng = np.random.default_rng(4)
        ref = xyz_file(tmp_path, "ref.xyz", rng.uniform(-1, 1, size=(50, 3)))
        out = tmp_path / "hedged.pcset"
        rc = main(
            [
                "fixture-hedge",
                "--reference",
                ref,
                "--hot-fraction",
                "0.8",
                "--spread",
                "0.2",
                "--seed",
                "7",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        assert read_pcset(out)[0].shape == (50, 3)


class TestSelectCli:
    def test_selects_cleanest_checkpoint(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        val = [f32(rng.uniform(-0.8, 0.8, size=(16, 3))) for _ in range(2)]
        val_path = tmp_path / "val.pcset"
        write_pcset(val_path, val)
        tokens = []
        for label, noise in ((100, 0.5), (200, 0.001)):
            path = tmp_path / f"c{label}.pcset"
            write_pcset(path, [c + rng.normal(scale=noise, size=c.shape) for c in val * 3])
            tokens.append(f"{label}={path}")
        rc = main(
            ["select", "--checkpoints", *tokens, "--validation", str(val_path)]
        )
        assert rc == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[-1] == "chosen 200"
        assert len(out) == 3

    def test_missing_checkpoint_is_io_error(self, tmp_path, capsys):
        rng = np.random.default_rng(6)
        val_path = tmp_path / "val.pcset"
        write_pcset(val_path, [f32(rng.normal(size=(8, 3)))])
        rc = main(
            [
                "select",
                "--checkpoints",
                f"100={tmp_path / 'gone.pcset'}",
                "--validation",
                str(val_path),
            ]
        )
        assert rc == 2
        assert "checkpoint 100" in capsys.readouterr().err

    def test_bad_token_is_validation_error(self, tmp_path, capsys):
        val_path = tmp_path / "val.pcset"
        write_pcset(val_path, [np.zeros((2, 3))])
        rc = main(
            ["select", "--checkpoints", "nolabel", "--validation", str(val_path)]
        )
        assert rc == 1
        assert "LABEL=PATH" in capsys.readouterr().err


class TestNormalizeCli:
    def test_normalizes_all_clouds(self, tmp_path):
        rng = np.random.default_rng(7)
        raw = [f32(rng.normal(size=(10, 3)) * 5 + 2) for _ in range(3)]
        src = tmp_path / "raw.pcset"
        write_pcset(src, raw)
        out = tmp_path / "unit.pcset"
        assert main(["normalize", "--input", str(src), "--out", str(out)]) == 0
        for cloud in read_pcset(out):
            assert np.linalg.norm(cloud, axis=1).max() <= 1.0 + 1e-6
            np.testing.assert_allclose(cloud.mean(axis=0), 0.0, atol=1e-6)
