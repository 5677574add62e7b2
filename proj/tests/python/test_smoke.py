import json

import numpy as np
import pytest

import gaitgcn as g


def tiny_config():
    return g.resolve_config(overrides=[
        "model.frames=8",
        "model.channels=[4,8,8]",
        "model.num_classes=2",
        "train.batch_size=8",
        "train.epochs=2",
    ])


def test_synthetic_and_preprocessing():
    seqs = g.generate_synthetic(subjects=2, seqs=2, views=[0, 90], frames=10, seed=3)
    assert len(seqs) == 8
    again = g.generate_synthetic(subjects=2, seqs=2, views=[0, 90], frames=10, seed=3)
    assert np.array_equal(seqs[0].coords, again[0].coords)
    s, warnings = g.normalize_coords(seqs[0])
    assert s.coords.shape == (2, 10, 15)
    assert s.coords.min() == 0.0 and s.coords.max() == 1.0
    assert warnings == []
    assert g.resample_to_length(s, 24).frames == 24
    motion = g.derive_motion(s.coords)
    assert np.allclose(motion[:, 0, :], s.coords[:, 1, :] - s.coords[:, 0, :])
    assert np.all(motion[:, -1, :] == 0)
    assert g.JOINT_NAMES[4] == "RWrist"


def test_sequence_file_round_trip(tmp_path):
    coords = np.random.default_rng(0).uniform(size=(2, 5, 15))
    s = g.Sequence("042", "CL", 2, 144, coords)
    g.save_sequence(s, tmp_path / "s.json")
    back = g.load_sequence(tmp_path / "s.json")
    assert back.subject_id == "042" and back.condition == "CL" and back.view_deg == 144
    assert np.array_equal(back.coords, coords)
    with pytest.raises(Exception) as info:
        g.load_sequence(tmp_path / "missing.json")
    assert "missing.json" in str(info.value)


def test_graphs():
    d = g.hop_distances()
    assert d[4, 14] == 7
    A = g.natural_adjacency()
    assert A[4, 3] == 1 and A[4, 14] == 0
    agg = g.normalize_aggregator(g.full_adjacency(5))
    assert np.allclose(agg, np.full((5, 5), 0.2), atol=1e-15)
    k2 = g.k_adjacency(2)
    assert k2[4, 2] == 1 and k2[4, 3] == 0 and k2[4, 4] == 1


def test_model_embed_and_checkpoint(tmp_path):
    cfg = tiny_config()
    model = g.Model(cfg, seed=1)
    assert model.embedding_dim == 24
    seqs = [g.normalize_coords(s)[0] for s in g.generate_synthetic(subjects=2, seqs=2, views=[0, 90], frames=8)]
    emb = model.embed(seqs)
    assert emb.shape == (8, 24)
    emb_zero, logits, blocks = model.stream_forward(0, np.zeros((2, 2, 8, 15)))
    assert emb_zero.shape == (2, 8) and logits.shape == (2, 2)
    assert [b.shape for b in blocks] == [(2, 4, 8, 15), (2, 8, 4, 15), (2, 8, 2, 15)]
    assert np.array_equal(emb_zero[0], emb_zero[1])
    with pytest.raises(g.ShapeError):
        model.stream_forward(0, np.zeros((2, 3, 8, 15)))

    log = model.train(seqs, cfg, ["joint"])
    assert len(log) == 2 and log[0]["stream"] == "joint"
    assert all(np.isfinite(e["loss"]) for e in log)

    model.save(tmp_path / "m.ckpt")
    back = g.Model.load(tmp_path / "m.ckpt")
    assert np.array_equal(back.embed(seqs), model.embed(seqs))
    (tmp_path / "bad.ckpt").write_bytes((tmp_path / "m.ckpt").read_bytes()[:100])
    with pytest.raises(g.CheckpointError):
        g.Model.load(tmp_path / "bad.ckpt")


def test_fusion_and_evaluation(tmp_path):
    fm = g.EmbeddingRecord("001", "NM", 5, 90, "model", [1.0, 2.0])
    fa = g.EmbeddingRecord("001", "NM", 5, 90, "appearance", [0.5])
    fused = g.fuse_two_branch(fm, fa, 400.0)
    assert fused.vector == [1.0, 2.0, 200.0] and fused.source == "fused"

    protocol = g.resolve_config(overrides=["protocol.views=[0,90]"])
    gallery = [g.EmbeddingRecord(s, "NM", 1, v, "model", [float(i), 0.0])
               for i, s in enumerate(["A", "B"]) for v in (0, 90)]
    probe = [g.EmbeddingRecord("B", "NM", 5, 0, "model", [0.9, 0.1])]
    result = g.evaluate_rank1(gallery, probe, protocol)
    assert result["report"].startswith("condition,probe_view,accuracy,gallery_views,0,90")
    assert result["warnings"]

    g.write_embeddings(tmp_path / "e.txt", gallery + probe)
    assert g.read_embeddings(tmp_path / "e.txt") == gallery + probe

    fa_all = [g.EmbeddingRecord(r.subject_id, r.condition, r.seq_index, r.view_deg, "appearance", [1.0])
              for r in gallery + probe]
    report = g.lambda_sweep(gallery + probe, fa_all, [300, 400, 500], protocol)
    lines = report.strip().splitlines()
    assert lines[0] == "lambda,NM,BG,CL,Mean" and len(lines) == 4


def test_config_and_cli(tmp_path):
    cfg = json.loads(g.default_config_json())
    assert cfg["model"]["channels"] == [96, 192, 384]
    with pytest.raises(ValueError):
        g.resolve_config(overrides=["model.nope=1"])
    code, out, err = g.run_cli(["gen-data", "--subjects", "2", "--seqs", "1", "--frames", "6",
                                "--out", str(tmp_path / "gen")])
    assert code == 0, err
    assert (tmp_path / "gen" / "dataset" / "manifest.tsv").exists()
    code, _, err = g.run_cli(["train", "--bogus"])
    assert code == 2


def test_verification_entry_points():
    results = g.selftest(1)
    assert all(results.values()), results
