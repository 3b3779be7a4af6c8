"""End-to-end smoke test for the _reelgan extension module."""

import os
import sys
import tempfile

import numpy as np

import _reelgan


TUNE = """X:{idx}
T:Smoke Reel {idx}
M:4/4
L:1/8
K:{key}
{body}
"""

BODY = "|".join(["D2F2A2d2"] * 8) + "|\n" + "|".join(["f2e2d2A2"] * 8) + "|"
JIG_BODY = "|".join(["D2F2A2"] * 8) + "|"


def build_corpus():
    tunes = [TUNE.format(idx=i + 1, key="D", body=BODY) for i in range(3)]
    reject = TUNE.format(idx=99, key="D", body=JIG_BODY).replace("M:4/4", "M:6/8")
    return "\n".join(tunes + [reject])


def main():
    curated, report = _reelgan.curate(build_corpus())
    assert report["total_seen"] == 4, report
    assert report["kept"] == 3, report
    assert report["rejected"].get("wrong_meter") == 1, report
    assert "K:D" in curated

    grids = _reelgan.encode(curated)
    assert grids.shape == (3, 4, 64), grids.shape
    assert grids.dtype == np.float32
    assert np.all(np.abs(grids) <= 1.0)

    decoded = _reelgan.decode(grids)
    assert "K:D" in decoded and "M:4/4" in decoded
    recoded = _reelgan.encode(decoded)
    assert np.array_equal(grids, recoded), "decode -> encode is not stable on curated grids"

    assert _reelgan.quantize_pitch(0.0) == 74
    assert _reelgan.quantize_pitch(1.0) == 86
    assert _reelgan.quantize_pitch(0.5) == 79, "exact ties must resolve downward"

    assert _reelgan.discrete_frechet([0.0, 0.0, 0.0], [0.0, 5.0, 0.0]) == 5.0
    assert _reelgan.discrete_frechet([0.0, 1.0], [0.0, 0.0, 1.0]) == 0.0

    profile = _reelgan.phrase_profile(grids[0])
    assert len(profile) == 6
    dist = _reelgan.distribution_profile(grids)
    assert len(dist["mean"]) == 6 and len(dist["normalized"]) == 6
    assert max(dist["normalized"]) == 1.0

    hist = _reelgan.note_histogram(grids)
    assert len(hist) == 128
    assert sum(hist) == grids.shape[0] * 256

    rng = np.random.default_rng(0)
    points = rng.normal(size=(60, 8))
    points[30:, 0] += 20.0
    embedding, kl_trace, entropy_error = _reelgan.tsne(points, perplexity=10.0, iterations=60, seed=1)
    assert embedding.shape == (60, 2)
    assert len(kl_trace) == 60
    assert entropy_error < 1e-4, entropy_error
    assert np.all(np.isfinite(embedding))

    with tempfile.TemporaryDirectory() as work:
        grid_path = os.path.join(work, "grids.rgrd")
        _reelgan.write_grids(grid_path, grids)
        loaded = _reelgan.read_grids(grid_path)
        assert np.array_equal(grids, loaded)

        result = _reelgan.train(grids, epochs=2, batch=2, seed=5,
                                out_dir=os.path.join(work, "run"), miniature=True)
        assert len(result["losses"]) == 2, result["losses"]
        assert os.path.exists(result["checkpoint"])
        assert os.path.exists(result["loss_csv"])

        samples = _reelgan.sample(result["checkpoint"], n=4, seed=9, miniature=True)
        assert samples.shape == (4, 4, 64)
        assert np.all(np.abs(samples) < 1.0)
        again = _reelgan.sample(result["checkpoint"], n=4, seed=9, miniature=True)
        assert np.array_equal(samples, again), "sampling must be seed-deterministic"

        abc_text = _reelgan.decode(samples)
        assert abc_text.count("K:D") == 4

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
