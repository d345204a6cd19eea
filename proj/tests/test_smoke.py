"""Smoke tests for the python bindings."""
import math
import os
import sys

sys.path.insert(0, os.environ.get("SLIDEADAPT_PYMODULE_DIR", "."))

import numpy as np

import _slideadapt as sa


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b}"


def test_losses():
    approx(sa.discriminator_loss([0.9, 0.8], [0.1, 0.3]), 0.39526976328429736)
    approx(sa.mapping_loss([0.25, 0.75]), 0.83698821678583580)
    approx(sa.siamese_loss([0.9, 0.2], [1.0, 0.0]), 0.16425203348601798)
    approx(sa.mapping_loss([0.5]), math.log(2.0))
    approx(sa.classification_loss([[0.0, 0.0]], [[1.0, 0.0]]), math.log(2.0))
    approx(sa.combine_total(sa.combine_adversarial(0.25, 0.5), 0.125), 0.875)


def test_stats():
    approx(sa.mcnemar(10, 2), 0.03857421875)
    approx(sa.mcnemar(0, 5), 0.0625)
    approx(sa.mcnemar(0, 0), 1.0)
    grade, mean_prob = sa.vote_slide([0.9, 0.2, 0.8])
    assert grade == "High"
    approx(mean_prob, (0.9 + 0.2 + 0.8) / 3)
    assert sa.gleason_to_grade(7) == "Low"
    assert sa.gleason_to_grade(8) == "High"


def test_ingest():
    white = np.full((20, 20, 3), 255, dtype=np.uint8)
    assert sa.tissue_fraction(white) == 0.0
    black = np.zeros((20, 20, 3), dtype=np.uint8)
    assert sa.tissue_fraction(black) == 1.0

    tiles = sa.extract_patches(black, 10, 0.5)
    assert len(tiles) == 4
    rows_cols = {(r, c) for r, c, _ in tiles}
    assert rows_cols == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert all(frac == 1.0 for _, _, frac in tiles)


def test_shift():
    img = np.full((16, 16, 3), 128, dtype=np.uint8)
    same = sa.apply_shift(img)  # identity parameters
    assert np.array_equal(same, img)

    dimmed = sa.apply_shift(img, brightness_scale=0.5)
    assert np.all(dimmed == 64)

    noisy_a = sa.apply_shift(img, noise_std=5.0, seed=1)
    noisy_b = sa.apply_shift(img, noise_std=5.0, seed=1)
    noisy_c = sa.apply_shift(img, noise_std=5.0, seed=2)
    assert np.array_equal(noisy_a, noisy_b)
    assert not np.array_equal(noisy_a, noisy_c)


def test_errors():
    try:
        sa.gleason_to_grade(3)
    except Exception:
        pass
    else:
        raise AssertionError("out-of-range gleason score should raise")


def main():
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
    print("python smoke tests passed")


if __name__ == "__main__":
    main()
