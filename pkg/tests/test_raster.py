import numpy as np
import pytest
from PIL import Image

from scriptorium.raster import (
    BinaryImage,
    GrayImage,
    ImageReadError,
    UnsupportedFormatError,
    binarize_otsu,
    load_image,
    negate,
    png_bytes,
    save_pgm,
)


def write_png(path, array, mode):
    Image.fromarray(array, mode=mode).save(path, format="PNG")


def test_load_pgm_identity(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 0, 255]))
    img = load_image(p)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.tolist() == [[0, 255], [0, 255]]


def test_load_pgm_with_comment(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n255\n" + bytes([7, 9]))
    assert load_image(p).pixels.tolist() == [[7, 9]]


def test_load_png_gray_and_rgb(tmp_path):
    g = tmp_path / "g.png"
    write_png(g, np.array([[0, 128], [255, 7]], dtype=np.uint8), "L")
    assert load_image(g).pixels.tolist() == [[0, 128], [255, 7]]

    c = tmp_path / "c.png"
    rgb = np.zeros((1, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 255, 255)
    rgb[0, 1] = (255, 0, 0)
    rgb[0, 2] = (0, 255, 0)
    write_png(c, rgb, "RGB")
    px = load_image(c).pixels
    assert px[0, 0] == 255
    # BT.601 red weight, round half up
    assert px[0, 1] == int(np.floor(0.299 * 255 + 0.5)) == 76
    assert px[0, 2] == int(np.floor(0.587 * 255 + 0.5)) == 150


def test_load_png_16bit(tmp_path):
    p = tmp_path / "w.png"
    arr = np.array([[0, 65535, 32768]], dtype=np.uint16)
    Image.fromarray(arr).save(p, format="PNG")
    px = load_image(p).pixels
    assert px.tolist() == [[0, 255, 128]]


def test_load_errors(tmp_path):
    with pytest.raises(ImageReadError):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "junk.png"
    bad.write_bytes(b"not an image at all")
    with pytest.raises(ImageReadError):
        load_image(bad)
    bmp = tmp_path / "x.gif"
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8), mode="L").save(bmp, format="GIF")
    with pytest.raises(UnsupportedFormatError):
        load_image(bmp)


def test_otsu_constant_image():
    img = GrayImage(np.zeros((4, 4), dtype=np.uint8))
    binary, report = binarize_otsu(img)
    assert not binary.foreground.any()
    assert report.threshold == 0
    assert report.foreground_fraction == 0.0
    assert not report.inverted

    img = GrayImage(np.full((3, 3), 99, dtype=np.uint8))
    _, report = binarize_otsu(img)
    assert report.threshold == 99


def test_otsu_bimodal():
    values = np.array([10] * 60 + [200] * 40, dtype=np.uint8).reshape(10, 10)
    binary, report = binarize_otsu(GrayImage(values))
    assert 10 <= report.threshold <= 199
    assert binary.foreground.sum() == 40
    assert set(values[binary.foreground].tolist()) == {200}
    assert not report.inverted


def test_otsu_checkerboard_stays_put():
    grid = np.indices((8, 8)).sum(axis=0) % 2
    img = GrayImage((grid * 255).astype(np.uint8))
    binary, report = binarize_otsu(img)
    assert not report.inverted
    assert report.foreground_fraction == 0.5
    assert binary.foreground.sum() == 32
    assert bool(binary.foreground[0, 1])


def test_otsu_auto_polarity_inverts_dark_text_on_light():
    # mostly bright page, some dark ink: bright side is the majority
    values = np.full((10, 10), 230, dtype=np.uint8)
    values[4, 2:8] = 15
    binary, report = binarize_otsu(GrayImage(values))
    assert report.inverted
    assert binary.foreground.sum() == 6
    assert report.foreground_fraction == 0.06


def brute_force_otsu(pixels):
    flat = pixels.ravel().astype(np.float64)
    best_t, best_v = 0, -1.0
    for t in range(256):
        lo = flat[flat <= t]
        hi = flat[flat > t]
        if len(lo) == 0 or len(hi) == 0:
            v = 0.0
        else:
            v = len(lo) * len(hi) * (lo.mean() - hi.mean()) ** 2
        if v > best_v + 1e-9:
            best_v, best_t = v, t
    return best_t


def test_otsu_matches_brute_force_on_random_images():
    rng = np.random.default_rng(8)
    for _ in range(200):
        h, w = rng.integers(2, 12, 2)
        pixels = rng.integers(0, 256, (h, w)).astype(np.uint8)
        if len(np.unique(pixels)) == 1:
            continue
        _, report = binarize_otsu(GrayImage(pixels))
        assert report.threshold == brute_force_otsu(pixels)
        assert report.foreground_fraction <= 0.5


def test_negate_involution_and_cases():
    rng = np.random.default_rng(1)
    img = BinaryImage(rng.random((8, 8)) < 0.5)
    assert np.array_equal(negate(negate(img)).foreground, img.foreground)

    all_on = BinaryImage(np.ones((3, 3), dtype=bool))
    assert not negate(all_on).foreground.any()

    one = np.zeros((6, 6), dtype=bool)
    one[3, 3] = True
    flipped = negate(BinaryImage(one)).foreground
    assert not flipped[3, 3] and flipped.sum() == 35


def test_pgm_roundtrip_and_png_bytes_deterministic(tmp_path):
    rng = np.random.default_rng(2)
    arr = rng.integers(0, 256, (5, 7)).astype(np.uint8)
    save_pgm(tmp_path / "r.pgm", GrayImage(arr))
    assert np.array_equal(load_image(tmp_path / "r.pgm").pixels, arr)

    rgb = rng.integers(0, 256, (4, 6, 3)).astype(np.uint8)
    assert png_bytes(rgb) == png_bytes(rgb.copy())
    # PIL agrees with our encoder's pixel content
    from io import BytesIO

    back = np.asarray(Image.open(BytesIO(png_bytes(rgb))))
    assert np.array_equal(back, rgb)
