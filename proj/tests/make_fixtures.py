#!/usr/bin/env python3
"""Builds the committed test fixtures under tests/data/.

Crops small regions out of scikit-image's bundled sample photographs for
training/eval corpora, writes format edge cases, and freezes an independent
numpy implementation of the luminance/bicubic/PSNR conventions into
oracles.inc for the C++ tests to compare against. Rerunning regenerates
everything; the C++ build never executes this script.
"""

import math
import pathlib

import numpy as np
from PIL import Image
from skimage import data

ROOT = pathlib.Path(__file__).resolve().parent / "data"


# ---------------------------------------------------------------- pipeline
# Mirror implementations written from the documented conventions, not from
# the C++ sources: BT.601 studio-swing luminance, Keys a=-0.5 bicubic with
# center-aligned grid / clamped taps / per-pixel weight normalization /
# antialias stretch on reduction, 8-bit quantize + border-shave PSNR.

def luminance(img_u8):
    a = img_u8.astype(np.float64) / 255.0
    if a.ndim == 2:
        y8 = 16.0 + 219.0 * a
    else:
        y8 = 16.0 + 65.481 * a[..., 0] + 128.553 * a[..., 1] + 24.966 * a[..., 2]
    return y8 / 255.0


def cubic(x):
    x = abs(x)
    if x <= 1.0:
        return (1.5 * x - 2.5) * x * x + 1.0
    if x < 2.0:
        return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    return 0.0


def axis_taps(in_size, out_size, antialias=True):
    ratio = in_size / out_size
    stretch = ratio if (antialias and ratio > 1.0) else 1.0
    support = 2.0 * stretch
    taps = []
    for i in range(out_size):
        src = (i + 0.5) * ratio - 0.5
        first = math.ceil(src - support)
        last = math.floor(src + support)
        w = np.array([cubic((j - src) / stretch) for j in range(first, last + 1)])
        w /= w.sum()
        taps.append((first, w))
    return taps


def resample_width(img, taps):
    h, w_in = img.shape
    out = np.zeros((h, len(taps)))
    for x, (first, w) in enumerate(taps):
        idx = np.clip(np.arange(first, first + len(w)), 0, w_in - 1)
        out[:, x] = img[:, idx] @ w
    return out


def bicubic_resize(img, out_h, out_w, antialias=True):
    w_taps = axis_taps(img.shape[1], out_w, antialias)
    h_taps = axis_taps(img.shape[0], out_h, antialias)
    tmp = resample_width(img, w_taps)
    return resample_width(tmp.T, h_taps).T


def quantize(img):
    return np.floor(np.clip(img * 255.0, 0.0, 255.0) + 0.5)


def psnr(ref, cand, shave):
    r = quantize(ref)[shave:-shave, shave:-shave]
    c = quantize(cand)[shave:-shave, shave:-shave]
    mse = np.mean((r - c) ** 2)
    if mse == 0.0:
        return 100.0
    return 10.0 * math.log10(255.0 ** 2 / mse)


# ----------------------------------------------------------------- corpora

TRAIN_CROPS = [
    ("astronaut", 30, 180, 160),
    ("astronaut", 260, 200, 160),
    ("astronaut", 100, 10, 160),
    ("coffee", 60, 130, 160),
    ("coffee", 180, 320, 160),
    ("camera", 60, 150, 160),
    ("camera", 250, 300, 160),
    ("immunohistochemistry", 100, 100, 160),
    ("immunohistochemistry", 280, 300, 160),
    ("rocket", 40, 220, 160),
    ("rocket", 200, 420, 160),
    ("hubble_deep_field", 150, 150, 160),
    ("hubble_deep_field", 500, 600, 160),
]

EVAL_CROPS = [
    ("chelsea", 50, 120, 96),
    ("chelsea", 150, 280, 96),
    ("moon", 200, 200, 96),
    ("coins", 80, 120, 96),
    ("page", 40, 150, 96),
]


def crop(source, y, x, size):
    img = getattr(data, source)()
    return img[y:y + size, x:x + size]


def write_corpus(crops, subdir):
    out_dir = ROOT / subdir
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, (source, y, x, size) in enumerate(crops, start=1):
        path = out_dir / f"img{i:02d}.png"
        Image.fromarray(crop(source, y, x, size)).save(path)
        paths.append(path)
    return paths


# ----------------------------------------------------------------- formats

TINY4 = np.array(
    [
        [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]],
        [[0, 0, 0], [128, 128, 128], [12, 200, 63], [200, 30, 90]],
        [[64, 64, 64], [255, 128, 0], [0, 128, 255], [17, 93, 211]],
        [[240, 240, 240], [5, 5, 5], [77, 140, 22], [183, 99, 250]],
    ],
    dtype=np.uint8,
)


def write_formats():
    fmt = ROOT / "formats"
    fmt.mkdir(parents=True, exist_ok=True)

    tiny_path = fmt / "tiny4x4.png"
    Image.fromarray(TINY4).save(tiny_path)

    ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
    Image.fromarray(ramp, mode="L").save(fmt / "gray_gradient.png")

    Image.fromarray(TINY4).convert("P", palette=Image.Palette.ADAPTIVE, colors=16).save(
        fmt / "palette.png")

    deep = (np.arange(64, dtype=np.uint32).reshape(8, 8) * 1021).astype(np.uint16)
    Image.fromarray(deep).save(fmt / "gray16.png")

    bmp_pixels = crop("chelsea", 60, 140, 48)
    Image.fromarray(bmp_pixels).save(fmt / "sample.bmp")
    Image.fromarray(bmp_pixels).save(fmt / "sample_ref.png")

    whole = tiny_path.read_bytes()
    (fmt / "truncated.png").write_bytes(whole[: int(len(whole) * 0.6)])
    (fmt / "not_image.png").write_bytes(b"this file only pretends to be an image\n" * 3)


# ----------------------------------------------------------------- oracles

def fmt_array(name, arr):
    vals = ", ".join(repr(float(v)) for v in np.asarray(arr).ravel())
    return f"inline constexpr double {name}[] = {{{vals}}};\n"


def resample_pattern(h, w):
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    v = 0.5 + 0.33 * np.sin(0.9 * x + 0.3) * np.cos(0.7 * y - 0.2)
    v += 0.12 * (((x * 7 + y * 3) % 5) / 5 - 0.4)
    return v


def pil_resize_f32(img, out_h, out_w):
    f = Image.fromarray(img.astype(np.float32), mode="F")
    return np.asarray(f.resize((out_w, out_h), Image.Resampling.BICUBIC), dtype=np.float64)


def main():
    train_paths = write_corpus(TRAIN_CROPS, "train")
    eval_paths = write_corpus(EVAL_CROPS, "eval")
    write_formats()

    lines = ["// generated by tests/make_fixtures.py; rerun it instead of editing\n",
             "namespace fixtures {\n\n"]

    lines.append(fmt_array("kTiny4x4Luma", luminance(TINY4)))

    down_src = resample_pattern(12, 12)
    down_out = bicubic_resize(down_src, 6, 6)
    up_src = resample_pattern(6, 6)
    up_out = bicubic_resize(up_src, 12, 12)
    lines.append(fmt_array("kDownSrc12x12", down_src))
    lines.append(fmt_array("kDownOut6x6", down_out))
    lines.append(fmt_array("kUpSrc6x6", up_src))
    lines.append(fmt_array("kUpOut12x12", up_out))

    # Cross-check the mirror implementation against Pillow on tap-interior
    # pixels (border conventions differ: clamp-and-normalize here vs
    # truncate-and-renormalize in Pillow).
    pil_down = pil_resize_f32(down_src, 6, 6)
    pil_up = pil_resize_f32(up_src, 12, 12)
    down_interior = np.abs(pil_down - down_out)[2:-2, 2:-2].max()
    up_interior = np.abs(pil_up - up_out)[3:-3, 3:-3].max()
    print(f"interior |numpy - PIL|: down {down_interior:.3e}, up {up_interior:.3e}")
    assert down_interior < 2e-6 and up_interior < 2e-6

    names = []
    psnrs = []
    for path in eval_paths:
        img = np.asarray(Image.open(path))
        luma = luminance(img)
        h, w = (d - d % 2 for d in luma.shape)
        hr = luma[:h, :w]
        lr = bicubic_resize(hr, h // 2, w // 2)
        up = bicubic_resize(lr, h, w)
        names.append(path.name)
        psnrs.append(psnr(hr, up, shave=2))
    lines.append("inline constexpr const char* kEvalNames[] = {"
                 + ", ".join(f'"{n}"' for n in names) + "};\n")
    lines.append(fmt_array("kEvalBaselinePsnr", psnrs))
    lines.append(f"inline constexpr double kEvalBaselineMean = {repr(float(np.mean(psnrs)))};\n")

    lines.append("\n}  // namespace fixtures\n")
    (ROOT / "oracles.inc").write_text("".join(lines))

    print(f"train: {len(train_paths)} images, eval: {len(eval_paths)} images")
    print("eval baseline PSNRs:", ", ".join(f"{p:.4f}" for p in psnrs),
          f"(mean {np.mean(psnrs):.4f})")


if __name__ == "__main__":
    main()
