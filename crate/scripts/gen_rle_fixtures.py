#!/usr/bin/env python3
"""Generate RLE codec fixtures from a reference implementation.

The encoder/decoder below is a line-for-line port of the COCO mask API
(maskApi.c: rleEncode/rleDecode/rleToString/rleFrString), which defines the
de-facto compressed RLE interchange format emitted by automatic mask
generators. Fixtures produced here pin the Rust codec to that format
bit-for-bit: each case stores the raw column-major run lengths and the
compressed counts string the reference produces for them.

Usage: python3 scripts/gen_rle_fixtures.py
Writes: crates/core/tests/fixtures/rle_reference.json
        crates/cli/tests/fixtures/sam_records.json
"""

import json
import random
import os


def encode_runs(pixels):
    """Column-major 0/1 pixel list -> alternating run lengths, background first."""
    runs = []
    prev = 0
    count = 0
    for v in pixels:
        v = 1 if v else 0
        if v != prev:
            runs.append(count)
            count = 0
            prev = v
        count += 1
    runs.append(count)
    return runs


def decode_runs(runs, n):
    pixels = []
    v = 0
    for c in runs:
        pixels.extend([v] * c)
        v = 1 - v
    assert len(pixels) == n, f"runs sum {len(pixels)} != {n}"
    return pixels


def rle_to_string(cnts):
    """maskApi.c rleToString: 6-bit chunks, chars 48..111, stride-2 deltas for i > 2."""
    out = []
    for i, c in enumerate(cnts):
        x = c
        if i > 2:
            x -= cnts[i - 2]
        more = True
        while more:
            ch = x & 0x1F
            x >>= 5  # Python's >> is arithmetic on negatives, like the C long shift
            more = (x != -1) if (ch & 0x10) else (x != 0)
            if more:
                ch |= 0x20
            out.append(chr(ch + 48))
    return "".join(out)


def rle_from_string(s):
    """maskApi.c rleFrString."""
    cnts = []
    p = 0
    while p < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[p]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(cnts) > 2:
            x += cnts[-2]
        cnts.append(x)
    return cnts


def make_case(name, height, width, pixels):
    runs = encode_runs(pixels)
    counts = rle_to_string(runs)
    # reference self-checks
    assert rle_from_string(counts) == runs, name
    assert decode_runs(runs, height * width) == [1 if v else 0 for v in pixels], name
    assert all(ord(ch) in range(48, 112) for ch in counts), name
    return {
        "name": name,
        "height": height,
        "width": width,
        "runs": runs,
        "counts": counts,
    }


def rect_pixels(h, w, x0, y0, rw, rh):
    """Column-major pixels for a rectangle [x0, x0+rw) x [y0, y0+rh)."""
    return [
        1 if (x0 <= x < x0 + rw and y0 <= y < y0 + rh) else 0
        for x in range(w)
        for y in range(h)
    ]


def main():
    rng = random.Random(20240811)
    cases = []

    # Edge cases
    cases.append(make_case("all_background_4x4", 4, 4, [0] * 16))
    cases.append(make_case("all_foreground_4x4", 4, 4, [1] * 16))
    cases.append(make_case("single_pixel_origin_3x3", 3, 3, [1] + [0] * 8))
    cases.append(make_case("single_pixel_last_3x3", 3, 3, [0] * 8 + [1]))
    cases.append(make_case("runs_6_4_6_4x4", 4, 4, [0] * 6 + [1] * 4 + [0] * 6))
    cases.append(make_case("alternating_1x4", 1, 4, [0, 1, 0, 1]))
    cases.append(
        make_case("alternating_dense_5x5", 5, 5, [(i % 2) for i in range(25)])
    )
    cases.append(make_case("single_column_16x1", 16, 1, [0] * 5 + [1] * 6 + [0] * 5))
    cases.append(make_case("single_row_1x16", 1, 16, [0] * 5 + [1] * 6 + [0] * 5))
    cases.append(make_case("tall_256x1_full", 256, 1, [1] * 256))
    cases.append(make_case("wide_1x256_stripes", 1, 256, [(i // 7) % 2 for i in range(256)]))
    cases.append(make_case("rect_5x5_in_12x10", 12, 10, rect_pixels(12, 10, 2, 3, 5, 5)))
    # long-run case: counts large enough to need several 6-bit chunks
    cases.append(
        make_case("big_rect_200x150", 200, 150, rect_pixels(200, 150, 10, 20, 100, 120))
    )

    # Random masks across sizes and densities
    sizes = [(3, 5), (7, 7), (13, 9), (31, 17), (64, 64), (100, 200), (256, 256), (255, 31)]
    densities = [0.05, 0.5, 0.95]
    for h, w in sizes:
        for d in densities:
            pixels = [1 if rng.random() < d else 0 for _ in range(h * w)]
            cases.append(make_case(f"random_{h}x{w}_d{int(d * 100)}", h, w, pixels))

    # Random rectangles (exercise long runs and negative stride-2 deltas)
    for i in range(6):
        h = rng.randint(8, 128)
        w = rng.randint(8, 128)
        rw = rng.randint(1, w)
        rh = rng.randint(1, h)
        x0 = rng.randint(0, w - rw)
        y0 = rng.randint(0, h - rh)
        cases.append(make_case(f"random_rect_{i}", h, w, rect_pixels(h, w, x0, y0, rw, rh)))

    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = os.path.join(root, "crates", "core", "tests", "fixtures")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "rle_reference.json")
    with open(path, "w") as f:
        json.dump({"cases": cases}, f, indent=1)
    print(f"wrote {path}: {len(cases)} cases")

    # A small SAM-style mask-record file whose counts strings come from the
    # reference encoder. Image is 32 high x 24 wide.
    h, w = 32, 24
    blobs = [
        ("kept_high_quality", rect_pixels(h, w, 2, 3, 8, 10), 0.99, 0.97),
        ("kept_at_exact_thresholds", rect_pixels(h, w, 14, 5, 6, 6), 0.86, 0.92),
        ("dropped_low_pred_iou", rect_pixels(h, w, 4, 18, 10, 9), 0.80, 0.95),
        ("dropped_low_stability", rect_pixels(h, w, 16, 20, 5, 8), 0.95, 0.90),
        ("kept_small", rect_pixels(h, w, 0, 0, 2, 2), 1.05, 1.0),
        ("dropped_both_low", rect_pixels(h, w, 20, 1, 3, 3), 0.50, 0.50),
    ]
    records = []
    expected_kept_default = []
    expected_kept_nofilter = []
    for idx, (label, pixels, pred_iou, stability) in enumerate(blobs):
        runs = encode_runs(pixels)
        counts = rle_to_string(runs)
        area = sum(pixels)
        xs = [i // h for i, v in enumerate(pixels) if v]
        ys = [i % h for i, v in enumerate(pixels) if v]
        bbox = [min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1]
        records.append(
            {
                "segmentation": {"size": [h, w], "counts": counts},
                "area": area,
                "bbox": bbox,
                "predicted_iou": pred_iou,
                "stability_score": stability,
            }
        )
        expected_kept_nofilter.append(idx)
        if pred_iou >= 0.86 and stability >= 0.92:
            expected_kept_default.append(idx)

    out_cli = os.path.join(root, "crates", "cli", "tests", "fixtures")
    os.makedirs(out_cli, exist_ok=True)
    path = os.path.join(out_cli, "sam_records.json")
    with open(path, "w") as f:
        json.dump(records, f, indent=1)
    print(f"wrote {path}: {len(records)} records")
    meta = {
        "height": h,
        "width": w,
        "kept_default": expected_kept_default,
        "kept_nofilter": expected_kept_nofilter,
        "labels": [b[0] for b in blobs],
    }
    path = os.path.join(out_cli, "sam_records_expected.json")
    with open(path, "w") as f:
        json.dump(meta, f, indent=1)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
