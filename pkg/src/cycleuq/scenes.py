"""Synthetic ground-truth scenes and dataset assembly.

Three structurally distinct image classes stand in for real datasets:
band-limited random fields, geometric shapes on gradient backgrounds,
and fine checkerboards with glyph-like strokes. The classes occupy
deliberately different intensity bands so their per-image statistics are
separable, which the cross-class OOD protocol relies on.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .image import write_pgm, write_raw
from .noise import add_gaussian, add_snp
from .operators import apply_forward
from .rng import make_rng
from .validation import is_power_of_two

SCENE_CLASSES = ("smooth_field", "shapes", "checker_text")
OOD_SIGMA_THRESHOLD = 0.01


@dataclass(frozen=True)
class SceneSpec:
    class_id: str
    size: int
    seed: int

    def __post_init__(self):
        if self.class_id not in SCENE_CLASSES:
            raise DataError(f"unknown scene class {self.class_id!r}")
        if not is_power_of_two(self.size) or self.size < 32:
            raise DataError(f"scene size must be a power of two >= 32, got {self.size}")


def generate_scene(spec: SceneSpec) -> np.ndarray:
    rng = make_rng(spec.seed, SCENE_CLASSES.index(spec.class_id), spec.size)
    if spec.class_id == "smooth_field":
        return _smooth_field(rng, spec.size)
    if spec.class_id == "shapes":
        return _shapes(rng, spec.size)
    return _checker_text(rng, spec.size)


def _smooth_field(rng, size: int) -> np.ndarray:
    """Band-limited field: white noise with all radial frequencies at or
    above size/8 removed, weighted toward the top of the passband. Mean
    brightness and swing vary widely image to image."""
    noise = rng.standard_normal((size, size))
    spectrum = np.fft.fft2(noise)
    freq = np.fft.fftfreq(size) * size
    radius = np.sqrt(freq[:, None] ** 2 + freq[None, :] ** 2)
    # flat annular passband, safely inside the size/8 limit
    hi_cut = 0.75 * size / 8.0
    lo_cut = 0.6 * size / 8.0
    weight = np.where((radius >= lo_cut) & (radius < hi_cut), 1.0, 0.0)
    weight[0, 0] = 0.0
    field = np.real(np.fft.ifft2(spectrum * weight))
    lo, hi = field.min(), field.max()
    centered = (field - lo) / (hi - lo) - 0.5
    mean = rng.uniform(0.25, 0.45)
    swing = rng.uniform(0.5, 0.8)
    return np.clip(mean + swing * centered, 0.0, 1.0)


def _shapes(rng, size: int) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    ramp = (np.cos(theta) * xs + np.sin(theta) * ys) / size
    ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min())
    img = 0.25 + 0.35 * ramp + rng.uniform(0.0, 0.15)
    for _ in range(int(rng.integers(2, 8))):
        cy, cx = rng.uniform(0.1 * size, 0.9 * size, size=2)
        intensity = rng.uniform(0.7, 1.0) if rng.random() < 0.7 else rng.uniform(0.05, 0.2)
        if rng.random() < 0.5:
            r = rng.uniform(0.08 * size, 0.26 * size)
            dist = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
            coverage = np.clip(r + 0.5 - dist, 0.0, 1.0)
        else:
            hh = rng.uniform(0.08 * size, 0.24 * size)
            hw = rng.uniform(0.08 * size, 0.24 * size)
            cov_y = np.clip(hh + 0.5 - np.abs(ys - cy), 0.0, 1.0)
            cov_x = np.clip(hw + 0.5 - np.abs(xs - cx), 0.0, 1.0)
            coverage = cov_y * cov_x
        img = img * (1.0 - coverage) + intensity * coverage
    # wide per-image brightness and contrast so edge energy and overall
    # level vary image to image
    mean = rng.uniform(0.45, 0.75)
    contrast = rng.uniform(0.3, 1.0)
    img = mean + contrast * (img - img.mean())
    return np.clip(img, 0.0, 1.0)


def _checker_text(rng, size: int) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    cell = 4
    parity = ((ys // cell) + (xs // cell)) % 2
    depth = rng.uniform(0.22, 0.28)
    img = np.where(parity == 0, -0.5 * depth, 0.5 * depth).astype(np.float64)
    for _ in range(int(rng.integers(8, 15))):
        r0, c0 = rng.uniform(2, size - 3, size=2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(4.0, 12.0)
        ink = rng.uniform(0.35, 0.55)
        steps = max(2, int(length * 2))
        for j in range(steps + 1):
            t = j / steps
            rr = int(round(r0 + t * length * np.sin(angle)))
            cc = int(round(c0 + t * length * np.cos(angle)))
            if 0 <= rr < size and 0 <= cc < size:
                img[rr, cc] = ink
    mean = rng.uniform(0.35, 0.60)
    return np.clip(mean + img, 0.0, 1.0)


def ood_label(noise_kind: str, sigma: float) -> int:
    """1 (OOD) when the corruption level reaches the threshold, else 0."""
    if noise_kind == "none":
        return 0
    return 1 if sigma >= OOD_SIGMA_THRESHOLD else 0


def _draw_sigma(rng, sigma_spec) -> float:
    if isinstance(sigma_spec, (int, float)):
        return float(sigma_spec)
    if isinstance(sigma_spec, tuple) and len(sigma_spec) == 2:
        return float(rng.uniform(sigma_spec[0], sigma_spec[1]))
    if isinstance(sigma_spec, list) and sigma_spec:
        return float(sigma_spec[int(rng.integers(0, len(sigma_spec)))])
    raise DataError(f"bad sigma spec {sigma_spec!r}")


def _apply_noise(x, kind: str, sigma: float, seed: int) -> np.ndarray:
    if kind == "gaussian":
        return add_gaussian(x, sigma, seed)
    if kind == "snp":
        return add_snp(x, sigma, seed)
    if kind == "none":
        return x.copy()
    raise DataError(f"unknown noise kind {kind!r}")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def build_dataset(out_dir, classes, counts, noise_specs, forward, seed: int,
                  size: int = 64, scene_seed_base: int = 0,
                  extras=None) -> list[dict]:
    """Generate scenes, push them through the forward model, corrupt, and
    write measurement/truth pairs plus a JSON-lines manifest.

    `classes`, `counts`, `noise_specs` are parallel per-group lists; each
    noise spec is {kind, sigma, label?} where sigma may be a constant, a
    (lo, hi) range, or a list of discrete choices. Without an explicit
    label the corruption-threshold rule decides ID vs OOD. `forward` is a
    single spec or one per group, and `extras` optionally adds per-group
    fields to the manifest rows.
    """
    if not (len(classes) == len(counts) == len(noise_specs)):
        raise DataError("classes, counts and noise_specs must have equal length")
    if any(c < 1 for c in counts):
        raise DataError("group counts must be >= 1")
    forwards = forward if isinstance(forward, (list, tuple)) else [forward] * len(classes)
    if len(forwards) != len(classes):
        raise DataError("forward list must match the number of groups")
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    rows = []
    index = 0
    for gi, (cls, count, nspec) in enumerate(zip(classes, counts, noise_specs)):
        kind = nspec["kind"]
        for i in range(count):
            scene = generate_scene(SceneSpec(
                class_id=cls, size=size,
                seed=hash_ints(seed, scene_seed_base, gi, i)))
            clean = apply_forward(scene, forwards[gi])
            rng = make_rng(seed, 17, gi, i)
            sigma = _draw_sigma(rng, nspec["sigma"])
            measurement = _apply_noise(clean, kind, sigma, hash_ints(seed, 23, gi, i))
            label = nspec.get("label")
            if label is None:
                label = ood_label(kind, sigma)
            stem = f"{index:05d}_{cls}"
            x_path = os.path.join(img_dir, stem + ".cgf1")
            gt_path = os.path.join(img_dir, stem + "_gt.cgf1")
            write_raw(x_path, measurement)
            write_raw(gt_path, scene)
            write_pgm(os.path.join(img_dir, stem + ".pgm"), np.clip(measurement, 0, 1))
            row = {
                "path": x_path,
                "class": cls,
                "sigma": sigma,
                "noise_kind": kind,
                "label": int(label),
                "ground_truth_path": gt_path,
                "sha256": _sha256(x_path),
            }
            if extras is not None and extras[gi]:
                row.update(extras[gi])
            rows.append(row)
            index += 1
    save_manifest(os.path.join(out_dir, "manifest.jsonl"), rows)
    return rows


def hash_ints(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def save_manifest(path, rows) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_manifest(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def verify_manifest(rows) -> bool:
    """Recompute every referenced file hash against the recorded one."""
    return all(_sha256(row["path"]) == row["sha256"] for row in rows)
