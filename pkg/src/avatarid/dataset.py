"""Dataset manifests, the gallery/probe split, and a synthetic face generator.

The manifest JSON schema is::

    {"root": str, "entries": [{"subject": str, "set": str, "path": str,
                               "eyes": [[x, y], [x, y]] | null}]}

``root`` is resolved against the manifest file's directory, entry paths
against ``root``. The frontal set-A entry of each subject is the gallery
image; everything else is a probe.

The synthetic generator renders labeled procedural faces (elliptical head,
hair band, two eyes, nose, mouth) so that identification and avatar
experiments can run without any external imagery. Renders are deterministic
functions of (spec, size) and ship with analytic eye coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ProtocolError
from .imaging import RawImage, save_image

# Subject parameter vector layout and bounds. Aspect and skin luma are drawn
# from the interiors of their category bands (see below) so that attribute
# classification has clean ground truth; the outer bounds here are what the
# invariant check enforces.
PARAM_NAMES = (
    "face_aspect",      # head width / head height
    "eye_spacing",      # inter-ocular distance / head width
    "eye_size",         # iris radius / head half-width
    "nose_length",      # nose tip drop / head half-height
    "mouth_width",      # mouth half-width / head half-width
    "skin_r",
    "skin_g",
    "skin_b",
    "hair_darkness",    # hair = skin * (1 - darkness)
)
PARAM_BOUNDS = {
    "face_aspect": (0.85, 1.22),
    "eye_spacing": (0.62, 0.72),
    "eye_size": (0.07, 0.12),
    "nose_length": (0.25, 0.50),
    "mouth_width": (0.28, 0.50),
    "skin_r": (60.0, 250.0),
    "skin_g": (50.0, 230.0),
    "skin_b": (30.0, 210.0),
    "hair_darkness": (0.20, 0.55),
}

# Face-shape categories are sampled from these aspect bands (gaps around the
# 0.95 / 1.05 classifier thresholds) and skin tone from these luma bands
# (gaps around 132 / 168), which is what makes attribute recovery a designed
# property rather than a coin flip at the boundaries.
ASPECT_BANDS = {"long": (0.85, 0.91), "oval": (0.98, 1.02), "round": (1.09, 1.22)}
LUMA_BANDS = {"dark": (95.0, 127.0), "medium": (137.0, 163.0), "light": (173.0, 205.0)}

POSE_LIMIT_DEG = 30.0
# Minimum pairwise L2 distance (bounds-normalized parameter space) that
# stratified_seeds guarantees between accepted subjects.
MIN_SUBJECT_DISTANCE = 0.25

_BG_COLOR = (26, 26, 32)
_IRIS_COLOR = (8, 6, 6)
_SCLERA_COLOR = (238, 236, 230)
_MOUTH_COLOR = (150, 62, 66)


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    pose_set: str
    path: Path
    eyes: tuple[tuple[float, float], tuple[float, float]] | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path

    def subjects(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        seen = dict.fromkeys(e.subject_id for e in self.entries)
        return list(seen)


def load_manifest(path) -> DatasetManifest:
    """Load and validate a manifest JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "entries" not in doc:
        raise FormatError(f"{path}: manifest must be an object with 'entries'")
    root = path.parent / doc.get("root", ".")
    entries = []
    seen_pairs = set()
    raw_entries = doc["entries"]
    if not isinstance(raw_entries, list):
        raise FormatError(f"{path}: 'entries' must be a list")
    for i, e in enumerate(raw_entries):
        if not isinstance(e, dict):
            raise FormatError(f"{path}: entry {i} is not an object")
        subject = e.get("subject")
        pose_set = e.get("set")
        rel = e.get("path")
        if not isinstance(subject, str) or not subject:
            raise FormatError(f"{path}: entry {i} missing non-empty 'subject'")
        if not isinstance(pose_set, str) or not pose_set:
            raise FormatError(f"{path}: entry {i} missing non-empty 'set'")
        if not isinstance(rel, str) or not rel:
            raise FormatError(f"{path}: entry {i} missing 'path'")
        eyes = e.get("eyes")
        parsed_eyes = None
        if eyes is not None:
            parsed_eyes = _parse_eyes(eyes, f"{path}: entry {i}")
        key = (subject, rel)
        if key in seen_pairs:
            raise FormatError(f"{path}: duplicate (subject, path) pair {key}")
        seen_pairs.add(key)
        entries.append(ManifestEntry(subject, pose_set, root / rel, parsed_eyes))
    return DatasetManifest(entries, root)


def _parse_eyes(eyes, ctx: str):
    try:
        (lx, ly), (rx, ry) = eyes
        left = (float(lx), float(ly))
        right = (float(rx), float(ry))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{ctx}: 'eyes' must be [[x,y],[x,y]]") from exc
    if not left[0] < right[0]:
        raise FormatError(f"{ctx}: left eye must be left of right eye")
    if min(left + right) < 0:
        raise FormatError(f"{ctx}: eye coordinates must be non-negative")
    return (left, right)


def split_gallery_probe(m: DatasetManifest):
    """Fig.-style protocol: one set-A frontal per subject is the gallery
    (first in manifest order), every other entry is a probe."""
    gallery: dict[str, ManifestEntry] = {}
    probes: list[ManifestEntry] = []
    for e in m.entries:
        if e.pose_set == "A" and e.subject_id not in gallery:
            gallery[e.subject_id] = e
        else:
            probes.append(e)
    missing = [s for s in m.subjects() if s not in gallery]
    if missing:
        raise ProtocolError(f"subjects without a set-A entry: {missing}")
    return list(gallery.values()), probes


@dataclass(frozen=True)
class SynthFaceSpec:
    """Deterministic recipe for one rendered face."""

    seed: int
    subject_params: np.ndarray  # 9-vector, PARAM_NAMES order
    pose_deg: float = 0.0
    brightness_scale: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.subject_params, dtype=np.float64)
        if p.shape != (len(PARAM_NAMES),):
            raise FormatError(f"subject_params must have {len(PARAM_NAMES)} entries")
        object.__setattr__(self, "subject_params", p)
        for name, value in zip(PARAM_NAMES, p):
            lo, hi = PARAM_BOUNDS[name]
            if not lo <= value <= hi:
                raise FormatError(f"{name}={value} outside [{lo}, {hi}]")
        if not -POSE_LIMIT_DEG <= self.pose_deg <= POSE_LIMIT_DEG:
            raise FormatError(f"pose_deg {self.pose_deg} outside +/-{POSE_LIMIT_DEG}")

    def __getitem__(self, name: str) -> float:
        return float(self.subject_params[PARAM_NAMES.index(name)])

    def with_view(self, pose_deg: float, brightness_scale: float) -> "SynthFaceSpec":
        return SynthFaceSpec(self.seed, self.subject_params, pose_deg, brightness_scale)

    @property
    def shape_category(self) -> str:
        a = self["face_aspect"]
        if a < 0.95:
            return "long"
        if a > 1.05:
            return "round"
        return "oval"

    @property
    def tone_category(self) -> str:
        L = 0.299 * self["skin_r"] + 0.587 * self["skin_g"] + 0.114 * self["skin_b"]
        if L < 132.0:
            return "dark"
        if L >= 168.0:
            return "light"
        return "medium"


def _skin_rgb(rng) -> tuple[float, float, float, str]:
    tone = ("dark", "medium", "light")[rng.integers(3)]
    lo, hi = LUMA_BANDS[tone]
    target = rng.uniform(lo, hi)
    warm = rng.uniform(1.08, 1.22)
    blue = rng.uniform(0.55, 0.80)
    k = target / (0.299 * warm + 0.587 + 0.114 * blue)
    return k * warm, k, k * blue, tone


def synth_subject(seed: int) -> SynthFaceSpec:
    """Deterministic subject parameters for a seed (frontal view, unit
    brightness)."""
    rng = np.random.default_rng(seed)
    shape = ("long", "oval", "round")[rng.integers(3)]
    aspect = rng.uniform(*ASPECT_BANDS[shape])
    eye_spacing = rng.uniform(*PARAM_BOUNDS["eye_spacing"])
    eye_size = rng.uniform(*PARAM_BOUNDS["eye_size"])
    nose_length = rng.uniform(*PARAM_BOUNDS["nose_length"])
    mouth_width = rng.uniform(*PARAM_BOUNDS["mouth_width"])
    r, g, b, _ = _skin_rgb(rng)
    hair = rng.uniform(*PARAM_BOUNDS["hair_darkness"])
    params = np.array(
        [aspect, eye_spacing, eye_size, nose_length, mouth_width, r, g, b, hair]
    )
    return SynthFaceSpec(seed, params)


def _normalized_params(spec: SynthFaceSpec) -> np.ndarray:
    out = np.empty(len(PARAM_NAMES))
    for i, name in enumerate(PARAM_NAMES):
        lo, hi = PARAM_BOUNDS[name]
        out[i] = (spec.subject_params[i] - lo) / (hi - lo)
    return out


def parameter_distance(a: SynthFaceSpec, b: SynthFaceSpec) -> float:
    """L2 distance between bounds-normalized subject parameter vectors."""
    return float(np.linalg.norm(_normalized_params(a) - _normalized_params(b)))


def stratified_seeds(n: int, start: int = 0) -> list[int]:
    """First ``n`` seeds from ``start`` whose subjects keep a pairwise
    parameter distance of at least MIN_SUBJECT_DISTANCE (greedy scan)."""
    accepted: list[int] = []
    specs: list[SynthFaceSpec] = []
    seed = start
    while len(accepted) < n:
        cand = synth_subject(seed)
        if all(parameter_distance(cand, s) >= MIN_SUBJECT_DISTANCE for s in specs):
            accepted.append(seed)
            specs.append(cand)
        seed += 1
        if seed - start > 1000 * n + 1000:
            raise RuntimeError("stratified seed scan failed to converge")
    return accepted


# -- rendering ---------------------------------------------------------------
#
# All face geometry lives in "face space": an upright face centered on the
# pixel-grid center. A pose rotates face space about that center, and pixels
# are classified by mapping their centers back through the inverse rotation,
# so renders at different poses sample the same continuous face model and
# the analytic eye coordinates transform exactly.


def _layout(spec: SynthFaceSpec, w: int, h: int) -> dict:
    m = min(w, h)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    b = 0.38 * m                      # head half-height
    a = spec["face_aspect"] * b       # head half-width
    eye_y = cy - 0.25 * b
    eye_dx = spec["eye_spacing"] * a  # offset of each eye from the midline
    return {
        "cx": cx, "cy": cy, "a": a, "b": b,
        "eye_y": eye_y, "eye_dx": eye_dx,
        "iris_r": spec["eye_size"] * a,
        "nose_top": cy - 0.05 * b,
        "nose_tip": cy + spec["nose_length"] * b,
        "mouth_y": cy + 0.66 * b,
        "mouth_hw": spec["mouth_width"] * a,
        "hair_line": cy - 0.55 * b,
    }


def synth_eye_coords(spec: SynthFaceSpec, w: int, h: int):
    """Ground-truth (left, right) eye centers in image coordinates."""
    L = _layout(spec, w, h)
    th = math.radians(spec.pose_deg)
    c, s = math.cos(th), math.sin(th)

    def rot(x, y):
        dx, dy = x - L["cx"], y - L["cy"]
        return (L["cx"] + c * dx - s * dy, L["cy"] + s * dx + c * dy)

    left = rot(L["cx"] - L["eye_dx"], L["eye_y"])
    right = rot(L["cx"] + L["eye_dx"], L["eye_y"])
    if left[0] > right[0]:
        left, right = right, left
    return left, right


def render_synth_face(spec: SynthFaceSpec, w: int, h: int) -> RawImage:
    """Render the procedural RGB face described by ``spec`` at w x h."""
    if w < 64 or h < 64:
        raise FormatError("render target must be at least 64x64")
    L = _layout(spec, w, h)
    ix, iy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    th = math.radians(spec.pose_deg)
    c, s = math.cos(th), math.sin(th)
    dx, dy = ix - L["cx"], iy - L["cy"]
    # inverse rotation into face space
    fx = L["cx"] + c * dx + s * dy
    fy = L["cy"] - s * dx + c * dy

    skin = np.array([spec["skin_r"], spec["skin_g"], spec["skin_b"]])
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = _BG_COLOR

    head = ((fx - L["cx"]) / L["a"]) ** 2 + ((fy - L["cy"]) / L["b"]) ** 2 <= 1.0
    img[head] = skin

    hair = head & (fy < L["hair_line"])
    img[hair] = skin * (1.0 - spec["hair_darkness"])

    nose_len = L["nose_tip"] - L["nose_top"]
    in_rows = (fy >= L["nose_top"]) & (fy <= L["nose_tip"])
    half_w = 0.06 * L["a"] * np.clip((fy - L["nose_top"]) / nose_len, 0.0, 1.0)
    nose = in_rows & (np.abs(fx - L["cx"]) <= half_w)
    img[nose] = skin * 0.82

    mouth = ((fx - L["cx"]) / L["mouth_hw"]) ** 2 + \
            ((fy - L["mouth_y"]) / (0.05 * L["b"])) ** 2 <= 1.0
    img[mouth] = _MOUTH_COLOR

    for ex in (L["cx"] - L["eye_dx"], L["cx"] + L["eye_dx"]):
        sclera = ((fx - ex) / (2.2 * L["iris_r"])) ** 2 + \
                 ((fy - L["eye_y"]) / (1.8 * L["iris_r"])) ** 2 <= 1.0
        img[sclera] = _SCLERA_COLOR
        iris = (fx - ex) ** 2 + (fy - L["eye_y"]) ** 2 <= L["iris_r"] ** 2
        img[iris] = _IRIS_COLOR

    img *= spec.brightness_scale
    return RawImage(np.rint(np.clip(img, 0, 255)).astype(np.uint8))


# -- dataset emission --------------------------------------------------------

DEFAULT_RENDER_SIZE = 160


def write_synth_dataset(
    out_dir,
    n_subjects: int,
    sets=("A", "B", "C"),
    images_per_set: int = 4,
    seed: int = 0,
    pose_range=(-5.0, 5.0),
    brightness_range=(0.95, 1.05),
    size: int = DEFAULT_RENDER_SIZE,
) -> Path:
    """Render a labeled dataset: one set-A frontal per subject plus
    ``images_per_set`` perturbed probes for every other set. Returns the
    manifest path. Fully deterministic for a fixed seed."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    probe_sets = [s for s in sets if s != "A"]
    seeds = stratified_seeds(n_subjects, start=seed)
    entries = []

    def emit(subject, spec, set_label, index):
        name = f"{subject}_{set_label}{index}.png"
        img = render_synth_face(spec, size, size)
        save_image(img, out_dir / "images" / name)
        eyes = synth_eye_coords(spec, size, size)
        entries.append({
            "subject": subject,
            "set": set_label,
            "path": f"images/{name}",
            "eyes": [list(eyes[0]), list(eyes[1])],
        })

    for si, subj_seed in enumerate(seeds):
        subject = f"s{si:03d}"
        base = synth_subject(subj_seed)
        emit(subject, base, "A", 0)
        for set_i, set_label in enumerate(probe_sets):
            for img_i in range(images_per_set):
                rng = np.random.default_rng([seed, si, set_i, img_i])
                view = base.with_view(
                    pose_deg=rng.uniform(*pose_range),
                    brightness_scale=rng.uniform(*brightness_range),
                )
                emit(subject, view, set_label, img_i)

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps({"root": ".", "entries": entries}, indent=2) + "\n"
    )
    return manifest_path
