"""Disk formats: episode datasets, checkpoints, run manifests, loss curves.

Episodes live one-per-directory: lossless 8-bit PNGs for both cameras,
float32 .npy depth stacks, and a JSON manifest holding the instruction,
actions, labels, poses, keyframes, and timestamps. Checkpoints use a small
versioned binary container (JSON header + raw array payload) whose bytes
are a pure function of its contents, so identical training runs produce
identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import FLOAT, CameraPose
from .scenesim.render import FrameObservation
from .scenesim.sim import Action

MAGIC = b"VSKC"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# images


def save_image(path, rgb):
    """Write an (H, W, 3) float image in [0, 1] as 8-bit PNG."""
    arr = np.clip(np.asarray(rgb), 0.0, 1.0)
    img = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8))
    img.save(str(path), format="PNG")


def load_image(path):
    """Read a PNG back to float64 in [0, 1]."""
    with Image.open(str(path)) as img:
        arr = np.asarray(img.convert("RGB"), dtype=FLOAT)
    return arr / 255.0


# ---------------------------------------------------------------------------
# pose records


def pose_record(pose: CameraPose) -> dict:
    return {
        "position": [float(x) for x in pose.position],
        "orientation": [float(x) for x in pose.orientation],
        "intrinsics": [float(x) for x in pose.intrinsics],
        "resolution": [int(x) for x in pose.resolution],
    }


def pose_from_record(rec: dict) -> CameraPose:
    return CameraPose(
        position=np.array(rec["position"], dtype=FLOAT),
        orientation=np.array(rec["orientation"], dtype=FLOAT),
        intrinsics=tuple(rec["intrinsics"]),
        resolution=tuple(rec["resolution"]),
    )


# ---------------------------------------------------------------------------
# checkpoint container


def save_checkpoint(path, kind: str, config: dict, arrays: dict):
    """Versioned binary container: magic, JSON header, contiguous blobs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = sorted(arrays)
    index = {}
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        raw = arr.tobytes()
        index[name] = {"dtype": str(arr.dtype), "shape": list(arr.shape),
                       "offset": offset, "nbytes": len(raw)}
        offset += len(raw)
        blobs.append(raw)
    header = json.dumps({"format_version": FORMAT_VERSION, "kind": kind,
                         "config": config, "arrays": index},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path):
    """Returns (kind, config, arrays)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint container")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['format_version']}")
        payload = f.read()
    arrays = {}
    for name, meta in header["arrays"].items():
        raw = payload[meta["offset"]:meta["offset"] + meta["nbytes"]]
        arrays[name] = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(
            meta["shape"]).copy()
    return header["kind"], header["config"], arrays


# ---------------------------------------------------------------------------
# episodes


def save_episode(directory, demo, extras: dict | None = None):
    """Persist one demonstration: PNGs, depth stacks, JSON manifest."""
    directory = Path(directory)
    (directory / "to_hand").mkdir(parents=True, exist_ok=True)
    (directory / "in_hand").mkdir(parents=True, exist_ok=True)
    depth_to, depth_in = [], []
    for t, (f_to, f_in) in enumerate(zip(demo.frames_to_hand, demo.frames_in_hand)):
        save_image(directory / "to_hand" / f"frame_{t:05d}.png", f_to.rgb)
        save_image(directory / "in_hand" / f"frame_{t:05d}.png", f_in.rgb)
        depth_to.append(f_to.depth.astype(np.float32))
        depth_in.append(f_in.depth.astype(np.float32))
    np.save(directory / "depth_to_hand.npy", np.stack(depth_to) if depth_to
            else np.zeros((0, 0, 0), dtype=np.float32))
    np.save(directory / "depth_in_hand.npy", np.stack(depth_in) if depth_in
            else np.zeros((0, 0, 0), dtype=np.float32))
    manifest = {
        "instruction": demo.instruction,
        "success": bool(demo.success),
        "actions": [[float(x) for x in a.as_vector()] for a in demo.actions],
        "skill_labels": list(demo.skill_labels),
        "timestamps": list(range(len(demo.actions))),
        "poses_to_hand": [pose_record(f.pose) for f in demo.frames_to_hand],
        "poses_in_hand": [pose_record(f.pose) for f in demo.frames_in_hand],
    }
    manifest.update(extras or {})
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1,
                                                        sort_keys=True))


def load_episode(directory):
    """Rebuild a Demonstration (plus manifest extras) from an episode directory."""
    from .scenesim.expert import Demonstration

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    depth_to = np.load(directory / "depth_to_hand.npy")
    depth_in = np.load(directory / "depth_in_hand.npy")
    frames_to, frames_in = [], []
    n = len(manifest["actions"])
    for t in range(n):
        rgb_to = load_image(directory / "to_hand" / f"frame_{t:05d}.png")
        rgb_in = load_image(directory / "in_hand" / f"frame_{t:05d}.png")
        frames_to.append(FrameObservation(
            rgb=rgb_to, depth=depth_to[t].astype(FLOAT),
            pose=pose_from_record(manifest["poses_to_hand"][t]), timestep=t))
        frames_in.append(FrameObservation(
            rgb=rgb_in, depth=depth_in[t].astype(FLOAT),
            pose=pose_from_record(manifest["poses_in_hand"][t]), timestep=t))
    demo = Demonstration(
        instruction=manifest["instruction"],
        frames_to_hand=tuple(frames_to),
        frames_in_hand=tuple(frames_in),
        actions=tuple(Action.from_vector(v) for v in manifest["actions"]),
        skill_labels=tuple(manifest["skill_labels"]),
        success=manifest["success"],
    )
    return demo, manifest


EPISODE_MANIFEST_KEYS = ("instruction", "success", "actions", "skill_labels",
                         "timestamps", "poses_to_hand", "poses_in_hand")


def validate_episode(directory):
    """Schema check; raises ValueError on any inconsistency."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    for key in EPISODE_MANIFEST_KEYS:
        if key not in manifest:
            raise ValueError(f"{directory}: manifest missing {key!r}")
    n = len(manifest["actions"])
    for key in ("skill_labels", "timestamps", "poses_to_hand", "poses_in_hand"):
        if len(manifest[key]) != n:
            raise ValueError(f"{directory}: {key} length != actions length")
    for cam in ("to_hand", "in_hand"):
        pngs = sorted((directory / cam).glob("frame_*.png"))
        if len(pngs) != n:
            raise ValueError(f"{directory}: {cam} frame count != actions length")
        depth = np.load(directory / f"depth_{cam}.npy")
        if depth.shape[0] != n:
            raise ValueError(f"{directory}: depth_{cam} count != actions length")
        if depth.dtype != np.float32:
            raise ValueError(f"{directory}: depth must be float32")
    return manifest


# ---------------------------------------------------------------------------
# run manifests


def content_hash(root) -> str:
    """SHA-256 over all file bytes under root (sorted by relative path),
    excluding run manifests themselves."""
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        if path.name == "run_manifest.jsonl":
            continue
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def append_run_manifest(out_dir, command: str, config: dict, seeds: dict,
                        artifacts, inputs_hash: str | None = None,
                        wall_clock_s: float | None = None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs_hash": inputs_hash,
        "artifacts": [str(a) for a in artifacts],
        "wall_clock_s": wall_clock_s if wall_clock_s is not None else None,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(out_dir / "run_manifest.jsonl", "a") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")
    return record


def read_run_manifest(out_dir):
    path = Path(out_dir) / "run_manifest.jsonl"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# loss curves


def write_loss_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{x:.10g}" if isinstance(x, float) else str(x)
                              for x in row))
    path.write_text("\n".join(lines) + "\n")


def read_loss_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header, rows
