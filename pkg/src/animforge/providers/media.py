"""PNG and frame-directory IO, plus the couple of raster helpers
(nearest-neighbour resize, horizontal tiling) the pipeline needs.

A clip on disk is a directory holding meta.json ({fps, frame_count,
width, height}) and a frames/ subdirectory of zero-padded frame_0000.png
files. read_clip also accepts a bare directory of frame_*.png (the final
spliced frames live that way, with their metadata in the manifest).
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .base import FrameSequence, Image

FRAME_NAME = "frame_{:04d}.png"
META_NAME = "meta.json"


def png_bytes(image: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(np.asarray(image.pixels), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def image_from_png(data: bytes) -> Image:
    with PILImage.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return Image.from_array(arr)


def mask_png_bytes(bitmap: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray((bitmap.astype(np.uint8) * 255), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def clip_to_files(clip: FrameSequence) -> dict[str, bytes]:
    """Relative-path -> bytes mapping for one clip directory."""
    files = {
        f"frames/{FRAME_NAME.format(i)}": png_bytes(frame)
        for i, frame in enumerate(clip.frames)
    }
    meta = {
        "fps": clip.fps,
        "frame_count": clip.frame_count,
        "width": clip.frames[0].width,
        "height": clip.frames[0].height,
    }
    files[META_NAME] = (json.dumps(meta, sort_keys=True, indent=2) + "\n").encode()
    return files


def write_clip(directory: str | Path, clip: FrameSequence) -> None:
    directory = Path(directory)
    for name, data in clip_to_files(clip).items():
        path = directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)


def read_clip(directory: str | Path) -> FrameSequence:
    directory = Path(directory)
    meta_path = directory / META_NAME
    frames_dir = directory / "frames"
    if not frames_dir.is_dir():
        frames_dir = directory
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        fps = float(meta["fps"])
        count = int(meta["frame_count"])
        names = [FRAME_NAME.format(i) for i in range(count)]
    else:
        fps = 8.0
        names = sorted(p.name for p in frames_dir.glob("frame_*.png"))
        if not names:
            raise FileNotFoundError(f"no frames in {directory}")
    frames = tuple(image_from_png((frames_dir / n).read_bytes()) for n in names)
    return FrameSequence(frames=frames, fps=fps)


def resize_nearest(image: Image, width: int, height: int) -> Image:
    """Deterministic nearest-neighbour resize (index = i*src//dst)."""
    rows = (np.arange(height) * image.height) // height
    cols = (np.arange(width) * image.width) // width
    return Image.from_array(np.asarray(image.pixels)[rows][:, cols])


def tile_row(images: list[Image]) -> Image:
    """Tile equally sized images left to right into one composite."""
    if not images:
        raise ValueError("nothing to tile")
    h = images[0].height
    if any(im.height != h or im.width != images[0].width for im in images):
        raise ValueError("tiles must share dimensions")
    return Image.from_array(np.concatenate([im.pixels for im in images], axis=1))
