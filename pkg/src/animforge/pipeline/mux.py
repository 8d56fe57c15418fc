"""Optional container muxing.

The core pipeline deliberately stops at PNG frame sequences plus the
splice manifest; encoding a container video is delegated to an external
tool chosen per deployment (ffmpeg or similar). The command template is
argv parts with {frames}, {fps} and {output} placeholders, e.g.:

    ["ffmpeg", "-y", "-framerate", "{fps}",
     "-i", "{frames}/frame_%04d.png", "{output}"]
"""
from __future__ import annotations

import json
import subprocess
from pathlib import Path

from ..errors import CorruptWorkspace


def mux_final(
    workspace_root: str | Path,
    command_template: list[str],
    output: str = "final/animation.mp4",
) -> Path:
    root = Path(workspace_root)
    manifest_path = root / "final/manifest.json"
    if not manifest_path.is_file():
        raise CorruptWorkspace("no final/manifest.json; run the pipeline first")
    manifest = json.loads(manifest_path.read_text())
    out_path = root / output
    out_path.parent.mkdir(parents=True, exist_ok=True)
    command = [
        part.format(
            frames=str(root / "final/frames"),
            fps=manifest["fps"],
            output=str(out_path),
        )
        for part in command_template
    ]
    subprocess.run(command, check=True)
    return out_path
