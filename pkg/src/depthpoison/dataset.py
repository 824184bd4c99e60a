"""On-disk dataset layout shared by the scene generator and the poisoner.

A dataset root contains ``images/``, ``depth/``, ``masks/`` directories
with zero-padded numeric filenames and a plain-text ``index.txt``:

    # depthpoison-index v1
    # split=train
    # columns: sample_id image depth mask
    000000 images/000000.png depth/000000.png masks/000000.png

The mask column is ``-`` for samples without masks. Paths are relative
to the root, ordering is by sample_id, and ids are unique.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DatasetError
from .io import read_depth_png, read_image_png, read_mask_png

INDEX_NAME = "index.txt"
_HEADER = "# depthpoison-index v1"


@dataclass(frozen=True)
class DatasetSample:
    sample_id: str
    image: str
    depth: str
    mask: str | None


@dataclass
class DatasetIndex:
    root: Path
    split: str = "train"
    samples: list[DatasetSample] = field(default_factory=list)

    def image_path(self, s: DatasetSample) -> Path:
        return self.root / s.image

    def depth_path(self, s: DatasetSample) -> Path:
        return self.root / s.depth

    def mask_path(self, s: DatasetSample) -> Path | None:
        return self.root / s.mask if s.mask else None

    def by_id(self, sample_id: str) -> DatasetSample:
        for s in self.samples:
            if s.sample_id == sample_id:
                return s
        raise DatasetError(f"unknown sample_id {sample_id!r}")

    def save(self) -> Path:
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate sample ids in index")
        lines = [_HEADER, f"# split={self.split}", "# columns: sample_id image depth mask"]
        for s in sorted(self.samples, key=lambda s: s.sample_id):
            lines.append(f"{s.sample_id} {s.image} {s.depth} {s.mask or '-'}")
        path = self.root / INDEX_NAME
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path | str) -> "DatasetIndex":
        path = Path(path)
        if path.is_dir():
            path = path / INDEX_NAME
        if not path.is_file():
            raise DatasetError(f"index file not found: {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != _HEADER:
            raise DatasetError(f"not a depthpoison index: {path}")
        split = "train"
        samples = []
        for line in lines[1:]:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# split="):
                    split = line.split("=", 1)[1].strip()
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DatasetError(f"malformed index line: {line!r}")
            sid, image, depth, mask = parts
            samples.append(DatasetSample(sid, image, depth, None if mask == "-" else mask))
        return cls(root=path.parent, split=split, samples=samples)

    def validate(self, check_dims: bool = True) -> None:
        """Check uniqueness, file existence, and per-sample dimension agreement."""
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate sample ids in index")
        for s in self.samples:
            for rel in (s.image, s.depth, s.mask):
                if rel and not (self.root / rel).is_file():
                    raise DatasetError(f"missing file for sample {s.sample_id}: {rel}")
            if check_dims:
                img = read_image_png(self.image_path(s))
                dep = read_depth_png(self.depth_path(s))
                if img.shape[:2] != dep.shape:
                    raise DatasetError(f"image/depth shape mismatch for {s.sample_id}")
                if s.mask:
                    m = read_mask_png(self.mask_path(s))
                    if m.shape != dep.shape:
                        raise DatasetError(f"mask shape mismatch for {s.sample_id}")


def sample_id_for(i: int) -> str:
    return f"{i:06d}"


def make_dirs(root: Path) -> None:
    for d in ("images", "depth", "masks"):
        (root / d).mkdir(parents=True, exist_ok=True)
