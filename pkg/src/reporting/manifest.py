"""
Run manifest: what was run, with which inputs, and checksums of what it wrote.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

from .documents import read_document, write_document

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.yaml"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    scenario: Optional[str] = None
    overrides: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "output"
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def path(self) -> Path:
        return Path(self.output_dir) / MANIFEST_NAME

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "overrides": dict(self.overrides),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "artifacts": dict(sorted(self.artifacts.items())),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RunManifest":
        return cls(
            command=data["command"],
            scenario=data.get("scenario"),
            overrides=dict(data.get("overrides") or {}),
            seed=int(data.get("seed", 0)),
            output_dir=data.get("output_dir", "output"),
            artifacts=dict(data.get("artifacts") or {}),
        )

    def write(self) -> Path:
        return write_document(self.path, self.to_dict())

    def record(self, artifact: Union[str, Path]):
        """Checksum an artifact written under the output directory."""
        artifact = Path(artifact)
        name = str(artifact.relative_to(self.output_dir)) if artifact.is_relative_to(self.output_dir) else str(artifact)
        self.artifacts[name] = sha256_file(artifact)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.from_dict(read_document(path))

    def verify(self) -> Dict[str, bool]:
        """Artifact name -> whether its current checksum matches."""
        out = {}
        for name, digest in self.artifacts.items():
            target = Path(self.output_dir) / name
            out[name] = target.exists() and sha256_file(target) == digest
        return out
