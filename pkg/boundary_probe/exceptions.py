"""
Exception hierarchy shared by every boundary_probe module
"""

from typing import Optional


class BoundaryProbeError(Exception):
    """Base class for all errors raised by boundary_probe"""


class ConfigError(BoundaryProbeError):
    """Invalid or unresolvable configuration"""


class IdxFormatError(BoundaryProbeError):
    """Malformed IDX file: bad magic, truncated payload or count mismatch"""


class ShapeMismatchError(BoundaryProbeError):
    """Input or parameter shape does not match the architecture"""


class TrainingDivergedError(BoundaryProbeError):
    """Training loss became NaN or infinite"""

    def __init__(self, epoch: int, seed: int, loss: Optional[float] = None):
        self.epoch = epoch
        self.seed = seed
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (seed {seed}, loss {loss})")


class ModelFormatError(BoundaryProbeError):
    """Unreadable model or image-block file"""


class EnsembleError(BoundaryProbeError):
    """Ensemble invariant violated (too few models, duplicate seeds, mixed architectures)"""


class AttackPreconditionError(BoundaryProbeError):
    """Clean image is not correctly classified by the target model, or target equals true class"""


class RegionError(BoundaryProbeError):
    """Hyper-rectangle cannot be built from the given intervals"""


class DataDownloadError(BoundaryProbeError):
    """Dataset archive could not be fetched"""


class MissingArtifactError(BoundaryProbeError):
    """A stage needs output an earlier stage has not written yet"""
