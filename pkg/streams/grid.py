"""Global 25 Hz frame clock shared by every stream."""

import math
from dataclasses import dataclass

from config.environments.base import GridSettings
from exceptions import ConfigurationError, FrameDomainError

# Products within this many frames of an integer are treated as that integer,
# so 0.28 s * 25 lands on frame 7 rather than 7.000000000000001.
FRAME_SNAP = 1e-9


@dataclass(frozen=True)
class FrameGrid:
    """Frame arithmetic for the 40 ms time base.

    Attributes:
        frame_duration: Seconds per frame
        fps: Frames per second
        recognition_delay: Text-stream delay d in frames
    """

    frame_duration: float = 0.040
    fps: int = 25
    recognition_delay: int = 25

    def __post_init__(self):
        if abs(self.fps * self.frame_duration - 1.0) > 1e-12:
            raise ConfigurationError(
                "fps * frame_duration must equal 1",
                details={"fps": self.fps, "frame_duration": self.frame_duration},
            )
        if self.recognition_delay < 0:
            raise ConfigurationError("recognition_delay must be >= 0")

    @classmethod
    def from_settings(cls, settings: GridSettings) -> "FrameGrid":
        return cls(settings.frame_duration, settings.fps, settings.recognition_delay)

    def _scaled(self, t: float) -> float:
        if t < 0:
            raise FrameDomainError(t)
        x = t * self.fps
        nearest = round(x)
        if abs(x - nearest) < FRAME_SNAP:
            return float(nearest)
        return x

    def frame_ceil(self, t: float) -> int:
        """Frame index ceil(t * fps)."""
        return int(math.ceil(self._scaled(t)))

    def frame_floor(self, t: float) -> int:
        """Frame index floor(t * fps)."""
        return int(math.floor(self._scaled(t)))

    def to_seconds(self, frame: int) -> float:
        return frame * self.frame_duration

    def samples_per_frame(self, sample_rate: int) -> int:
        if sample_rate % self.fps != 0:
            raise ConfigurationError(
                f"sample rate {sample_rate} is not divisible by fps {self.fps}",
            )
        return sample_rate // self.fps

    def frames_for(self, duration: float) -> int:
        """Frames needed to cover `duration` seconds."""
        return self.frame_ceil(duration)

    def with_delay(self, delay: int) -> "FrameGrid":
        return FrameGrid(self.frame_duration, self.fps, delay)
