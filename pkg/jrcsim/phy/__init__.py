from .channel_sim import (
    ChannelOperator,
    ChannelRealization,
    TargetTruth,
    apply_channel,
    draw_targets,
)
from .codec import CodecSpec, decode, encode
from .comm_receiver import CommReceiver
from .frame_builder import (
    ChirpSpec,
    ComplexFrame,
    FrameSpec,
    OfdmSpec,
    synth_frame,
)
from .radar_receiver import RadarReceiver, RadarSettings

__all__ = [
    "ChannelOperator",
    "ChannelRealization",
    "TargetTruth",
    "apply_channel",
    "draw_targets",
    "CodecSpec",
    "decode",
    "encode",
    "CommReceiver",
    "ChirpSpec",
    "ComplexFrame",
    "FrameSpec",
    "OfdmSpec",
    "synth_frame",
    "RadarReceiver",
    "RadarSettings",
]
