"""Age of information in an IoT -> edge server -> vehicular fog pipeline.

Closed-form age analysis, a discrete-event simulator to check it, a slotted
offloading environment and from-scratch (dueling) DQN agents.
"""

from .channel import ChannelParams, PacketSpec
from .model import InfeasibleError, Source, SystemModel, symmetric_model

__all__ = ["ChannelParams", "PacketSpec", "InfeasibleError", "Source", "SystemModel", "symmetric_model"]
__version__ = "0.1.0"
