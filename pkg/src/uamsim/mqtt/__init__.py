"""A small MQTT 3.1.1 stack: codec, broker, client, and transports."""
from __future__ import annotations

from .packets import (
    Connect, ConnAck, Publish, PubAck, PubRec, PubRel, PubComp,
    Subscribe, SubAck, Unsubscribe, UnsubAck, PingReq, PingResp, Disconnect,
    Packet, PacketType, ProtocolError, Will, ConnectReturnCode,
    decode_packet, encode_packet, StreamDecoder,
)
from .topics import topic_matches, valid_topic_filter, valid_topic_name
from .broker import Broker
from .client import MqttClient
from .inproc import Network, inproc_pair

__all__ = [
    "Connect", "ConnAck", "Publish", "PubAck", "PubRec", "PubRel", "PubComp",
    "Subscribe", "SubAck", "Unsubscribe", "UnsubAck", "PingReq", "PingResp",
    "Disconnect", "Packet", "PacketType", "ProtocolError", "Will",
    "ConnectReturnCode", "decode_packet", "encode_packet", "StreamDecoder",
    "topic_matches", "valid_topic_filter", "valid_topic_name",
    "Broker", "MqttClient", "Network", "inproc_pair",
]
