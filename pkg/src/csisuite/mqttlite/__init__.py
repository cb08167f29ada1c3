"""Minimal MQTT 3.1.1 transport: wire codec, loopback broker, client.

Implements the subset the control plane needs: CONNECT/CONNACK,
SUBSCRIBE/SUBACK with + and # filters, PUBLISH at QoS 0 and 1 (with
PUBACK), PINGREQ/PINGRESP and DISCONNECT.  No retained messages, no
persistent sessions, no QoS 2, no auth/TLS.
"""
from .broker import Broker
from .client import MqttClient
from .packets import topic_matches

__all__ = ["Broker", "MqttClient", "topic_matches"]
