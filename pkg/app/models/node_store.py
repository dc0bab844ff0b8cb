#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE NODE STORE - OPC UA TRUSTKIT
Fichier: app/models/node_store.py

Petit espace d'adressage de valeurs de procédé (capteur, consigne,
état) partagé entre les connexions d'un serveur.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import threading
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Union

from app.config.base import Config
from app.protocol.status import StatusCode
from app.protocol.structures import ATTRIBUTE_DISPLAY_NAME, ATTRIBUTE_VALUE
from app.protocol.types import BuiltinKind, DataValue, LocalizedText, NodeId, Variant, now_ticks, variant_for

_INTEGER_KINDS = frozenset({
    BuiltinKind.SBYTE, BuiltinKind.BYTE, BuiltinKind.INT16, BuiltinKind.UINT16,
    BuiltinKind.INT32, BuiltinKind.UINT32, BuiltinKind.INT64, BuiltinKind.UINT64,
})
_FLOAT_KINDS = frozenset({BuiltinKind.FLOAT, BuiltinKind.DOUBLE})
_NUMERIC_KINDS = _INTEGER_KINDS | _FLOAT_KINDS


@dataclass
class NodeEntry:
    """Valeur d'un nœud, son droit d'écriture et son nom affiché."""
    value: Variant
    writable: bool = False
    display_name: str = ''

    @classmethod
    def of(cls, value: Any, writable: bool = False, display_name: str = '') -> 'NodeEntry':
        return cls(variant_for(value), writable, display_name)


def _coerce(current: Variant, incoming: Variant) -> Optional[Variant]:
    """Adapte une valeur écrite au type du nœud; None si incompatible."""
    if incoming.is_array != current.is_array:
        return None
    if incoming.variant_type == current.variant_type:
        return Variant(current.variant_type, incoming.value, current.is_array)
    if current.is_array or incoming.variant_type not in _NUMERIC_KINDS:
        return None
    if current.variant_type in _FLOAT_KINDS:
        return Variant(current.variant_type, float(incoming.value))
    if current.variant_type in _INTEGER_KINDS:
        value = incoming.value
        if isinstance(value, float):
            if not value.is_integer():
                return None
            value = int(value)
        return Variant(current.variant_type, value)
    return None


class NodeStore:
    """
    Table node-id -> NodeEntry protégée par un verrou: chaque lecture et
    chaque écriture est atomique.
    """

    def __init__(self, nodes: Optional[Dict[Union[str, NodeId], NodeEntry]] = None):
        self._lock = threading.RLock()
        self._nodes: Dict[NodeId, NodeEntry] = {}
        for node_id, entry in (nodes or {}).items():
            self.add(node_id, entry)

    @staticmethod
    def _key(node_id: Union[str, NodeId]) -> NodeId:
        return node_id if isinstance(node_id, NodeId) else NodeId.parse(node_id)

    def add(self, node_id: Union[str, NodeId], entry: NodeEntry):
        with self._lock:
            self._nodes[self._key(node_id)] = NodeEntry(entry.value, entry.writable, entry.display_name)

    def __contains__(self, node_id) -> bool:
        with self._lock:
            return self._key(node_id) in self._nodes

    def node_ids(self) -> Iterable[NodeId]:
        with self._lock:
            return list(self._nodes)

    def writable_node_ids(self) -> Iterable[NodeId]:
        with self._lock:
            return [node_id for node_id, entry in self._nodes.items() if entry.writable]

    def read(self, node_id: Union[str, NodeId], attribute_id: int = ATTRIBUTE_VALUE) -> DataValue:
        """
        Lit un attribut; les erreurs sont portées par le statut du DataValue.

        Returns:
            DataValue (BadNodeIdUnknown ou BadAttributeIdInvalid en cas d'échec)
        """
        with self._lock:
            entry = self._nodes.get(self._key(node_id))
            if entry is None:
                return DataValue(status=int(StatusCode.BadNodeIdUnknown))
            if attribute_id == ATTRIBUTE_VALUE:
                value = Variant(entry.value.variant_type, entry.value.value, entry.value.is_array)
                return DataValue(value=value, server_timestamp=now_ticks())
            if attribute_id == ATTRIBUTE_DISPLAY_NAME:
                return DataValue(value=Variant(BuiltinKind.LOCALIZEDTEXT, LocalizedText(entry.display_name)))
            return DataValue(status=int(StatusCode.BadAttributeIdInvalid))

    def write(self, node_id: Union[str, NodeId], value: Union[Variant, Any],
              attribute_id: int = ATTRIBUTE_VALUE) -> int:
        """
        Écrit la valeur d'un nœud modifiable.

        Returns:
            Code de statut (Good, BadNodeIdUnknown, BadNotWritable,
            BadTypeMismatch, BadAttributeIdInvalid)
        """
        incoming = value if isinstance(value, Variant) else variant_for(value)
        with self._lock:
            entry = self._nodes.get(self._key(node_id))
            if entry is None:
                return int(StatusCode.BadNodeIdUnknown)
            if attribute_id != ATTRIBUTE_VALUE:
                return int(StatusCode.BadAttributeIdInvalid)
            if not entry.writable:
                return int(StatusCode.BadNotWritable)
            coerced = _coerce(entry.value, incoming)
            if coerced is None:
                return int(StatusCode.BadTypeMismatch)
            entry.value = coerced
            return int(StatusCode.Good)

    def value_of(self, node_id: Union[str, NodeId]) -> Any:
        with self._lock:
            entry = self._nodes.get(self._key(node_id))
            return entry.value.value if entry else None

    def snapshot(self) -> Dict[str, Any]:
        """Copie {node-id textuel: valeur Python} pour les rapports."""
        with self._lock:
            return {node_id.to_string(): entry.value.value for node_id, entry in self._nodes.items()}


SENSOR_NODE = 'ns=1;s=sensor'
SETPOINT_NODE = 'ns=1;s=setpoint'
STATUS_NODE = 'ns=1;s=status'


def default_nodes(config_class=None) -> Dict[str, NodeEntry]:
    """Nœuds DEFAULT_NODES de la configuration: capteur et état en lecture seule, consigne modifiable."""
    nodes = getattr(config_class or Config, 'DEFAULT_NODES', Config.DEFAULT_NODES)
    return {
        node_id: NodeEntry.of(value, writable=writable, display_name=name)
        for node_id, (value, writable, name) in nodes.items()
    }
