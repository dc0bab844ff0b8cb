#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TYPES INTÉGRÉS OPC UA
Fichier: app/protocol/types.py

Représentation Python des types intégrés (built-in types) de la partie 6:
NodeId, LocalizedText, QualifiedName, ExtensionObject, Variant, DataValue
et DiagnosticInfo. Les horodatages restent des entiers (ticks de 100 ns
depuis 1601) pour que le décodage soit réversible octet par octet.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import IntEnum
from typing import Any, Optional, Union

from app.exceptions import Malformed

# Écart entre 1601-01-01 et 1970-01-01 en ticks de 100 ns
EPOCH_OFFSET_TICKS = 116444736000000000


class BuiltinKind(IntEnum):
    """Identifiants des types intégrés (valeurs identiques à la norme)."""
    NULL = 0
    BOOLEAN = 1
    SBYTE = 2
    BYTE = 3
    INT16 = 4
    UINT16 = 5
    INT32 = 6
    UINT32 = 7
    INT64 = 8
    UINT64 = 9
    FLOAT = 10
    DOUBLE = 11
    STRING = 12
    DATETIME = 13
    GUID = 14
    BYTESTRING = 15
    XMLELEMENT = 16
    NODEID = 17
    EXPANDEDNODEID = 18
    STATUSCODE = 19
    QUALIFIEDNAME = 20
    LOCALIZEDTEXT = 21
    EXTENSIONOBJECT = 22
    DATAVALUE = 23
    VARIANT = 24
    DIAGNOSTICINFO = 25


_NODE_ID_PATTERN = re.compile(r'^(?:ns=(\d+);)?([isb])=(.*)$', re.DOTALL)


@dataclass(frozen=True)
class NodeId:
    """Identifiant de nœud numérique, chaîne ou opaque."""
    identifier: Union[int, str, bytes] = 0
    namespace: int = 0

    @classmethod
    def parse(cls, text: str) -> 'NodeId':
        """
        Analyse la notation textuelle usuelle ("ns=1;s=sensor", "i=85").

        Args:
            text: Représentation textuelle

        Returns:
            NodeId correspondant
        """
        match = _NODE_ID_PATTERN.match(text.strip())
        if not match:
            raise Malformed(f"NodeId invalide: {text!r}")
        namespace = int(match.group(1) or 0)
        kind, raw = match.group(2), match.group(3)
        if kind == 'i':
            return cls(int(raw), namespace)
        if kind == 'b':
            return cls(bytes.fromhex(raw), namespace)
        return cls(raw, namespace)

    def to_string(self) -> str:
        prefix = f"ns={self.namespace};" if self.namespace else ''
        if isinstance(self.identifier, bytes):
            return f"{prefix}b={self.identifier.hex()}"
        if isinstance(self.identifier, str):
            return f"{prefix}s={self.identifier}"
        return f"{prefix}i={self.identifier}"

    def is_null(self) -> bool:
        return self.namespace == 0 and self.identifier == 0

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class LocalizedText:
    text: Optional[str] = None
    locale: Optional[str] = None


@dataclass(frozen=True)
class QualifiedName:
    name: Optional[str] = None
    namespace: int = 0


@dataclass
class ExtensionObject:
    """Structure encapsulée; encoding 0 = sans corps, 1 = binaire, 2 = XML."""
    type_id: NodeId = field(default_factory=NodeId)
    encoding: int = 0
    body: Optional[bytes] = None


@dataclass
class Variant:
    """Valeur typée; value est une liste lorsque is_array est vrai."""
    variant_type: BuiltinKind = BuiltinKind.NULL
    value: Any = None
    is_array: bool = False

    @property
    def is_null(self) -> bool:
        return self.variant_type == BuiltinKind.NULL


@dataclass
class DataValue:
    value: Optional[Variant] = None
    status: Optional[int] = None
    source_timestamp: Optional[int] = None
    server_timestamp: Optional[int] = None
    source_picoseconds: Optional[int] = None
    server_picoseconds: Optional[int] = None


@dataclass
class DiagnosticInfo:
    symbolic_id: Optional[int] = None
    namespace_uri: Optional[int] = None
    locale: Optional[int] = None
    localized_text: Optional[int] = None
    additional_info: Optional[str] = None
    inner_status_code: Optional[int] = None
    inner_diagnostic_info: Optional['DiagnosticInfo'] = None


def datetime_to_ticks(moment: datetime) -> int:
    """Convertit un datetime (naïf = UTC) en ticks OPC UA."""
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    delta = moment - datetime(1970, 1, 1, tzinfo=timezone.utc)
    micros = (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds
    return EPOCH_OFFSET_TICKS + micros * 10


def ticks_to_datetime(ticks: int) -> datetime:
    return datetime(1601, 1, 1, tzinfo=timezone.utc) + timedelta(microseconds=ticks // 10)


def now_ticks() -> int:
    return datetime_to_ticks(datetime.now(timezone.utc))


def variant_for(value: Any) -> Variant:
    """Déduit un Variant scalaire à partir d'une valeur Python."""
    if value is None:
        return Variant()
    if isinstance(value, Variant):
        return value
    if isinstance(value, bool):
        return Variant(BuiltinKind.BOOLEAN, value)
    if isinstance(value, int):
        return Variant(BuiltinKind.INT64, value)
    if isinstance(value, float):
        return Variant(BuiltinKind.DOUBLE, value)
    if isinstance(value, str):
        return Variant(BuiltinKind.STRING, value)
    if isinstance(value, bytes):
        return Variant(BuiltinKind.BYTESTRING, value)
    if isinstance(value, LocalizedText):
        return Variant(BuiltinKind.LOCALIZEDTEXT, value)
    if isinstance(value, NodeId):
        return Variant(BuiltinKind.NODEID, value)
    raise Malformed(f"Aucun type OPC UA pour {type(value).__name__}")
