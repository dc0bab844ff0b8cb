#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CODEC BINAIRE - TYPES INTÉGRÉS
Fichier: app/protocol/binary.py

Lecture et écriture little-endian des types intégrés OPC UA (partie 6).
Le lecteur ne dépasse jamais la fin du tampon fourni et lève une erreur
structurée (Truncated, Malformed, UnsupportedKind) sur toute entrée
incohérente. L'encodage est canonique: une seule représentation par valeur.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import struct
from typing import Any, Callable, List, Optional, Tuple

from app.exceptions import Malformed, Truncated, UnsupportedKind
from app.protocol.types import (
    BuiltinKind, DataValue, DiagnosticInfo, ExtensionObject, LocalizedText,
    NodeId, QualifiedName, Variant
)

MAX_ARRAY_LENGTH = 2 ** 16
MAX_NESTING_DEPTH = 32

_SCALAR_FORMATS = {
    BuiltinKind.SBYTE: '<b',
    BuiltinKind.BYTE: '<B',
    BuiltinKind.INT16: '<h',
    BuiltinKind.UINT16: '<H',
    BuiltinKind.INT32: '<i',
    BuiltinKind.UINT32: '<I',
    BuiltinKind.INT64: '<q',
    BuiltinKind.UINT64: '<Q',
    BuiltinKind.FLOAT: '<f',
    BuiltinKind.DOUBLE: '<d',
    BuiltinKind.DATETIME: '<q',
    BuiltinKind.STATUSCODE: '<I',
}

# Types admis dans un Variant
VARIANT_KINDS = frozenset({
    BuiltinKind.BOOLEAN, BuiltinKind.SBYTE, BuiltinKind.BYTE, BuiltinKind.INT16,
    BuiltinKind.UINT16, BuiltinKind.INT32, BuiltinKind.UINT32, BuiltinKind.INT64,
    BuiltinKind.UINT64, BuiltinKind.FLOAT, BuiltinKind.DOUBLE, BuiltinKind.STRING,
    BuiltinKind.DATETIME, BuiltinKind.BYTESTRING, BuiltinKind.NODEID,
    BuiltinKind.STATUSCODE, BuiltinKind.QUALIFIEDNAME, BuiltinKind.LOCALIZEDTEXT,
})


class BinaryWriter:
    """Accumulateur d'octets avec une méthode d'écriture par type intégré."""

    def __init__(self):
        self._parts: List[bytes] = []

    def to_bytes(self) -> bytes:
        return b''.join(self._parts)

    def write_raw(self, data: bytes):
        self._parts.append(bytes(data))

    def write_scalar(self, kind: BuiltinKind, value):
        try:
            self._parts.append(struct.pack(_SCALAR_FORMATS[kind], value))
        except struct.error as e:
            raise Malformed(f"Valeur hors limites pour {kind.name}: {value!r}") from e

    def write_boolean(self, value: bool):
        self._parts.append(b'\x01' if value else b'\x00')

    def write_int32(self, value: int):
        self.write_scalar(BuiltinKind.INT32, value)

    def write_uint32(self, value: int):
        self.write_scalar(BuiltinKind.UINT32, value)

    def write_string(self, value: Optional[str]):
        if value is None:
            self.write_int32(-1)
            return
        encoded = value.encode('utf-8')
        self.write_int32(len(encoded))
        self._parts.append(encoded)

    def write_bytestring(self, value: Optional[bytes]):
        if value is None:
            self.write_int32(-1)
            return
        self.write_int32(len(value))
        self._parts.append(bytes(value))

    def write_node_id(self, node_id: NodeId):
        identifier, namespace = node_id.identifier, node_id.namespace
        if isinstance(identifier, bool):
            raise UnsupportedKind("Identifiant booléen non supporté")
        if isinstance(identifier, int):
            if namespace == 0 and 0 <= identifier <= 0xFF:
                self._parts.append(struct.pack('<BB', 0x00, identifier))
            elif 0 <= namespace <= 0xFF and 0 <= identifier <= 0xFFFF:
                self._parts.append(struct.pack('<BBH', 0x01, namespace, identifier))
            else:
                try:
                    self._parts.append(struct.pack('<BHI', 0x02, namespace, identifier))
                except struct.error as e:
                    raise Malformed(f"NodeId numérique hors limites: {node_id}") from e
        elif isinstance(identifier, str):
            self._parts.append(struct.pack('<BH', 0x03, namespace))
            self.write_string(identifier)
        elif isinstance(identifier, bytes):
            self._parts.append(struct.pack('<BH', 0x05, namespace))
            self.write_bytestring(identifier)
        else:
            raise UnsupportedKind(f"Type d'identifiant non supporté: {type(identifier).__name__}")

    def write_localized_text(self, value: LocalizedText):
        mask = (0x01 if value.locale is not None else 0) | (0x02 if value.text is not None else 0)
        self._parts.append(bytes([mask]))
        if value.locale is not None:
            self.write_string(value.locale)
        if value.text is not None:
            self.write_string(value.text)

    def write_qualified_name(self, value: QualifiedName):
        self.write_scalar(BuiltinKind.UINT16, value.namespace)
        self.write_string(value.name)

    def write_extension_object(self, value: Optional[ExtensionObject]):
        if value is None:
            value = ExtensionObject()
        self.write_node_id(value.type_id)
        if value.encoding not in (0, 1, 2):
            raise Malformed(f"Encodage d'ExtensionObject invalide: {value.encoding}")
        self._parts.append(bytes([value.encoding]))
        if value.encoding:
            self.write_bytestring(value.body)

    def write_variant(self, value: Optional[Variant]):
        if value is None or value.is_null:
            self._parts.append(b'\x00')
            return
        kind = BuiltinKind(value.variant_type)
        if kind not in VARIANT_KINDS:
            raise UnsupportedKind(f"Type de Variant non supporté: {kind.name}")
        if value.is_array:
            self._parts.append(bytes([kind | 0x80]))
            self.write_array(value.value, lambda item: self.write(kind, item))
        else:
            self._parts.append(bytes([kind]))
            self.write(kind, value.value)

    def write_data_value(self, value: DataValue):
        fields = (
            (0x01, value.value, self.write_variant),
            (0x02, value.status, self.write_uint32),
            (0x04, value.source_timestamp, lambda v: self.write_scalar(BuiltinKind.DATETIME, v)),
            (0x08, value.server_timestamp, lambda v: self.write_scalar(BuiltinKind.DATETIME, v)),
            (0x10, value.source_picoseconds, lambda v: self.write_scalar(BuiltinKind.UINT16, v)),
            (0x20, value.server_picoseconds, lambda v: self.write_scalar(BuiltinKind.UINT16, v)),
        )
        mask = 0
        for bit, item, _ in fields:
            if item is not None:
                mask |= bit
        self._parts.append(bytes([mask]))
        for _, item, writer in fields:
            if item is not None:
                writer(item)

    def write_diagnostic_info(self, value: DiagnosticInfo):
        fields = (
            (0x01, value.symbolic_id, self.write_int32),
            (0x02, value.namespace_uri, self.write_int32),
            (0x08, value.locale, self.write_int32),
            (0x04, value.localized_text, self.write_int32),
            (0x10, value.additional_info, self.write_string),
            (0x20, value.inner_status_code, self.write_uint32),
            (0x40, value.inner_diagnostic_info, self.write_diagnostic_info),
        )
        mask = 0
        for bit, item, _ in fields:
            if item is not None:
                mask |= bit
        self._parts.append(bytes([mask]))
        for _, item, writer in fields:
            if item is not None:
                writer(item)

    def write_array(self, values: Optional[list], writer: Callable[[Any], None]):
        if values is None:
            self.write_int32(-1)
            return
        if len(values) > MAX_ARRAY_LENGTH:
            raise Malformed(f"Tableau trop long: {len(values)} éléments")
        self.write_int32(len(values))
        for item in values:
            writer(item)

    def write(self, kind: BuiltinKind, value):
        """Écrit une valeur scalaire du type intégré indiqué."""
        if kind in _SCALAR_FORMATS:
            self.write_scalar(kind, value)
        elif kind == BuiltinKind.BOOLEAN:
            self.write_boolean(value)
        elif kind == BuiltinKind.STRING:
            self.write_string(value)
        elif kind == BuiltinKind.BYTESTRING:
            self.write_bytestring(value)
        elif kind == BuiltinKind.NODEID:
            self.write_node_id(value)
        elif kind == BuiltinKind.LOCALIZEDTEXT:
            self.write_localized_text(value)
        elif kind == BuiltinKind.QUALIFIEDNAME:
            self.write_qualified_name(value)
        elif kind == BuiltinKind.EXTENSIONOBJECT:
            self.write_extension_object(value)
        elif kind == BuiltinKind.VARIANT:
            self.write_variant(value)
        elif kind == BuiltinKind.DATAVALUE:
            self.write_data_value(value)
        elif kind == BuiltinKind.DIAGNOSTICINFO:
            self.write_diagnostic_info(value)
        else:
            raise UnsupportedKind(f"Type intégré non supporté: {BuiltinKind(kind).name}")


class BinaryReader:
    """Lecteur borné sur un tampon d'octets."""

    def __init__(self, data: bytes, offset: int = 0, max_array_length: int = MAX_ARRAY_LENGTH):
        self._data = bytes(data)
        self.offset = offset
        self.max_array_length = max_array_length
        self._depth = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self.offset

    def read_raw(self, count: int) -> bytes:
        if count < 0:
            raise Malformed(f"Longueur négative: {count}")
        if self.offset + count > len(self._data):
            raise Truncated(f"{count} octets demandés, {self.remaining} disponibles")
        chunk = self._data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def read_scalar(self, kind: BuiltinKind):
        fmt = _SCALAR_FORMATS[kind]
        return struct.unpack(fmt, self.read_raw(struct.calcsize(fmt)))[0]

    def read_byte(self) -> int:
        return self.read_raw(1)[0]

    def read_boolean(self) -> bool:
        raw = self.read_byte()
        if raw not in (0, 1):
            raise Malformed(f"Booléen non canonique: {raw}")
        return raw == 1

    def read_int32(self) -> int:
        return self.read_scalar(BuiltinKind.INT32)

    def read_uint32(self) -> int:
        return self.read_scalar(BuiltinKind.UINT32)

    def _read_length(self) -> Optional[int]:
        length = self.read_int32()
        if length == -1:
            return None
        if length < -1:
            raise Malformed(f"Longueur invalide: {length}")
        return length

    def read_string(self) -> Optional[str]:
        length = self._read_length()
        if length is None:
            return None
        return self.read_raw(length).decode('utf-8', errors='replace')

    def read_bytestring(self) -> Optional[bytes]:
        length = self._read_length()
        if length is None:
            return None
        return self.read_raw(length)

    def read_node_id(self) -> NodeId:
        encoding = self.read_byte()
        if encoding == 0x00:
            return NodeId(self.read_byte(), 0)
        if encoding == 0x01:
            namespace = self.read_byte()
            identifier = self.read_scalar(BuiltinKind.UINT16)
            if namespace == 0 and identifier <= 0xFF:
                raise Malformed("NodeId numérique non canonique")
            return NodeId(identifier, namespace)
        if encoding == 0x02:
            namespace = self.read_scalar(BuiltinKind.UINT16)
            identifier = self.read_uint32()
            if namespace <= 0xFF and identifier <= 0xFFFF:
                raise Malformed("NodeId numérique non canonique")
            return NodeId(identifier, namespace)
        if encoding == 0x03:
            namespace = self.read_scalar(BuiltinKind.UINT16)
            identifier = self.read_string()
            if identifier is None:
                raise Malformed("NodeId chaîne sans identifiant")
            return NodeId(identifier, namespace)
        if encoding == 0x05:
            namespace = self.read_scalar(BuiltinKind.UINT16)
            identifier = self.read_bytestring()
            if identifier is None:
                raise Malformed("NodeId opaque sans identifiant")
            return NodeId(identifier, namespace)
        if encoding == 0x04:
            raise UnsupportedKind("NodeId GUID non supporté")
        raise Malformed(f"Encodage de NodeId inconnu: 0x{encoding:02X}")

    def read_localized_text(self) -> LocalizedText:
        mask = self.read_byte()
        if mask & ~0x03:
            raise Malformed(f"Masque LocalizedText invalide: 0x{mask:02X}")
        locale = self.read_string() if mask & 0x01 else None
        text = self.read_string() if mask & 0x02 else None
        if (mask & 0x01 and locale is None) or (mask & 0x02 and text is None):
            raise Malformed("LocalizedText annoncé mais absent")
        return LocalizedText(text=text, locale=locale)

    def read_qualified_name(self) -> QualifiedName:
        namespace = self.read_scalar(BuiltinKind.UINT16)
        return QualifiedName(name=self.read_string(), namespace=namespace)

    def read_extension_object(self) -> ExtensionObject:
        type_id = self.read_node_id()
        encoding = self.read_byte()
        if encoding not in (0, 1, 2):
            raise Malformed(f"Encodage d'ExtensionObject invalide: {encoding}")
        body = self.read_bytestring() if encoding else None
        return ExtensionObject(type_id=type_id, encoding=encoding, body=body)

    def read_variant(self) -> Variant:
        mask = self.read_byte()
        if mask == 0:
            return Variant()
        if mask & 0x40:
            raise UnsupportedKind("Variant multidimensionnel non supporté")
        try:
            kind = BuiltinKind(mask & 0x3F)
        except ValueError as e:
            raise Malformed(f"Type de Variant inconnu: {mask & 0x3F}") from e
        if kind not in VARIANT_KINDS:
            raise UnsupportedKind(f"Type de Variant non supporté: {kind.name}")
        if mask & 0x80:
            values = self.read_array(lambda: self.read(kind))
            return Variant(kind, values, is_array=True)
        return Variant(kind, self.read(kind))

    def read_data_value(self) -> DataValue:
        mask = self.read_byte()
        if mask & ~0x3F:
            raise Malformed(f"Masque DataValue invalide: 0x{mask:02X}")
        result = DataValue()
        if mask & 0x01:
            result.value = self.read_variant()
        if mask & 0x02:
            result.status = self.read_uint32()
        if mask & 0x04:
            result.source_timestamp = self.read_scalar(BuiltinKind.DATETIME)
        if mask & 0x08:
            result.server_timestamp = self.read_scalar(BuiltinKind.DATETIME)
        if mask & 0x10:
            result.source_picoseconds = self.read_scalar(BuiltinKind.UINT16)
        if mask & 0x20:
            result.server_picoseconds = self.read_scalar(BuiltinKind.UINT16)
        return result

    def read_diagnostic_info(self) -> DiagnosticInfo:
        mask = self.read_byte()
        if mask & 0x80:
            raise Malformed(f"Masque DiagnosticInfo invalide: 0x{mask:02X}")
        result = DiagnosticInfo()
        if mask & 0x01:
            result.symbolic_id = self.read_int32()
        if mask & 0x02:
            result.namespace_uri = self.read_int32()
        if mask & 0x08:
            result.locale = self.read_int32()
        if mask & 0x04:
            result.localized_text = self.read_int32()
        if mask & 0x10:
            result.additional_info = self.read_string()
            if result.additional_info is None:
                raise Malformed("AdditionalInfo annoncé mais absent")
        if mask & 0x20:
            result.inner_status_code = self.read_uint32()
        if mask & 0x40:
            self._depth += 1
            if self._depth > MAX_NESTING_DEPTH:
                raise Malformed("DiagnosticInfo trop imbriqué")
            try:
                result.inner_diagnostic_info = self.read_diagnostic_info()
            finally:
                self._depth -= 1
        return result

    def read_array(self, reader: Callable[[], Any]) -> Optional[list]:
        length = self._read_length()
        if length is None:
            return None
        if length > self.max_array_length:
            raise Malformed(f"Tableau trop long: {length} éléments")
        if length > self.remaining:
            # chaque élément occupe au moins un octet
            raise Truncated(f"Tableau de {length} éléments, {self.remaining} octets restants")
        return [reader() for _ in range(length)]

    def read(self, kind: BuiltinKind):
        """Lit une valeur scalaire du type intégré indiqué."""
        if kind in _SCALAR_FORMATS:
            return self.read_scalar(kind)
        if kind == BuiltinKind.BOOLEAN:
            return self.read_boolean()
        if kind == BuiltinKind.STRING:
            return self.read_string()
        if kind == BuiltinKind.BYTESTRING:
            return self.read_bytestring()
        if kind == BuiltinKind.NODEID:
            return self.read_node_id()
        if kind == BuiltinKind.LOCALIZEDTEXT:
            return self.read_localized_text()
        if kind == BuiltinKind.QUALIFIEDNAME:
            return self.read_qualified_name()
        if kind == BuiltinKind.EXTENSIONOBJECT:
            return self.read_extension_object()
        if kind == BuiltinKind.VARIANT:
            return self.read_variant()
        if kind == BuiltinKind.DATAVALUE:
            return self.read_data_value()
        if kind == BuiltinKind.DIAGNOSTICINFO:
            return self.read_diagnostic_info()
        raise UnsupportedKind(f"Type intégré non supporté: {BuiltinKind(kind).name}")


def encode_builtin(value: Any, kind: BuiltinKind, array: bool = False) -> bytes:
    """
    Encode une valeur intégrée (ou un tableau de valeurs) selon la partie 6.

    Args:
        value: Valeur Python (None = chaîne/tableau absent)
        kind: Type intégré
        array: Encoder value comme tableau

    Returns:
        Octets encodés
    """
    writer = BinaryWriter()
    if array:
        writer.write_array(value, lambda item: writer.write(kind, item))
    else:
        writer.write(kind, value)
    return writer.to_bytes()


def decode_builtin(data: bytes, kind: BuiltinKind, array: bool = False,
                   offset: int = 0) -> Tuple[Any, int]:
    """
    Décode une valeur intégrée depuis data[offset:].

    Returns:
        (valeur, nombre d'octets consommés)
    """
    reader = BinaryReader(data, offset)
    if array:
        value = reader.read_array(lambda: reader.read(kind))
    else:
        value = reader.read(kind)
    return value, reader.offset - offset
