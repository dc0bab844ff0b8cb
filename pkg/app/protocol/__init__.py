"""
Package protocole: codec binaire OPC UA (types intégrés, structures de
service, découpage en chunks) et codes de statut.
"""

from .binary import BinaryReader, BinaryWriter, decode_builtin, encode_builtin
from .status import StatusCode, is_good, status_name
from .types import (
    BuiltinKind, DataValue, DiagnosticInfo, ExtensionObject, LocalizedText,
    NodeId, QualifiedName, Variant
)

__all__ = [
    'BinaryReader', 'BinaryWriter', 'decode_builtin', 'encode_builtin',
    'StatusCode', 'is_good', 'status_name',
    'BuiltinKind', 'DataValue', 'DiagnosticInfo', 'ExtensionObject',
    'LocalizedText', 'NodeId', 'QualifiedName', 'Variant',
]
