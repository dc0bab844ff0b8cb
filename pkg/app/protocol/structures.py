#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
STRUCTURES DE SERVICE OPC UA
Fichier: app/protocol/structures.py

Déclaration des structures (en-têtes, descriptions d'endpoint, jetons
d'identité) et des corps de service supportés: Hello/Acknowledge/Error,
FindServers, GetEndpoints, OpenSecureChannel, CreateSession,
ActivateSession, Read, Write, CloseSession, CloseSecureChannel et
ServiceFault. Chaque champ porte son type binaire dans les métadonnées de
la dataclass; l'ordre des champs est l'ordre sur le fil.

Les corps de service inconnus sont conservés tels quels (UnknownService)
pour pouvoir être relayés sans perte.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from enum import IntEnum
from typing import Any, ClassVar, Dict, List, NamedTuple, Optional, Tuple, Type

from app.exceptions import Malformed
from app.protocol.binary import BinaryReader, BinaryWriter
from app.protocol.types import (
    BuiltinKind, DataValue, DiagnosticInfo, ExtensionObject, LocalizedText,
    NodeId, QualifiedName
)

UATCP_TRANSPORT_PROFILE = 'http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary'

# Attributs lisibles
ATTRIBUTE_DISPLAY_NAME = 4
ATTRIBUTE_VALUE = 13


class ArrayOf(NamedTuple):
    item: Any


class EnumOf(NamedTuple):
    enum: Type[IntEnum]


def ua_field(spec, default=MISSING, factory=MISSING):
    """Champ de dataclass annoté avec son type binaire OPC UA."""
    if factory is not MISSING:
        return field(default_factory=factory, metadata={'ua': spec})
    return field(default=default, metadata={'ua': spec})


# === ÉNUMÉRATIONS ===

class MessageSecurityMode(IntEnum):
    INVALID = 0
    NONE = 1
    SIGN = 2
    SIGN_AND_ENCRYPT = 3


class UserTokenType(IntEnum):
    ANONYMOUS = 0
    USERNAME = 1
    CERTIFICATE = 2
    ISSUED_TOKEN = 3


class ApplicationType(IntEnum):
    SERVER = 0
    CLIENT = 1
    CLIENT_AND_SERVER = 2
    DISCOVERY_SERVER = 3


class SecurityTokenRequestType(IntEnum):
    ISSUE = 0
    RENEW = 1


class TimestampsToReturn(IntEnum):
    SOURCE = 0
    SERVER = 1
    BOTH = 2
    NEITHER = 3
    INVALID = 4


# === ENCODAGE GÉNÉRIQUE ===

def _write_value(writer: BinaryWriter, spec, value):
    if isinstance(spec, ArrayOf):
        writer.write_array(value, lambda item: _write_value(writer, spec.item, item))
    elif isinstance(spec, EnumOf):
        writer.write_int32(int(value))
    elif isinstance(spec, BuiltinKind):
        writer.write(spec, value)
    elif is_dataclass(spec):
        encode_struct_into(writer, value)
    else:
        raise Malformed(f"Spécification de champ inconnue: {spec!r}")


def _read_value(reader: BinaryReader, spec):
    if isinstance(spec, ArrayOf):
        return reader.read_array(lambda: _read_value(reader, spec.item))
    if isinstance(spec, EnumOf):
        raw = reader.read_int32()
        try:
            return spec.enum(raw)
        except ValueError as e:
            raise Malformed(f"Valeur {raw} invalide pour {spec.enum.__name__}") from e
    if isinstance(spec, BuiltinKind):
        return reader.read(spec)
    if is_dataclass(spec):
        return decode_struct_from(reader, spec)
    raise Malformed(f"Spécification de champ inconnue: {spec!r}")


def encode_struct_into(writer: BinaryWriter, obj):
    for item in fields(obj):
        _write_value(writer, item.metadata['ua'], getattr(obj, item.name))


def decode_struct_from(reader: BinaryReader, cls):
    values = {item.name: _read_value(reader, item.metadata['ua']) for item in fields(cls)}
    return cls(**values)


def encode_struct(obj) -> bytes:
    writer = BinaryWriter()
    encode_struct_into(writer, obj)
    return writer.to_bytes()


def decode_struct(data: bytes, cls, exact: bool = True):
    """Décode une structure; exact impose la consommation de tous les octets."""
    reader = BinaryReader(data)
    value = decode_struct_from(reader, cls)
    if exact and reader.remaining:
        raise Malformed(f"{reader.remaining} octets superflus après {cls.__name__}")
    return value


# === MESSAGES DE CONNEXION ===

@dataclass
class HelloMessage:
    protocol_version: int = ua_field(BuiltinKind.UINT32, 0)
    receive_buffer_size: int = ua_field(BuiltinKind.UINT32, 65536)
    send_buffer_size: int = ua_field(BuiltinKind.UINT32, 65536)
    max_message_size: int = ua_field(BuiltinKind.UINT32, 0)
    max_chunk_count: int = ua_field(BuiltinKind.UINT32, 0)
    endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)


@dataclass
class AcknowledgeMessage:
    protocol_version: int = ua_field(BuiltinKind.UINT32, 0)
    receive_buffer_size: int = ua_field(BuiltinKind.UINT32, 65536)
    send_buffer_size: int = ua_field(BuiltinKind.UINT32, 65536)
    max_message_size: int = ua_field(BuiltinKind.UINT32, 0)
    max_chunk_count: int = ua_field(BuiltinKind.UINT32, 0)


@dataclass
class ErrorMessage:
    error: int = ua_field(BuiltinKind.STATUSCODE, 0)
    reason: Optional[str] = ua_field(BuiltinKind.STRING, None)


# === STRUCTURES COMMUNES ===

@dataclass
class RequestHeader:
    authentication_token: NodeId = ua_field(BuiltinKind.NODEID, factory=NodeId)
    timestamp: int = ua_field(BuiltinKind.DATETIME, 0)
    request_handle: int = ua_field(BuiltinKind.UINT32, 0)
    return_diagnostics: int = ua_field(BuiltinKind.UINT32, 0)
    audit_entry_id: Optional[str] = ua_field(BuiltinKind.STRING, None)
    timeout_hint: int = ua_field(BuiltinKind.UINT32, 0)
    additional_header: ExtensionObject = ua_field(BuiltinKind.EXTENSIONOBJECT, factory=ExtensionObject)


@dataclass
class ResponseHeader:
    timestamp: int = ua_field(BuiltinKind.DATETIME, 0)
    request_handle: int = ua_field(BuiltinKind.UINT32, 0)
    service_result: int = ua_field(BuiltinKind.STATUSCODE, 0)
    service_diagnostics: DiagnosticInfo = ua_field(BuiltinKind.DIAGNOSTICINFO, factory=DiagnosticInfo)
    string_table: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), None)
    additional_header: ExtensionObject = ua_field(BuiltinKind.EXTENSIONOBJECT, factory=ExtensionObject)


@dataclass
class ApplicationDescription:
    application_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    product_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    application_name: LocalizedText = ua_field(BuiltinKind.LOCALIZEDTEXT, factory=LocalizedText)
    application_type: ApplicationType = ua_field(EnumOf(ApplicationType), ApplicationType.SERVER)
    gateway_server_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    discovery_profile_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    discovery_urls: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)


@dataclass
class UserTokenPolicy:
    policy_id: Optional[str] = ua_field(BuiltinKind.STRING, None)
    token_type: UserTokenType = ua_field(EnumOf(UserTokenType), UserTokenType.ANONYMOUS)
    issued_token_type: Optional[str] = ua_field(BuiltinKind.STRING, None)
    issuer_endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)
    security_policy_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)


@dataclass
class EndpointDescription:
    endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)
    server: ApplicationDescription = ua_field(ApplicationDescription, factory=ApplicationDescription)
    server_certificate: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    security_mode: MessageSecurityMode = ua_field(EnumOf(MessageSecurityMode), MessageSecurityMode.NONE)
    security_policy_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    user_identity_tokens: Optional[List[UserTokenPolicy]] = ua_field(ArrayOf(UserTokenPolicy), factory=list)
    transport_profile_uri: Optional[str] = ua_field(BuiltinKind.STRING, UATCP_TRANSPORT_PROFILE)
    security_level: int = ua_field(BuiltinKind.BYTE, 0)


@dataclass
class ChannelSecurityToken:
    channel_id: int = ua_field(BuiltinKind.UINT32, 0)
    token_id: int = ua_field(BuiltinKind.UINT32, 0)
    created_at: int = ua_field(BuiltinKind.DATETIME, 0)
    revised_lifetime: int = ua_field(BuiltinKind.UINT32, 0)


@dataclass
class SignatureData:
    algorithm: Optional[str] = ua_field(BuiltinKind.STRING, None)
    signature: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)


@dataclass
class SignedSoftwareCertificate:
    certificate_data: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    signature: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)


@dataclass
class ReadValueId:
    node_id: NodeId = ua_field(BuiltinKind.NODEID, factory=NodeId)
    attribute_id: int = ua_field(BuiltinKind.UINT32, ATTRIBUTE_VALUE)
    index_range: Optional[str] = ua_field(BuiltinKind.STRING, None)
    data_encoding: QualifiedName = ua_field(BuiltinKind.QUALIFIEDNAME, factory=QualifiedName)


@dataclass
class WriteValue:
    node_id: NodeId = ua_field(BuiltinKind.NODEID, factory=NodeId)
    attribute_id: int = ua_field(BuiltinKind.UINT32, ATTRIBUTE_VALUE)
    index_range: Optional[str] = ua_field(BuiltinKind.STRING, None)
    value: DataValue = ua_field(BuiltinKind.DATAVALUE, factory=DataValue)


# === JETONS D'IDENTITÉ ===

@dataclass
class AnonymousIdentityToken:
    TYPE_ID: ClassVar[int] = 321
    policy_id: Optional[str] = ua_field(BuiltinKind.STRING, None)


@dataclass
class UserNameIdentityToken:
    TYPE_ID: ClassVar[int] = 324
    policy_id: Optional[str] = ua_field(BuiltinKind.STRING, None)
    user_name: Optional[str] = ua_field(BuiltinKind.STRING, None)
    password: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    encryption_algorithm: Optional[str] = ua_field(BuiltinKind.STRING, None)


@dataclass
class X509IdentityToken:
    TYPE_ID: ClassVar[int] = 327
    policy_id: Optional[str] = ua_field(BuiltinKind.STRING, None)
    certificate_data: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)


IDENTITY_TOKEN_TYPES = {cls.TYPE_ID: cls for cls in (AnonymousIdentityToken, UserNameIdentityToken, X509IdentityToken)}


def wrap_identity_token(token) -> ExtensionObject:
    return ExtensionObject(type_id=NodeId(token.TYPE_ID), encoding=1, body=encode_struct(token))


def unwrap_identity_token(extension: ExtensionObject):
    """Retourne le jeton décodé, ou None si le type n'est pas reconnu."""
    if extension is None or extension.encoding != 1 or extension.type_id.namespace != 0:
        return None
    cls = IDENTITY_TOKEN_TYPES.get(extension.type_id.identifier)
    if cls is None:
        return None
    return decode_struct(extension.body or b'', cls)


# === CORPS DE SERVICE ===

@dataclass
class ServiceFault:
    TYPE_ID: ClassVar[int] = 397
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)


@dataclass
class FindServersRequest:
    TYPE_ID: ClassVar[int] = 422
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)
    locale_ids: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)
    server_uris: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)


@dataclass
class FindServersResponse:
    TYPE_ID: ClassVar[int] = 425
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    servers: Optional[List[ApplicationDescription]] = ua_field(ArrayOf(ApplicationDescription), factory=list)


@dataclass
class GetEndpointsRequest:
    TYPE_ID: ClassVar[int] = 428
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)
    locale_ids: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)
    profile_uris: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)


@dataclass
class GetEndpointsResponse:
    TYPE_ID: ClassVar[int] = 431
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    endpoints: Optional[List[EndpointDescription]] = ua_field(ArrayOf(EndpointDescription), factory=list)


@dataclass
class OpenSecureChannelRequest:
    TYPE_ID: ClassVar[int] = 446
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    client_protocol_version: int = ua_field(BuiltinKind.UINT32, 0)
    request_type: SecurityTokenRequestType = ua_field(EnumOf(SecurityTokenRequestType), SecurityTokenRequestType.ISSUE)
    security_mode: MessageSecurityMode = ua_field(EnumOf(MessageSecurityMode), MessageSecurityMode.NONE)
    client_nonce: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    requested_lifetime: int = ua_field(BuiltinKind.UINT32, 3600000)


@dataclass
class OpenSecureChannelResponse:
    TYPE_ID: ClassVar[int] = 449
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    server_protocol_version: int = ua_field(BuiltinKind.UINT32, 0)
    security_token: ChannelSecurityToken = ua_field(ChannelSecurityToken, factory=ChannelSecurityToken)
    server_nonce: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)


@dataclass
class CloseSecureChannelRequest:
    TYPE_ID: ClassVar[int] = 452
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)


@dataclass
class CreateSessionRequest:
    TYPE_ID: ClassVar[int] = 461
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    client_description: ApplicationDescription = ua_field(ApplicationDescription, factory=ApplicationDescription)
    server_uri: Optional[str] = ua_field(BuiltinKind.STRING, None)
    endpoint_url: Optional[str] = ua_field(BuiltinKind.STRING, None)
    session_name: Optional[str] = ua_field(BuiltinKind.STRING, None)
    client_nonce: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    client_certificate: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    requested_session_timeout: float = ua_field(BuiltinKind.DOUBLE, 3600000.0)
    max_response_message_size: int = ua_field(BuiltinKind.UINT32, 0)


@dataclass
class CreateSessionResponse:
    TYPE_ID: ClassVar[int] = 464
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    session_id: NodeId = ua_field(BuiltinKind.NODEID, factory=NodeId)
    authentication_token: NodeId = ua_field(BuiltinKind.NODEID, factory=NodeId)
    revised_session_timeout: float = ua_field(BuiltinKind.DOUBLE, 0.0)
    server_nonce: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    server_certificate: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    server_endpoints: Optional[List[EndpointDescription]] = ua_field(ArrayOf(EndpointDescription), factory=list)
    server_software_certificates: Optional[List[SignedSoftwareCertificate]] = ua_field(
        ArrayOf(SignedSoftwareCertificate), factory=list)
    server_signature: SignatureData = ua_field(SignatureData, factory=SignatureData)
    max_request_message_size: int = ua_field(BuiltinKind.UINT32, 0)


@dataclass
class ActivateSessionRequest:
    TYPE_ID: ClassVar[int] = 467
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    client_signature: SignatureData = ua_field(SignatureData, factory=SignatureData)
    client_software_certificates: Optional[List[SignedSoftwareCertificate]] = ua_field(
        ArrayOf(SignedSoftwareCertificate), factory=list)
    locale_ids: Optional[List[str]] = ua_field(ArrayOf(BuiltinKind.STRING), factory=list)
    user_identity_token: ExtensionObject = ua_field(BuiltinKind.EXTENSIONOBJECT, factory=ExtensionObject)
    user_token_signature: SignatureData = ua_field(SignatureData, factory=SignatureData)


@dataclass
class ActivateSessionResponse:
    TYPE_ID: ClassVar[int] = 470
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    server_nonce: Optional[bytes] = ua_field(BuiltinKind.BYTESTRING, None)
    results: Optional[List[int]] = ua_field(ArrayOf(BuiltinKind.STATUSCODE), factory=list)
    diagnostic_infos: Optional[List[DiagnosticInfo]] = ua_field(ArrayOf(BuiltinKind.DIAGNOSTICINFO), factory=list)


@dataclass
class CloseSessionRequest:
    TYPE_ID: ClassVar[int] = 473
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    delete_subscriptions: bool = ua_field(BuiltinKind.BOOLEAN, True)


@dataclass
class CloseSessionResponse:
    TYPE_ID: ClassVar[int] = 476
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)


@dataclass
class ReadRequest:
    TYPE_ID: ClassVar[int] = 631
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    max_age: float = ua_field(BuiltinKind.DOUBLE, 0.0)
    timestamps_to_return: TimestampsToReturn = ua_field(EnumOf(TimestampsToReturn), TimestampsToReturn.NEITHER)
    nodes_to_read: Optional[List[ReadValueId]] = ua_field(ArrayOf(ReadValueId), factory=list)


@dataclass
class ReadResponse:
    TYPE_ID: ClassVar[int] = 634
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    results: Optional[List[DataValue]] = ua_field(ArrayOf(BuiltinKind.DATAVALUE), factory=list)
    diagnostic_infos: Optional[List[DiagnosticInfo]] = ua_field(ArrayOf(BuiltinKind.DIAGNOSTICINFO), factory=list)


@dataclass
class WriteRequest:
    TYPE_ID: ClassVar[int] = 673
    request_header: RequestHeader = ua_field(RequestHeader, factory=RequestHeader)
    nodes_to_write: Optional[List[WriteValue]] = ua_field(ArrayOf(WriteValue), factory=list)


@dataclass
class WriteResponse:
    TYPE_ID: ClassVar[int] = 676
    response_header: ResponseHeader = ua_field(ResponseHeader, factory=ResponseHeader)
    results: Optional[List[int]] = ua_field(ArrayOf(BuiltinKind.STATUSCODE), factory=list)
    diagnostic_infos: Optional[List[DiagnosticInfo]] = ua_field(ArrayOf(BuiltinKind.DIAGNOSTICINFO), factory=list)


@dataclass
class UnknownService:
    """Corps de service hors du sous-ensemble modélisé, conservé brut."""
    type_id: NodeId = field(default_factory=NodeId)
    payload: bytes = b''


SERVICE_TYPES: Dict[int, type] = {
    cls.TYPE_ID: cls for cls in (
        ServiceFault, FindServersRequest, FindServersResponse, GetEndpointsRequest,
        GetEndpointsResponse, OpenSecureChannelRequest, OpenSecureChannelResponse,
        CloseSecureChannelRequest, CreateSessionRequest, CreateSessionResponse,
        ActivateSessionRequest, ActivateSessionResponse, CloseSessionRequest,
        CloseSessionResponse, ReadRequest, ReadResponse, WriteRequest, WriteResponse,
    )
}

RAW_MESSAGE_TYPES = (HelloMessage, AcknowledgeMessage, ErrorMessage)


def encode_service_body(body) -> bytes:
    """Encode un corps de service précédé de son NodeId d'encodage binaire."""
    writer = BinaryWriter()
    if isinstance(body, UnknownService):
        writer.write_node_id(body.type_id)
        writer.write_raw(body.payload)
    elif isinstance(body, RAW_MESSAGE_TYPES):
        encode_struct_into(writer, body)
    else:
        writer.write_node_id(NodeId(body.TYPE_ID))
        encode_struct_into(writer, body)
    return writer.to_bytes()


def decode_service_body(data: bytes):
    """
    Décode un corps de service; les types non modélisés deviennent
    UnknownService.

    Raises:
        Truncated, Malformed, UnsupportedKind
    """
    reader = BinaryReader(data)
    type_id = reader.read_node_id()
    cls = SERVICE_TYPES.get(type_id.identifier) if type_id.namespace == 0 else None
    if cls is None:
        return UnknownService(type_id=type_id, payload=data[reader.offset:])
    body = decode_struct_from(reader, cls)
    if reader.remaining:
        raise Malformed(f"{reader.remaining} octets superflus après {cls.__name__}")
    return body


def decode_raw_message(message_type: bytes, data: bytes):
    """Décode le corps d'un message HEL, ACK ou ERR."""
    cls = {b'HEL': HelloMessage, b'ACK': AcknowledgeMessage, b'ERR': ErrorMessage}.get(message_type)
    if cls is None:
        raise Malformed(f"Type de message brut inconnu: {message_type!r}")
    return decode_struct(data, cls)


def split_request_header(body: UnknownService) -> Tuple[RequestHeader, bytes]:
    """Sépare l'en-tête de requête du reste d'un corps non modélisé."""
    reader = BinaryReader(body.payload)
    header = decode_struct_from(reader, RequestHeader)
    return header, body.payload[reader.offset:]


def join_request_header(type_id: NodeId, header: RequestHeader, rest: bytes) -> UnknownService:
    return UnknownService(type_id=type_id, payload=encode_struct(header) + rest)


def request_header_of(body) -> Optional[RequestHeader]:
    return getattr(body, 'request_header', None)


def response_header_of(body) -> Optional[ResponseHeader]:
    return getattr(body, 'response_header', None)
