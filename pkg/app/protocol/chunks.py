#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
DÉCOUPAGE EN CHUNKS UA-TCP
Fichier: app/protocol/chunks.py

En-têtes de message, en-têtes de sécurité (asymétrique/symétrique),
en-tête de séquence, découpage d'un corps de service en chunks et
réassemblage. Les chunks produits ici ne sont PAS protégés
cryptographiquement; la protection est faite par
app/services/secure_channel.py.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import struct
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

from app.exceptions import (
    AbortReceived, BodyTooLarge, Malformed, MixedRequestIds, SequenceGap, Truncated
)
from app.models.channel import POLICY_NONE_URI, SecureChannelState
from app.protocol.binary import BinaryReader, BinaryWriter
from app.protocol.structures import (
    AcknowledgeMessage, CloseSecureChannelRequest, ErrorMessage, HelloMessage,
    decode_raw_message, decode_service_body, decode_struct, encode_service_body
)

MESSAGE_TYPES = (b'HEL', b'ACK', b'ERR', b'OPN', b'MSG', b'CLO')
RAW_TYPES = (b'HEL', b'ACK', b'ERR')
CHUNK_FLAGS = (b'F', b'C', b'A')

MESSAGE_HEADER_SIZE = 8
SYMMETRIC_HEADER_SIZE = 8
SEQUENCE_HEADER_SIZE = 8

DEFAULT_MAX_CHUNK_SIZE = 65536
MIN_MAX_CHUNK_SIZE = 8192
DEFAULT_MAX_CHUNK_COUNT = 64
THUMBPRINT_LENGTH = 20


class HeaderKind(str, Enum):
    ASYMMETRIC = 'asymmetric'
    SYMMETRIC = 'symmetric'
    RAW = 'raw'


@dataclass(frozen=True)
class MessageHeader:
    message_type: bytes
    chunk_flag: bytes
    message_size: int

    def encode(self) -> bytes:
        return self.message_type + self.chunk_flag + struct.pack('<I', self.message_size)


@dataclass(frozen=True)
class SecurityHeaderAsymmetric:
    secure_channel_id: int
    security_policy_uri: str
    sender_certificate: Optional[bytes] = None
    receiver_certificate_thumbprint: Optional[bytes] = None

    def __post_init__(self):
        if self.security_policy_uri == POLICY_NONE_URI and (
                self.sender_certificate is not None or self.receiver_certificate_thumbprint is not None):
            raise Malformed("Politique None avec certificat dans l'en-tête asymétrique")
        if self.receiver_certificate_thumbprint is not None and \
                len(self.receiver_certificate_thumbprint) != THUMBPRINT_LENGTH:
            raise Malformed("Empreinte du destinataire de longueur invalide")

    def encode(self) -> bytes:
        writer = BinaryWriter()
        writer.write_uint32(self.secure_channel_id)
        writer.write_bytestring(self.security_policy_uri.encode('utf-8'))
        writer.write_bytestring(self.sender_certificate)
        writer.write_bytestring(self.receiver_certificate_thumbprint)
        return writer.to_bytes()

    @classmethod
    def read(cls, reader: BinaryReader) -> 'SecurityHeaderAsymmetric':
        channel_id = reader.read_uint32()
        uri = reader.read_bytestring()
        if uri is None:
            raise Malformed("URI de politique absente")
        return cls(
            secure_channel_id=channel_id,
            security_policy_uri=uri.decode('utf-8', errors='replace'),
            sender_certificate=reader.read_bytestring(),
            receiver_certificate_thumbprint=reader.read_bytestring(),
        )


@dataclass(frozen=True)
class SecurityHeaderSymmetric:
    secure_channel_id: int
    token_id: int

    def encode(self) -> bytes:
        return struct.pack('<II', self.secure_channel_id, self.token_id)


@dataclass(frozen=True)
class SequenceHeader:
    sequence_number: int
    request_id: int

    def encode(self) -> bytes:
        return struct.pack('<II', self.sequence_number, self.request_id)


@dataclass(frozen=True)
class ParsedChunk:
    """Chunk non protégé découpé en ses parties."""
    header: MessageHeader
    security_header: Union[SecurityHeaderAsymmetric, SecurityHeaderSymmetric, None]
    sequence_header: Optional[SequenceHeader]
    body: bytes


def decode_message_header(data: bytes) -> MessageHeader:
    """
    Décode et valide les 8 premiers octets d'un chunk.

    Raises:
        Truncated: moins de 8 octets
        Malformed: type, drapeau ou taille invalide
    """
    if len(data) < MESSAGE_HEADER_SIZE:
        raise Truncated("En-tête de message incomplet")
    message_type, flag = bytes(data[:3]), bytes(data[3:4])
    size = struct.unpack('<I', data[4:8])[0]
    if message_type not in MESSAGE_TYPES:
        raise Malformed(f"Type de message inconnu: {message_type!r}")
    if flag not in CHUNK_FLAGS:
        raise Malformed(f"Drapeau de chunk inconnu: {flag!r}")
    if size < MESSAGE_HEADER_SIZE:
        raise Malformed(f"Taille de message invalide: {size}")
    if message_type in RAW_TYPES and flag != b'F':
        raise Malformed(f"Message {message_type.decode()} avec drapeau {flag!r}")
    return MessageHeader(message_type, flag, size)


def parse_chunk(data: bytes) -> ParsedChunk:
    """Découpe un chunk non protégé; la taille déclarée doit être exacte."""
    header = decode_message_header(data)
    if header.message_size != len(data):
        raise Malformed(f"Taille déclarée {header.message_size} pour {len(data)} octets")
    reader = BinaryReader(data, MESSAGE_HEADER_SIZE)
    if header.message_type in RAW_TYPES:
        return ParsedChunk(header, None, None, bytes(data[MESSAGE_HEADER_SIZE:]))
    if header.message_type == b'OPN':
        security_header = SecurityHeaderAsymmetric.read(reader)
    else:
        security_header = SecurityHeaderSymmetric(reader.read_uint32(), reader.read_uint32())
    sequence_header = SequenceHeader(reader.read_uint32(), reader.read_uint32())
    return ParsedChunk(header, security_header, sequence_header, bytes(data[reader.offset:]))


def payload_capacity(header_kind: HeaderKind, channel: Optional[SecureChannelState],
                     max_chunk_size: int) -> int:
    """Nombre d'octets de corps transportables par chunk."""
    if header_kind == HeaderKind.RAW:
        return max_chunk_size - MESSAGE_HEADER_SIZE
    if channel is None:
        raise Malformed("Un canal est requis pour les chunks sécurisés")
    if header_kind == HeaderKind.ASYMMETRIC:
        header = _asymmetric_header_for(channel)
        return max_chunk_size - MESSAGE_HEADER_SIZE - len(header.encode()) - SEQUENCE_HEADER_SIZE
    return (max_chunk_size - MESSAGE_HEADER_SIZE - SYMMETRIC_HEADER_SIZE
            - SEQUENCE_HEADER_SIZE - channel.security_overhead())


def _asymmetric_header_for(channel: SecureChannelState) -> SecurityHeaderAsymmetric:
    if channel.suite.is_none:
        return SecurityHeaderAsymmetric(channel.channel_id, channel.suite.uri)
    sender = channel.local_identity.record.der if channel.local_identity else None
    receiver = channel.remote_certificate.thumbprint if channel.remote_certificate else None
    return SecurityHeaderAsymmetric(channel.channel_id, channel.suite.uri, sender, receiver)


def encode_chunks(body, header_kind: HeaderKind, channel: Optional[SecureChannelState] = None,
                  max_chunk_size: int = DEFAULT_MAX_CHUNK_SIZE,
                  max_chunk_count: int = DEFAULT_MAX_CHUNK_COUNT,
                  request_id: Optional[int] = None) -> List[bytes]:
    """
    Découpe un corps de service en chunks non protégés.

    Args:
        body: Structure de service (ou Hello/Acknowledge/Error pour raw)
        header_kind: asymmetric (OPN), symmetric (MSG/CLO) ou raw (HEL/ACK/ERR)
        channel: État du canal (numéros de séquence, identifiants)
        max_chunk_size: Taille maximale d'un chunk (>= 8192)
        max_chunk_count: Nombre maximal de chunks par message
        request_id: Identifiant de requête (alloué par le canal si absent)

    Returns:
        Liste de chunks; tous sauf le dernier portent le drapeau C

    Raises:
        BodyTooLarge: le message dépasserait max_chunk_count chunks
    """
    header_kind = HeaderKind(header_kind)
    if max_chunk_size < MIN_MAX_CHUNK_SIZE:
        raise Malformed(f"max_chunk_size doit être >= {MIN_MAX_CHUNK_SIZE}")

    if header_kind == HeaderKind.RAW:
        tag = {HelloMessage: b'HEL', AcknowledgeMessage: b'ACK', ErrorMessage: b'ERR'}.get(type(body))
        if tag is None:
            raise Malformed(f"{type(body).__name__} n'est pas un message brut")
        payload = encode_service_body(body)
        size = MESSAGE_HEADER_SIZE + len(payload)
        if size > max_chunk_size:
            raise BodyTooLarge(f"Message brut de {size} octets")
        return [MessageHeader(tag, b'F', size).encode() + payload]

    if channel is None:
        raise Malformed("Un canal est requis pour les chunks sécurisés")
    payload = encode_service_body(body)
    if request_id is None:
        request_id = channel.next_request_id()

    if header_kind == HeaderKind.ASYMMETRIC:
        security_header = _asymmetric_header_for(channel).encode()
        size = MESSAGE_HEADER_SIZE + len(security_header) + SEQUENCE_HEADER_SIZE + len(payload)
        if size > max_chunk_size:
            raise BodyTooLarge(f"Message OPN de {size} octets")
        sequence = SequenceHeader(channel.next_send_sequence(), request_id).encode()
        return [MessageHeader(b'OPN', b'F', size).encode() + security_header + sequence + payload]

    tag = b'CLO' if isinstance(body, CloseSecureChannelRequest) else b'MSG'
    capacity = payload_capacity(header_kind, channel, max_chunk_size)
    pieces = [payload[i:i + capacity] for i in range(0, len(payload), capacity)]
    if len(pieces) > max_chunk_count:
        raise BodyTooLarge(f"{len(pieces)} chunks requis, maximum {max_chunk_count}")

    security_header = SecurityHeaderSymmetric(channel.channel_id, channel.token_id).encode()
    chunks = []
    for index, piece in enumerate(pieces):
        flag = b'F' if index == len(pieces) - 1 else b'C'
        size = MESSAGE_HEADER_SIZE + SYMMETRIC_HEADER_SIZE + SEQUENCE_HEADER_SIZE + len(piece)
        sequence = SequenceHeader(channel.next_send_sequence(), request_id).encode()
        chunks.append(MessageHeader(tag, flag, size).encode() + security_header + sequence + piece)
    return chunks


def reassemble(chunks: List[bytes]) -> Tuple[object, Optional[SequenceHeader]]:
    """
    Reconstitue un corps de service à partir de chunks non protégés.

    Returns:
        (corps décodé, en-tête de séquence du premier chunk ou None pour
        HEL/ACK/ERR)

    Raises:
        SequenceGap, MixedRequestIds, AbortReceived, Malformed, Truncated
    """
    if not chunks:
        raise Malformed("Aucun chunk à réassembler")
    parsed = [parse_chunk(chunk) for chunk in chunks]
    first = parsed[0]

    if first.header.message_type in RAW_TYPES:
        if len(parsed) != 1:
            raise Malformed("Un message brut tient en un seul chunk")
        return decode_raw_message(first.header.message_type, first.body), None

    for item in parsed:
        if item.header.message_type != first.header.message_type:
            raise Malformed("Types de message mélangés")
        if item.header.chunk_flag == b'A':
            abort = decode_struct(item.body, ErrorMessage)
            raise AbortReceived(abort.error, abort.reason)

    for index, item in enumerate(parsed):
        expected = b'F' if index == len(parsed) - 1 else b'C'
        if item.header.chunk_flag != expected:
            raise Malformed(f"Drapeau {item.header.chunk_flag!r} inattendu en position {index}")
        if item.sequence_header.request_id != first.sequence_header.request_id:
            raise MixedRequestIds(
                f"request_id {item.sequence_header.request_id} != {first.sequence_header.request_id}")
        if index and item.sequence_header.sequence_number != parsed[index - 1].sequence_header.sequence_number + 1:
            raise SequenceGap(
                f"Séquence {item.sequence_header.sequence_number} après "
                f"{parsed[index - 1].sequence_header.sequence_number}")

    body = decode_service_body(b''.join(item.body for item in parsed))
    return body, first.sequence_header
