#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE TRANSPORT UA-TCP - OPC UA TRUSTKIT
Fichier: app/services/transport.py

Connexion opc.tcp partagée par le client, le serveur et les attaques:
lecture de chunks sur la socket, négociation HEL/ACK, envoi et réception
des messages OPN/MSG/CLO avec la protection du canal. Chaque chunk émis
ou reçu est consigné dans la transcription de la connexion.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import socket
import struct
import threading
from typing import Callable, List, Optional, Tuple

from app.exceptions import (
    CodecError, ConnectFailed, ConnectionClosed, Malformed, PolicyNone, ProtocolError, SecurityError,
    ServerRejected, Truncated
)
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.models.channel import SecureChannelState
from app.protocol.binary import BinaryReader
from app.protocol.chunks import (
    DEFAULT_MAX_CHUNK_COUNT, DEFAULT_MAX_CHUNK_SIZE, MESSAGE_HEADER_SIZE, MIN_MAX_CHUNK_SIZE, HeaderKind,
    SEQUENCE_HEADER_SIZE, SecurityHeaderAsymmetric, SequenceHeader, decode_message_header, encode_chunks, reassemble
)
from app.protocol.status import StatusCode
from app.protocol.structures import AcknowledgeMessage, ErrorMessage, HelloMessage, decode_raw_message
from app.services.secure_channel import (
    SYMMETRIC_PREFIX_SIZE, protect_chunk, protect_open_secure_channel, suite_for_uri, unprotect_chunk,
    unprotect_open_secure_channel
)
from app.services.transcript import Transcript
from app.utils.logger import LoggerMixin


def _read_exact(sock: socket.socket, count: int) -> bytes:
    data = bytearray()
    while len(data) < count:
        try:
            piece = sock.recv(count - len(data))
        except socket.timeout as e:
            raise ProtocolError("Délai de lecture dépassé", StatusCode.BadTimeout) from e
        except OSError as e:
            raise ConnectionClosed(f"Socket fermée: {e}") from e
        if not piece:
            raise ConnectionClosed("Connexion fermée par le pair")
        data.extend(piece)
    return bytes(data)


def read_chunk(sock: socket.socket, max_size: int = DEFAULT_MAX_CHUNK_SIZE) -> bytes:
    """
    Lit un chunk complet (en-tête de 8 octets puis le reste).

    Raises:
        ConnectionClosed: fin de flux
        ProtocolError: délai dépassé ou taille annoncée hors limite
        Malformed: en-tête invalide
    """
    head = _read_exact(sock, MESSAGE_HEADER_SIZE)
    header = decode_message_header(head)
    if header.message_size > max_size:
        raise ProtocolError(f"Chunk de {header.message_size} octets (maximum {max_size})",
                            StatusCode.BadTcpMessageTooLarge)
    return head + _read_exact(sock, header.message_size - MESSAGE_HEADER_SIZE)


def negotiated_size(local: int, peer: int) -> int:
    """Taille de chunk retenue: le minimum des deux côtés, jamais sous 8192."""
    if not peer:
        return local
    return max(min(local, peer), MIN_MAX_CHUNK_SIZE)


class UAConnection(LoggerMixin):
    """
    Une connexion opc.tcp et son canal sécurisé.

    L'état du canal est confiné à la connexion; l'envoi est sérialisé par
    un verrou pour que les chunks d'un message ne s'entrelacent pas.
    """

    def __init__(self, sock: socket.socket, state: Optional[SecureChannelState] = None,
                 transcript: Optional[Transcript] = None,
                 max_chunk_size: int = DEFAULT_MAX_CHUNK_SIZE,
                 max_chunk_count: int = DEFAULT_MAX_CHUNK_COUNT,
                 peer: str = ''):
        self.sock = sock
        self.state = state
        self.transcript = transcript if transcript is not None else Transcript()
        self.receive_chunk_size = max_chunk_size
        self.send_chunk_size = max_chunk_size
        self.max_chunk_count = max_chunk_count
        self.peer = peer
        self.last_request_id: Optional[int] = None
        self._send_lock = threading.Lock()
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    # === OCTETS BRUTS ===

    def send_bytes(self, data: bytes):
        try:
            self.sock.sendall(data)
        except OSError as e:
            raise ConnectionClosed(f"Envoi impossible vers {self.peer}: {e}") from e
        self.transcript.outbound(data)

    def read_chunk(self) -> bytes:
        chunk = read_chunk(self.sock, self.receive_chunk_size)
        self.transcript.inbound(chunk)
        return chunk

    # === HEL / ACK / ERR ===

    def send_raw(self, message):
        """Envoie un HelloMessage, AcknowledgeMessage ou ErrorMessage."""
        chunk = encode_chunks(message, HeaderKind.RAW, max_chunk_size=self.send_chunk_size)[0]
        with self._send_lock:
            self.send_bytes(chunk)

    def send_error(self, status: int, reason: str = ''):
        """Émet un ERR puis ferme la connexion; les erreurs d'envoi sont ignorées."""
        try:
            self.send_raw(ErrorMessage(error=int(status), reason=reason or None))
        except (ConnectionClosed, CodecError):
            pass
        self.logger.debug(f"📡 ERR 0x{int(status):08X} envoyé à {self.peer}")
        self.close()

    def hello(self, endpoint_url: str) -> AcknowledgeMessage:
        """
        Côté client: HEL puis attente de l'ACK; la taille d'envoi est
        ajustée au tampon de réception annoncé par le serveur.

        Raises:
            ServerRejected: le serveur répond par ERR
            ProtocolError: réponse autre qu'ACK
        """
        self.send_raw(HelloMessage(
            protocol_version=0,
            receive_buffer_size=self.receive_chunk_size,
            send_buffer_size=self.send_chunk_size,
            max_message_size=0,
            max_chunk_count=self.max_chunk_count,
            endpoint_url=endpoint_url,
        ))
        chunk = self.read_chunk()
        message = decode_raw_message(chunk[:3], chunk[MESSAGE_HEADER_SIZE:]) \
            if chunk[:3] in (b'ACK', b'ERR') else None
        if isinstance(message, ErrorMessage):
            raise ServerRejected(message.error, message.reason)
        if not isinstance(message, AcknowledgeMessage):
            raise ProtocolError(f"ACK attendu, {chunk[:3]!r} reçu", StatusCode.BadTcpMessageTypeInvalid)
        self.send_chunk_size = negotiated_size(self.send_chunk_size, message.receive_buffer_size)
        return message

    def acknowledge(self, hello: HelloMessage) -> AcknowledgeMessage:
        """Côté serveur: répond à un HEL en négociant les tailles de chunk."""
        self.send_chunk_size = negotiated_size(self.send_chunk_size, hello.receive_buffer_size)
        self.receive_chunk_size = negotiated_size(self.receive_chunk_size, hello.send_buffer_size)
        ack = AcknowledgeMessage(
            protocol_version=0,
            receive_buffer_size=self.receive_chunk_size,
            send_buffer_size=self.send_chunk_size,
            max_message_size=0,
            max_chunk_count=self.max_chunk_count,
        )
        self.send_raw(ack)
        return ack

    # === OPN ===

    def send_open(self, body, request_id: Optional[int] = None) -> int:
        """
        Émet un OPN; il est protégé dès que la politique du canal n'est
        pas None.

        Returns:
            request_id utilisé
        """
        state = self._require_state()
        request_id = request_id if request_id is not None else state.next_request_id()
        with self._send_lock:
            chunk = encode_chunks(body, HeaderKind.ASYMMETRIC, state,
                                  max_chunk_size=self.send_chunk_size, request_id=request_id)[0]
            if not state.suite.is_none:
                chunk = protect_open_secure_channel(
                    chunk, state.local_identity, state.remote_certificate, state.suite,
                    max_chunk_size=self.send_chunk_size)
            self.send_bytes(chunk)
        return request_id

    def receive_open(self, identity: Optional[ApplicationIdentity],
                     trust_check: Callable[[CertificateRecord], object],
                     chunk: Optional[bytes] = None
                     ) -> Tuple[object, SequenceHeader, Optional[CertificateRecord], SecurityHeaderAsymmetric]:
        """
        Lit (ou reçoit) un chunk OPN, le déchiffre si nécessaire et le décode.

        Returns:
            (corps, en-tête de séquence, certificat de l'émetteur ou None,
            en-tête de sécurité asymétrique)

        Raises:
            ServerRejected, TrustRejected, PolicyUnsupported, SecurityError,
            CodecError
        """
        chunk = chunk if chunk is not None else self.read_chunk()
        self._raise_if_error(chunk)
        if chunk[:3] != b'OPN':
            raise ProtocolError(f"OPN attendu, {chunk[:3]!r} reçu", StatusCode.BadTcpMessageTypeInvalid)
        if chunk[3:4] != b'F':
            raise Malformed("OPN découpé en plusieurs chunks")

        security_header = SecurityHeaderAsymmetric.read(BinaryReader(chunk, MESSAGE_HEADER_SIZE))
        suite = suite_for_uri(security_header.security_policy_uri)
        sender = None
        if suite.is_none:
            plain = chunk
        else:
            if identity is None:
                raise PolicyNone("OPN sécurisé reçu sans identité locale")
            plain, sender = unprotect_open_secure_channel(chunk, identity, trust_check)

        body, sequence = reassemble([plain])
        self.last_request_id = sequence.request_id
        if self.state is not None:
            self.state.recv_sequence = sequence.sequence_number
        return body, sequence, sender, security_header

    # === MSG / CLO ===

    def send_message(self, body, request_id: Optional[int] = None) -> int:
        """
        Découpe, protège et émet un corps de service sur le canal ouvert.

        Returns:
            request_id utilisé
        """
        state = self._require_state()
        request_id = request_id if request_id is not None else state.next_request_id()
        with self._send_lock:
            chunks = encode_chunks(body, HeaderKind.SYMMETRIC, state, max_chunk_size=self.send_chunk_size,
                                   max_chunk_count=self.max_chunk_count, request_id=request_id)
            for chunk in chunks:
                self.send_bytes(protect_chunk(chunk, state))
        return request_id

    def receive_message(self, first_chunk: Optional[bytes] = None) -> Tuple[object, SequenceHeader]:
        """
        Lit les chunks d'un message jusqu'au drapeau F (ou A), les
        déprotège un à un et réassemble le corps.

        Raises:
            ServerRejected: ERR reçu
            AbortReceived: chunk A
            ProtocolError: canal inconnu ou trop de chunks
            SecurityError, CodecError
        """
        state = self._require_state()
        plain_chunks: List[bytes] = []
        chunk = first_chunk
        while True:
            if chunk is None:
                chunk = self.read_chunk()
            self._raise_if_error(chunk)
            if chunk[:3] not in (b'MSG', b'CLO'):
                raise ProtocolError(f"MSG attendu, {chunk[:3]!r} reçu", StatusCode.BadTcpMessageTypeInvalid)
            if len(chunk) < SYMMETRIC_PREFIX_SIZE:
                raise Truncated(f"Chunk {chunk[:3]!r} de {len(chunk)} octets sans en-tête de sécurité")
            channel_id, token_id = struct.unpack_from('<II', chunk, MESSAGE_HEADER_SIZE)
            if channel_id != state.channel_id:
                raise ProtocolError(f"Canal {channel_id} inconnu (attendu {state.channel_id})",
                                    StatusCode.BadTcpSecureChannelUnknown)
            if token_id != state.token_id:
                raise ProtocolError(f"Jeton {token_id} non émis sur le canal {channel_id} "
                                    f"(attendu {state.token_id})", StatusCode.BadSecureChannelTokenUnknown)
            plain = unprotect_chunk(chunk, state)
            if len(plain) < SYMMETRIC_PREFIX_SIZE + SEQUENCE_HEADER_SIZE:
                raise Truncated(f"Chunk de {len(plain)} octets sans en-tête de séquence")
            self.last_request_id = struct.unpack_from('<I', plain, SYMMETRIC_PREFIX_SIZE + 4)[0]
            plain_chunks.append(plain)
            if len(plain_chunks) > self.max_chunk_count:
                raise ProtocolError(f"Plus de {self.max_chunk_count} chunks", StatusCode.BadTcpMessageTooLarge)
            if chunk[3:4] in (b'F', b'A'):
                break
            chunk = None
        return reassemble(plain_chunks)

    # === FERMETURE ===

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def _require_state(self) -> SecureChannelState:
        if self.state is None:
            raise SecurityError("Aucun canal sécurisé sur cette connexion")
        return self.state

    @staticmethod
    def _raise_if_error(chunk: bytes):
        if chunk[:3] == b'ERR':
            message = decode_raw_message(b'ERR', chunk[MESSAGE_HEADER_SIZE:])
            raise ServerRejected(message.error, message.reason)


def open_connection(host: str, port: int, timeout: float = 10.0, transcript: Optional[Transcript] = None,
                    max_chunk_size: int = DEFAULT_MAX_CHUNK_SIZE) -> UAConnection:
    """
    Ouvre une connexion TCP vers hôte:port.

    Raises:
        ConnectFailed: hôte injoignable ou port fermé
    """
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as e:
        raise ConnectFailed(f"Connexion impossible à {host}:{port}: {e}") from e
    sock.settimeout(timeout)
    return UAConnection(sock, transcript=transcript, max_chunk_size=max_chunk_size, peer=f"{host}:{port}")
