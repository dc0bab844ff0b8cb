#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS TRANSPORT ET TRANSCRIPTIONS
Fichier: tests/test_transport.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import socket
import struct

import pytest

from app.exceptions import ConnectFailed, ConnectionClosed, Malformed, ProtocolError, Truncated
from app.models.channel import BASIC256SHA256, SecureChannelState
from app.protocol.chunks import HeaderKind, encode_chunks
from app.protocol.status import StatusCode
from app.protocol.structures import HelloMessage, MessageSecurityMode, OpenSecureChannelRequest, ReadRequest
from app.services.transcript import INBOUND, OUTBOUND, Transcript
from app.services.transport import UAConnection, negotiated_size, open_connection, read_chunk


@pytest.fixture
def socket_pair():
    left, right = socket.socketpair()
    left.settimeout(2.0)
    right.settimeout(2.0)
    yield left, right
    left.close()
    right.close()


def secure_open_chunk(client_identity, server_identity) -> bytes:
    state = SecureChannelState(suite=BASIC256SHA256, mode=MessageSecurityMode.SIGN_AND_ENCRYPT,
                               local_identity=client_identity, remote_certificate=server_identity.record)
    return encode_chunks(OpenSecureChannelRequest(), HeaderKind.ASYMMETRIC, state)[0]


class TestFraming:

    def test_read_chunk(self, socket_pair):
        left, right = socket_pair
        chunk = encode_chunks(HelloMessage(endpoint_url='opc.tcp://x:4840'), HeaderKind.RAW)[0]
        left.sendall(chunk[:5])
        left.sendall(chunk[5:])
        assert read_chunk(right) == chunk

    def test_oversized_chunk(self, socket_pair):
        left, right = socket_pair
        left.sendall(b'MSGF' + (100_000).to_bytes(4, 'little'))
        with pytest.raises(ProtocolError) as excinfo:
            read_chunk(right, max_size=65536)
        assert excinfo.value.status == StatusCode.BadTcpMessageTooLarge

    def test_peer_closed(self, socket_pair):
        left, right = socket_pair
        left.sendall(b'MSG')
        left.close()
        with pytest.raises(ConnectionClosed):
            read_chunk(right)

    def test_timeout(self, socket_pair):
        _, right = socket_pair
        right.settimeout(0.1)
        with pytest.raises(ProtocolError) as excinfo:
            read_chunk(right)
        assert excinfo.value.status == StatusCode.BadTimeout

    def test_garbage_header(self, socket_pair):
        left, right = socket_pair
        left.sendall(b'HTTP/1.1 200 OK\r\n')
        with pytest.raises(Malformed):
            read_chunk(right)

    @pytest.mark.parametrize('local,peer,expected', [
        (65536, 0, 65536),
        (65536, 16384, 16384),
        (65536, 1024, 8192),
    ])
    def test_negotiated_size(self, local, peer, expected):
        assert negotiated_size(local, peer) == expected

    def test_connect_refused(self):
        spare = socket.socket()
        spare.bind(('127.0.0.1', 0))
        port = spare.getsockname()[1]
        spare.close()
        with pytest.raises(ConnectFailed):
            open_connection('127.0.0.1', port, timeout=1.0)


class TestSymmetricReception:

    def test_message_on_issued_token(self, socket_pair):
        _, right = socket_pair
        connection = UAConnection(right, state=SecureChannelState(channel_id=5, token_id=1))
        chunk = encode_chunks(ReadRequest(max_age=250.0), HeaderKind.SYMMETRIC,
                              SecureChannelState(channel_id=5, token_id=1), request_id=7)[0]
        body, sequence = connection.receive_message(first_chunk=chunk)
        assert isinstance(body, ReadRequest)
        assert body.max_age == 250.0
        assert sequence.request_id == 7
        assert connection.last_request_id == 7

    def test_unknown_token_rejected(self, socket_pair):
        _, right = socket_pair
        connection = UAConnection(right, state=SecureChannelState(channel_id=5, token_id=1))
        chunk = encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC,
                              SecureChannelState(channel_id=5, token_id=99), request_id=1)[0]
        with pytest.raises(ProtocolError) as excinfo:
            connection.receive_message(first_chunk=chunk)
        assert excinfo.value.status == StatusCode.BadSecureChannelTokenUnknown

    def test_unknown_channel_rejected(self, socket_pair):
        _, right = socket_pair
        connection = UAConnection(right, state=SecureChannelState(channel_id=5, token_id=1))
        chunk = encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC,
                              SecureChannelState(channel_id=6, token_id=1), request_id=1)[0]
        with pytest.raises(ProtocolError) as excinfo:
            connection.receive_message(first_chunk=chunk)
        assert excinfo.value.status == StatusCode.BadTcpSecureChannelUnknown

    @pytest.mark.parametrize('chunk', [
        b'MSGF' + struct.pack('<II', 12, 5),
        b'MSGF' + struct.pack('<III', 16, 5, 1),
    ], ids=['sans_jeton', 'sans_sequence'])
    def test_short_chunks_truncated(self, socket_pair, chunk):
        _, right = socket_pair
        connection = UAConnection(right, state=SecureChannelState(channel_id=5, token_id=1))
        with pytest.raises(Truncated):
            connection.receive_message(first_chunk=chunk)


class TestTranscript:

    def test_write_and_read(self, tmp_path):
        path = tmp_path / 'session.tktr'
        transcript = Transcript(path, label='session')
        transcript.outbound(b'HELF\x08\x00\x00\x00')
        transcript.inbound(b'ACKF\x08\x00\x00\x00')

        reread = Transcript.read(path)
        assert [(r.direction, r.data) for r in reread] == [(r.direction, r.data) for r in transcript]
        assert reread.label == 'session'
        assert [row['message_type'] for row in reread.summary()] == ['HEL', 'ACK']
        assert [row['direction'] for row in reread.summary()] == ['out', 'in']

    def test_read_rejects_foreign_file(self, tmp_path):
        path = tmp_path / 'foreign.tktr'
        path.write_bytes(b'PNG\x00\x00')
        with pytest.raises(Malformed):
            Transcript.read(path)

    def test_in_memory(self):
        transcript = Transcript()
        transcript.outbound(b'abcd')
        assert transcript.locator is None
        assert len(transcript) == 1
        assert transcript.byte_count(OUTBOUND) == 4
        assert transcript.byte_count(INBOUND) == 0
        assert transcript.contains(b'bc')

    def test_completed_open(self, client_identity, server_identity):
        transcript = Transcript()
        chunk = secure_open_chunk(client_identity, server_identity)
        transcript.outbound(chunk)
        assert transcript.sent_open()
        assert not transcript.completed_open(client_identity.der)

        transcript.inbound(chunk)
        assert transcript.completed_open(client_identity.der)
        assert not transcript.completed_open(server_identity.der)

    def test_none_open_does_not_count(self):
        transcript = Transcript()
        chunk = encode_chunks(OpenSecureChannelRequest(), HeaderKind.ASYMMETRIC, SecureChannelState())[0]
        transcript.outbound(chunk)
        transcript.inbound(chunk)
        assert transcript.sent_open()
        assert not transcript.completed_open()
