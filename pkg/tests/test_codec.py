#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS CODEC BINAIRE ET CHUNKS
Fichier: tests/test_codec.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import random
import string
import struct

import pytest

from app.exceptions import (
    AbortReceived, BodyTooLarge, CodecError, Malformed, MixedRequestIds, SequenceGap, Truncated, UnsupportedKind
)
from app.models.channel import SecureChannelState
from app.protocol.binary import MAX_ARRAY_LENGTH, BinaryWriter, decode_builtin, encode_builtin
from app.protocol.chunks import (
    MESSAGE_HEADER_SIZE, MIN_MAX_CHUNK_SIZE, HeaderKind, MessageHeader, SecurityHeaderSymmetric,
    SequenceHeader, decode_message_header, encode_chunks, parse_chunk, reassemble
)
from app.protocol.status import StatusCode
from app.protocol.structures import (
    ErrorMessage, HelloMessage, ReadRequest, ReadValueId, RequestHeader, UnknownService, WriteRequest,
    WriteValue, decode_service_body, encode_service_body, encode_struct
)
from app.protocol.types import BuiltinKind, DataValue, LocalizedText, NodeId, Variant


def random_text(rng: random.Random, size: int) -> str:
    alphabet = string.ascii_letters + string.digits + 'éàçüß€'
    return ''.join(rng.choice(alphabet) for _ in range(size))


def random_node_id(rng: random.Random) -> NodeId:
    choice = rng.randrange(3)
    if choice == 0:
        return NodeId(rng.randrange(0, 2 ** 32), rng.randrange(0, 2 ** 16))
    if choice == 1:
        return NodeId(random_text(rng, rng.randrange(1, 20)), rng.randrange(0, 5))
    return NodeId(bytes(rng.randrange(256) for _ in range(rng.randrange(1, 16))), 1)


def random_variant(rng: random.Random) -> Variant:
    choice = rng.randrange(5)
    if choice == 0:
        return Variant(BuiltinKind.DOUBLE, rng.uniform(-1e6, 1e6))
    if choice == 1:
        return Variant(BuiltinKind.INT64, rng.randrange(-2 ** 63, 2 ** 63))
    if choice == 2:
        return Variant(BuiltinKind.STRING, random_text(rng, rng.randrange(0, 40)))
    if choice == 3:
        return Variant(BuiltinKind.BOOLEAN, rng.random() < 0.5)
    return Variant(BuiltinKind.INT32, [rng.randrange(-2 ** 31, 2 ** 31) for _ in range(rng.randrange(0, 8))],
                   is_array=True)


def random_body(rng: random.Random):
    header = RequestHeader(
        authentication_token=random_node_id(rng),
        timestamp=rng.randrange(0, 2 ** 62),
        request_handle=rng.randrange(0, 2 ** 32),
        audit_entry_id=rng.choice([None, random_text(rng, 8)]),
    )
    if rng.random() < 0.5:
        return ReadRequest(request_header=header, max_age=rng.uniform(0, 1000), nodes_to_read=[
            ReadValueId(node_id=random_node_id(rng), attribute_id=rng.choice([4, 13]))
            for _ in range(rng.randrange(0, 6))
        ])
    return WriteRequest(request_header=header, nodes_to_write=[
        WriteValue(node_id=random_node_id(rng), value=DataValue(value=random_variant(rng)))
        for _ in range(rng.randrange(0, 6))
    ])


def symmetric_chunk(flag: bytes, body: bytes, sequence: int = 1, request_id: int = 1) -> bytes:
    size = MESSAGE_HEADER_SIZE + 16 + len(body)
    return (MessageHeader(b'MSG', flag, size).encode() + SecurityHeaderSymmetric(1, 1).encode()
            + SequenceHeader(sequence, request_id).encode() + body)


class TestBuiltins:
    """Encodage des types intégrés."""

    @pytest.mark.parametrize('kind,value', [
        (BuiltinKind.BOOLEAN, True),
        (BuiltinKind.INT16, -12345),
        (BuiltinKind.UINT32, 0xDEADBEEF),
        (BuiltinKind.DOUBLE, 21.5),
        (BuiltinKind.STRING, 'consigne °C'),
        (BuiltinKind.STRING, None),
        (BuiltinKind.BYTESTRING, b'\x00\x01\x02'),
        (BuiltinKind.NODEID, NodeId('setpoint', 1)),
        (BuiltinKind.NODEID, NodeId(85, 0)),
        (BuiltinKind.LOCALIZEDTEXT, LocalizedText('Capteur', 'fr')),
    ])
    def test_scalar_round_trip(self, kind, value):
        data = encode_builtin(value, kind)
        decoded, consumed = decode_builtin(data, kind)
        assert decoded == value
        assert consumed == len(data)

    def test_null_string_is_minus_one(self):
        assert encode_builtin(None, BuiltinKind.STRING) == struct.pack('<i', -1)

    def test_array_round_trip(self):
        data = encode_builtin([1, 2, 3], BuiltinKind.UINT16, array=True)
        assert decode_builtin(data, BuiltinKind.UINT16, array=True) == ([1, 2, 3], len(data))

    def test_two_byte_node_id_is_canonical(self):
        assert encode_builtin(NodeId(85, 0), BuiltinKind.NODEID) == b'\x00\x55'

    def test_non_canonical_node_id_rejected(self):
        with pytest.raises(Malformed):
            decode_builtin(b'\x01\x00\x55\x00', BuiltinKind.NODEID)

    def test_guid_node_id_unsupported(self):
        with pytest.raises(UnsupportedKind):
            decode_builtin(b'\x04\x00\x00' + bytes(16), BuiltinKind.NODEID)

    def test_truncated_string(self):
        with pytest.raises(Truncated):
            decode_builtin(struct.pack('<i', 10) + b'abc', BuiltinKind.STRING)

    def test_negative_length_rejected(self):
        with pytest.raises(Malformed):
            decode_builtin(struct.pack('<i', -5), BuiltinKind.STRING)

    def test_array_length_limit(self):
        data = struct.pack('<i', MAX_ARRAY_LENGTH + 1)
        with pytest.raises(Malformed):
            decode_builtin(data, BuiltinKind.BYTE, array=True)

    def test_non_canonical_boolean_rejected(self):
        with pytest.raises(Malformed):
            decode_builtin(b'\x02', BuiltinKind.BOOLEAN)

    def test_invalid_utf8_decoded_with_replacement(self):
        value, _ = decode_builtin(struct.pack('<i', 2) + b'\xff\xfe', BuiltinKind.STRING)
        assert '�' in value

    def test_out_of_range_value_refused_on_encode(self):
        writer = BinaryWriter()
        with pytest.raises(Malformed):
            writer.write(BuiltinKind.BYTE, 300)


class TestServiceBodies:

    def test_unknown_type_preserved(self):
        body = UnknownService(type_id=NodeId(999, 0), payload=b'\x01\x02\x03')
        assert decode_service_body(encode_service_body(body)) == body

    def test_trailing_bytes_rejected(self):
        data = encode_service_body(ReadRequest()) + b'\x00'
        with pytest.raises(Malformed):
            decode_service_body(data)


class TestChunks:

    @pytest.mark.parametrize('seed', range(5))
    def test_round_trip(self, seed):
        rng = random.Random(seed)
        channel = SecureChannelState()
        for _ in range(200):
            body = random_body(rng)
            decoded, sequence = reassemble(encode_chunks(body, HeaderKind.SYMMETRIC, channel))
            assert decoded == body
            assert sequence is not None

    def test_large_body_is_split(self):
        channel = SecureChannelState()
        body = WriteRequest(nodes_to_write=[
            WriteValue(node_id=NodeId('big', 1), value=DataValue(value=Variant(BuiltinKind.STRING, 'x' * 30000)))
        ])
        chunks = encode_chunks(body, HeaderKind.SYMMETRIC, channel, max_chunk_size=MIN_MAX_CHUNK_SIZE)
        assert len(chunks) > 1
        assert all(len(chunk) <= MIN_MAX_CHUNK_SIZE for chunk in chunks)
        assert [chunk[3:4] for chunk in chunks] == [b'C'] * (len(chunks) - 1) + [b'F']
        assert reassemble(chunks)[0] == body

    def test_sequence_numbers_increase(self):
        channel = SecureChannelState()
        first = parse_chunk(encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, channel)[0])
        second = parse_chunk(encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, channel)[0])
        assert second.sequence_header.sequence_number == first.sequence_header.sequence_number + 1
        assert second.sequence_header.request_id != first.sequence_header.request_id

    def test_raw_hello(self):
        hello = HelloMessage(endpoint_url='opc.tcp://127.0.0.1:4840')
        chunks = encode_chunks(hello, HeaderKind.RAW)
        assert chunks[0][:4] == b'HELF'
        assert reassemble(chunks) == (hello, None)

    def test_gap_detected(self):
        channel = SecureChannelState()
        body = WriteRequest(nodes_to_write=[
            WriteValue(node_id=NodeId('big', 1), value=DataValue(value=Variant(BuiltinKind.STRING, 'y' * 20000)))
        ])
        chunks = encode_chunks(body, HeaderKind.SYMMETRIC, channel, max_chunk_size=MIN_MAX_CHUNK_SIZE)
        assert len(chunks) >= 3
        with pytest.raises(SequenceGap):
            reassemble([chunks[0]] + chunks[2:])

    def test_mixed_request_ids(self):
        channel = SecureChannelState()
        body = WriteRequest(nodes_to_write=[
            WriteValue(node_id=NodeId('big', 1), value=DataValue(value=Variant(BuiltinKind.STRING, 'z' * 10000)))
        ])
        first = encode_chunks(body, HeaderKind.SYMMETRIC, channel, max_chunk_size=MIN_MAX_CHUNK_SIZE)
        second = encode_chunks(body, HeaderKind.SYMMETRIC, channel, max_chunk_size=MIN_MAX_CHUNK_SIZE)
        with pytest.raises(MixedRequestIds):
            reassemble([first[0]] + second[1:])

    def test_abort_chunk(self):
        abort = encode_struct(ErrorMessage(StatusCode.BadTcpMessageTooLarge, 'trop gros'))
        with pytest.raises(AbortReceived) as excinfo:
            reassemble([symmetric_chunk(b'C', b'partial', 1), symmetric_chunk(b'A', abort, 2)])
        assert excinfo.value.status == StatusCode.BadTcpMessageTooLarge

    def test_body_too_large(self):
        body = WriteRequest(nodes_to_write=[
            WriteValue(node_id=NodeId('big', 1), value=DataValue(value=Variant(BuiltinKind.STRING, 'w' * 20000)))
        ])
        with pytest.raises(BodyTooLarge):
            encode_chunks(body, HeaderKind.SYMMETRIC, SecureChannelState(), max_chunk_size=MIN_MAX_CHUNK_SIZE,
                          max_chunk_count=1)

    def test_chunk_size_floor(self):
        with pytest.raises(Malformed):
            encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, SecureChannelState(), max_chunk_size=1024)

    @pytest.mark.parametrize('data,error', [
        (b'MSG', Truncated),
        (b'XYZF\x10\x00\x00\x00', Malformed),
        (b'MSGQ\x10\x00\x00\x00', Malformed),
        (b'MSGF\x04\x00\x00\x00', Malformed),
        (b'HELC\x10\x00\x00\x00', Malformed),
    ])
    def test_invalid_headers(self, data, error):
        with pytest.raises(error):
            decode_message_header(data)

    def test_declared_size_must_match(self):
        chunk = encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, SecureChannelState())[0]
        with pytest.raises(Malformed):
            parse_chunk(chunk + b'\x00')


class TestFuzz:
    """Les octets arbitraires lèvent une erreur de codec, jamais autre chose."""

    @staticmethod
    def _decode_everything(data: bytes):
        for decoder in (decode_service_body, parse_chunk, lambda d: reassemble([d])):
            try:
                decoder(data)
            except CodecError:
                pass

    @pytest.mark.parametrize('seed', range(4))
    def test_random_bytes(self, seed):
        rng = random.Random(seed)
        for _ in range(2500):
            self._decode_everything(bytes(rng.randrange(256) for _ in range(rng.randrange(0, 96))))

    @pytest.mark.parametrize('seed', range(4))
    def test_mutated_valid_chunks(self, seed):
        rng = random.Random(1000 + seed)
        channel = SecureChannelState()
        for _ in range(300):
            chunk = bytearray(encode_chunks(random_body(rng), HeaderKind.SYMMETRIC, channel)[0])
            for _ in range(rng.randrange(1, 4)):
                chunk[rng.randrange(len(chunk))] = rng.randrange(256)
            self._decode_everything(bytes(chunk))

    @pytest.mark.slow
    def test_hundred_thousand_sequences(self):
        rng = random.Random(42)
        for _ in range(100_000):
            self._decode_everything(bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64))))

    @pytest.mark.slow
    def test_ten_thousand_round_trips(self):
        rng = random.Random(7)
        channel = SecureChannelState()
        for _ in range(10_000):
            body = random_body(rng)
            assert reassemble(encode_chunks(body, HeaderKind.SYMMETRIC, channel))[0] == body
