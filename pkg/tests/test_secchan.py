#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS CANAL SÉCURISÉ
Fichier: tests/test_secchan.py

Dérivation de clés comparée à un oracle P_SHA256 écrit avec hmac de la
bibliothèque standard, protection des chunks et jetons de mot de passe.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import hashlib
import hmac
import random

import pytest

from app.exceptions import (
    DecryptFailed, NonceLengthMismatch, NonceMismatch, PasswordTooLong, PolicyNone, PolicyUnsupported,
    SecurityError, SequenceGap, SignatureInvalid, ThumbprintMismatch, TrustRejected
)
from app.models.certificate import ApplicationIdentity
from app.models.channel import BASIC256SHA256, BASIC256SHA256_URI, POLICY_NONE, SecureChannelState
from app.models.trust import TrustDecision
from app.protocol.chunks import HeaderKind, encode_chunks
from app.protocol.status import StatusCode
from app.protocol.structures import (
    MessageSecurityMode, OpenSecureChannelRequest, ReadRequest, ReadValueId, WriteRequest, WriteValue
)
from app.protocol.types import BuiltinKind, DataValue, NodeId, Variant
from app.services.secure_channel import (
    decrypt_password_token, derive_keys, encrypt_password_token, generate_nonce, open_channel_state,
    p_sha256, protect_chunk, protect_open_secure_channel, sign_application_data, suite_for_uri,
    unprotect_chunk, unprotect_open_secure_channel, verify_application_data
)


def oracle_p_sha256(secret: bytes, seed: bytes, length: int) -> bytes:
    """A(0) = seed; A(i) = HMAC(secret, A(i-1)); sortie = concat HMAC(secret, A(i) + seed)."""
    output = bytearray()
    a = seed
    while len(output) < length:
        a = hmac.new(secret, a, hashlib.sha256).digest()
        output.extend(hmac.new(secret, a + seed, hashlib.sha256).digest())
    return bytes(output[:length])


def channel_pair(mode=MessageSecurityMode.SIGN_AND_ENCRYPT):
    """Deux états de canal aux clés croisées (client, serveur)."""
    client_nonce, server_nonce = generate_nonce(BASIC256SHA256), generate_nonce(BASIC256SHA256)
    client = SecureChannelState(channel_id=7, token_id=1, suite=BASIC256SHA256, mode=mode,
                                local_nonce=client_nonce)
    server = SecureChannelState(channel_id=7, token_id=1, suite=BASIC256SHA256, mode=mode,
                                local_nonce=server_nonce)
    open_channel_state(client, server_nonce)
    open_channel_state(server, client_nonce)
    return client, server


def write_body(size: int = 10) -> WriteRequest:
    return WriteRequest(nodes_to_write=[
        WriteValue(node_id=NodeId('setpoint', 1), value=DataValue(value=Variant(BuiltinKind.STRING, 'v' * size)))
    ])


class TestKeyDerivation:

    def test_oracle_sanity(self):
        # une seule itération: HMAC(secret, HMAC(secret, seed) + seed)
        secret, seed = b'k' * 32, b's' * 32
        expected = hmac.new(secret, hmac.new(secret, seed, hashlib.sha256).digest() + seed,
                            hashlib.sha256).digest()
        assert oracle_p_sha256(secret, seed, 32) == expected

    @pytest.mark.parametrize('length', [1, 32, 33, 80, 200])
    def test_p_sha256_matches_oracle(self, length):
        secret, seed = bytes(range(32)), bytes(range(32, 64))
        assert p_sha256(secret, seed, length) == oracle_p_sha256(secret, seed, length)

    def test_derive_keys_matches_oracle_on_hundred_pairs(self):
        rng = random.Random(2024)
        suite = BASIC256SHA256
        for _ in range(100):
            local = bytes(rng.randrange(256) for _ in range(32))
            remote = bytes(rng.randrange(256) for _ in range(32))
            keys = derive_keys(local, remote, suite)
            local_material = oracle_p_sha256(remote, local, 80)
            remote_material = oracle_p_sha256(local, remote, 80)
            assert keys.local_signing == local_material[:32]
            assert keys.local_encryption == local_material[32:64]
            assert keys.local_iv == local_material[64:80]
            assert keys.remote_signing == remote_material[:32]
            assert keys.remote_encryption == remote_material[32:64]
            assert keys.remote_iv == remote_material[64:80]

    def test_keys_are_mirrored(self):
        a, b = generate_nonce(BASIC256SHA256), generate_nonce(BASIC256SHA256)
        mine, theirs = derive_keys(a, b, BASIC256SHA256), derive_keys(b, a, BASIC256SHA256)
        assert mine.local_signing == theirs.remote_signing
        assert mine.local_encryption == theirs.remote_encryption
        assert mine.local_iv == theirs.remote_iv

    def test_policy_none_has_no_keys(self):
        with pytest.raises(PolicyNone):
            derive_keys(b'', b'', POLICY_NONE)

    def test_nonce_length_checked(self):
        with pytest.raises(NonceLengthMismatch):
            derive_keys(b'\x00' * 16, b'\x00' * 32, BASIC256SHA256)

    def test_nonce_lengths(self):
        assert len(generate_nonce(BASIC256SHA256)) == 32
        assert generate_nonce(POLICY_NONE) == b''


class TestPolicies:

    def test_supported(self):
        assert suite_for_uri(BASIC256SHA256_URI) is BASIC256SHA256

    @pytest.mark.parametrize('uri', [
        'http://opcfoundation.org/UA/SecurityPolicy#Basic128Rsa15',
        'http://opcfoundation.org/UA/SecurityPolicy#Basic256',
        'http://example.com/unknown',
    ])
    def test_deprecated_or_unknown_refused(self, uri):
        with pytest.raises(PolicyUnsupported):
            suite_for_uri(uri)


class TestSymmetricProtection:

    @pytest.mark.parametrize('mode', [MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT])
    def test_round_trip(self, mode):
        client, server = channel_pair(mode)
        for size in (0, 1, 15, 16, 17, 1000):
            chunk = encode_chunks(write_body(size), HeaderKind.SYMMETRIC, client)[0]
            assert unprotect_chunk(protect_chunk(chunk, client), server) == chunk

    def test_encrypted_body_hides_plaintext(self):
        client, _ = channel_pair()
        chunk = encode_chunks(write_body(64), HeaderKind.SYMMETRIC, client)[0]
        assert b'v' * 64 in chunk
        assert b'v' * 64 not in protect_chunk(chunk, client)

    def test_none_mode_is_identity(self):
        state = SecureChannelState()
        chunk = encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, state)[0]
        assert protect_chunk(chunk, state) == chunk

    @pytest.mark.parametrize('mode', [MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT])
    def test_tamper_rejected(self, mode):
        client, server = channel_pair(mode)
        chunk = encode_chunks(ReadRequest(nodes_to_read=[ReadValueId(node_id=NodeId('sensor', 1))]),
                              HeaderKind.SYMMETRIC, client)[0]
        protected = protect_chunk(chunk, client)
        rng = random.Random(5)
        for position in sorted(rng.sample(range(len(protected)), 40)) + [len(protected) - 1]:
            tampered = bytearray(protected)
            tampered[position] ^= 0x01
            with pytest.raises(SecurityError):
                unprotect_chunk(bytes(tampered), server)
        assert unprotect_chunk(protected, server) == chunk

    def test_replay_rejected(self):
        client, server = channel_pair()
        protected = protect_chunk(encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, client)[0], client)
        unprotect_chunk(protected, server)
        with pytest.raises(SequenceGap):
            unprotect_chunk(protected, server)

    def test_wrong_direction_keys_rejected(self):
        client, _ = channel_pair()
        other_client, _ = channel_pair()
        protected = protect_chunk(encode_chunks(ReadRequest(), HeaderKind.SYMMETRIC, client)[0], client)
        with pytest.raises(SecurityError):
            unprotect_chunk(protected, other_client)

    @pytest.mark.slow
    def test_exhaustive_single_byte_tamper(self):
        client, server = channel_pair()
        protected = protect_chunk(encode_chunks(write_body(40), HeaderKind.SYMMETRIC, client)[0], client)
        for position in range(len(protected)):
            tampered = bytearray(protected)
            tampered[position] ^= 0xFF
            with pytest.raises(SecurityError):
                unprotect_chunk(bytes(tampered), server)


class TestAsymmetricProtection:

    @staticmethod
    def _open_chunk(sender, receiver):
        state = SecureChannelState(suite=BASIC256SHA256, mode=MessageSecurityMode.SIGN_AND_ENCRYPT,
                                   local_nonce=generate_nonce(BASIC256SHA256), local_identity=sender,
                                   remote_certificate=receiver.record)
        body = OpenSecureChannelRequest(security_mode=MessageSecurityMode.SIGN_AND_ENCRYPT,
                                        client_nonce=state.local_nonce)
        return encode_chunks(body, HeaderKind.ASYMMETRIC, state)[0]

    def test_round_trip(self, client_identity, server_identity):
        chunk = self._open_chunk(client_identity, server_identity)
        protected = protect_open_secure_channel(chunk, client_identity, server_identity.record, BASIC256SHA256)
        plain, sender = unprotect_open_secure_channel(protected, server_identity, lambda peer: True)
        assert plain == chunk
        assert sender.der == client_identity.der

    def test_trust_checked_before_decryption(self, client_identity, server_identity, mocker):
        chunk = self._open_chunk(client_identity, server_identity)
        protected = protect_open_secure_channel(chunk, client_identity, server_identity.record, BASIC256SHA256)
        private_key = mocker.Mock()
        receiver = ApplicationIdentity(server_identity.record, private_key)
        with pytest.raises(TrustRejected) as excinfo:
            unprotect_open_secure_channel(protected, receiver, lambda peer: TrustDecision.reject())
        assert excinfo.value.status == StatusCode.BadCertificateUntrusted
        private_key.decrypt.assert_not_called()

    def test_wrong_receiver(self, client_identity, server_identity, stranger_identity):
        chunk = self._open_chunk(client_identity, server_identity)
        protected = protect_open_secure_channel(chunk, client_identity, server_identity.record, BASIC256SHA256)
        with pytest.raises(ThumbprintMismatch):
            unprotect_open_secure_channel(protected, stranger_identity, lambda peer: True)

    def test_tampered_ciphertext(self, client_identity, server_identity):
        chunk = self._open_chunk(client_identity, server_identity)
        protected = bytearray(protect_open_secure_channel(chunk, client_identity, server_identity.record,
                                                          BASIC256SHA256))
        protected[-10] ^= 0x01
        with pytest.raises((DecryptFailed, SignatureInvalid)):
            unprotect_open_secure_channel(bytes(protected), server_identity, lambda peer: True)

    def test_policy_none_not_protected(self, client_identity, server_identity):
        with pytest.raises(PolicyNone):
            protect_open_secure_channel(b'', client_identity, server_identity.record, POLICY_NONE)


class TestPasswordToken:

    def test_round_trip(self, server_identity):
        nonce = generate_nonce(BASIC256SHA256)
        token = encrypt_password_token('secret', server_identity.record, nonce, BASIC256SHA256)
        assert len(token) == server_identity.record.key_bytes
        assert b'secret' not in token
        assert decrypt_password_token(token, server_identity.private_key, nonce) == 'secret'

    def test_unicode_password(self, server_identity):
        nonce = generate_nonce(BASIC256SHA256)
        token = encrypt_password_token('mötdepässe€', server_identity.record, nonce, BASIC256SHA256)
        assert decrypt_password_token(token, server_identity.private_key, nonce) == 'mötdepässe€'

    def test_nonce_mismatch(self, server_identity):
        token = encrypt_password_token('secret', server_identity.record, generate_nonce(BASIC256SHA256),
                                       BASIC256SHA256)
        with pytest.raises(NonceMismatch):
            decrypt_password_token(token, server_identity.private_key, generate_nonce(BASIC256SHA256))

    def test_wrong_key(self, server_identity, stranger_identity):
        nonce = generate_nonce(BASIC256SHA256)
        token = encrypt_password_token('secret', server_identity.record, nonce, BASIC256SHA256)
        with pytest.raises(DecryptFailed):
            decrypt_password_token(token, stranger_identity.private_key, nonce)

    def test_password_too_long(self, server_identity):
        with pytest.raises(PasswordTooLong):
            encrypt_password_token('x' * 200, server_identity.record, generate_nonce(BASIC256SHA256),
                                   BASIC256SHA256)

    def test_policy_none_sends_plaintext(self):
        assert encrypt_password_token('secret', None, b'', POLICY_NONE) == b'secret'


class TestApplicationSignatures:

    def test_sign_and_verify(self, client_identity, server_identity):
        nonce = generate_nonce(BASIC256SHA256)
        signature = sign_application_data(client_identity, server_identity.der, nonce)
        verify_application_data(client_identity.record, server_identity.der, nonce, signature)
        verify_application_data(client_identity.der, server_identity.der, nonce, signature)

    def test_other_nonce_rejected(self, client_identity, server_identity):
        signature = sign_application_data(client_identity, server_identity.der, generate_nonce(BASIC256SHA256))
        with pytest.raises(SignatureInvalid):
            verify_application_data(client_identity.record, server_identity.der,
                                    generate_nonce(BASIC256SHA256), signature)

    def test_missing_signature(self, client_identity, server_identity):
        with pytest.raises(SignatureInvalid):
            verify_application_data(client_identity.record, server_identity.der, b'', None)
