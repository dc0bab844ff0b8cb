#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE CANAL SÉCURISÉ - OPC UA TRUSTKIT
Fichier: app/services/secure_channel.py

Réalisation cryptographique des modes et politiques de sécurité:
- protection asymétrique d'OpenSecureChannel (RSA-OAEP-SHA1 +
  RSA-PKCS1v15-SHA256)
- dérivation des clés symétriques à partir des nonces (P_SHA256)
- signature/chiffrement de chaque chunk (HMAC-SHA256, AES-256-CBC)
- jeton de mot de passe chiffré et signatures applicatives de session

Toutes les fonctions prennent et renvoient des chunks complets (en-tête
de message compris); la taille déclarée est recalculée à chaque étape.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import hmac as std_hmac
import secrets
import struct
from typing import Callable, Optional, Tuple, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives import hmac as crypto_hmac
from cryptography.hazmat.primitives.asymmetric import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from app.exceptions import (
    DecryptFailed, LengthFieldInvalid, MacInvalid, Malformed, NonceLengthMismatch, NonceMismatch,
    PaddingInvalid, PasswordTooLong, PlaintextTooLarge, PolicyNone, PolicyUnsupported,
    SecurityError, SignatureInvalid, ThumbprintMismatch, TrustRejected
)
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.models.channel import (
    DEPRECATED_POLICY_URIS, RSA_OAEP_SHA1_URI, RSA_SHA256_URI, SUPPORTED_SUITES,
    ChannelKeys, SecureChannelState, SecurityPolicySuite
)
from app.protocol.binary import BinaryReader
from app.protocol.chunks import (
    DEFAULT_MAX_CHUNK_SIZE, MESSAGE_HEADER_SIZE, SEQUENCE_HEADER_SIZE, SYMMETRIC_HEADER_SIZE,
    SecurityHeaderAsymmetric, decode_message_header
)
from app.protocol.status import StatusCode
from app.protocol.structures import MessageSecurityMode, SignatureData
from app.services.pki_service import parse_certificate
from app.utils.logger import get_logger

logger = get_logger(__name__)

SHA1_DIGEST_SIZE = 20
OAEP_SHA1_OVERHEAD = 2 * SHA1_DIGEST_SIZE + 2
SYMMETRIC_PREFIX_SIZE = MESSAGE_HEADER_SIZE + SYMMETRIC_HEADER_SIZE


def _oaep() -> padding.OAEP:
    return padding.OAEP(mgf=padding.MGF1(algorithm=hashes.SHA1()), algorithm=hashes.SHA1(), label=None)


def _with_size(chunk_prefix: bytes, size: int) -> bytes:
    """Remplace le champ taille (octets 4..8) d'un en-tête de message."""
    return chunk_prefix[:4] + struct.pack('<I', size) + chunk_prefix[8:]


# === POLITIQUES ET NONCES ===

def suite_for_uri(uri: Optional[str]) -> SecurityPolicySuite:
    """
    Retourne la suite implémentée pour une URI de politique.

    Raises:
        PolicyUnsupported: politique obsolète ou inconnue
    """
    suite = SUPPORTED_SUITES.get(uri or '')
    if suite is not None:
        return suite
    if uri in DEPRECATED_POLICY_URIS:
        raise PolicyUnsupported(f"Politique obsolète refusée: {uri}")
    raise PolicyUnsupported(f"Politique inconnue: {uri}")


def generate_nonce(suite: SecurityPolicySuite) -> bytes:
    """Nonce aléatoire de la longueur imposée par la suite (vide pour None)."""
    return secrets.token_bytes(suite.nonce_length) if suite.nonce_length else b''


# === DÉRIVATION DE CLÉS ===

def p_sha256(secret: bytes, seed: bytes, length: int) -> bytes:
    """
    Fonction d'expansion P_SHA256:
    A(0) = seed, A(i) = HMAC(secret, A(i-1)),
    sortie = HMAC(secret, A(1) + seed) || HMAC(secret, A(2) + seed) || ...
    """
    def mac(data: bytes) -> bytes:
        h = crypto_hmac.HMAC(secret, hashes.SHA256())
        h.update(data)
        return h.finalize()

    output = b''
    a = seed
    while len(output) < length:
        a = mac(a)
        output += mac(a + seed)
    return output[:length]


def _split_keys(material: bytes, suite: SecurityPolicySuite) -> Tuple[bytes, bytes, bytes]:
    s = suite.derived_signing_key_length
    e = suite.derived_encryption_key_length
    return material[:s], material[s:s + e], material[s + e:s + e + suite.iv_length]


def derive_keys(local_nonce: bytes, remote_nonce: bytes, suite: SecurityPolicySuite) -> ChannelKeys:
    """
    Dérive les clés des deux directions d'un canal.

    Les clés d'émission locales utilisent le nonce distant comme secret et
    le nonce local comme graine; les clés de réception l'inverse. Ainsi
    les clés locales d'un côté sont les clés distantes de l'autre.

    Raises:
        PolicyNone: suite None
        NonceLengthMismatch: nonce de longueur différente de la suite
    """
    if suite.is_none:
        raise PolicyNone("Pas de dérivation de clés pour la politique None")
    for name, nonce in (('local', local_nonce), ('remote', remote_nonce)):
        if nonce is None or len(nonce) != suite.nonce_length:
            raise NonceLengthMismatch(
                f"Nonce {name} de {len(nonce or b'')} octets, {suite.nonce_length} attendus")

    length = suite.derived_key_material_length
    local = _split_keys(p_sha256(remote_nonce, local_nonce, length), suite)
    remote = _split_keys(p_sha256(local_nonce, remote_nonce, length), suite)
    return ChannelKeys(
        local_signing=local[0], local_encryption=local[1], local_iv=local[2],
        remote_signing=remote[0], remote_encryption=remote[1], remote_iv=remote[2],
    )


# === PROTECTION ASYMÉTRIQUE (OPN) ===

def _asymmetric_padding(count: int, extra: bool) -> bytes:
    pad = bytes([count & 0xFF]) * (count + 1)
    if extra:
        pad += bytes([count >> 8])
    return pad


def protect_open_secure_channel(chunk: bytes, sender: ApplicationIdentity,
                                receiver_certificate: CertificateRecord,
                                suite: SecurityPolicySuite,
                                max_chunk_size: int = DEFAULT_MAX_CHUNK_SIZE) -> bytes:
    """
    Signe puis chiffre un chunk OPN non protégé.

    Le chunk doit déjà porter l'en-tête asymétrique (URI, certificat de
    l'émetteur, empreinte du destinataire). La signature couvre en-têtes
    (taille finale comprise), en-tête de séquence, corps et bourrage.

    Raises:
        PolicyNone: suite None
        PlaintextTooLarge: le message chiffré dépasse max_chunk_size
    """
    if suite.is_none:
        raise PolicyNone("OpenSecureChannel avec la politique None n'est pas protégé")

    reader = BinaryReader(chunk, MESSAGE_HEADER_SIZE)
    SecurityHeaderAsymmetric.read(reader)
    prefix, plain = bytes(chunk[:reader.offset]), bytes(chunk[reader.offset:])

    plain_block = receiver_certificate.key_bytes - OAEP_SHA1_OVERHEAD
    cipher_block = receiver_certificate.key_bytes
    signature_size = sender.record.key_bytes
    extra = receiver_certificate.key_bytes > 256

    overhead = 1 + (1 if extra else 0) + signature_size
    count = (plain_block - (len(plain) + overhead) % plain_block) % plain_block
    pad = _asymmetric_padding(count, extra)

    blocks = (len(plain) + len(pad) + signature_size) // plain_block
    size = len(prefix) + blocks * cipher_block
    if size > max_chunk_size:
        raise PlaintextTooLarge(f"OPN chiffré de {size} octets (maximum {max_chunk_size})")

    prefix = _with_size(prefix, size)
    signature = sender.private_key.sign(prefix + plain + pad, padding.PKCS1v15(), hashes.SHA256())
    to_encrypt = plain + pad + signature

    public_key = receiver_certificate.public_key
    ciphertext = b''.join(
        public_key.encrypt(to_encrypt[i:i + plain_block], _oaep())
        for i in range(0, len(to_encrypt), plain_block)
    )
    logger.debug(f"🔐 OPN protégé: {blocks} blocs RSA vers {receiver_certificate.application_uri}")
    return prefix + ciphertext


def unprotect_open_secure_channel(
        chunk: bytes, receiver: ApplicationIdentity,
        trust_check: Callable[[CertificateRecord], object]) -> Tuple[bytes, CertificateRecord]:
    """
    Vérifie et déchiffre un chunk OPN protégé.

    Le certificat de l'émetteur est extrait et soumis à trust_check AVANT
    tout déchiffrement; un refus interrompt le traitement.

    Args:
        chunk: Chunk OPN tel que reçu
        receiver: Identité locale (destinataire)
        trust_check: Renvoie une décision évaluée en booléen; l'attribut
            reason éventuel devient le statut de TrustRejected

    Returns:
        (chunk OPN en clair, certificat de l'émetteur)

    Raises:
        TrustRejected, ThumbprintMismatch, DecryptFailed, SignatureInvalid,
        PaddingInvalid, PolicyNone, PolicyUnsupported, UnparseableCertificate
    """
    header = decode_message_header(chunk)
    if header.message_type != b'OPN':
        raise Malformed(f"Chunk {header.message_type!r} reçu à la place d'OPN")

    reader = BinaryReader(chunk, MESSAGE_HEADER_SIZE)
    security_header = SecurityHeaderAsymmetric.read(reader)
    suite = suite_for_uri(security_header.security_policy_uri)
    if suite.is_none:
        raise PolicyNone("OPN non protégé")
    if not security_header.sender_certificate:
        raise Malformed("Certificat de l'émetteur absent de l'en-tête asymétrique")

    sender = parse_certificate(security_header.sender_certificate)
    decision = trust_check(sender)
    if not decision:
        reason = getattr(decision, 'reason', None) or StatusCode.BadCertificateUntrusted
        raise TrustRejected(reason)

    if security_header.receiver_certificate_thumbprint != receiver.record.thumbprint:
        raise ThumbprintMismatch("Empreinte du destinataire différente de notre certificat")

    prefix, ciphertext = bytes(chunk[:reader.offset]), bytes(chunk[reader.offset:])
    cipher_block = receiver.record.key_bytes
    if not ciphertext or len(ciphertext) % cipher_block:
        raise DecryptFailed(f"Chiffré de {len(ciphertext)} octets, non multiple de {cipher_block}")
    try:
        plaintext = b''.join(
            receiver.private_key.decrypt(ciphertext[i:i + cipher_block], _oaep())
            for i in range(0, len(ciphertext), cipher_block)
        )
    except ValueError as e:
        raise DecryptFailed(f"Déchiffrement RSA-OAEP impossible: {e}") from e

    signature_size = sender.key_bytes
    if len(plaintext) <= signature_size:
        raise SignatureInvalid("Message trop court pour contenir une signature")
    signed, signature = plaintext[:-signature_size], plaintext[-signature_size:]
    try:
        sender.public_key.verify(signature, prefix + signed, padding.PKCS1v15(), hashes.SHA256())
    except InvalidSignature as e:
        raise SignatureInvalid("Signature asymétrique invalide") from e

    extra = receiver.record.key_bytes > 256
    if extra:
        if len(signed) < 2:
            raise PaddingInvalid("Bourrage absent")
        count = (signed[-1] << 8) | signed[-2]
        pad_bytes, pad_length = signed[-(count + 2):-1], count + 2
    else:
        count = signed[-1]
        pad_bytes, pad_length = signed[-(count + 1):], count + 1
    if pad_length > len(signed) or any(b != (count & 0xFF) for b in pad_bytes):
        raise PaddingInvalid("Bourrage asymétrique incohérent")

    body = signed[:-pad_length]
    logger.debug(f"🔓 OPN déchiffré depuis {sender.application_uri}")
    return _with_size(prefix, len(prefix) + len(body)) + body, sender


# === PROTECTION SYMÉTRIQUE (MSG/CLO) ===

def _hmac_sha256(key: bytes, data: bytes) -> bytes:
    h = crypto_hmac.HMAC(key, hashes.SHA256())
    h.update(data)
    return h.finalize()


def _verify_hmac(key: bytes, data: bytes, mac: bytes):
    h = crypto_hmac.HMAC(key, hashes.SHA256())
    h.update(data)
    try:
        h.verify(mac)
    except InvalidSignature as e:
        raise MacInvalid("HMAC-SHA256 invalide") from e


def _aes(key: bytes, iv: bytes) -> Cipher:
    return Cipher(algorithms.AES(key), modes.CBC(iv))


def _sequence_number(chunk: bytes) -> Optional[int]:
    if len(chunk) < SYMMETRIC_PREFIX_SIZE + SEQUENCE_HEADER_SIZE or chunk[:3] not in (b'MSG', b'CLO'):
        return None
    return struct.unpack_from('<I', chunk, SYMMETRIC_PREFIX_SIZE)[0]


def protect_chunk(chunk: bytes, state: SecureChannelState) -> bytes:
    """
    Applique la protection symétrique du mode du canal à un chunk MSG/CLO.

    None: identité. Sign: HMAC ajouté. SignAndEncrypt: bourrage, HMAC,
    puis chiffrement AES-256-CBC de séquence + corps + bourrage + HMAC.
    """
    if state.mode == MessageSecurityMode.NONE:
        return chunk
    if state.keys is None:
        raise SecurityError("Canal sécurisé sans clés dérivées")

    keys, suite = state.keys, state.suite
    signature_length = suite.symmetric_signature_length
    prefix, plain = bytes(chunk[:SYMMETRIC_PREFIX_SIZE]), bytes(chunk[SYMMETRIC_PREFIX_SIZE:])

    if state.mode == MessageSecurityMode.SIGN:
        prefix = _with_size(prefix, len(chunk) + signature_length)
        signed = prefix + plain
        return signed + _hmac_sha256(keys.local_signing, signed)

    block = suite.symmetric_block_size
    count = (block - (len(plain) + 1 + signature_length) % block) % block
    pad = bytes([count]) * (count + 1)
    prefix = _with_size(prefix, SYMMETRIC_PREFIX_SIZE + len(plain) + len(pad) + signature_length)
    mac = _hmac_sha256(keys.local_signing, prefix + plain + pad)

    encryptor = _aes(keys.local_encryption, keys.local_iv).encryptor()
    return prefix + encryptor.update(plain + pad + mac) + encryptor.finalize()


def unprotect_chunk(data: bytes, state: SecureChannelState) -> bytes:
    """
    Inverse exact de protect_chunk; vérifie le HMAC avant le bourrage puis
    la continuité des numéros de séquence.

    Raises:
        MacInvalid, PaddingInvalid, SequenceGap
    """
    if state.mode == MessageSecurityMode.NONE:
        chunk = data
    else:
        chunk = _unprotect_secure(data, state)
    number = _sequence_number(chunk)
    if number is not None:
        state.accept_sequence(number)
    return chunk


def _unprotect_secure(data: bytes, state: SecureChannelState) -> bytes:
    if state.keys is None:
        raise SecurityError("Canal sécurisé sans clés dérivées")
    keys, suite = state.keys, state.suite
    signature_length = suite.symmetric_signature_length
    prefix, rest = bytes(data[:SYMMETRIC_PREFIX_SIZE]), bytes(data[SYMMETRIC_PREFIX_SIZE:])

    if state.mode == MessageSecurityMode.SIGN:
        if len(rest) < SEQUENCE_HEADER_SIZE + signature_length:
            raise MacInvalid("Chunk trop court pour contenir un HMAC")
        signed, mac = bytes(data[:-signature_length]), bytes(data[-signature_length:])
        _verify_hmac(keys.remote_signing, signed, mac)
        return _with_size(prefix, len(signed)) + signed[SYMMETRIC_PREFIX_SIZE:]

    block = suite.symmetric_block_size
    if not rest or len(rest) % block:
        raise MacInvalid(f"Chiffré de {len(rest)} octets, non multiple de {block}")
    decryptor = _aes(keys.remote_encryption, keys.remote_iv).decryptor()
    plain = decryptor.update(rest) + decryptor.finalize()
    if len(plain) < signature_length + 1:
        raise MacInvalid("Chunk trop court pour contenir un HMAC")

    signed, mac = plain[:-signature_length], plain[-signature_length:]
    _verify_hmac(keys.remote_signing, prefix + signed, mac)

    count = signed[-1]
    if count + 1 > len(signed) or any(b != count for b in signed[-(count + 1):]):
        raise PaddingInvalid("Bourrage symétrique incohérent")
    body = signed[:-(count + 1)]
    return _with_size(prefix, SYMMETRIC_PREFIX_SIZE + len(body)) + body


# === JETON DE MOT DE PASSE ===

def encrypt_password_token(password: str, server_certificate: Optional[CertificateRecord],
                           server_nonce: bytes, suite: SecurityPolicySuite) -> bytes:
    """
    Chiffre un mot de passe pour un UserNameIdentityToken.

    Clair = longueur (u32 LE, mot de passe + nonce) || UTF-8 || nonce,
    chiffré en un seul bloc RSA-OAEP-SHA1 avec la clé du serveur. Sous
    la politique None le mot de passe est transmis en clair.

    Raises:
        NonceLengthMismatch, PasswordTooLong
    """
    secret = (password or '').encode('utf-8')
    if suite.is_none:
        return secret
    if server_nonce is None or len(server_nonce) != suite.nonce_length:
        raise NonceLengthMismatch(f"Nonce serveur de {len(server_nonce or b'')} octets")
    if server_certificate is None:
        raise SecurityError("Certificat serveur requis pour chiffrer le jeton")

    plaintext = struct.pack('<I', len(secret) + len(server_nonce)) + secret + server_nonce
    capacity = server_certificate.key_bytes - OAEP_SHA1_OVERHEAD
    if len(plaintext) > capacity:
        raise PasswordTooLong(f"{len(plaintext)} octets pour une capacité OAEP de {capacity}")
    return server_certificate.public_key.encrypt(plaintext, _oaep())


def decrypt_password_token(token: bytes, private_key, expected_server_nonce: bytes) -> str:
    """
    Déchiffre un jeton produit par encrypt_password_token.

    Raises:
        DecryptFailed: clé incorrecte ou bloc invalide
        LengthFieldInvalid: champ longueur incohérent
        NonceMismatch: nonce différent de celui attendu
    """
    key_bytes = private_key.key_size // 8
    if not token or len(token) != key_bytes:
        raise DecryptFailed(f"Jeton de {len(token or b'')} octets pour une clé de {key_bytes}")
    try:
        plaintext = private_key.decrypt(bytes(token), _oaep())
    except ValueError as e:
        raise DecryptFailed("Jeton indéchiffrable avec cette clé") from e

    nonce = expected_server_nonce or b''
    if len(plaintext) < 4:
        raise LengthFieldInvalid("Champ longueur absent")
    length = struct.unpack_from('<I', plaintext)[0]
    if length != len(plaintext) - 4 or length < len(nonce):
        raise LengthFieldInvalid(f"Longueur annoncée {length} pour {len(plaintext) - 4} octets")

    secret, received_nonce = plaintext[4:4 + length - len(nonce)], plaintext[4 + length - len(nonce):]
    if not std_hmac.compare_digest(received_nonce, nonce):
        raise NonceMismatch("Nonce du jeton différent du nonce serveur attendu")
    try:
        return secret.decode('utf-8')
    except UnicodeDecodeError as e:
        raise LengthFieldInvalid("Mot de passe non UTF-8") from e


def password_token_algorithm(suite: SecurityPolicySuite) -> Optional[str]:
    return None if suite.is_none else RSA_OAEP_SHA1_URI


# === SIGNATURES APPLICATIVES DE SESSION ===

def sign_application_data(identity: ApplicationIdentity, certificate: bytes, nonce: bytes) -> SignatureData:
    """Signature RSA-SHA256 de certificat || nonce du pair."""
    signature = identity.private_key.sign(
        (certificate or b'') + (nonce or b''), padding.PKCS1v15(), hashes.SHA256())
    return SignatureData(algorithm=RSA_SHA256_URI, signature=signature)


def verify_application_data(signer: Union[CertificateRecord, bytes], certificate: bytes, nonce: bytes,
                            signature: SignatureData):
    """
    Vérifie une signature de session produite par sign_application_data.

    Raises:
        SignatureInvalid
    """
    record = signer if isinstance(signer, CertificateRecord) else parse_certificate(signer)
    if signature is None or not signature.signature or signature.algorithm != RSA_SHA256_URI:
        raise SignatureInvalid("Signature applicative absente ou d'algorithme inattendu")
    try:
        record.public_key.verify(signature.signature, (certificate or b'') + (nonce or b''),
                                 padding.PKCS1v15(), hashes.SHA256())
    except InvalidSignature as e:
        raise SignatureInvalid("Signature applicative invalide") from e


def open_channel_state(state: SecureChannelState, remote_nonce: bytes) -> SecureChannelState:
    """Enregistre le nonce du pair et dérive les clés si le mode est sécurisé."""
    state.remote_nonce = remote_nonce or b''
    if state.is_secure:
        state.keys = derive_keys(state.local_nonce, state.remote_nonce, state.suite)
    return state
