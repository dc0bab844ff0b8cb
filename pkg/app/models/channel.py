#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE CANAL SÉCURISÉ - OPC UA TRUSTKIT
Fichier: app/models/channel.py

Suites de politiques de sécurité, clés symétriques dérivées et état d'un
canal sécurisé (identifiants, nonces, compteurs de séquence).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass
from typing import Dict, Optional

from app.exceptions import SequenceGap
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.protocol.structures import MessageSecurityMode

POLICY_NONE_URI = 'http://opcfoundation.org/UA/SecurityPolicy#None'
BASIC256SHA256_URI = 'http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256'

# Reconnues mais refusées
DEPRECATED_POLICY_URIS = frozenset({
    'http://opcfoundation.org/UA/SecurityPolicy#Basic128Rsa15',
    'http://opcfoundation.org/UA/SecurityPolicy#Basic256',
})

RSA_OAEP_SHA1_URI = 'http://www.w3.org/2001/04/xmlenc#rsa-oaep'
RSA_SHA256_URI = 'http://www.w3.org/2001/04/xmldsig-more#rsa-sha256'


@dataclass(frozen=True)
class SecurityPolicySuite:
    """
    Primitives cryptographiques d'une politique de sécurité.

    Les noms d'algorithmes sont descriptifs; l'implémentation se trouve
    dans app/services/secure_channel.py.
    """
    uri: str
    asymmetric_encryption: Optional[str] = None
    asymmetric_signature: Optional[str] = None
    symmetric_encryption: Optional[str] = None
    symmetric_signature: Optional[str] = None
    key_derivation: Optional[str] = None
    nonce_length: int = 0
    derived_signing_key_length: int = 0
    derived_encryption_key_length: int = 0
    iv_length: int = 0
    symmetric_signature_length: int = 0
    symmetric_block_size: int = 1

    @property
    def is_none(self) -> bool:
        return self.uri == POLICY_NONE_URI

    @property
    def derived_key_material_length(self) -> int:
        return self.derived_signing_key_length + self.derived_encryption_key_length + self.iv_length


POLICY_NONE = SecurityPolicySuite(uri=POLICY_NONE_URI)

BASIC256SHA256 = SecurityPolicySuite(
    uri=BASIC256SHA256_URI,
    asymmetric_encryption='RSA-OAEP-SHA1',
    asymmetric_signature='RSA-PKCS1v15-SHA256',
    symmetric_encryption='AES-256-CBC',
    symmetric_signature='HMAC-SHA256',
    key_derivation='P_SHA256',
    nonce_length=32,
    derived_signing_key_length=32,
    derived_encryption_key_length=32,
    iv_length=16,
    symmetric_signature_length=32,
    symmetric_block_size=16,
)

SUPPORTED_SUITES: Dict[str, SecurityPolicySuite] = {
    POLICY_NONE_URI: POLICY_NONE,
    BASIC256SHA256_URI: BASIC256SHA256,
}


@dataclass(frozen=True)
class ChannelKeys:
    local_signing: bytes
    local_encryption: bytes
    local_iv: bytes
    remote_signing: bytes
    remote_encryption: bytes
    remote_iv: bytes


@dataclass
class SecureChannelState:
    """
    État d'un canal sécurisé, confiné à un seul gestionnaire de connexion.

    send_sequence est le prochain numéro à émettre; recv_sequence le dernier
    numéro reçu (None avant le premier chunk).
    """
    channel_id: int = 0
    token_id: int = 0
    suite: SecurityPolicySuite = POLICY_NONE
    mode: MessageSecurityMode = MessageSecurityMode.NONE
    local_nonce: bytes = b''
    remote_nonce: bytes = b''
    keys: Optional[ChannelKeys] = None
    send_sequence: int = 1
    recv_sequence: Optional[int] = None
    local_identity: Optional[ApplicationIdentity] = None
    remote_certificate: Optional[CertificateRecord] = None
    next_request: int = 1
    max_chunk_size: int = 65536
    max_chunk_count: int = 64

    def __post_init__(self):
        if self.mode == MessageSecurityMode.NONE and not self.suite.is_none:
            raise ValueError("Le mode None impose la politique None")

    @property
    def is_secure(self) -> bool:
        return self.mode in (MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT)

    @property
    def is_open(self) -> bool:
        return self.token_id != 0 and (not self.is_secure or self.keys is not None)

    def security_overhead(self) -> int:
        """Octets ajoutés au maximum par la protection symétrique d'un chunk."""
        if self.mode == MessageSecurityMode.SIGN:
            return self.suite.symmetric_signature_length
        if self.mode == MessageSecurityMode.SIGN_AND_ENCRYPT:
            return self.suite.symmetric_signature_length + self.suite.symmetric_block_size
        return 0

    def next_send_sequence(self) -> int:
        number = self.send_sequence
        self.send_sequence += 1
        return number

    def next_request_id(self) -> int:
        number = self.next_request
        self.next_request += 1
        return number

    def accept_sequence(self, number: int):
        """Vérifie qu'un numéro reçu suit exactement le précédent."""
        if self.recv_sequence is not None and number != self.recv_sequence + 1:
            raise SequenceGap(f"Séquence {number} reçue après {self.recv_sequence}")
        self.recv_sequence = number
