#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
HIÉRARCHIE D'EXCEPTIONS - OPC UA TRUSTKIT
Fichier: app/exceptions.py

Toutes les erreurs levées par la boîte à outils héritent de TrustKitError.
Chaque module (codec, pki, secchan, réseau, session, attaques, harnais)
possède sa propre sous-hiérarchie pour permettre un traitement ciblé.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from typing import Optional


class TrustKitError(Exception):
    """Erreur de base de la boîte à outils."""

    def __init__(self, message: str = '', status: Optional[int] = None):
        super().__init__(message or self.__class__.__name__)
        self.status = status


# === CODEC ===

class CodecError(TrustKitError):
    """Erreur d'encodage ou de décodage binaire."""


class UnsupportedKind(CodecError):
    pass


class Truncated(CodecError):
    pass


class Malformed(CodecError):
    pass


class BodyTooLarge(CodecError):
    pass


class SequenceGap(CodecError):
    pass


class MixedRequestIds(CodecError):
    pass


class AbortReceived(CodecError):
    """Un chunk avec le drapeau A a été reçu."""

    def __init__(self, status: int, reason: Optional[str] = None):
        super().__init__(f"Message abandonné par le pair: 0x{status:08X} {reason or ''}".strip(), status)
        self.reason = reason


# === PKI ===

class PkiError(TrustKitError):
    """Erreur liée aux certificats ou au magasin de confiance."""


class InvalidParameter(PkiError):
    pass


class UnparseableCertificate(PkiError):
    pass


class NotInRejectedList(PkiError):
    pass


# === CANAL SÉCURISÉ ===

class SecurityError(TrustKitError):
    """Erreur cryptographique ou de politique de sécurité."""


class NonceLengthMismatch(SecurityError):
    pass


class PlaintextTooLarge(SecurityError):
    pass


class PolicyNone(SecurityError):
    pass


class PolicyUnsupported(SecurityError):
    pass


class TrustRejected(SecurityError):
    """Le certificat du pair a été refusé par la politique de confiance."""

    def __init__(self, status: int, message: str = ''):
        super().__init__(message or f"Certificat refusé: 0x{status:08X}", status)


class SignatureInvalid(SecurityError):
    pass


class DecryptFailed(SecurityError):
    pass


class ThumbprintMismatch(SecurityError):
    pass


class MacInvalid(SecurityError):
    pass


class PaddingInvalid(SecurityError):
    pass


class PasswordTooLong(SecurityError):
    pass


class NonceMismatch(SecurityError):
    pass


class LengthFieldInvalid(SecurityError):
    pass


# === RÉSEAU ===

class NetworkError(TrustKitError):
    """Erreur de transport ou de protocole."""


class BindFailed(NetworkError):
    pass


class ConnectFailed(NetworkError):
    pass


class ProtocolError(NetworkError):
    pass


class ConnectionClosed(ProtocolError):
    pass


class ServerRejected(ProtocolError):
    """Le pair a répondu par un message ERR."""

    def __init__(self, status: int, reason: Optional[str] = None):
        super().__init__(f"ERR reçu: 0x{status:08X} {reason or ''}".strip(), status)
        self.reason = reason


class CertificateChanged(ProtocolError):
    pass


# === SESSION ===

class SessionError(TrustKitError):
    """Erreur au niveau session ou service."""


class AuthFailed(SessionError):
    pass


class ServiceFaultError(SessionError):
    """Le serveur a répondu par un ServiceFault ou un statut mauvais."""

    def __init__(self, status: int, message: str = ''):
        super().__init__(message or f"Service en échec: 0x{status:08X}", status)


# === CONFIGURATION / ATTAQUES / HARNAIS ===

class ConfigurationError(TrustKitError):
    pass


class AttackError(TrustKitError):
    pass


class ReplayFailed(AttackError):
    pass


class HarnessError(TrustKitError):
    pass


class HarnessTimeout(HarnessError):
    pass
