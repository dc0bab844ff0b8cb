#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE CERTIFICAT - OPC UA TRUSTKIT
Fichier: app/models/certificate.py

Certificat d'instance d'application (Application Instance Certificate)
et identité complète (certificat + clé privée).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, NamedTuple


@dataclass(frozen=True)
class CertificateRecord:
    """
    Certificat X.509 analysé.

    Attributes:
        der: Encodage DER complet
        thumbprint: SHA-1 du DER (20 octets)
        subject_common_name: CN du sujet
        application_uri: URI de l'extension subjectAltName
        not_before: Début de validité (UTC)
        not_after: Fin de validité (UTC)
        public_key: Clé publique RSA (cryptography)
    """
    der: bytes
    thumbprint: bytes
    subject_common_name: str
    application_uri: str
    not_before: datetime
    not_after: datetime
    public_key: Any = field(compare=False, repr=False)

    def __post_init__(self):
        if len(self.thumbprint) != 20:
            raise ValueError("thumbprint doit contenir 20 octets")
        if not self.application_uri:
            raise ValueError("application_uri ne peut pas être vide")

    @property
    def key_bits(self) -> int:
        return self.public_key.key_size

    @property
    def key_bytes(self) -> int:
        return self.public_key.key_size // 8

    @property
    def hex_thumbprint(self) -> str:
        return self.thumbprint.hex()

    def is_valid_at(self, moment: datetime) -> bool:
        return self.not_before <= moment <= self.not_after

    def to_dict(self) -> Dict[str, Any]:
        return {
            'thumbprint': self.hex_thumbprint,
            'subject_common_name': self.subject_common_name,
            'application_uri': self.application_uri,
            'not_before': self.not_before.isoformat(),
            'not_after': self.not_after.isoformat(),
            'key_bits': self.key_bits,
        }


class ApplicationIdentity(NamedTuple):
    """Certificat et clé privée RSA correspondante."""
    record: CertificateRecord
    private_key: Any

    @property
    def der(self) -> bytes:
        return self.record.der

    @property
    def application_uri(self) -> str:
        return self.record.application_uri
