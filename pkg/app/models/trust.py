#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE POLITIQUE DE CONFIANCE - OPC UA TRUSTKIT
Fichier: app/models/trust.py

Politiques de jugement des certificats pairs: la référence sécurisée
(Strict) et les trois profils défaillants (AcceptAll, AcceptAllDefaultFlag,
RejectedStore). Le magasin de confiance lui-même vit dans
app/services/pki_service.py.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, Optional

from app.protocol.status import StatusCode


class TrustPolicyKind(str, Enum):
    STRICT = 'Strict'
    ACCEPT_ALL = 'AcceptAll'
    ACCEPT_ALL_DEFAULT_FLAG = 'AcceptAllDefaultFlag'
    REJECTED_STORE = 'RejectedStore'


class AcceptanceBasis(str, Enum):
    """Raison pour laquelle un certificat a été accepté."""
    TRUSTLIST = 'trustlist'
    NO_VALIDATION = 'no_validation'
    AUTO_ACCEPT_FLAG = 'auto_accept_flag'
    PROMOTED = 'promoted'


@dataclass(frozen=True)
class TrustPolicy:
    kind: TrustPolicyKind = TrustPolicyKind.STRICT
    auto_accept: bool = True

    @classmethod
    def strict(cls) -> 'TrustPolicy':
        return cls(TrustPolicyKind.STRICT)

    @classmethod
    def accept_all(cls) -> 'TrustPolicy':
        return cls(TrustPolicyKind.ACCEPT_ALL)

    @classmethod
    def accept_all_default_flag(cls, auto_accept: bool = True) -> 'TrustPolicy':
        return cls(TrustPolicyKind.ACCEPT_ALL_DEFAULT_FLAG, auto_accept)

    @classmethod
    def rejected_store(cls) -> 'TrustPolicy':
        return cls(TrustPolicyKind.REJECTED_STORE)

    def describe(self) -> str:
        if self.kind == TrustPolicyKind.ACCEPT_ALL_DEFAULT_FLAG:
            return f"{self.kind.value}(auto_accept={str(self.auto_accept).lower()})"
        return self.kind.value


@dataclass(frozen=True)
class TrustDecision:
    """Résultat de validate_peer: Accept ou Reject(reason)."""
    accepted: bool
    reason: Optional[int] = None
    basis: Optional[AcceptanceBasis] = None

    @classmethod
    def accept(cls, basis: AcceptanceBasis) -> 'TrustDecision':
        return cls(True, None, basis)

    @classmethod
    def reject(cls, reason: int = StatusCode.BadCertificateUntrusted) -> 'TrustDecision':
        return cls(False, int(reason), None)

    def __bool__(self) -> bool:
        return self.accepted


@dataclass
class DecisionRecord:
    """Entrée du journal de décisions d'un magasin de confiance."""
    thumbprint: str
    application_uri: str
    policy: str
    accepted: bool
    basis: Optional[str] = None
    reason: Optional[int] = None
    decided_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'thumbprint': self.thumbprint,
            'application_uri': self.application_uri,
            'policy': self.policy,
            'accepted': self.accepted,
            'basis': self.basis,
            'reason': self.reason,
            'decided_at': self.decided_at.isoformat(),
        }
