#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE ÉVALUATION - OPC UA TRUSTKIT
Fichier: app/models/assessment.py

Scénarios d'évaluation, preuves collectées par les attaques, résultats
et rapport final avec la classe de défaut de confiance détectée.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional

REDACTED = '***'

EXIT_SECURE = 0
EXIT_ERROR = 1
EXIT_VULNERABLE = 2


class AttackKind(str, Enum):
    ROGUE_SERVER = 'RogueServer'
    ROGUE_CLIENT = 'RogueClient'
    MIDDLEPERSON = 'Middleperson'


class AttackResult(str, Enum):
    VULNERABLE = 'Vulnerable'
    SECURE = 'Secure'
    INCONCLUSIVE = 'Inconclusive'


class EvidenceKind(str, Enum):
    CREDENTIAL_CAPTURED = 'CredentialCaptured'
    UNTRUSTED_CHANNEL_ACCEPTED = 'UntrustedChannelAccepted'
    VALUE_READ = 'ValueRead'
    VALUE_WRITTEN = 'ValueWritten'
    SESSION_REPLAYED = 'SessionReplayed'
    FORWARDED_TRAFFIC = 'ForwardedTraffic'
    CERTIFICATE_PROMOTED = 'CertificatePromoted'
    ACCEPTANCE_OBSERVED = 'AcceptanceObserved'


class Side(str, Enum):
    CLIENT = 'client'
    SERVER = 'server'


class Profile(str, Enum):
    """Profils de confiance des victimes."""
    SECURE = 'Secure'
    P1_MISSING_TRUSTLIST = 'P1_MissingTrustlist'
    P2_DEFAULT_ACCEPT_ALL = 'P2_DefaultAcceptAll'
    P3_REJECTED_STORE_PROMOTION = 'P3_RejectedStorePromotion'


class UserAuth(str, Enum):
    ANONYMOUS = 'Anonymous'
    USERNAME = 'UserName'


class PitfallClass(str, Enum):
    """Catégories de défaut de gestion des certificats (i, ii, iii)."""
    MISSING_TRUSTLIST = 'MissingTrustlistSupport'
    TRUSTLIST_DISABLED_BY_DEFAULT = 'TrustlistDisabledByDefault'
    CERTIFICATE_EXCHANGE_IN_BAND = 'CertificateExchangeThroughSecureChannel'

    @property
    def numeral(self) -> str:
        return {
            PitfallClass.MISSING_TRUSTLIST: 'i',
            PitfallClass.TRUSTLIST_DISABLED_BY_DEFAULT: 'ii',
            PitfallClass.CERTIFICATE_EXCHANGE_IN_BAND: 'iii',
        }[self]

    @property
    def label(self) -> str:
        return {
            PitfallClass.MISSING_TRUSTLIST: 'Missing Support for Trustlist',
            PitfallClass.TRUSTLIST_DISABLED_BY_DEFAULT: 'Trustlist disabled by default',
            PitfallClass.CERTIFICATE_EXCHANGE_IN_BAND: 'Certificate exchange through Secure Channel primitives',
        }[self]


PROFILE_PITFALLS = {
    Profile.SECURE: None,
    Profile.P1_MISSING_TRUSTLIST: PitfallClass.MISSING_TRUSTLIST,
    Profile.P2_DEFAULT_ACCEPT_ALL: PitfallClass.TRUSTLIST_DISABLED_BY_DEFAULT,
    Profile.P3_REJECTED_STORE_PROMOTION: PitfallClass.CERTIFICATE_EXCHANGE_IN_BAND,
}


@dataclass
class CapturedCredential:
    """Identifiant déchiffré par un attaquant (mot de passe en clair)."""
    username: str
    password: str
    token_policy_uri: Optional[str] = None
    captured_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    victim_application_uri: Optional[str] = None

    def to_dict(self, show_secrets: bool = False) -> Dict[str, Any]:
        return {
            'username': self.username,
            'password': self.password if show_secrets else REDACTED,
            'token_policy_uri': self.token_policy_uri,
            'captured_at': self.captured_at.isoformat(),
            'victim_application_uri': self.victim_application_uri,
        }


@dataclass
class Evidence:
    kind: EvidenceKind
    payload: Dict[str, Any] = field(default_factory=dict)
    side: Optional[Side] = None


@dataclass
class AttackOutcome:
    """
    Résultat d'une attaque.

    Un résultat Vulnerable exige au moins une preuve; les refus observés
    sont consignés dans notes.
    """
    attack: AttackKind
    result: AttackResult = AttackResult.SECURE
    evidence: List[Evidence] = field(default_factory=list)
    transcript: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def add(self, kind: EvidenceKind, side: Optional[Side] = None, **payload) -> Evidence:
        item = Evidence(EvidenceKind(kind), payload, side)
        self.evidence.append(item)
        return item

    def has(self, kind: EvidenceKind) -> bool:
        return any(item.kind == kind for item in self.evidence)

    def of_kind(self, kind: EvidenceKind) -> List[Evidence]:
        return [item for item in self.evidence if item.kind == kind]

    def note(self, message: str):
        self.notes.append(message)

    def is_consistent(self) -> bool:
        return self.result != AttackResult.VULNERABLE or bool(self.evidence)

    @property
    def exposed(self) -> bool:
        """Identifiant capturé ou canal non autorisé accepté."""
        return self.has(EvidenceKind.CREDENTIAL_CAPTURED) or self.has(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED)

    @property
    def exit_code(self) -> int:
        """
        Inconclusive compte comme une vulnérabilité si une exposition a été
        observée, comme une erreur sinon.
        """
        if self.result == AttackResult.VULNERABLE:
            return EXIT_VULNERABLE
        if self.result == AttackResult.INCONCLUSIVE:
            return EXIT_VULNERABLE if self.exposed else EXIT_ERROR
        return EXIT_SECURE


@dataclass
class ScenarioSpec:
    """
    Scénario d'évaluation: profils des deux victimes, authentification,
    attaque et graine. server_auto_accept/client_auto_accept ne
    s'appliquent qu'au profil P2.
    """
    server_profile: Profile
    client_profile: Profile
    user_auth: UserAuth
    attack: AttackKind
    seed: int = 0
    server_auto_accept: bool = True
    client_auto_accept: bool = True

    def __post_init__(self):
        self.server_profile = Profile(self.server_profile)
        self.client_profile = Profile(self.client_profile)
        self.user_auth = UserAuth(self.user_auth)
        self.attack = AttackKind(self.attack)

    @property
    def forwarding_only(self) -> bool:
        """Middleperson sans UserName: relais simple, sans rejeu d'identifiants."""
        return self.attack == AttackKind.MIDDLEPERSON and self.user_auth == UserAuth.ANONYMOUS

    @property
    def label(self) -> str:
        def profile_label(profile: Profile, auto_accept: bool) -> str:
            if profile == Profile.P2_DEFAULT_ACCEPT_ALL and not auto_accept:
                return f"{profile.value}(flag-off)"
            return profile.value
        return (f"{self.attack.value}[server={profile_label(self.server_profile, self.server_auto_accept)}, "
                f"client={profile_label(self.client_profile, self.client_auto_accept)}, "
                f"auth={self.user_auth.value}, seed={self.seed}]")


@dataclass
class AssessmentReport:
    scenario: ScenarioSpec
    outcomes: List[AttackOutcome] = field(default_factory=list)
    pitfall_class: Optional[PitfallClass] = None
    credentials: List[CapturedCredential] = field(default_factory=list)
    transcripts: List[str] = field(default_factory=list)
    toolkit_version: str = ''
    findings: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    credentials_redacted: bool = True
    error: Optional[str] = None

    @property
    def result(self) -> AttackResult:
        results = {outcome.result for outcome in self.outcomes}
        if AttackResult.VULNERABLE in results:
            return AttackResult.VULNERABLE
        if AttackResult.INCONCLUSIVE in results:
            return AttackResult.INCONCLUSIVE
        return AttackResult.SECURE

    @property
    def exit_code(self) -> int:
        """0 = Secure, 2 = Vulnerable, 1 = erreur du harnais ou Inconclusive sans exposition."""
        if self.error:
            return EXIT_ERROR
        return combined_exit_code(self.outcomes)


def combined_exit_code(outcomes: List[AttackOutcome]) -> int:
    """Code le plus grave: Vulnerable (2) l'emporte sur Inconclusive sans exposition (1)."""
    return max((outcome.exit_code for outcome in outcomes), default=EXIT_SECURE)


def matrix_exit_code(reports: List[AssessmentReport]) -> int:
    """Une erreur de harnais dans une cellule rend toute la matrice en erreur."""
    if any(report.error for report in reports):
        return EXIT_ERROR
    return max((report.exit_code for report in reports), default=EXIT_SECURE)
