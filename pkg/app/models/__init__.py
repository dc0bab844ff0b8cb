# ===== app/models/__init__.py =====
"""
Package des modèles de données d'OPC UA TrustKit.
Définit certificats, politiques de confiance, état des canaux, endpoints,
espace de nœuds, configurations et résultats d'évaluation.
"""

from .assessment import (
    AssessmentReport, AttackKind, AttackOutcome, AttackResult, CapturedCredential,
    Evidence, EvidenceKind, PitfallClass, Profile, ScenarioSpec, Side, UserAuth
)
from .certificate import ApplicationIdentity, CertificateRecord
from .channel import ChannelKeys, SecureChannelState, SecurityPolicySuite
from .endpoint import EndpointDescriptor, TargetDescriptor
from .node_store import NodeEntry, NodeStore
from .session import SessionState
from .settings import ClientConfig, ServerConfig
from .trust import AcceptanceBasis, TrustDecision, TrustPolicy, TrustPolicyKind

__all__ = [
    'AssessmentReport', 'AttackKind', 'AttackOutcome', 'AttackResult', 'CapturedCredential',
    'Evidence', 'EvidenceKind', 'PitfallClass', 'Profile', 'ScenarioSpec', 'Side', 'UserAuth',
    'ApplicationIdentity', 'CertificateRecord',
    'ChannelKeys', 'SecureChannelState', 'SecurityPolicySuite',
    'EndpointDescriptor', 'TargetDescriptor',
    'NodeEntry', 'NodeStore', 'SessionState',
    'ClientConfig', 'ServerConfig',
    'AcceptanceBasis', 'TrustDecision', 'TrustPolicy', 'TrustPolicyKind',
]
