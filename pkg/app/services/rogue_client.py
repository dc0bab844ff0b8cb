#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ROGUE CLIENT - OPC UA TRUSTKIT
Fichier: app/services/rogue_client.py

Client malveillant: présente un certificat auto-signé jamais partagé avec
la cible (ou un sosie d'un certificat légitime observé) sur chaque
endpoint sécurisé. Si un canal est accepté, il tente une session
(anonyme, sinon identifiants fournis), lit chaque nœud connu et sonde
l'écriture d'une consigne en réécrivant sa valeur courante.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from faker import Faker

from app.exceptions import AuthFailed, ServerRejected, ServiceFaultError, TrustKitError
from app.models.assessment import AttackKind, AttackOutcome, AttackResult, EvidenceKind, Side
from app.models.certificate import ApplicationIdentity
from app.models.endpoint import TargetDescriptor, token_policy_for
from app.models.node_store import SENSOR_NODE, SETPOINT_NODE, STATUS_NODE
from app.models.settings import ClientConfig
from app.models.trust import TrustPolicy
from app.protocol.status import is_good, status_name
from app.protocol.structures import EndpointDescription, UserTokenType
from app.services.client_service import ClientChannel, ClientSession, UAClient, rank_endpoints
from app.services.pki_service import clone_certificate, generate_identity
from app.services.transcript import Transcript
from app.utils.logger import LoggerMixin, PerformanceLogger

DEFAULT_KNOWN_NODES = (SENSOR_NODE, SETPOINT_NODE, STATUS_NODE)


class RogueClient(LoggerMixin):
    """
    Usage:
        outcome = RogueClient(target, credentials=('operator', 'secret')).run()
    """

    def __init__(self, target: TargetDescriptor, credentials: Optional[Tuple[str, str]] = None,
                 identity: Optional[ApplicationIdentity] = None, impersonate: Optional[bytes] = None,
                 transcript_dir: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                 known_nodes: Iterable[str] = DEFAULT_KNOWN_NODES, probe_node: Optional[str] = SETPOINT_NODE,
                 timeout: float = 10.0, key_bits: int = 2048, label: str = 'rogue-client'):
        self.target = target
        self.credentials = credentials
        self.known_nodes = list(known_nodes)
        self.probe_node = probe_node
        self.timeout = timeout
        self.faker = Faker(['en_US'])
        if seed is not None:
            self.faker.seed_instance(seed)
        if identity is not None:
            self.identity = identity
        elif impersonate is not None:
            self.identity = clone_certificate(impersonate)
        else:
            self.identity = self.forge_identity(key_bits)
        path = Path(transcript_dir) / f"{label}.tktr" if transcript_dir else None
        self.transcript = Transcript(path, label=label)

    def forge_identity(self, key_bits: int = 2048) -> ApplicationIdentity:
        """Identité auto-signée au nom d'une application plausible."""
        company = self.faker.company()
        slug = self.faker.slug(company) or 'client'
        return generate_identity(f"{company} OPC UA Client", f"urn:{slug}:opcua:client", key_bits=key_bits)

    def _client(self, with_credentials: bool) -> UAClient:
        username, password = self.credentials if with_credentials and self.credentials else (None, None)
        config = ClientConfig(
            identity=self.identity,
            trust_policy=TrustPolicy.accept_all(),
            username=username,
            password=password,
            application_name=self.identity.record.subject_common_name,
            timeout=self.timeout,
        )
        return UAClient(config, transcript=self.transcript)

    # === ÉTAPES ===

    def _open(self, endpoint: EndpointDescription, outcome: AttackOutcome) -> Optional[ClientChannel]:
        label = f"{endpoint.security_mode.name}/{endpoint.security_policy_uri.rsplit('#', 1)[-1]}"
        try:
            channel = self._client(False).open_channel(endpoint, self.target.url)
        except ServerRejected as e:
            outcome.note(f"{label}: canal refusé ({status_name(e.status)})")
            self.logger.info(f"🚫 {label} refuse notre certificat ({status_name(e.status)})")
            return None
        except TrustKitError as e:
            outcome.note(f"{label}: échec d'ouverture ({e})")
            return None

        outcome.add(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED, Side.SERVER,
                    endpoint=label,
                    presented_thumbprint=self.identity.record.hex_thumbprint,
                    presented_uri=self.identity.application_uri)
        self.logger.warning(f"🎯 Canal {label} accepté avec un certificat inconnu de la cible")
        return channel

    def _activate(self, channel: ClientChannel, outcome: AttackOutcome) -> Optional[ClientSession]:
        endpoint = channel.endpoint
        attempts: List[Tuple[str, UAClient]] = []
        if token_policy_for(endpoint, UserTokenType.ANONYMOUS) is not None:
            attempts.append(('anonyme', self._client(False)))
        if token_policy_for(endpoint, UserTokenType.USERNAME) is not None:
            if self.credentials:
                attempts.append((f"utilisateur {self.credentials[0]}", self._client(True)))
            else:
                outcome.note("Endpoint UserName seul et aucun identifiant fourni")

        try:
            session = attempts[0][1].create_session(channel) if attempts else None
        except TrustKitError as e:
            outcome.note(f"CreateSession refusé: {e}")
            return None

        for description, client in attempts:
            try:
                client.activate_session(session)
                outcome.note(f"Session activée ({description})")
                return session
            except AuthFailed as e:
                outcome.note(f"Activation {description} refusée ({status_name(e.status)})")
            except TrustKitError as e:
                outcome.note(f"Activation {description} en échec: {e}")
                break
        return None

    def _exploit(self, session: ClientSession, outcome: AttackOutcome):
        for node_id in self.known_nodes:
            try:
                value = session.read(node_id)
            except ServiceFaultError as e:
                outcome.note(f"Lecture {node_id}: {status_name(e.status)}")
                continue
            outcome.add(EvidenceKind.VALUE_READ, Side.SERVER, node_id=node_id, value=value, source='direct')

        if self.probe_node is None:
            return
        try:
            current = session.read(self.probe_node)
            status = session.write(self.probe_node, current)
        except ServiceFaultError as e:
            outcome.note(f"Sonde d'écriture {self.probe_node}: {status_name(e.status)}")
            return
        if is_good(status):
            outcome.add(EvidenceKind.VALUE_WRITTEN, Side.SERVER, node_id=self.probe_node, value=current,
                        source='probe')
            self.logger.warning(f"🎯 Écriture acceptée sur {self.probe_node}")
        else:
            outcome.note(f"Sonde d'écriture {self.probe_node}: {status_name(status)}")

    # === EXÉCUTION ===

    def run(self) -> AttackOutcome:
        """
        Essaie chaque endpoint sécurisé, du plus au moins sécurisé. Les
        refus sont des preuves de sécurité, jamais des exceptions.
        """
        outcome = AttackOutcome(AttackKind.ROGUE_CLIENT, transcript=self.transcript.locator)
        endpoints = rank_endpoints(self.target.secure_endpoints)
        if not endpoints:
            outcome.result = AttackResult.INCONCLUSIVE
            outcome.note(f"{self.target.url} n'annonce aucun endpoint sécurisé")
            return outcome

        self.logger.info(f"🎭 Rogue Client vers {self.target.url} ({len(endpoints)} endpoint(s) sécurisé(s))")
        exploited = False
        with PerformanceLogger(f"rogue client {self.target.url}"):
            for endpoint in endpoints:
                channel = self._open(endpoint, outcome)
                if channel is None:
                    continue
                if exploited:
                    channel.close()
                    continue
                session = self._activate(channel, outcome)
                if session is None:
                    channel.close()
                    continue
                try:
                    self._exploit(session, outcome)
                except TrustKitError as e:
                    outcome.note(f"Exploitation interrompue: {e}")
                finally:
                    session.close()
                exploited = True

        if not outcome.has(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED):
            outcome.result = AttackResult.SECURE
        elif self.transcript.completed_open(self.identity.der):
            outcome.result = AttackResult.VULNERABLE
        else:
            outcome.result = AttackResult.INCONCLUSIVE
            outcome.note("Canal accepté sans OPN complet dans la transcription")
        return outcome


def rogue_client(target: TargetDescriptor, credentials: Optional[Tuple[str, str]] = None,
                 **kwargs) -> AttackOutcome:
    return RogueClient(target, credentials, **kwargs).run()
