#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE CLIENT OPC UA - OPC UA TRUSTKIT
Fichier: app/services/client_service.py

Client OPC UA minimal: découverte non authentifiée, choix d'endpoint,
jugement du certificat serveur AVANT tout OpenSecureChannel, puis
CreateSession / ActivateSession et lecture-écriture de valeurs.

Sert de client victime dans les scénarios et de base au Rogue Client et
à la jambe amont du Middleperson.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import itertools
import secrets
from typing import Any, Dict, Iterable, List, Optional, Union

from app.exceptions import (
    AuthFailed, CertificateChanged, ConfigurationError, NonceMismatch, ProtocolError, SecurityError,
    ServiceFaultError, TrustRejected
)
from app.models.certificate import CertificateRecord
from app.models.channel import SecureChannelState
from app.models.endpoint import (
    TargetDescriptor, endpoint_rank, most_secure, parse_endpoint_url, token_policy_for, validate_endpoint
)
from app.models.session import SESSION_NONCE_LENGTH
from app.models.settings import ClientConfig
from app.models.trust import TrustDecision
from app.protocol.status import StatusCode, is_good, status_name
from app.protocol.structures import (
    ATTRIBUTE_VALUE, ActivateSessionRequest, AnonymousIdentityToken, ApplicationDescription, ApplicationType,
    CloseSecureChannelRequest, CloseSessionRequest, CreateSessionRequest, CreateSessionResponse,
    EndpointDescription, FindServersRequest, GetEndpointsRequest, MessageSecurityMode, OpenSecureChannelRequest,
    OpenSecureChannelResponse, ReadRequest, ReadValueId, RequestHeader, SecurityTokenRequestType, ServiceFault,
    UserNameIdentityToken, UserTokenType, WriteRequest, WriteValue, request_header_of, response_header_of,
    wrap_identity_token
)
from app.protocol.types import DataValue, LocalizedText, NodeId, now_ticks, variant_for
from app.services.pki_service import TrustStore, parse_certificate, validate_peer
from app.services.secure_channel import (
    encrypt_password_token, generate_nonce, open_channel_state, password_token_algorithm, sign_application_data,
    suite_for_uri, verify_application_data
)
from app.services.transcript import Transcript
from app.services.transport import UAConnection, open_connection
from app.utils.logger import LoggerMixin

REQUESTED_LIFETIME_MS = 3_600_000


class ClientChannel(LoggerMixin):
    """Canal sécurisé ouvert côté client; une requête à la fois."""

    def __init__(self, connection: UAConnection, endpoint: EndpointDescription,
                 server_certificate: Optional[CertificateRecord], url: str):
        self.connection = connection
        self.endpoint = endpoint
        self.server_certificate = server_certificate
        self.url = url
        self._handles = itertools.count(1)

    @property
    def state(self) -> SecureChannelState:
        return self.connection.state

    @property
    def closed(self) -> bool:
        return self.connection.closed

    def exchange(self, body, authentication_token: Optional[NodeId] = None):
        """
        Émet un corps de requête et renvoie la réponse corrélée, sans
        interpréter un éventuel ServiceFault.

        Raises:
            ProtocolError: réponse à une autre requête, connexion perdue
            SecurityError, CodecError
        """
        header = request_header_of(body)
        if header is not None:
            header.request_handle = next(self._handles)
            header.timestamp = now_ticks()
            if authentication_token is not None:
                header.authentication_token = authentication_token
        request_id = self.connection.send_message(body)
        response, sequence = self.connection.receive_message()
        if sequence.request_id != request_id:
            raise ProtocolError(f"Réponse à la requête {sequence.request_id}, {request_id} attendue")
        return response

    def request(self, body, authentication_token: Optional[NodeId] = None):
        """
        Comme exchange, mais un ServiceFault ou un service_result mauvais
        lève ServiceFaultError.
        """
        response = self.exchange(body, authentication_token)
        header = response_header_of(response)
        if isinstance(response, ServiceFault) or (header is not None and not is_good(header.service_result)):
            status = header.service_result if header is not None else StatusCode.BadUnexpectedError
            raise ServiceFaultError(status, f"{type(body).__name__}: {status_name(status)}")
        return response

    def close(self):
        """Envoie CLO (au mieux) puis ferme la connexion."""
        if self.closed:
            return
        try:
            self.connection.send_message(CloseSecureChannelRequest(RequestHeader(timestamp=now_ticks())))
        except Exception as e:
            self.logger.debug(f"📡 CLO non émis vers {self.url}: {e}")
        self.connection.close()

    def __enter__(self) -> 'ClientChannel':
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class ClientSession(LoggerMixin):
    """Session activée sur un canal; lecture et écriture de valeurs."""

    def __init__(self, channel: ClientChannel, session_id: NodeId, authentication_token: NodeId,
                 server_nonce: bytes, user: Optional[str] = None):
        self.channel = channel
        self.session_id = session_id
        self.authentication_token = authentication_token
        self.server_nonce = server_nonce
        self.user = user

    @property
    def endpoint(self) -> EndpointDescription:
        return self.channel.endpoint

    def call(self, body):
        return self.channel.request(body, self.authentication_token)

    def read_values(self, node_ids: Iterable[Union[str, NodeId]],
                    attribute_id: int = ATTRIBUTE_VALUE) -> List[DataValue]:
        items = [ReadValueId(node_id=_as_node_id(n), attribute_id=attribute_id) for n in node_ids]
        return list(self.call(ReadRequest(nodes_to_read=items)).results or [])

    def read(self, node_id: Union[str, NodeId], attribute_id: int = ATTRIBUTE_VALUE) -> Any:
        """
        Lit un attribut et renvoie sa valeur Python.

        Raises:
            ServiceFaultError: statut mauvais pour ce nœud
        """
        value = self.read_values([node_id], attribute_id)[0]
        if value.status is not None and not is_good(value.status):
            raise ServiceFaultError(value.status, f"Lecture de {node_id}: {status_name(value.status)}")
        return value.value.value if value.value is not None else None

    def write_values(self, values: Dict[Union[str, NodeId], Any]) -> List[int]:
        items = [
            WriteValue(node_id=_as_node_id(node_id), value=DataValue(value=variant_for(value)))
            for node_id, value in values.items()
        ]
        return list(self.call(WriteRequest(nodes_to_write=items)).results or [])

    def write(self, node_id: Union[str, NodeId], value: Any) -> int:
        """Écrit une valeur; renvoie le statut du nœud (Good = 0)."""
        return self.write_values({node_id: value})[0]

    def close(self):
        try:
            if not self.channel.closed:
                self.call(CloseSessionRequest())
        except Exception as e:
            self.logger.debug(f"📋 CloseSession ignoré: {e}")
        finally:
            self.channel.close()

    def __enter__(self) -> 'ClientSession':
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def _as_node_id(node_id: Union[str, NodeId]) -> NodeId:
    return node_id if isinstance(node_id, NodeId) else NodeId.parse(node_id)


class UAClient(LoggerMixin):
    """
    Client OPC UA.

    Usage:
        client = UAClient(config)
        endpoints = client.discover('opc.tcp://127.0.0.1:4840')
        with client.connect(url='opc.tcp://127.0.0.1:4840') as session:
            session.read('ns=1;s=sensor')
    """

    def __init__(self, config: ClientConfig, transcript: Optional[Transcript] = None):
        self.config = config
        self.identity = config.identity
        self.trust_store = config.trust_store if config.trust_store is not None else TrustStore()
        self.transcript = transcript if transcript is not None else Transcript()
        self.last_decision: Optional[TrustDecision] = None

    @property
    def application(self) -> ApplicationDescription:
        return ApplicationDescription(
            application_uri=self.config.resolved_application_uri,
            product_uri='urn:opcua-trustkit:client',
            application_name=LocalizedText(self.config.application_name),
            application_type=ApplicationType.CLIENT,
        )

    # === DÉCOUVERTE ===

    def _discovery_channel(self, url: str) -> ClientChannel:
        endpoint = EndpointDescription(endpoint_url=url, security_mode=MessageSecurityMode.NONE,
                                       security_policy_uri=suite_for_uri(None).uri)
        return self.open_channel(endpoint, url)

    def find_servers(self, url: str) -> List[ApplicationDescription]:
        with self._discovery_channel(url) as channel:
            return list(channel.request(FindServersRequest(endpoint_url=url)).servers or [])

    def discover(self, url: str) -> List[EndpointDescription]:
        """
        GetEndpoints sur un canal None: endpoints annoncés tels quels, avec
        le certificat serveur (non authentifié).

        Raises:
            ConnectFailed, ProtocolError
        """
        with self._discovery_channel(url) as channel:
            endpoints = list(channel.request(GetEndpointsRequest(endpoint_url=url)).endpoints or [])
        self.logger.debug(f"📡 {len(endpoints)} endpoint(s) annoncé(s) par {url}")
        return endpoints

    def survey(self, url: str) -> TargetDescriptor:
        """FindServers + GetEndpoints sur une seule connexion."""
        host, port = parse_endpoint_url(url)
        with self._discovery_channel(url) as channel:
            try:
                servers = list(channel.request(FindServersRequest(endpoint_url=url)).servers or [])
            except ServiceFaultError:
                servers = []
            endpoints = list(channel.request(GetEndpointsRequest(endpoint_url=url)).endpoints or [])
        application = servers[0] if servers else (endpoints[0].server if endpoints else ApplicationDescription())
        certificate = next((e.server_certificate for e in endpoints if e.server_certificate), None)
        return TargetDescriptor(address=host, port=port, application=application, endpoints=endpoints,
                                server_certificate=certificate)

    def select_endpoint(self, endpoints: List[EndpointDescription]) -> EndpointDescription:
        """
        Endpoint imposé par la configuration (même mode et politique), sinon
        le plus sécurisé; à égalité, le premier annoncé.

        Raises:
            ConfigurationError: aucun endpoint utilisable
        """
        wanted = self.config.endpoint_selection
        if wanted is not None:
            for endpoint in endpoints:
                if (endpoint.security_mode == wanted.security_mode
                        and endpoint.security_policy_uri == wanted.security_policy_uri):
                    return endpoint
            raise ConfigurationError(
                f"Aucun endpoint {wanted.security_mode.name}/{wanted.security_policy_uri} annoncé")
        best = most_secure(endpoints)
        if best is None:
            raise ConfigurationError("Aucun endpoint annoncé")
        return best

    # === CANAL ===

    def judge_server(self, certificate: CertificateRecord) -> TrustDecision:
        """
        Raises:
            TrustRejected: refus de la politique de confiance du client
        """
        decision = validate_peer(certificate, self.config.trust_policy, self.trust_store)
        self.last_decision = decision
        if not decision:
            raise TrustRejected(decision.reason,
                                f"Certificat serveur {certificate.application_uri} refusé ({status_name(decision.reason)})")
        return decision

    def open_channel(self, endpoint: EndpointDescription, url: Optional[str] = None) -> ClientChannel:
        """
        Ouvre un canal vers l'endpoint. Le certificat annoncé par
        GetEndpoints est jugé avant la connexion TCP; celui de la réponse
        OPN doit lui être identique octet pour octet.

        Raises:
            TrustRejected, CertificateChanged, ConnectFailed, ServerRejected,
            PolicyUnsupported, SecurityError, ProtocolError
        """
        validate_endpoint(endpoint)
        url = url or endpoint.endpoint_url
        host, port = parse_endpoint_url(url)
        suite = suite_for_uri(endpoint.security_policy_uri)

        server_record = None
        if not suite.is_none:
            if self.identity is None:
                raise ConfigurationError("Identité applicative requise pour un endpoint sécurisé")
            if not endpoint.server_certificate:
                raise ProtocolError("Endpoint sécurisé sans certificat serveur", StatusCode.BadCertificateInvalid)
            server_record = parse_certificate(endpoint.server_certificate)
            self.judge_server(server_record)

        connection = open_connection(host, port, timeout=self.config.timeout, transcript=self.transcript,
                                     max_chunk_size=self.config.max_chunk_size)
        connection.max_chunk_count = self.config.max_chunk_count
        try:
            connection.hello(url)
            state = SecureChannelState(
                suite=suite,
                mode=endpoint.security_mode,
                local_nonce=generate_nonce(suite),
                local_identity=None if suite.is_none else self.identity,
                remote_certificate=server_record,
                max_chunk_size=connection.send_chunk_size,
                max_chunk_count=self.config.max_chunk_count,
            )
            connection.state = state
            request_id = connection.send_open(OpenSecureChannelRequest(
                request_header=RequestHeader(timestamp=now_ticks(), request_handle=0),
                request_type=SecurityTokenRequestType.ISSUE,
                security_mode=endpoint.security_mode,
                client_nonce=state.local_nonce or None,
                requested_lifetime=REQUESTED_LIFETIME_MS,
            ))

            def same_certificate(peer: CertificateRecord):
                if server_record is None or peer.der != server_record.der:
                    raise CertificateChanged(f"Certificat OPN de {peer.application_uri} différent de GetEndpoints")
                return True

            response, sequence, _, _ = connection.receive_open(self.identity, same_certificate)
            if isinstance(response, ServiceFault):
                raise ServiceFaultError(response.response_header.service_result)
            if not isinstance(response, OpenSecureChannelResponse):
                raise ProtocolError(f"OpenSecureChannelResponse attendu, {type(response).__name__} reçu")
            if sequence.request_id != request_id:
                raise ProtocolError("Réponse OPN non corrélée")
            if not suite.is_none and len(response.server_nonce or b'') != suite.nonce_length:
                raise SecurityError("Nonce serveur de longueur invalide", StatusCode.BadNonceInvalid)

            state.channel_id = response.security_token.channel_id
            state.token_id = response.security_token.token_id
            open_channel_state(state, response.server_nonce)
        except Exception:
            connection.close()
            raise

        if server_record is not None:
            self.logger.info(f"🔐 Canal {state.channel_id} ouvert ({endpoint.security_mode.name}) "
                             f"vers {server_record.application_uri}")
        return ClientChannel(connection, endpoint, server_record, url)

    # === SESSION ===

    def create_session(self, channel: ClientChannel) -> ClientSession:
        """
        Raises:
            ServiceFaultError, SignatureInvalid, CertificateChanged, NonceMismatch
        """
        client_nonce = secrets.token_bytes(SESSION_NONCE_LENGTH)
        response: CreateSessionResponse = channel.request(CreateSessionRequest(
            client_description=self.application,
            endpoint_url=channel.url,
            session_name=self.config.session_name,
            client_nonce=client_nonce,
            client_certificate=self.identity.der if self.identity else None,
            requested_session_timeout=float(REQUESTED_LIFETIME_MS),
        ))
        if channel.state.is_secure:
            if (response.server_certificate or b'') != channel.server_certificate.der:
                raise CertificateChanged("Certificat de CreateSession différent de celui du canal")
            verify_application_data(channel.server_certificate, self.identity.der, client_nonce,
                                    response.server_signature)
            if len(response.server_nonce or b'') < SESSION_NONCE_LENGTH:
                raise NonceMismatch("Nonce de session serveur trop court")
            if response.server_nonce == channel.state.remote_nonce:
                raise NonceMismatch("Nonce de session identique au nonce du canal")
        return ClientSession(channel, response.session_id, response.authentication_token,
                             response.server_nonce or b'')

    def identity_token(self, session: ClientSession):
        """
        Jeton d'identité de la configuration. Le mot de passe est chiffré
        pour la politique du jeton (ou celle de l'endpoint); sous None, il
        reste chiffré si encrypt_token_under_none et qu'un certificat est
        disponible.
        """
        endpoint = session.endpoint
        if not self.config.uses_username:
            policy = token_policy_for(endpoint, UserTokenType.ANONYMOUS)
            return AnonymousIdentityToken(policy_id=policy.policy_id if policy else 'anonymous')

        policy = token_policy_for(endpoint, UserTokenType.USERNAME)
        suite = suite_for_uri((policy.security_policy_uri if policy else None) or endpoint.security_policy_uri)
        certificate = session.channel.server_certificate
        if certificate is None and endpoint.server_certificate:
            certificate = parse_certificate(endpoint.server_certificate)
        encrypt = not suite.is_none and certificate is not None and (
            session.channel.state.is_secure or self.config.encrypt_token_under_none)
        if encrypt:
            secret = encrypt_password_token(self.config.password or '', certificate, session.server_nonce, suite)
            algorithm = password_token_algorithm(suite)
        else:
            secret = (self.config.password or '').encode('utf-8')
            algorithm = None
        return UserNameIdentityToken(
            policy_id=policy.policy_id if policy else 'username',
            user_name=self.config.username,
            password=secret,
            encryption_algorithm=algorithm,
        )

    def activate_session(self, session: ClientSession) -> ClientSession:
        """
        Raises:
            AuthFailed: ActivateSession refusé par le serveur
            NonceMismatch: nonce serveur absent ou rejoué sur un canal sécurisé
        """
        channel = session.channel
        request = ActivateSessionRequest(user_identity_token=wrap_identity_token(self.identity_token(session)))
        if channel.state.is_secure:
            request.client_signature = sign_application_data(self.identity, channel.server_certificate.der,
                                                             session.server_nonce)
        try:
            response = session.call(request)
        except ServiceFaultError as e:
            raise AuthFailed(f"Activation refusée: {status_name(e.status)}", e.status) from e
        if channel.state.is_secure and response.server_nonce in (None, b'', session.server_nonce):
            raise NonceMismatch("Nonce de session non renouvelé par ActivateSession")
        session.server_nonce = response.server_nonce or session.server_nonce
        session.user = self.config.username
        self.logger.info(f"✅ Session {session.session_id} activée ({self.config.username or 'anonyme'})")
        return session

    def connect(self, endpoint: Optional[EndpointDescription] = None, url: Optional[str] = None) -> ClientSession:
        """
        Découverte (si besoin), canal, CreateSession puis ActivateSession.

        Raises:
            TrustRejected, AuthFailed, PolicyUnsupported, ConnectFailed,
            ProtocolError
        """
        if endpoint is None:
            if url is None:
                raise ConfigurationError("Un endpoint ou une URL est requis")
            endpoint = self.select_endpoint(self.discover(url))
        channel = self.open_channel(endpoint, url)
        try:
            session = self.create_session(channel)
            return self.activate_session(session)
        except Exception:
            channel.close()
            raise


def rank_endpoints(endpoints: List[EndpointDescription]) -> List[EndpointDescription]:
    """Endpoints du plus au moins sécurisé, ordre d'annonce conservé à égalité."""
    return sorted(endpoints, key=endpoint_rank, reverse=True)
