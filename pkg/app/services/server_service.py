#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE SERVEUR OPC UA - OPC UA TRUSTKIT
Fichier: app/services/server_service.py

Serveur OPC UA minimal: annonce ses endpoints, juge le certificat client à
l'ouverture du canal selon la politique de confiance configurée,
authentifie les utilisateurs à l'activation de session et sert un petit
NodeStore. Une connexion = un thread de traitement.

Les méthodes authenticate_user, admit_anonymous, read_node, write_node,
judge_client et handle_unknown_service sont les points d'extension
utilisés par le Rogue Server et le Middleperson.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import itertools
import secrets
import socketserver
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import bcrypt

from app.exceptions import (
    AbortReceived, BindFailed, CodecError, ConnectionClosed, Malformed, MixedRequestIds, NonceMismatch,
    PolicyUnsupported, ProtocolError, SecurityError, SequenceGap, ServiceFaultError, SignatureInvalid,
    TrustKitError, TrustRejected
)
from app.models.certificate import CertificateRecord
from app.models.channel import RSA_OAEP_SHA1_URI, SecureChannelState
from app.models.endpoint import endpoint_url, token_policy_for, with_location
from app.models.node_store import NodeStore
from app.models.session import AUTH_TOKEN_LENGTH, SESSION_NONCE_LENGTH, SessionState
from app.models.settings import ServerConfig
from app.models.trust import AcceptanceBasis, TrustDecision
from app.protocol.status import StatusCode, is_good, status_name
from app.protocol.structures import (
    ActivateSessionRequest, ActivateSessionResponse, AnonymousIdentityToken, ApplicationDescription,
    ApplicationType, ChannelSecurityToken, CloseSessionRequest, CloseSessionResponse, CreateSessionRequest,
    CreateSessionResponse, EndpointDescription, FindServersRequest, FindServersResponse, GetEndpointsRequest,
    GetEndpointsResponse, MessageSecurityMode, OpenSecureChannelRequest, OpenSecureChannelResponse,
    ReadRequest, ReadResponse, ReadValueId, ResponseHeader, SecurityTokenRequestType, ServiceFault,
    SignatureData, UnknownService, UserNameIdentityToken, UserTokenType, WriteRequest, WriteResponse,
    WriteValue, decode_raw_message, request_header_of, split_request_header, unwrap_identity_token
)
from app.protocol.types import DataValue, LocalizedText, NodeId, now_ticks
from app.services.pki_service import TrustStore, validate_peer
from app.services.secure_channel import (
    decrypt_password_token, generate_nonce, open_channel_state, sign_application_data, suite_for_uri,
    verify_application_data
)
from app.services.transcript import Transcript
from app.services.transport import UAConnection
from app.utils.logger import AuditLogger, LoggerMixin

audit = AuditLogger()

SECURE_MODES = (MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT)


@dataclass
class ChannelContext:
    """
    État d'une connexion côté serveur. endpoint vaut None pour un canal
    de découverte (None/None non annoncé): seuls FindServers et
    GetEndpoints y sont servis.
    """
    connection: UAConnection
    client_address: Tuple[str, int]
    state: Optional[SecureChannelState] = None
    endpoint: Optional[EndpointDescription] = None
    peer_certificate: Optional[CertificateRecord] = None
    decision: Optional[TrustDecision] = None
    sessions: Dict[NodeId, SessionState] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def session_capable(self) -> bool:
        return self.endpoint is not None

    @property
    def peer(self) -> str:
        return f"{self.client_address[0]}:{self.client_address[1]}"


def _error_status(error: Exception) -> int:
    """Statut porté par l'ERR émis lorsqu'une erreur interrompt une connexion."""
    status = getattr(error, 'status', None)
    if status:
        return int(status)
    if isinstance(error, (SequenceGap, MixedRequestIds)):
        return int(StatusCode.BadSequenceNumberInvalid)
    if isinstance(error, PolicyUnsupported):
        return int(StatusCode.BadSecurityPolicyRejected)
    if isinstance(error, SecurityError):
        return int(StatusCode.BadSecurityChecksFailed)
    if isinstance(error, CodecError):
        return int(StatusCode.BadDecodingError)
    return int(StatusCode.BadTcpInternalError)


class _ConnectionHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.server.ua_server.serve_connection(self.request, self.client_address)


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class UAServer(LoggerMixin):
    """
    Serveur OPC UA sur opc.tcp.

    Usage:
        server = UAServer(config).start()
        ...
        server.stop()
    """

    def __init__(self, config: ServerConfig, transcript_dir: Optional[Union[str, Path]] = None,
                 label: str = 'server'):
        self.config = config
        self.identity = config.identity
        self.trust_store = config.trust_store if config.trust_store is not None else TrustStore()
        self.node_store = NodeStore(config.nodes)
        self.transcript_dir = Path(transcript_dir) if transcript_dir else None
        self.label = label
        self.transcripts: List[Transcript] = []
        self.endpoints: List[EndpointDescription] = list(config.endpoints)
        self.application = self._describe_application(None)

        self._user_hashes = {
            username: bcrypt.hashpw(password.encode('utf-8'), bcrypt.gensalt(rounds=config.bcrypt_rounds))
            for username, password in config.users.items()
        }
        self._ids_lock = threading.Lock()
        self._channel_ids = itertools.count(1)
        self._token_ids = itertools.count(1)
        self._session_ids = itertools.count(1)
        self._contexts: List[ChannelContext] = []
        self._contexts_lock = threading.Lock()
        self._tcp: Optional[_ThreadingServer] = None
        self._thread: Optional[threading.Thread] = None

    # === CYCLE DE VIE ===

    @property
    def running(self) -> bool:
        return self._tcp is not None

    @property
    def address(self) -> Tuple[str, int]:
        if self._tcp is None:
            return self.config.host, self.config.port
        host, port = self._tcp.server_address[:2]
        return host, port

    @property
    def url(self) -> str:
        host, port = self.address
        return endpoint_url('127.0.0.1' if host in ('0.0.0.0', '') else host, port)

    def start(self) -> 'UAServer':
        """
        Ouvre la socket d'écoute et lance la boucle d'acceptation.

        Raises:
            BindFailed: adresse ou port indisponible
        """
        if self.running:
            return self
        try:
            self._tcp = _ThreadingServer((self.config.host, self.config.port), _ConnectionHandler)
        except OSError as e:
            raise BindFailed(f"Écoute impossible sur {self.config.host}:{self.config.port}: {e}") from e
        self._tcp.ua_server = self

        url = self.url
        certificate = self.identity.der if self.identity else None
        self.application = self._describe_application(url)
        self.endpoints = [with_location(e, url, certificate, self.application) for e in self.config.endpoints]

        self._thread = threading.Thread(target=self._tcp.serve_forever, kwargs={'poll_interval': 0.1},
                                        name=f"{self.label}-accept", daemon=True)
        self._thread.start()
        modes = ', '.join(f"{e.security_mode.name}/{e.security_policy_uri.rsplit('#', 1)[-1]}" for e in self.endpoints)
        self.logger.info(f"📡 {self.label} à l'écoute sur {url} ({modes}) - "
                         f"politique {self.config.trust_policy.describe()}")
        return self

    def stop(self):
        """Arrête l'acceptation, ferme les connexions actives et libère le port."""
        if self._tcp is None:
            return
        tcp, self._tcp = self._tcp, None
        tcp.shutdown()
        with self._contexts_lock:
            contexts = list(self._contexts)
        for ctx in contexts:
            ctx.connection.close()
        tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.logger.info(f"🛑 {self.label} arrêté")

    def __enter__(self) -> 'UAServer':
        return self.start()

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.stop()

    def _describe_application(self, url: Optional[str]) -> ApplicationDescription:
        return ApplicationDescription(
            application_uri=self.config.resolved_application_uri,
            product_uri=self.config.product_uri,
            application_name=LocalizedText(self.config.application_name),
            application_type=ApplicationType.SERVER,
            discovery_urls=[url] if url else [],
        )

    def endpoint_for(self, mode: MessageSecurityMode, policy_uri: str) -> Optional[EndpointDescription]:
        for endpoint in self.endpoints:
            if endpoint.security_mode == mode and endpoint.security_policy_uri == policy_uri:
                return endpoint
        return None

    def _next_id(self, counter) -> int:
        with self._ids_lock:
            return next(counter)

    def _new_transcript(self) -> Transcript:
        with self._contexts_lock:
            index = len(self.transcripts)
            path = self.transcript_dir / f"{self.label}-{index:03d}.tktr" if self.transcript_dir else None
            transcript = Transcript(path, label=f"{self.label}-{index:03d}")
            self.transcripts.append(transcript)
        return transcript

    # === BOUCLE DE CONNEXION ===

    def serve_connection(self, sock, client_address):
        """Traite une connexion jusqu'à sa fermeture; aucune exception ne s'en échappe."""
        sock.settimeout(self.config.socket_timeout)
        connection = UAConnection(sock, transcript=self._new_transcript(),
                                  max_chunk_size=self.config.max_chunk_size,
                                  max_chunk_count=self.config.max_chunk_count,
                                  peer=f"{client_address[0]}:{client_address[1]}")
        ctx = ChannelContext(connection, tuple(client_address[:2]))
        with self._contexts_lock:
            self._contexts.append(ctx)
        self.logger.debug(f"📡 Connexion entrante de {ctx.peer}")

        try:
            self._handshake(ctx)
            while not connection.closed:
                chunk = connection.read_chunk()
                kind = chunk[:3]
                if kind == b'OPN':
                    self.handle_open_secure_channel(chunk, ctx)
                elif kind == b'MSG':
                    self._handle_message(chunk, ctx)
                elif kind == b'CLO':
                    self._handle_close_channel(chunk, ctx)
                    break
                else:
                    raise ProtocolError(f"Message {kind!r} inattendu", StatusCode.BadTcpMessageTypeInvalid)
        except ConnectionClosed:
            self.logger.debug(f"📡 Connexion {ctx.peer} fermée")
        except TrustRejected as e:
            self.logger.info(f"🚫 Canal refusé pour {ctx.peer}: {status_name(e.status)}")
            connection.send_error(e.status, 'Certificat refusé')
        except TrustKitError as e:
            self.logger.warning(f"⚠️ Connexion {ctx.peer} interrompue: {e}")
            connection.send_error(_error_status(e), str(e)[:200])
        except Exception as e:
            self.logger.error(f"❌ Erreur inattendue sur {ctx.peer}: {e}", exc_info=True)
            connection.send_error(StatusCode.BadInternalError)
        finally:
            try:
                self.on_connection_closed(ctx)
            finally:
                connection.close()
                with self._contexts_lock:
                    if ctx in self._contexts:
                        self._contexts.remove(ctx)

    def _handshake(self, ctx: ChannelContext):
        chunk = ctx.connection.read_chunk()
        if chunk[:3] != b'HEL':
            raise ProtocolError(f"HEL attendu, {chunk[:3]!r} reçu", StatusCode.BadTcpMessageTypeInvalid)
        hello = decode_raw_message(b'HEL', chunk[8:])
        ctx.connection.acknowledge(hello)

    def _handle_message(self, chunk: bytes, ctx: ChannelContext):
        connection = ctx.connection
        if ctx.state is None or not ctx.state.is_open:
            raise ProtocolError("MSG reçu avant l'ouverture du canal", StatusCode.BadTcpSecureChannelUnknown)
        try:
            body, sequence = connection.receive_message(first_chunk=chunk)
        except AbortReceived as e:
            self.logger.debug(f"📡 Message abandonné par {ctx.peer}: {e}")
            return
        except (SequenceGap, MixedRequestIds):
            raise
        except CodecError as e:
            if connection.last_request_id is None:
                raise
            self.logger.warning(f"⚠️ Corps indécodable de {ctx.peer}: {e}")
            connection.send_message(self.fault(None, StatusCode.BadDecodingError),
                                    request_id=connection.last_request_id)
            return
        response = self.dispatch(body, ctx)
        connection.send_message(response, request_id=sequence.request_id)

    def _handle_close_channel(self, chunk: bytes, ctx: ChannelContext):
        if ctx.state is None or not ctx.state.is_open:
            raise ProtocolError("CLO sans canal ouvert", StatusCode.BadTcpSecureChannelUnknown)
        ctx.connection.receive_message(first_chunk=chunk)
        self.logger.debug(f"📡 Canal {ctx.state.channel_id} fermé par {ctx.peer}")

    # === HOOKS ===

    def judge_client(self, peer: CertificateRecord, ctx: ChannelContext) -> TrustDecision:
        """Décision de confiance sur le certificat présenté dans l'OPN."""
        decision = validate_peer(peer, self.config.trust_policy, self.trust_store)
        ctx.decision = decision
        return decision

    def on_channel_opened(self, ctx: ChannelContext):
        decision, peer = ctx.decision, ctx.peer_certificate
        if peer is not None and decision is not None and decision.basis != AcceptanceBasis.TRUSTLIST:
            audit.log_untrusted_channel('server', peer.application_uri, peer.hex_thumbprint)

    def on_connection_closed(self, ctx: ChannelContext):
        pass

    def authenticate_user(self, username: str, password: str, session: SessionState, ctx: ChannelContext) -> int:
        """Vérifie un couple identifiant / mot de passe contre les empreintes bcrypt."""
        hashed = self._user_hashes.get(username)
        if hashed is None or not bcrypt.checkpw(password.encode('utf-8'), hashed):
            self.logger.warning(f"🚫 Authentification refusée pour '{username}' depuis {ctx.peer}")
            return int(StatusCode.BadUserAccessDenied)
        return int(StatusCode.Good)

    def admit_anonymous(self, session: SessionState, ctx: ChannelContext) -> int:
        if not self.config.anonymous_allowed:
            return int(StatusCode.BadIdentityTokenRejected)
        return int(StatusCode.Good)

    def read_node(self, item: ReadValueId, session: SessionState, ctx: ChannelContext) -> DataValue:
        return self.node_store.read(item.node_id, item.attribute_id)

    def write_node(self, item: WriteValue, session: SessionState, ctx: ChannelContext) -> int:
        variant = item.value.value if item.value is not None else None
        if variant is None:
            return int(StatusCode.BadTypeMismatch)
        status = self.node_store.write(item.node_id, variant, item.attribute_id)
        if is_good(status):
            self.logger.info(f"📝 {item.node_id} = {variant.value!r} ({session.user or 'anonyme'})")
        return status

    def handle_unknown_service(self, body, ctx: ChannelContext):
        raise ServiceFaultError(StatusCode.BadServiceUnsupported)

    # === RÉPONSES ===

    @staticmethod
    def response_header(request, status: int = StatusCode.Good) -> ResponseHeader:
        header = request_header_of(request)
        return ResponseHeader(
            timestamp=now_ticks(),
            request_handle=header.request_handle if header else 0,
            service_result=int(status),
        )

    def fault(self, request, status: int) -> ServiceFault:
        if isinstance(request, UnknownService):
            try:
                header, _ = split_request_header(request)
                return ServiceFault(ResponseHeader(timestamp=now_ticks(), request_handle=header.request_handle,
                                                   service_result=int(status)))
            except CodecError:
                request = None
        return ServiceFault(response_header=self.response_header(request, status))

    def dispatch(self, body, ctx: ChannelContext):
        """Aiguille un corps de requête; les refus deviennent des ServiceFault."""
        try:
            if isinstance(body, FindServersRequest):
                return self.handle_find_servers(body)
            if isinstance(body, GetEndpointsRequest):
                return self.handle_get_endpoints(body)
            if not ctx.session_capable:
                raise ServiceFaultError(StatusCode.BadSecurityModeRejected)
            if isinstance(body, CreateSessionRequest):
                return self.handle_create_session(body, ctx)
            if isinstance(body, ActivateSessionRequest):
                return self.handle_activate_session(body, ctx)
            if isinstance(body, CloseSessionRequest):
                return self.handle_close_session(body, ctx)
            if isinstance(body, ReadRequest):
                return self.handle_read(body, ctx)
            if isinstance(body, WriteRequest):
                return self.handle_write(body, ctx)
            return self.handle_unknown_service(body, ctx)
        except ServiceFaultError as e:
            self.logger.debug(f"📋 {type(body).__name__} refusé: {status_name(e.status)}")
            return self.fault(body, e.status)

    # === DÉCOUVERTE ===

    def handle_find_servers(self, request: FindServersRequest) -> FindServersResponse:
        servers = [self.application]
        if request.server_uris and self.application.application_uri not in request.server_uris:
            servers = []
        return FindServersResponse(response_header=self.response_header(request), servers=servers)

    def handle_get_endpoints(self, request: GetEndpointsRequest) -> GetEndpointsResponse:
        endpoints = list(self.endpoints)
        if request.profile_uris:
            endpoints = [e for e in endpoints if e.transport_profile_uri in request.profile_uris]
        return GetEndpointsResponse(response_header=self.response_header(request), endpoints=endpoints)

    # === CANAL SÉCURISÉ ===

    def handle_open_secure_channel(self, chunk: bytes, ctx: ChannelContext) -> OpenSecureChannelResponse:
        """
        Ouvre (ou renouvelle) le canal. Le certificat client est jugé par
        judge_client avant tout déchiffrement; un refus lève TrustRejected
        et la connexion est fermée par un ERR.

        Raises:
            TrustRejected, PolicyUnsupported, SecurityError, CodecError
        """
        connection = ctx.connection
        body, sequence, sender, security_header = connection.receive_open(
            self.identity, lambda peer: self.judge_client(peer, ctx), chunk=chunk)
        if not isinstance(body, OpenSecureChannelRequest):
            raise Malformed(f"OpenSecureChannelRequest attendu, {type(body).__name__} reçu")

        suite = suite_for_uri(security_header.security_policy_uri)
        mode = body.security_mode
        expected_modes = (MessageSecurityMode.NONE,) if suite.is_none else SECURE_MODES
        if mode not in expected_modes:
            raise SecurityError(f"Mode {mode!r} incompatible avec {suite.uri}", StatusCode.BadSecurityModeRejected)

        endpoint = self.endpoint_for(mode, suite.uri)
        if endpoint is None and not suite.is_none:
            raise SecurityError(f"Offre {mode.name}/{suite.uri} non annoncée", StatusCode.BadSecurityPolicyRejected)
        if len(body.client_nonce or b'') != suite.nonce_length and not suite.is_none:
            raise SecurityError("Nonce client de longueur invalide", StatusCode.BadNonceInvalid)

        previous = ctx.state
        if body.request_type == SecurityTokenRequestType.RENEW and previous is None:
            raise SecurityError("Renouvellement sans canal", StatusCode.BadSecureChannelIdInvalid)

        state = SecureChannelState(
            channel_id=previous.channel_id if previous else self._next_id(self._channel_ids),
            token_id=self._next_id(self._token_ids),
            suite=suite,
            mode=mode,
            local_nonce=generate_nonce(suite),
            local_identity=None if suite.is_none else self.identity,
            remote_certificate=sender,
            send_sequence=previous.send_sequence if previous else 1,
            recv_sequence=sequence.sequence_number,
            max_chunk_size=connection.send_chunk_size,
            max_chunk_count=connection.max_chunk_count,
        )
        open_channel_state(state, body.client_nonce)
        ctx.state = connection.state = state
        ctx.endpoint = endpoint
        ctx.peer_certificate = sender

        lifetime = self.config.token_lifetime_ms
        response = OpenSecureChannelResponse(
            response_header=self.response_header(body),
            server_protocol_version=0,
            security_token=ChannelSecurityToken(
                channel_id=state.channel_id,
                token_id=state.token_id,
                created_at=now_ticks(),
                revised_lifetime=min(body.requested_lifetime or lifetime, lifetime),
            ),
            server_nonce=state.local_nonce or None,
        )
        connection.send_open(response, request_id=sequence.request_id)

        if sender is not None:
            self.logger.info(f"🔐 Canal {state.channel_id} ouvert ({mode.name}) avec {sender.application_uri}")
        else:
            self.logger.debug(f"📡 Canal {state.channel_id} ouvert sans sécurité pour {ctx.peer}")
        self.on_channel_opened(ctx)
        return response

    # === SESSIONS ===

    def handle_create_session(self, request: CreateSessionRequest, ctx: ChannelContext) -> CreateSessionResponse:
        secure = ctx.state.is_secure
        if secure:
            if (request.client_certificate or b'') != ctx.peer_certificate.der:
                raise ServiceFaultError(StatusCode.BadCertificateInvalid)
            if len(request.client_nonce or b'') < SESSION_NONCE_LENGTH:
                raise ServiceFaultError(StatusCode.BadNonceInvalid)
            claimed_uri = request.client_description.application_uri
            if claimed_uri and claimed_uri != ctx.peer_certificate.application_uri:
                raise ServiceFaultError(StatusCode.BadCertificateUriInvalid)

        lifetime = float(self.config.token_lifetime_ms)
        session = SessionState(
            session_id=NodeId(self._next_id(self._session_ids), 1),
            authentication_token=NodeId(secrets.token_bytes(AUTH_TOKEN_LENGTH), 1),
            server_nonce=secrets.token_bytes(SESSION_NONCE_LENGTH),
            channel_id=ctx.state.channel_id,
            client_application_uri=request.client_description.application_uri,
            client_certificate=request.client_certificate,
            session_name=request.session_name,
        )
        ctx.sessions[session.authentication_token] = session

        signature = SignatureData()
        if secure:
            signature = sign_application_data(self.identity, request.client_certificate, request.client_nonce)
        self.logger.debug(f"📋 {session.describe()} pour {ctx.peer}")
        return CreateSessionResponse(
            response_header=self.response_header(request),
            session_id=session.session_id,
            authentication_token=session.authentication_token,
            revised_session_timeout=min(request.requested_session_timeout or lifetime, lifetime),
            server_nonce=session.server_nonce,
            server_certificate=self.identity.der if self.identity else None,
            server_endpoints=list(self.endpoints),
            server_signature=signature,
        )

    def handle_activate_session(self, request: ActivateSessionRequest,
                                ctx: ChannelContext) -> ActivateSessionResponse:
        session = ctx.sessions.get(request.request_header.authentication_token)
        if session is None:
            raise ServiceFaultError(StatusCode.BadSessionIdInvalid)
        if ctx.state.is_secure:
            try:
                verify_application_data(ctx.peer_certificate, self.identity.der, session.server_nonce,
                                        request.client_signature)
            except SignatureInvalid:
                raise ServiceFaultError(StatusCode.BadApplicationSignatureInvalid) from None

        token = self._identity_token(request)
        status = self._authenticate(token, session, ctx)
        if not is_good(status):
            raise ServiceFaultError(status)

        session.activated = True
        session.server_nonce = secrets.token_bytes(SESSION_NONCE_LENGTH)
        self.logger.info(f"✅ {session.describe()} activée pour {ctx.peer}")
        return ActivateSessionResponse(response_header=self.response_header(request),
                                       server_nonce=session.server_nonce)

    @staticmethod
    def _identity_token(request: ActivateSessionRequest):
        extension = request.user_identity_token
        if extension is None or extension.encoding == 0:
            return AnonymousIdentityToken()
        try:
            token = unwrap_identity_token(extension)
        except CodecError:
            raise ServiceFaultError(StatusCode.BadIdentityTokenInvalid) from None
        if token is None:
            raise ServiceFaultError(StatusCode.BadIdentityTokenInvalid)
        return token

    def _authenticate(self, token, session: SessionState, ctx: ChannelContext) -> int:
        if isinstance(token, AnonymousIdentityToken):
            if token_policy_for(ctx.endpoint, UserTokenType.ANONYMOUS) is None:
                return int(StatusCode.BadIdentityTokenRejected)
            return self.admit_anonymous(session, ctx)

        if isinstance(token, UserNameIdentityToken):
            policy = token_policy_for(ctx.endpoint, UserTokenType.USERNAME)
            if policy is None:
                return int(StatusCode.BadIdentityTokenRejected)
            try:
                password = self.recover_password(token, policy.security_policy_uri, session, ctx)
            except NonceMismatch:
                return int(StatusCode.BadNonceInvalid)
            except SecurityError as e:
                self.logger.warning(f"⚠️ Jeton UserName illisible depuis {ctx.peer}: {e}")
                return int(StatusCode.BadIdentityTokenInvalid)
            status = self.authenticate_user(token.user_name or '', password, session, ctx)
            if is_good(status):
                session.user = token.user_name
            return status

        return int(StatusCode.BadIdentityTokenRejected)

    def recover_password(self, token: UserNameIdentityToken, token_policy_uri: Optional[str],
                         session: SessionState, ctx: ChannelContext) -> str:
        """
        Mot de passe en clair d'un jeton UserName: déchiffré avec la clé du
        serveur, ou lu tel quel si la politique du jeton est None.

        Raises:
            SecurityError
        """
        if token.encryption_algorithm:
            if token.encryption_algorithm != RSA_OAEP_SHA1_URI or self.identity is None:
                raise SecurityError(f"Algorithme de jeton non supporté: {token.encryption_algorithm}")
            return decrypt_password_token(token.password or b'', self.identity.private_key, session.server_nonce)
        suite = suite_for_uri(token_policy_uri or ctx.endpoint.security_policy_uri)
        if not suite.is_none:
            raise SecurityError("Mot de passe non chiffré pour une politique sécurisée")
        try:
            return (token.password or b'').decode('utf-8')
        except UnicodeDecodeError as e:
            raise SecurityError("Mot de passe non UTF-8") from e

    def handle_close_session(self, request: CloseSessionRequest, ctx: ChannelContext) -> CloseSessionResponse:
        session = ctx.sessions.pop(request.request_header.authentication_token, None)
        if session is None:
            raise ServiceFaultError(StatusCode.BadSessionIdInvalid)
        self.logger.debug(f"📋 {session.describe()} fermée")
        return CloseSessionResponse(response_header=self.response_header(request))

    def active_session(self, request, ctx: ChannelContext) -> SessionState:
        session = ctx.sessions.get(request.request_header.authentication_token)
        if session is None:
            raise ServiceFaultError(StatusCode.BadSessionIdInvalid)
        if not session.activated:
            raise ServiceFaultError(StatusCode.BadSessionNotActivated)
        return session

    # === ATTRIBUTS ===

    def handle_read(self, request: ReadRequest, ctx: ChannelContext) -> ReadResponse:
        session = self.active_session(request, ctx)
        results = [self.read_node(item, session, ctx) for item in request.nodes_to_read or []]
        return ReadResponse(response_header=self.response_header(request), results=results)

    def handle_write(self, request: WriteRequest, ctx: ChannelContext) -> WriteResponse:
        session = self.active_session(request, ctx)
        results = [self.write_node(item, session, ctx) for item in request.nodes_to_write or []]
        return WriteResponse(response_header=self.response_header(request), results=results)


def serve(config: ServerConfig, transcript_dir: Optional[Union[str, Path]] = None,
          label: str = 'server') -> UAServer:
    """
    Démarre un serveur et renvoie son handle (arrêt par stop()).

    Raises:
        BindFailed
    """
    return UAServer(config, transcript_dir=transcript_dir, label=label).start()
