#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS SERVEUR ET CLIENT (BOUCLE LOCALE)
Fichier: tests/test_server_client.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import pytest

from app.config.base import TestingConfig
from app.exceptions import (
    AuthFailed, ConfigurationError, ConnectFailed, NonceMismatch, ServerRejected, ServiceFaultError, TrustRejected
)
from app.models.channel import BASIC256SHA256_URI, POLICY_NONE_URI
from app.models.endpoint import endpoint_offer
from app.models.node_store import SENSOR_NODE, SETPOINT_NODE, STATUS_NODE, NodeEntry, NodeStore, default_nodes
from app.models.trust import TrustPolicy
from app.protocol.status import StatusCode
from app.protocol.structures import ATTRIBUTE_DISPLAY_NAME, MessageSecurityMode, UserTokenType
from app.protocol.types import LocalizedText
from app.services.server_service import UAServer
from app.services.transcript import Transcript


class TestNodeStore:

    def test_defaults(self):
        store = NodeStore({SETPOINT_NODE: NodeEntry.of(50.0, writable=True),
                           SENSOR_NODE: NodeEntry.of(21.5)})
        assert store.value_of(SENSOR_NODE) == 21.5
        assert store.write(SETPOINT_NODE, 52) == StatusCode.Good
        assert store.value_of(SETPOINT_NODE) == 52.0
        assert isinstance(store.value_of(SETPOINT_NODE), float)

    def test_default_nodes_follow_configuration(self):
        class PlantConfig(TestingConfig):
            DEFAULT_NODES = {'ns=2;s=valve': (3, True, 'Valve')}

        assert NodeStore(default_nodes()).snapshot() == {
            SENSOR_NODE: 21.5, SETPOINT_NODE: 50.0, STATUS_NODE: 'RUNNING',
        }
        store = NodeStore(default_nodes(PlantConfig))
        assert store.snapshot() == {'ns=2;s=valve': 3}
        assert store.write('ns=2;s=valve', 4) == StatusCode.Good

    @pytest.mark.parametrize('node_id,value,status', [
        (SENSOR_NODE, 1.0, StatusCode.BadNotWritable),
        ('ns=1;s=absent', 1.0, StatusCode.BadNodeIdUnknown),
        (SETPOINT_NODE, 'texte', StatusCode.BadTypeMismatch),
    ])
    def test_write_refusals(self, node_id, value, status):
        store = NodeStore({SETPOINT_NODE: NodeEntry.of(50.0, writable=True),
                           SENSOR_NODE: NodeEntry.of(21.5)})
        assert store.write(node_id, value) == status
        assert store.value_of(SETPOINT_NODE) == 50.0

    def test_attributes(self):
        store = NodeStore({SENSOR_NODE: NodeEntry.of(21.5, display_name='Sensor')})
        assert store.read(SENSOR_NODE, ATTRIBUTE_DISPLAY_NAME).value.value == LocalizedText('Sensor')
        assert store.read(SENSOR_NODE, 99).status == StatusCode.BadAttributeIdInvalid
        assert store.snapshot() == {SENSOR_NODE: 21.5}


class TestDiscovery:

    def test_endpoints_advertised(self, make_server, make_client, server_identity):
        server = make_server()
        endpoints = make_client(username=None, identity=None).discover(server.url)
        assert [e.security_mode for e in endpoints] == [MessageSecurityMode.SIGN,
                                                       MessageSecurityMode.SIGN_AND_ENCRYPT]
        assert all(e.server_certificate == server_identity.der for e in endpoints)
        assert all(e.endpoint_url == server.url for e in endpoints)

    def test_survey(self, make_server, make_client):
        server = make_server()
        target = make_client(username=None).survey(server.url)
        assert target.application.application_uri == 'urn:trustkit:test:server'
        assert len(target.secure_endpoints) == 2

    def test_discovery_channel_cannot_open_session(self, make_server, make_client):
        server = make_server()
        client = make_client()
        channel = client._discovery_channel(server.url)
        try:
            with pytest.raises(ServiceFaultError) as excinfo:
                client.create_session(channel)
            assert excinfo.value.status == StatusCode.BadSecurityModeRejected
        finally:
            channel.close()

    def test_most_secure_selected(self, make_server, make_client):
        server = make_server()
        client = make_client()
        chosen = client.select_endpoint(client.discover(server.url))
        assert chosen.security_mode == MessageSecurityMode.SIGN_AND_ENCRYPT

    def test_selection_not_offered(self, make_server, make_client):
        server = make_server()
        wanted = endpoint_offer(MessageSecurityMode.NONE, POLICY_NONE_URI)
        client = make_client(endpoint_selection=wanted)
        with pytest.raises(ConfigurationError):
            client.select_endpoint(client.discover(server.url))


class TestSessions:

    @pytest.mark.parametrize('mode', [MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT])
    def test_read_and_write(self, make_server, make_client, mode):
        server = make_server()
        client = make_client(endpoint_selection=endpoint_offer(mode, BASIC256SHA256_URI,
                                                               [UserTokenType.USERNAME]))
        with client.connect(url=server.url) as session:
            assert session.endpoint.security_mode == mode
            assert session.read(SENSOR_NODE) == 21.5
            assert session.read(STATUS_NODE) == 'RUNNING'
            assert session.write(SETPOINT_NODE, 51.0) == StatusCode.Good
            assert session.write(SENSOR_NODE, 0.0) == StatusCode.BadNotWritable
            assert session.read(SETPOINT_NODE) == 51.0
        assert server.node_store.value_of(SETPOINT_NODE) == 51.0
        assert server.node_store.value_of(SENSOR_NODE) == 21.5

    def test_password_never_in_clear(self, make_server, make_client):
        server = make_server()
        transcript = Transcript()
        with make_client(transcript=transcript).connect(url=server.url):
            pass
        assert not transcript.contains(b'secret')
        assert transcript.completed_open()

    def test_display_name_and_unknown_node(self, make_server, make_client):
        server = make_server()
        with make_client().connect(url=server.url) as session:
            assert session.read(SETPOINT_NODE, ATTRIBUTE_DISPLAY_NAME) == LocalizedText('Setpoint')
            with pytest.raises(ServiceFaultError) as excinfo:
                session.read('ns=1;s=absent')
            assert excinfo.value.status == StatusCode.BadNodeIdUnknown

    def test_bad_password(self, make_server, make_client):
        server = make_server()
        with pytest.raises(AuthFailed) as excinfo:
            make_client(password='wrong').connect(url=server.url)
        assert excinfo.value.status == StatusCode.BadUserAccessDenied

    def test_anonymous_refused_on_username_endpoints(self, make_server, make_client):
        server = make_server()
        with pytest.raises(AuthFailed):
            make_client(username=None).connect(url=server.url)

    def test_anonymous_allowed(self, make_server, make_client):
        server = make_server(token_types=(UserTokenType.ANONYMOUS,), anonymous_allowed=True)
        with make_client(username=None).connect(url=server.url) as session:
            assert session.read(SENSOR_NODE) == 21.5


class TestTrust:

    def test_strict_server_rejects_unknown_client(self, make_server, make_client, stranger_identity):
        server = make_server()
        with pytest.raises(ServerRejected) as excinfo:
            make_client(identity=stranger_identity).connect(url=server.url)
        assert excinfo.value.status == StatusCode.BadCertificateUntrusted
        assert server.trust_store.decisions[-1].accepted is False

    def test_strict_client_rejects_before_tcp(self, make_server, make_client):
        server = make_server()
        scout = make_client(username=None)
        endpoint = scout.select_endpoint(scout.discover(server.url))
        transcript = Transcript()
        client = make_client(trusted=[], transcript=transcript)
        with pytest.raises(TrustRejected):
            client.connect(endpoint=endpoint, url=server.url)
        assert len(transcript) == 0

    def test_accept_all_server(self, make_server, make_client, stranger_identity):
        server = make_server(trust_policy=TrustPolicy.accept_all(), trusted=[])
        with make_client(identity=stranger_identity).connect(url=server.url) as session:
            assert session.read(SENSOR_NODE) == 21.5
        assert server.trust_store.decisions[-1].basis == 'no_validation'

    def test_rejected_store_then_promotion(self, make_server, make_client, stranger_identity):
        server = make_server(trust_policy=TrustPolicy.rejected_store(), trusted=[])
        client = make_client(identity=stranger_identity)
        with pytest.raises(ServerRejected):
            client.connect(url=server.url)
        assert [r.thumbprint for r in server.trust_store.rejected] == [stranger_identity.record.thumbprint]

        server.trust_store.promote(stranger_identity.record.thumbprint)
        with client.connect(url=server.url) as session:
            assert session.read(SENSOR_NODE) == 21.5
        assert server.trust_store.decisions[-1].basis == 'promoted'

    def test_server_stop_releases_port(self, make_server, make_client):
        server = make_server()
        url = server.url
        server.stop()
        assert not server.running
        with pytest.raises(ConnectFailed):
            make_client().discover(url)


class ChannelNonceEchoServer(UAServer):
    """Renvoie le nonce OPN comme nonce de session."""

    def handle_create_session(self, request, ctx):
        response = super().handle_create_session(request, ctx)
        response.server_nonce = ctx.state.local_nonce
        return response


class StaleNonceServer(UAServer):
    """Garde le même nonce de session après ActivateSession."""

    def handle_activate_session(self, request, ctx):
        session = ctx.sessions[request.request_header.authentication_token]
        previous = session.server_nonce
        response = super().handle_activate_session(request, ctx)
        session.server_nonce = response.server_nonce = previous
        return response


class NonceRecordingServer(UAServer):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.channel_nonces = []

    def on_channel_opened(self, ctx):
        super().on_channel_opened(ctx)
        if ctx.state.is_secure:
            self.channel_nonces.append(ctx.state.local_nonce)


class TestNonces:

    def test_fresh_nonces_per_channel(self, make_server, make_client):
        server = make_server(server_class=NonceRecordingServer)
        client = make_client()
        endpoint = client.select_endpoint(client.discover(server.url))
        first = client.open_channel(endpoint, server.url)
        second = client.open_channel(endpoint, server.url)
        try:
            assert first.state.local_nonce and second.state.local_nonce
            assert first.state.local_nonce != second.state.local_nonce
            assert first.state.remote_nonce != second.state.remote_nonce
        finally:
            first.close()
            second.close()
        assert len(server.channel_nonces) == 2
        assert server.channel_nonces[0] != server.channel_nonces[1]
        assert server.channel_nonces == [first.state.remote_nonce, second.state.remote_nonce]

    def test_session_nonce_renewed_on_activation(self, make_server, make_client):
        server = make_server()
        client = make_client()
        channel = client.open_channel(client.select_endpoint(client.discover(server.url)), server.url)
        try:
            session = client.create_session(channel)
            created = session.server_nonce
            assert created != channel.state.remote_nonce
            assert client.activate_session(session).server_nonce != created
        finally:
            channel.close()

    def test_channel_nonce_reused_for_session(self, make_server, make_client):
        server = make_server(server_class=ChannelNonceEchoServer)
        with pytest.raises(NonceMismatch):
            make_client().connect(url=server.url)

    def test_session_nonce_not_renewed(self, make_server, make_client):
        server = make_server(server_class=StaleNonceServer)
        with pytest.raises(NonceMismatch):
            make_client().connect(url=server.url)
