#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
FIXTURES PARTAGÉES - OPC UA TRUSTKIT
Fichier: tests/conftest.py

Identités RSA générées une fois par session, magasins PKI temporaires et
fabrique de serveurs démarrés sur un port libre (arrêtés en fin de test).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.config.base import TestingConfig  # noqa: E402
from app.models.channel import BASIC256SHA256_URI  # noqa: E402
from app.models.endpoint import endpoint_offer  # noqa: E402
from app.models.settings import ClientConfig, ServerConfig  # noqa: E402
from app.models.trust import TrustPolicy  # noqa: E402
from app.protocol.structures import MessageSecurityMode, UserTokenType  # noqa: E402
from app.services.client_service import UAClient  # noqa: E402
from app.services.pki_service import TrustStore, generate_identity  # noqa: E402
from app.services.scenario_service import VictimIdentities  # noqa: E402
from app.services.server_service import UAServer  # noqa: E402
from app.services.transcript import Transcript  # noqa: E402

os.environ.setdefault('TRUSTKIT_ENV', 'testing')

USERNAME = TestingConfig.HARNESS_USERNAME
PASSWORD = TestingConfig.HARNESS_PASSWORD


@pytest.fixture(scope='session')
def config_class():
    return TestingConfig


@pytest.fixture(scope='session')
def server_identity():
    return generate_identity('Test Server', 'urn:trustkit:test:server', key_bits=2048, dns_names=['localhost'])


@pytest.fixture(scope='session')
def client_identity():
    return generate_identity('Test Client', 'urn:trustkit:test:client', key_bits=2048)


@pytest.fixture(scope='session')
def stranger_identity():
    """Identité connue d'aucun magasin de confiance."""
    return generate_identity('Stranger', 'urn:trustkit:test:stranger', key_bits=2048)


@pytest.fixture(scope='session')
def victim_identities(server_identity, client_identity):
    return VictimIdentities(server=server_identity, client=client_identity)


@pytest.fixture
def pki_dir(tmp_path):
    path = tmp_path / 'pki'
    path.mkdir()
    return path


def secure_endpoints(token_types=(UserTokenType.USERNAME,)):
    return [
        endpoint_offer(MessageSecurityMode.SIGN, BASIC256SHA256_URI, token_types),
        endpoint_offer(MessageSecurityMode.SIGN_AND_ENCRYPT, BASIC256SHA256_URI, token_types),
    ]


@pytest.fixture
def make_server(server_identity, client_identity, tmp_path):
    """
    Fabrique de serveurs démarrés sur 127.0.0.1:<port libre>.

    Par défaut: politique Strict, client de test approuvé, utilisateur
    operator/secret, endpoints Sign et SignAndEncrypt Basic256Sha256.
    """
    started = []

    def factory(trust_policy=None, trusted=None, token_types=(UserTokenType.USERNAME,),
                anonymous_allowed=False, endpoints=None, identity=None, server_class=UAServer, **overrides):
        store = TrustStore(trusted=[client_identity.record] if trusted is None else trusted)
        config = ServerConfig(
            identity=identity or server_identity,
            endpoints=endpoints or secure_endpoints(token_types),
            trust_policy=trust_policy or TrustPolicy.strict(),
            trust_store=store,
            users={USERNAME: PASSWORD},
            anonymous_allowed=anonymous_allowed,
            host='127.0.0.1',
            port=0,
            bcrypt_rounds=TestingConfig.BCRYPT_ROUNDS,
            socket_timeout=TestingConfig.SOCKET_TIMEOUT,
            **overrides,
        )
        server = server_class(config, transcript_dir=tmp_path / 'transcripts', label='test-server').start()
        started.append(server)
        return server

    yield factory
    for server in started:
        server.stop()


@pytest.fixture
def make_client(client_identity, server_identity):
    """Fabrique de clients; par défaut Strict avec le serveur de test approuvé."""

    def factory(trust_policy=None, trusted=None, username=USERNAME, password=PASSWORD, identity=None,
                transcript=None, **overrides):
        store = TrustStore(trusted=[server_identity.record] if trusted is None else trusted)
        config = ClientConfig(
            identity=identity or client_identity,
            trust_policy=trust_policy or TrustPolicy.strict(),
            trust_store=store,
            username=username,
            password=password if username else None,
            timeout=TestingConfig.SOCKET_TIMEOUT,
            **overrides,
        )
        return UAClient(config, transcript=transcript if transcript is not None else Transcript())

    return factory
