#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS ATTAQUES (ROGUE SERVER, ROGUE CLIENT, MIDDLEPERSON)
Fichier: tests/test_attacks.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import pytest

from app.config.base import TestingConfig
from app.exceptions import ConfigurationError, TrustRejected
from app.models.assessment import AttackKind, AttackResult, EvidenceKind, Side
from app.models.channel import BASIC256SHA256_URI, POLICY_NONE_URI
from app.models.endpoint import TargetDescriptor, endpoint_offer
from app.models.node_store import SENSOR_NODE, SETPOINT_NODE
from app.models.trust import TrustPolicy
from app.protocol.status import StatusCode
from app.protocol.structures import MessageSecurityMode, UserTokenType
from app.protocol.types import NodeId
from app.services.fabricated_data import FabricatedDataGenerator, FabricatedMode
from app.services.middleperson import Manipulation, Middleperson
from app.services.rogue_client import RogueClient
from app.services.rogue_server import RogueServer, clone_config
from app.services.transcript import Transcript

USERNAME = TestingConfig.HARNESS_USERNAME
PASSWORD = TestingConfig.HARNESS_PASSWORD


@pytest.fixture
def survey(make_client):
    """Descripteur de cible tel que vu par un scanner anonyme."""
    def factory(server) -> TargetDescriptor:
        return make_client(username=None).survey(server.url)
    return factory


class TestFabricatedData:

    def test_constant_keeps_template_type(self):
        generator = FabricatedDataGenerator(FabricatedMode.CONSTANT, constant=7.6)
        assert generator.value_for(SENSOR_NODE, 21.5) == 7.6
        assert generator.value_for(SENSOR_NODE, 3) == 8
        assert generator.value_for('ns=1;s=status', 'RUNNING') == 'RUNNING'

    def test_last_seen(self):
        generator = FabricatedDataGenerator('last_seen', constant=1.0)
        assert generator.value_for(SENSOR_NODE, 21.5) == 1.0
        generator.observe(NodeId.parse(SENSOR_NODE), 19.25)
        assert generator.value_for(SENSOR_NODE, 21.5) == 19.25
        assert generator.last_seen(SENSOR_NODE) == 19.25

    def test_random_walk_is_seeded(self):
        first = FabricatedDataGenerator('random_walk', constant=20.0, seed=42)
        second = FabricatedDataGenerator('random_walk', constant=20.0, seed=42)
        walk = [first.value_for(SENSOR_NODE, 21.5) for _ in range(5)]
        assert walk == [second.value_for(SENSOR_NODE, 21.5) for _ in range(5)]
        assert len(set(walk)) == 5

    def test_hook(self):
        generator = FabricatedDataGenerator(hook=lambda node_id, template: f"{node_id}:{template}")
        assert generator.mode == FabricatedMode.HOOK
        assert generator.value_for(SENSOR_NODE, 1) == 'ns=1;s=sensor:1'

    @pytest.mark.parametrize('mode', ['sinusoid', 'hook'])
    def test_invalid_modes(self, mode):
        with pytest.raises(ConfigurationError):
            FabricatedDataGenerator(mode)


class TestRogueServer:

    def test_clone_config(self, make_server, survey, server_identity):
        target = survey(make_server())
        config = clone_config(target)
        assert config.application_uri == 'urn:trustkit:test:server'
        assert config.identity.application_uri == server_identity.application_uri
        assert config.identity.record.thumbprint != server_identity.record.thumbprint
        assert [e.endpoint_url for e in config.endpoints] == [None, None]
        assert config.trust_policy == TrustPolicy.accept_all()

    def test_clone_without_endpoints(self):
        with pytest.raises(ConfigurationError):
            clone_config(TargetDescriptor('127.0.0.1', 4840))

    def test_accept_all_client_leaks_credentials(self, make_server, make_client, survey):
        target = survey(make_server())
        with RogueServer(target) as rogue:
            victim = make_client(trust_policy=TrustPolicy.accept_all(), trusted=[])
            with victim.connect(url=rogue.url) as session:
                assert session.read(SENSOR_NODE) == 0.0
                assert session.write(SETPOINT_NODE, 80.0) == StatusCode.Good

            credential = rogue.wait_for_credential(timeout=5)
            outcome = rogue.outcome()

        assert (credential.username, credential.password) == (USERNAME, PASSWORD)
        assert credential.victim_application_uri == 'urn:trustkit:test:client'
        assert outcome.result == AttackResult.VULNERABLE
        assert outcome.is_consistent()
        assert {e.side for e in outcome.evidence} == {Side.CLIENT}
        assert outcome.has(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED)
        assert outcome.of_kind(EvidenceKind.VALUE_READ)[0].payload['source'] == 'fabricated'
        assert outcome.of_kind(EvidenceKind.VALUE_WRITTEN)[0].payload['value'] == 80.0
        assert outcome.of_kind(EvidenceKind.CREDENTIAL_CAPTURED)[0].payload['security_mode'] == 'SIGN_AND_ENCRYPT'
        assert not any('canal None' in note for note in outcome.notes)

    def test_credential_over_none_channel(self, make_server, make_client, survey):
        none_offer = endpoint_offer(MessageSecurityMode.NONE, POLICY_NONE_URI, [UserTokenType.USERNAME],
                                    token_policy_uri=POLICY_NONE_URI)
        secure_offer = endpoint_offer(MessageSecurityMode.SIGN_AND_ENCRYPT, BASIC256SHA256_URI,
                                      [UserTokenType.USERNAME])
        target = survey(make_server(endpoints=[none_offer, secure_offer]))
        with RogueServer(target) as rogue:
            transcript = Transcript()
            victim = make_client(endpoint_selection=none_offer, transcript=transcript)
            with victim.connect(url=rogue.url) as session:
                assert session.endpoint.security_mode == MessageSecurityMode.NONE
            credential = rogue.wait_for_credential(timeout=5)
            outcome = rogue.outcome()

        assert (credential.username, credential.password) == (USERNAME, PASSWORD)
        assert transcript.contains(PASSWORD.encode())
        assert outcome.result == AttackResult.VULNERABLE
        assert not outcome.has(EvidenceKind.UNTRUSTED_CHANNEL_ACCEPTED)
        assert outcome.of_kind(EvidenceKind.CREDENTIAL_CAPTURED)[0].payload['security_mode'] == 'NONE'
        assert any('canal None' in note for note in outcome.notes)

    def test_strict_client_sends_nothing_secure(self, make_server, make_client, survey):
        target = survey(make_server())
        with RogueServer(target) as rogue:
            transcript = Transcript()
            victim = make_client(transcript=transcript)
            with pytest.raises(TrustRejected):
                victim.connect(url=rogue.url)
            outcome = rogue.outcome()

        assert rogue.credentials == []
        assert rogue.wait_for_credential(timeout=0.1) is None
        assert not transcript.contains(PASSWORD.encode())
        assert not transcript.completed_open()
        assert outcome.result == AttackResult.SECURE
        assert outcome.evidence == []


class TestRogueClient:

    @pytest.mark.parametrize('policy', [TrustPolicy.accept_all(), TrustPolicy.accept_all_default_flag(True)])
    def test_permissive_server(self, make_server, survey, stranger_identity, policy):
        server = make_server(trust_policy=policy, trusted=[])
        outcome = RogueClient(survey(server), credentials=(USERNAME, PASSWORD), identity=stranger_identity).run()

        assert outcome.attack == AttackKind.ROGUE_CLIENT
        assert outcome.result == AttackResult.VULNERABLE
        assert {e.side for e in outcome.evidence} == {Side.SERVER}
        reads = {e.payload['node_id']: e.payload['value'] for e in outcome.of_kind(EvidenceKind.VALUE_READ)}
        assert reads[SENSOR_NODE] == 21.5
        assert outcome.of_kind(EvidenceKind.VALUE_WRITTEN)[0].payload['node_id'] == SETPOINT_NODE
        assert server.node_store.value_of(SETPOINT_NODE) == 50.0

    @pytest.mark.parametrize('policy', [TrustPolicy.strict(), TrustPolicy.accept_all_default_flag(False)])
    def test_validating_server(self, make_server, survey, stranger_identity, policy):
        server = make_server(trust_policy=policy)
        outcome = RogueClient(survey(server), credentials=(USERNAME, PASSWORD), identity=stranger_identity).run()

        assert outcome.result == AttackResult.SECURE
        assert outcome.evidence == []
        assert len(outcome.notes) == 2
        assert all('BadCertificateUntrusted' in note for note in outcome.notes)

    def test_rejected_store_records_attempt(self, make_server, survey, stranger_identity):
        server = make_server(trust_policy=TrustPolicy.rejected_store(), trusted=[])
        outcome = RogueClient(survey(server), identity=stranger_identity).run()

        assert outcome.result == AttackResult.SECURE
        assert [r.thumbprint for r in server.trust_store.rejected] == [stranger_identity.record.thumbprint]

    def test_username_endpoint_without_credentials(self, make_server, survey, stranger_identity):
        server = make_server(trust_policy=TrustPolicy.accept_all(), trusted=[])
        outcome = RogueClient(survey(server), identity=stranger_identity).run()

        assert outcome.result == AttackResult.VULNERABLE
        assert not outcome.has(EvidenceKind.VALUE_READ)
        assert any('aucun identifiant' in note for note in outcome.notes)

    def test_look_alike_identity(self, make_server, survey, client_identity):
        server = make_server()
        rogue = RogueClient(survey(server), credentials=(USERNAME, PASSWORD), impersonate=client_identity.der)
        assert rogue.identity.application_uri == client_identity.application_uri
        assert rogue.run().result == AttackResult.SECURE

    def test_no_secure_endpoint(self, stranger_identity):
        outcome = RogueClient(TargetDescriptor('127.0.0.1', 4840), identity=stranger_identity).run()
        assert outcome.result == AttackResult.INCONCLUSIVE
        assert outcome.is_consistent()

    def test_forged_identity_is_seeded(self):
        target = TargetDescriptor('127.0.0.1', 4840)
        first = RogueClient(target, seed=7, identity=None)
        second = RogueClient(target, seed=7, identity=None)
        assert first.identity.application_uri == second.identity.application_uri
        assert first.identity.application_uri.startswith('urn:')
        assert first.identity.record.thumbprint != second.identity.record.thumbprint


class TestMiddleperson:

    def test_replay_and_manipulation(self, make_server, make_client, survey):
        server = make_server(trust_policy=TrustPolicy.accept_all(), trusted=[])
        with Middleperson(survey(server), manipulation=Manipulation.negate([SENSOR_NODE])) as attacker:
            victim = make_client(trust_policy=TrustPolicy.accept_all(), trusted=[])
            with victim.connect(url=attacker.url) as session:
                assert session.read(SENSOR_NODE) == -21.5
                assert session.write(SETPOINT_NODE, 55.0) == StatusCode.Good
            outcome = attacker.outcome()

        assert server.node_store.value_of(SETPOINT_NODE) == 55.0
        assert outcome.attack == AttackKind.MIDDLEPERSON
        assert outcome.result == AttackResult.VULNERABLE
        assert outcome.has(EvidenceKind.CREDENTIAL_CAPTURED)
        assert outcome.of_kind(EvidenceKind.SESSION_REPLAYED)[0].payload['username'] == USERNAME
        read = outcome.of_kind(EvidenceKind.VALUE_READ)[0].payload
        assert (read['value'], read['relayed'], read['source']) == (21.5, -21.5, 'eavesdropped')
        forwarded = outcome.of_kind(EvidenceKind.FORWARDED_TRAFFIC)[0].payload
        assert forwarded['requests'] == 2
        assert forwarded['upstream_bytes_out'] > 0
        assert attacker.upstream_identity().application_uri == 'urn:trustkit:test:client'

    def test_upstream_rejected_falls_back_to_fabricated(self, make_server, make_client, survey):
        server = make_server()
        with Middleperson(survey(server)) as attacker:
            victim = make_client(trust_policy=TrustPolicy.accept_all(), trusted=[])
            with victim.connect(url=attacker.url) as session:
                assert session.read(SENSOR_NODE) == 0.0
            outcome = attacker.outcome()

        assert not outcome.has(EvidenceKind.SESSION_REPLAYED)
        assert outcome.has(EvidenceKind.CREDENTIAL_CAPTURED)
        assert outcome.result == AttackResult.VULNERABLE
        assert any('amont refusée' in note for note in outcome.notes)

    def test_refused_credentials_are_inconclusive(self, make_server, make_client, survey):
        server = make_server(trust_policy=TrustPolicy.accept_all(), trusted=[])
        with Middleperson(survey(server)) as attacker:
            victim = make_client(trust_policy=TrustPolicy.accept_all(), trusted=[], password='wrong')
            with victim.connect(url=attacker.url):
                pass
            outcome = attacker.outcome()

        assert outcome.result == AttackResult.INCONCLUSIVE
        assert any(note.startswith('ReplayFailed') for note in outcome.notes)

    def test_manipulation_identity_by_default(self):
        node = NodeId.parse(SENSOR_NODE)
        assert Manipulation().rewrite_read(node, 3.0) == 3.0
        negate = Manipulation.negate([SENSOR_NODE])
        assert negate.rewrite_read(node, 3.0) == -3.0
        assert negate.rewrite_read(NodeId.parse(SETPOINT_NODE), 3.0) == 3.0
        assert negate.rewrite_read(node, 'RUNNING') == 'RUNNING'
