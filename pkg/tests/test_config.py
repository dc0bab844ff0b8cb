#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS CONFIGURATION, VALIDATEURS ET LIGNE DE COMMANDE
Fichier: tests/test_config.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import argparse
import json

import pytest

import run
from app import ToolkitContext, __version__, create_toolkit
from app.config.base import DevelopmentConfig, TestingConfig, get_config, validate_config
from app.config.profiles import (
    TRUST_PROFILES, load_client_config, load_scenario_file, load_server_config, policy_for_profile,
    profile_name_for, trust_policy_for_name
)
from app.exceptions import ConfigurationError
from app.models.assessment import EXIT_VULNERABLE, AssessmentReport, AttackKind, Profile, ScenarioSpec, UserAuth
from app.models.channel import BASIC256SHA256_URI
from app.models.trust import TrustPolicy, TrustPolicyKind
from app.protocol.structures import MessageSecurityMode, UserTokenType
from app.services.transcript import Transcript
from app.utils.validators import (
    validate_endpoint_url, validate_host, validate_listen_address, validate_port, validate_profile_name,
    validate_scan_target, validate_scenario_spec, validate_transcript_path
)


def write_json(path, data):
    path.write_text(json.dumps(data), encoding='utf-8')
    return path


class TestEnvironments:

    def test_get_config(self):
        assert get_config('testing') is TestingConfig
        assert get_config('inconnu') is DevelopmentConfig
        assert TestingConfig.get_network_config()['scan_timeout'] == 1.0
        assert TestingConfig.get_crypto_config()['bcrypt_rounds'] == 4

    def test_validate_config(self):
        validate_config(TestingConfig)

        class BadKeys(TestingConfig):
            KEY_BITS = 1024

        with pytest.raises(ValueError):
            validate_config(BadKeys)

    def test_create_toolkit(self):
        ctx = create_toolkit(config_class=TestingConfig)
        assert isinstance(ctx, ToolkitContext)
        assert ctx.version == __version__
        assert ctx.transcript_dir.exists()
        assert ctx.pki_dir == TestingConfig.PKI_DIR


class TestProfiles:

    @pytest.mark.parametrize('profile', list(Profile))
    @pytest.mark.parametrize('auto_accept', [True, False])
    def test_names_match_policies(self, profile, auto_accept):
        name = profile_name_for(profile, auto_accept)
        assert trust_policy_for_name(name) == policy_for_profile(profile, auto_accept)

    def test_profile_policies(self):
        assert policy_for_profile(Profile.SECURE).kind == TrustPolicyKind.STRICT
        assert policy_for_profile(Profile.P2_DEFAULT_ACCEPT_ALL, False) == TrustPolicy.accept_all_default_flag(False)
        assert len(TRUST_PROFILES) == 5

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            trust_policy_for_name('trust-everyone')


class TestConfigFiles:

    def test_scenario_file(self, tmp_path):
        path = write_json(tmp_path / 'scenarios.json', {'scenarios': [
            {'server_profile': 'P2_DefaultAcceptAll', 'client_profile': 'Secure', 'user_auth': 'UserName',
             'attack': 'RogueClient', 'seed': 4, 'server_auto_accept': False},
        ]})
        [spec] = load_scenario_file(path)
        assert spec == ScenarioSpec(Profile.P2_DEFAULT_ACCEPT_ALL, Profile.SECURE, UserAuth.USERNAME,
                                    AttackKind.ROGUE_CLIENT, seed=4, server_auto_accept=False)

    @pytest.mark.parametrize('content', [
        {'scenarios': []},
        {'scenarios': [{'server_profile': 'P9', 'client_profile': 'Secure', 'user_auth': 'UserName',
                        'attack': 'RogueClient'}]},
        {'scenarios': [{'server_profile': 'Secure', 'client_profile': 'Secure', 'user_auth': 'UserName',
                        'attack': 'RogueClient', 'colour': 'blue'}]},
    ])
    def test_invalid_scenario_files(self, tmp_path, content):
        with pytest.raises(ConfigurationError):
            load_scenario_file(write_json(tmp_path / 'bad.json', content))

    def test_missing_and_broken_files(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario_file(tmp_path / 'absent.json')
        broken = tmp_path / 'broken.json'
        broken.write_text('{"scenarios": [', encoding='utf-8')
        with pytest.raises(ConfigurationError):
            load_scenario_file(broken)

    def test_server_config(self, tmp_path):
        path = write_json(tmp_path / 'server.json', {
            'port': 0,
            'application_uri': 'urn:plant:server',
            'identity': {'directory': str(tmp_path / 'pki'), 'name': 'plant-server'},
            'endpoints': [{'security_mode': 'SignAndEncrypt', 'security_policy': 'Basic256Sha256',
                           'user_tokens': ['UserName']}],
            'trust_profile': 'p3-rejected-store-promotion',
            'trust_store': str(tmp_path / 'trust'),
            'users': {'operator': 'secret'},
            'nodes': [{'node_id': 'ns=2;s=valve', 'value': 3, 'writable': True}],
        })
        config = load_server_config(path, TestingConfig)

        assert config.identity.application_uri == 'urn:plant:server'
        assert (tmp_path / 'pki' / 'plant-server.der').exists()
        assert config.trust_policy == TrustPolicy.rejected_store()
        assert config.trust_store.persistence_path == tmp_path / 'trust'
        assert config.bcrypt_rounds == TestingConfig.BCRYPT_ROUNDS
        [endpoint] = config.endpoints
        assert endpoint.security_mode == MessageSecurityMode.SIGN_AND_ENCRYPT
        assert endpoint.security_policy_uri == BASIC256SHA256_URI
        assert [p.token_type for p in endpoint.user_identity_tokens] == [UserTokenType.USERNAME]
        assert list(config.nodes) == ['ns=2;s=valve']

    def test_server_config_mode_policy_mismatch(self, tmp_path):
        path = write_json(tmp_path / 'server.json', {
            'endpoints': [{'security_mode': 'Sign', 'security_policy': 'None'}],
        })
        with pytest.raises(ConfigurationError):
            load_server_config(path)

    def test_client_config(self, tmp_path):
        path = write_json(tmp_path / 'client.json', {
            'trust_profile': 'p1-missing-trustlist',
            'endpoint': {'security_mode': 'Sign', 'security_policy': 'Basic256Sha256', 'user_tokens': ['UserName']},
            'username': 'operator',
            'password': 'secret',
        })
        config = load_client_config(path, TestingConfig)
        assert config.identity is None
        assert config.trust_policy == TrustPolicy.accept_all()
        assert config.endpoint_selection.security_mode == MessageSecurityMode.SIGN
        assert config.timeout == TestingConfig.SOCKET_TIMEOUT

    def test_client_password_without_username(self, tmp_path):
        path = write_json(tmp_path / 'client.json', {'password': 'secret'})
        with pytest.raises(ConfigurationError):
            load_client_config(path)


class TestValidators:

    @pytest.mark.parametrize('host,valid', [
        ('plc-1.plant.local', True), ('10.0.0.5', True), ('', False), ('bad_host!', False),
    ])
    def test_host(self, host, valid):
        assert validate_host(host)['valid'] is valid

    def test_port(self):
        assert validate_port(4840)['valid']
        assert validate_port(102)['warnings']
        assert not validate_port(0)['valid']
        assert validate_port(0, allow_zero=True)['valid']
        assert not validate_port('abc')['valid']

    def test_listen_address(self):
        result = validate_listen_address('0.0.0.0:0')
        assert (result['host'], result['port']) == ('0.0.0.0', 0)
        assert result['warnings']
        assert not validate_listen_address('4840')['valid']

    @pytest.mark.parametrize('url,valid,warned', [
        ('opc.tcp://plc:4840', True, False),
        ('opc.tcp://plc', True, True),
        ('http://plc:80', False, False),
        ('opc.tcp://plc:99999', False, False),
    ])
    def test_endpoint_url(self, url, valid, warned):
        result = validate_endpoint_url(url)
        assert result['valid'] is valid
        assert bool(result['warnings']) is warned

    @pytest.mark.parametrize('target,valid', [
        ('plc', True), ('plc:4841', True), ('opc.tcp://plc:4840', True), ('10.1.0.0/24', True),
        ('plc:abc', False), ('10.0.0.0/40', False), ('', False),
    ])
    def test_scan_target(self, target, valid):
        assert validate_scan_target(target)['valid'] is valid

    def test_large_scan_warns(self):
        assert validate_scan_target('10.0.0.0/16')['warnings']

    def test_profile_name(self):
        assert validate_profile_name('secure') == {'valid': True, 'errors': [], 'warnings': []}
        assert validate_profile_name('p2-flag-off')['warnings']
        assert not validate_profile_name('open')['valid']

    def test_scenario_spec(self):
        spec = ScenarioSpec(Profile.SECURE, Profile.SECURE, UserAuth.ANONYMOUS, AttackKind.MIDDLEPERSON,
                            server_auto_accept=False)
        result = validate_scenario_spec(spec)
        assert result['valid']
        assert len(result['warnings']) == 2
        spec.seed = -1
        assert not validate_scenario_spec(spec)['valid']

    def test_transcript_path(self, tmp_path):
        assert not validate_transcript_path(str(tmp_path / 'absent.tktr'))['valid']
        assert not validate_transcript_path(str(tmp_path))['valid']
        empty = tmp_path / 'empty.tktr'
        empty.touch()
        assert validate_transcript_path(str(empty))['warnings']


class TestCommandLine:

    def test_parse_listen(self):
        assert run.parse_listen('0.0.0.0:4841') == ('0.0.0.0', 4841)
        assert run.parse_listen(':0') == ('127.0.0.1', 0)
        with pytest.raises(argparse.ArgumentTypeError):
            run.parse_listen('plc:99999')

    def test_assess_requires_profiles(self):
        assert run.main(['assess', '--env', 'testing', '--attack', 'RogueClient']) == run.EXIT_ERROR

    def test_assess_exit_code_follows_report(self, mocker, tmp_path):
        spec = ScenarioSpec(Profile.P1_MISSING_TRUSTLIST, Profile.SECURE, UserAuth.USERNAME,
                            AttackKind.ROGUE_CLIENT)
        vulnerable = mocker.Mock(spec=AssessmentReport, exit_code=2)
        runner = mocker.patch('app.services.scenario_service.run_scenario', return_value=vulnerable)
        mocker.patch('app.services.report_service.render_report', return_value=b'rapport\n')

        code = run.main(['assess', '--env', 'testing', '--attack', 'RogueClient',
                         '--server-profile', 'P1_MissingTrustlist', '--client-profile', 'Secure',
                         '--out', str(tmp_path / 'report.txt')])

        assert code == EXIT_VULNERABLE
        assert runner.call_args.args[0] == spec
        assert (tmp_path / 'report.txt').read_bytes() == b'rapport\n'

    def test_transcript_command(self, tmp_path):
        path = tmp_path / 'session.tktr'
        Transcript(path, label='session').outbound(b'HELF\x08\x00\x00\x00')
        out = tmp_path / 'listing.json'

        assert run.main(['transcript', '--env', 'testing', '--format', 'machine', '--out', str(out),
                         str(path)]) == run.EXIT_SECURE
        assert json.loads(out.read_bytes())['records'][0]['message_type'] == 'HEL'

    def test_transcript_foreign_file(self, tmp_path):
        path = tmp_path / 'foreign.tktr'
        path.write_bytes(b'not a transcript')
        assert run.main(['transcript', '--env', 'testing', str(path)]) == run.EXIT_ERROR

    def test_scan_never_fails_on_unreachable_targets(self, tmp_path, mocker):
        report = mocker.Mock()
        report.to_dict.return_value = {'descriptors': [], 'failures': []}
        scan = mocker.patch('app.services.scanner_service.scan', return_value=report)
        out = tmp_path / 'scan.json'

        code = run.main(['scan', '--env', 'testing', '--format', 'machine', '--out', str(out), 'plc:4841'])

        assert code == run.EXIT_SECURE
        assert scan.call_args.args[0] == ['plc:4841']
        assert json.loads(out.read_bytes()) == {'descriptors': [], 'failures': []}

    def test_invalid_scan_target(self):
        assert run.main(['scan', '--env', 'testing', 'plc:abc']) == run.EXIT_ERROR
