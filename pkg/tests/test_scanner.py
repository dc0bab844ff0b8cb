#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS SCANNER
Fichier: tests/test_scanner.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import socket
import threading

import pytest

from app.exceptions import ConfigurationError, ConnectFailed, ServerRejected
from app.services.scanner_service import (
    NON_OPC, REFUSED, REJECTED, UNREACHABLE, OpcScanner, classify_failure, expand_targets, scan
)


def free_port() -> int:
    spare = socket.socket()
    spare.bind(('127.0.0.1', 0))
    port = spare.getsockname()[1]
    spare.close()
    return port


@pytest.fixture
def garbage_listener():
    """Écoute locale qui répond à toute connexion par une bannière HTTP."""
    listener = socket.socket()
    listener.bind(('127.0.0.1', 0))
    listener.listen()
    listener.settimeout(5.0)

    def serve():
        try:
            conn, _ = listener.accept()
        except OSError:
            return
        with conn:
            conn.sendall(b'HTTP/1.1 400 Bad Request\r\n\r\n')
            try:
                conn.recv(1024)
            except OSError:
                pass

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    yield listener.getsockname()[1]
    listener.close()
    thread.join(timeout=5)


class TestExpandTargets:

    def test_forms(self):
        assert expand_targets(['plc-1', 'plc-2:4841', 'opc.tcp://plc-3:4842/UA']) == [
            ('plc-1', 4840), ('plc-2', 4841), ('plc-3', 4842),
        ]

    def test_cidr(self):
        assert expand_targets(['10.0.0.0/30']) == [('10.0.0.1', 4840), ('10.0.0.2', 4840)]
        assert expand_targets(['10.0.0.7/32']) == [('10.0.0.7', 4840)]

    def test_duplicates_and_blanks(self):
        assert expand_targets(['plc', ' plc ', '', 'plc:4840'], default_port=4840) == [('plc', 4840)]

    def test_default_port(self):
        assert expand_targets(['plc'], default_port=48010) == [('plc', 48010)]

    @pytest.mark.parametrize('target', ['plc:http', 'plc:0', 'plc:70000', '10.0.0.0/99', 'http://plc:80'])
    def test_invalid(self, target):
        with pytest.raises(ConfigurationError):
            expand_targets([target])


class TestClassification:

    def test_refused(self):
        try:
            raise ConnectFailed('fermé') from ConnectionRefusedError()
        except ConnectFailed as e:
            assert classify_failure(e) == REFUSED

    def test_other_network_errors(self):
        try:
            raise ConnectFailed('route') from OSError('no route')
        except ConnectFailed as e:
            assert classify_failure(e) == UNREACHABLE

    def test_rejected(self):
        assert classify_failure(ServerRejected(0x80130000)) == REJECTED


class TestScan:

    def test_closed_port(self):
        report = scan([f"127.0.0.1:{free_port()}"], timeout=1.0)
        assert report.descriptors == []
        assert [f.reason for f in report.failures] == [REFUSED]

    def test_non_opc_listener(self, garbage_listener):
        report = scan([f"127.0.0.1:{garbage_listener}"], timeout=2.0)
        assert report.descriptors == []
        assert report.failures[0].reason == NON_OPC

    def test_real_server(self, make_server, server_identity):
        server = make_server()
        host, port = server.address
        report = OpcScanner(timeout=2.0, max_workers=2).scan([f"{host}:{port}", f"127.0.0.1:{free_port()}"])

        assert len(report.descriptors) == 1
        target = report.descriptors[0]
        assert target.port == port
        assert target.server_certificate == server_identity.der
        assert target.application.application_uri == 'urn:trustkit:test:server'
        assert [e.security_policy_uri.rsplit('#', 1)[-1] for e in target.endpoints] == ['Basic256Sha256'] * 2
        assert len(report.failures) == 1

        summary = report.to_dict()
        assert summary['descriptors'][0]['endpoints'][1]['security_mode'] == 'SIGN_AND_ENCRYPT'
        assert summary['descriptors'][0]['has_certificate'] is True

    def test_bad_target_raises_before_probing(self):
        with pytest.raises(ConfigurationError):
            scan(['plc:notaport'])

    def test_empty(self):
        assert scan([]).to_dict() == {'descriptors': [], 'failures': []}
