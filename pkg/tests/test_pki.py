#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TESTS PKI ET MAGASIN DE CONFIANCE
Fichier: tests/test_pki.py

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from datetime import datetime, timedelta, timezone

import pytest
from cryptography import x509

from app.exceptions import InvalidParameter, NotInRejectedList, UnparseableCertificate
from app.models.trust import AcceptanceBasis, TrustPolicy
from app.protocol.status import StatusCode
from app.services.pki_service import (
    TrustStore, clone_certificate, generate_identity, load_identity, load_or_create_identity,
    parse_certificate, promote_rejected, save_identity, thumbprint, validate_peer
)


class TestIdentities:

    def test_generated_certificate(self, server_identity):
        record = server_identity.record
        assert record.application_uri == 'urn:trustkit:test:server'
        assert record.subject_common_name == 'Test Server'
        assert record.key_bits == 2048
        assert record.thumbprint == thumbprint(record.der)
        assert len(record.thumbprint) == 20
        assert record.is_valid_at(datetime.now(timezone.utc))

    def test_parse_round_trip(self, client_identity):
        assert parse_certificate(client_identity.der) == client_identity.record

    @pytest.mark.parametrize('kwargs', [
        {'common_name': '', 'application_uri': 'urn:x'},
        {'common_name': 'x', 'application_uri': ''},
        {'common_name': 'x', 'application_uri': 'urn:x', 'key_bits': 1024},
        {'common_name': 'x', 'application_uri': 'urn:x', 'validity_days': 0},
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(InvalidParameter):
            generate_identity(**kwargs)

    def test_garbage_is_unparseable(self):
        with pytest.raises(UnparseableCertificate):
            parse_certificate(b'not a certificate')

    def test_clone_keeps_fields_but_not_thumbprint(self, client_identity):
        clone = clone_certificate(client_identity.record)
        original = x509.load_der_x509_certificate(client_identity.der)
        copied = x509.load_der_x509_certificate(clone.der)

        assert clone.record.thumbprint != client_identity.record.thumbprint
        assert clone.record.application_uri == client_identity.record.application_uri
        assert clone.record.subject_common_name == client_identity.record.subject_common_name
        assert clone.record.not_before == client_identity.record.not_before
        assert clone.record.not_after == client_identity.record.not_after
        assert copied.serial_number == original.serial_number
        assert copied.subject == original.subject
        assert clone.record.key_bits == client_identity.record.key_bits
        assert (clone.record.public_key.public_numbers()
                != client_identity.record.public_key.public_numbers())

    def test_clone_from_der(self, server_identity):
        assert clone_certificate(server_identity.der).application_uri == server_identity.application_uri

    def test_clone_garbage(self):
        with pytest.raises(UnparseableCertificate):
            clone_certificate(b'\x30\x00')

    def test_save_and_load(self, client_identity, pki_dir):
        save_identity(client_identity, pki_dir, 'client')
        loaded = load_identity(pki_dir, 'client')
        assert loaded.record == client_identity.record

    def test_load_missing(self, pki_dir):
        with pytest.raises(UnparseableCertificate):
            load_identity(pki_dir, 'absent')

    def test_load_or_create_reuses(self, pki_dir):
        first = load_or_create_identity(pki_dir, 'victim', 'Victim', 'urn:trustkit:victim')
        second = load_or_create_identity(pki_dir, 'victim', 'Victim', 'urn:trustkit:victim')
        assert first.record.thumbprint == second.record.thumbprint


class TestValidatePeer:

    def test_strict_rejects_unknown(self, client_identity):
        store = TrustStore()
        decision = validate_peer(client_identity.record, TrustPolicy.strict(), store)
        assert not decision
        assert decision.reason == StatusCode.BadCertificateUntrusted
        assert store.rejected == []

    def test_strict_accepts_trusted(self, client_identity):
        store = TrustStore(trusted=[client_identity.record])
        decision = validate_peer(client_identity.record, TrustPolicy.strict(), store)
        assert decision.accepted
        assert decision.basis == AcceptanceBasis.TRUSTLIST

    def test_strict_rejects_look_alike(self, client_identity):
        store = TrustStore(trusted=[client_identity.record])
        clone = clone_certificate(client_identity.record)
        assert not validate_peer(clone.record, TrustPolicy.strict(), store)

    def test_expired_trusted_certificate(self, client_identity):
        store = TrustStore(trusted=[client_identity.record])
        later = client_identity.record.not_after + timedelta(days=1)
        decision = validate_peer(client_identity.record, TrustPolicy.strict(), store, now=later)
        assert decision.reason == StatusCode.BadCertificateTimeInvalid

    def test_accept_all(self, client_identity):
        decision = validate_peer(client_identity.record, TrustPolicy.accept_all(), TrustStore())
        assert decision.basis == AcceptanceBasis.NO_VALIDATION

    def test_default_flag_on(self, client_identity):
        decision = validate_peer(client_identity.record, TrustPolicy.accept_all_default_flag(True), TrustStore())
        assert decision.basis == AcceptanceBasis.AUTO_ACCEPT_FLAG

    def test_default_flag_off_behaves_strict(self, client_identity):
        policy = TrustPolicy.accept_all_default_flag(False)
        assert not validate_peer(client_identity.record, policy, TrustStore())
        trusted = TrustStore(trusted=[client_identity.record])
        assert validate_peer(client_identity.record, policy, trusted).basis == AcceptanceBasis.TRUSTLIST

    def test_rejected_store_then_promotion(self, client_identity):
        store = TrustStore()
        policy = TrustPolicy.rejected_store()
        assert not validate_peer(client_identity.record, policy, store)
        assert not validate_peer(client_identity.record, policy, store)
        assert [r.thumbprint for r in store.rejected] == [client_identity.record.thumbprint]

        assert promote_rejected(store, client_identity.record.thumbprint) is store
        decision = validate_peer(client_identity.record, policy, store)
        assert decision.basis == AcceptanceBasis.PROMOTED
        assert store.rejected == []
        assert store.was_promoted(client_identity.record.thumbprint)

    def test_promote_unknown(self, client_identity):
        with pytest.raises(NotInRejectedList):
            promote_rejected(TrustStore(), client_identity.record.thumbprint)

    def test_decision_log(self, client_identity, server_identity):
        store = TrustStore(trusted=[server_identity.record])
        validate_peer(server_identity.record, TrustPolicy.strict(), store)
        validate_peer(client_identity.record, TrustPolicy.strict(), store)
        log = store.decisions
        assert [d.accepted for d in log] == [True, False]
        assert log[0].basis == 'trustlist'
        assert log[1].thumbprint == client_identity.record.hex_thumbprint
        assert log[1].policy == 'Strict'


class TestPersistence:

    def test_reload(self, pki_dir, client_identity, server_identity):
        store = TrustStore(pki_dir, trusted=[server_identity.record])
        store.add_rejected(client_identity.record)

        reloaded = TrustStore(pki_dir)
        assert reloaded.is_trusted(server_identity.record)
        assert [r.thumbprint for r in reloaded.rejected] == [client_identity.record.thumbprint]
        assert (pki_dir / 'trusted' / f"{server_identity.record.hex_thumbprint}.der").exists()

    def test_promotion_moves_file(self, pki_dir, client_identity):
        store = TrustStore(pki_dir)
        store.add_rejected(client_identity.record)
        store.promote(client_identity.record.thumbprint)
        name = f"{client_identity.record.hex_thumbprint}.der"
        assert (pki_dir / 'trusted' / name).exists()
        assert not (pki_dir / 'rejected' / name).exists()

    def test_unreadable_file_skipped(self, pki_dir, server_identity):
        (pki_dir / 'trusted').mkdir()
        (pki_dir / 'trusted' / 'broken.der').write_bytes(b'garbage')
        store = TrustStore(pki_dir, trusted=[server_identity.record])
        assert list(store.trusted) == [server_identity.record.thumbprint]
