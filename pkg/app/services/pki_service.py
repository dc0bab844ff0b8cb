#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE PKI - OPC UA TRUSTKIT
Fichier: app/services/pki_service.py

Génération et clonage de certificats d'instance d'application, calcul des
empreintes, décisions de confiance selon la politique configurée et
magasin de confiance persistant (répertoires trusted/ et rejected/).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import hashlib
import threading
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional, Union

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import ExtendedKeyUsageOID, NameOID

from app.exceptions import InvalidParameter, NotInRejectedList, UnparseableCertificate
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.models.trust import (
    AcceptanceBasis, DecisionRecord, TrustDecision, TrustPolicy, TrustPolicyKind
)
from app.protocol.status import StatusCode
from app.utils.logger import AuditLogger, LoggerMixin, get_logger

logger = get_logger(__name__)
audit = AuditLogger()

ALLOWED_KEY_BITS = (2048, 4096)
MIN_KEY_BITS = 2048
PUBLIC_EXPONENT = 65537

# Extensions liées à la clé, régénérées lors d'un clonage
_KEY_BOUND_EXTENSIONS = (x509.SubjectKeyIdentifier, x509.AuthorityKeyIdentifier)


def thumbprint(der: bytes) -> bytes:
    """Empreinte SHA-1 (20 octets) d'un encodage DER."""
    return hashlib.sha1(der).digest()


def parse_certificate(der: bytes) -> CertificateRecord:
    """
    Analyse un certificat DER d'instance d'application.

    Raises:
        UnparseableCertificate: DER invalide, pas d'URI SAN, clé non RSA ou
            inférieure à 2048 bits
    """
    try:
        cert = x509.load_der_x509_certificate(bytes(der))
    except (ValueError, TypeError) as e:
        raise UnparseableCertificate(f"Certificat illisible: {e}") from e
    return _record_from(cert, bytes(der))


def _record_from(cert: x509.Certificate, der: bytes) -> CertificateRecord:
    application_uri = _application_uri(cert)

    public_key = cert.public_key()
    if not isinstance(public_key, rsa.RSAPublicKey):
        raise UnparseableCertificate("Clé publique non RSA")
    if public_key.key_size < MIN_KEY_BITS:
        raise UnparseableCertificate(f"Clé RSA de {public_key.key_size} bits (< {MIN_KEY_BITS})")

    common_names = cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)
    return CertificateRecord(
        der=der,
        thumbprint=thumbprint(der),
        subject_common_name=common_names[0].value if common_names else '',
        application_uri=application_uri,
        not_before=cert.not_valid_before_utc,
        not_after=cert.not_valid_after_utc,
        public_key=public_key,
    )


def _application_uri(cert: x509.Certificate) -> str:
    try:
        san = cert.extensions.get_extension_for_class(x509.SubjectAlternativeName).value
    except x509.ExtensionNotFound as e:
        raise UnparseableCertificate("Extension subjectAltName absente") from e
    except ValueError as e:
        raise UnparseableCertificate(f"Extensions illisibles: {e}") from e
    uris = san.get_values_for_type(x509.UniformResourceIdentifier)
    if not uris or not uris[0]:
        raise UnparseableCertificate("Aucune URI d'application dans subjectAltName")
    return uris[0]


def _der_of(cert: x509.Certificate) -> bytes:
    return cert.public_bytes(serialization.Encoding.DER)


def generate_identity(common_name: str, application_uri: str, validity_days: int = 365,
                      key_bits: int = 2048, organization: Optional[str] = None,
                      dns_names: Optional[List[str]] = None) -> ApplicationIdentity:
    """
    Génère une identité auto-signée (certificat + clé RSA fraîche).

    Args:
        common_name: CN du sujet
        application_uri: URI placée dans subjectAltName
        validity_days: Durée de validité en jours (> 0)
        key_bits: 2048 ou 4096
        organization: Organisation du sujet (optionnel)
        dns_names: Noms DNS additionnels dans subjectAltName

    Returns:
        ApplicationIdentity

    Raises:
        InvalidParameter: paramètre vide ou hors domaine
    """
    if not common_name or not application_uri:
        raise InvalidParameter("common_name et application_uri sont obligatoires")
    if not isinstance(validity_days, int) or validity_days <= 0:
        raise InvalidParameter(f"validity_days doit être positif: {validity_days}")
    if key_bits not in ALLOWED_KEY_BITS:
        raise InvalidParameter(f"key_bits doit valoir 2048 ou 4096: {key_bits}")

    private_key = rsa.generate_private_key(public_exponent=PUBLIC_EXPONENT, key_size=key_bits)

    attributes = [x509.NameAttribute(NameOID.COMMON_NAME, common_name)]
    if organization:
        attributes.append(x509.NameAttribute(NameOID.ORGANIZATION_NAME, organization))
    name = x509.Name(attributes)

    alt_names = [x509.UniformResourceIdentifier(application_uri)]
    alt_names.extend(x509.DNSName(dns) for dns in (dns_names or []))

    now = datetime.now(timezone.utc).replace(microsecond=0)
    builder = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(private_key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - timedelta(minutes=5))
        .not_valid_after(now + timedelta(days=validity_days))
        .add_extension(x509.SubjectAlternativeName(alt_names), critical=False)
        .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
        .add_extension(x509.KeyUsage(
            digital_signature=True,
            content_commitment=True,
            key_encipherment=True,
            data_encipherment=True,
            key_agreement=False,
            key_cert_sign=False,
            crl_sign=False,
            encipher_only=False,
            decipher_only=False,
        ), critical=True)
        .add_extension(x509.ExtendedKeyUsage(
            [ExtendedKeyUsageOID.SERVER_AUTH, ExtendedKeyUsageOID.CLIENT_AUTH]), critical=False)
        .add_extension(x509.SubjectKeyIdentifier.from_public_key(private_key.public_key()), critical=False)
    )
    cert = builder.sign(private_key, hashes.SHA256())
    record = _record_from(cert, _der_of(cert))

    logger.info(f"🔐 Identité générée: {common_name} ({application_uri}) - Empreinte: {record.hex_thumbprint}")
    return ApplicationIdentity(record, private_key)


def clone_certificate(target: Union[CertificateRecord, bytes]) -> ApplicationIdentity:
    """
    Produit un certificat auto-signé reprenant sujet, numéro de série,
    fenêtre de validité et extensions de la cible, avec une clé fraîche de
    même taille. Seules l'empreinte et la clé publique diffèrent.

    Raises:
        UnparseableCertificate: cible illisible ou sans URI SAN
    """
    der = target.der if isinstance(target, CertificateRecord) else bytes(target)
    try:
        original = x509.load_der_x509_certificate(der)
    except (ValueError, TypeError) as e:
        raise UnparseableCertificate(f"Certificat cible illisible: {e}") from e
    _application_uri(original)

    original_key = original.public_key()
    key_bits = max(getattr(original_key, 'key_size', MIN_KEY_BITS), MIN_KEY_BITS)
    private_key = rsa.generate_private_key(public_exponent=PUBLIC_EXPONENT, key_size=key_bits)

    builder = (
        x509.CertificateBuilder()
        .subject_name(original.subject)
        .issuer_name(original.subject)
        .public_key(private_key.public_key())
        .serial_number(original.serial_number)
        .not_valid_before(original.not_valid_before_utc)
        .not_valid_after(original.not_valid_after_utc)
    )
    for extension in original.extensions:
        if isinstance(extension.value, _KEY_BOUND_EXTENSIONS):
            continue
        builder = builder.add_extension(extension.value, critical=extension.critical)
    builder = builder.add_extension(
        x509.SubjectKeyIdentifier.from_public_key(private_key.public_key()), critical=False)

    cert = builder.sign(private_key, hashes.SHA256())
    record = _record_from(cert, _der_of(cert))
    logger.info(f"🎭 Certificat cloné: {record.subject_common_name} ({record.application_uri}) - "
                f"Empreinte: {record.hex_thumbprint}")
    return ApplicationIdentity(record, private_key)


class TrustStore(LoggerMixin):
    """
    Magasin de confiance: certificats approuvés (par empreinte), liste
    ordonnée des certificats refusés et journal des décisions.

    Les mutations sont sérialisées par un verrou unique. Si
    persistence_path est fourni, chaque certificat est stocké sous
    <empreinte-hex>.der dans trusted/ ou rejected/.
    """

    def __init__(self, persistence_path: Optional[Union[str, Path]] = None,
                 trusted: Optional[List[CertificateRecord]] = None):
        self._trusted: Dict[bytes, CertificateRecord] = {}
        self._rejected: List[CertificateRecord] = []
        self._promoted = set()
        self._decisions: List[DecisionRecord] = []
        self._lock = threading.RLock()
        self.persistence_path = Path(persistence_path) if persistence_path else None

        if self.persistence_path:
            self.load()
        for record in trusted or []:
            self.trust(record)

    # === CONSULTATION ===

    @property
    def trusted(self) -> Dict[bytes, CertificateRecord]:
        with self._lock:
            return dict(self._trusted)

    @property
    def rejected(self) -> List[CertificateRecord]:
        with self._lock:
            return list(self._rejected)

    @property
    def decisions(self) -> List[DecisionRecord]:
        with self._lock:
            return list(self._decisions)

    def is_trusted(self, record: CertificateRecord) -> bool:
        """Membre par empreinte, départagé par égalité DER complète."""
        with self._lock:
            entry = self._trusted.get(record.thumbprint)
            return entry is not None and entry.der == record.der

    def was_promoted(self, thumbprint_value: bytes) -> bool:
        with self._lock:
            return thumbprint_value in self._promoted

    def find_rejected(self, thumbprint_value: bytes) -> Optional[CertificateRecord]:
        with self._lock:
            for record in self._rejected:
                if record.thumbprint == thumbprint_value:
                    return record
            return None

    # === MUTATIONS ===

    def trust(self, record: CertificateRecord):
        """Ajoute un certificat à la liste de confiance (pré-provisionnement)."""
        with self._lock:
            self._trusted[record.thumbprint] = record
            self._rejected = [r for r in self._rejected if r.thumbprint != record.thumbprint]
            self._write('trusted', record)
            self._remove('rejected', record)
        self.logger.debug(f"✅ Certificat approuvé: {record.application_uri} ({record.hex_thumbprint})")

    def add_rejected(self, record: CertificateRecord) -> bool:
        """
        Ajoute un certificat refusé s'il n'y figure pas déjà.

        Returns:
            True si une nouvelle entrée a été créée
        """
        with self._lock:
            if any(r.thumbprint == record.thumbprint for r in self._rejected):
                return False
            self._rejected.append(record)
            self._write('rejected', record)
            return True

    def promote(self, thumbprint_value: bytes) -> CertificateRecord:
        """
        Déplace un certificat de rejected vers trusted (action opérateur).

        Raises:
            NotInRejectedList: empreinte absente de la liste des refusés
        """
        with self._lock:
            record = self.find_rejected(thumbprint_value)
            if record is None:
                raise NotInRejectedList(f"Empreinte absente des refusés: {bytes(thumbprint_value).hex()}")
            self.trust(record)
            self._promoted.add(record.thumbprint)
        audit.log_promotion(record.hex_thumbprint, record.application_uri)
        return record

    def record_decision(self, peer: CertificateRecord, policy: TrustPolicy, decision: TrustDecision):
        with self._lock:
            self._decisions.append(DecisionRecord(
                thumbprint=peer.hex_thumbprint,
                application_uri=peer.application_uri,
                policy=policy.describe(),
                accepted=decision.accepted,
                basis=decision.basis.value if decision.basis else None,
                reason=decision.reason,
            ))

    # === PERSISTANCE ===

    def load(self):
        """Charge trusted/ et rejected/ depuis persistence_path."""
        if not self.persistence_path:
            return
        with self._lock:
            for folder in ('trusted', 'rejected'):
                directory = self.persistence_path / folder
                directory.mkdir(parents=True, exist_ok=True)
                for path in sorted(directory.glob('*.der'), key=lambda p: (p.stat().st_mtime, p.name)):
                    try:
                        record = parse_certificate(path.read_bytes())
                    except UnparseableCertificate as e:
                        self.logger.warning(f"⚠️ Certificat ignoré {path}: {e}")
                        continue
                    if folder == 'trusted':
                        self._trusted[record.thumbprint] = record
                    elif record.thumbprint not in self._trusted:
                        self._rejected.append(record)
            self.logger.info(f"📁 Magasin chargé: {len(self._trusted)} approuvés, {len(self._rejected)} refusés")

    def persist(self):
        """Réécrit intégralement l'état sur disque."""
        if not self.persistence_path:
            return
        with self._lock:
            for folder, records in (('trusted', self._trusted.values()), ('rejected', self._rejected)):
                directory = self.persistence_path / folder
                directory.mkdir(parents=True, exist_ok=True)
                wanted = {f"{r.hex_thumbprint}.der" for r in records}
                for path in directory.glob('*.der'):
                    if path.name not in wanted:
                        path.unlink()
                for record in records:
                    self._write(folder, record)

    def _write(self, folder: str, record: CertificateRecord):
        if not self.persistence_path:
            return
        directory = self.persistence_path / folder
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{record.hex_thumbprint}.der").write_bytes(record.der)

    def _remove(self, folder: str, record: CertificateRecord):
        if not self.persistence_path:
            return
        path = self.persistence_path / folder / f"{record.hex_thumbprint}.der"
        if path.exists():
            path.unlink()


def validate_peer(peer: CertificateRecord, policy: TrustPolicy, store: TrustStore,
                  now: Optional[datetime] = None) -> TrustDecision:
    """
    Décide si un certificat pair est accepté selon la politique.

    Strict: accepté ssi présent dans la liste de confiance (et dans sa
    fenêtre de validité). AcceptAll: toujours accepté.
    AcceptAllDefaultFlag: accepté si auto_accept, sinon Strict.
    RejectedStore: Strict, et tout refus est ajouté aux refusés.

    Returns:
        TrustDecision (un refus est une valeur, pas une exception)
    """
    moment = now or datetime.now(timezone.utc)

    if policy.kind == TrustPolicyKind.ACCEPT_ALL:
        decision = TrustDecision.accept(AcceptanceBasis.NO_VALIDATION)
    elif policy.kind == TrustPolicyKind.ACCEPT_ALL_DEFAULT_FLAG and policy.auto_accept:
        decision = TrustDecision.accept(AcceptanceBasis.AUTO_ACCEPT_FLAG)
    elif store.is_trusted(peer):
        if not peer.is_valid_at(moment):
            decision = TrustDecision.reject(StatusCode.BadCertificateTimeInvalid)
        elif store.was_promoted(peer.thumbprint):
            decision = TrustDecision.accept(AcceptanceBasis.PROMOTED)
        else:
            decision = TrustDecision.accept(AcceptanceBasis.TRUSTLIST)
    else:
        if policy.kind == TrustPolicyKind.REJECTED_STORE:
            store.add_rejected(peer)
        decision = TrustDecision.reject(StatusCode.BadCertificateUntrusted)

    store.record_decision(peer, policy, decision)
    if decision.accepted:
        audit.log_trust_acceptance(peer.application_uri, peer.hex_thumbprint, policy.describe(),
                                   decision.basis.value)
    else:
        audit.log_trust_rejection(peer.application_uri, peer.hex_thumbprint, policy.describe(),
                                  f"0x{decision.reason:08X}")
    return decision


def promote_rejected(store: TrustStore, thumbprint_value: bytes) -> TrustStore:
    """Promotion manuelle d'un certificat refusé; renvoie le magasin mis à jour."""
    store.promote(thumbprint_value)
    return store


# === IDENTITÉS SUR DISQUE ===

def save_identity(identity: ApplicationIdentity, directory: Union[str, Path], name: str) -> Path:
    """
    Écrit <name>.der (certificat) et <name>.key.der (clé PKCS#8 DER).

    Returns:
        Chemin du certificat
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cert_path = directory / f"{name}.der"
    key_path = directory / f"{name}.key.der"
    cert_path.write_bytes(identity.der)
    key_path.write_bytes(identity.private_key.private_bytes(
        encoding=serialization.Encoding.DER,
        format=serialization.PrivateFormat.PKCS8,
        encryption_algorithm=serialization.NoEncryption(),
    ))
    logger.debug(f"💾 Identité sauvegardée: {cert_path}")
    return cert_path


def load_identity(directory: Union[str, Path], name: str) -> ApplicationIdentity:
    """
    Relit une identité écrite par save_identity.

    Raises:
        UnparseableCertificate: fichiers absents, illisibles ou clé non assortie
    """
    directory = Path(directory)
    cert_path = directory / f"{name}.der"
    key_path = directory / f"{name}.key.der"
    if not cert_path.exists() or not key_path.exists():
        raise UnparseableCertificate(f"Identité introuvable: {cert_path}")

    record = parse_certificate(cert_path.read_bytes())
    try:
        private_key = serialization.load_der_private_key(key_path.read_bytes(), password=None)
    except (ValueError, TypeError) as e:
        raise UnparseableCertificate(f"Clé privée illisible {key_path}: {e}") from e
    if private_key.public_key().public_numbers() != record.public_key.public_numbers():
        raise UnparseableCertificate(f"La clé {key_path} ne correspond pas au certificat")
    return ApplicationIdentity(record, private_key)


def load_or_create_identity(directory: Union[str, Path], name: str, common_name: str,
                            application_uri: str, validity_days: int = 365,
                            key_bits: int = 2048) -> ApplicationIdentity:
    """Recharge l'identité persistée, ou la génère et la sauvegarde."""
    try:
        identity = load_identity(directory, name)
        if identity.application_uri == application_uri:
            return identity
        logger.warning(f"⚠️ URI persistée {identity.application_uri} != {application_uri}, régénération")
    except UnparseableCertificate:
        pass
    identity = generate_identity(common_name, application_uri, validity_days, key_bits)
    save_identity(identity, directory, name)
    return identity
