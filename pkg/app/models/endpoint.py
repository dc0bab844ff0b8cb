#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE ENDPOINT - OPC UA TRUSTKIT
Fichier: app/models/endpoint.py

Offres de connexion annoncées par un serveur (mode, politique, jetons
utilisateur acceptés) et cibles découvertes par le scanner.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple
from urllib.parse import urlparse

from app.exceptions import ConfigurationError
from app.models.channel import BASIC256SHA256_URI, POLICY_NONE_URI
from app.protocol.structures import (
    ApplicationDescription, EndpointDescription, MessageSecurityMode, UserTokenPolicy, UserTokenType
)

# Le descripteur d'endpoint est la structure de service elle-même
EndpointDescriptor = EndpointDescription

DEFAULT_PORT = 4840

_MODE_RANK = {
    MessageSecurityMode.SIGN_AND_ENCRYPT: 2,
    MessageSecurityMode.SIGN: 1,
    MessageSecurityMode.NONE: 0,
}
_POLICY_RANK = {BASIC256SHA256_URI: 1, POLICY_NONE_URI: 0}

_TOKEN_POLICY_IDS = {
    UserTokenType.ANONYMOUS: 'anonymous',
    UserTokenType.USERNAME: 'username',
    UserTokenType.CERTIFICATE: 'certificate',
}


def make_token_policy(token_type: UserTokenType, security_policy_uri: Optional[str] = None) -> UserTokenPolicy:
    """Politique de jeton utilisateur; policy_id dérivé du type."""
    token_type = UserTokenType(token_type)
    return UserTokenPolicy(
        policy_id=_TOKEN_POLICY_IDS[token_type],
        token_type=token_type,
        security_policy_uri=security_policy_uri,
    )


def endpoint_offer(mode: MessageSecurityMode, policy_uri: str,
                   token_types: Iterable[UserTokenType] = (UserTokenType.ANONYMOUS,),
                   token_policy_uri: Optional[str] = None) -> EndpointDescription:
    """
    Construit une offre d'endpoint sans URL ni certificat; le serveur les
    complète au démarrage avec son adresse réelle et son certificat.

    Pour un endpoint None, les jetons UserName sont protégés par
    Basic256Sha256 sauf si token_policy_uri est fourni.
    """
    mode = MessageSecurityMode(mode)
    policies = []
    for token_type in token_types:
        uri = None
        if UserTokenType(token_type) == UserTokenType.USERNAME:
            uri = token_policy_uri or (BASIC256SHA256_URI if policy_uri == POLICY_NONE_URI else policy_uri)
        policies.append(make_token_policy(token_type, uri))
    endpoint = EndpointDescription(
        security_mode=mode,
        security_policy_uri=policy_uri,
        user_identity_tokens=policies,
        security_level=security_rank(mode, policy_uri),
    )
    validate_endpoint(endpoint)
    return endpoint


def validate_endpoint(endpoint: EndpointDescription):
    """
    Raises:
        ConfigurationError: mode None sans politique None ou inversement
    """
    is_none_mode = endpoint.security_mode == MessageSecurityMode.NONE
    is_none_policy = endpoint.security_policy_uri == POLICY_NONE_URI
    if endpoint.security_mode == MessageSecurityMode.INVALID:
        raise ConfigurationError("Mode de sécurité Invalid")
    if is_none_mode != is_none_policy:
        raise ConfigurationError(
            f"Mode {endpoint.security_mode.name} incompatible avec {endpoint.security_policy_uri}")


def security_rank(mode: MessageSecurityMode, policy_uri: Optional[str]) -> int:
    return _MODE_RANK.get(MessageSecurityMode(mode), 0) * 2 + _POLICY_RANK.get(policy_uri, 0)


def endpoint_rank(endpoint: EndpointDescription) -> Tuple[int, int]:
    """Clé de tri: SignAndEncrypt > Sign > None, puis Basic256Sha256 > None."""
    return (_MODE_RANK.get(endpoint.security_mode, 0), _POLICY_RANK.get(endpoint.security_policy_uri, 0))


def most_secure(endpoints: List[EndpointDescription]) -> Optional[EndpointDescription]:
    """Endpoint le mieux classé; à égalité, le premier de la liste."""
    best = None
    for endpoint in endpoints:
        if best is None or endpoint_rank(endpoint) > endpoint_rank(best):
            best = endpoint
    return best


def is_secure_endpoint(endpoint: EndpointDescription) -> bool:
    return endpoint.security_mode in (MessageSecurityMode.SIGN, MessageSecurityMode.SIGN_AND_ENCRYPT)


def token_policy_for(endpoint: EndpointDescription, token_type: UserTokenType) -> Optional[UserTokenPolicy]:
    for policy in endpoint.user_identity_tokens or []:
        if policy.token_type == token_type:
            return policy
    return None


def with_location(endpoint: EndpointDescription, url: str, certificate: Optional[bytes],
                  application: Optional[ApplicationDescription] = None) -> EndpointDescription:
    """Copie d'un endpoint pointant vers url, avec le certificat donné."""
    return replace(
        endpoint,
        endpoint_url=url,
        server_certificate=certificate,
        server=application if application is not None else endpoint.server,
    )


def parse_endpoint_url(url: str, default_port: int = DEFAULT_PORT) -> Tuple[str, int]:
    """
    Décompose une URL opc.tcp://hôte:port[/chemin].

    Raises:
        ConfigurationError: schéma autre qu'opc.tcp
    """
    parsed = urlparse(url)
    if parsed.scheme != 'opc.tcp' or not parsed.hostname:
        raise ConfigurationError(f"URL opc.tcp invalide: {url}")
    return parsed.hostname, parsed.port or default_port


def endpoint_url(host: str, port: int) -> str:
    return f"opc.tcp://{host}:{port}"


@dataclass
class TargetDescriptor:
    """
    Serveur découvert par FindServers/GetEndpoints, sans aucune
    authentification.
    """
    address: str
    port: int
    application: ApplicationDescription = field(default_factory=ApplicationDescription)
    endpoints: List[EndpointDescription] = field(default_factory=list)
    server_certificate: Optional[bytes] = None

    @property
    def url(self) -> str:
        return endpoint_url(self.address, self.port)

    @property
    def secure_endpoints(self) -> List[EndpointDescription]:
        return [e for e in self.endpoints if is_secure_endpoint(e)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'url': self.url,
            'application_uri': self.application.application_uri,
            'application_name': self.application.application_name.text,
            'endpoints': [
                {
                    'security_mode': e.security_mode.name,
                    'security_policy_uri': e.security_policy_uri,
                    'user_tokens': [p.token_type.name for p in e.user_identity_tokens or []],
                }
                for e in self.endpoints
            ],
            'has_certificate': self.server_certificate is not None,
        }
