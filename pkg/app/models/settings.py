#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE PARAMÈTRES - OPC UA TRUSTKIT
Fichier: app/models/settings.py

Configuration d'exécution d'un serveur et d'un client OPC UA (identité,
endpoints, politique de confiance, utilisateurs, nœuds initiaux).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from app.exceptions import ConfigurationError
from app.models.certificate import ApplicationIdentity
from app.models.endpoint import DEFAULT_PORT, is_secure_endpoint, validate_endpoint
from app.models.node_store import NodeEntry, default_nodes
from app.models.trust import TrustPolicy
from app.protocol.structures import EndpointDescription


@dataclass
class ServerConfig:
    """
    Configuration d'un serveur.

    Attributes:
        identity: Certificat + clé (obligatoire dès qu'un endpoint est sécurisé)
        endpoints: Offres annoncées; URL et certificat complétés au démarrage
        trust_policy: Jugement des certificats clients
        trust_store: TrustStore (créé vide par le serveur si absent)
        users: Nom d'utilisateur -> mot de passe en clair (haché au démarrage)
        anonymous_allowed: Accepte les jetons anonymes
        nodes: Contenu initial du NodeStore
        host, port: Adresse d'écoute (port 0 = attribué par le système)
    """
    identity: Optional[ApplicationIdentity] = None
    endpoints: List[EndpointDescription] = field(default_factory=list)
    trust_policy: TrustPolicy = field(default_factory=TrustPolicy.strict)
    trust_store: Any = None
    users: Dict[str, str] = field(default_factory=dict)
    anonymous_allowed: bool = False
    nodes: Dict[str, NodeEntry] = field(default_factory=default_nodes)
    host: str = '127.0.0.1'
    port: int = DEFAULT_PORT
    application_uri: Optional[str] = None
    application_name: str = 'TrustKit Server'
    product_uri: str = 'urn:opcua-trustkit:server'
    max_chunk_size: int = 65536
    max_chunk_count: int = 64
    token_lifetime_ms: int = 3_600_000
    socket_timeout: float = 30.0
    bcrypt_rounds: int = 12

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        Raises:
            ConfigurationError: aucun endpoint, endpoint incohérent ou
                endpoint sécurisé sans identité
        """
        if not self.endpoints:
            raise ConfigurationError("Au moins un endpoint est requis")
        for endpoint in self.endpoints:
            validate_endpoint(endpoint)
            if is_secure_endpoint(endpoint) and self.identity is None:
                raise ConfigurationError(
                    f"Endpoint {endpoint.security_mode.name} sans identité applicative")
        if not 0 <= self.port <= 65535:
            raise ConfigurationError(f"Port invalide: {self.port}")
        if self.application_uri is None and self.identity is None:
            raise ConfigurationError("application_uri requis sans identité")

    @property
    def resolved_application_uri(self) -> str:
        return self.application_uri or self.identity.application_uri


@dataclass
class ClientConfig:
    """
    Configuration d'un client.

    endpoint_selection vaut None pour « le plus sécurisé disponible ».
    """
    identity: Optional[ApplicationIdentity] = None
    trust_policy: TrustPolicy = field(default_factory=TrustPolicy.strict)
    trust_store: Any = None
    endpoint_selection: Optional[EndpointDescription] = None
    username: Optional[str] = None
    password: Optional[str] = None
    encrypt_token_under_none: bool = True
    application_name: str = 'TrustKit Client'
    application_uri: Optional[str] = None
    session_name: str = 'trustkit-session'
    timeout: float = 10.0
    max_chunk_size: int = 65536
    max_chunk_count: int = 64

    def __post_init__(self):
        if self.password is not None and not self.username:
            raise ConfigurationError("Un mot de passe exige un nom d'utilisateur")

    @property
    def uses_username(self) -> bool:
        return bool(self.username)

    @property
    def resolved_application_uri(self) -> str:
        if self.application_uri:
            return self.application_uri
        if self.identity is not None:
            return self.identity.application_uri
        return 'urn:opcua-trustkit:client'
